"""Regularized linear classifiers on dissimilarity vectors.

Objectives are ``mean(loss(y * f(d))) + lam * Omega(w)`` with ``f(d) = w.d + w0``.
The bias is never regularized. Losses: ``"hinge"`` is the squared hinge
``max(0, 1 - m)**2`` (the differentiable primal SVM loss), ``"logistic"`` is
``log(1 + exp(-m))``. ``Omega`` is ``||w||_2**2`` by default or ``||w||_1``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

LOSSES = ("hinge", "logistic")
REGULARIZERS = ("l2", "l1")


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1.0
    max_iters: int = 2000
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True, eq=False)
class LinearModel:
    w: np.ndarray
    w0: float
    lam: float
    loss_kind: str
    regularizer: str = "l2"
    objective: float = float("nan")
    n_iter: int = 0
    converged: bool = True

    @property
    def dim(self):
        return self.w.shape[0]

    def to_dict(self):
        return {
            "w": [float(v) for v in self.w],
            "w0": float(self.w0),
            "lambda": float(self.lam),
            "loss_kind": self.loss_kind,
            "regularizer": self.regularizer,
            "objective": float(self.objective),
            "n_iter": int(self.n_iter),
            "converged": bool(self.converged),
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            w=np.asarray(obj["w"], dtype=np.float64),
            w0=float(obj["w0"]),
            lam=float(obj["lambda"]),
            loss_kind=obj["loss_kind"],
            regularizer=obj.get("regularizer", "l2"),
            objective=float(obj.get("objective", "nan")),
            n_iter=int(obj.get("n_iter", 0)),
            converged=bool(obj.get("converged", True)),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# objectives


def _loss_terms(margins, loss):
    """Per-sample loss and its derivative with respect to the margin."""
    if loss == "hinge":
        h = np.maximum(0.0, 1.0 - margins)
        return h * h, -2.0 * h
    if loss == "logistic":
        # d/dm log(1 + e^-m) = -sigmoid(-m)
        return np.logaddexp(0.0, -margins), -0.5 * (1.0 - np.tanh(0.5 * margins))
    raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")


def data_loss(theta, X, y, loss):
    """Mean loss and gradient with respect to ``theta = [w, w0]``."""
    w, w0 = theta[:-1], theta[-1]
    m = y * (X @ w + w0)
    val, dval = _loss_terms(m, loss)
    coef = dval * y / X.shape[0]
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ coef
    grad[-1] = coef.sum()
    return float(val.mean()), grad


def objective(theta, X, y, lam, loss="hinge", regularizer="l2"):
    """Full training objective at ``theta = [w, w0]``."""
    theta = np.asarray(theta, dtype=np.float64)
    val, _ = data_loss(theta, X, y, loss)
    w = theta[:-1]
    if regularizer == "l2":
        return val + lam * float(w @ w)
    if regularizer == "l1":
        return val + lam * float(np.abs(w).sum())
    raise ValueError(f"unknown regularizer {regularizer!r}")


def objective_and_grad(theta, X, y, lam, loss="hinge"):
    """l2-regularized objective and its analytic gradient."""
    theta = np.asarray(theta, dtype=np.float64)
    val, grad = data_loss(theta, X, y, loss)
    w = theta[:-1]
    grad[:-1] += 2.0 * lam * w
    return val + lam * float(w @ w), grad


# ---------------------------------------------------------------------------
# minimizers


def _lbfgs(fun, x0, tol, max_iters, memory=10, c1=1e-4):
    """Limited-memory quasi-Newton descent with Armijo backtracking."""
    x = x0.copy()
    f, g = fun(x)
    S, Y = deque(maxlen=memory), deque(maxlen=memory)
    it = 0
    for it in range(1, max_iters + 1):
        gnorm = float(np.sqrt(g @ g))
        if gnorm <= tol:
            return x, f, g, it - 1, True
        q = g.copy()
        alphas = []
        for s, yv in zip(reversed(S), reversed(Y)):
            a = (s @ q) / (yv @ s)
            alphas.append(a)
            q -= a * yv
        if S:
            q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
        else:
            q *= min(1.0, 1.0 / gnorm)
        for (s, yv), a in zip(zip(S, Y), reversed(alphas)):
            b = (yv @ q) / (yv @ s)
            q += (a - b) * s
        direction = -q
        slope = float(g @ direction)
        if not slope < 0:
            S.clear()
            Y.clear()
            direction = -g * min(1.0, 1.0 / gnorm)
            slope = float(g @ direction)
        step = 1.0
        while True:
            xn = x + step * direction
            fn, gn = fun(xn)
            if fn <= f + c1 * step * slope:
                break
            step *= 0.5
            if step < 1e-20:
                # no further decrease representable in floating point
                return x, f, g, it, gnorm <= tol
        s, yv = xn - x, gn - g
        if s @ yv > 1e-12 * float(np.sqrt((s @ s) * (yv @ yv))):
            S.append(s)
            Y.append(yv)
        x, f, g = xn, fn, gn
    return x, f, g, it, float(np.sqrt(g @ g)) <= tol


def _proximal_l1(X, y, lam, loss, tol, max_iters):
    """Accelerated proximal gradient for the l1-regularized objective."""

    def smooth(theta):
        return data_loss(theta, X, y, loss)

    def prox(theta, t):
        out = theta.copy()
        out[:-1] = np.sign(theta[:-1]) * np.maximum(np.abs(theta[:-1]) - t * lam, 0.0)
        return out

    theta = np.zeros(X.shape[1] + 1)
    z, t_acc, step = theta.copy(), 1.0, 1.0
    it = 0
    converged = False
    for it in range(1, max_iters + 1):
        fz, gz = smooth(z)
        while True:
            cand = prox(z - step * gz, step)
            diff = cand - z
            fc, _ = smooth(cand)
            if fc <= fz + gz @ diff + (diff @ diff) / (2 * step):
                break
            step *= 0.5
        mapping = float(np.sqrt(diff @ diff)) / step
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t_acc * t_acc))
        z = cand + ((t_acc - 1) / t_next) * (cand - theta)
        theta, t_acc = cand, t_next
        if mapping <= tol:
            converged = True
            break
    return theta, objective(theta, X, y, lam, loss, "l1"), it, converged


# ---------------------------------------------------------------------------
# training


def _check_inputs(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be N x P with one label per row")
    if X.shape[0] < 2:
        raise ValueError("need at least two training rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains NaN or infinite values")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    if np.unique(y).size < 2:
        raise ValueError("training data contains a single class; refusing to fit a degenerate model")
    return X, y


def train_linear(X, y, cfg: TrainConfig = TrainConfig(), loss="hinge", regularizer="l2") -> LinearModel:
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    X, y = _check_inputs(X, y)
    if regularizer == "l2":
        theta, f, _, n_iter, ok = _lbfgs(
            lambda th: objective_and_grad(th, X, y, cfg.lam, loss), np.zeros(X.shape[1] + 1), cfg.tol, cfg.max_iters
        )
    elif regularizer == "l1":
        theta, f, n_iter, ok = _proximal_l1(X, y, cfg.lam, loss, cfg.tol, cfg.max_iters)
    else:
        raise ValueError(f"unknown regularizer {regularizer!r}; expected one of {REGULARIZERS}")
    return LinearModel(theta[:-1].copy(), float(theta[-1]), cfg.lam, loss, regularizer, float(f), n_iter, ok)


def train_linear_svm(X, y, cfg: TrainConfig = TrainConfig()) -> LinearModel:
    """Primal linear SVM with the squared hinge loss and l2 penalty."""
    return train_linear(X, y, cfg, "hinge")


def train_logistic(X, y, cfg: TrainConfig = TrainConfig()) -> LinearModel:
    return train_linear(X, y, cfg, "logistic")


def model_objective(model: LinearModel, X, y):
    theta = np.append(model.w, model.w0)
    return objective(theta, np.asarray(X, float), np.asarray(y, float), model.lam, model.loss_kind, model.regularizer)


def decision(model: LinearModel, d):
    """``w.d + w0`` for one vector or each row of a matrix."""
    d = np.asarray(d, dtype=np.float64)
    if d.shape[-1] != model.dim:
        raise ValueError(f"expected {model.dim} features, got {d.shape[-1]}")
    out = d @ model.w + model.w0
    return float(out) if out.ndim == 0 else out


def scores_to_posteriors(scores):
    """Min-max normalize a batch of scores into [0, 1]; a constant batch maps to 0.5."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("empty score vector")
    lo, hi = s.min(), s.max()
    if not hi > lo:
        return np.full(s.shape, 0.5)
    return (s - lo) / (hi - lo)
