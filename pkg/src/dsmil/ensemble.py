"""Bag-subspace and random-subspace ensembles over an instance dissimilarity matrix."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from dsmil._rng import stream
from dsmil.dissimilarity import DissimMatrix
from dsmil.linear import LinearModel, TrainConfig, decision, scores_to_posteriors, train_linear

SCHEMES = ("BS", "RS", "full")
COMBINERS = ("mean", "vote", "product", "max")
DEFAULT_L = 100
DEFAULT_S_FRACTION = 0.2


@dataclass(frozen=True, eq=False)
class SubspaceSpec:
    """Column indices of one subspace plus where they came from.

    ``origin`` is ``("bag", bag_id)``, ``("random", seed, draw)`` or ``("full",)``.
    """

    indices: np.ndarray
    origin: tuple

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("a subspace needs at least one column")
        if idx.min() < 0:
            raise ValueError("negative column index")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "origin", tuple(self.origin))

    def __len__(self):
        return self.indices.size


@dataclass(frozen=True)
class EnsembleConfig:
    scheme: str = "RS"
    L: int = DEFAULT_L
    s: int | None = None  # None: ceil(total_cols / 5)
    replacement: bool = True
    combiner: str = "mean"
    base: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    loss: str = "hinge"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.combiner not in COMBINERS:
            raise ValueError(f"unknown combiner {self.combiner!r}; expected one of {COMBINERS}")
        if self.L < 1:
            raise ValueError("L must be at least 1")
        if self.s is not None and self.s < 1:
            raise ValueError("s must be at least 1")

    def subspace_size(self, total_cols):
        if self.s is not None:
            return int(self.s)
        return default_subspace_size(total_cols)


def default_subspace_size(total_cols):
    """One fifth of the available columns, rounded up."""
    return max(1, math.ceil(DEFAULT_S_FRACTION * total_cols - 1e-9))


@dataclass(frozen=True, eq=False)
class SubspaceEnsemble:
    members: tuple  # of (SubspaceSpec, LinearModel)
    combiner: str = "mean"

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("an ensemble needs at least one member")
        for spec, model in members:
            if len(spec) != model.dim:
                raise ValueError("member model dimensionality differs from its subspace length")
        if self.combiner not in COMBINERS:
            raise ValueError(f"unknown combiner {self.combiner!r}")
        object.__setattr__(self, "members", members)

    def __len__(self):
        return len(self.members)

    @property
    def specs(self):
        return [spec for spec, _ in self.members]

    @property
    def models(self):
        return [model for _, model in self.members]

    def prefix(self, n):
        """The first ``n`` members as an ensemble of their own."""
        return SubspaceEnsemble(self.members[:n], self.combiner)

    def to_dict(self):
        return {
            "combiner": self.combiner,
            "members": [
                {"indices": [int(i) for i in spec.indices], "origin": list(spec.origin), "model": model.to_dict()}
                for spec, model in self.members
            ],
        }

    @classmethod
    def from_dict(cls, obj):
        members = tuple(
            (SubspaceSpec(m["indices"], m["origin"]), LinearModel.from_dict(m["model"])) for m in obj["members"]
        )
        return cls(members, obj["combiner"])

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def member_hash(spec: SubspaceSpec, model: LinearModel) -> str:
    h = hashlib.sha256()
    h.update(spec.indices.astype("<i8").tobytes())
    h.update(np.asarray(model.w, dtype="<f8").tobytes())
    h.update(np.float64(model.w0).astype("<f8").tobytes())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# subspace generation


def bag_subspaces(matrix: DissimMatrix):
    """One subspace per prototype bag, covering exactly that bag's instance columns."""
    if not matrix.is_instance_level:
        raise ValueError("bag subspaces need an instance-level matrix (got whole-bag columns)")
    return [SubspaceSpec(cols, ("bag", bag_id)) for bag_id, cols in matrix.prototype_groups()]


def random_subspaces(total_cols, L, s, replacement=True, seed=0, stream_key=()):
    """``L`` subspaces of ``s`` uniformly drawn columns.

    Draws come from one stream consumed member by member, so the first ``k``
    specs never depend on ``L``.
    """
    if L < 1 or s < 1:
        raise ValueError("L and s must be at least 1")
    if not replacement and s > total_cols:
        raise ValueError(f"s={s} exceeds the {total_cols} available columns without replacement")
    rng = stream(seed, "subspaces", *stream_key)
    specs = []
    for r in range(L):
        if replacement:
            idx = rng.integers(0, total_cols, size=s)
        else:
            idx = rng.choice(total_cols, size=s, replace=False)
        specs.append(SubspaceSpec(idx, ("random", int(seed), r)))
    return specs


def make_subspaces(matrix, cfg: EnsembleConfig, stream_key=()):
    total = matrix.shape[1]
    if cfg.scheme == "BS":
        return bag_subspaces(matrix)
    if cfg.scheme == "full":
        return [SubspaceSpec(np.arange(total), ("full",))]
    return random_subspaces(total, cfg.L, cfg.subspace_size(total), cfg.replacement, cfg.seed, stream_key)


# ---------------------------------------------------------------------------
# training and prediction


def _values(matrix):
    return matrix.values if isinstance(matrix, DissimMatrix) else np.asarray(matrix, dtype=np.float64)


def train_members(X, y, specs, base: TrainConfig, loss="hinge"):
    return [(spec, train_linear(X[:, spec.indices], y, base, loss)) for spec in specs]


def train_ensemble(matrix, y, cfg: EnsembleConfig = EnsembleConfig(), stream_key=()) -> SubspaceEnsemble:
    """Fit one linear model per subspace on the column-restricted matrix."""
    X = _values(matrix)
    y = np.asarray(y)
    if X.shape[0] != y.shape[0]:
        raise ValueError("labels are not aligned with matrix rows")
    specs = make_subspaces(matrix, cfg, stream_key)
    return SubspaceEnsemble(tuple(train_members(X, y, specs, cfg.base, cfg.loss)), cfg.combiner)


def combine(member_posteriors, rule="mean"):
    """Merge an ``L x N`` array of member posteriors into one ``N``-vector in [0, 1]."""
    p = np.atleast_2d(np.asarray(member_posteriors, dtype=np.float64))
    if p.size == 0:
        raise ValueError("no member outputs to combine")
    if rule == "mean":
        return p.mean(axis=0)
    if rule == "vote":
        return (p > 0.5).mean(axis=0)
    if rule == "max":
        return p.max(axis=0)
    if rule == "product":
        # raw products underflow towards 0; renormalize over the batch
        return scores_to_posteriors(np.prod(p, axis=0))
    raise ValueError(f"unknown combining rule {rule!r}; expected one of {COMBINERS}")


def member_decisions(ens: SubspaceEnsemble, matrix):
    X = _values(matrix)
    out = np.empty((len(ens), X.shape[0]))
    for r, (spec, model) in enumerate(ens.members):
        if spec.indices.max() >= X.shape[1]:
            raise IndexError(f"member {r} references column {spec.indices.max()} of a {X.shape[1]}-column matrix")
        out[r] = decision(model, X[:, spec.indices])
    return out


def member_posteriors(ens: SubspaceEnsemble, matrix):
    return np.vstack([scores_to_posteriors(s) for s in member_decisions(ens, matrix)])


def predict_ensemble(ens: SubspaceEnsemble, matrix):
    return combine(member_posteriors(ens, matrix), ens.combiner)
