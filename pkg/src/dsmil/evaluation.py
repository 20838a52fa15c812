"""Stratified cross-validation, rank AUC, learning curves and paired comparisons."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from dsmil._rng import stream
from dsmil.data import MILDataset


def auc(scores, labels):
    """Probability that a random positive outscores a random negative (ties count half).

    Computed from average ranks (Mann-Whitney U).
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = labels > 0
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = stats.rankdata(scores)
    # rank sums are integers or half-integers, so this is exact in float64
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def folds(self):
        """``(train_idx, test_idx)`` for each fold in order."""
        idx = np.arange(self.assignments.size)
        return [(idx[self.assignments != f], idx[self.assignments == f]) for f in range(self.k)]

    @property
    def fingerprint(self):
        h = hashlib.sha256(np.asarray(self.assignments, dtype="<i8").tobytes())
        h.update(f"{self.k}".encode())
        return h.hexdigest()[:16]


def stratified_kfold(labels, k=10, seed=0) -> FoldPlan:
    """Per class, shuffle and deal bags round-robin over the folds.

    Each class continues dealing where the previous one stopped, so fold sizes
    stay within one of each other as well.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = stream(seed, "folds")
    assignments = np.full(labels.size, -1, dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if members.size < k:
            raise ValueError(f"class {c} has {members.size} bags, fewer than k={k}")
        members = members[rng.permutation(members.size)]
        assignments[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return FoldPlan(k, assignments, seed)


@dataclass(frozen=True, eq=False)
class EvalResult:
    per_fold_auc: np.ndarray
    fold_ids: tuple
    plan_fingerprint: str
    config: dict = field(default_factory=dict)
    dataset: str = ""
    pipeline: str = ""
    models: tuple = ()

    @property
    def k(self):
        return len(self.per_fold_auc)

    @property
    def mean(self):
        return float(np.mean(self.per_fold_auc))

    @property
    def stderr(self):
        if self.k < 2:
            return 0.0
        return float(np.std(self.per_fold_auc, ddof=1) / np.sqrt(self.k))

    def summary(self):
        return {
            "dataset": self.dataset,
            "pipeline": self.pipeline,
            "k": self.k,
            "mean_auc": self.mean,
            "stderr": self.stderr,
            "per_fold_auc": [float(a) for a in self.per_fold_auc],
            "fold_plan": self.plan_fingerprint,
            "config": self.config,
        }


def _require_binary(dataset):
    labels = dataset.labels
    if not np.all(np.isin(labels, (-1, 1))):
        raise ValueError("evaluation needs every bag labeled +1 or -1")
    return labels


def train_test_auc(train: MILDataset, test: MILDataset, pipeline, stream_key=()):
    """Fit on ``train``, score ``test``; returns ``(auc, fitted)``."""
    fitted = pipeline.fit(train, stream_key=stream_key)
    return auc(fitted.predict(test), test.labels), fitted


def cross_validate(dataset: MILDataset, pipeline, k=10, seed=0, plan: FoldPlan | None = None, keep_models=False):
    """k-fold CV in which every fold-dependent quantity is fitted on training bags only."""
    labels = _require_binary(dataset)
    plan = plan or stratified_kfold(labels, k, seed)
    aucs, fitted_all = [], []
    for f, (tr, te) in enumerate(plan.folds()):
        try:
            a, fitted = train_test_auc(dataset.subset(tr), dataset.subset(te), pipeline, stream_key=(f,))
        except Exception as exc:
            raise RuntimeError(f"fold {f} failed: {exc}") from exc
        aucs.append(a)
        if keep_models:
            fitted_all.append(fitted)
    snapshot = pipeline.snapshot() if hasattr(pipeline, "snapshot") else {}
    return EvalResult(
        np.array(aucs),
        tuple(range(plan.k)),
        plan.fingerprint,
        dict(snapshot, k=plan.k, fold_seed=plan.seed),
        dataset.name,
        getattr(pipeline, "name", type(pipeline).__name__),
        tuple(fitted_all),
    )


# ---------------------------------------------------------------------------
# learning curves


def _stratified_holdout(labels, test_fraction, rng):
    test = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(members.size)]
        n_test = min(members.size - 1, max(1, int(round(test_fraction * members.size))))
        test.extend(members[:n_test])
    test = np.sort(np.array(test, dtype=np.int64))
    train = np.setdiff1d(np.arange(labels.size), test)
    return train, test


def _allocate(class_counts, size):
    """Split ``size`` over classes proportionally (largest remainder), at least one each."""
    counts = np.asarray(class_counts, dtype=float)
    share = counts / counts.sum() * size
    alloc = np.maximum(1, np.floor(share)).astype(int)
    order = np.argsort(-(share - np.floor(share)), kind="stable")
    i = 0
    while alloc.sum() < size:
        c = order[i % len(order)]
        if alloc[c] < counts[c]:
            alloc[c] += 1
        i += 1
    while alloc.sum() > size:
        c = int(np.argmax(alloc))
        alloc[c] -= 1
    return alloc


def learning_curve(dataset: MILDataset, pipeline, train_sizes, repeats=10, seed=0, test_fraction=0.3):
    """Mean and standard error of test AUC for growing stratified training subsets.

    The held-out test split is fixed for all sizes and repeats. Within one
    repeat the subsets are nested; repeat ``r`` draws from its own stream, so
    adding repeats leaves earlier ones untouched.
    """
    labels = _require_binary(dataset)
    pool, test_idx = _stratified_holdout(labels, test_fraction, stream(seed, "holdout"))
    test = dataset.subset(test_idx)
    classes = np.unique(labels[pool])
    by_class = [pool[labels[pool] == c] for c in classes]
    sizes = [int(s) for s in train_sizes]
    for s in sizes:
        if s < len(classes) or s > pool.size:
            raise ValueError(f"training size {s} outside [{len(classes)}, {pool.size}] available bags")
    table = {s: [] for s in sizes}
    for r in range(repeats):
        rng = stream(seed, "learning_curve", r)
        shuffled = [members[rng.permutation(members.size)] for members in by_class]
        for si, s in enumerate(sizes):
            alloc = _allocate([m.size for m in by_class], s)
            idx = np.sort(np.concatenate([m[:a] for m, a in zip(shuffled, alloc)]))
            a, _ = train_test_auc(dataset.subset(idx), test, pipeline, stream_key=(1000 + r, si))
            table[s].append(a)
    rows = []
    for s in sizes:
        v = np.array(table[s])
        se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
        rows.append({"size": s, "mean_auc": float(v.mean()), "stderr": se, "aucs": v})
    return rows


# ---------------------------------------------------------------------------
# comparison


def paired_comparison(a: EvalResult, b: EvalResult, alpha=0.05):
    """Two-sided paired t-test on per-fold AUC differences.

    Returns ``"a-better"``, ``"b-better"`` or ``"indistinguishable"``. Both
    results must come from the same fold plan with folds in the same order.
    """
    if a.plan_fingerprint != b.plan_fingerprint or tuple(a.fold_ids) != tuple(b.fold_ids):
        raise ValueError("results come from different fold plans or fold orders; pairing is invalid")
    diff = np.asarray(a.per_fold_auc, float) - np.asarray(b.per_fold_auc, float)
    if np.all(diff == 0):
        return "indistinguishable"
    if np.all(diff == diff[0]):
        # zero variance: the test statistic is infinite
        return "a-better" if diff[0] > 0 else "b-better"
    p = stats.ttest_rel(a.per_fold_auc, b.per_fold_auc).pvalue
    if p < alpha:
        return "a-better" if diff.mean() > 0 else "b-better"
    return "indistinguishable"


# ---------------------------------------------------------------------------
# output


def write_results_csv(results, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "pipeline", "fold", "auc"])
        for res in results:
            for f, a in zip(res.fold_ids, res.per_fold_auc):
                w.writerow([res.dataset, res.pipeline, f, repr(float(a))])


def write_summary_json(results, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump([r.summary() for r in results], fh, indent=2, sort_keys=True)
        fh.write("\n")
