"""Diagnostics for trained ensembles: per-subspace AUC, bag-size correlation,
classifier projection space and dissimilarity weight ranking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from dsmil.dissimilarity import DissimMatrix
from dsmil.ensemble import SubspaceEnsemble, member_posteriors
from dsmil.evaluation import auc


def per_subspace_auc(ens: SubspaceEnsemble, matrix, labels):
    """AUC of every member's normalized output, evaluated separately."""
    labels = np.asarray(labels)
    if np.unique(labels[labels != 0]).size < 2:
        raise ValueError("per-subspace AUC needs both classes among the labels")
    return np.array([auc(p, labels) for p in member_posteriors(ens, matrix)])


def bag_size_correlation(sizes, aucs):
    """Pearson and Spearman coefficients between subspace size and subspace AUC."""
    sizes = np.asarray(sizes, dtype=np.float64)
    aucs = np.asarray(aucs, dtype=np.float64)
    if sizes.shape != aucs.shape or sizes.ndim != 1:
        raise ValueError("sizes and aucs must be vectors of equal length")
    if sizes.size < 3:
        raise ValueError("need at least three points")
    if np.ptp(sizes) == 0 or np.ptp(aucs) == 0:
        raise ValueError("correlation is undefined for a constant input vector")
    return float(stats.pearsonr(sizes, aucs)[0]), float(stats.spearmanr(sizes, aucs)[0])


@dataclass(frozen=True, eq=False)
class DisagreementMatrix:
    counts: np.ndarray
    n_test: int


def hard_labels(posteriors, threshold=0.5):
    return np.where(np.asarray(posteriors) > threshold, 1, -1)


def disagreement(predictions) -> DisagreementMatrix:
    """Pairwise count of test bags on which two members predict different labels."""
    try:
        p = np.asarray(predictions)
    except ValueError:
        raise ValueError("ragged prediction rows") from None
    if p.dtype == object or p.ndim != 2:
        raise ValueError("predictions must be an L x N array of hard labels")
    counts = (p[:, None, :] != p[None, :, :]).sum(axis=2).astype(np.int64)
    return DisagreementMatrix(counts, p.shape[1])


def classical_mds(distances, dims=2):
    """Torgerson scaling: double-center the squared distances and keep the top eigenpairs.

    Negative eigenvalues (non-Euclidean input) are clamped to zero. Each axis is
    signed so that its largest-magnitude coordinate is positive.
    """
    D = np.asarray(distances, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix must be square")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12 * max(1.0, np.abs(D).max())):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(D) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    n = D.shape[0]
    J = np.eye(n) - np.full((n, n), 1.0 / n)
    B = -0.5 * J @ (D * D) @ J
    B = 0.5 * (B + B.T)
    evals, evecs = np.linalg.eigh(B)
    order = np.argsort(evals)[::-1][:dims]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    for j in range(evecs.shape[1]):
        if evecs[np.argmax(np.abs(evecs[:, j])), j] < 0:
            evecs[:, j] *= -1
    coords = evecs * np.sqrt(evals)
    if coords.shape[1] < dims:
        coords = np.hstack([coords, np.zeros((n, dims - coords.shape[1]))])
    return coords - coords.mean(axis=0)


def positive_fraction(ens: SubspaceEnsemble, matrix: DissimMatrix):
    """Share of each subspace's columns that come from positive prototype bags."""
    return np.array([float(np.mean(matrix.col_labels[spec.indices] > 0)) for spec in ens.specs])


@dataclass(frozen=True, eq=False)
class WeightRanking:
    columns: np.ndarray  # ranked column indices, best first
    mean_abs_weight: np.ndarray
    selection_count: np.ndarray
    ranks: np.ndarray  # 1-based
    unselected: np.ndarray

    def rank_of(self, column):
        hit = np.flatnonzero(self.columns == column)
        return int(self.ranks[hit[0]]) if hit.size else None


def rank_dissimilarities(ens: SubspaceEnsemble, total_cols) -> WeightRanking:
    """Rank columns by mean ``|w|`` over the members that selected them.

    A column drawn twice in one subspace contributes both of its weights.
    Ties are broken by column index. Columns no member used are listed in
    ``unselected`` and excluded from the ranking.
    """
    total = np.zeros(total_cols)
    count = np.zeros(total_cols, dtype=np.int64)
    for spec, model in ens.members:
        np.add.at(total, spec.indices, np.abs(model.w))
        np.add.at(count, spec.indices, 1)
    selected = np.flatnonzero(count > 0)
    mean = total[selected] / count[selected]
    order = np.lexsort((selected, -mean))
    return WeightRanking(
        selected[order],
        mean[order],
        count[selected][order],
        np.arange(1, selected.size + 1),
        np.flatnonzero(count == 0),
    )
