"""Training recipes: scaling, representation and classifier, fitted on one training set."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from dsmil.data import MILDataset, Scaler, apply_scaler, fit_scaler
from dsmil.dissimilarity import DissimMatrix, build_matrices, minimax_matrix
from dsmil.ensemble import EnsembleConfig, SubspaceEnsemble, predict_ensemble, train_ensemble

PIPELINES = ("Dbag", "Dinst", "DBS", "DRS", "minimax")
_SCHEME = {"Dbag": "full", "Dinst": "full", "DBS": "BS", "DRS": "RS", "minimax": "full"}


@dataclass(frozen=True)
class Pipeline:
    """A fully specified recipe. ``ensemble.scheme`` is derived from ``representation``."""

    representation: str = "DRS"
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)

    def __post_init__(self):
        if self.representation not in PIPELINES:
            raise ValueError(f"unknown pipeline {self.representation!r}; expected one of {PIPELINES}")
        if self.ensemble.scheme != _SCHEME[self.representation]:
            object.__setattr__(self, "ensemble", replace(self.ensemble, scheme=_SCHEME[self.representation]))

    @property
    def name(self):
        return self.representation

    def snapshot(self):
        e = self.ensemble
        return {
            "pipeline": self.representation,
            "scheme": e.scheme,
            "L": e.L,
            "s": e.s,
            "replacement": e.replacement,
            "combiner": e.combiner,
            "loss": e.loss,
            "lambda": e.base.lam,
            "max_iters": e.base.max_iters,
            "tol": e.base.tol,
            "seed": e.seed,
        }

    def represent(self, objects: MILDataset, prototypes: MILDataset):
        """Feature matrix of ``objects`` against the (already scaled) prototypes."""
        if self.representation == "minimax":
            return minimax_matrix(objects)
        bag_m, inst_m = build_matrices(objects, prototypes)
        return bag_m if self.representation == "Dbag" else inst_m

    def fit(self, train: MILDataset, stream_key=()) -> "FittedPipeline":
        scaler = fit_scaler(train)
        protos = apply_scaler(scaler, train)
        X = self.represent(protos, protos)
        ens = train_ensemble(X, train.labels, self.ensemble, stream_key)
        return FittedPipeline(self, scaler, protos, ens, X)


@dataclass(frozen=True, eq=False)
class FittedPipeline:
    pipeline: Pipeline
    scaler: Scaler
    prototypes: MILDataset
    ensemble: SubspaceEnsemble
    train_matrix: object

    def represent(self, data: MILDataset):
        return self.pipeline.represent(apply_scaler(self.scaler, data), self.prototypes)

    def predict(self, data: MILDataset):
        return predict_ensemble(self.ensemble, self.represent(data))

    @property
    def models(self):
        return self.ensemble.models


def train_matrix_values(fitted: FittedPipeline):
    m = fitted.train_matrix
    return m.values if isinstance(m, DissimMatrix) else np.asarray(m)
