"""Command-line front end.

Every command reads an optional ``--config`` file (INI, section
``[experiment]``, keys named like the long flags with ``-`` or ``_``);
explicit flags override it.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from dsmil.analysis import (
    bag_size_correlation,
    classical_mds,
    disagreement,
    hard_labels,
    per_subspace_auc,
    positive_fraction,
    rank_dissimilarities,
)
from dsmil.data import FORMATS, generate_concept_dataset, load_dataset, save_dataset
from dsmil.dissimilarity import WHOLE_BAG, DissimMatrix, write_matrix_csv
from dsmil.ensemble import COMBINERS, EnsembleConfig, combine, member_hash, member_posteriors
from dsmil.evaluation import (
    auc,
    cross_validate,
    learning_curve,
    stratified_kfold,
    write_results_csv,
    write_summary_json,
)
from dsmil.linear import LOSSES, TrainConfig
from dsmil.pipelines import PIPELINES, Pipeline

COMMANDS = ("evaluate", "sweep", "learning-curve", "analyze", "generate")
GENERATOR_KEYS = ("n_pos", "n_neg", "bag_size", "square_side", "concept_radius", "concept_x", "concept_y")


class ConfigError(ValueError):
    pass


def _bool(v):
    if isinstance(v, bool):
        return v
    text = str(v).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _int_list(v):
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    return [int(x) for x in str(v).replace(" ", "").split(",") if x]


def _str_list(v):
    if isinstance(v, (list, tuple)):
        return list(v)
    return [x for x in str(v).replace(" ", "").split(",") if x]


@dataclass
class ExperimentConfig:
    data: str | None = None
    format: str = "dense-csv"
    n_pos: int = 50
    n_neg: int = 50
    bag_size: int = 50
    square_side: float = 10.0
    concept_radius: float = 0.5
    concept_x: float = 5.0
    concept_y: float = 5.0
    pipeline: str = "DRS"
    scheme: str | None = None
    L: int = 100
    s: int | None = None
    replacement: bool = True
    combiner: str = "mean"
    loss: str = "hinge"
    lam: float = 1.0
    folds: int = 10
    seed: int = 0
    out: str = "results"
    emit_matrix: bool = False
    L_grid: list = field(default_factory=lambda: [1, 5, 10, 25, 50, 100])
    s_grid: list = field(default_factory=lambda: [5, 10, 25, 50, 100])
    sizes: list = field(default_factory=lambda: [10, 20, 40, 70])
    pipelines: list = field(default_factory=lambda: ["Dbag", "Dinst", "DBS", "DRS"])
    repeats: int = 10
    test_fraction: float = 0.3
    file: str | None = None
    explicit: set = field(default_factory=set, repr=False)

    _CASTS = {
        "n_pos": int, "n_neg": int, "bag_size": int, "square_side": float, "concept_radius": float,
        "concept_x": float, "concept_y": float, "L": int, "s": int, "replacement": _bool, "lam": float,
        "folds": int, "seed": int, "emit_matrix": _bool, "L_grid": _int_list, "s_grid": _int_list,
        "sizes": _int_list, "pipelines": _str_list, "repeats": int, "test_fraction": float,
    }

    def set(self, key, value):
        names = {f.name for f in fields(self)} - {"explicit"}
        if key not in names:
            raise ConfigError(f"unknown config key {key!r}")
        cast = self._CASTS.get(key)
        try:
            value = cast(value) if cast and value is not None else value
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
        setattr(self, key, value)
        self.explicit.add(key)

    def validate(self, command):
        if self.data is not None and any(k in self.explicit for k in GENERATOR_KEYS):
            raise ConfigError("data: give either a data file or generator parameters, not both")
        if self.data is not None and not Path(self.data).exists():
            raise ConfigError(f"data: file {self.data!r} does not exist")
        if self.format not in FORMATS:
            raise ConfigError(f"format: {self.format!r} not in {FORMATS}")
        if self.scheme is not None:
            if self.scheme not in ("BS", "RS"):
                raise ConfigError(f"scheme: {self.scheme!r} not in ('BS', 'RS')")
            implied = "D" + self.scheme
            if "pipeline" in self.explicit and self.pipeline != implied:
                raise ConfigError(f"scheme: {self.scheme} conflicts with pipeline {self.pipeline}")
            self.pipeline = implied
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline: {self.pipeline!r} not in {PIPELINES}")
        for p in self.pipelines:
            if p not in PIPELINES:
                raise ConfigError(f"pipelines: {p!r} not in {PIPELINES}")
        if self.combiner not in COMBINERS:
            raise ConfigError(f"combiner: {self.combiner!r} not in {COMBINERS}")
        if self.loss not in LOSSES:
            raise ConfigError(f"loss: {self.loss!r} not in {LOSSES}")
        if self.L < 1:
            raise ConfigError("L: must be at least 1")
        if self.s is not None and self.s < 1:
            raise ConfigError("s: must be at least 1")
        if self.folds < 2:
            raise ConfigError("folds: must be at least 2")
        if not self.lam > 0:
            raise ConfigError("lam: must be positive")
        if command == "sweep" and (not self.L_grid or not self.s_grid):
            raise ConfigError("L_grid/s_grid: grids must be nonempty")
        if command == "learning-curve" and not self.sizes:
            raise ConfigError("sizes: need at least one training size")

    def snapshot(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "explicit"}


# ---------------------------------------------------------------------------
# helpers


def _dataset(cfg: ExperimentConfig):
    if cfg.data is not None:
        return load_dataset(cfg.data, cfg.format)
    return generate_concept_dataset(
        cfg.n_pos, cfg.n_neg, cfg.bag_size, cfg.square_side, (cfg.concept_x, cfg.concept_y), cfg.concept_radius, cfg.seed
    )


def _pipeline(cfg: ExperimentConfig, representation=None, **overrides):
    ens = EnsembleConfig(
        scheme="RS",
        L=overrides.get("L", cfg.L),
        s=overrides.get("s", cfg.s),
        replacement=cfg.replacement,
        combiner=cfg.combiner,
        base=TrainConfig(lam=cfg.lam, seed=cfg.seed),
        seed=cfg.seed,
        loss=cfg.loss,
    )
    return Pipeline(representation or cfg.pipeline, ens)


class _Artifacts:
    """Tracks written and failed output files for the exit status."""

    def __init__(self, out):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.written, self.failed = [], []

    def write(self, name, writer):
        path = self.out / name
        try:
            writer(path)
        except Exception as exc:  # report and continue with the remaining artifacts
            self.failed.append((name, str(exc)))
        else:
            self.written.append(name)

    def finish(self):
        for name, why in self.failed:
            print(f"error: failed to write {name}: {why}", file=sys.stderr)
        return 1 if self.failed else 0


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, (np.ndarray, set)):
        return sorted(o) if isinstance(o, set) else o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# commands


def cmd_evaluate(cfg: ExperimentConfig):
    data = _dataset(cfg)
    pipe = _pipeline(cfg)
    plan = stratified_kfold(data.labels, cfg.folds, cfg.seed)
    res = cross_validate(data, pipe, plan=plan)
    arts = _Artifacts(cfg.out)
    arts.write("results.csv", lambda p: write_results_csv([res], p))
    arts.write("summary.json", lambda p: write_summary_json([res], p))
    if cfg.emit_matrix and cfg.pipeline != "minimax":
        tr, te = plan.folds()[0]
        fitted = pipe.fit(data.subset(tr), stream_key=(0,))
        arts.write("matrix_fold0_train.csv", lambda p: write_matrix_csv(fitted.train_matrix, p))
        arts.write("matrix_fold0_test.csv", lambda p: write_matrix_csv(fitted.represent(data.subset(te)), p))
    print(f"{data.name} {pipe.name}: AUC {100 * res.mean:.1f} ({100 * res.stderr:.1f})")
    return arts.finish()


def cmd_sweep(cfg: ExperimentConfig):
    data = _dataset(cfg)
    plan = stratified_kfold(data.labels, cfg.folds, cfg.seed)
    L_max = max(cfg.L_grid)
    if not cfg.replacement:
        fewest = min(data.subset(tr).n_instances for tr, _ in plan.folds())
        too_big = [s for s in cfg.s_grid if s > fewest]
        if too_big:
            raise ConfigError(f"s_grid: {too_big} exceed the {fewest} training columns available without replacement")
    rows, member_rows = [], []
    for s in cfg.s_grid:
        pipe = _pipeline(cfg, "DRS", L=L_max, s=s)
        for f, (tr, te) in enumerate(plan.folds()):
            test = data.subset(te)
            fitted = pipe.fit(data.subset(tr), stream_key=(f,))
            post = member_posteriors(fitted.ensemble, fitted.represent(test))
            hashes = [member_hash(spec, model) for spec, model in fitted.ensemble.members]
            for r, h in enumerate(hashes):
                member_rows.append([s, f, r, h])
            for L in sorted(set(cfg.L_grid)):
                score = combine(post[:L], cfg.combiner)
                rows.append([data.name, L, s, f, auc(score, test.labels), hashes[L - 1]])
    arts = _Artifacts(cfg.out)
    arts.write("sweep.csv", lambda p: _write_csv(p, ["dataset", "L", "s", "fold", "auc", "last_member_hash"], rows))
    arts.write("sweep_members.csv", lambda p: _write_csv(p, ["s", "fold", "member", "hash"], member_rows))
    for s in cfg.s_grid:
        means = [np.mean([r[4] for r in rows if r[1] == L and r[2] == s]) for L in sorted(set(cfg.L_grid))]
        print(f"s={s}: " + " ".join(f"L={L}:{100 * m:.1f}" for L, m in zip(sorted(set(cfg.L_grid)), means)))
    return arts.finish()


def cmd_learning_curve(cfg: ExperimentConfig):
    data = _dataset(cfg)
    rows = []
    for name in cfg.pipelines:
        curve = learning_curve(data, _pipeline(cfg, name), cfg.sizes, cfg.repeats, cfg.seed, cfg.test_fraction)
        for row in curve:
            rows.append([data.name, name, row["size"], row["mean_auc"], row["stderr"]])
            print(f"{name} size={row['size']}: AUC {100 * row['mean_auc']:.1f} ({100 * row['stderr']:.1f})")
    arts = _Artifacts(cfg.out)
    arts.write(
        "learning_curve.csv", lambda p: _write_csv(p, ["dataset", "pipeline", "size", "mean_auc", "stderr"], rows)
    )
    return arts.finish()


def _ranking_rows(ranking, matrix):
    rows = []
    for col, w, n, rank in zip(ranking.columns, ranking.mean_abs_weight, ranking.selection_count, ranking.ranks):
        if isinstance(matrix, DissimMatrix):
            k = matrix.col_instance[col]
            prov = [matrix.col_bag_ids[col], "bag" if k == WHOLE_BAG else int(k), int(matrix.col_labels[col])]
        else:
            prov = ["", "", ""]
        rows.append([int(rank), int(col)] + prov + [float(w), int(n)])
    return rows


def cmd_analyze(cfg: ExperimentConfig):
    data = _dataset(cfg)
    pipe = _pipeline(cfg)
    plan = stratified_kfold(data.labels, cfg.folds, cfg.seed)
    tr, te = plan.folds()[0]
    test = data.subset(te)
    fitted = pipe.fit(data.subset(tr), stream_key=(0,))
    ens = fitted.ensemble
    matrix = fitted.train_matrix
    total_cols = matrix.shape[1]
    arts = _Artifacts(cfg.out)
    arts.write("ensemble.json", lambda p: _write_json(p, ens.to_dict()))
    ranking = rank_dissimilarities(ens, total_cols)
    arts.write(
        "weight_ranking.csv",
        lambda p: _write_csv(
            p,
            ["rank", "column", "prototype_bag", "instance", "label", "mean_abs_weight", "selection_count"],
            _ranking_rows(ranking, matrix),
        ),
    )
    arts.write("unselected_columns.csv", lambda p: _write_csv(p, ["column"], [[int(c)] for c in ranking.unselected]))
    if pipe.representation in ("DBS", "DRS"):
        test_matrix = fitted.represent(test)
        aucs = per_subspace_auc(ens, test_matrix, test.labels)
        sizes = np.array([len(s) for s in ens.specs])
        posfrac = positive_fraction(ens, matrix)
        bag_label = {b.id: b.label for b in data.bags}
        labels = [bag_label[s.origin[1]] if s.origin[0] == "bag" else "" for s in ens.specs]
        per_rows = [
            [r, sizes[r], "/".join(str(o) for o in spec.origin), labels[r], posfrac[r], aucs[r]]
            for r, spec in enumerate(ens.specs)
        ]
        arts.write(
            "per_subspace_auc.csv",
            lambda p: _write_csv(p, ["member", "size", "origin", "bag_label", "positive_fraction", "auc"], per_rows),
        )
        if pipe.representation == "DBS":

            def _corr(p):
                try:
                    r, rho = bag_size_correlation(sizes, aucs)
                    obj = {"pearson": r, "spearman": rho}
                except ValueError as exc:
                    # equal-sized bags (or equal AUCs) leave the coefficients undefined
                    obj = {"pearson": None, "spearman": None, "undefined": str(exc)}
                _write_json(p, dict(obj, n_subspaces=len(sizes)))

            arts.write("bag_size_correlation.json", _corr)
        hard = hard_labels(member_posteriors(ens, test_matrix))
        dis = disagreement(hard)
        arts.write(
            "disagreement.csv",
            lambda p: _write_csv(p, ["member"] + [f"m{j}" for j in range(len(ens))],
                                 [[i] + [int(c) for c in row] for i, row in enumerate(dis.counts)]),
        )
        coords = classical_mds(dis.counts.astype(float), 2)
        arts.write(
            "mds.csv",
            lambda p: _write_csv(
                p,
                ["member", "x", "y", "size", "positive_fraction", "auc"],
                [[r, coords[r, 0], coords[r, 1], sizes[r], posfrac[r], aucs[r]] for r in range(len(ens))],
            ),
        )
    code = arts.finish()
    print(f"wrote {len(arts.written)} artifact(s) to {arts.out}")
    return code


def cmd_generate(cfg: ExperimentConfig):
    if cfg.data is not None:
        raise ConfigError("data: generate does not read a data file")
    data = _dataset(cfg)
    target = Path(cfg.file) if cfg.file else Path(cfg.out) / f"concept_seed{cfg.seed}.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(data, target, cfg.format)
    print(f"wrote {len(data)} bags ({data.n_instances} instances) to {target}")
    return 0


_DISPATCH = {
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "learning-curve": cmd_learning_curve,
    "analyze": cmd_analyze,
    "generate": cmd_generate,
}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    parser = argparse.ArgumentParser(prog="dsmil", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI file with an [experiment] section")
        p.add_argument("--data", help="dataset file; omit to use the synthetic concept generator")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        for key, typ in (("n-pos", int), ("n-neg", int), ("bag-size", int), ("square-side", float),
                         ("concept-radius", float), ("concept-x", float), ("concept-y", float)):
            p.add_argument(f"--{key}", type=typ)
        if name == "generate":
            p.add_argument("--file", help="dataset file to write (default <out>/concept_seed<seed>.csv)")
            continue
        p.add_argument("--pipeline")
        p.add_argument("--scheme")
        p.add_argument("--L", type=int)
        p.add_argument("--s", type=int)
        p.add_argument("--replacement", type=_bool)
        p.add_argument("--combiner")
        p.add_argument("--loss")
        p.add_argument("--lam", type=float)
        p.add_argument("--folds", type=int)
        p.add_argument("--emit-matrix", action="store_const", const=True)
        if name == "sweep":
            p.add_argument("--L-grid", type=_int_list)
            p.add_argument("--s-grid", type=_int_list)
        if name == "learning-curve":
            p.add_argument("--sizes", type=_int_list)
            p.add_argument("--pipelines", type=_str_list)
            p.add_argument("--repeats", type=int)
            p.add_argument("--test-fraction", type=float)
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep L / s case
        if not parser.read(args.config, encoding="utf-8"):
            raise ConfigError(f"config: cannot read {args.config!r}")
        if "experiment" not in parser:
            raise ConfigError("config: missing [experiment] section")
        for key, value in parser["experiment"].items():
            cfg.set(key.replace("-", "_"), value)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg.set(key, value)
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        cfg.validate(args.command)
        return _DISPATCH[args.command](cfg)
    except ConfigError as exc:
        parser.exit(2, f"dsmil {args.command}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
