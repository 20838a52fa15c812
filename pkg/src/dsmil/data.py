"""Bags, datasets, file formats, feature scaling and the synthetic concept problem."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from dsmil._rng import stream

POSITIVE = 1
NEGATIVE = -1
UNLABELED = 0
_LABELS = (POSITIVE, NEGATIVE, UNLABELED)

FORMATS = ("dense-csv", "sparse-triplet")


class DatasetParseError(ValueError):
    """Raised when a dataset file cannot be read. Carries the offending line."""

    reason = "parse error"

    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{self.reason}: {message}")


class MalformedRowError(DatasetParseError):
    reason = "malformed row"


class DimensionMismatchError(DatasetParseError):
    reason = "inconsistent dimensionality"


class DuplicateBagError(DatasetParseError):
    reason = "duplicate bag id"


class EmptyFileError(DatasetParseError):
    reason = "empty file"


class EmptyBagError(DatasetParseError):
    reason = "empty bag"


def _frozen(a):
    a = np.array(a, dtype=np.float64, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Bag:
    """One MIL object: ``n x d`` instances plus a label in {+1, -1, 0}."""

    id: str
    instances: np.ndarray
    label: int = UNLABELED

    def __post_init__(self):
        x = np.asarray(self.instances, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.ndim != 2:
            raise ValueError(f"bag {self.id!r}: instances must be a 2-D array")
        if x.shape[0] < 1:
            raise ValueError(f"bag {self.id!r}: empty bag")
        if self.label not in _LABELS:
            raise ValueError(f"bag {self.id!r}: label must be one of {_LABELS}, got {self.label!r}")
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "instances", _frozen(x))

    @property
    def size(self):
        return self.instances.shape[0]

    @property
    def d(self):
        return self.instances.shape[1]

    def with_instances(self, instances):
        return Bag(self.id, instances, self.label)

    def with_label(self, label):
        return Bag(self.id, self.instances, label)


@dataclass(frozen=True, eq=False)
class MILDataset:
    """An ordered collection of bags sharing one feature dimensionality."""

    bags: tuple
    name: str = "dataset"
    d: int = field(default=-1)

    def __post_init__(self):
        bags = tuple(self.bags)
        if not bags:
            raise ValueError("a dataset needs at least one bag")
        d = bags[0].d
        seen = set()
        for b in bags:
            if b.d != d:
                raise ValueError(f"bag {b.id!r} has dimensionality {b.d}, expected {d}")
            if b.id in seen:
                raise ValueError(f"duplicate bag id {b.id!r}")
            seen.add(b.id)
        if self.d not in (-1, d):
            raise ValueError(f"declared d={self.d} but bags have d={d}")
        object.__setattr__(self, "bags", bags)
        object.__setattr__(self, "d", d)

    def __len__(self):
        return len(self.bags)

    def __iter__(self):
        return iter(self.bags)

    def __getitem__(self, i):
        return self.bags[i]

    @property
    def ids(self):
        return [b.id for b in self.bags]

    @property
    def labels(self):
        return np.array([b.label for b in self.bags], dtype=np.int64)

    @property
    def sizes(self):
        return np.array([b.size for b in self.bags], dtype=np.int64)

    @property
    def n_instances(self):
        return int(self.sizes.sum())

    def stacked(self):
        """All instances as one array plus the row offsets of each bag."""
        offsets = np.zeros(len(self.bags) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum(self.sizes)
        return np.vstack([b.instances for b in self.bags]), offsets

    def subset(self, indices, name=None):
        return MILDataset(tuple(self.bags[int(i)] for i in indices), name or self.name)

    def relabel(self, labels):
        return MILDataset(tuple(b.with_label(int(y)) for b, y in zip(self.bags, labels)), self.name)


# ---------------------------------------------------------------------------
# scaling


@dataclass(frozen=True, eq=False)
class Scaler:
    """Per-feature z-scoring. ``constant`` marks features whose stddev was replaced by 1."""

    means: np.ndarray
    stddevs: np.ndarray
    constant: np.ndarray

    @property
    def d(self):
        return self.means.shape[0]


def fit_scaler(train: MILDataset) -> Scaler:
    """Fit means and population standard deviations over all pooled instances."""
    x, _ = train.stacked()
    means = x.mean(axis=0)
    std = x.std(axis=0)  # population convention (ddof=0)
    constant = ~(std > 0)
    std = np.where(constant, 1.0, std)
    return Scaler(_frozen(means), _frozen(std), constant)


def apply_scaler(scaler: Scaler, data: MILDataset) -> MILDataset:
    if scaler.d != data.d:
        raise ValueError(f"scaler has d={scaler.d}, dataset has d={data.d}")
    bags = tuple(b.with_instances((b.instances - scaler.means) / scaler.stddevs) for b in data.bags)
    return MILDataset(bags, data.name)


# ---------------------------------------------------------------------------
# file formats


def _fmt(v):
    return repr(float(v))


def _parse_label(text, line):
    try:
        y = int(text)
    except ValueError:
        raise MalformedRowError(f"label {text!r} is not an integer", line) from None
    if y not in _LABELS:
        raise MalformedRowError(f"label {y} not in {{+1, -1, 0}}", line)
    return y


def _parse_float(text, line):
    try:
        return float(text)
    except ValueError:
        raise MalformedRowError(f"value {text!r} is not a number", line) from None


def _read_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        rows.append((lineno, [c.strip() for c in row]))
    if not rows:
        raise EmptyFileError(f"{path} contains no data", 1)
    return rows


def _load_dense(path, name):
    rows = _read_rows(path)
    width = None
    has_header = rows[0][1][0] == "bag_id"
    if has_header:
        width = len(rows[0][1])
        rows = rows[1:]
        if not rows:
            raise EmptyFileError(f"{path} contains only a header", 1)
    order, groups, labels = [], {}, {}
    current = None
    for lineno, row in rows:
        if len(row) < 3:
            raise MalformedRowError(f"expected bag_id,label,f1..fd but got {len(row)} column(s)", lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            if has_header:
                raise MalformedRowError(f"expected {width} columns, got {len(row)}", lineno)
            raise DimensionMismatchError(f"expected {width - 2} features, got {len(row) - 2}", lineno)
        bag_id = row[0]
        label = _parse_label(row[1], lineno)
        values = [_parse_float(v, lineno) for v in row[2:]]
        if bag_id != current:
            if bag_id in groups:
                raise DuplicateBagError(f"bag {bag_id!r} reappears after other bags", lineno)
            groups[bag_id] = []
            labels[bag_id] = label
            order.append(bag_id)
            current = bag_id
        elif labels[bag_id] != label:
            raise MalformedRowError(f"bag {bag_id!r} has conflicting labels", lineno)
        groups[bag_id].append(values)
    bags = tuple(Bag(b, np.array(groups[b]), labels[b]) for b in order)
    return MILDataset(bags, name)


def _load_sparse(path, name):
    rows = _read_rows(path)
    d = None
    if rows[0][1][0].startswith("#"):
        head = rows[0][1]
        if head[0] != "#d" or len(head) != 2:
            raise MalformedRowError("header must read '#d,<dimensionality>'", rows[0][0])
        try:
            d = int(head[1])
        except ValueError:
            raise MalformedRowError(f"dimensionality {head[1]!r} is not an integer", rows[0][0]) from None
        rows = rows[1:]
        if not rows:
            raise EmptyFileError(f"{path} contains only a header", 1)
    bags_raw = []  # (bag_id, label, header line, {instance: {feature: value}})
    seen = set()
    for lineno, row in rows:
        if len(row) == 2:
            bag_id = row[0]
            if bag_id in seen:
                raise DuplicateBagError(f"bag {bag_id!r} declared twice", lineno)
            seen.add(bag_id)
            bags_raw.append((bag_id, _parse_label(row[1], lineno), lineno, {}))
        elif len(row) == 3:
            if not bags_raw:
                raise MalformedRowError("triplet before any bag header", lineno)
            try:
                k, j = int(row[0]), int(row[1])
            except ValueError:
                raise MalformedRowError("instance and feature indices must be integers", lineno) from None
            if k < 0 or j < 0:
                raise MalformedRowError("indices must be nonnegative", lineno)
            if d is not None and j >= d:
                raise DimensionMismatchError(f"feature index {j} outside declared d={d}", lineno)
            bags_raw[-1][3].setdefault(k, {})[j] = _parse_float(row[2], lineno)
        else:
            raise MalformedRowError(f"expected 2 (bag header) or 3 (triplet) columns, got {len(row)}", lineno)
    if d is None:
        d = 1 + max((j for *_, inst in bags_raw for feats in inst.values() for j in feats), default=0)
    bags = []
    for bag_id, label, lineno, inst in bags_raw:
        if not inst:
            raise EmptyBagError(f"bag {bag_id!r} has no instances", lineno)
        x = np.zeros((max(inst) + 1, d))
        for k, feats in inst.items():
            for j, v in feats.items():
                x[k, j] = v
        bags.append(Bag(bag_id, x, label))
    return MILDataset(tuple(bags), name)


def load_dataset(path, format="dense-csv", name=None) -> MILDataset:
    """Read a dataset file.

    ``dense-csv`` rows are ``bag_id,label,f1..fd`` (optional ``bag_id`` header,
    rows of one bag contiguous). ``sparse-triplet`` files start with an optional
    ``#d,<d>`` line, then each bag is a ``bag_id,label`` line followed by
    zero-based ``instance_index,feature_index,value`` triplets.
    """
    path = Path(path)
    name = name or path.stem
    if format == "dense-csv":
        return _load_dense(path, name)
    if format == "sparse-triplet":
        return _load_sparse(path, name)
    raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def save_dataset(dataset: MILDataset, path, format="dense-csv"):
    lines = []
    if format == "dense-csv":
        lines.append(",".join(["bag_id", "label"] + [f"f{j + 1}" for j in range(dataset.d)]))
        for b in dataset.bags:
            for x in b.instances:
                lines.append(",".join([b.id, str(b.label)] + [_fmt(v) for v in x]))
    elif format == "sparse-triplet":
        lines.append(f"#d,{dataset.d}")
        for b in dataset.bags:
            lines.append(f"{b.id},{b.label}")
            for k, x in enumerate(b.instances):
                nz = np.flatnonzero(x)
                if nz.size == 0:
                    nz = np.array([0])  # explicit zero keeps all-zero instances countable
                for j in nz:
                    lines.append(f"{k},{j},{_fmt(x[j])}")
    else:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_uci_musk(path, name=None) -> MILDataset:
    """Convert the UCI Musk ``clean1.data`` / ``clean2.data`` layout.

    Rows are ``molecule,conformation,f1..f166,class`` with class 1 (musk) or 0.
    Each molecule becomes one bag; class 0 maps to label -1.
    """
    path = Path(path)
    groups: dict[str, list] = {}
    labels: dict[str, int] = {}
    width = None
    for lineno, row in _read_rows(path):
        if len(row) < 4:
            raise MalformedRowError("expected molecule, conformation, features and class", lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DimensionMismatchError(f"row has {len(row)} fields, expected {width}", lineno)
        y = 1 if _parse_float(row[-1], lineno) > 0 else -1
        if labels.setdefault(row[0], y) != y:
            raise MalformedRowError(f"molecule {row[0]!r} has conflicting classes", lineno)
        groups.setdefault(row[0], []).append([_parse_float(v, lineno) for v in row[2:-1]])
    bags = tuple(Bag(mol, np.array(rows), labels[mol]) for mol, rows in groups.items())
    return MILDataset(bags, name or path.stem)


# ---------------------------------------------------------------------------
# synthetic concept problem


def concept_membership(points, center, radius):
    points = np.atleast_2d(points)
    return ((points - np.asarray(center, dtype=float)) ** 2).sum(axis=1) <= radius**2


def generate_concept_dataset(
    n_pos=50,
    n_neg=50,
    bag_size=50,
    square_side=10.0,
    concept_center=(5.0, 5.0),
    concept_radius=0.5,
    seed=0,
) -> MILDataset:
    """Bags of 2-D instances drawn uniformly from ``[0, side]^2``.

    Every positive bag gets one randomly chosen instance replaced by a point
    drawn uniformly from the concept disc. Negative bags are left untouched, so
    they may hit the disc by chance.
    """
    if n_pos < 0 or n_neg < 0:
        raise ValueError("bag counts must be nonnegative")
    if bag_size < 1:
        raise ValueError("bag_size must be at least 1")
    cx, cy = map(float, concept_center)
    r = float(concept_radius)
    if r <= 0 or cx - r < 0 or cy - r < 0 or cx + r > square_side or cy + r > square_side:
        raise ValueError("concept region must lie inside the square")
    rng = stream(seed, "generator")
    bags = []
    for i in range(n_pos + n_neg):
        x = rng.uniform(0.0, square_side, size=(bag_size, 2))
        positive = i < n_pos
        if positive:
            k = rng.integers(bag_size)
            rho = r * math.sqrt(rng.uniform())
            phi = rng.uniform(0.0, 2 * math.pi)
            x[k] = (cx + rho * math.cos(phi), cy + rho * math.sin(phi))
        prefix = "pos" if positive else "neg"
        bags.append(Bag(f"{prefix}{i:04d}", x, POSITIVE if positive else NEGATIVE))
    return MILDataset(tuple(bags), "concept")


def accidental_hit_rate(bag_size, square_side=10.0, concept_radius=0.5):
    """Probability that a uniform negative bag has at least one instance in the disc."""
    ratio = math.pi * concept_radius**2 / square_side**2
    return 1.0 - (1.0 - ratio) ** bag_size


def bags_from_arrays(arrays: Sequence, labels, prefix="b", name="dataset") -> MILDataset:
    """Convenience constructor used by tests and notebooks."""
    return MILDataset(
        tuple(Bag(f"{prefix}{i}", np.asarray(a, dtype=float), int(y)) for i, (a, y) in enumerate(zip(arrays, labels))),
        name,
    )
