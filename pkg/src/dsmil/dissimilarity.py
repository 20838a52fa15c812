"""Instance distance, bag and instance dissimilarity representations, minimax features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dsmil import kernels
from dsmil.data import Bag, MILDataset

WHOLE_BAG = -1  # col_instance marker for bag-level columns


@dataclass(frozen=True, eq=False)
class DissimMatrix:
    """Dissimilarities from objects (rows) to prototypes (columns).

    ``col_bag_ids[c]`` names the prototype bag behind column ``c`` and
    ``col_instance[c]`` the instance index inside it, or ``WHOLE_BAG`` for
    bag-level columns. ``col_labels`` carries the prototype bag labels.
    """

    values: np.ndarray
    row_ids: tuple
    col_bag_ids: tuple
    col_instance: np.ndarray
    col_labels: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != len(self.row_ids) or v.shape[1] != len(self.col_bag_ids):
            raise ValueError("values shape does not match row ids / column provenance")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "col_bag_ids", tuple(self.col_bag_ids))
        object.__setattr__(self, "col_instance", np.asarray(self.col_instance, dtype=np.int64))
        object.__setattr__(self, "col_labels", np.asarray(self.col_labels, dtype=np.int64))

    @property
    def shape(self):
        return self.values.shape

    @property
    def is_instance_level(self):
        return bool(np.all(self.col_instance != WHOLE_BAG))

    def prototype_groups(self):
        """Ordered ``(bag_id, column indices)`` pairs, one per prototype bag."""
        groups, order = {}, []
        for c, b in enumerate(self.col_bag_ids):
            if b not in groups:
                groups[b] = []
                order.append(b)
            groups[b].append(c)
        return [(b, np.array(groups[b], dtype=np.int64)) for b in order]

    def take_rows(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return DissimMatrix(
            self.values[idx], tuple(self.row_ids[i] for i in idx), self.col_bag_ids, self.col_instance, self.col_labels
        )


def _as_bags(repr_set):
    if isinstance(repr_set, MILDataset):
        return list(repr_set.bags)
    return list(repr_set)


def _stack(bags):
    offsets = np.zeros(len(bags) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([b.size for b in bags])
    return np.ascontiguousarray(np.vstack([b.instances for b in bags])), offsets


def _tables(objects, prototypes):
    if not prototypes:
        raise ValueError("empty representation set")
    objects = list(objects)
    d = prototypes[0].d
    for b in objects + prototypes:
        if b.d != d:
            raise ValueError(f"bag {b.id!r} has dimensionality {b.d}, expected {d}")
    X, xo = _stack(objects)
    P, po = _stack(prototypes)
    return kernels.min_dist_tables(X, xo, P, po)


def instance_dist(x, y):
    """Squared Euclidean distance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimensionality mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return float(diff @ diff)


def bag_dissim(bag_i: Bag, bag_j: Bag) -> float:
    """Mean over ``bag_i``'s instances of the distance to their nearest neighbour in ``bag_j``."""
    _, bag = _tables([bag_i], [bag_j])
    return float(bag[0, 0])


def instance_rep_row(bag_i: Bag, prototypes) -> np.ndarray:
    """One entry per prototype instance: its smallest distance to any instance of ``bag_i``."""
    inst, _ = _tables([bag_i], _as_bags(prototypes))
    return inst[0]


def build_matrices(objects: MILDataset, repr_set):
    """Bag-level and instance-level matrices from a single distance pass."""
    protos = _as_bags(repr_set)
    inst, bag = _tables(objects.bags, protos)
    labels = [p.label for p in protos]
    bag_m = DissimMatrix(bag, objects.ids, [p.id for p in protos], np.full(len(protos), WHOLE_BAG), labels)
    inst_m = DissimMatrix(
        inst,
        objects.ids,
        [p.id for p in protos for _ in range(p.size)],
        np.concatenate([np.arange(p.size) for p in protos]),
        [p.label for p in protos for _ in range(p.size)],
    )
    return bag_m, inst_m


def build_bag_matrix(objects: MILDataset, repr_set) -> DissimMatrix:
    return build_matrices(objects, repr_set)[0]


def build_inst_matrix(objects: MILDataset, repr_set) -> DissimMatrix:
    return build_matrices(objects, repr_set)[1]


def minimax_rep(bag: Bag) -> np.ndarray:
    """Per-feature minima followed by per-feature maxima."""
    return np.concatenate([bag.instances.min(axis=0), bag.instances.max(axis=0)])


def minimax_matrix(data: MILDataset) -> np.ndarray:
    return np.vstack([minimax_rep(b) for b in data.bags])


# ---------------------------------------------------------------------------
# CSV serialization

_MAGIC = "# dsmil-dissim-matrix v1"


def write_matrix_csv(matrix: DissimMatrix, path):
    """Write ``matrix`` with a ``#``-prefixed provenance block ahead of the data rows."""
    lines = [_MAGIC, f"# rows={matrix.shape[0]} cols={matrix.shape[1]}", "# column,prototype_bag,instance,label"]
    for c, (b, k, y) in enumerate(zip(matrix.col_bag_ids, matrix.col_instance, matrix.col_labels)):
        lines.append(f"# {c},{b},{'bag' if k == WHOLE_BAG else int(k)},{int(y)}")
    lines.append(",".join(["row_id"] + [f"c{c}" for c in range(matrix.shape[1])]))
    for rid, row in zip(matrix.row_ids, matrix.values):
        lines.append(",".join([rid] + [repr(float(v)) for v in row]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_csv(path) -> DissimMatrix:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"{path} is not a dissimilarity matrix file")
    bag_ids, inst, labels = [], [], []
    i = 3
    while lines[i].startswith("# "):
        _, b, k, y = lines[i][2:].split(",")
        bag_ids.append(b)
        inst.append(WHOLE_BAG if k == "bag" else int(k))
        labels.append(int(y))
        i += 1
    rows, values = [], []
    for line in lines[i + 1:]:
        parts = line.split(",")
        rows.append(parts[0])
        values.append([float(v) for v in parts[1:]])
    values = np.array(values, dtype=np.float64).reshape(len(rows), len(bag_ids))
    return DissimMatrix(values, rows, bag_ids, inst, labels)
