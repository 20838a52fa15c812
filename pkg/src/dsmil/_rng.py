"""Named, independent random streams derived from one global seed."""

import zlib

import numpy as np


def stream(seed, name, *extra):
    """Return a generator for the purpose ``name``.

    Streams with different names (or different ``extra`` integers) are
    statistically independent, so consuming one never shifts another.
    """
    key = [int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))]
    key.extend(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(key))
