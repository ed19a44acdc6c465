"""Seeded, addressable permutation streams.

Replicate ``r`` of a stream is a Fisher-Yates shuffle driven by the
Philox4x64-10 block starting at counter ``r * ceil((n - 1) / 4)`` under a key
derived from ``(seed, label)``. Each replicate is therefore a pure function
of ``(seed, label, r)``: batches can be generated in any order or split
across workers without changing any permutation.

A uniform index in ``[0, m)`` is taken from a 64-bit word ``x`` as
``floor(x * m / 2**64)``; the bias is below ``m / 2**64``.
"""

from __future__ import annotations

import math

import numpy as np

from ._kernels import shuffle_rows

ALGORITHM = "philox4x64-10/fisher-yates-mulhi/v1"

_LABELS = {"perm": 1, "data": 2}


def stream_key(seed: int, label: str = "perm", index: int = 0) -> np.ndarray:
    """128-bit Philox key for ``(seed, label, index)``."""
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    try:
        code = _LABELS[label]
    except KeyError:
        raise ValueError(f"unknown stream label {label!r}") from None
    return np.random.SeedSequence([int(seed), code, int(index)]).generate_state(2, np.uint64)


def data_generator(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for synthetic data, disjoint from every permutation stream."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, "data", index)))


def _blocks(n: int) -> int:
    return max(1, math.ceil((n - 1) / 4))


class PermutationStream:
    """Permutations of ``range(n)`` addressed by replicate index.

    ``stream.block(n, start, stop)`` returns replicates ``start..stop-1`` as
    rows of an int64 array. ``next(n)`` walks the stream sequentially.
    """

    algorithm = ALGORITHM

    def __init__(self, seed: int, label: str = "perm", index: int = 0):
        self.seed = int(seed)
        self.label = label
        self.index = index
        self.key = stream_key(self.seed, label, index)
        self.position = 0

    def words(self, n: int, start: int, stop: int) -> np.ndarray:
        b = _blocks(n)
        bitgen = np.random.Philox(key=self.key, counter=[start * b, 0, 0, 0])
        raw = bitgen.random_raw((stop - start) * 4 * b)
        return raw.reshape(stop - start, 4 * b)[:, : n - 1]

    def block(self, n: int, start: int, stop: int) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be positive")
        if stop <= start:
            return np.empty((0, n), dtype=np.int64)
        if n == 1:
            return np.zeros((stop - start, 1), dtype=np.int64)
        return shuffle_rows(np.ascontiguousarray(self.words(n, start, stop)), n)

    def next(self, n: int) -> np.ndarray:
        out = self.block(n, self.position, self.position + 1)[0]
        self.position += 1
        return out


def random_permutation(n: int, rng_state: PermutationStream) -> np.ndarray:
    """Next uniformly random permutation of ``range(n)`` from ``rng_state``."""
    return rng_state.next(n)
