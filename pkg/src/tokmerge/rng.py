"""Counter-based deterministic RNG with splittable substreams.

The generator is splitmix64 run in counter mode: draw i of a stream seeded
with s is finalize(s + (i+1)*GOLDEN). Identical seeds therefore give bitwise
identical sequences on every platform, draws can be produced in vectorized
blocks, and `split` derives independent child streams without consuming
state from the parent.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_SPLIT_SALT = 0x632BE59BD9B4E019


def _mix_int(z: int) -> int:
    """splitmix64 finalizer on a python int (used for seed derivation)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _mix_u64(z: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer; z is a uint64 ndarray."""
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """Seeded stream of reproducible draws.

    The counter is the only mutable state. One instance per work item;
    use `split` to derive per-item streams for parallel batches.
    """

    __slots__ = ("seed", "counter")

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & _MASK64
        self.counter = int(counter)

    def split(self, stream: int) -> "Rng":
        """Derive an independent child stream identified by `stream`."""
        child = _mix_int(self.seed ^ _mix_int((int(stream) & _MASK64) * _GOLDEN + _SPLIT_SALT))
        return Rng(child)

    def _raw(self, n: int) -> np.ndarray:
        start = self.counter + 1
        idx = np.arange(start, start + n, dtype=np.uint64)
        self.counter += n
        z = np.uint64(self.seed) + idx * np.uint64(_GOLDEN)
        return _mix_u64(z)

    def u64(self, size: int | None = None):
        """Raw 64-bit draws: an int when size is None, else a uint64 array."""
        if size is None:
            return int(self._raw(1)[0])
        return self._raw(int(size))

    def uniform(self, size: int | None = None):
        """Uniform float64 in [0, 1) with 53-bit resolution."""
        raw = self._raw(1 if size is None else int(size))
        u = (raw >> np.uint64(11)).astype(np.float64) * (2.0**-53)
        return float(u[0]) if size is None else u

    def normal(self, size: int | None = None):
        """Standard normal via Box-Muller; u1 shifted into (0, 1]."""
        n = 1 if size is None else int(size)
        raw = self._raw(2 * n)
        u1 = ((raw[:n] >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0**-53)
        u2 = (raw[n:] >> np.uint64(11)).astype(np.float64) * (2.0**-53)
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return float(z[0]) if size is None else z

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.normal(rows * cols).reshape(rows, cols)

    def integer(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi); modulo bias is irrelevant at fixture scale."""
        if hi <= lo:
            raise ValueError("empty integer range")
        return lo + int(self.u64()) % (hi - lo)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.integer(0, i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm
