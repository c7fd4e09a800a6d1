"""Counter-based random streams (Philox4x32-10).

Every draw is a pure function of ``(seed, path, stream, counter)``, so a batch
of paths can be simulated in lockstep with numpy while each path still sees
the same numbers it would see if simulated alone.
"""

from __future__ import annotations

import numpy as np

__all__ = ["philox4x32", "PathStreams"]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SH = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10):
    """Philox4x32 block function.

    ``counter`` is a sequence of four uint32 arrays (broadcastable), ``key`` a
    pair of uint32 scalars or arrays.  Returns four uint32 arrays held in
    uint64 containers.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    k0, k1 = (np.asarray(k, dtype=np.uint64) & _MASK for k in key)
    for r in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SH, p0 & _MASK
        hi1, lo1 = p1 >> _SH, p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        if r + 1 < rounds:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


class PathStreams:
    """Independent uniform streams indexed by path number and stream id.

    ``uniform(paths, counters, stream)`` returns one double in [0, 1) per
    entry, built from 53 random bits.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        self.seed = seed
        self._key = (np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32))

    def uniform(self, paths, counters, stream: int = 0) -> np.ndarray:
        paths = np.asarray(paths, dtype=np.uint64)
        counters = np.asarray(counters, dtype=np.uint64)
        x0, x1, _, _ = philox4x32(
            (counters & _MASK, counters >> _SH, paths & _MASK,
             (paths >> _SH) ^ (np.uint64(stream) << np.uint64(24))),
            self._key,
        )
        bits = ((x0 >> np.uint64(5)) << np.uint64(26)) | (x1 >> np.uint64(6))
        return bits.astype(np.float64) * (1.0 / 9007199254740992.0)

    def exponential(self, paths, counters, stream: int = 0) -> np.ndarray:
        return -np.log1p(-self.uniform(paths, counters, stream))
