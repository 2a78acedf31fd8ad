"""Counter-based deterministic random stream.

The generator is a keyed splitmix64 permutation of a 64-bit counter: output
word k depends only on (seed, position + k), so a stream can be replayed from
any position and produces identical values on every platform and under any
vectorisation. Gaussians come from the Box-Muller transform applied to
consecutive word pairs.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def _mix(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> _U64(30))) * _MIX1
    x = (x ^ (x >> _U64(27))) * _MIX2
    return x ^ (x >> _U64(31))


class NoiseSource:
    """Seeded counter-based stream of uniforms and standard normals.

    Identical (seed, position) pairs yield identical output sequences.
    Instances are cheap; use :meth:`child` to derive independent streams
    from one experiment seed.
    """

    def __init__(self, seed: int, position: int = 0):
        self._key = _mix(np.array([_U64(seed & 0xFFFFFFFFFFFFFFFF)]))[0]
        self.seed = int(seed)
        self.position = int(position)

    def child(self, tag: int) -> "NoiseSource":
        """Derive an independent stream identified by a small integer tag."""
        salt = _mix(np.array([(_U64(tag & 0xFFFFFFFFFFFFFFFF) + _U64(1)) * _GOLDEN]))[0]
        return NoiseSource(int(self._key ^ salt))

    def _words(self, n: int) -> np.ndarray:
        idx = np.arange(self.position, self.position + n, dtype=np.uint64)
        self.position += n
        with np.errstate(over="ignore"):
            return _mix(self._key + (idx + _U64(1)) * _GOLDEN)

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles uniform on the open interval (0, 1)."""
        if n < 0:
            raise ValueError("n must be non-negative")
        w = self._words(n) >> _U64(11)  # top 53 bits
        return (w.astype(np.float64) + 0.5) * 2.0**-53

    def standard_normals(self, n: int) -> np.ndarray:
        """n standard normal doubles; consumes 2*ceil(n/2) uniforms."""
        if n < 0:
            raise ValueError("n must be non-negative")
        if n == 0:
            return np.empty(0)
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def normals(self, n: int, scale: float) -> np.ndarray:
        return self.standard_normals(n) * scale
