"""Deterministic sample plans for residual sweeps.

Residual norms are taken over a fixed low-discrepancy (Halton) sequence of
interior points, so every run of a check visits the same points in the
same order.  A seeded generator supplies any auxiliary draws (for example
spectral-parameter values), keeping reports reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PRIMES = (2, 3, 5, 7, 11, 13)

#: fraction of each box edge kept away from the boundary
INTERIOR_INSET = 0.05


def _van_der_corput(count: int, base: int) -> np.ndarray:
    out = np.zeros(count)
    for i in range(count):
        n, f, x = i + 1, 1.0, 0.0  # start at index 1: skips the origin
        while n > 0:
            f /= base
            x += f * (n % base)
            n //= base
        out[i] = x
    return out


def halton(count: int, dim: int) -> np.ndarray:
    """Unscrambled Halton points in (0, 1)^dim, deterministic forever."""
    if dim > len(_PRIMES):
        raise ValueError(f"halton supports up to {len(_PRIMES)} dimensions")
    return np.stack([_van_der_corput(count, _PRIMES[k]) for k in range(dim)], axis=-1)


@dataclass(frozen=True)
class Box:
    """Axis-aligned sampling box: tuple of (lo, hi) per coordinate."""

    bounds: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        for lo, hi in bounds:
            if not hi > lo:
                raise ValueError(f"empty box edge ({lo}, {hi})")

    @property
    def dim(self):
        return len(self.bounds)


@dataclass(frozen=True)
class SamplePlan:
    """A box, a point count and a seed; `points()` is pure."""

    box: Box
    count: int = 100
    seed: int = 20240

    def points(self) -> np.ndarray:
        unit = halton(self.count, self.box.dim)
        lo = np.array([b[0] for b in self.box.bounds])
        hi = np.array([b[1] for b in self.box.bounds])
        span = hi - lo
        return lo + span * (INTERIOR_INSET + (1 - 2 * INTERIOR_INSET) * unit)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)
