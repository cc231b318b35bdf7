"""Exact integer arithmetic on the frequency set of the toral eigenvalue 4 pi^2 n.

Everything here works with Python integers, so sums never wrap around no
matter how large ``n`` gets. Floating point only appears in the derived
``mu4`` and ``energy`` attributes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .errors import NotSumOfTwoSquares

__all__ = [
    "LatticePoint",
    "FrequencySet",
    "enumerate_frequencies",
    "mu_hat_4",
    "mu_hat_4_exact",
    "moment_sum",
    "spectral_correlations",
]


@dataclass(frozen=True, order=True)
class LatticePoint:
    x1: int
    x2: int

    def __iter__(self):
        yield self.x1
        yield self.x2

    def __neg__(self):
        return LatticePoint(-self.x1, -self.x2)


@dataclass(frozen=True)
class FrequencySet:
    n: int
    points: tuple[LatticePoint, ...]
    half_set: tuple[LatticePoint, ...]
    mu4: float
    energy: float
    _array: np.ndarray = field(repr=False, compare=False)
    _half_array: np.ndarray = field(repr=False, compare=False)

    @property
    def multiplicity(self) -> int:
        return len(self.points)

    @property
    def array(self) -> np.ndarray:
        """All points as an (N, 2) int64 array (read-only view)."""
        return self._array

    @property
    def half_array(self) -> np.ndarray:
        return self._half_array

    def __len__(self):
        return len(self.points)


def _is_square(m: int) -> bool:
    if m < 0:
        return False
    r = math.isqrt(m)
    return r * r == m


def _readonly(a):
    a = np.asarray(a, dtype=np.int64).reshape(-1, 2)
    a.setflags(write=False)
    return a


def enumerate_frequencies(n: int) -> FrequencySet:
    """Return all integer pairs with x1^2 + x2^2 = n in lexicographic order.

    Raises NotSumOfTwoSquares when there are none (e.g. n = 3).
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise ValueError(f"energy index must be a positive integer, got {n!r}")
    n = int(n)
    r = math.isqrt(n)
    pts = []
    for x1 in range(-r, r + 1):
        rest = n - x1 * x1
        y = math.isqrt(rest)
        if y * y != rest:
            continue
        if y == 0:
            pts.append(LatticePoint(x1, 0))
        else:
            pts.append(LatticePoint(x1, -y))
            pts.append(LatticePoint(x1, y))
    if not pts:
        raise NotSumOfTwoSquares(n)
    pts.sort()
    half = [p for p in pts if p.x2 > 0]
    if _is_square(n):
        half.append(LatticePoint(r, 0))
        half.sort()
    mu = _mu4_fraction(pts, n)
    return FrequencySet(
        n=n,
        points=tuple(pts),
        half_set=tuple(half),
        mu4=float(mu),
        energy=4.0 * math.pi**2 * n,
        _array=_readonly([tuple(p) for p in pts]),
        _half_array=_readonly([tuple(p) for p in half]),
    )


def _mu4_fraction(points, n) -> Fraction:
    re = 0
    im = 0
    for x1, x2 in points:
        # (x1 + i x2)^4 expanded over the integers
        re += x1**4 - 6 * x1**2 * x2**2 + x2**4
        im += 4 * x1**3 * x2 - 4 * x1 * x2**3
    if im != 0:
        raise ArithmeticError(f"imaginary part of the fourth moment is {im}, expected 0")
    return Fraction(re, n * n * len(points))


def mu_hat_4_exact(fs: FrequencySet) -> Fraction:
    """Fourth Fourier coefficient of the angular distribution, as an exact rational."""
    return _mu4_fraction(fs.points, fs.n)


def mu_hat_4(fs: FrequencySet) -> float:
    """Floating-point value of (1 / (n^2 N)) sum Re[(l1 + i l2)^4].

    The imaginary part is checked with a complex floating sum as well as the
    exact integer one.
    """
    if not fs.points:
        raise ValueError("empty frequency set")
    z = fs.array[:, 0] + 1j * fs.array[:, 1]
    s = np.sum(z.astype(np.complex128) ** 4) / (fs.n**2 * fs.multiplicity)
    assert abs(s.imag) < 1e-12, s
    return float(mu_hat_4_exact(fs))


def moment_sum(fs: FrequencySet, p: int, q: int) -> int:
    """Exact sum of l1^p * l2^q over the whole frequency set."""
    if p < 0 or q < 0:
        raise ValueError("exponents must be non-negative")
    return sum(pt.x1**p * pt.x2**q for pt in fs.points)


def spectral_correlations(fs: FrequencySet, m: int) -> int:
    """Count m-tuples of frequencies summing to zero (m in {3, 4}).

    Enumerates all (m-1)-tuples and looks the negated partial sum up in the
    sorted, integer-encoded frequency list.
    """
    if m not in (3, 4):
        raise ValueError("m must be 3 or 4")
    pts = fs.array
    if len(pts) == 0:
        raise ValueError("empty frequency set")
    r = math.isqrt(fs.n)
    base = 2 * (m * r) + 1
    off = m * r

    def encode(a):
        return (a[..., 0] + off) * base + (a[..., 1] + off)

    keys = np.sort(encode(pts))
    # partial sums of all (m-1)-tuples, built by broadcasting one axis at a time
    partial = pts
    for _ in range(m - 2):
        partial = (partial[:, None, :] + pts[None, :, :]).reshape(-1, 2)
    target = encode(-partial)
    idx = np.searchsorted(keys, target)
    idx = np.minimum(idx, len(keys) - 1)
    return int(np.count_nonzero(keys[idx] == target))


def spectral_correlations_bruteforce(fs: FrequencySet, m: int) -> int:
    """Plain m-fold loop; only for testing small sets."""
    pts = fs.points
    count = 0
    for tup in product(pts, repeat=m):
        if sum(p.x1 for p in tup) == 0 and sum(p.x2 for p in tup) == 0:
            count += 1
    return count
