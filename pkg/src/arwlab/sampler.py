"""Random coefficients and grid synthesis of the field and its derivatives.

Coefficients are stored for the half set only; the antipodal ones are the
complex conjugates. Draws come from a Philox (counter-based) stream keyed by
``(seed, replicate)``; the i-th half-set frequency consumes uniforms 2i and
2i+1 of that stream, which are turned into a complex Gaussian by Box-Muller.
So a draw depends only on the key and the lexicographic point order, never
on how replicates are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ResolutionTooLow, UnknownFrequency
from .lattice import FrequencySet, LatticePoint
from .theory import bessel_j0

PLANES = ("values", "d1", "d2", "d11", "d12", "d22")
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class CoefficientDraw:
    freq: FrequencySet
    coeffs: np.ndarray  # complex, aligned with freq.half_set

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (len(self.freq.half_set),):
            raise ValueError("one coefficient per half-set frequency is required")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def as_map(self) -> dict:
        return dict(zip(self.freq.half_set, self.coeffs))

    def full(self) -> tuple[np.ndarray, np.ndarray]:
        """All frequencies (half set, then antipodes) with their coefficients."""
        half = self.freq.half_array
        pts = np.concatenate([half, -half])
        return pts, np.concatenate([self.coeffs, np.conj(self.coeffs)])

    @property
    def squared_moduli(self) -> np.ndarray:
        return np.abs(self.coeffs) ** 2


def _philox(seed: int, replicate: int) -> np.random.Generator:
    key = np.array([int(seed) & _MASK64, int(replicate) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def complex_gaussians(seed: int, replicate: int, count: int) -> np.ndarray:
    """``count`` complex Gaussians with independent N(0, 1/2) parts."""
    u = _philox(seed, replicate).random(2 * count)
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * math.pi * u2
    return radius * (np.cos(angle) + 1j * np.sin(angle)) / math.sqrt(2.0)


def draw_coefficients(fs: FrequencySet, seed: int, replicate: int = 0) -> CoefficientDraw:
    if fs.multiplicity == 0:
        raise ValueError("empty frequency set")
    return CoefficientDraw(fs, complex_gaussians(seed, replicate, len(fs.half_set)))


def inject_coefficients(fs: FrequencySet, values: dict) -> CoefficientDraw:
    """Deterministic draw with the given half-set coefficients and zeros elsewhere."""
    index = {p: i for i, p in enumerate(fs.half_set)}
    coeffs = np.zeros(len(fs.half_set), dtype=np.complex128)
    for key, val in values.items():
        p = key if isinstance(key, LatticePoint) else LatticePoint(*key)
        if p not in index:
            raise UnknownFrequency(f"{tuple(p)} is not in the half set for n={fs.n}")
        coeffs[index[p]] = complex(val)
    return CoefficientDraw(fs, coeffs)


@dataclass(frozen=True)
class GridField:
    """Field and derivatives at x = (i/M, j/M); axis 0 is x1, axis 1 is x2."""

    M: int
    n: int
    energy: float
    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d11: np.ndarray
    d12: np.ndarray
    d22: np.ndarray
    source: Optional[CoefficientDraw] = field(default=None, compare=False, repr=False)

    @property
    def spacing(self) -> float:
        return 1.0 / self.M

    def planes(self) -> np.ndarray:
        return np.stack([getattr(self, p) for p in PLANES])


def min_resolution(n: int) -> int:
    return 4 * math.isqrt(n - 1) + 4 if n > 1 else 4  # 4 * ceil(sqrt(n))


def auto_resolution(n: int) -> int:
    return 2 * min_resolution(n)


def evaluate_on_grid(draw: CoefficientDraw, M: int) -> GridField:
    fs = draw.freq
    if M < min_resolution(fs.n):
        raise ResolutionTooLow(f"M={M} is below 4*ceil(sqrt(n))={min_resolution(fs.n)} for n={fs.n}")
    pts, c = draw.full()
    c = c / math.sqrt(fs.multiplicity)
    l1 = pts[:, 0].astype(float)
    l2 = pts[:, 1].astype(float)
    two_pi_i = 2j * math.pi
    factors = np.stack([
        np.ones_like(l1, dtype=complex),
        two_pi_i * l1,
        two_pi_i * l2,
        -4.0 * math.pi**2 * l1 * l1,
        -4.0 * math.pi**2 * l1 * l2,
        -4.0 * math.pi**2 * l2 * l2,
    ])
    spec = np.zeros((len(PLANES), M, M), dtype=np.complex128)
    spec[:, pts[:, 0] % M, pts[:, 1] % M] = factors * c
    grids = np.fft.ifft2(spec, axes=(1, 2)) * (M * M)
    scale = np.maximum(np.abs(grids).max(axis=(1, 2)), 1.0)
    imag = np.abs(grids.imag).max(axis=(1, 2)) / scale
    if np.any(imag > 1e-10):
        raise ArithmeticError(f"synthesized grids are not real (relative imaginary part {imag.max():.2e})")
    real = np.ascontiguousarray(grids.real)
    real.setflags(write=False)
    return GridField(M, fs.n, fs.energy, *real, source=draw)


def direct_evaluate(draw: CoefficientDraw, x) -> dict:
    """Brute-force sums over the whole frequency set at arbitrary points ``x`` (shape (..., 2))."""
    fs = draw.freq
    x = np.asarray(x, dtype=float)
    pts, c = draw.full()
    c = c / math.sqrt(fs.multiplicity)
    phase = np.exp(2j * math.pi * (x[..., None, 0] * pts[:, 0] + x[..., None, 1] * pts[:, 1]))
    l1, l2 = pts[:, 0], pts[:, 1]
    tp = 2j * math.pi
    mult = {
        "values": 1.0,
        "d1": tp * l1,
        "d2": tp * l2,
        "d11": tp * tp * l1 * l1,
        "d12": tp * tp * l1 * l2,
        "d22": tp * tp * l2 * l2,
    }
    return {k: np.real(np.sum(m * c * phase, axis=-1)) for k, m in mult.items()}


def field_jet(draw: CoefficientDraw, x) -> dict:
    """Value, gradient and Hessian at points ``x`` (shape (K, 2)) from the half set.

    Same numbers as direct_evaluate, computed as 2 Re of the half-set sum
    with one complex exponential per (point, frequency) pair.
    """
    fs = draw.freq
    x = np.asarray(x, dtype=float)
    half = draw.freq.half_array.astype(float)
    z = np.exp(2j * math.pi * (x @ half.T)) * (draw.coeffs * (2.0 / math.sqrt(fs.multiplicity)))
    re, im = z.real, z.imag
    l1, l2 = half[:, 0], half[:, 1]
    tp = 2.0 * math.pi
    return {
        "values": re.sum(axis=1),
        "d1": -tp * (im @ l1),
        "d2": -tp * (im @ l2),
        "d11": -tp * tp * (re @ (l1 * l1)),
        "d12": -tp * tp * (re @ (l1 * l2)),
        "d22": -tp * tp * (re @ (l2 * l2)),
    }


# derivative multi-indices for each named component
_DERIV = {"": (), "1": (0,), "2": (1,), "11": (0, 0), "12": (0, 1), "22": (1, 1)}


def _cov_entry(pts, phase, a, b):
    alpha, beta = _DERIV[a], _DERIV[b]
    w = np.ones(len(pts), dtype=complex)
    for ax in alpha:
        w = w * (2j * math.pi * pts[:, ax])
    for ax in beta:
        w = w * (-2j * math.pi * pts[:, ax])
    return float(np.real(np.mean(w * phase)))


COVARIANCE_KEYS = (
    ("", ""),
    ("1", "1"), ("1", "2"), ("2", "2"),
    ("1", "11"), ("1", "12"), ("1", "22"), ("2", "11"), ("2", "12"), ("2", "22"),
    ("11", "11"), ("11", "12"), ("11", "22"), ("12", "12"), ("12", "22"), ("22", "22"),
)


def covariance_function(fs: FrequencySet, shift) -> dict:
    """E[D_a f(x) D_b f(y)] at x - y = shift for every pair in COVARIANCE_KEYS.

    Keys are "r" for the field itself and "a,b" otherwise (e.g. "1,11").
    """
    pts = fs.array.astype(float)
    s = np.asarray(shift, dtype=float)
    phase = np.exp(2j * math.pi * (pts @ s))
    out = {}
    for a, b in COVARIANCE_KEYS:
        key = "r" if not a else f"{a},{b}"
        out[key] = _cov_entry(pts, phase, a, b)
    return out


def field_covariance(fs: FrequencySet, shifts) -> np.ndarray:
    pts = fs.array.astype(float)
    s = np.asarray(shifts, dtype=float)
    return np.mean(np.cos(2.0 * math.pi * (s @ pts.T)), axis=-1)


def bessel_scaling_diagnostic(fs: FrequencySet, samples: int, seed: int = 0) -> float:
    """max |r(x / sqrt(n)) - J0(2 pi |x|)| over lag 0 and ``samples`` random lags with |x| <= 3."""
    rng = np.random.default_rng(seed)
    radius = 3.0 * np.sqrt(rng.random(samples))
    angle = 2.0 * math.pi * rng.random(samples)
    lags = np.concatenate([[[0.0, 0.0]], np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])])
    r = field_covariance(fs, lags / math.sqrt(fs.n))
    j = bessel_j0(2.0 * math.pi * np.hypot(lags[:, 0], lags[:, 1]))
    return float(np.max(np.abs(r - j)))
