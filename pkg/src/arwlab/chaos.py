"""Second-order chaos observables computed straight from the coefficients.

All three curvatures share one second-chaos driver, the centered norm
W = (2/N) sum over the half set of (|a|^2 - 1). The Euler characteristic
reaches it through a longer route (a quadratic form in the Hessian
coordinates Y3, Y4, Y5 and the gradient) whose pieces are assembled here
and checked against the short formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateSpectrum, InsufficientData
from .lattice import FrequencySet
from .sampler import CoefficientDraw, GridField
from .theory import cholesky_factors, energy, h_coefficients, is_degenerate, second_chaos_scale

SQRT2 = math.sqrt(2.0)


def centered_norm(draw: CoefficientDraw) -> float:
    half = len(draw.freq.half_set)
    return float(np.sum(draw.squared_moduli - 1.0) / half)


def second_chaos_projection(k: int, fs: FrequencySet, u: float, draw: CoefficientDraw) -> float:
    return second_chaos_scale(k, fs.n, u) * centered_norm(draw)


# ---------------------------------------------------------------------------
# A35 and B1..B5


@dataclass(frozen=True)
class ABTerms:
    a35: float
    b: tuple[float, float, float, float, float]


def _weighted(draw: CoefficientDraw):
    """(1/N) sum over all of the frequency set of |a|^2 times 1, l1^2, l2^2, l1^2 l2^2, l2^4."""
    fs = draw.freq
    w = draw.squared_moduli
    l1 = fs.half_array[:, 0].astype(float)
    l2 = fs.half_array[:, 1].astype(float)
    # the antipode carries the same |a|^2 and even powers agree, so double the half set
    scale = 2.0 / fs.multiplicity
    return {
        "1": scale * w.sum(),
        "11": scale * (w * l1 * l1).sum(),
        "22": scale * (w * l2 * l2).sum(),
        "1122": scale * (w * l1 * l1 * l2 * l2).sum(),
        "2222": scale * (w * l2**4).sum(),
    }


def ab_closed_form(draw: CoefficientDraw) -> ABTerms:
    """A35 and B1..B5 as |a|^2-weighted lattice sums with mu4-dependent constants."""
    fs = draw.freq
    n, mu = fs.n, fs.mu4
    if is_degenerate(mu):
        raise DegenerateSpectrum(f"mu4={mu} for n={n}")
    s = _weighted(draw)
    p, m = 3.0 + mu, 1.0 + mu
    a35 = (
        2 * SQRT2 / (n * math.sqrt(m)) * (5 - mu) / p * s["22"]
        - (1 - mu) / p * 2 * SQRT2 / math.sqrt(m) * s["1"]
        - SQRT2 / (n * n * math.sqrt(m)) * 8 / p * s["2222"]
    )
    b1 = 2 / n * s["11"] - 1
    b2 = 2 / n * s["22"] - 1
    b3 = 8 / p * s["1"] + 8 / (n * n * p) * s["2222"] - 16 / (n * p) * s["22"] - 1
    b4 = 8 / (n * n * (1 - mu)) * s["1122"] - 1
    b5 = (
        16 / (n * n * m * p) * s["2222"]
        + (1 - mu) ** 2 / (p * m) * s["1"]
        - 8 * (1 - mu) / (n * p * m) * s["22"]
        - 1
    )
    return ABTerms(a35, (b1, b2, b3, b4, b5))


@dataclass(frozen=True)
class Integrals:
    i00: float
    i11: float
    i22: float
    i0_22: float
    i12_12: float
    i22_22: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def parseval_integrals(draw: CoefficientDraw) -> Integrals:
    s = _weighted(draw)
    fp2 = 4 * math.pi**2
    return Integrals(
        i00=s["1"],
        i11=fp2 * s["11"],
        i22=fp2 * s["22"],
        i0_22=-fp2 * s["22"],
        i12_12=fp2 * fp2 * s["1122"],
        i22_22=fp2 * fp2 * s["2222"],
    )


def grid_integrals(g: GridField) -> Integrals:
    """Torus integrals of products of the field and its derivatives by the grid mean."""
    return Integrals(
        i00=float(np.mean(g.values * g.values)),
        i11=float(np.mean(g.d1 * g.d1)),
        i22=float(np.mean(g.d2 * g.d2)),
        i0_22=float(np.mean(g.values * g.d22)),
        i12_12=float(np.mean(g.d12 * g.d12)),
        i22_22=float(np.mean(g.d22 * g.d22)),
    )


def quadrature_integrals(g: GridField, draw: CoefficientDraw) -> dict:
    return {"grid": grid_integrals(g), "parseval": parseval_integrals(draw)}


def ab_from_integrals(n: int, mu4: float, ints: Integrals) -> ABTerms:
    """A35 and B1..B5 from the six torus integrals.

    Uses d11 f = -E f - d22 f (the field is an eigenfunction) to write every
    Hessian coordinate through f and d22 f only.
    """
    if is_degenerate(mu4):
        raise DegenerateSpectrum(f"mu4={mu4} for n={n}")
    E = energy(n)
    K = cholesky_factors(n, mu4)
    k1, k2, k3, k4, k5 = K.k1, K.k2, K.k3, K.k4, K.k5
    r = k2 / k3
    a35 = (
        -E / (k3 * k5) * (1 + 2 * r) * ints.i0_22
        - E * E * k2 / (k3 * k3 * k5) * ints.i00
        - (1 + r) / (k3 * k5) * ints.i22_22
    )
    b1 = ints.i11 / k1**2 - 1
    b2 = ints.i22 / k1**2 - 1
    b3 = (E * E * ints.i00 + ints.i22_22 + 2 * E * ints.i0_22) / k3**2 - 1
    b4 = ints.i12_12 / k4**2 - 1
    b5 = (
        (1 + r) ** 2 * ints.i22_22 / k5**2
        + (E * r / k5) ** 2 * ints.i00
        + 2 * E * r / k5**2 * (1 + r) * ints.i0_22
        - 1
    )
    return ABTerms(a35, (b1, b2, b3, b4, b5))


def epc_second_chaos_via_hAB(fs: FrequencySet, u: float, draw: CoefficientDraw, route: str = "integrals") -> float:
    """h35 A35 + (1/2) sum_i h_i B_i.

    ``route="integrals"`` builds A35, B from the Parseval integrals,
    ``route="closed"`` from the closed lattice-sum expressions. Both must
    equal c_0(u) (E/2) W.
    """
    h = h_coefficients(fs.n, fs.mu4, u)
    if route == "integrals":
        ab = ab_from_integrals(fs.n, fs.mu4, parseval_integrals(draw))
    elif route == "closed":
        ab = ab_closed_form(draw)
    else:
        raise ValueError(f"unknown route {route!r}")
    return h.h35 * ab.a35 + 0.5 * sum(hi * bi for hi, bi in zip(h.diagonal(), ab.b))


@dataclass(frozen=True)
class ChaosObservables:
    w: float
    proj2: tuple[float, float, float]
    a35: float
    b: tuple[float, float, float, float, float]


def observe(fs: FrequencySet, u: float, draw: CoefficientDraw) -> ChaosObservables:
    w = centered_norm(draw)
    proj = tuple(second_chaos_scale(k, fs.n, u) * w for k in (0, 1, 2))
    if is_degenerate(fs.mu4):
        a35, b = math.nan, (math.nan,) * 5
    else:
        ab = ab_from_integrals(fs.n, fs.mu4, parseval_integrals(draw))
        a35, b = ab.a35, ab.b
    return ChaosObservables(w, proj, a35, b)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Regression:
    slope: float
    intercept: float
    residual_variance: float
    count: int


def regress_on_w(pairs) -> Regression:
    """Least squares of the curvature deviation on W, with intercept."""
    arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
    if len(arr) < 30:
        raise InsufficientData(f"need at least 30 (w, deviation) pairs, got {len(arr)}")
    w, y = arr[:, 0], arr[:, 1]
    if np.ptp(w) == 0:
        raise InsufficientData("all w values are equal; slope is undefined")
    fit = stats.linregress(w, y)
    resid = y - (fit.intercept + fit.slope * w)
    return Regression(float(fit.slope), float(fit.intercept), float(resid @ resid / (len(w) - 2)), len(w))
