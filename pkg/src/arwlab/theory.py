"""Closed-form Gaussian predictions for the Lipschitz-Killing curvatures.

Conventions
-----------
``n`` is the energy index, ``E = 4 pi^2 n`` the eigenvalue, ``N`` the
number of lattice points on the circle of radius sqrt(n) and ``mu4`` the
fourth Fourier coefficient of their angular distribution. Curvature index
``k = 2`` is the excursion area, ``k = 1`` half the boundary length and
``k = 0`` the Euler-Poincare characteristic.

Scalar functions accept numpy arrays for ``u`` wherever that is natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DegenerateSpectrum

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)
DEGENERACY_TOL = 1e-9
MAX_HERMITE = 64
_PN_MAX = 32


def energy(n) -> float:
    return 4.0 * math.pi**2 * n


def norm_pdf(u):
    return np.exp(-0.5 * np.square(u)) / SQRT2PI


def norm_cdf(u):
    return 0.5 * special.erfc(-np.asarray(u, dtype=float) / SQRT2)


def norm_sf(u):
    """1 - Phi(u), computed without cancellation in the upper tail."""
    return 0.5 * special.erfc(np.asarray(u, dtype=float) / SQRT2)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


# --------------------------------------------------------------------------
# Hermite polynomials and the first two chaos coefficients
# --------------------------------------------------------------------------

def hermite(q: int, t):
    """Probabilists' Hermite polynomial H_q(t) by the three-term recurrence.

    ``q = -1`` follows the convention H_{-1}(t) = 1 - Phi(t).
    """
    if q == -1:
        return _scalar(norm_sf(t))
    if q < -1:
        raise ValueError(f"negative Hermite index {q} is not defined")
    if q > MAX_HERMITE:
        raise ValueError(f"Hermite index {q} exceeds {MAX_HERMITE}")
    t = np.asarray(t, dtype=float)
    h_prev = np.ones_like(t)
    if q == 0:
        return _scalar(h_prev)
    h = t.copy()
    for j in range(1, q):
        h_prev, h = h, t * h - j * h_prev
    return _scalar(h)


def _check_k(k):
    if k not in (0, 1, 2):
        raise ValueError(f"curvature index must be 0, 1 or 2, got {k!r}")


def m_coefficient(k: int, u):
    _check_k(k)
    if k == 2:
        return _scalar(norm_sf(u))
    if k == 1:
        return _scalar(math.sqrt(math.pi / 8.0) * norm_pdf(u))
    return _scalar(np.asarray(u) * norm_pdf(u) / (2.0 * math.pi))


def c_coefficient(k: int, u):
    _check_k(k)
    u = np.asarray(u, dtype=float)
    if k == 2:
        return _scalar(0.5 * u * norm_pdf(u))
    if k == 1:
        return _scalar(0.5 * math.sqrt(math.pi / 8.0) * u**2 * norm_pdf(u))
    return _scalar((u**2 - 1.0) * u * norm_pdf(u) / (4.0 * math.pi))


def degenerate_levels(k: int) -> tuple[float, ...]:
    """Levels at which the second-chaos coefficient c_k vanishes."""
    _check_k(k)
    return (-1.0, 0.0, 1.0) if k == 0 else (0.0,)


def is_degenerate_level(k: int, u: float) -> bool:
    return float(u) in degenerate_levels(k)


def expected_lkc(k: int, n, u):
    """Mean of the k-th curvature of the excursion set above ``u``."""
    return _scalar(m_coefficient(k, u) * (energy(n) / 2.0) ** ((2 - k) / 2.0))


def leading_variance(k: int, n, multiplicity: int, u):
    if multiplicity < 1:
        raise ValueError("multiplicity must be >= 1")
    c = c_coefficient(k, u)
    return _scalar(np.square(c) / 2.0 ** (1 - k) * energy(n) ** (2 - k) / multiplicity)


def second_chaos_scale(k: int, n, u):
    """c_k(u) * (E/2)^((2-k)/2): the slope of the curvature against W_n."""
    return _scalar(c_coefficient(k, u) * (energy(n) / 2.0) ** ((2 - k) / 2.0))


def nodal_length_variance(n, multiplicity: int, mu4: float) -> float:
    """Leading term of Var(half nodal length), which is of order E/N^2."""
    if multiplicity < 1:
        raise ValueError("multiplicity must be >= 1")
    return 0.25 * (1.0 + mu4**2) / 512.0 * energy(n) / multiplicity**2


@dataclass(frozen=True)
class TheoryPrediction:
    k: int
    u: float
    mean: float
    leading_variance: float
    c_value: float
    m_value: float
    degenerate_level: bool


def predict(k: int, n, multiplicity: int, u: float) -> TheoryPrediction:
    c = float(c_coefficient(k, u))
    return TheoryPrediction(
        k=k,
        u=float(u),
        mean=float(expected_lkc(k, n, u)),
        leading_variance=float(leading_variance(k, n, multiplicity, u)),
        c_value=c,
        m_value=float(m_coefficient(k, u)),
        degenerate_level=c == 0.0,
    )


# --------------------------------------------------------------------------
# Chaos coefficients of the area and of the boundary length
# --------------------------------------------------------------------------

def gamma_coefficient(q: int, u):
    """gamma_q(u) = H_{q-1}(u) phi(u); gamma_0 is 1 - Phi(u)."""
    if q < 0:
        raise ValueError("q must be non-negative")
    if q == 0:
        return _scalar(norm_sf(u))
    return _scalar(hermite(q - 1, u) * norm_pdf(u))


def beta_coefficient(l: int, u):
    if l < 0:
        raise ValueError("l must be non-negative")
    return _scalar(hermite(l, u) * norm_pdf(u))


def _pn_coefficients(N: int) -> list[int]:
    # (-1)^(j+N) binom(N, j) (2j+1)! / (j!)^2, all integers
    return [
        (-1) ** (j + N) * math.comb(N, j) * math.factorial(2 * j + 1) // math.factorial(j) ** 2
        for j in range(N + 1)
    ]


_PN_TABLE = [[float(c) for c in _pn_coefficients(N)] for N in range(_PN_MAX + 1)]


def swing_polynomial(N: int, x: float) -> float:
    """p_N(x) evaluated by Horner's rule."""
    if not 0 <= N <= _PN_MAX:
        raise ValueError(f"p_N only tabulated for 0 <= N <= {_PN_MAX}")
    acc = 0.0
    for c in reversed(_PN_TABLE[N]):
        acc = acc * x + c
    return acc


def alpha_coefficient(two_a: int, two_b: int) -> float:
    """Hermite coefficient of the Euclidean norm on R^2 for H_{2a} x H_{2b}."""
    if two_a % 2 or two_b % 2 or two_a < 0 or two_b < 0:
        raise ValueError("alpha is only defined for non-negative even indices")
    a, b = two_a // 2, two_b // 2
    ratio = math.factorial(two_a) * math.factorial(two_b) / (math.factorial(a) * math.factorial(b))
    return math.sqrt(math.pi / 2.0) * ratio / 2.0 ** (a + b) * swing_polynomial(a + b, 0.25)


# --------------------------------------------------------------------------
# Pointwise covariance of (grad f, Hess f) and its Cholesky factor
# --------------------------------------------------------------------------

def pointwise_covariance(n, mu4: float) -> np.ndarray:
    """Covariance of (d1 f, d2 f, d11 f, d12 f, d22 f) at a single point."""
    E = energy(n)
    sigma = np.zeros((5, 5))
    sigma[0, 0] = sigma[1, 1] = E / 2.0
    c = E**2 / 8.0
    sigma[2, 2] = sigma[4, 4] = c * (3.0 + mu4)
    sigma[3, 3] = c * (1.0 - mu4)
    sigma[2, 4] = sigma[4, 2] = c * (1.0 - mu4)
    return sigma


@dataclass(frozen=True)
class CholeskyFactors:
    k1: float
    k2: float
    k3: float
    k4: float
    k5: float
    degenerate: bool

    def matrix(self) -> np.ndarray:
        K = np.zeros((5, 5))
        K[0, 0] = K[1, 1] = self.k1
        K[2, 2] = self.k3
        K[3, 3] = self.k4
        K[4, 2] = self.k2
        K[4, 4] = self.k5
        return K


def is_degenerate(mu4: float) -> bool:
    return abs(1.0 - mu4) < DEGENERACY_TOL or abs(1.0 + mu4) < DEGENERACY_TOL


def cholesky_factors(n, mu4: float) -> CholeskyFactors:
    E = energy(n)
    s = E / (2.0 * SQRT2)
    # clip guards float noise just outside [-1, 1]
    one_m = max(1.0 - mu4, 0.0)
    one_p = max(1.0 + mu4, 0.0)
    three_p = 3.0 + mu4
    return CholeskyFactors(
        k1=math.sqrt(E / 2.0),
        k2=s * one_m / math.sqrt(three_p),
        k3=s * math.sqrt(three_p),
        k4=s * math.sqrt(one_m),
        k5=E * math.sqrt(one_p) / math.sqrt(three_p),
        degenerate=is_degenerate(mu4),
    )


# --------------------------------------------------------------------------
# Second-chaos coefficients of the Euler-Poincare characteristic
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HCoefficients:
    h35: float
    h1: float
    h2: float
    h3: float
    h4: float
    h5: float

    def diagonal(self) -> tuple[float, float, float, float, float]:
        return (self.h1, self.h2, self.h3, self.h4, self.h5)


def _require_regular(mu4):
    if is_degenerate(mu4):
        raise DegenerateSpectrum(f"mu4={mu4!r}: 1 - mu4^2 vanishes, Cholesky factor is singular")


def h_coefficients(n, mu4: float, u: float) -> HCoefficients:
    _require_regular(mu4)
    E = energy(n)
    p = float(norm_pdf(u))
    tail = float(norm_sf(u))
    g = E / (4.0 * math.pi)
    three_p = 3.0 + mu4
    cubic = u * (1.0 + u * u) * p
    return HCoefficients(
        h35=E / (2.0 * SQRT2 * math.pi) * math.sqrt(1.0 + mu4) * (cubic + three_p * tail) / three_p,
        h1=-g * u * p,
        h2=-g * u * p,
        h3=g * (2.0 * cubic / three_p + tail * (1.0 - mu4)),
        h4=-g * (1.0 - mu4) * tail,
        h5=g * cubic * (1.0 + mu4) / three_p,
    )


@dataclass(frozen=True)
class ThetaPsi:
    """Truncated Gaussian moments E[Y_a Y_b ... 1{alpha Y3 + beta Y5 <= -u}]."""

    theta: dict
    psi: dict


_PSI_ZERO = ("3334", "3345", "3444", "3455", "4445")


def theta_psi(u: float, mu4: float) -> ThetaPsi:
    if abs(3.0 + mu4) == 0.0:
        raise ValueError("3 + mu4 must be non-zero")
    p = float(norm_pdf(u))
    tail = float(norm_sf(u))
    d = 3.0 + mu4
    r = SQRT2 * math.sqrt(max(1.0 + mu4, 0.0))
    theta = {
        "33": tail + u * p * 2.0 / d,
        "35": u * p * r / d,
        "44": tail,
        "55": tail + u * p * (1.0 + mu4) / d,
    }
    psi = {
        "3333": 3.0 * tail + 4.0 * u * p * (6.0 + u * u + 3.0 * mu4) / d**2,
        "4444": 3.0 * tail,
        "3355": tail + u * p * (3.0 + mu4**2 + 2.0 * u * u * (1.0 + mu4)) / d**2,
        "3555": u * p * r / d**2 * (6.0 + u * u * (1.0 + mu4)),
        "3335": u * p * r / d**2 * (3.0 + 2.0 * u * u + 3.0 * mu4),
        "3344": theta["33"],
        "4455": theta["55"],
        "3445": theta["35"],
    }
    for key in _PSI_ZERO:
        psi[key] = 0.0
    return ThetaPsi(theta=theta, psi=psi)


def truncation_weights(mu4: float) -> tuple[float, float]:
    """(alpha_n, beta_n): the unit vector with alpha Y3 + beta Y5 = -f."""
    d = 3.0 + mu4
    return math.sqrt(2.0 / d), math.sqrt(max(1.0 + mu4, 0.0) / d)


def h_from_theta_psi(n, mu4: float, u: float) -> HCoefficients:
    """Assemble the h coefficients from the truncated moments and the
    gradient-density constants phi_0 = -phi_2 = 1 / (sqrt(2 pi) k1)."""
    _require_regular(mu4)
    K = cholesky_factors(n, mu4)
    tp = theta_psi(u, mu4)
    th, ps = tp.theta, tp.psi
    phi0 = 1.0 / (SQRT2PI * K.k1)
    phi2 = -phi0
    a, b, c = K.k3 * K.k5, K.k2 * K.k3, K.k4**2
    base = a * th["35"] + b * th["33"] - c * th["44"]
    return HCoefficients(
        h35=(a * ps["3355"] + b * ps["3335"] - c * ps["3445"]) * phi0**2,
        h1=base * phi0 * phi2,
        h2=base * phi0 * phi2,
        h3=(a * ps["3335"] + b * ps["3333"] - c * ps["3344"] - base) * phi0**2,
        h4=(a * ps["3445"] + b * ps["3344"] - c * ps["4444"] - base) * phi0**2,
        h5=(a * ps["3555"] + b * ps["3355"] - c * ps["4455"] - base) * phi0**2,
    )


def vanishing_cross_h(n, mu4: float, u: float) -> dict:
    """h_34 and h_45 assembled from moments that vanish by parity."""
    K = cholesky_factors(n, mu4)
    ps = theta_psi(u, mu4).psi
    phi0 = 1.0 / (SQRT2PI * K.k1)
    a, b, c = K.k3 * K.k5, K.k2 * K.k3, K.k4**2
    return {
        "34": (a * ps["3345"] + b * ps["3334"] - c * ps["3444"]) * phi0**2,
        "45": (a * ps["3455"] + b * ps["3345"] - c * ps["4445"]) * phi0**2,
    }


def numeric_h_check(n, mu4: float, u: float, samples: int = 1_000_000, seed: int = 0) -> dict:
    """Monte Carlo estimates of the raw defining expectations of the h's.

    The Hessian is drawn from its covariance with numpy's own Cholesky, and
    the gradient delta is replaced by its exact Gaussian density at zero.
    Returns ``{name: (estimate, standard_error)}``.
    """
    _require_regular(mu4)
    E = energy(n)
    K = cholesky_factors(n, mu4)
    cov = pointwise_covariance(n, mu4)[2:, 2:]
    L = np.linalg.cholesky(cov)
    rng = np.random.default_rng(seed)
    hess = rng.standard_normal((samples, 3)) @ L.T
    d11, d12, d22 = hess.T
    det = d11 * d22 - d12**2
    inside = -(d11 + d22) / E >= u
    y3 = d11 / K.k3
    y4 = d12 / K.k4
    y5 = (d22 - K.k2 / K.k3 * d11) / K.k5
    phi0 = 1.0 / (SQRT2PI * K.k1)
    base = det * inside
    terms = {
        "h35": base * y3 * y5 * phi0**2,
        "h1": base * phi0 * (-phi0),
        "h3": base * (y3**2 - 1.0) * phi0**2,
        "h4": base * (y4**2 - 1.0) * phi0**2,
        "h5": base * (y5**2 - 1.0) * phi0**2,
    }
    return {k: (float(v.mean()), float(v.std(ddof=1) / math.sqrt(samples))) for k, v in terms.items()}


def numeric_theta_psi(u: float, mu4: float, samples: int = 1_000_000, seed: int = 0) -> dict:
    """Monte Carlo estimates of every theta/psi moment with standard errors."""
    alpha, beta = truncation_weights(mu4)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((3, samples))
    ys = {"3": z[0], "4": z[1], "5": z[2]}
    ind = alpha * ys["3"] + beta * ys["5"] <= -u
    out = {}
    keys = ["33", "35", "44", "55"] + list(theta_psi(u, mu4).psi)
    for key in keys:
        v = ind.astype(float)
        for ch in key:
            v = v * ys[ch]
        out[key] = (float(v.mean()), float(v.std(ddof=1) / math.sqrt(samples)))
    return out


# --------------------------------------------------------------------------
# Kac-Rice cross-check for the mean Euler-Poincare characteristic
# --------------------------------------------------------------------------

def kac_rice_epc_quadrature(n, u: float) -> float:
    """Expected EPC from the Kac-Rice integral, evaluated by adaptive quadrature."""
    E = energy(n)
    pref = E / (8.0 * math.pi) * math.sqrt(8.0) / (4.0 * math.sqrt(math.pi))
    integrand = lambda t: math.exp(-0.5 * t * t) * (2.0 * t * t - 2.0)
    # split at the sign changes t = -1, 1 so no piece relies on cancellation
    cuts = [u] + [c for c in (-1.0, 1.0) if c > u] + [np.inf]
    val = sum(integrate.quad(integrand, a, b, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
              for a, b in zip(cuts, cuts[1:]))
    return pref * val


def epc_mean_from_chaos(n, u: float) -> float:
    """Zeroth chaos of the EPC: 2 E eta_000(u) beta_0^2 with eta_000 = u phi(u) / 4."""
    eta000 = 0.25 * u * float(norm_pdf(u))
    beta0 = float(norm_pdf(0.0))
    return 2.0 * energy(n) * eta000 * beta0**2


# --------------------------------------------------------------------------
# Bessel J0 (used only by the density-one scaling diagnostic)
# --------------------------------------------------------------------------

_SERIES_LIMIT = 12.0


def _j0_series(x: float) -> float:
    q = -(x * x) / 4.0
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        total += term
        if abs(term) < 1e-17 * max(1.0, abs(total)) and k > 2:
            return total


def _j0_asymptotic(x: float) -> float:
    # Hankel expansion; terms decrease until k ~ 2x, far beyond what is needed here
    mu = 0.0
    z8 = 8.0 * x
    P, Q = 0.0, 0.0
    term = 1.0
    k = 0
    while True:
        if k % 2 == 0:
            P += term * (-1) ** (k // 2)
        else:
            Q += term * (-1) ** (k // 2)
        nxt = term * (mu - (2 * k + 1) ** 2) / ((k + 1) * z8)
        if abs(nxt) < 1e-17 or abs(nxt) > abs(term):
            break
        term = nxt
        k += 1
    chi = x - math.pi / 4.0
    return math.sqrt(2.0 / (math.pi * x)) * (P * math.cos(chi) - Q * math.sin(chi))


def bessel_j0(x):
    """J_0 by power series below |x| = 12 and the Hankel expansion above."""
    xs = np.abs(np.asarray(x, dtype=float))
    if np.any(xs > 1e3):
        raise ValueError("bessel_j0 is only supported for |x| <= 1000")
    out = np.array([_j0_series(v) if v < _SERIES_LIMIT else _j0_asymptotic(v) for v in xs.ravel()])
    return _scalar(out.reshape(xs.shape))
