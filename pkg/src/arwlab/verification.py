"""Exact identity checks for one energy index, as run by ``arwlab verify``.

Every check compares a computed number with an independently obtained
expected one and passes when |computed - expected| <= tol * max(1, |expected|).
Some checks carry a floor on the tolerance where the comparison is against a
quadrature or a series rather than exact arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .chaos import centered_norm, epc_second_chaos_via_hAB, grid_integrals, parseval_integrals
from .lattice import enumerate_frequencies, moment_sum, mu_hat_4_exact, spectral_correlations
from .sampler import PLANES, auto_resolution, direct_evaluate, draw_coefficients, evaluate_on_grid
from .theory import (
    bessel_j0,
    c_coefficient,
    cholesky_factors,
    energy,
    expected_lkc,
    h_coefficients,
    h_from_theta_psi,
    hermite,
    is_degenerate,
    kac_rice_epc_quadrature,
    norm_pdf,
    pointwise_covariance,
    second_chaos_scale,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    computed: float
    expected: float
    tol: float
    skipped: bool = False

    @property
    def abs_error(self) -> float:
        return abs(self.computed - self.expected)

    @property
    def passed(self) -> bool:
        return self.skipped or self.abs_error <= self.tol * max(1.0, abs(self.expected))


def _worst(pairs):
    """The (computed, expected) pair with the largest scaled error."""
    return max(pairs, key=lambda p: abs(p[0] - p[1]) / max(1.0, abs(p[1])))


def run_checks(n: int, tol: float = 1e-10, seed: int = 0) -> list[CheckResult]:
    fs = enumerate_frequencies(n)
    N, mu = fs.multiplicity, fs.mu4
    mu_exact = mu_hat_4_exact(fs)
    E = energy(n)
    out: list[CheckResult] = []

    def add(name, computed, expected, floor=0.0, skipped=False):
        out.append(CheckResult(name, float(computed), float(expected), max(tol, floor), skipped))

    # lattice moments, exact integers compared through exact rationals
    add("sum l1^4 = n^2 N (3+mu)/8", moment_sum(fs, 4, 0), n * n * N * (3 + mu_exact) / 8)
    add("sum l1^2 l2^2 = n^2 N (1-mu)/8", moment_sum(fs, 2, 2), n * n * N * (1 - mu_exact) / 8)
    add("sum l1^2 = N n / 2", moment_sum(fs, 2, 0), N * n / 2)
    add("sum l1^4 = sum l2^4", moment_sum(fs, 4, 0), moment_sum(fs, 0, 4))
    add("odd moments vanish", abs(moment_sum(fs, 3, 0)) + abs(moment_sum(fs, 1, 2)), 0)
    add("|half set| = N/2", len(fs.half_set), N / 2)
    add("|S4| = 3 N (N-1)", spectral_correlations(fs, 4), 3 * N * (N - 1))

    # Cholesky factor against the pointwise covariance
    K = cholesky_factors(n, mu)
    sigma = pointwise_covariance(n, mu)
    rebuilt = K.matrix() @ K.matrix().T
    rel = np.abs(rebuilt - sigma) / np.maximum(np.abs(sigma).max(), 1.0)
    add("K K^T = sigma (max scaled entry error)", rel.max(), 0.0)

    degenerate = is_degenerate(mu)
    for u in (-1.0, 0.5, 2.0):
        if degenerate:
            add(f"h coefficients from theta/psi, u={u}", 0, 0, skipped=True)
            continue
        a, b = h_coefficients(n, mu, u), h_from_theta_psi(n, mu, u)
        pairs = [(getattr(b, f), getattr(a, f)) for f in ("h35", "h1", "h2", "h3", "h4", "h5")]
        add(f"h coefficients from theta/psi, u={u}", *_worst(pairs))

    for u in (-2.0, -1.0, 0.5, 1.0, 2.0):
        add(f"Kac-Rice quadrature, u={u}", kac_rice_epc_quadrature(n, u), expected_lkc(0, n, u), floor=1e-8)

    for u in (-2.0, -0.5, 0.5, 2.0):
        if degenerate:
            add(f"hAB identity, u={u}", 0, 0, skipped=True)
            continue
        pairs = []
        for r in range(10):
            d = draw_coefficients(fs, seed, r)
            pairs.append((epc_second_chaos_via_hAB(fs, u, d), second_chaos_scale(0, n, u) * centered_norm(d)))
        add(f"hAB identity, u={u}", *_worst(pairs))

    draw = draw_coefficients(fs, seed, 0)
    M = auto_resolution(n)
    g = evaluate_on_grid(draw, M)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, M, size=(10, 2))
    direct = direct_evaluate(draw, idx / M)
    for plane in PLANES:
        grid_vals = getattr(g, plane)[idx[:, 0], idx[:, 1]]
        scale = max(1.0, float(np.abs(getattr(g, plane)).max()))
        # compare on the plane's own scale so the check is unit free
        add(f"grid = direct sum ({plane})", *_worst(list(zip(grid_vals / scale, direct[plane] / scale))))
    add("Parseval: grid mean of f^2", float(np.mean(g.values**2)), 2.0 * np.sum(draw.squared_moduli) / N)

    gi, pi = grid_integrals(g).as_dict(), parseval_integrals(draw).as_dict()
    for key in gi:
        s = max(1.0, abs(pi[key]))
        add(f"integral {key}: grid = Parseval", gi[key] / s, pi[key] / s)

    for u in (-1.5, 0.3, 2.5):
        add(f"c0 = H1 H2 phi / 4pi, u={u}", c_coefficient(0, u), hermite(1, u) * hermite(2, u) * norm_pdf(u) / (4 * math.pi))
    for x in (0.5, 2.404825557695773, 7.9, 8.1, 30.0):
        add(f"J0({x})", bessel_j0(x), special.j0(x), floor=1e-9)
    return out
