"""Closed-form risk predictions for the covariant measurement.

Everything here is deterministic arithmetic: the semicircle law governing
the least squares error block, the exact second moments of the error blocks
for rank-r equal-eigenvalue states, and the truncation-point equation whose
solution drives the projected least squares risk expansions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, InvalidRankError

QUAD_ABS_TOL = 1e-10
EPSILON_RESIDUAL_TOL = 1e-8


def wigner_density(x: float | np.ndarray, radius: float) -> np.ndarray | float:
    """Semicircle density on [-radius, radius]."""
    if radius <= 0:
        raise DomainError("radius must be positive")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) <= radius
    out[inside] = 2.0 / (math.pi * radius**2) * np.sqrt(radius**2 - x[inside] ** 2)
    if out.ndim == 0:
        return float(out)
    return out


def wigner_cdf(x: float | np.ndarray, radius: float) -> np.ndarray | float:
    """Cumulative distribution of the semicircle on [-radius, radius]."""
    if radius <= 0:
        raise DomainError("radius must be positive")
    x = np.asarray(x, dtype=float)
    t = np.clip(x / radius, -1.0, 1.0)
    out = 0.5 + (t * np.sqrt(1.0 - t**2) + np.arcsin(t)) / math.pi
    if out.ndim == 0:
        return float(out)
    return out


def semicircle_ks(eigs: np.ndarray, radius: float) -> float:
    """Kolmogorov-Smirnov distance of an eigenvalue sample to the semicircle."""
    x = np.sort(np.asarray(eigs, dtype=float))
    n = x.size
    if n == 0:
        raise DomainError("empty eigenvalue sample")
    cdf = wigner_cdf(x, radius)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(np.abs(upper - cdf)), np.max(np.abs(cdf - lower))))


@dataclass(frozen=True)
class BlockVariancePrediction:
    """Exact per-element second moments of the scaled LS error blocks."""

    v_a: float
    v_b: float
    v_c: float
    var_c_diag: float
    cov_c_diag: float
    var_a_diag: float
    cov_a_diag: float


def ls_block_variances(d: int, r: int) -> BlockVariancePrediction:
    if not 1 <= r <= d:
        raise InvalidRankError(f"rank must satisfy 1 <= r <= {d}, got {r}")
    ratio = (d + 1.0) / (d + 2.0)
    v_a = (r + 2.0) / r * ratio
    v_b = (r + 1.0) / r * ratio
    one_plus = (1.0 + 1.0 / r) ** 2
    return BlockVariancePrediction(
        v_a=v_a,
        v_b=v_b,
        v_c=ratio,
        var_c_diag=d / (d + 2.0),
        cov_c_diag=-1.0 / (d + 2.0),
        var_a_diag=2.0 * v_a - one_plus,
        cov_a_diag=v_a - one_plus,
    )


def ls_expected_a_norm_sq(d: int, r: int) -> float:
    """E ||A||_2^2 for the top-left error block."""
    ratio = (d + 1.0) / (d + 2.0)
    return (r + 1.0) * (r + 2.0) * ratio - (r + 1.0) ** 2 / r


def ls_risk_frobenius(d: int, r: int) -> float:
    """N E ||rho_LS - rho_r||_2^2 for the covariant measurement (exact)."""
    if not 1 <= r <= d:
        raise InvalidRankError(f"rank must satisfy 1 <= r <= {d}, got {r}")
    ratio = (d + 1.0) / (d + 2.0)
    return (
        (r + 1.0) * (r + 2.0) * ratio
        - (r + 1.0) ** 2 / r
        + 2.0 * (r + 1.0) * (d - r) * ratio
        + (d - r) * (d - r - 1.0) * ratio
        + (d - r) * d / (d + 2.0)
    )


def ls_norm_asymptotes(d: int, n_samples: float) -> dict[str, float]:
    """Leading operator- and trace-norm errors of the LS estimate."""
    return {
        "operator": 2.0 * math.sqrt(d / n_samples),
        "trace": 8.0 * d**1.5 / (3.0 * math.pi * math.sqrt(n_samples)),
    }


def shift_integral(eps: float) -> float:
    """integral_eps^1 (y - eps) sqrt(1 - y^2) dy by adaptive quadrature."""
    if eps >= 1.0:
        return 0.0
    val, _ = quad(
        lambda y: (y - eps) * math.sqrt(max(0.0, 1.0 - y * y)),
        eps,
        1.0,
        epsabs=QUAD_ABS_TOL,
    )
    return val


def shift_integral_closed_form(eps: float) -> float:
    """Closed form of shift_integral, used as an independent oracle in tests."""
    if eps >= 1.0:
        return 0.0
    s = math.sqrt(1.0 - eps * eps)
    return s**3 / 3.0 - eps * (math.pi / 4.0 - eps * s / 2.0 - math.asin(eps) / 2.0)


def _square_shift_integral(eps: float) -> float:
    """integral_eps^1 (y - eps)^2 sqrt(1 - y^2) dy."""
    val, _ = quad(
        lambda y: (y - eps) ** 2 * math.sqrt(max(0.0, 1.0 - y * y)),
        eps,
        1.0,
        epsabs=QUAD_ABS_TOL,
    )
    return val


def epsilon_residual(eps: float, r: int, d: int) -> float:
    """r eps - (2 (d - r) / pi) integral, monotone increasing in eps."""
    return r * eps - 2.0 * (d - r) / math.pi * shift_integral(eps)


def solve_epsilon(r: int, d: int) -> float:
    """Truncation point of the projected spectrum, as a fraction of the edge.

    Solves the deterministic cut-off equation (trace budget of the projected
    semicircle bulk) by bisection on (0, 1).
    """
    if not 1 <= r < d:
        raise DomainError(f"need 1 <= r < d, got r={r}, d={d}")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = (lo + hi) / 2.0
        res = epsilon_residual(mid, r, d)
        if abs(res) < EPSILON_RESIDUAL_TOL:
            return mid
        if res > 0:
            hi = mid
        else:
            lo = mid
    mid = (lo + hi) / 2.0
    if abs(epsilon_residual(mid, r, d)) > EPSILON_RESIDUAL_TOL:
        raise DomainError(f"epsilon solver did not converge for r={r}, d={d}")
    return mid


def pls_risk_frobenius(d: int, r: int, n_samples: float, leading: bool = False) -> float:
    """E ||rho_PLS - rho_r||_2^2 for the covariant measurement.

    Sum of the three truncated-block contributions divided by N; with
    leading=True returns the quoted leading-order term 6 r d / N instead.
    """
    if not 1 <= r < d:
        raise DomainError(f"need 1 <= r < d, got r={r}, d={d}")
    if n_samples <= 0:
        raise DomainError("sample count must be positive")
    if leading:
        return 6.0 * r * d / n_samples
    eps = solve_epsilon(r, d)
    a_term = ls_expected_a_norm_sq(d, r) + 4.0 * r * (d - r) * eps**2
    shrink = 1.0 - 2.0 * r * math.sqrt((d - r) / n_samples) * eps
    b_term = 2.0 * (d + 1.0) * (d - r) * (r + 1.0) / (d + 2.0) * shrink**2
    c_term = 8.0 * (d - r) ** 2 / math.pi * _square_shift_integral(eps)
    return (a_term + b_term + c_term) / n_samples


def pls_risk_frobenius_blocks(d: int, r: int) -> float:
    """N-independent limit of N E ||rho_PLS - rho_r||_2^2 (regime N >> d).

    Same three block contributions as pls_risk_frobenius but with the
    finite-N shrink of the off-diagonal block dropped; this is the form
    behind the quoted theory values for moderate N/d ratios.
    """
    if not 1 <= r < d:
        raise DomainError(f"need 1 <= r < d, got r={r}, d={d}")
    eps = solve_epsilon(r, d)
    a_term = ls_expected_a_norm_sq(d, r) + 4.0 * r * (d - r) * eps**2
    b_term = 2.0 * (d + 1.0) * (d - r) * (r + 1.0) / (d + 2.0)
    c_term = 8.0 * (d - r) ** 2 / math.pi * _square_shift_integral(eps)
    return a_term + b_term + c_term


def pls_risk_bures(d: int, r: int, n_samples: float, leading: bool = False) -> float:
    """E Bures^2 of the projected least squares estimate.

    Leading term 2 r sqrt(d - r) eps / sqrt(N) plus the second-order
    (r / 4N) E Tr(A~^2) correction.
    """
    if not 1 <= r < d:
        raise DomainError(f"need 1 <= r < d, got r={r}, d={d}")
    if n_samples <= 0:
        raise DomainError("sample count must be positive")
    eps = solve_epsilon(r, d)
    first = 2.0 * r * math.sqrt((d - r) / n_samples) * eps
    if leading:
        return first
    second = (
        r
        / (4.0 * n_samples)
        * (ls_expected_a_norm_sq(d, r) + 4.0 * r * (d - r) * eps**2)
    )
    return first + second


def pls_norm_lower_bounds(d: int, r: int, n_samples: float) -> dict[str, float]:
    """Operator- and trace-norm lower bounds for the PLS error."""
    eps = solve_epsilon(r, d)
    root = math.sqrt((d - r) / n_samples)
    return {"operator": 2.0 * root * eps, "trace": 4.0 * r * root * eps}


def ml_bures_mixed(d: int, n_samples: float) -> float:
    """Asymptotic Bures risk of ML at the maximally mixed state, random bases."""
    return (d * d - 1.0) * (d + 1.0) / (4.0 * n_samples)
