"""Hermite-polynomial covariance machinery for threshold indicators.

The indicator 1{upper_tail(Y) <= t} of a standard Gaussian Y expands in
probabilists' Hermite polynomials H_l with coefficients

    c_l(t) = H_{l-1}(z_t) * phi(z_t),      z_t = upper-tail inverse of t,

and the covariance of two indicators at correlation r is the series
sum_{l>=1} c_l(t) c_l(s) r^l / l!.  Everything here is built on that
expansion: the pairwise covariance, the exact finite-m e.d.f. covariance
(given the matrix moment sums), and the limiting covariance kernels.

Series are summed in normalized form (H_l / sqrt(l!)) so nothing overflows
even at hundreds of terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, TruncationError
from .normal import phi, quantile


@dataclass(frozen=True)
class HermiteSeriesConfig:
    """Truncation policy for the covariance series."""

    tail_tolerance: float = 1e-12
    max_terms: int = 200

    def __post_init__(self):
        if not self.tail_tolerance > 0.0:
            raise ParameterError("tail_tolerance must be positive")
        if self.max_terms < 1:
            raise ParameterError("max_terms must be at least 1")


DEFAULT_SERIES_CONFIG = HermiteSeriesConfig()


def _check_probability(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise ParameterError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def hermite(l: int, x) -> np.ndarray | float:
    """Probabilists' Hermite polynomial H_l(x) by the three-term recurrence.

    H_0 = 1, H_1 = x, H_{l+1}(x) = x H_l(x) - l H_{l-1}(x).  Exact in exact
    arithmetic; in float64 the values overflow around l ~ 170 for |x| = O(1),
    far above any l used here.
    """
    if l < 0:
        raise ParameterError("Hermite index must be non-negative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if l == 0:
        return float(h_prev) if x.ndim == 0 else h_prev
    h = x.copy()
    for k in range(1, l):
        h_prev, h = h, x * h - k * h_prev
    return float(h) if x.ndim == 0 else h


def indicator_coeff(l: int, t) -> np.ndarray | float:
    """Hermite coefficient c_l(t) of the p-value indicator 1{upper_tail(Y) <= t}.

    c_l(t) = H_{l-1}(z_t) phi(z_t) with z_t the upper-tail inverse of t;
    0 at t in {0, 1}.  Vectorized over t.
    """
    if l < 1:
        raise ParameterError("coefficient index starts at 1")
    t_arr = np.asarray(t, dtype=float)
    if t_arr.size and (np.any(t_arr < 0.0) or np.any(t_arr > 1.0) or np.any(np.isnan(t_arr))):
        raise ParameterError("t must lie in [0, 1]")
    out = np.zeros_like(t_arr, dtype=float)
    interior = (t_arr > 0.0) & (t_arr < 1.0)
    if np.any(interior):
        z = -np.asarray(quantile(t_arr[interior]))  # upper-tail inverse
        out[interior] = hermite(l - 1, z) * phi(z)
    return float(out) if t_arr.ndim == 0 else out


def c1_values(t) -> np.ndarray | float:
    """c_1(t) = phi(upper-tail inverse of t), the leading indicator coefficient."""
    return indicator_coeff(1, t)


def _normalized_terms(t: float, s: float, max_terms: int):
    """Yield (l, u_l(t) * u_l(s)) with u_l = c_l / sqrt((l-1)!), for l = 1.. .

    The product c_l(t) c_l(s) / l! equals u_l(t) u_l(s) / l, which stays
    bounded, so the generator never overflows.
    """
    zt = -float(quantile(t))
    zs = -float(quantile(s))
    ft, fs = float(phi(zt)), float(phi(zs))
    ht_prev, ht = 0.0, 1.0  # normalized H_{l-1}(zt) for current l
    hs_prev, hs = 0.0, 1.0
    for l in range(1, max_terms + 1):
        yield l, (ft * ht) * (fs * hs)
        rl = math.sqrt(l)
        ht_prev, ht = ht, (zt * ht - math.sqrt(l - 1) * ht_prev) / rl
        hs_prev, hs = hs, (zs * hs - math.sqrt(l - 1) * hs_prev) / rl


def indicator_cov(t, s, r, config: HermiteSeriesConfig | None = None) -> float:
    """Covariance of 1{upper_tail(U) <= t} and 1{upper_tail(V) <= s}, corr(U,V) = r.

    Summed by the Hermite series for |r| < 1, stopping once the geometric
    tail bound |r|^(L+1) sqrt(t(1-t)) sqrt(s(1-s)) / (1-|r|) drops below the
    configured tolerance.  At r = +-1 the exact closed forms are used
    (min(t,s) - ts and max(t+s-1, 0) - ts).  Raises TruncationError when the
    term cap is hit with the tolerance unmet.
    """
    cfg = config or DEFAULT_SERIES_CONFIG
    t = _check_probability("t", t)
    s = _check_probability("s", s)
    r = float(r)
    if not -1.0 <= r <= 1.0 or math.isnan(r):
        raise ParameterError(f"correlation must lie in [-1, 1], got {r!r}")
    if t in (0.0, 1.0) or s in (0.0, 1.0):
        return 0.0
    if r == 0.0:
        return 0.0
    if r == 1.0:
        return min(t, s) - t * s
    if r == -1.0:
        return max(t + s - 1.0, 0.0) - t * s

    cap = math.sqrt(t * (1.0 - t)) * math.sqrt(s * (1.0 - s))
    absr = abs(r)
    total = 0.0
    rpow = 1.0
    for l, uu in _normalized_terms(t, s, cfg.max_terms):
        rpow *= r
        total += uu * rpow / l
        if absr ** (l + 1) * cap / (1.0 - absr) < cfg.tail_tolerance:
            return total
    raise TruncationError(
        f"indicator covariance series did not converge in {cfg.max_terms} terms "
        f"(r={r}, tolerance={cfg.tail_tolerance})"
    )


def edf_cov(t, s, gamma_moments, config: HermiteSeriesConfig | None = None) -> float:
    """Exact Cov(F_m(t), F_m(s)) of the e.d.f. from matrix moment sums.

    ``gamma_moments[l-1]`` must supply the full double sum
    m^-2 sum_{i,j} Gamma_{i,j}^l (diagonal included), for l = 1..L.  Each is
    a rescaled variance, hence in [0, 1].

    The moment sequence converges to a positive level (1/m for matrices with
    no off-diagonal +-1 entries) rather than to 0, and the Hermite weights
    decay too slowly to truncate the level's contribution termwise.  So the
    settled level M_L is completed in closed form -- the full series at
    constant moments is level * (min(t,s) - ts) -- and only the decaying
    residuals M_l - M_L are summed.  Exact for constant sequences (identity
    matrix) of any length; raises TruncationError when the tail of the
    supplied sequence has visibly not settled.
    """
    cfg = config or DEFAULT_SERIES_CONFIG
    t = _check_probability("t", t)
    s = _check_probability("s", s)
    moments = [float(v) for v in gamma_moments]
    if not moments:
        raise ParameterError("at least one moment sum is required")
    for v in moments:
        if not 0.0 <= v <= 1.0 or math.isnan(v):
            raise ParameterError(
                "each moment sum m^-2 sum Gamma^l is a rescaled variance in [0, 1]"
            )
    if t in (0.0, 1.0) or s in (0.0, 1.0):
        return 0.0

    level = moments[-1]
    tail = moments[-3:-1] if len(moments) >= 3 else moments[:-1]
    unsettled = max((abs(v - level) for v in tail), default=0.0)
    if unsettled > 4.0 * cfg.tail_tolerance:
        raise TruncationError(
            "moment sequence has not settled "
            f"(last deviations {unsettled:.3e} > {4.0 * cfg.tail_tolerance:.3e}); "
            "supply more moment terms"
        )

    total = level * (min(t, s) - t * s)
    for l, uu in _normalized_terms(t, s, len(moments)):
        total += uu * (moments[l - 1] - level) / l
    return total


def _theta_weights(theta: float) -> tuple[float, float]:
    """(bridge weight 1/(1+|theta|), spike weight theta/(1+|theta|))."""
    theta = float(theta)
    if math.isnan(theta) or theta < -1.0:
        raise ParameterError("theta must lie in [-1, +inf]")
    if math.isinf(theta):
        return 0.0, 1.0
    denom = 1.0 + abs(theta)
    return 1.0 / denom, theta / denom


def limit_kernel(t, s, theta: float) -> float:
    """Limiting covariance kernel K(t, s; theta) of the rescaled e.d.f.

    K = (min(t,s) - ts) / (1 + |theta|) + theta / (1 + |theta|) c_1(t) c_1(s),
    with the conventions theta/(1+|theta|) -> 1 and 1/(1+|theta|) -> 0 at
    theta = +inf.  theta in [-1, +inf].
    """
    bridge_w, spike_w = _theta_weights(theta)
    t = _check_probability("t", t)
    s = _check_probability("s", s)
    bridge = min(t, s) - t * s
    spike = float(indicator_coeff(1, t)) * float(indicator_coeff(1, s))
    return bridge_w * bridge + spike_w * spike


def projected_bridge_kernel(t, s) -> float:
    """Brownian-bridge kernel with the c_1 direction projected out.

    K~(t, s) = min(t,s) - ts - c_1(t) c_1(s); positive semidefinite because
    c_1 c_1 is the l = 1 term of the bridge kernel's Hermite expansion.
    """
    t = _check_probability("t", t)
    s = _check_probability("s", s)
    return min(t, s) - t * s - float(indicator_coeff(1, t)) * float(indicator_coeff(1, s))
