"""Two-group testing model, BH procedure, FDP, and Gaussian FDP approximations.

Observations are X_i = delta*H_i + Y_i with Y ~ N(0, Gamma) and upper-tail
p-values p_i = upper_tail(X_i).  The BH step-up rule is evaluated
combinatorially; its threshold alpha*k/m coincides with the sup-functional
sup{t : Ghat(t) >= t/alpha} applied to the empirical p-value c.d.f., and the
false discovery proportion uses the 0/0 = 0 convention.

The Gaussian approximations describe FDP ~ N(pi0*alpha, sd^2) with

  fixed H   : sd = pi0*alpha*sqrt((1/t* - 1)/m0 + h(t*)*gamma0)
  mixture H : sd = pi0*alpha*sqrt((1/t* - pi0)/(pi0*m) + h(t*)*gamma)

where t* solves G(t) = t/alpha for the limiting p-value c.d.f.
G(t) = pi0*t + pi1*F1(t), F1(t) = upper_tail(upper_quantile(t) - delta),
and h(t) = (phi(upper_quantile(t))/t)^2.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .corrmodels import (
    CorrelationStructure,
    DenseRep,
    LowRankRep,
    ModelSpec,
    ToeplitzRep,
    build_from_spec,
    model_spec,
    spec_from_json_dict,
    spec_to_json_dict,
)
from .diagnostics import gamma_m
from .errors import ApproximationError, ConfigError, ParameterError
from .mc import BLOCK_REPS
from .normal import phi, upper_quantile, upper_tail
from .sampler import RngStream, plan, sample

HYPOTHESIS_MODES = ("fixed", "mixture")

_T_EPS = 1e-12
_T_MAX_ITER = 200


@dataclass(frozen=True)
class TwoGroupConfig:
    model: ModelSpec
    pi0: float
    delta: float
    alpha: float
    hypothesis_mode: str = "mixture"
    hypotheses: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0.0 < self.pi0 < 1.0:
            raise ParameterError("pi0 must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError("alpha must lie in (0, 1)")
        if not self.delta >= 0.0:
            raise ParameterError("delta must be nonnegative")
        if self.hypothesis_mode not in HYPOTHESIS_MODES:
            raise ParameterError(f"hypothesis_mode must be one of {HYPOTHESIS_MODES}")
        if self.hypothesis_mode == "fixed":
            if self.hypotheses is None:
                raise ParameterError("fixed hypothesis_mode requires a hypotheses vector")
            h = tuple(int(v) for v in self.hypotheses)
            if len(h) != self.model.m or any(v not in (0, 1) for v in h):
                raise ParameterError("hypotheses must be a 0/1 vector of length m")
            object.__setattr__(self, "hypotheses", h)
        elif self.hypotheses is not None:
            raise ParameterError("mixture hypothesis_mode takes no hypotheses vector")

    def as_dict(self) -> dict:
        out = {
            "model": spec_to_json_dict(self.model),
            "pi0": self.pi0,
            "delta": self.delta,
            "alpha": self.alpha,
            "hypothesis_mode": self.hypothesis_mode,
        }
        if self.hypotheses is not None:
            out["hypotheses"] = list(self.hypotheses)
        return out


def two_group_config_from_dict(data: dict) -> TwoGroupConfig:
    if not isinstance(data, dict):
        raise ConfigError("two-group config must be a JSON object")
    known = {"model", "pi0", "delta", "alpha", "hypothesis_mode", "hypotheses"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unexpected two-group config fields: {sorted(extra)}")
    missing = {"model", "pi0", "delta", "alpha"} - set(data)
    if missing:
        raise ConfigError(f"two-group config is missing {sorted(missing)}")
    model = spec_from_json_dict(data["model"])
    kwargs = {k: data[k] for k in known - {"model"} if k in data}
    if "hypotheses" in kwargs and kwargs["hypotheses"] is not None:
        kwargs["hypotheses"] = tuple(kwargs["hypotheses"])
    try:
        return TwoGroupConfig(model=model, **kwargs)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def two_group_sample(cfg: TwoGroupConfig, rng, pl=None):
    """Draw (H, X).  Mixture mode draws H first, then Y, from the same rng."""
    if pl is None:
        pl = plan(build_from_spec(cfg.model))
    m = cfg.model.m
    if cfg.hypothesis_mode == "mixture":
        h = (rng.random(m) < 1.0 - cfg.pi0).astype(np.int64)
    else:
        h = np.array(cfg.hypotheses, dtype=np.int64)
    y = sample(pl, rng)
    return h, cfg.delta * h + y


def bh_threshold(pvalues, alpha: float) -> tuple[float, int]:
    """Step-up threshold (alpha*k/m) and rejection count of the BH rule."""
    p = np.asarray(pvalues, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ParameterError("pvalues must be a nonempty 1-D array")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ParameterError("pvalues must lie in [0, 1]")
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha must lie in (0, 1)")
    m = p.size
    ps = np.sort(p)
    hits = np.nonzero(ps <= alpha * np.arange(1, m + 1) / m)[0]
    k = int(hits[-1]) + 1 if hits.size else 0
    return alpha * k / m, k


def fdp(pvalues, hypotheses, alpha: float) -> float:
    """False discovery proportion of BH at level alpha (0/0 = 0)."""
    p = np.asarray(pvalues, dtype=float)
    h = np.asarray(hypotheses)
    if h.shape != p.shape:
        raise ParameterError("hypotheses and pvalues must have equal length")
    threshold, k = bh_threshold(p, alpha)
    if k == 0:
        return 0.0
    false = int(np.count_nonzero((p <= threshold) & (h == 0)))
    return false / k


def _limit_alt_cdf(t, delta: float):
    return upper_tail(upper_quantile(t) - delta)


def limit_pvalue_cdf(t, pi0: float, delta: float):
    """G(t): limiting c.d.f. of a two-group p-value."""
    t = np.asarray(t, dtype=float)
    out = pi0 * t + (1.0 - pi0) * _limit_alt_cdf(t, delta)
    return float(out) if out.ndim == 0 else out


def t_star(pi0: float, delta: float, alpha: float) -> float:
    """Unique t in (0,1) with G(t) = t/alpha, by bisection.

    G(t)/t -> infinity at 0 and G is strictly concave, so a sign change is
    guaranteed on (eps, 1-eps) and the root is unique.
    """
    if not 0.0 < pi0 < 1.0 or not 0.0 < alpha < 1.0:
        raise ParameterError("pi0 and alpha must lie in (0, 1)")
    if not delta > 0.0:
        raise ParameterError("delta must be positive")

    def f(t):
        return limit_pvalue_cdf(t, pi0, delta) - t / alpha

    lo, hi = _T_EPS, 1.0 - _T_EPS
    flo, fhi = f(lo), f(hi)
    if flo <= 0.0 or fhi >= 0.0:
        raise ApproximationError("no sign change for G(t) - t/alpha on (0, 1)")
    for _ in range(_T_MAX_ITER):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _T_EPS:
            break
    return 0.5 * (lo + hi)


def h_of_t(t: float) -> float:
    """h(t) = (phi(upper_quantile(t)) / t)^2, the squared log-derivative of t."""
    if not 0.0 < t < 1.0:
        raise ParameterError("t must lie in (0, 1)")
    return float((phi(upper_quantile(t)) / t) ** 2)


def _masked_pair_sum(c: CorrelationStructure, mask: np.ndarray) -> float:
    """sum_{i != j, mask_i = mask_j = 1} Gamma_ij for a 0/1 mask."""
    v = mask.astype(float)
    n = float(v.sum())
    rep = c.rep
    if isinstance(rep, LowRankRep):
        quad = rep.diag * float(v @ v) + float(np.sum((rep.loadings.T @ v) ** 2))
    elif isinstance(rep, ToeplitzRep):
        acf = np.correlate(v, v, mode="full")[c.m:]
        quad = n + 2.0 * float(rep.first_row[1:] @ acf)
    else:
        quad = float(v @ (np.asarray(rep.matrix) @ v))
    return quad - n


def gamma0(c: CorrelationStructure, hypotheses) -> float:
    """Null-pair average m0^{-2} sum_{i != j, H_i = H_j = 0} Gamma_ij."""
    h = np.asarray(hypotheses)
    if h.shape != (c.m,):
        raise ParameterError("hypotheses must be a vector of length m")
    null_mask = (h == 0).astype(np.int64)
    m0 = int(null_mask.sum())
    if m0 < 2:
        raise ParameterError("gamma0 needs at least two true nulls")
    return _masked_pair_sum(c, null_mask) / m0**2


def group_rates(c: CorrelationStructure, hypotheses) -> tuple[float, float]:
    """(r0, r1): group analogues of the global rate, per null/alternative."""
    h = np.asarray(hypotheses)
    if h.shape != (c.m,):
        raise ParameterError("hypotheses must be a vector of length m")
    rates = []
    for mask in ((h == 0).astype(np.int64), (h == 1).astype(np.int64)):
        n = int(mask.sum())
        if n < 2:
            raise ParameterError("each group needs at least two members")
        g = _masked_pair_sum(c, mask) / n**2
        rates.append(1.0 / math.sqrt(1.0 / n + abs(g)))
    return rates[0], rates[1]


@dataclass(frozen=True)
class FdpApprox:
    variant: str
    pi0: float
    delta: float
    alpha: float
    t_star: float
    h_tstar: float
    mean: float
    sd: float

    def as_dict(self) -> dict:
        return asdict(self)


def fdp_gaussian_approx(
    variant: str,
    *,
    pi0: float,
    delta: float,
    alpha: float,
    m0: int | None = None,
    gamma0: float | None = None,
    m: int | None = None,
    gamma: float | None = None,
) -> FdpApprox:
    """Gaussian FDP approximation N(pi0*alpha, sd^2) for either hypothesis mode."""
    if variant not in ("fixed", "mixture"):
        raise ParameterError("variant must be 'fixed' or 'mixture'")
    ts = t_star(pi0, delta, alpha)
    h = h_of_t(ts)
    if variant == "fixed":
        if m0 is None or gamma0 is None:
            raise ParameterError("fixed variant requires m0 and gamma0")
        radicand = (1.0 / ts - 1.0) / m0 + h * gamma0
    else:
        if m is None or gamma is None:
            raise ParameterError("mixture variant requires m and gamma")
        radicand = (1.0 / ts - pi0) / (pi0 * m) + h * gamma
    if radicand <= 0.0:
        raise ApproximationError(
            f"nonpositive variance argument {radicand!r}; the Gaussian "
            "approximation is invalid for these inputs"
        )
    mean = pi0 * alpha
    return FdpApprox(
        variant=variant,
        pi0=pi0,
        delta=delta,
        alpha=alpha,
        t_star=ts,
        h_tstar=h,
        mean=mean,
        sd=mean * math.sqrt(radicand),
    )


@dataclass(frozen=True)
class FdpSample:
    fdp_values: tuple[float, ...]
    reject_counts: tuple[int, ...]
    gamma0: float | None

    def as_dict(self) -> dict:
        return {
            "fdp_values": list(self.fdp_values),
            "reject_counts": list(self.reject_counts),
            "gamma0": self.gamma0,
        }


def run_fdp_experiment(
    cfg: TwoGroupConfig,
    reps: int,
    master_seed: int,
    workers: int = 1,
) -> tuple[FdpSample, FdpApprox]:
    """Replicate the BH FDP and pair it with the matching Gaussian approximation.

    Replication r draws from the stream (master_seed, r); blocks of
    replications may run on a thread pool, and results are concatenated in
    replication order, so the output does not depend on the worker count.
    """
    if int(reps) != reps or reps < 1:
        raise ParameterError("reps must be a positive integer")
    if int(workers) != workers or workers < 1:
        raise ParameterError("workers must be a positive integer")
    c = build_from_spec(cfg.model)
    pl = plan(c)

    if cfg.hypothesis_mode == "fixed":
        h_fixed = np.array(cfg.hypotheses, dtype=np.int64)
        g0 = gamma0(c, h_fixed)
        approx = fdp_gaussian_approx(
            "fixed",
            pi0=cfg.pi0,
            delta=cfg.delta,
            alpha=cfg.alpha,
            m0=int(np.count_nonzero(h_fixed == 0)),
            gamma0=g0,
        )
    else:
        g0 = None
        approx = fdp_gaussian_approx(
            "mixture",
            pi0=cfg.pi0,
            delta=cfg.delta,
            alpha=cfg.alpha,
            m=c.m,
            gamma=gamma_m(c),
        )

    def block(bounds):
        lo, hi = bounds
        vals = np.empty(hi - lo)
        counts = np.empty(hi - lo, dtype=np.int64)
        for r in range(lo, hi):
            rng = RngStream(master_seed, r).generator()
            h, x = two_group_sample(cfg, rng, pl)
            p = np.asarray(upper_tail(x))
            threshold, k = bh_threshold(p, cfg.alpha)
            counts[r - lo] = k
            if k == 0:
                vals[r - lo] = 0.0
            else:
                false = int(np.count_nonzero((p <= threshold) & (h == 0)))
                vals[r - lo] = false / k
        return vals, counts

    blocks = [(lo, min(lo + BLOCK_REPS, reps)) for lo in range(0, reps, BLOCK_REPS)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(block, blocks))
    else:
        results = [block(b) for b in blocks]
    values = np.concatenate([res[0] for res in results])
    counts = np.concatenate([res[1] for res in results])

    sample_out = FdpSample(
        fdp_values=tuple(float(v) for v in values),
        reject_counts=tuple(int(k) for k in counts),
        gamma0=g0,
    )
    return sample_out, approx


def ks_distance(fdp_values, approx: FdpApprox) -> float:
    """Kolmogorov-Smirnov distance between the FDP sample and its approximation."""
    values = np.asarray(fdp_values, dtype=float)
    result = stats.kstest(values, "norm", args=(approx.mean, approx.sd))
    return float(result.statistic)


def figure2_config(m: int, m_rho_target: float) -> TwoGroupConfig:
    """Mixture two-group config on the three-factor structure.

    The factor strength rho is m_rho_target / m; the stated weight fractions
    (0.4, 0.3, 0.6) exceed trace balance, so the structure uses the
    normalize-diagonal repair.
    """
    spec = model_spec(
        "factor",
        m,
        rho=m_rho_target / m,
        weight_fractions=[0.4, 0.3, 0.6],
        loadings="three-pattern",
        repair="normalize-diagonal",
    )
    return TwoGroupConfig(model=spec, pi0=0.9, delta=3.0, alpha=0.25)


@dataclass(frozen=True)
class Figure2Record:
    m_rho_target: float
    rho: float
    gamma_m: float
    approx: FdpApprox
    fdp_values: tuple[float, ...]
    ks: float

    def as_dict(self) -> dict:
        out = asdict(self)
        out["approx"] = self.approx.as_dict()
        out["fdp_values"] = list(self.fdp_values)
        return out


def figure2_data(
    m: int = 5000,
    reps: int = 2000,
    m_rho_targets=(0.0, 10.0, 100.0, 1000.0),
    master_seed: int = 0,
    workers: int = 1,
) -> list[Figure2Record]:
    """FDP histogram data plus Gaussian overlays across factor strengths."""
    records = []
    for tau in m_rho_targets:
        cfg = figure2_config(m, float(tau))
        sample_out, approx = run_fdp_experiment(cfg, reps, master_seed, workers)
        c = build_from_spec(cfg.model)
        records.append(
            Figure2Record(
                m_rho_target=float(tau),
                rho=float(tau) / m,
                gamma_m=gamma_m(c),
                approx=approx,
                fdp_values=sample_out.fdp_values,
                ks=ks_distance(sample_out.fdp_values, approx),
            )
        )
    return records
