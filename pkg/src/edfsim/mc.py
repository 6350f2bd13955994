"""Monte-Carlo engine for e.d.f. experiments with deterministic parallelism.

Replications are processed in fixed blocks of ``BLOCK_REPS``; replication r
always draws from the Philox stream (master_seed, r), and block partials are
merged by a pairwise tree in block order.  The output is therefore
byte-identical for any worker count and any thread scheduling.

Covariance standard errors are delete-one jackknives over replications, and
z-scores compare the empirical covariances against one of the analytic
targets: the exact finite-m covariance (Hermite moment series) or a limit
kernel K(., .; theta).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .corrmodels import ModelSpec, build_equi, build_from_spec, spec_from_json_dict, spec_to_json_dict
from .diagnostics import gamma_m as _gamma_m
from .diagnostics import moment_sequence, rate as _rate
from .edf import ProcessGrid
from .errors import ConfigError, ParameterError
from .hermite import c1_values, edf_cov, limit_kernel
from .normal import upper_tail
from .sampler import RngStream, plan, sample

BLOCK_REPS = 64
SCHEMA = "v1"

SCALINGS = ("rate", "sqrt_m", "inv_sqrt_gamma")
TARGETS = ("none", "exact_cov", "limit_kernel")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    reps: int
    master_seed: int
    grid_size: int = 513
    scaling: str = "rate"
    target: str = "none"
    theta: float | None = None
    compare_points: tuple[float, ...] = (0.25, 0.5, 0.75)
    workers: int = 1

    def __post_init__(self):
        if int(self.reps) != self.reps or self.reps < 100:
            raise ParameterError("reps must be an integer >= 100 (the SE machinery assumes it)")
        if self.scaling not in SCALINGS:
            raise ParameterError(f"scaling must be one of {SCALINGS}")
        if self.target not in TARGETS:
            raise ParameterError(f"target must be one of {TARGETS}")
        if self.target == "limit_kernel":
            if self.theta is None:
                raise ParameterError("target 'limit_kernel' requires theta")
            if math.isnan(float(self.theta)) or float(self.theta) < -1.0:
                raise ParameterError("theta must lie in [-1, +inf]")
        pts = tuple(float(t) for t in self.compare_points)
        if not pts or any(not 0.0 < t < 1.0 for t in pts) or sorted(set(pts)) != list(pts):
            raise ParameterError("compare_points must be strictly increasing interior points")
        object.__setattr__(self, "compare_points", pts)
        if int(self.workers) != self.workers or self.workers < 1:
            raise ParameterError("workers must be a positive integer")
        if int(self.grid_size) != self.grid_size or self.grid_size < 3:
            raise ParameterError("grid_size must be an integer >= 3")

    def as_dict(self) -> dict:
        return {
            "model": spec_to_json_dict(self.model),
            "reps": self.reps,
            "master_seed": self.master_seed,
            "grid_size": self.grid_size,
            "scaling": self.scaling,
            "target": self.target,
            "theta": self.theta,
            "compare_points": list(self.compare_points),
            "workers": self.workers,
        }


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("experiment config must be a JSON object")
    try:
        model = spec_from_json_dict(data["model"])
    except KeyError:
        raise ConfigError("experiment config is missing 'model'") from None
    known = {
        "model", "reps", "master_seed", "grid_size", "scaling",
        "target", "theta", "compare_points", "workers",
    }
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unexpected experiment config fields: {sorted(extra)}")
    missing = {"reps", "master_seed"} - set(data)
    if missing:
        raise ConfigError(f"experiment config is missing {sorted(missing)}")
    kwargs = {k: data[k] for k in known - {"model"} if k in data}
    if "compare_points" in kwargs:
        kwargs["compare_points"] = tuple(kwargs["compare_points"])
    try:
        return ExperimentConfig(model=model, **kwargs)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class PairStat:
    t: float
    s: float
    cov: float
    se: float
    target: float | None
    z: float | None


@dataclass(frozen=True)
class McSummary:
    schema: str
    config: dict
    m: int
    gamma_m: float
    rate: float
    scale: float
    reps: int
    grid: list[float]
    mean: list[float]
    variance: list[float]
    modified_mean: list[float]
    modified_variance: list[float]
    pairs: tuple[PairStat, ...]
    max_abs_z: float | None

    def as_dict(self) -> dict:
        out = asdict(self)
        out["pairs"] = [asdict(p) for p in self.pairs]
        return out


def summary_from_dict(data: dict) -> McSummary:
    if not isinstance(data, dict) or data.get("schema") != SCHEMA:
        raise ConfigError(f"summary schema must be {SCHEMA!r}")
    pairs = tuple(PairStat(**p) for p in data["pairs"])
    fields = {k: data[k] for k in data if k != "pairs"}
    return McSummary(pairs=pairs, **fields)


def persist(summary: McSummary, path) -> None:
    """Write the summary as JSON; floats round-trip bit-identically (repr)."""
    text = json.dumps(summary.as_dict(), indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load(path) -> McSummary:
    return summary_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def jackknife_cov_se(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Sample covariance (ddof=1) and its delete-one jackknife SE."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 3 or y.size != n:
        raise ParameterError("jackknife needs two equal-length arrays, n >= 3")
    sx, sy, sxy = x.sum(), y.sum(), float(np.dot(x, y))
    cov = (sxy - sx * sy / n) / (n - 1)
    loo = (sxy - x * y - (sx - x) * (sy - y) / (n - 1)) / (n - 2)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return float(cov), se


@dataclass
class _BlockPartial:
    sum_path: np.ndarray
    sumsq_path: np.ndarray
    sum_mod: np.ndarray
    sumsq_mod: np.ndarray


def _merge(a: _BlockPartial, b: _BlockPartial) -> _BlockPartial:
    return _BlockPartial(
        a.sum_path + b.sum_path,
        a.sumsq_path + b.sumsq_path,
        a.sum_mod + b.sum_mod,
        a.sumsq_mod + b.sumsq_mod,
    )


def _tree_reduce(items: list, combine):
    while len(items) > 1:
        nxt = [
            combine(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)
        ]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def _run_block(
    lo: int,
    hi: int,
    master_seed: int,
    pl,
    m: int,
    grid_pts: np.ndarray,
    c1_grid: np.ndarray,
    cmp_pts: np.ndarray,
    scale: float,
) -> tuple[_BlockPartial, np.ndarray]:
    y = np.empty((hi - lo, m))
    for r in range(lo, hi):
        y[r - lo] = sample(pl, RngStream(master_seed, r).generator())
    p = np.sort(np.asarray(upper_tail(y)), axis=1)
    b = hi - lo
    f_grid = np.empty((b, grid_pts.size))
    f_cmp = np.empty((b, cmp_pts.size))
    for i in range(b):
        f_grid[i] = np.searchsorted(p[i], grid_pts, side="right")
        f_cmp[i] = np.searchsorted(p[i], cmp_pts, side="right")
    path = scale * (f_grid / m - grid_pts[None, :])
    path[:, 0] = 0.0
    path[:, -1] = 0.0
    ybar = y.mean(axis=1)
    modified = path - c1_grid[None, :] * (scale * ybar)[:, None]
    pair_vals = scale * (f_cmp / m - cmp_pts[None, :])
    partial = _BlockPartial(
        path.sum(axis=0),
        (path * path).sum(axis=0),
        modified.sum(axis=0),
        (modified * modified).sum(axis=0),
    )
    return partial, pair_vals


def _resolve_scale(scaling: str, m: int, g: float, r: float) -> float:
    if scaling == "rate":
        return r
    if scaling == "sqrt_m":
        return math.sqrt(m)
    if g == 0.0:
        raise ParameterError("inv_sqrt_gamma scaling needs gamma_m != 0")
    return 1.0 / math.sqrt(abs(g))


def run_edf_experiment(cfg: ExperimentConfig) -> McSummary:
    c = build_from_spec(cfg.model)
    g = _gamma_m(c)
    r = _rate(c)
    scale = _resolve_scale(cfg.scaling, c.m, g, r)
    pl = plan(c)
    grid = ProcessGrid.default(cfg.grid_size)
    grid_pts = grid.points
    c1_grid = np.asarray(c1_values(grid_pts))
    cmp_pts = np.array(cfg.compare_points)

    blocks = [
        (lo, min(lo + BLOCK_REPS, cfg.reps)) for lo in range(0, cfg.reps, BLOCK_REPS)
    ]

    def task(block):
        lo, hi = block
        return _run_block(
            lo, hi, cfg.master_seed, pl, c.m, grid_pts, c1_grid, cmp_pts, scale
        )

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(task, blocks))
    else:
        results = [task(b) for b in blocks]

    partial = _tree_reduce([res[0] for res in results], _merge)
    pair_vals = np.concatenate([res[1] for res in results], axis=0)

    n = float(cfg.reps)
    mean = partial.sum_path / n
    variance = (partial.sumsq_path - n * mean * mean) / (n - 1.0)
    mod_mean = partial.sum_mod / n
    mod_variance = (partial.sumsq_mod - n * mod_mean * mod_mean) / (n - 1.0)

    target_fn = _make_target(cfg, c, scale)
    pairs = []
    zs = []
    for i in range(cmp_pts.size):
        for j in range(i, cmp_pts.size):
            cov, se = jackknife_cov_se(pair_vals[:, i], pair_vals[:, j])
            tv = target_fn(cmp_pts[i], cmp_pts[j]) if target_fn else None
            z = (cov - tv) / se if tv is not None and se > 0.0 else None
            if z is not None:
                zs.append(abs(z))
            pairs.append(
                PairStat(float(cmp_pts[i]), float(cmp_pts[j]), cov, se, tv, z)
            )

    # the worker count cannot change any number in the summary, so it is not
    # part of the persisted experiment identity
    config_echo = {k: v for k, v in cfg.as_dict().items() if k != "workers"}
    return McSummary(
        schema=SCHEMA,
        config=config_echo,
        m=c.m,
        gamma_m=g,
        rate=r,
        scale=scale,
        reps=cfg.reps,
        grid=grid_pts.tolist(),
        mean=mean.tolist(),
        variance=variance.tolist(),
        modified_mean=mod_mean.tolist(),
        modified_variance=mod_variance.tolist(),
        pairs=tuple(pairs),
        max_abs_z=max(zs) if zs else None,
    )


def _make_target(cfg: ExperimentConfig, c, scale: float):
    if cfg.target == "none":
        return None
    if cfg.target == "exact_cov":
        moments = moment_sequence(c)

        def exact(t, s):
            return scale * scale * edf_cov(float(t), float(s), moments)

        return exact
    theta = float(cfg.theta)

    def kernel(t, s):
        return limit_kernel(float(t), float(s), theta)

    return kernel


# ---------------------------------------------------------------------------
# Single-path gallery for the two dependence regimes

@dataclass(frozen=True)
class PathRecord:
    label: str
    m_gamma_target: float
    rho: float
    gamma_m: float
    grid: list[float]
    path: list[float]


def figure1_data(
    m: int = 10000,
    m_gamma_targets=(0.0, 2.0, 100.0, 1000.0),
    master_seed: int = 0,
    grid_size: int = 513,
) -> list[PathRecord]:
    """One sqrt(m)-scaled e.d.f. path per equicorrelation strength.

    Target tau = m gamma_m maps to rho = tau / (m - 1); each path gets its
    own replication stream so the gallery is reproducible path by path.
    """
    grid = ProcessGrid.default(grid_size)
    records = []
    for index, tau in enumerate(m_gamma_targets):
        tau = float(tau)
        rho = tau / (m - 1)
        c = build_equi(m, rho)
        y = sample(plan(c), RngStream(master_seed, index).generator())
        p = np.sort(np.asarray(upper_tail(y)))
        f = np.searchsorted(p, grid.points, side="right") / m
        path = math.sqrt(m) * (f - grid.points)
        path[0] = 0.0
        path[-1] = 0.0
        label = f"{tau:g}"
        records.append(
            PathRecord(
                label=label,
                m_gamma_target=tau,
                rho=rho,
                gamma_m=_gamma_m(c),
                grid=grid.points.tolist(),
                path=path.tolist(),
            )
        )
    return records
