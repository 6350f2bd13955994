"""Command-line interface: diagnostics, simulations, and figure data exports.

Every subcommand reads an optional JSON config (schema "v1"), writes JSON/CSV
artifacts into --out, and embeds the fully resolved configuration and master
seed in each artifact.  Exit codes: 0 success, 1 runtime failure, 2 invalid
configuration.  Outputs are deterministic given the seed, for any --workers.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fdr, mc
from .corrmodels import spec_from_json_dict
from .diagnostics import assess
from .edf import ProcessGrid
from .errors import ConfigError, EdfsimError, ParameterError
from .hermite import limit_kernel
from .limitproc import LimitSimConfig, integral_weight_check, sample_limit_many
from .sampler import RngStream

SCHEMA = "v1"


def _load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config {path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    if data.get("schema") != SCHEMA:
        raise ConfigError(f"config {path} must declare \"schema\": \"{SCHEMA}\"")
    out = dict(data)
    del out["schema"]
    return out


def _validate_seed(seed) -> int:
    if int(seed) != seed or not 0 <= int(seed) < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return int(seed)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows, config: dict) -> None:
    lines = ["# config: " + json.dumps(config), ",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# diagnose

def cmd_diagnose(args) -> int:
    if args.config is None:
        raise ConfigError("diagnose requires --config")
    data = _load_config(args.config)
    known = {"model", "m_grid", "epsilon0"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unexpected diagnose config fields: {sorted(extra)}")
    if "model" not in data:
        raise ConfigError("diagnose config is missing 'model'")
    if "m_grid" not in data:
        raise ConfigError("diagnose config is missing 'm_grid'")
    spec = spec_from_json_dict(data["model"])
    epsilon0 = float(data.get("epsilon0", 0.1))
    try:
        trend = assess(spec, data["m_grid"], epsilon0=epsilon0)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc

    resolved = {
        "schema": SCHEMA,
        "model": data["model"],
        "m_grid": [int(m) for m in data["m_grid"]],
        "epsilon0": epsilon0,
    }
    out = _out_dir(args)
    payload = trend.as_dict()
    payload["schema"] = SCHEMA
    payload["config"] = resolved
    _write_json(out / "diagnose.json", payload)

    cols = [
        "m", "gamma_m", "m_gamma", "rate", "moment2", "moment4",
        "cond_vanish2", "cond_h1", "cond_h3", "cond_h4",
    ]
    lines = ["# config: " + json.dumps(resolved), ",".join(cols)]
    for rep in trend.reports:
        row = rep.as_dict()
        lines.append(
            ",".join("" if row[c] is None else repr(float(row[c])) for c in cols)
        )
    (out / "conditions.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"regime: {trend.regime}")
    return 0


# ---------------------------------------------------------------------------
# edf-sim

def cmd_edf_sim(args) -> int:
    if args.config is None:
        raise ConfigError("edf-sim requires --config")
    data = _load_config(args.config)
    if args.seed is not None:
        data["master_seed"] = _validate_seed(args.seed)
    if args.workers is not None:
        data["workers"] = args.workers
    cfg = mc.config_from_dict(data)
    summary = mc.run_edf_experiment(cfg)
    out = _out_dir(args)
    mc.persist(summary, out / "edf_sim.json")
    if summary.max_abs_z is not None:
        print(f"max |z| over compare pairs: {summary.max_abs_z:.3f}")
    return 0


# ---------------------------------------------------------------------------
# limit-sim

def cmd_limit_sim(args) -> int:
    if args.config is None:
        raise ConfigError("limit-sim requires --config")
    data = _load_config(args.config)
    known = {"theta", "grid_size", "brownian_steps", "draws", "master_seed", "compare_points"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unexpected limit-sim config fields: {sorted(extra)}")
    if "theta" not in data:
        raise ConfigError("limit-sim config is missing 'theta'")
    theta = float(data["theta"])
    grid_size = int(data.get("grid_size", 513))
    steps = int(data.get("brownian_steps", 4096))
    draws = int(data.get("draws", 10000))
    if draws < 2:
        raise ConfigError("draws must be at least 2")
    seed = data.get("master_seed")
    if args.seed is not None:
        seed = args.seed
    if seed is None:
        raise ConfigError("limit-sim needs master_seed (config) or --seed")
    seed = _validate_seed(seed)
    compare_points = tuple(float(t) for t in data.get("compare_points", (0.25, 0.5, 0.75)))
    if any(not 0.0 < t < 1.0 for t in compare_points):
        raise ConfigError("compare_points must be interior points")

    try:
        cfg = LimitSimConfig(
            theta=theta, grid=ProcessGrid.default(grid_size), brownian_steps=steps
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc

    rng = RngStream(seed, 0).generator()
    paths = sample_limit_many(cfg, rng, draws)
    variance = paths.var(axis=0, ddof=1)
    idx = np.searchsorted(cfg.grid.points, np.array(compare_points))
    pairs = []
    for a in range(len(compare_points)):
        for b in range(a, len(compare_points)):
            t, s = cfg.grid.points[idx[a]], cfg.grid.points[idx[b]]
            emp = float(np.cov(paths[:, idx[a]], paths[:, idx[b]], ddof=1)[0, 1])
            pairs.append(
                {"t": float(t), "s": float(s), "cov": emp,
                 "kernel": limit_kernel(float(t), float(s), theta)}
            )

    resolved = {
        "schema": SCHEMA,
        "theta": theta,
        "grid_size": grid_size,
        "brownian_steps": steps,
        "draws": draws,
        "master_seed": seed,
        "compare_points": list(compare_points),
    }
    out = _out_dir(args)
    _write_json(
        out / "limit_sim.json",
        {
            "schema": SCHEMA,
            "config": resolved,
            "integral_weight_check": integral_weight_check(cfg),
            "grid": cfg.grid.points.tolist(),
            "variance": variance.tolist(),
            "pairs": pairs,
        },
    )
    return 0


# ---------------------------------------------------------------------------
# fdp-sim

def cmd_fdp_sim(args) -> int:
    if args.config is None:
        raise ConfigError("fdp-sim requires --config")
    data = _load_config(args.config)
    reps = data.pop("reps", None)
    seed = data.pop("master_seed", None)
    workers = data.pop("workers", 1)
    if args.seed is not None:
        seed = args.seed
    if args.workers is not None:
        workers = args.workers
    if reps is None:
        raise ConfigError("fdp-sim config is missing 'reps'")
    if seed is None:
        raise ConfigError("fdp-sim needs master_seed (config) or --seed")
    seed = _validate_seed(seed)
    if int(reps) != reps or reps < 1:
        raise ConfigError("reps must be a positive integer")
    cfg = fdr.two_group_config_from_dict(data)

    sample_out, approx = fdr.run_fdp_experiment(cfg, int(reps), seed, int(workers))
    ks = fdr.ks_distance(sample_out.fdp_values, approx)

    # workers cannot change the sampled values, so the echo omits it
    resolved = {"schema": SCHEMA, **cfg.as_dict(), "reps": int(reps),
                "master_seed": seed}
    out = _out_dir(args)
    _write_csv(
        out / "fdp_samples.csv",
        ["fdp"],
        ([v] for v in sample_out.fdp_values),
        resolved,
    )
    approx_payload = {"schema": SCHEMA, "config": resolved, **approx.as_dict()}
    if sample_out.gamma0 is not None:
        approx_payload["gamma0_realized"] = sample_out.gamma0
    _write_json(out / "fdp_approx.json", approx_payload)
    _write_json(
        out / "fdp_ks.json",
        {
            "schema": SCHEMA,
            "config": resolved,
            "ks_distance": ks,
            "mean_fdp": float(np.mean(sample_out.fdp_values)),
            "sd_fdp": float(np.std(sample_out.fdp_values, ddof=1)),
        },
    )
    print(f"mean FDP {np.mean(sample_out.fdp_values):.4f}, KS {ks:.4f}")
    return 0


# ---------------------------------------------------------------------------
# figure1 / figure2

def cmd_figure1(args) -> int:
    data = _load_config(args.config) if args.config is not None else {}
    known = {"m", "m_gamma_targets", "grid_size", "master_seed"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unexpected figure1 config fields: {sorted(extra)}")
    m = int(data.get("m", 10000))
    targets = tuple(float(v) for v in data.get("m_gamma_targets", (0.0, 2.0, 100.0, 1000.0)))
    grid_size = int(data.get("grid_size", 513))
    seed = data.get("master_seed", 0)
    if args.seed is not None:
        seed = args.seed
    seed = _validate_seed(seed)

    records = mc.figure1_data(m, targets, seed, grid_size)
    resolved = {
        "schema": SCHEMA,
        "m": m,
        "m_gamma_targets": list(targets),
        "grid_size": grid_size,
        "master_seed": seed,
    }
    out = _out_dir(args)
    files = []
    manifest_records = []
    for rec in records:
        name = f"figure1_mgamma_{rec.label}.csv"
        _write_csv(out / name, ["t", "path"], zip(rec.grid, rec.path), resolved)
        files.append(name)
        manifest_records.append(
            {"label": rec.label, "m_gamma_target": rec.m_gamma_target,
             "rho": rec.rho, "gamma_m": rec.gamma_m, "file": name}
        )
    _write_json(
        out / "figure1.json",
        {"schema": SCHEMA, "config": resolved, "records": manifest_records, "files": files},
    )
    return 0


def cmd_figure2(args) -> int:
    data = _load_config(args.config) if args.config is not None else {}
    known = {"m", "reps", "m_rho_targets", "master_seed", "workers"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unexpected figure2 config fields: {sorted(extra)}")
    m = int(data.get("m", 5000))
    reps = int(data.get("reps", 2000))
    targets = tuple(float(v) for v in data.get("m_rho_targets", (0.0, 10.0, 100.0, 1000.0)))
    seed = data.get("master_seed", 0)
    workers = data.get("workers", 1)
    if args.seed is not None:
        seed = args.seed
    if args.workers is not None:
        workers = args.workers
    seed = _validate_seed(seed)
    if reps < 2:
        raise ConfigError("reps must be at least 2")

    records = fdr.figure2_data(m, reps, targets, seed, int(workers))
    resolved = {
        "schema": SCHEMA,
        "m": m,
        "reps": reps,
        "m_rho_targets": list(targets),
        "master_seed": seed,
    }
    out = _out_dir(args)
    manifest_records = []
    for rec in records:
        label = f"{rec.m_rho_target:g}"
        csv_name = f"figure2_mrho_{label}_fdp.csv"
        approx_name = f"figure2_mrho_{label}_approx.json"
        _write_csv(out / csv_name, ["fdp"], ([v] for v in rec.fdp_values), resolved)
        _write_json(
            out / approx_name,
            {"schema": SCHEMA, "config": resolved, "m_rho_target": rec.m_rho_target,
             "rho": rec.rho, "gamma_m": rec.gamma_m, **rec.approx.as_dict()},
        )
        values = np.asarray(rec.fdp_values)
        manifest_records.append(
            {
                "m_rho_target": rec.m_rho_target,
                "rho": rec.rho,
                "gamma_m": rec.gamma_m,
                "mean_fdp": float(values.mean()),
                "sd_fdp": float(values.std(ddof=1)),
                "approx_mean": rec.approx.mean,
                "approx_sd": rec.approx.sd,
                "ks_distance": rec.ks,
                "samples_file": csv_name,
                "approx_file": approx_name,
            }
        )
    _write_json(
        out / "figure2.json",
        {"schema": SCHEMA, "config": resolved, "records": manifest_records},
    )
    return 0


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edfsim",
        description="Simulations for e.d.f. limit behaviour under correlated Gaussians.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "diagnose": (cmd_diagnose, "dependence diagnostics over an m-grid"),
        "edf-sim": (cmd_edf_sim, "Monte-Carlo e.d.f. covariance experiment"),
        "limit-sim": (cmd_limit_sim, "sample the limiting Gaussian process"),
        "fdp-sim": (cmd_fdp_sim, "replicate the BH false discovery proportion"),
        "figure1": (cmd_figure1, "rescaled e.d.f. path gallery CSVs"),
        "figure2": (cmd_figure2, "FDP histogram data with Gaussian overlays"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="JSON config file (schema v1)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--workers", type=int, default=None, help="worker thread cap")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EdfsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
