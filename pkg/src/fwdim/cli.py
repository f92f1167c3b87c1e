"""
Command-line entry point: ``fwdim {oracle,approx,compare,diagnose,mva}``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from fwdim import io
from fwdim.approx import METHODS, ApproxResult, approximate_im
from fwdim.config import RunConfig, load_config
from fwdim.errors import NumericalError, ValidationError
from fwdim.io import write_json
from fwdim.mva import mva_deterministic
from fwdim.neural_net import FittedMlp
from fwdim.oracle import brute_force_im
from fwdim.portfolio import value_netting_set
from fwdim.regression import NormalScaler, moment_diagnostics
from fwdim.sde import PathCube, simulate_paths

log = logging.getLogger("fwdim")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

ORACLE_SURFACE = "oracle_surface.csv"
ORACLE_PROFILE = "oracle_profile.csv"
SUMMARY_SCHEMA = "fwdim.compare_summary/1"


def approx_profile_name(method: str) -> str:
    return f"approx_{method}_profile.csv"


def _scaler_dict(cfg: RunConfig) -> dict:
    kind = "normal" if isinstance(cfg.scaler, NormalScaler) else "student_t"
    return {"type": kind, **asdict(cfg.scaler), "factor": cfg.scaler.factor()}


def _outer(cfg: RunConfig, n_paths: int) -> tuple[PathCube, np.ndarray]:
    cube = simulate_paths(cfg.model, cfg.grid, n_paths, cfg.seed, threads=cfg.threads)
    return cube, value_netting_set(cfg.netting_set, cube, cfg.model, cfg.mva.r)


def run_oracle(cfg: RunConfig) -> list[Path]:
    log.info("oracle: %d outer x %d inner paths", cfg.n_outer, cfg.n_inner)
    surface = brute_force_im(
        cfg.model,
        cfg.netting_set,
        cfg.grid,
        cfg.n_outer,
        cfg.n_inner,
        cfg.quantile,
        cfg.seed,
        rate=cfg.mva.r,
        threads=cfg.threads,
    )
    out = cfg.output
    io.write_surface(out / ORACLE_SURFACE, surface)
    io.write_surface_profile(out / ORACLE_PROFILE, surface)
    return [out / ORACLE_SURFACE, out / ORACLE_PROFILE]


def _settings(cfg: RunConfig, method: str):
    return {"poly": cfg.poly, "kernel": cfg.kernel, "nn": cfg.nn}[method]


def run_approx(cfg: RunConfig, method: str) -> list[Path]:
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
    n_paths = cfg.paths_for(method)
    log.info("approx[%s]: %d outer paths", method, n_paths)
    cube, values = _outer(cfg, n_paths)
    regressor = cube.values[:, 0::2, 0] if cfg.regressor == "state" else None
    result: ApproxResult = approximate_im(
        method, values, cfg.grid, cfg.scaler, _settings(cfg, method), regressor, cfg.threads
    )
    out = cfg.output
    written = [out / approx_profile_name(method), out / f"approx_{method}_fit.json"]
    io.write_surface_profile(written[0], result.surface)
    steps = [
        {"t_index": k, "time": float(t), **s.artifact}
        for k, (t, s) in enumerate(zip(cfg.grid.obs_times, result.steps))
    ]
    write_json(
        written[1],
        {
            "method": method,
            "n_paths": n_paths,
            "regressor": cfg.regressor,
            "scaler": _scaler_dict(cfg),
            "steps": steps,
        },
    )
    if method == "nn":
        for k, s in enumerate(result.steps):
            if not isinstance(s.model, FittedMlp):
                continue
            params_path = out / f"approx_nn_params_k{k}.json"
            params_path.write_text(s.model.to_json() + "\n", encoding="utf-8")
            log_path = out / f"approx_nn_log_k{k}.csv"
            io.write_csv(log_path, "training_log", enumerate(s.model.history, start=1))
            written += [params_path, log_path]
    return written


def relative_errors(oracle: np.ndarray, approx: np.ndarray) -> np.ndarray:
    """``|approx - oracle| / oracle``; 0 where both vanish, inf where only the oracle does."""
    diff = np.abs(approx - oracle)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(
            oracle > 0, diff / np.where(oracle > 0, oracle, 1.0), np.where(diff == 0, 0.0, np.inf)
        )
    return rel


def run_compare(cfg: RunConfig) -> list[Path]:
    written = run_oracle(cfg)
    for method in cfg.methods:
        written += run_approx(cfg, method)
    out = cfg.output
    oracle = io.read_profile(out / ORACLE_PROFILE)
    summary = {
        "schema": SUMMARY_SCHEMA,
        "quantile": cfg.quantile,
        "oracle": {"n_outer": cfg.n_outer, "n_inner": cfg.n_inner, "file": ORACLE_PROFILE},
        "methods": {},
    }
    for method in cfg.methods:
        approx = io.read_profile(out / approx_profile_name(method))
        if not np.array_equal(approx["time"], oracle["time"]):
            raise ValidationError(f"{method}: profile times differ from the oracle's")
        o, a = oracle["im_mean"], approx["im_mean"]
        rel = relative_errors(o, a)
        path = out / f"compare_{method}.csv"
        io.write_csv(path, "comparison", zip(oracle["time"], o, a, rel))
        written.append(path)
        summary["methods"][method] = {
            "file": path.name,
            "n_paths": cfg.paths_for(method),
            "rmse": float(np.sqrt(np.mean((a - o) ** 2))),
            "max_rel_err": float(rel.max()),
        }
    write_json(out / "compare_summary.json", summary)
    written.append(out / "compare_summary.json")
    return written


def run_diagnose(cfg: RunConfig) -> list[Path]:
    cube, values = _outer(cfg, cfg.n_paths)
    reports = []
    for k, t in enumerate(cfg.grid.obs_times):
        rep = moment_diagnostics(values[:, 2 * k], cfg.n_boot, cfg.seed, cfg.cv_threshold)
        reports.append({"t_index": k, "time": float(t), **rep.to_dict()})
    path = cfg.output / "diagnostics.json"
    write_json(
        path,
        {
            "schema": "fwdim.diagnostics/1",
            "n_paths": cfg.n_paths,
            "overall": "flag" if any(r["verdict"] == "flag" for r in reports) else "pass",
            "reports": reports,
        },
    )
    return [path]


def run_mva(cfg: RunConfig, profile_path: Path) -> list[Path]:
    prof = io.read_profile(profile_path)
    if prof["time"].shape != cfg.grid.obs_times.shape or not np.allclose(
        prof["time"], cfg.grid.obs_times, rtol=0, atol=1e-12
    ):
        raise ValidationError("profile times do not match the configured grid")
    value = mva_deterministic(prof["im_mean"], cfg.grid, cfg.mva)
    path = cfg.output / "mva_report.json"
    write_json(
        path,
        {
            "schema": "fwdim.mva/1",
            "profile": Path(profile_path).name,
            "inputs": asdict(cfg.mva),
            "carry_spread": cfg.mva.carry_spread,
            "decay_rate": cfg.mva.decay_rate,
            "mva": value,
        },
    )
    return [path]


def _guard(fn, *args) -> int:
    try:
        for p in fn(*args):
            log.info("wrote %s", p)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, threads=args.threads, output=args.out)


def _command(args) -> int:
    def go():
        cfg = _load(args)
        if args.command == "oracle":
            return run_oracle(cfg)
        if args.command == "approx":
            return run_approx(cfg, args.method)
        if args.command == "compare":
            return run_compare(cfg)
        if args.command == "diagnose":
            return run_diagnose(cfg)
        return run_mva(cfg, Path(args.profile))

    return _guard(go)


def cmd_oracle(config_path, **overrides) -> int:
    return _command(_namespace("oracle", config_path, **overrides))


def cmd_approx(config_path, method: str, **overrides) -> int:
    return _command(_namespace("approx", config_path, method=method, **overrides))


def cmd_compare(config_path, **overrides) -> int:
    return _command(_namespace("compare", config_path, **overrides))


def cmd_diagnose(config_path, **overrides) -> int:
    return _command(_namespace("diagnose", config_path, **overrides))


def cmd_mva(config_path, profile, **overrides) -> int:
    return _command(_namespace("mva", config_path, profile=profile, **overrides))


def _namespace(command, config, seed=None, threads=None, out=None, **extra):
    return argparse.Namespace(
        command=command, config=config, seed=seed, threads=threads, out=out, **extra
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fwdim", description=__doc__.strip().splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        p.add_argument("--out", default=None, help="output directory")

    common(sub.add_parser("oracle", help="nested Monte Carlo IM surface and profile"))
    p = sub.add_parser("approx", help="regression IM profile")
    common(p)
    p.add_argument("--method", choices=METHODS, required=True)
    common(sub.add_parser("compare", help="oracle vs configured approximators"))
    common(sub.add_parser("diagnose", help="moment diagnostics of V(t) per time step"))
    p = sub.add_parser("mva", help="MVA from an IM profile CSV")
    common(p)
    p.add_argument("profile", help="profile CSV (time, im_mean, im_stderr)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return _command(args)


if __name__ == "__main__":
    sys.exit(main())
