"""``ptw`` command line: reproducible experiments with CSV/JSON outputs.

Resolution order for every setting: built-in defaults, then ``--preset``,
then ``--config`` (JSON), then explicit flags.  The seed additionally honours
``PTW_SEED``, which overrides defaults, presets and the config file but not
an explicit ``--seed``.

Every command writes ``run.json`` (resolved config, seed, threads, version,
git describe, timestamp) next to its data files.  Data files depend only on
the config and seed, never on ``--threads``.

Exit codes: 0 success, 1 acceptance failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .model import Drift, FullState, ModelParams, SpeedProfile

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
DEFAULT_SEED = 20240101

PRESETS = {
    "simulate": {
        "figure1": {"alpha": 1.0, "speed": {"kind": "rational_decay", "a": 1.0, "b": 2.0},
                    "T": 10.0, "dt": 1e-3, "save_dt": 0.1, "scheme": "exact"},
    },
    "ensemble": {
        "figure2": {"alpha": 1.0, "init": {"kind": "equilibrium"}, "T": 40.0, "dt": 0.01,
                    "save_dt": 1.0, "paths": 100_000},
    },
}

DEFAULTS = {
    "simulate": {"speed": {"kind": "unit"}, "T": 10.0, "dt": 1e-3, "save_dt": 0.1, "scheme": "exact",
                 "theta0": 0.0, "kappa0": 0.0},
    "diffusion": {"method": "closed-form", "rel_tol": 1e-12, "paths": 100_000, "lag_dt": 0.05,
                  "max_lag": 20.0},
    "poisson": {"f": "cos-theta", "grid": "128x257", "kcut": None, "theta_scheme": "upwind2"},
    "ensemble": {"init": {"kind": "equilibrium"}, "T": 40.0, "dt": 0.01, "save_dt": 1.0, "paths": 10_000,
                 "scheme": "exact"},
    "tests": {"only": None},
}

POISSON_F = {
    "cos-theta": lambda th, k: np.cos(th),
    "minus-kappa": lambda th, k: -k,
    "kappa2": lambda th, k: k**2,
    "sin-theta": lambda th, k: np.sin(th),
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with settings for this command")
    common.add_argument("--seed", type=int, help="64-bit master seed (PTW_SEED overrides config)")
    common.add_argument("--threads", type=int, help="worker threads (outputs do not depend on it)")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--preset", help="named parameter set")
    common.add_argument("--alpha", type=float, help="curvature noise amplitude")

    p = _Parser(prog="ptw", description="Persistent turning walker experiments")
    p.add_argument("--version", action="version", version=f"ptw {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", parents=[common], help="single trajectory to CSV")
    s.add_argument("--T", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--save-dt", dest="save_dt", type=float, help="time between saved frames")
    s.add_argument("--scheme", choices=["exact", "euler"])
    s.add_argument("--speed", choices=["unit", "rational_decay"])
    s.add_argument("--speed-a", dest="speed_a", type=float)
    s.add_argument("--speed-b", dest="speed_b", type=float)
    s.add_argument("--theta0", type=float)
    s.add_argument("--kappa0", type=float)

    d = sub.add_parser("diffusion", parents=[common], help="diffusion constant D(alpha)")
    d.add_argument("--method", choices=["quadrature", "closed-form", "green-kubo"])
    d.add_argument("--rel-tol", dest="rel_tol", type=float)
    d.add_argument("--paths", type=int, help="green-kubo: number of stationary paths")
    d.add_argument("--lag-dt", dest="lag_dt", type=float)
    d.add_argument("--max-lag", dest="max_lag", type=float)

    q = sub.add_parser("poisson", parents=[common], help="grid solve of L g = f")
    q.add_argument("--f", choices=sorted(POISSON_F))
    q.add_argument("--grid", help="n_theta x n_kappa, e.g. 128x257")
    q.add_argument("--kcut", type=float, help="kappa cut K (default 6 alpha)")
    q.add_argument("--theta-scheme", dest="theta_scheme", choices=["upwind1", "upwind2"])

    e = sub.add_parser("ensemble", parents=[common], help="ensemble statistics to CSV")
    e.add_argument("--paths", type=int)
    e.add_argument("--T", type=float)
    e.add_argument("--dt", type=float)
    e.add_argument("--save-dt", dest="save_dt", type=float)
    e.add_argument("--init", choices=["equilibrium", "dirac", "box"])
    e.add_argument("--theta0", type=float)
    e.add_argument("--kappa0", type=float)

    t = sub.add_parser("tests", parents=[common], help="run the acceptance suite")
    t.add_argument("--only", help="comma-separated criterion numbers")
    return p


_NON_CONFIG = {"command", "config", "seed", "threads", "out", "preset", "speed", "speed_a", "speed_b", "init"}


def resolve(args) -> dict:
    cmd = args.command
    cfg = json.loads(json.dumps(DEFAULTS[cmd]))
    if args.preset:
        try:
            cfg.update(PRESETS[cmd][args.preset])
        except KeyError:
            raise ConfigError(f"unknown preset {args.preset!r} for {cmd}") from None
    file_cfg = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg.update({k: v for k, v in file_cfg.items() if k not in ("seed", "threads")})
    for k, v in vars(args).items():
        if v is not None and k not in _NON_CONFIG:
            cfg[k] = v
    if cmd == "simulate" and (args.speed or args.speed_a is not None or args.speed_b is not None):
        sp = dict(cfg.get("speed") or {})
        if args.speed:
            sp = {"kind": args.speed}
        if args.speed_a is not None:
            sp["a"] = args.speed_a
        if args.speed_b is not None:
            sp["b"] = args.speed_b
        cfg["speed"] = sp
    if cmd == "ensemble" and (args.init or args.theta0 is not None or args.kappa0 is not None):
        init = dict(cfg.get("init") or {})
        if args.init:
            init = {"kind": args.init}
        for k in ("theta0", "kappa0"):
            if getattr(args, k) is not None:
                init[k] = getattr(args, k)
                init.setdefault("kind", "dirac")
        cfg["init"] = init
        cfg.pop("theta0", None)
        cfg.pop("kappa0", None)

    seed = file_cfg.get("seed", DEFAULT_SEED)
    if os.environ.get("PTW_SEED"):
        try:
            seed = int(os.environ["PTW_SEED"], 0)
        except ValueError:
            raise ConfigError(f"PTW_SEED must be an integer, got {os.environ['PTW_SEED']!r}") from None
    if args.seed is not None:
        seed = args.seed
    if not 0 <= int(seed) < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    cfg["seed"] = int(seed)
    threads = args.threads if args.threads is not None else file_cfg.get("threads", 1)
    if int(threads) < 1:
        raise ConfigError("--threads must be >= 1")
    cfg["threads"] = int(threads)
    if cmd != "tests" and cfg.get("alpha") is None:
        raise ConfigError("alpha is required (pass --alpha, a --preset, or a config file)")
    return cfg


def _params(cfg) -> ModelParams:
    try:
        speed = SpeedProfile.from_dict(cfg["speed"]) if "speed" in cfg else SpeedProfile.unit()
        drift = Drift.from_dict(cfg["drift"]) if "drift" in cfg else Drift.ou()
        return ModelParams(float(cfg["alpha"]), speed, drift)
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def write_run_json(out: Path, cmd: str, cfg: dict, outputs: list[str], extra: dict | None = None) -> None:
    meta = {
        "command": cmd,
        "config": cfg,
        "seed": cfg["seed"],
        "threads": cfg["threads"],
        "version": __version__,
        "git_describe": git_describe(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "outputs": outputs,
    }
    if extra:
        meta.update(extra)
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_simulate(cfg, out: Path) -> int:
    from .simulator import simulate_path

    params = _params(cfg)
    T, dt, save_dt = float(cfg["T"]), float(cfg["dt"]), float(cfg["save_dt"])
    stride = int(round(save_dt / dt))
    if stride < 1 or abs(stride * dt - save_dt) > 1e-9 * save_dt:
        raise ConfigError("save_dt must be a positive multiple of dt")
    init = FullState.at_origin(float(cfg.get("theta0", 0.0)), float(cfg.get("kappa0", 0.0)))
    try:
        traj = simulate_path(params, cfg["scheme"], T, dt, init, cfg["seed"], stride=stride)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    traj.to_csv(out / "trajectory.csv")
    cfg["model"] = params.to_dict()
    write_run_json(out, "simulate", cfg, ["trajectory.csv"])
    print(f"wrote {len(traj)} frames to {out / 'trajectory.csv'}")
    return EXIT_OK


def cmd_diffusion(cfg, out: Path) -> int:
    from . import diffusion as dc

    alpha = float(cfg["alpha"])
    method = cfg["method"]
    try:
        if method == "quadrature":
            r = dc.compute_D_quadrature(alpha, float(cfg["rel_tol"]))
            res = {"D": r.value, "error_bound": r.abs_error_bound}
        elif method == "closed-form":
            D = dc.compute_D_closed_form(alpha)
            res = {"D": D, "error_bound": 1e-12 * D}
        elif method == "green-kubo":
            from .mcstats import autocorrelation_mc

            n_lags = int(round(float(cfg["max_lag"]) / float(cfg["lag_dt"])))
            s, C, se = autocorrelation_mc(alpha, float(cfg["lag_dt"]), n_lags, int(cfg["paths"]), cfg["seed"],
                                          workers=cfg["threads"])
            r = dc.green_kubo(s, C, se)
            res = {"D": r.value, "error_bound": r.error, "cutoff": r.cutoff}
        else:
            raise ConfigError(f"unknown method {method!r}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = {"alpha": alpha, "method": method, **res}
    (out / "diffusion.json").write_text(_dump(report))
    write_run_json(out, "diffusion", cfg, ["diffusion.json"])
    sys.stdout.write(_dump(report))
    return EXIT_OK


def cmd_poisson(cfg, out: Path) -> int:
    from .poisson import Grid, solve_poisson

    alpha = float(cfg["alpha"])
    kcut = float(cfg["kcut"]) if cfg.get("kcut") is not None else 6.0 * alpha
    cfg["kcut"] = kcut
    if cfg["f"] not in POISSON_F:
        raise ConfigError(f"unknown f {cfg['f']!r}; choose from {sorted(POISSON_F)}")
    try:
        grid = Grid.parse(cfg["grid"], kcut)
        sol = solve_poisson(POISSON_F[cfg["f"]], grid, alpha, theta_scheme=cfg["theta_scheme"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sol.to_csv(out / "g.csv")
    summary = {"f": cfg["f"], **sol.summary()}
    (out / "poisson.json").write_text(_dump(summary))
    write_run_json(out, "poisson", cfg, ["g.csv", "poisson.json"])
    sys.stdout.write(_dump(summary))
    return EXIT_OK


def cmd_ensemble(cfg, out: Path) -> int:
    from .mcstats import InitSpec, cross_covariance_xy, run_ensemble

    params = _params(cfg)
    try:
        init = InitSpec.from_dict(cfg["init"])
        ens = run_ensemble(params, int(cfg["paths"]), float(cfg["T"]), float(cfg["dt"]), init, cfg["seed"],
                           save_dt=float(cfg["save_dt"]), workers=cfg["threads"], scheme=cfg.get("scheme", "exact"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    summ = ens.summary()
    summ.to_csv(out / "ensemble.csv")
    try:
        rich, rich_se = ens.richardson()
    except ValueError:  # T/2 is not a save time
        rich = rich_se = None
    cc = cross_covariance_xy(summ)
    meta = {
        "n_paths": ens.n_paths,
        "T": ens.T,
        "var1_over_t_final": float(summ["var1_over_t"][-1]),
        "se1_final": float(summ["se1"][-1]),
        "richardson": rich,
        "richardson_se": rich_se,
        "cross_cov_max_z": cc.max_z,
        "cross_cov_flagged_times": summ.times[cc.flagged].tolist(),
        "config": {k: v for k, v in cfg.items() if k != "threads"},
        "model": params.to_dict(),
        "git_describe": git_describe(),
    }
    (out / "ensemble.json").write_text(_dump(meta))
    cfg["model"] = params.to_dict()
    write_run_json(out, "ensemble", cfg, ["ensemble.csv", "ensemble.json"])
    print(f"wrote {summ.times.size} rows to {out / 'ensemble.csv'}; "
          f"Var(x1)/t at T={ens.T:g}: {meta['var1_over_t_final']:.5f} +- {meta['se1_final']:.5f}")
    return EXIT_OK


def cmd_tests(cfg, out: Path) -> int:
    from .acceptance import run_all

    only = None
    if cfg.get("only"):
        try:
            only = [int(v) for v in str(cfg["only"]).split(",")]
        except ValueError:
            raise ConfigError("--only takes comma-separated integers") from None
    results = run_all(only=only, seed=cfg["seed"], workers=cfg["threads"])
    report = {"passed": all(r.passed for r in results), "criteria": [r.to_dict() for r in results]}
    for r in results:
        print(r.line(), file=sys.stderr)
    (out / "acceptance.json").write_text(_dump(report))
    write_run_json(out, "tests", cfg, ["acceptance.json"])
    sys.stdout.write(_dump(report))
    return EXIT_OK if report["passed"] else EXIT_FAIL


COMMANDS = {
    "simulate": cmd_simulate,
    "diffusion": cmd_diffusion,
    "poisson": cmd_poisson,
    "ensemble": cmd_ensemble,
    "tests": cmd_tests,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve(args)
        out = Path(args.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        if "alpha is required" in str(exc):
            parser.print_usage(sys.stderr)
        print(f"ptw: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
