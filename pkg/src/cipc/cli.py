"""Command-line front end.

    cipc outage   --nt 5 --T 150 --R 0.3 --pmax-db 10 --q 5
    cipc optimize --nt 5 --T 150 --R 0.3 --pmax-db 10
    cipc sweep    --variable p_max_db --start 0 --stop 16 --points 17 --out sweep.csv
    cipc simulate --q-grid --trials 1000000 --seed 42
    cipc fig2 | fig3 | fig4 [--out-dir DIR]

Scenario flags may also come from a ``--config`` file of ``key=value`` lines
(keys: nt, T, R, pmax_db, pmax_linear, sigma2, q, tol, trials, seed); flags
given on the command line win. Preset and default sweep output goes to
``$CIPC_OUTPUT_DIR`` when set, else the working directory.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from cipc import model, montecarlo, optimize
from cipc.errors import DomainError, InfeasibleError, UnsupportedConfigError
from cipc.model import SystemConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_INFEASIBLE = 4
EXIT_IO = 5

OUTPUT_DIR_ENV = "CIPC_OUTPUT_DIR"
DEFAULT_SEED = 20190527
CSV_HEADER = ["x", "eps", "pt", "outage", "q_star", "outage_star"]
INFEASIBLE = "infeasible"

DEFAULTS = {"nt": 5, "T": 150, "R": 0.3, "pmax_db": 10.0, "sigma2": 1.0}
FIG2_GRID = [(3, 100), (3, 150), (4, 100), (4, 150)]
FIG_RATES = (0.1, 0.3, 0.5)


class UsageError(Exception):
    pass


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def fmt(value: float) -> str:
    return format(value, ".17g")


# -- config assembly ------------------------------------------------------------

_FILE_KEYS = {
    "nt": int,
    "T": int,
    "R": float,
    "pmax_db": float,
    "pmax_linear": float,
    "sigma2": float,
    "q": float,
    "tol": float,
    "trials": int,
    "seed": int,
}


def read_config_file(path: str) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in _FILE_KEYS:
                raise UsageError(f"{path}:{lineno}: expected one of {sorted(_FILE_KEYS)} as key=value")
            try:
                values[key] = _FILE_KEYS[key](value)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def resolve_settings(args) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        from_file = read_config_file(args.config)
        if "pmax_linear" in from_file:
            settings.pop("pmax_db")
        settings.update(from_file)
    for key in _FILE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            if key == "pmax_db":
                settings.pop("pmax_linear", None)
            elif key == "pmax_linear":
                settings.pop("pmax_db", None)
            settings[key] = value
    if "pmax_db" in settings and "pmax_linear" in settings:
        raise UsageError("config file sets both pmax_db and pmax_linear")
    return settings


def build_config(settings: dict) -> SystemConfig:
    p_max = settings["pmax_linear"] if "pmax_linear" in settings else db_to_linear(settings["pmax_db"])
    return SystemConfig(
        n_t=settings["nt"],
        blocklength=settings["T"],
        rate=settings["R"],
        p_max=p_max,
        noise_var=settings["sigma2"],
    )


def config_record(cfg: SystemConfig) -> dict:
    return dataclasses.asdict(cfg)


def output_dir(arg, create: bool = False) -> Path:
    path = Path(arg) if arg else Path(os.environ.get(OUTPUT_DIR_ENV, "."))
    if create:
        path.mkdir(parents=True, exist_ok=True)
    return path


# -- outage / optimize ------------------------------------------------------------

def outage_record(cfg: SystemConfig, q: float) -> dict:
    record = dataclasses.asdict(model.outage_probability(cfg, q))
    try:
        record["in_convex_interval"] = q in model.convex_interval(cfg)
    except UnsupportedConfigError:
        record["in_convex_interval"] = None
    return {"config": config_record(cfg), **record}


def optimization_record(cfg: SystemConfig, result: optimize.OptimizationResult) -> dict:
    return {"config": config_record(cfg), **dataclasses.asdict(result)}


def cmd_outage(args) -> int:
    settings = resolve_settings(args)
    if "q" not in settings:
        raise UsageError("outage needs --q")
    cfg = build_config(settings)
    print(json.dumps(outage_record(cfg, settings["q"])))
    return EXIT_OK


def cmd_optimize(args) -> int:
    settings = resolve_settings(args)
    cfg = build_config(settings)
    result = optimize.optimize_q(cfg, settings.get("tol", 1e-10))
    print(json.dumps(optimization_record(cfg, result)))
    return EXIT_OK


# -- sweeps ---------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    points: int
    scale: str
    base_cfg: SystemConfig

    def __post_init__(self):
        if self.variable not in ("q", "p_max_db", "rate"):
            raise UsageError(f"unknown sweep variable {self.variable!r}")
        if self.scale not in ("linear", "log"):
            raise UsageError(f"unknown sweep scale {self.scale!r}")
        if not self.start < self.stop:
            raise UsageError("sweep needs start < stop")
        if self.points < 2:
            raise UsageError("sweep needs at least 2 points")
        if self.scale == "log" and self.start <= 0:
            raise UsageError("log sweep needs start > 0")

    def grid(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


def sweep_row(spec: SweepSpec, x: float, tol: float = 1e-10) -> list[str]:
    cfg = spec.base_cfg
    if spec.variable == "q":
        b = model.outage_probability(cfg, x)
        return [fmt(x), fmt(b.eps), fmt(b.pt), fmt(b.outage), "", ""]
    if spec.variable == "p_max_db":
        cfg = cfg.replace(p_max=db_to_linear(x))
    else:
        cfg = cfg.replace(rate=x)
    try:
        result = optimize.optimize_q(cfg, tol)
    except InfeasibleError:
        return [fmt(x)] + [INFEASIBLE] * 5
    if result.interval is not None and not result.interval.nonempty:
        return [fmt(x)] + [INFEASIBLE] * 5
    b = model.outage_probability(cfg, result.q_star)
    return [fmt(x), fmt(b.eps), fmt(b.pt), fmt(b.outage), fmt(result.q_star), fmt(result.outage_star)]


def write_sweep(spec: SweepSpec, path: Path, grid=None) -> Path:
    grid = spec.grid() if grid is None else grid
    rows = [sweep_row(spec, float(x)) for x in grid]
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
    return path


def cmd_sweep(args) -> int:
    settings = resolve_settings(args)
    spec = SweepSpec(
        variable=args.variable,
        start=args.start,
        stop=args.stop,
        points=args.points,
        scale=args.scale,
        base_cfg=build_config(settings),
    )
    out = Path(args.out) if args.out else output_dir(None) / f"sweep_{spec.variable}.csv"
    print(write_sweep(spec, out))
    return EXIT_OK


def fig2_grid(cfg: SystemConfig, points: int) -> np.ndarray:
    """``points`` log-spaced receive powers on (q_rate, 1.2 p_max (N_t-1)]."""
    return np.geomspace(cfg.q_rate, 1.2 * cfg.knee, points + 1)[1:]


def fig2_configs(nt=None, T=None) -> list[SystemConfig]:
    combos = [(n, t) for n, t in FIG2_GRID if (nt is None or n == nt) and (T is None or t == T)]
    if not combos:
        combos = [(nt or 4, T or 150)]
    return [SystemConfig(n, t, 0.3, db_to_linear(10.0)) for n, t in combos]


def cmd_fig2(args) -> int:
    out_dir = output_dir(args.out_dir, create=True)
    for cfg in fig2_configs(args.nt, args.T):
        if cfg.n_t < 2:
            raise UsageError("fig2 needs --nt >= 2")
        grid = fig2_grid(cfg, args.points)
        spec = SweepSpec("q", float(grid[0]), float(grid[-1]), args.points, "log", cfg)
        print(write_sweep(spec, out_dir / f"fig2_nt{cfg.n_t}_T{cfg.blocklength}.csv", grid))
    return EXIT_OK


def _pmax_preset(args, n_t: int, blocklength: int, name: str) -> int:
    out_dir = output_dir(args.out_dir, create=True)
    for rate in FIG_RATES:
        base = SystemConfig(n_t, blocklength, rate, 1.0)
        spec = SweepSpec("p_max_db", 0.0, 16.0, args.points, "linear", base)
        print(write_sweep(spec, out_dir / f"{name}_R{rate}.csv"))
    return EXIT_OK


def cmd_fig3(args) -> int:
    return _pmax_preset(args, 5, 150, "fig3")


def cmd_fig4(args) -> int:
    return _pmax_preset(args, 4, 200, "fig4")


# -- simulate -------------------------------------------------------------------

def _delta(estimate: float, exact: float, std_err: float) -> float | None:
    if std_err == 0.0:
        return None
    return (estimate - exact) / std_err


def simulate_records(cfg: SystemConfig, qs, trials: int, seed: int, shards: int = 1) -> list[dict]:
    records = []
    for q in qs:
        q = float(q)
        est = montecarlo.estimate(montecarlo.McConfig(trials, seed, cfg, q), shards=shards)
        exact = model.outage_probability(cfg, q)
        records.append(
            {
                "q": q,
                **dataclasses.asdict(est),
                "pt_exact": exact.pt,
                "outage_exact": exact.outage,
                "pt_delta": _delta(est.p_transmit_hat, exact.pt, est.std_err_pt),
                "outage_delta": _delta(est.outage_hat, exact.outage, est.std_err_outage),
            }
        )
    return records


def cmd_simulate(args) -> int:
    settings = resolve_settings(args)
    cfg = build_config(settings)
    if args.q_grid:
        qs = montecarlo.validation_grid(cfg)
    elif "q" in settings:
        qs = [settings["q"]]
    else:
        raise UsageError("simulate needs --q or --q-grid")
    trials = settings.get("trials", 100_000)
    seed = settings.get("seed", DEFAULT_SEED)
    records = simulate_records(cfg, qs, trials, seed, args.shards)
    if any(r["pt_delta"] is None or r["outage_delta"] is None for r in records):
        print("warning: zero standard error in some cells; delta not defined there", file=sys.stderr)
    if args.json:
        print(json.dumps({"config": config_record(cfg), "records": records}))
        return EXIT_OK
    print(f"# seed={seed} trials={trials} n_t={cfg.n_t} T={cfg.blocklength} R={cfg.rate} p_max={cfg.p_max}")
    cols = ["q", "p_transmit_hat", "pt_exact", "pt_delta", "outage_hat", "outage_exact", "outage_delta"]
    print("  ".join(f"{c:>14}" for c in cols))
    for r in records:
        cells = ["n/a" if r[c] is None else f"{r[c]:.6g}" for c in cols]
        print("  ".join(f"{c:>14}" for c in cells))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def _add_config_flags(p):
    p.add_argument("--config", help="key=value scenario file; flags override it")
    p.add_argument("--nt", type=int, help="transmit antennas (default 5)")
    p.add_argument("--T", type=int, help="blocklength in channel uses (default 150)")
    p.add_argument("--R", type=float, help="rate in bits per channel use (default 0.3)")
    power = p.add_mutually_exclusive_group()
    power.add_argument("--pmax-db", dest="pmax_db", type=float, help="peak power in dB (default 10)")
    power.add_argument("--pmax-linear", dest="pmax_linear", type=float, help="peak power, linear")
    p.add_argument("--sigma2", type=float, help="noise variance (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cipc", description="Truncated CIPC outage analysis for one-way URLLC.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("outage", help="outage breakdown at one receive power")
    _add_config_flags(p)
    p.add_argument("--q", type=float)
    p.set_defaults(func=cmd_outage)

    p = sub.add_parser("optimize", help="optimal receive power")
    _add_config_flags(p)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="CSV sweep over q, p_max_db or rate")
    _add_config_flags(p)
    p.add_argument("--variable", choices=["q", "p_max_db", "rate"], required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--scale", choices=["linear", "log"], default="linear")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo check against the closed form")
    _add_config_flags(p)
    p.add_argument("--q", type=float)
    p.add_argument("--q-grid", action="store_true", help="use the 20-point validation grid")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fig2", help="outage versus q, R=0.3, p_max=10 dB")
    p.add_argument("--nt", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_fig2)

    for name, func, text in (
        ("fig3", cmd_fig3, "minimum outage versus p_max, N_t=5, T=150"),
        ("fig4", cmd_fig4, "optimal q versus p_max, N_t=4, T=200"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--points", type=int, default=33)
        p.add_argument("--out-dir")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cipc: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"cipc: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DomainError, UnsupportedConfigError) as exc:
        print(f"cipc: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"cipc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
