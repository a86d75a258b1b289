"""``herald-sim`` command line: single runs and parameter sweeps.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 truncation failure. Output floats are written with 17 significant digits
and '\\n' line endings so identical inputs give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import RunConfig, expand_sweep, load_config
from .cooling import cooling_recurrence
from .errors import ConfigError, HeraldSimError, TruncationError, TruncationWarning
from .fock import build_thermal
from .herald import TrajectoryRecord, run_ensemble, run_protocol
from .pfunction import FilterParams, evolve_p, p_trajectory, params_from_schedule, pgrid_rows
from .phys import coupling_from_gradient, gamma_from_q, nbar_from_temperature
from .pulses import lambda_eff

log = logging.getLogger("heraldsim")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TRUNCATION = 0, 2, 3, 4
ROUND_COLUMNS = ("round", "p_success", "occupancy", "var_x", "var_p", "eta")


@dataclass(frozen=True)
class Row:
    round: int
    p_success: float
    occupancy: float
    var_x: float
    var_p: float
    eta: float


def _fmt(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _check_finite(rows: Sequence[Row]) -> None:
    for r in rows:
        if not all(math.isfinite(v) for v in (r.p_success, r.occupancy, r.var_x, r.var_p)):
            raise FloatingPointError(f"non-finite observable in round {r.round}")


def _rows_from_record(rec: TrajectoryRecord) -> list[Row]:
    return [Row(r.round, r.p_success, r.occupancy, r.var_x, r.var_p, r.eta) for r in rec.rounds]


def _fock(cfg: RunConfig, threads: int | None):
    spec = cfg.oscillator.build()
    schedule = cfg.schedule.build(spec.omega)
    spin = cfg.spin.build()
    fresh = build_thermal(spec, strict=cfg.strict_truncation)
    if cfg.mode == "conditioned":
        rec = run_protocol(spec, schedule, spin, "conditioned", initial=fresh)
        return _rows_from_record(rec), {"event_rate": rec.event_rate}, None
    recs = run_ensemble(spec, schedule, spin, cfg.n_trajectories, cfg.seed, threads=threads)
    cols = ("occupancy", "var_x", "var_p", "p_success")
    means = {c: np.mean([r.column(c) for r in recs], axis=0) for c in cols}
    eta = recs[0].column("eta")
    rows = [
        Row(k + 1, means["p_success"][k], means["occupancy"][k], means["var_x"][k], means["var_p"][k], eta[k])
        for k in range(schedule.rounds_M)
    ]
    all_success = sum(all(r.outcome == "success" for r in rec.rounds) for rec in recs)
    extra = {
        "event_rate": float(np.mean([rec.event_rate for rec in recs])),
        "all_success_fraction": all_success / len(recs),
        "n_trajectories": len(recs),
    }
    return rows, extra, recs


def _pfunction(cfg: RunConfig):
    spec = cfg.oscillator.build()
    schedule = cfg.schedule.build(spec.omega)
    spin = cfg.spin.build()
    per_round = params_from_schedule(schedule, spec, spin)
    kernel = cfg.pgrid.kernel
    params = per_round
    if kernel == "filter":
        if len({(p.lam, p.block_time) for p in per_round}) != 1:
            raise ConfigError("pgrid.kernel 'filter' needs a fixed pulse count")
        p = per_round[0]
        params = FilterParams(p.lam, p.epsilon, p.block_time, len(per_round), p.eta)
    grid_cfg = cfg.pgrid.build()
    hist = p_trajectory(spec.n_thermal, params, grid_cfg, kernel)
    rows = [
        Row(h.round, h.p_success, h.observables.occupancy, h.observables.var_x, h.observables.var_p,
            spin.contrast(per_round[h.round - 1].block_time))
        for h in hist
    ]
    grid = evolve_p(spec.n_thermal, params, grid_cfg, kernel)
    return rows, {"event_rate": float(np.prod([r.p_success for r in rows])), "c_m": grid.c_m}, grid


def _cooling_model(cfg: RunConfig):
    spec = cfg.oscillator.build()
    schedule = cfg.schedule.build(spec.omega)
    spin = cfg.spin.build()
    m = schedule.rounds_M
    lams = [lambda_eff(schedule.g, schedule.pulses_for_round(k), spec.omega) for k in range(1, m + 1)]
    state = cooling_recurrence(spec.n_thermal, lams, m, schedule.g, spec.omega)
    f = spin.readout_fidelity
    rows = []
    for k in range(1, m + 1):
        n_prev, n = state.n[k - 1], state.n[k]
        eta = spin.contrast(schedule.block_time(spec.omega, k))
        # success probability of a resonant kick on a thermal state
        p = 0.5 * (1.0 + eta * math.exp(-2.0 * lams[k - 1] ** 2 * (2.0 * n_prev + 1.0)))
        p = f * p + (1.0 - f) * (1.0 - p)
        rows.append(Row(k, p, n, n + 0.5, n + 0.5, eta))
    return rows, {"event_rate": float(np.prod([r.p_success for r in rows])), "cooling_rates": state.rates.tolist()}


def _write_rounds(path: Path, rows: Sequence[Row]) -> None:
    write_csv(path, ROUND_COLUMNS, ([getattr(r, c) for c in ROUND_COLUMNS] for r in rows))


def _rel(a: float, b: float) -> float:
    return (a - b) / b if b != 0 else math.nan


def _lab_summary(cfg: RunConfig) -> dict | None:
    if cfg.lab is None:
        return None
    return {
        "g_hz": coupling_from_gradient(cfg.lab).hz,
        "g_rad_per_s": coupling_from_gradient(cfg.lab).rad_per_s,
        "n_thermal": nbar_from_temperature(cfg.lab),
        "gamma_rad_per_s": gamma_from_q(cfg.lab),
    }


def execute(cfg: RunConfig, out_dir: Path, threads: int | None = None) -> dict:
    """Run one configuration and write its result files into ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {"engine": cfg.engine, "mode": cfg.mode, "seed": cfg.seed, "config": cfg.raw}
    if cfg.engine in ("fock", "both"):
        rows, extra, recs = _fock(cfg, threads)
        _check_finite(rows)
        _write_rounds(out_dir / "rounds.csv", rows)
        if recs is not None:
            write_csv(
                out_dir / "trajectories.csv",
                ("trajectory", "round", "outcome", "restarted", "p_success", "occupancy", "var_x", "var_p", "eta"),
                (
                    (i, r.round, r.outcome, r.restarted, r.p_success, r.occupancy, r.var_x, r.var_p, r.eta)
                    for i, rec in enumerate(recs)
                    for r in rec.rounds
                ),
            )
        summary.update(extra)
        main_rows = rows
    if cfg.engine in ("pfunction", "both"):
        p_rows, p_extra, grid = _pfunction(cfg)
        _check_finite(p_rows)
        name = "rounds.csv" if cfg.engine == "pfunction" else "rounds_pfunction.csv"
        _write_rounds(out_dir / name, p_rows)
        write_csv(out_dir / "pgrid.csv", ("re_alpha", "im_alpha", "p_value"), pgrid_rows(grid))
        if cfg.engine == "pfunction":
            summary.update(p_extra)
            main_rows = p_rows
        else:
            summary["pfunction"] = {"event_rate": p_extra["event_rate"], "final": asdict(p_rows[-1])}
            write_csv(
                out_dir / "compare.csv",
                ("round", "rel_p_success", "rel_occupancy", "rel_var_x", "rel_var_p"),
                (
                    (f.round, _rel(p.p_success, f.p_success), _rel(p.occupancy, f.occupancy),
                     _rel(p.var_x, f.var_x), _rel(p.var_p, f.var_p))
                    for f, p in zip(main_rows, p_rows)
                ),
            )
    if cfg.engine == "cooling_model":
        main_rows, extra = _cooling_model(cfg)
        _check_finite(main_rows)
        _write_rounds(out_dir / "rounds.csv", main_rows)
        summary.update(extra)
    summary["final"] = asdict(main_rows[-1])
    summary["per_round"] = [asdict(r) for r in main_rows]
    if cfg.event_rate_reference is not None:
        # reported for comparison only; it depends on the unstated initial occupancy
        summary["event_rate_diagnostic"] = {
            "reference": cfg.event_rate_reference,
            "ratio": summary["event_rate"] / cfg.event_rate_reference,
        }
    lab = _lab_summary(cfg)
    if lab is not None:
        summary["lab"] = lab
    with open(out_dir / "summary.json", "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(summary, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return summary


def _sweep(cfg: RunConfig, out_dir: Path, threads: int | None) -> list[dict]:
    points = expand_sweep(cfg)
    width = max(3, len(str(len(points) - 1)))

    def one(item):
        i, (point, child) = item
        return point, execute(child, out_dir / f"point_{i:0{width}d}", threads)

    workers = max(1, min(threads or os.cpu_count() or 1, len(points)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, enumerate(points)))
    paths = [ax.path for ax in cfg.sweep]
    write_csv(
        out_dir / "sweep.csv",
        ("point", *paths, "final_occupancy", "final_var_x", "final_var_p", "event_rate"),
        (
            (i, *(point[p] for p in paths), s["final"]["occupancy"], s["final"]["var_x"], s["final"]["var_p"], s["event_rate"])
            for i, (point, s) in enumerate(results)
        ),
    )
    return [s for _, s in results]


def _threads_from_env() -> int | None:
    cap = os.environ.get("HERALD_SIM_THREADS")
    if not cap:
        return None
    try:
        value = int(cap)
    except ValueError as exc:
        raise ConfigError(f"HERALD_SIM_THREADS must be a positive integer, got {cap!r}") from exc
    if value < 1:
        raise ConfigError(f"HERALD_SIM_THREADS must be a positive integer, got {cap!r}")
    return value


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="herald-sim", description="Heralded spin-controlled oscillator cooling simulator.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run a single configuration"), ("sweep", "run every point of the config's sweep")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON configuration")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="master seed, unsigned 64-bit (overrides seed)")
        p.add_argument("--quiet", action="store_true", help="only report errors")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        out_dir = Path(args.out if args.out else cfg.output_dir)
        threads = _threads_from_env()
        with warnings.catch_warnings():
            if cfg.strict_truncation:
                warnings.simplefilter("error", TruncationWarning)
            return _dispatch(args.command, cfg, out_dir, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TruncationError, TruncationWarning) as exc:
        print(f"truncation error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except (HeraldSimError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _dispatch(command: str, cfg: RunConfig, out_dir: Path, threads: int | None) -> int:
    if command == "run":
        if cfg.sweep:
            raise ConfigError("config defines a sweep; use 'herald-sim sweep'")
        s = execute(cfg, out_dir, threads)
        log.info("final occupancy %.6g, var_x %.6g, event rate %.6g -> %s",
                 s["final"]["occupancy"], s["final"]["var_x"], s["event_rate"], out_dir)
    else:
        if not cfg.sweep:
            raise ConfigError("config has no sweep section")
        results = _sweep(cfg, out_dir, threads)
        log.info("%d sweep points -> %s", len(results), out_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
