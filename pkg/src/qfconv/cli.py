"""Command-line interface: reproducible converter runs from structured configs.

Every command reads one YAML config (flags override seed/out/threads), echoes
the config into the output directory, and writes deterministic CSV/YAML
results; wall-clock timestamps live only in metadata.yaml. Exit codes: 0
success, 2 config or input error, 3 numerical failure, 4 optimizer budget
exhausted.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import shutil
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from . import __version__
from .channel import capacity, rate_scan
from .dynamics import IntegrationError, evolve, initial_state, success_probability
from .model import KAPPA_POLICIES, build_cycle, enumerate_basis
from .optimizer import (
    SimplexConfig,
    cached_scan_points,
    constant_drive_baseline,
    loss_vs_duration_scan,
    optimize_protocol,
    robustness_study,
)
from .pulses import load_schedule, save_schedule, schedule_from_dict


class ConfigError(Exception):
    pass


_GLOBAL_KEYS = {"seed", "out_dir", "threads"}

_OPTIMIZER_KEYS = {"initial_step", "f_tol", "x_tol", "max_evals", "restarts"}


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _load_doc(config_path: Path | None) -> dict:
    if config_path is None:
        return {}
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{config_path}: invalid YAML{where}: {exc.problem}")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {config_path}")
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{config_path}: config must be a key-value mapping")
    return doc


def _check_keys(doc: dict, allowed: set[str], required: set[str]) -> None:
    unknown = set(doc) - allowed - _GLOBAL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"missing required config keys: {sorted(missing)}")


def _resolve_run(args, doc: dict, command: str) -> tuple[int, Path, int]:
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    out = Path(args.out) if args.out is not None else Path(
        doc.get("out_dir", f"runs/{command}")
    )
    threads = args.threads if args.threads is not None else int(doc.get("threads", 1))
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    return seed, out, threads


def _prepare_out(out: Path, command: str, seed: int, config_path: Path | None,
                 doc: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if config_path is not None:
        shutil.copyfile(config_path, out / "config.yaml")
    else:
        with open(out / "config.yaml", "w", encoding="utf-8") as fh:
            yaml.safe_dump(doc, fh, sort_keys=True)
    with open(out / "manifest.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(
            {"command": command, "seed": seed, "tool_version": __version__},
            fh, sort_keys=True,
        )
    with open(out / "metadata.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(
            {"written_at": datetime.datetime.now().isoformat(timespec="seconds")}, fh
        )


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_yaml(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True)


def _build_cycle_from(doc: dict) -> Any:
    policy = doc.get("kappa_policy", "two_g_o")
    if policy not in KAPPA_POLICIES:
        raise ConfigError(f"unknown kappa_policy {policy!r}")
    kwargs = {}
    if policy == "explicit":
        if "kappa_ns_inv" not in doc:
            raise ConfigError("kappa_policy: explicit requires kappa_ns_inv")
        kwargs["kappa"] = float(doc["kappa_ns_inv"])
    return build_cycle(doc["cycle"], policy, **kwargs)


def _simplex_config(doc: dict) -> SimplexConfig:
    sub = doc.get("optimizer", {})
    if not isinstance(sub, dict):
        raise ConfigError("optimizer section must be a mapping")
    unknown = set(sub) - _OPTIMIZER_KEYS
    if unknown:
        raise ConfigError(f"unknown optimizer keys: {sorted(unknown)}")
    return SimplexConfig(
        initial_step=float(sub.get("initial_step", 0.8)),
        f_tol=float(sub.get("f_tol", 1e-6)),
        x_tol=float(sub.get("x_tol", 1e-6)),
        max_evals=int(sub.get("max_evals", 20000)),
        restarts=int(sub.get("restarts", 8)),
    )


def _split_fractions(doc: dict) -> tuple[float, ...]:
    fracs = doc.get("split_fractions", (0.3, 0.4, 0.5, 0.6, 0.7))
    fracs = tuple(float(f) for f in fracs)
    if not fracs or any(not 0.0 < f < 1.0 for f in fracs):
        raise ConfigError("split_fractions must be a nonempty list inside (0, 1)")
    return fracs


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    doc = _load_doc(args.config)
    _check_keys(
        doc,
        {"schedule_file", "schedule", "initial", "tolerance", "base_step_ns"},
        set(),
    )
    seed, out, _ = _resolve_run(args, doc, "simulate")
    if args.schedule is not None:
        schedule = load_schedule(args.schedule)
    elif "schedule_file" in doc:
        schedule = load_schedule(doc["schedule_file"])
    elif "schedule" in doc:
        schedule = schedule_from_dict(doc["schedule"])
    else:
        raise ConfigError("simulate needs --schedule, schedule_file, or an inline schedule")
    initial = args.initial or doc.get("initial", "default")
    if initial not in ("default", "vacuum"):
        raise ConfigError("initial must be 'default' or 'vacuum'")
    tol = float(doc.get("tolerance", 1e-6))
    base_step = doc.get("base_step_ns")
    basis = enumerate_basis(schedule.cycle)
    rho0 = initial_state(
        basis, basis.vacuum_index if initial == "vacuum" else basis.initial_index
    )
    trajectory = evolve(
        rho0, schedule, tol=tol,
        base_step=float(base_step) if base_step is not None else None,
    )
    _prepare_out(out, "simulate", seed, args.config, doc)
    trajectory.to_csv(out / "trajectory.csv")
    final = trajectory.final
    drift = max(abs(s.trace - 1.0) for s in trajectory.states)
    _write_yaml(out / "summary.yaml", {
        "success": float(success_probability(final)),
        "loss_sink": float(final.population(basis.loss_index)),
        "vacuum": float(final.population(basis.vacuum_index)),
        "max_trace_drift": float(drift),
        "refinements": int(trajectory.refinements),
        "samples": int(len(trajectory.times)),
    })
    return 0


_OPT_KEYS = {
    "cycle", "tau_ns", "kappa_policy", "kappa_ns_inv", "parametrization",
    "n_pieces", "detuning", "split_fractions", "refine_split", "optimizer",
    "h_search_ns", "final_tolerance",
}


def cmd_optimize(args) -> int:
    doc = _load_doc(args.config)
    _check_keys(doc, _OPT_KEYS, {"cycle", "tau_ns"})
    seed, out, _ = _resolve_run(args, doc, "optimize")
    cycle = _build_cycle_from(doc)
    config = _simplex_config(doc)
    parametrization = "constant" if args.baseline else doc.get("parametrization", "gaussian")
    tau = float(doc["tau_ns"])
    h_search = float(doc.get("h_search_ns", 0.025))
    final_tol = float(doc.get("final_tolerance", 1e-6))
    if parametrization == "constant":
        result = constant_drive_baseline(
            cycle, tau, config, seed=seed, h_search=h_search, final_tol=final_tol
        )
    else:
        result = optimize_protocol(
            cycle, tau, parametrization, config,
            seed=seed,
            split_fractions=_split_fractions(doc),
            refine_split=bool(doc.get("refine_split", True)),
            n_pieces=int(doc.get("n_pieces", 2)),
            detuning=bool(doc.get("detuning", False)),
            h_search=h_search,
            final_tol=final_tol,
        )
    _prepare_out(out, "optimize", seed, args.config, doc)
    save_schedule(result.schedule, out / "schedule.yaml")
    _write_yaml(out / "result.yaml", {
        "loss_probability": float(result.loss_probability),
        "success": float(result.success),
        "evaluations": int(result.evaluations),
        "split_ns": float(result.split),
        "converged": bool(result.converged),
        "per_restart": {k: [float(v) for v in vs] for k, vs in result.per_restart.items()},
        "split_scan": [[float(a), float(b)] for a, b in result.split_scan],
    })
    return 0 if result.converged else 4


_SCAN_KEYS = _OPT_KEYS | {"tau_grid_ns", "cache_dir", "warm_start"}


def cmd_scan(args) -> int:
    doc = _load_doc(args.config)
    _check_keys(doc, _SCAN_KEYS, {"cycle", "tau_grid_ns"})
    seed, out, threads = _resolve_run(args, doc, "scan")
    cycle = _build_cycle_from(doc)
    config = _simplex_config(doc)
    taus = [float(t) for t in doc["tau_grid_ns"]]
    points = loss_vs_duration_scan(
        cycle, taus,
        doc.get("parametrization", "gaussian"),
        config,
        seed=seed,
        cache_dir=doc.get("cache_dir", "data/scan_cache"),
        n_pieces=int(doc.get("n_pieces", 2)),
        detuning=bool(doc.get("detuning", False)),
        h_search=float(doc.get("h_search_ns", 0.025)),
        warm_start=bool(doc.get("warm_start", True)),
        split_fractions=_split_fractions(doc),
        threads=threads,
        final_tol=float(doc.get("final_tolerance", 1e-6)),
    )
    _prepare_out(out, "scan", seed, args.config, doc)
    _write_csv(
        out / "scan.csv",
        ["tau_ns", "loss_p", "success", "evaluations", "seed"],
        [
            [_fmt(pt.tau), _fmt(pt.loss), _fmt(pt.success), pt.evaluations, pt.seed]
            for pt in points
        ],
    )
    best = min(points, key=lambda pt: pt.loss)
    _write_yaml(out / "summary.yaml", {
        "n_points": len(points),
        "from_cache": sum(1 for pt in points if pt.from_cache),
        "best_tau_ns": float(best.tau),
        "best_loss_p": float(best.loss),
    })
    return 0


def cmd_capacity(args) -> int:
    doc = _load_doc(args.config)
    _check_keys(doc, {"p_values", "p_grid", "resolution"}, set())
    seed, out, _ = _resolve_run(args, doc, "capacity")
    resolution = float(doc.get("resolution", 1e-3))
    if "p_values" in doc:
        ps = [float(p) for p in doc["p_values"]]
    else:
        grid = doc.get("p_grid", {})
        if not isinstance(grid, dict) or set(grid) - {"start", "stop", "count"}:
            raise ConfigError("p_grid must be a mapping with start/stop/count")
        start = float(grid.get("start", 0.0))
        stop = float(grid.get("stop", 1.0))
        count = int(grid.get("count", 101))
        if count < 2 or not 0.0 <= start < stop <= 1.0:
            raise ConfigError("p_grid must satisfy 0 <= start < stop <= 1, count >= 2")
        ps = [start + (stop - start) * i / (count - 1) for i in range(count)]
    rows = [[_fmt(p), _fmt(capacity(p, resolution))] for p in ps]
    _prepare_out(out, "capacity", seed, args.config, doc)
    _write_csv(out / "capacity.csv", ["p", "capacity_qubits"], rows)
    return 0


_RATE_KEYS = {
    "scan_csv", "cycle", "kappa_policy", "kappa_ns_inv", "parametrization",
    "n_pieces", "detuning", "tau_grid_ns", "cache_dir", "warm_start",
    "t_io_ns", "resolution",
}


def cmd_rate(args) -> int:
    doc = _load_doc(args.config)
    _check_keys(doc, _RATE_KEYS, set())
    seed, out, _ = _resolve_run(args, doc, "rate")
    t_io = doc.get("t_io_ns")
    resolution = float(doc.get("resolution", 1e-3))
    if "scan_csv" in doc:
        curve = _read_scan_csv(Path(doc["scan_csv"]))
        if "kappa_ns_inv" in doc:
            kappa = float(doc["kappa_ns_inv"])
        elif "cycle" in doc:
            kappa = _build_cycle_from(doc).kappa
        else:
            raise ConfigError("rate needs kappa_ns_inv or a cycle to derive kappa from")
    elif "cycle" in doc:
        if "tau_grid_ns" not in doc:
            raise ConfigError("rate from cache needs tau_grid_ns")
        cycle = _build_cycle_from(doc)
        kappa = cycle.kappa
        try:
            points = cached_scan_points(
                cycle,
                [float(t) for t in doc["tau_grid_ns"]],
                doc.get("parametrization", "gaussian"),
                seed=seed,
                cache_dir=doc.get("cache_dir", "data/scan_cache"),
                n_pieces=int(doc.get("n_pieces", 2)),
                detuning=bool(doc.get("detuning", False)),
                warm=bool(doc.get("warm_start", True)),
            )
        except FileNotFoundError as exc:
            raise ConfigError(f"{exc}; run `qfconv scan` with the same settings first")
        curve = [(pt.tau, pt.loss) for pt in points]
    else:
        raise ConfigError("rate needs either scan_csv or cycle + tau_grid_ns")
    result = rate_scan(
        curve, kappa,
        t_io_ns=float(t_io) if t_io is not None else None,
        resolution=resolution,
    )
    _prepare_out(out, "rate", seed, args.config, doc)
    _write_csv(
        out / "rate.csv",
        ["tau_ns", "loss_p", "capacity_qubits", "window_ns", "rate_Mqbps"],
        [
            [_fmt(pt.tau_ns), _fmt(pt.loss_p), _fmt(pt.capacity_qubits),
             _fmt(pt.window_ns), _fmt(pt.rate_Mqbps)]
            for pt in result.points
        ],
    )
    best = result.best
    _write_yaml(out / "summary.yaml", {
        "best_tau_ns": float(best.tau_ns),
        "best_rate_Mqbps": float(best.rate_Mqbps),
        "best_capacity_qubits": float(best.capacity_qubits),
        "n_points": len(result.points),
    })
    return 0


def _read_scan_csv(path: Path) -> list[tuple[float, float]]:
    if not path.exists():
        raise ConfigError(f"scan csv not found: {path}; run `qfconv scan` first")
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"tau_ns", "loss_p"} <= set(reader.fieldnames):
            raise ConfigError(f"{path}: expected columns tau_ns and loss_p")
        return [(float(row["tau_ns"]), float(row["loss_p"])) for row in reader]


def cmd_robustness(args) -> int:
    doc = _load_doc(args.config)
    _check_keys(
        doc, {"schedule_file", "samples", "sd_divisor", "h_search_ns"},
        {"schedule_file"},
    )
    seed, out, _ = _resolve_run(args, doc, "robustness")
    schedule = load_schedule(doc["schedule_file"])
    samples = int(doc.get("samples", 200))
    result = robustness_study(
        schedule,
        samples=samples,
        seed=seed,
        sd_divisor=float(doc.get("sd_divisor", 25.0)),
        h_search=float(doc.get("h_search_ns", 0.025)),
    )
    _prepare_out(out, "robustness", seed, args.config, doc)
    rows = [
        ["sample", r.sample, r.parameter, _fmt(r.loss), _fmt(r.fractional_increase), ""]
        for r in result.samples
    ]
    rows.append([
        "summary", "", "all", _fmt(result.baseline_loss),
        _fmt(result.mean_fractional_increase), _fmt(result.std_error),
    ])
    _write_csv(
        out / "robustness.csv",
        ["row_kind", "sample", "parameter", "loss_p", "fractional_increase", "std_error"],
        rows,
    )
    _write_yaml(out / "summary.yaml", {
        "baseline_loss_p": float(result.baseline_loss),
        "mean_fractional_increase": float(result.mean_fractional_increase),
        "std_error": float(result.std_error),
        "samples": samples,
        "parameters": len({r.parameter for r in result.samples}),
    })
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, default=None,
                        help="YAML config for this run")
    shared.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    shared.add_argument("--out", type=Path, default=None,
                        help="output directory (default runs/<command>)")
    shared.add_argument("--threads", type=int, default=None,
                        help="worker threads for scans")

    parser = argparse.ArgumentParser(
        prog="qfconv",
        description="Single-atom microwave-to-optical converter toolkit",
    )
    parser.add_argument("--version", action="version", version=f"qfconv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[shared],
                       help="integrate one schedule and export the trajectory")
    p.add_argument("--schedule", type=Path, default=None, help="schedule YAML file")
    p.add_argument("--initial", choices=["default", "vacuum"], default=None)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("optimize", parents=[shared],
                       help="optimize a protocol at one duration")
    p.add_argument("--baseline", action="store_true",
                   help="optimize the constant-drive reference instead")
    p.set_defaults(handler=cmd_optimize)

    p = sub.add_parser("scan", parents=[shared],
                       help="optimized loss versus duration (cached)")
    p.set_defaults(handler=cmd_scan)

    p = sub.add_parser("capacity", parents=[shared],
                       help="damping-channel capacity curve")
    p.set_defaults(handler=cmd_capacity)

    p = sub.add_parser("rate", parents=[shared],
                       help="communication rate from a completed scan")
    p.set_defaults(handler=cmd_rate)

    p = sub.add_parser("robustness", parents=[shared],
                       help="control-noise sensitivity of a schedule")
    p.set_defaults(handler=cmd_robustness)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 2
    except yaml.YAMLError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IntegrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
