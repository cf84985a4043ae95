"""Protocol optimization: simplex search, segment splitting, scans, robustness.

All randomness flows from explicit seeds through ``numpy.random.SeedSequence``
so every search, scan, and noise study reproduces exactly.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .dynamics import evolve, initial_state, simulate_success, success_probability
from .model import CycleSpec, JointState, enumerate_basis
from .pulses import (
    GaussianEnvelope,
    PiecewiseEnvelope,
    ProtocolSchedule,
    ScheduleTemplate,
    concatenate_segments,
    physical_parameters,
    schedule_from_dict,
    schedule_to_dict,
    segment_lasers,
    with_physical_values,
)

Pair = tuple[int, int]


@dataclass(frozen=True)
class SimplexConfig:
    """Nelder-Mead settings: per-coordinate initial step, both convergence
    tolerances, the per-run evaluation budget, and the restart count."""

    initial_step: float = 0.8
    f_tol: float = 1e-6
    x_tol: float = 1e-6
    max_evals: int = 20000
    restarts: int = 8


@dataclass
class NelderMeadResult:
    x: np.ndarray
    f: float
    evaluations: int
    converged: bool


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0: Sequence[float],
    config: SimplexConfig = SimplexConfig(),
    *,
    initial_steps: Sequence[float] | None = None,
) -> NelderMeadResult:
    """Downhill simplex with standard coefficients (1, 2, 0.5, 0.5).

    Terminates when both the objective spread and the simplex diameter fall
    below their tolerances, or flags ``converged=False`` on budget exhaustion.
    """
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    steps = np.full(d, config.initial_step) if initial_steps is None \
        else np.asarray(initial_steps, dtype=float)
    evals = 0

    def call(x: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        return float(objective(x))

    simplex = [x0.copy()]
    for i in range(d):
        v = x0.copy()
        v[i] += steps[i]
        simplex.append(v)
    values = [call(v) for v in simplex]
    if not all(math.isfinite(f) for f in values):
        raise ValueError("objective is not finite on the initial simplex")

    alpha, gamma, beta, delta = 1.0, 2.0, 0.5, 0.5
    converged = False
    while evals < config.max_evals:
        order = np.argsort(values)
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        spread = values[-1] - values[0]
        diam = max(np.max(np.abs(v - simplex[0])) for v in simplex[1:]) if d else 0.0
        if spread < config.f_tol and diam < config.x_tol:
            converged = True
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        reflected = centroid + alpha * (centroid - worst)
        f_r = call(reflected)
        if f_r < values[0]:
            expanded = centroid + gamma * (reflected - centroid)
            f_e = call(expanded)
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            if f_r < values[-1]:
                contracted = centroid + beta * (reflected - centroid)
            else:
                contracted = centroid + beta * (worst - centroid)
            f_c = call(contracted)
            if f_c < min(f_r, values[-1]):
                simplex[-1], values[-1] = contracted, f_c
            else:
                best = simplex[0]
                for i in range(1, d + 1):
                    simplex[i] = best + delta * (simplex[i] - best)
                    values[i] = call(simplex[i])
        if not math.isfinite(values[-1]):
            raise ValueError("objective returned a non-finite value")
    order = np.argsort(values)
    best = order[0]
    return NelderMeadResult(
        x=simplex[best].copy(), f=values[best], evaluations=evals, converged=converged
    )


def _rng(seed: int, *context: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *context]))


def _context_int(x: float) -> int:
    return int(round(x * 1.0e6)) & 0x7FFFFFFF


@dataclass
class SegmentResult:
    schedule: ProtocolSchedule
    objective: float
    per_restart: list[float]
    evaluations: int
    converged: bool
    template: ScheduleTemplate


def _segment_objective(
    cycle: CycleSpec, segment_id: int, template: ScheduleTemplate, h_search: float
) -> Callable[[np.ndarray], float]:
    basis = enumerate_basis(cycle)
    mw_hi = cycle.microwave_transition.pair[1]
    handoff = basis.index_of(JointState(mw_hi, 0, 0))
    if segment_id == 1:
        init = basis.initial_index

        def objective(vec: np.ndarray) -> float:
            sched = template.from_vector(vec)
            res = simulate_success(sched, initial=init, h_target=h_search)
            return 1.0 - float(res.populations[handoff])

    else:
        init = handoff

        def objective(vec: np.ndarray) -> float:
            sched = template.from_vector(vec)
            res = simulate_success(sched, initial=init, h_target=h_search)
            return 1.0 - res.success

    return objective


def optimize_segment(
    cycle: CycleSpec,
    segment_id: int,
    duration: float,
    parametrization: str = "gaussian",
    config: SimplexConfig = SimplexConfig(),
    *,
    seed: int = 0,
    n_pieces: int = 2,
    detuning: bool = False,
    h_search: float = 0.025,
    warm_starts: Sequence[np.ndarray] = (),
) -> SegmentResult:
    """Optimize one protocol segment in isolation.

    Segment 1 minimizes the population missing from the post-swap handoff
    state at the segment end (starting from the loaded microwave photon);
    segment 2 minimizes 1 - success starting from the handoff state.
    """
    if segment_id not in (1, 2):
        raise ValueError("segment_id must be 1 or 2")
    if duration <= 0.0:
        raise ValueError("segment duration must be positive")
    lasers = segment_lasers(cycle)[segment_id]
    template = ScheduleTemplate(
        cycle=cycle,
        tau=duration,
        parametrization=parametrization,
        n_pieces=n_pieces,
        masks_enabled=False,
        split_free=False,
        detuning=detuning,
        active_lasers=lasers,
    )
    objective = _segment_objective(cycle, segment_id, template, h_search)
    starts: list[np.ndarray] = [template.stirap_vector()]
    starts.extend(np.asarray(w, dtype=float) for w in warm_starts)
    ctx = (_context_int(duration), segment_id)
    while len(starts) < config.restarts + len(warm_starts):
        rng = _rng(seed, *ctx, len(starts))
        starts.append(template.random_vector(rng))

    best: NelderMeadResult | None = None
    per_restart: list[float] = []
    total_evals = 0
    for start in starts:
        result = nelder_mead(objective, start, config)
        per_restart.append(result.f)
        total_evals += result.evaluations
        if best is None or result.f < best.f:
            best = result
    assert best is not None
    return SegmentResult(
        schedule=template.from_vector(best.x),
        objective=best.f,
        per_restart=per_restart,
        evaluations=total_evals,
        converged=best.converged,
        template=template,
    )


@dataclass
class OptimizationResult:
    schedule: ProtocolSchedule
    loss_probability: float
    success: float
    evaluations: int
    per_restart: dict[str, list[float]]
    split: float
    split_scan: list[tuple[float, float]] = field(default_factory=list)
    converged: bool = True


def _rescale_envelope(env, factor: float):
    if isinstance(env, GaussianEnvelope):
        return GaussianEnvelope(env.amplitude, env.center * factor, env.width * factor)
    return PiecewiseEnvelope(
        tuple(d * factor for d in env.durations), env.values
    )


def _segment_warm_vector(
    full: ProtocolSchedule, segment_id: int, template: ScheduleTemplate
) -> np.ndarray | None:
    """Re-window a segment of an existing protocol as a warm start, or None
    if its envelope shapes do not fit the template."""
    lasers = segment_lasers(full.cycle)[segment_id]
    old_len = full.split if segment_id == 1 else full.tau - full.split
    if old_len <= 0.0:
        return None
    factor = template.tau / old_len
    envelopes = {}
    detunings = {}
    for pair in lasers:
        envelopes[pair] = _rescale_envelope(full.envelopes[pair], factor)
        if pair in full.detunings:
            detunings[pair] = _rescale_envelope(full.detunings[pair], factor)
    for pair in full.cycle.laser_pairs:
        if pair not in envelopes:
            envelopes[pair] = PiecewiseEnvelope((template.tau,), (0.0,))
    try:
        candidate = ProtocolSchedule(
            cycle=full.cycle,
            tau=template.tau,
            split=template.tau / 2.0,
            envelopes=envelopes,
            detunings=detunings,
            masks_enabled=False,
        )
        return template.to_vector(candidate)
    except ValueError:
        return None


def optimize_protocol(
    cycle: CycleSpec,
    tau: float,
    parametrization: str = "gaussian",
    config: SimplexConfig = SimplexConfig(),
    *,
    seed: int = 0,
    split_fractions: Sequence[float] = (0.3, 0.4, 0.5, 0.6, 0.7),
    refine_split: bool = True,
    n_pieces: int = 2,
    detuning: bool = False,
    h_search: float = 0.025,
    warm_schedule: ProtocolSchedule | None = None,
    final_tol: float = 1e-6,
) -> OptimizationResult:
    """Two-segment protocol optimization with a split-time line search.

    Each candidate split optimizes both segments independently, the
    concatenated schedule is scored by a fast full-cycle simulation, and the
    winning split's schedule is re-simulated with the converging integrator
    to report the final loss probability.
    """
    if tau <= 0.0:
        raise ValueError("protocol duration must be positive")
    if not split_fractions:
        raise ValueError("at least one split fraction is required")
    if parametrization == "constant":
        raise ValueError("use constant_drive_baseline for the unmasked constant drive")

    evaluated: dict[float, tuple[SegmentResult, SegmentResult, float]] = {}
    total_evals = 0

    def run_split(frac: float) -> float:
        nonlocal total_evals
        frac = float(np.clip(frac, 0.05, 0.95))
        for done in evaluated:
            if abs(done - frac) < 1e-9:
                return done
        t_s = frac * tau
        results = []
        for segment_id, duration in ((1, t_s), (2, tau - t_s)):
            template = ScheduleTemplate(
                cycle=cycle, tau=duration, parametrization=parametrization,
                n_pieces=n_pieces, masks_enabled=False, split_free=False,
                detuning=detuning, active_lasers=segment_lasers(cycle)[segment_id],
            )
            warms = []
            if warm_schedule is not None:
                vec = _segment_warm_vector(warm_schedule, segment_id, template)
                if vec is not None:
                    warms.append(vec)
            res = optimize_segment(
                cycle, segment_id, duration, parametrization, config,
                seed=seed, n_pieces=n_pieces, detuning=detuning,
                h_search=h_search, warm_starts=warms,
            )
            total_evals += res.evaluations
            results.append(res)
        full = concatenate_segments(cycle, tau, t_s, results[0].schedule,
                                    results[1].schedule)
        fast = simulate_success(full, h_target=h_search)
        evaluated[frac] = (results[0], results[1], fast.success)
        return frac

    for frac in split_fractions:
        run_split(frac)
    if refine_split:
        best_frac = max(evaluated, key=lambda f: evaluated[f][2])
        for frac in (best_frac - 0.05, best_frac + 0.05):
            run_split(frac)

    best_frac = max(evaluated, key=lambda f: evaluated[f][2])
    r1, r2, _ = evaluated[best_frac]
    t_s = best_frac * tau
    schedule = concatenate_segments(cycle, tau, t_s, r1.schedule, r2.schedule)
    basis = enumerate_basis(cycle)
    trajectory = evolve(initial_state(basis), schedule, tol=final_tol)
    success = success_probability(trajectory.final)
    return OptimizationResult(
        schedule=schedule,
        loss_probability=1.0 - success,
        success=success,
        evaluations=total_evals,
        per_restart={"segment1": r1.per_restart, "segment2": r2.per_restart},
        split=t_s,
        split_scan=sorted((f * tau, s) for f, (_, _, s) in evaluated.items()),
        converged=r1.converged and r2.converged,
    )


def constant_drive_baseline(
    cycle: CycleSpec,
    tau: float,
    config: SimplexConfig = SimplexConfig(),
    *,
    seed: int = 0,
    h_search: float = 0.025,
    final_tol: float = 1e-6,
) -> OptimizationResult:
    """Reference protocol: every laser held at one optimized constant level."""
    if tau <= 0.0:
        raise ValueError("protocol duration must be positive")
    template = ScheduleTemplate(
        cycle=cycle, tau=tau, parametrization="constant",
        masks_enabled=False, split_free=False,
    )

    def objective(vec: np.ndarray) -> float:
        sched = template.from_vector(vec)
        return 1.0 - simulate_success(sched, h_target=h_search).success

    starts = [template.stirap_vector()]
    ctx = (_context_int(tau), 0)
    while len(starts) < config.restarts:
        rng = _rng(seed, *ctx, len(starts))
        starts.append(template.random_vector(rng))
    best: NelderMeadResult | None = None
    per_restart: list[float] = []
    total_evals = 0
    for start in starts:
        result = nelder_mead(objective, start, config)
        per_restart.append(result.f)
        total_evals += result.evaluations
        if best is None or result.f < best.f:
            best = result
    assert best is not None
    schedule = template.from_vector(best.x)
    trajectory = evolve(initial_state(enumerate_basis(cycle)), schedule, tol=final_tol)
    success = success_probability(trajectory.final)
    return OptimizationResult(
        schedule=schedule,
        loss_probability=1.0 - success,
        success=success,
        evaluations=total_evals,
        per_restart={"constant": per_restart},
        split=schedule.split,
        converged=best.converged,
    )


def optimize_joint(
    cycle: CycleSpec,
    tau: float,
    parametrization: str = "gaussian",
    config: SimplexConfig = SimplexConfig(),
    *,
    seed: int = 0,
    n_pieces: int = 2,
    detuning: bool = False,
    h_search: float = 0.025,
    warm_schedule: ProtocolSchedule | None = None,
    final_tol: float = 1e-6,
) -> OptimizationResult:
    """Single-shot optimization of every parameter at once, split included.

    Expensive verification mode: one simplex over the full masked protocol
    instead of the two-segment decomposition. Accepts the two-segment winner
    as a warm start so the comparison starts from parity.
    """
    if tau <= 0.0:
        raise ValueError("protocol duration must be positive")
    template = ScheduleTemplate(
        cycle=cycle, tau=tau, parametrization=parametrization,
        n_pieces=n_pieces, masks_enabled=True, split_free=True,
        detuning=detuning,
    )

    def objective(vec: np.ndarray) -> float:
        sched = template.from_vector(vec)
        return 1.0 - simulate_success(sched, h_target=h_search).success

    starts: list[np.ndarray] = [template.stirap_vector()]
    if warm_schedule is not None:
        try:
            starts.insert(0, template.to_vector(warm_schedule))
        except ValueError:
            pass
    ctx = (_context_int(tau), 3)
    while len(starts) < config.restarts + (warm_schedule is not None):
        rng = _rng(seed, *ctx, len(starts))
        starts.append(template.random_vector(rng))

    best: NelderMeadResult | None = None
    per_restart: list[float] = []
    total_evals = 0
    for start in starts:
        result = nelder_mead(objective, start, config)
        per_restart.append(result.f)
        total_evals += result.evaluations
        if best is None or result.f < best.f:
            best = result
    assert best is not None
    schedule = template.from_vector(best.x)
    trajectory = evolve(initial_state(enumerate_basis(cycle)), schedule, tol=final_tol)
    success = success_probability(trajectory.final)
    return OptimizationResult(
        schedule=schedule,
        loss_probability=1.0 - success,
        success=success,
        evaluations=total_evals,
        per_restart={"joint": per_restart},
        split=schedule.split,
        converged=best.converged,
    )


# ---------------------------------------------------------------------------
# Duration scans with a disk cache
# ---------------------------------------------------------------------------

CACHE_VERSION = "v1"


@dataclass
class ScanPoint:
    tau: float
    loss: float
    success: float
    evaluations: int
    seed: int
    schedule: ProtocolSchedule
    from_cache: bool = False
    converged: bool = True


def _parametrization_tag(parametrization: str, n_pieces: int, detuning: bool) -> str:
    tag = parametrization
    if parametrization == "piecewise":
        tag += str(n_pieces)
    if detuning:
        tag += "_det"
    return tag


def _cache_file(
    cache_dir: Union[str, Path], cycle: CycleSpec, tau: float,
    tag: str, seed: int, warm: bool,
) -> Path:
    policy = cycle.kappa_policy
    if policy == "explicit":
        policy += f"{cycle.kappa:.6g}"
    name = f"{cycle.name.value}_{policy}_{tag}_tau{tau:.6f}_seed{seed}"
    if warm:
        name += "_warm"
    return Path(cache_dir) / CACHE_VERSION / f"{name}.json"


def _atomic_write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def loss_vs_duration_scan(
    cycle: CycleSpec,
    taus: Sequence[float],
    parametrization: str = "gaussian",
    config: SimplexConfig = SimplexConfig(),
    *,
    seed: int = 0,
    cache_dir: Union[str, Path, None] = None,
    n_pieces: int = 2,
    detuning: bool = False,
    h_search: float = 0.025,
    warm_start: bool = True,
    split_fractions: Sequence[float] = (0.3, 0.4, 0.5, 0.6, 0.7),
    threads: int = 1,
    final_tol: float = 1e-6,
) -> list[ScanPoint]:
    """Optimized loss probability versus protocol duration.

    Results are cached on disk keyed by cycle, kappa policy, parametrization,
    duration, seed, and warm-start mode; cached points are returned without
    re-optimization. Sequential scans warm-start each duration from the
    previous optimum; ``threads > 1`` parallelizes instead (no warm chain).
    """
    taus = [float(t) for t in taus]
    if not taus:
        raise ValueError("duration grid must be nonempty")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("duration grid must be strictly increasing")
    tag = _parametrization_tag(parametrization, n_pieces, detuning)
    use_warm = warm_start and threads <= 1

    def load_point(tau: float) -> ScanPoint | None:
        if cache_dir is None:
            return None
        path = _cache_file(cache_dir, cycle, tau, tag, seed, use_warm)
        if not path.exists():
            return None
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return ScanPoint(
            tau=doc["tau_ns"], loss=doc["loss"], success=doc["success"],
            evaluations=doc["evaluations"], seed=doc["seed"],
            schedule=schedule_from_dict(doc["schedule"]),
            from_cache=True, converged=doc.get("converged", True),
        )

    def store_point(point: ScanPoint, result: OptimizationResult) -> None:
        if cache_dir is None:
            return
        path = _cache_file(cache_dir, cycle, point.tau, tag, seed, use_warm)
        doc = {
            "schema": 1,
            "cycle": cycle.name.value,
            "kappa_policy": cycle.kappa_policy,
            "kappa_ns_inv": cycle.kappa,
            "parametrization": tag,
            "tau_ns": point.tau,
            "seed": point.seed,
            "warm": use_warm,
            "loss": point.loss,
            "success": point.success,
            "evaluations": point.evaluations,
            "split_ns": result.split,
            "split_scan": result.split_scan,
            "per_restart": result.per_restart,
            "converged": result.converged,
            "schedule": schedule_to_dict(point.schedule),
        }
        _atomic_write_json(path, doc)

    def compute(tau: float, warm: ProtocolSchedule | None) -> ScanPoint:
        result = optimize_protocol(
            cycle, tau, parametrization, config,
            seed=seed, split_fractions=split_fractions, n_pieces=n_pieces,
            detuning=detuning, h_search=h_search, warm_schedule=warm,
            final_tol=final_tol,
        )
        point = ScanPoint(
            tau=tau, loss=result.loss_probability, success=result.success,
            evaluations=result.evaluations, seed=seed,
            schedule=result.schedule, converged=result.converged,
        )
        store_point(point, result)
        return point

    if threads > 1:
        points: list[ScanPoint] = [None] * len(taus)  # type: ignore[list-item]
        pending = []
        for i, tau in enumerate(taus):
            cached = load_point(tau)
            if cached is not None:
                points[i] = cached
            else:
                pending.append(i)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {i: pool.submit(compute, taus[i], None) for i in pending}
            for i, fut in futures.items():
                points[i] = fut.result()
        return points

    points = []
    prev: ProtocolSchedule | None = None
    for tau in taus:
        cached = load_point(tau)
        if cached is None:
            cached = compute(tau, prev if use_warm else None)
        points.append(cached)
        prev = cached.schedule
    return points


def cached_scan_points(
    cycle: CycleSpec,
    taus: Sequence[float],
    parametrization: str = "gaussian",
    *,
    seed: int = 0,
    cache_dir: Union[str, Path] = "data/scan_cache",
    n_pieces: int = 2,
    detuning: bool = False,
    warm: bool = True,
) -> list[ScanPoint]:
    """Load previously scanned points from the cache without computing any.

    Raises FileNotFoundError naming the first missing cache entry.
    """
    tag = _parametrization_tag(parametrization, n_pieces, detuning)
    points = []
    for tau in taus:
        path = _cache_file(cache_dir, cycle, float(tau), tag, seed, warm)
        if not path.exists():
            raise FileNotFoundError(
                f"no cached scan point for tau={float(tau):g} ns at {path}"
            )
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        points.append(ScanPoint(
            tau=doc["tau_ns"], loss=doc["loss"], success=doc["success"],
            evaluations=doc["evaluations"], seed=doc["seed"],
            schedule=schedule_from_dict(doc["schedule"]),
            from_cache=True, converged=doc.get("converged", True),
        ))
    return points


# ---------------------------------------------------------------------------
# Robustness to control noise
# ---------------------------------------------------------------------------


@dataclass
class RobustnessSample:
    sample: int
    parameter: str
    loss: float
    fractional_increase: float


@dataclass
class RobustnessResult:
    baseline_loss: float
    mean_fractional_increase: float
    std_error: float
    samples: list[RobustnessSample]


def robustness_study(
    schedule: ProtocolSchedule,
    *,
    samples: int = 200,
    seed: int = 0,
    sd_divisor: float = 25.0,
    h_search: float = 0.025,
) -> RobustnessResult:
    """Sensitivity of the loss probability to Gaussian control noise.

    For every sample and every envelope parameter mu, that one parameter is
    replaced by a draw from Normal(mu, |mu| / sd_divisor) (the others held at
    their optima), the protocol is re-simulated, and the fractional loss
    increase (p_noisy - p) / p is averaged over samples and parameters.
    """
    if samples < 1:
        raise ValueError("robustness study needs at least one sample")
    if sd_divisor <= 0.0 and not math.isinf(sd_divisor):
        raise ValueError("sd_divisor must be positive (or inf for zero noise)")
    params = physical_parameters(schedule)
    if not params:
        raise ValueError("schedule exposes no envelope parameters")
    base_values = [v for _, v in params]
    p0 = 1.0 - simulate_success(schedule, h_target=h_search).success
    if p0 <= 0.0:
        raise ValueError("baseline loss probability is zero; fractional change undefined")
    rng = _rng(seed, 0x0B5)
    rows: list[RobustnessSample] = []
    for s in range(samples):
        for k, (label, mu) in enumerate(params):
            sd = 0.0 if math.isinf(sd_divisor) else abs(mu) / sd_divisor
            draw = mu if sd == 0.0 else float(rng.normal(mu, sd))
            values = list(base_values)
            values[k] = draw
            noisy = with_physical_values(schedule, values)
            p = 1.0 - simulate_success(noisy, h_target=h_search).success
            rows.append(
                RobustnessSample(
                    sample=s, parameter=label, loss=p,
                    fractional_increase=(p - p0) / p0,
                )
            )
    fracs = np.array([r.fractional_increase for r in rows])
    stderr = float(fracs.std(ddof=1) / math.sqrt(fracs.size)) if fracs.size > 1 else 0.0
    return RobustnessResult(
        baseline_loss=p0,
        mean_fractional_increase=float(fracs.mean()),
        std_error=stderr,
        samples=rows,
    )
