"""Control envelopes and the two-segment protocol schedule.

Envelope times are window-local ns, values are rad/ns. Every evaluated laser
amplitude clamps to the owning transition's cap, masked transitions evaluate
to exactly zero outside their segment window, and all schedule parameters map
to and from an unconstrained real vector for the optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import yaml
from scipy.special import expit

from .model import (
    DETUNING_CAP,
    TWO_PI_MHZ,
    CycleSpec,
    build_cycle,
)

Pair = tuple[int, int]


@dataclass(frozen=True)
class PiecewiseEnvelope:
    """Piecewise-constant envelope: N durations partitioning the window, N values.

    Right-continuous: a boundary time takes the following piece's value, and
    times past the final boundary extend the last value.
    """

    durations: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.durations) != len(self.values) or not self.durations:
            raise ValueError("durations and values must be equal-length and nonempty")
        if any(d < 0.0 for d in self.durations):
            raise ValueError("piecewise durations must be nonnegative")

    @property
    def n_pieces(self) -> int:
        return len(self.values)

    def evaluate(self, t: float) -> float:
        edges = np.cumsum(self.durations)
        idx = int(np.searchsorted(edges, t, side="right"))
        return self.values[min(idx, len(self.values) - 1)]

    def evaluate_array(self, ts: np.ndarray) -> np.ndarray:
        edges = np.cumsum(self.durations)
        idx = np.searchsorted(edges, ts, side="right")
        idx = np.minimum(idx, len(self.values) - 1)
        return np.asarray(self.values, dtype=float)[idx]


@dataclass(frozen=True)
class GaussianEnvelope:
    """Gaussian pulse a * exp(-(t - c)^2 / (2 w^2)) on the window-local axis."""

    amplitude: float
    center: float
    width: float

    def __post_init__(self) -> None:
        if self.amplitude < 0.0:
            raise ValueError("gaussian amplitude must be nonnegative")
        if self.width <= 0.0:
            raise ValueError("gaussian width must be positive")

    @property
    def n_pieces(self) -> int:
        return 1

    def evaluate(self, t: float) -> float:
        z = (t - self.center) / self.width
        return self.amplitude * math.exp(-0.5 * z * z)

    def evaluate_array(self, ts: np.ndarray) -> np.ndarray:
        z = (np.asarray(ts, dtype=float) - self.center) / self.width
        return self.amplitude * np.exp(-0.5 * z * z)


Envelope = Union[PiecewiseEnvelope, GaussianEnvelope]


def segment_lasers(cycle: CycleSpec) -> dict[int, tuple[Pair, ...]]:
    """Split the cycle's lasers into the two protocol segments.

    Segment 1 drives the climb to the microwave swap (all lasers whose levels
    sit at or below the swap), segment 2 drives everything after it.
    """
    mw_lo = cycle.microwave_transition.pair[0]
    seg1 = tuple(p for p in cycle.laser_pairs if max(p) <= mw_lo)
    seg2 = tuple(p for p in cycle.laser_pairs if max(p) > mw_lo)
    return {1: seg1, 2: seg2}


@dataclass(frozen=True, eq=False)
class ProtocolSchedule:
    """Full drive program for one conversion attempt on [0, tau].

    With masks enabled, segment-1 lasers run on [0, split) and segment-2
    lasers on [split, tau]; each envelope lives on its window's local time
    axis. With masks disabled every envelope spans [0, tau]. Optional
    detuning envelopes are piecewise-constant, bounded by ``DETUNING_CAP``,
    and share their laser's window.
    """

    cycle: CycleSpec
    tau: float
    split: float
    envelopes: dict[Pair, Envelope]
    detunings: dict[Pair, PiecewiseEnvelope] = field(default_factory=dict)
    masks_enabled: bool = True

    def __post_init__(self) -> None:
        if self.tau <= 0.0:
            raise ValueError("schedule duration must be positive")
        if not 0.0 < self.split < self.tau:
            raise ValueError("split time must lie strictly inside (0, tau)")
        pairs = set(self.cycle.laser_pairs)
        if set(self.envelopes) != pairs:
            raise ValueError("schedule must define exactly one envelope per laser")
        if not set(self.detunings) <= pairs:
            raise ValueError("detuning envelopes reference unknown lasers")
        for pair, env in self.detunings.items():
            if not isinstance(env, PiecewiseEnvelope):
                raise ValueError(f"detuning for {pair} must be piecewise-constant")
            if any(abs(v) > DETUNING_CAP * (1.0 + 1e-9) for v in env.values):
                raise ValueError(f"detuning for {pair} exceeds the allowed window")

    def segment_of(self, pair: Pair) -> int:
        return 1 if pair in segment_lasers(self.cycle)[1] else 2

    def window(self, pair: Pair) -> tuple[float, float]:
        if not self.masks_enabled:
            return (0.0, self.tau)
        if self.segment_of(pair) == 1:
            return (0.0, self.split)
        return (self.split, self.tau)

    def _check_times(self, ts: np.ndarray) -> None:
        if ts.size and (ts.min() < -1e-9 or ts.max() > self.tau + 1e-9):
            raise ValueError("evaluation time outside [0, tau]")

    def evaluate(self, pair: Pair, t: float) -> float:
        """Laser Rabi amplitude at global time t, masked and cap-clamped."""
        return float(self.evaluate_array(pair, np.asarray([t], dtype=float))[0])

    def evaluate_array(self, pair: Pair, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        self._check_times(ts)
        cap = self.cycle.max_rate(pair)
        w0, _ = self.window(pair)
        raw = self.envelopes[pair].evaluate_array(ts - w0)
        vals = np.clip(raw, 0.0, cap)
        if self.masks_enabled:
            if self.segment_of(pair) == 1:
                vals = np.where(ts < self.split, vals, 0.0)
            else:
                vals = np.where(ts >= self.split, vals, 0.0)
        return vals

    def delta_array(self, pair: Pair, ts: np.ndarray) -> np.ndarray:
        """Laser detuning at global times, zero when none is configured."""
        ts = np.asarray(ts, dtype=float)
        self._check_times(ts)
        env = self.detunings.get(pair)
        if env is None:
            return np.zeros_like(ts)
        w0, _ = self.window(pair)
        vals = env.evaluate_array(ts - w0)
        return np.clip(vals, -DETUNING_CAP, DETUNING_CAP)

    def delta(self, pair: Pair, t: float) -> float:
        return float(self.delta_array(pair, np.asarray([t], dtype=float))[0])

    def breakpoints(self) -> np.ndarray:
        """Sorted global times where some envelope is discontinuous."""
        pts = {0.0, self.tau}
        if self.masks_enabled:
            pts.add(self.split)
        for pair in self.cycle.laser_pairs:
            w0, w1 = self.window(pair)
            for env in (self.envelopes[pair], self.detunings.get(pair)):
                if isinstance(env, PiecewiseEnvelope):
                    for edge in np.cumsum(env.durations)[:-1]:
                        t = w0 + float(edge)
                        if 0.0 < t < self.tau:
                            pts.add(t)
        out = np.array(sorted(pts))
        # collapse near-duplicate breakpoints from float noise
        keep = np.concatenate(([True], np.diff(out) > 1e-9))
        return out[keep]


def zero_schedule(cycle: CycleSpec, tau: float) -> ProtocolSchedule:
    """All lasers off for the whole window."""
    env = {p: PiecewiseEnvelope((tau,), (0.0,)) for p in cycle.laser_pairs}
    return ProtocolSchedule(cycle=cycle, tau=tau, split=tau / 2.0,
                            envelopes=env, masks_enabled=False)


# ---------------------------------------------------------------------------
# Parameter vector codec
# ---------------------------------------------------------------------------

_P_MIN = 1e-12


def squash(x, lo: float, hi: float):
    """Map the real line onto (lo, hi) with a logistic, saturating exactly."""
    return lo + (hi - lo) * expit(x)


def unsquash(v, lo: float, hi: float):
    p = np.clip((np.asarray(v, dtype=float) - lo) / (hi - lo), _P_MIN, 1.0 - _P_MIN)
    return np.log(p / (1.0 - p))


def _stick_fracs(xs: np.ndarray) -> np.ndarray:
    """Softmax stick-breaking: N-1 free reals -> N positive fractions summing to 1."""
    y = np.concatenate([np.asarray(xs, dtype=float), [0.0]])
    e = np.exp(y - y.max())
    return e / e.sum()


def _stick_inverse(fracs: Sequence[float]) -> np.ndarray:
    f = np.clip(np.asarray(fracs, dtype=float), _P_MIN, None)
    return np.log(f[:-1] / f[-1])


_PARAMETRIZATIONS = ("gaussian", "piecewise", "constant")


@dataclass(frozen=True)
class ScheduleTemplate:
    """Shape of a schedule search space; codec between schedules and vectors.

    ``parametrization`` is "gaussian", "piecewise" (``n_pieces`` shared-
    boundary intervals per window) or "constant" (one level per laser over
    the whole window, masks off). ``active_lasers`` restricts the search to a
    subset of lasers (the rest stay off); it requires masks disabled and is
    how single-segment problems are posed.
    """

    cycle: CycleSpec
    tau: float
    parametrization: str
    n_pieces: int = 2
    masks_enabled: bool = True
    split_free: bool = True
    split: float | None = None
    detuning: bool = False
    active_lasers: tuple[Pair, ...] | None = None

    def __post_init__(self) -> None:
        if self.parametrization not in _PARAMETRIZATIONS:
            raise ValueError(f"unknown parametrization {self.parametrization!r}")
        if self.tau <= 0.0:
            raise ValueError("template duration must be positive")
        if self.n_pieces < 1:
            raise ValueError("n_pieces must be at least 1")
        if self.detuning and self._kind() == "gaussian":
            raise ValueError("detuning search requires a piecewise parametrization")
        if self.active_lasers is not None and self.masks_enabled:
            raise ValueError("active_lasers requires masks_enabled=False")
        if not self.masks_enabled and self.split_free:
            raise ValueError("split_free requires masks_enabled=True")

    def _kind(self) -> str:
        return "piecewise" if self.parametrization == "constant" else self.parametrization

    def _pieces(self) -> int:
        return 1 if self.parametrization == "constant" else self.n_pieces

    def _blocks(self) -> list[tuple[int | None, tuple[Pair, ...]]]:
        """(segment_id, lasers) per window, in decode order."""
        if self.masks_enabled:
            seg = segment_lasers(self.cycle)
            return [(1, seg[1]), (2, seg[2])]
        lasers = self.active_lasers or self.cycle.laser_pairs
        return [(None, tuple(lasers))]

    @property
    def n_params(self) -> int:
        n = 1 if (self.masks_enabled and self.split_free) else 0
        pieces = self._pieces()
        for _, lasers in self._blocks():
            if self._kind() == "piecewise" and pieces > 1:
                n += pieces - 1
            per_laser = 3 if self._kind() == "gaussian" else pieces
            n += len(lasers) * per_laser
            if self.detuning:
                n += len(lasers) * pieces
        return n

    def _split_value(self, vec: np.ndarray, pos: int) -> tuple[float, int]:
        if self.masks_enabled and self.split_free:
            return float(squash(vec[pos], 0.05 * self.tau, 0.95 * self.tau)), pos + 1
        if self.masks_enabled:
            return float(self.split if self.split is not None else self.tau / 2.0), pos
        return self.tau / 2.0, pos

    def _window_length(self, segment_id: int | None, split: float) -> float:
        if segment_id is None:
            return self.tau
        return split if segment_id == 1 else self.tau - split

    def from_vector(self, vec: Sequence[float]) -> ProtocolSchedule:
        """Decode an unconstrained real vector into a valid schedule."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {vec.shape}")
        pos = 0
        split, pos = self._split_value(vec, pos)
        pieces = self._pieces()
        envelopes: dict[Pair, Envelope] = {}
        detunings: dict[Pair, PiecewiseEnvelope] = {}
        for segment_id, lasers in self._blocks():
            length = self._window_length(segment_id, split)
            if self._kind() == "piecewise" and pieces > 1:
                fracs = _stick_fracs(vec[pos:pos + pieces - 1])
                pos += pieces - 1
                durations = tuple(float(f * length) for f in fracs)
            else:
                durations = (float(length),) * (1 if self._kind() == "piecewise" else 0)
            for pair in lasers:
                cap = self.cycle.max_rate(pair)
                if self._kind() == "gaussian":
                    amp = float(squash(vec[pos], 0.0, cap))
                    center = float(squash(vec[pos + 1], -0.5 * length, 1.5 * length))
                    width = float(squash(vec[pos + 2], length / 100.0, 2.0 * length))
                    pos += 3
                    envelopes[pair] = GaussianEnvelope(amp, center, width)
                else:
                    vals = tuple(float(squash(x, 0.0, cap)) for x in vec[pos:pos + pieces])
                    pos += pieces
                    envelopes[pair] = PiecewiseEnvelope(durations, vals)
            if self.detuning:
                for pair in lasers:
                    vals = tuple(
                        float(squash(x, -DETUNING_CAP, DETUNING_CAP))
                        for x in vec[pos:pos + pieces]
                    )
                    pos += pieces
                    detunings[pair] = PiecewiseEnvelope(durations or (length,), vals)
        for pair in self.cycle.laser_pairs:
            if pair not in envelopes:
                envelopes[pair] = PiecewiseEnvelope((self.tau,), (0.0,))
        return ProtocolSchedule(
            cycle=self.cycle, tau=self.tau, split=split,
            envelopes=envelopes, detunings=detunings,
            masks_enabled=self.masks_enabled,
        )

    def to_vector(self, schedule: ProtocolSchedule) -> np.ndarray:
        """Encode a schedule produced by (or compatible with) this template."""
        out: list[float] = []
        if self.masks_enabled and self.split_free:
            out.append(float(unsquash(schedule.split, 0.05 * self.tau, 0.95 * self.tau)))
        pieces = self._pieces()
        for segment_id, lasers in self._blocks():
            length = self._window_length(segment_id, schedule.split)
            if self._kind() == "piecewise" and pieces > 1:
                ref = schedule.envelopes[lasers[0]]
                if not isinstance(ref, PiecewiseEnvelope) or ref.n_pieces != pieces:
                    raise ValueError("schedule does not match the template's piecewise shape")
                fracs = np.asarray(ref.durations, dtype=float) / length
                out.extend(_stick_inverse(fracs))
            for pair in lasers:
                cap = self.cycle.max_rate(pair)
                env = schedule.envelopes[pair]
                if self._kind() == "gaussian":
                    if not isinstance(env, GaussianEnvelope):
                        raise ValueError(f"expected gaussian envelope for {pair}")
                    out.append(float(unsquash(env.amplitude, 0.0, cap)))
                    out.append(float(unsquash(env.center, -0.5 * length, 1.5 * length)))
                    out.append(float(unsquash(env.width, length / 100.0, 2.0 * length)))
                else:
                    if not isinstance(env, PiecewiseEnvelope) or env.n_pieces != pieces:
                        raise ValueError(f"expected {pieces}-piece envelope for {pair}")
                    out.extend(float(unsquash(v, 0.0, cap)) for v in env.values)
            if self.detuning:
                for pair in lasers:
                    env = schedule.detunings.get(pair)
                    vals = env.values if env is not None else (0.0,) * pieces
                    out.extend(
                        float(unsquash(v, -DETUNING_CAP, DETUNING_CAP)) for v in vals
                    )
        return np.asarray(out, dtype=float)

    def random_vector(self, rng: np.random.Generator) -> np.ndarray:
        """Draw a random but reasonable starting vector for one restart."""
        out: list[float] = []
        if self.masks_enabled and self.split_free:
            out.append(rng.normal(0.0, 0.8))
        pieces = self._pieces()
        for _, lasers in self._blocks():
            if self._kind() == "piecewise" and pieces > 1:
                out.extend(rng.normal(0.0, 0.6, size=pieces - 1))
            for _ in lasers:
                if self._kind() == "gaussian":
                    out.append(rng.uniform(-2.5, 2.5))   # amplitude
                    out.append(rng.normal(0.0, 1.0))     # center
                    out.append(rng.uniform(-3.0, 1.0))   # width
                else:
                    out.extend(rng.uniform(-2.5, 2.5, size=pieces))
            if self.detuning:
                for _ in lasers:
                    out.extend(rng.normal(0.0, 1.5, size=pieces))
        return np.asarray(out, dtype=float)

    def stirap_vector(self) -> np.ndarray:
        """Counterintuitively ordered seed: later transitions pulse earlier."""
        return self.to_vector(self.stirap_schedule())

    def stirap_schedule(self) -> ProtocolSchedule:
        split = self.split if (self.masks_enabled and self.split is not None) \
            else 0.55 * self.tau if self.masks_enabled else self.tau / 2.0
        pieces = self._pieces()
        envelopes: dict[Pair, Envelope] = {}
        for segment_id, lasers in self._blocks():
            length = self._window_length(segment_id, split)
            m = len(lasers)
            for i, pair in enumerate(lasers):
                cap = self.cycle.max_rate(pair)
                late = i / (m - 1) if m > 1 else 0.5   # 0 = earliest transition
                if self._kind() == "gaussian":
                    center = (0.65 - 0.3 * late) * length
                    envelopes[pair] = GaussianEnvelope(0.5 * cap, center, length / 4.0)
                else:
                    durations = (length / pieces,) * pieces
                    if pieces == 1:
                        vals = (0.4 * cap,)
                    else:
                        ramp = np.linspace(0.0, 1.0, pieces)
                        level = (1.0 - late) * ramp + late * (1.0 - ramp)
                        vals = tuple(cap * (0.1 + 0.6 * level))
                    envelopes[pair] = PiecewiseEnvelope(durations, vals)
        for pair in self.cycle.laser_pairs:
            if pair not in envelopes:
                envelopes[pair] = PiecewiseEnvelope((self.tau,), (0.0,))
        return ProtocolSchedule(
            cycle=self.cycle, tau=self.tau, split=split,
            envelopes=envelopes, masks_enabled=self.masks_enabled,
        )


def template_of(schedule: ProtocolSchedule, *, detuning: bool | None = None) -> ScheduleTemplate:
    """Recover the search-space template a full schedule belongs to."""
    kinds = {type(env) for env in schedule.envelopes.values()}
    if kinds == {GaussianEnvelope}:
        parametrization, pieces = "gaussian", 2
    elif kinds == {PiecewiseEnvelope}:
        counts = {env.n_pieces for env in schedule.envelopes.values()}
        if len(counts) != 1:
            raise ValueError("mixed piece counts; schedule does not fit one template")
        parametrization, pieces = "piecewise", counts.pop()
        if not schedule.masks_enabled and pieces == 1:
            parametrization = "constant"
    else:
        raise ValueError("mixed envelope kinds; schedule does not fit one template")
    return ScheduleTemplate(
        cycle=schedule.cycle,
        tau=schedule.tau,
        parametrization=parametrization,
        n_pieces=pieces,
        masks_enabled=schedule.masks_enabled,
        split_free=schedule.masks_enabled,
        detuning=bool(schedule.detunings) if detuning is None else detuning,
    )


def parameter_vector(schedule: ProtocolSchedule) -> np.ndarray:
    """Flatten a schedule to the unconstrained vector of its natural template."""
    return template_of(schedule).to_vector(schedule)


def from_vector(template: ScheduleTemplate, vec: Sequence[float]) -> ProtocolSchedule:
    return template.from_vector(vec)


def concatenate_segments(
    cycle: CycleSpec,
    tau: float,
    split: float,
    seg1: ProtocolSchedule,
    seg2: ProtocolSchedule,
) -> ProtocolSchedule:
    """Join two single-segment schedules into one masked full protocol.

    ``seg1``/``seg2`` are masks-off schedules on [0, split] and [0, tau-split]
    local axes; their envelopes transplant unchanged because full-schedule
    windows use local time too.
    """
    seg = segment_lasers(cycle)
    envelopes: dict[Pair, Envelope] = {}
    detunings: dict[Pair, PiecewiseEnvelope] = {}
    for pair in seg[1]:
        envelopes[pair] = seg1.envelopes[pair]
        if pair in seg1.detunings:
            detunings[pair] = seg1.detunings[pair]
    for pair in seg[2]:
        envelopes[pair] = seg2.envelopes[pair]
        if pair in seg2.detunings:
            detunings[pair] = seg2.detunings[pair]
    return ProtocolSchedule(
        cycle=cycle, tau=tau, split=split,
        envelopes=envelopes, detunings=detunings, masks_enabled=True,
    )


# ---------------------------------------------------------------------------
# Physical parameters (for robustness sweeps)
# ---------------------------------------------------------------------------


def physical_parameters(schedule: ProtocolSchedule) -> list[tuple[str, float]]:
    """Labelled envelope parameters in a fixed order (split and detunings excluded)."""
    out: list[tuple[str, float]] = []
    for pair in schedule.cycle.laser_pairs:
        env = schedule.envelopes[pair]
        tag = f"{pair[0]}-{pair[1]}"
        if isinstance(env, GaussianEnvelope):
            out.append((f"{tag}.amplitude", env.amplitude))
            out.append((f"{tag}.center", env.center))
            out.append((f"{tag}.width", env.width))
        else:
            for i, d in enumerate(env.durations):
                out.append((f"{tag}.duration{i}", d))
            for i, v in enumerate(env.values):
                out.append((f"{tag}.value{i}", v))
    return out


def with_physical_values(
    schedule: ProtocolSchedule, values: Sequence[float]
) -> ProtocolSchedule:
    """Rebuild the schedule with the ``physical_parameters`` entries replaced."""
    values = list(values)
    expected = len(physical_parameters(schedule))
    if len(values) != expected:
        raise ValueError(f"expected {expected} values, got {len(values)}")
    pos = 0
    envelopes: dict[Pair, Envelope] = {}
    for pair in schedule.cycle.laser_pairs:
        env = schedule.envelopes[pair]
        if isinstance(env, GaussianEnvelope):
            amp, center, width = values[pos:pos + 3]
            pos += 3
            envelopes[pair] = GaussianEnvelope(max(amp, 0.0), center, max(width, 1e-9))
        else:
            n = env.n_pieces
            durations = tuple(max(v, 0.0) for v in values[pos:pos + n])
            vals = tuple(max(v, 0.0) for v in values[pos + n:pos + 2 * n])
            pos += 2 * n
            envelopes[pair] = PiecewiseEnvelope(durations, vals)
    return replace(schedule, envelopes=envelopes)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_SCHEDULE_KEYS = {
    "schema_version", "cycle", "kappa_policy", "kappa_ns_inv", "tau_ns",
    "split_ns", "masks_enabled", "envelopes", "detunings",
}


def schedule_to_dict(schedule: ProtocolSchedule) -> dict:
    doc: dict = {
        "schema_version": 1,
        "cycle": schedule.cycle.name.value,
        "kappa_policy": schedule.cycle.kappa_policy,
        "tau_ns": float(schedule.tau),
        "split_ns": float(schedule.split),
        "masks_enabled": bool(schedule.masks_enabled),
        "envelopes": {},
    }
    if schedule.cycle.kappa_policy == "explicit":
        doc["kappa_ns_inv"] = float(schedule.cycle.kappa)
    for pair in schedule.cycle.laser_pairs:
        env = schedule.envelopes[pair]
        key = f"{pair[0]}-{pair[1]}"
        if isinstance(env, GaussianEnvelope):
            doc["envelopes"][key] = {
                "kind": "gaussian",
                "amplitude_MHz_over_2pi": env.amplitude / TWO_PI_MHZ,
                "center_ns": env.center,
                "width_ns": env.width,
            }
        else:
            doc["envelopes"][key] = {
                "kind": "piecewise",
                "durations_ns": [float(d) for d in env.durations],
                "values_MHz_over_2pi": [v / TWO_PI_MHZ for v in env.values],
            }
    if schedule.detunings:
        doc["detunings"] = {
            f"{p[0]}-{p[1]}": {
                "durations_ns": [float(d) for d in env.durations],
                "values_MHz_over_2pi": [v / TWO_PI_MHZ for v in env.values],
            }
            for p, env in sorted(schedule.detunings.items())
        }
    return doc


def _need(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ValueError(f"{where}: missing required field {key!r}")
    return mapping[key]


def schedule_from_dict(doc: dict) -> ProtocolSchedule:
    if not isinstance(doc, dict):
        raise ValueError("schedule document must be a mapping")
    unknown = set(doc) - _SCHEDULE_KEYS
    if unknown:
        raise ValueError(f"unknown schedule fields: {sorted(unknown)}")
    if doc.get("schema_version") != 1:
        raise ValueError("schedule: unsupported or missing schema_version (expected 1)")
    policy = doc.get("kappa_policy", "two_g_o")
    cycle = build_cycle(
        _need(doc, "cycle", "schedule"), policy,
        kappa=doc.get("kappa_ns_inv") if policy == "explicit" else None,
    )
    envelopes: dict[Pair, Envelope] = {}
    env_doc = _need(doc, "envelopes", "schedule")
    for key, fields in env_doc.items():
        pair = tuple(int(x) for x in str(key).split("-"))
        where = f"schedule.envelopes[{key!r}]"
        kind = _need(fields, "kind", where)
        if kind == "gaussian":
            allowed = {"kind", "amplitude_MHz_over_2pi", "center_ns", "width_ns"}
            _reject_unknown(fields, allowed, where)
            envelopes[pair] = GaussianEnvelope(
                float(_need(fields, "amplitude_MHz_over_2pi", where)) * TWO_PI_MHZ,
                float(_need(fields, "center_ns", where)),
                float(_need(fields, "width_ns", where)),
            )
        elif kind == "piecewise":
            allowed = {"kind", "durations_ns", "values_MHz_over_2pi"}
            _reject_unknown(fields, allowed, where)
            envelopes[pair] = PiecewiseEnvelope(
                tuple(float(d) for d in _need(fields, "durations_ns", where)),
                tuple(float(v) * TWO_PI_MHZ
                      for v in _need(fields, "values_MHz_over_2pi", where)),
            )
        else:
            raise ValueError(f"{where}: unknown envelope kind {kind!r}")
    detunings: dict[Pair, PiecewiseEnvelope] = {}
    for key, fields in (doc.get("detunings") or {}).items():
        pair = tuple(int(x) for x in str(key).split("-"))
        where = f"schedule.detunings[{key!r}]"
        _reject_unknown(fields, {"durations_ns", "values_MHz_over_2pi"}, where)
        detunings[pair] = PiecewiseEnvelope(
            tuple(float(d) for d in _need(fields, "durations_ns", where)),
            tuple(float(v) * TWO_PI_MHZ
                  for v in _need(fields, "values_MHz_over_2pi", where)),
        )
    return ProtocolSchedule(
        cycle=cycle,
        tau=float(_need(doc, "tau_ns", "schedule")),
        split=float(_need(doc, "split_ns", "schedule")),
        envelopes=envelopes,
        detunings=detunings,
        masks_enabled=bool(doc.get("masks_enabled", True)),
    )


def _reject_unknown(fields: dict, allowed: set[str], where: str) -> None:
    unknown = set(fields) - allowed
    if unknown:
        raise ValueError(f"{where}: unknown fields {sorted(unknown)}")


def save_schedule(schedule: ProtocolSchedule, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(schedule_to_dict(schedule), fh, sort_keys=True)


def load_schedule(path: Union[str, Path]) -> ProtocolSchedule:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return schedule_from_dict(doc)
