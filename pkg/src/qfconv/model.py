"""Atomic cycle constants and the reduced joint state space.

Units: time in ns, every coupling or decay rate is an angular frequency in
rad/ns (hbar = 1). Rates quoted in datasheets as "2pi x f MHz" convert via
``TWO_PI_MHZ``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Union

import yaml

TWO_PI_MHZ = 2.0 * math.pi * 1.0e-3
"""One unit of 2pi x MHz, expressed in rad/ns."""

DETUNING_CAP = 10.0 * TWO_PI_MHZ
"""Half-width of the allowed laser detuning window (2pi x 10 MHz)."""

KAPPA_POLICIES = ("two_g_o", "zero", "explicit")


class CycleName(str, Enum):
    A = "A"
    B = "B"


class TransitionKind(str, Enum):
    LASER = "laser"
    MICROWAVE_CAVITY = "microwave_cavity"
    OPTICAL_CAVITY = "optical_cavity"


@dataclass(frozen=True)
class AtomicLevel:
    """One atomic level: 1-based index and radiative lifetime (inf = stable)."""

    index: int
    lifetime_ns: float

    def __post_init__(self) -> None:
        if not self.lifetime_ns > 0.0:
            raise ValueError(
                f"level {self.index}: lifetime must be positive, got {self.lifetime_ns}"
            )

    @property
    def decay_rate(self) -> float:
        """Population decay rate 1/lifetime in 1/ns (0 for a stable level)."""
        if math.isinf(self.lifetime_ns):
            return 0.0
        return 1.0 / self.lifetime_ns


@dataclass(frozen=True)
class Transition:
    """A coupled level pair: a driven laser line or one of the two cavity modes.

    ``max_rate`` caps the Rabi frequency for a laser, or fixes the vacuum
    coupling for a cavity mode, in rad/ns. ``power_mw`` is bench metadata and
    never enters the dynamics.
    """

    pair: tuple[int, int]
    kind: TransitionKind
    max_rate: float
    wavelength_or_freq: str
    power_mw: float | None = None

    def __post_init__(self) -> None:
        if self.max_rate <= 0.0:
            raise ValueError(f"transition {self.pair}: max_rate must be positive")
        j, k = self.pair
        if j == k or j < 1 or k < 1:
            raise ValueError(f"transition pair {self.pair} is not a valid level pair")


@dataclass(frozen=True)
class CycleSpec:
    """A full conversion cycle: levels, couplings, and cavity parameters.

    ``g_m`` and ``g_o`` duplicate the two cavity transitions' rates for
    convenience; ``kappa`` is the optical cavity intensity decay rate in 1/ns
    (the microwave cavity is treated as lossless).
    """

    name: CycleName
    levels: tuple[AtomicLevel, ...]
    transitions: tuple[Transition, ...]
    g_m: float
    g_o: float
    kappa: float
    kappa_policy: str = "two_g_o"

    def __post_init__(self) -> None:
        indices = [lv.index for lv in self.levels]
        if indices != list(range(1, len(indices) + 1)):
            raise ValueError("levels must be numbered 1..n in order")
        if self.kappa < 0.0:
            raise ValueError("kappa must be nonnegative")
        if self.kappa_policy not in KAPPA_POLICIES:
            raise ValueError(f"unknown kappa policy {self.kappa_policy!r}")
        kinds = [t.kind for t in self.transitions]
        if kinds.count(TransitionKind.MICROWAVE_CAVITY) != 1:
            raise ValueError("cycle must contain exactly one microwave cavity transition")
        if kinds.count(TransitionKind.OPTICAL_CAVITY) != 1:
            raise ValueError("cycle must contain exactly one optical cavity transition")
        self._check_single_loop()

    def _check_single_loop(self) -> None:
        # The transitions must tile the level set as one closed loop: every
        # level has exactly two neighbours and the graph is connected.
        n = len(self.levels)
        adjacency: dict[int, list[int]] = {j: [] for j in range(1, n + 1)}
        for t in self.transitions:
            j, k = t.pair
            if j > n or k > n:
                raise ValueError(f"transition {t.pair} references an unknown level")
            adjacency[j].append(k)
            adjacency[k].append(j)
        if any(len(v) != 2 for v in adjacency.values()):
            raise ValueError("transitions do not form a single closed loop")
        seen = {1}
        frontier = [1]
        while frontier:
            j = frontier.pop()
            for k in adjacency[j]:
                if k not in seen:
                    seen.add(k)
                    frontier.append(k)
        if len(seen) != n:
            raise ValueError("transition graph is not connected")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level(self, index: int) -> AtomicLevel:
        return self.levels[index - 1]

    @property
    def laser_transitions(self) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.kind is TransitionKind.LASER)

    @property
    def laser_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(t.pair for t in self.laser_transitions)

    @property
    def microwave_transition(self) -> Transition:
        return next(t for t in self.transitions if t.kind is TransitionKind.MICROWAVE_CAVITY)

    @property
    def optical_transition(self) -> Transition:
        return next(t for t in self.transitions if t.kind is TransitionKind.OPTICAL_CAVITY)

    def transition(self, pair: tuple[int, int]) -> Transition:
        for t in self.transitions:
            if t.pair == tuple(pair):
                return t
        raise KeyError(f"no transition {tuple(pair)} in cycle {self.name.value}")

    def max_rate(self, pair: tuple[int, int]) -> float:
        return self.transition(pair).max_rate


# Built-in cycle data. Lifetimes in ns; coupling caps in units of 2pi x MHz.
# Power figures (mW) are carried as metadata only.
_LIFETIMES = {
    CycleName.A: {1: math.inf, 2: 34.8, 3: 8.0e5, 4: 2.0e6, 5: 48.0, 6: 30.4},
    CycleName.B: {1: math.inf, 2: 34.8, 3: 8.0e5, 4: 2.0e6, 5: math.inf, 6: 155.0, 7: 910.0},
}

_TRANSITIONS = {
    CycleName.A: (
        ((1, 2), TransitionKind.LASER, 630.0, "895 nm", 0.001),
        ((2, 3), TransitionKind.LASER, 70.0, "495 nm", 10.0),
        ((3, 4), TransitionKind.MICROWAVE_CAVITY, 3.0, "5.04 GHz", None),
        ((4, 5), TransitionKind.LASER, 50.0, "778 nm", 10.0),
        ((5, 6), TransitionKind.OPTICAL_CAVITY, 200.0, "1470 nm", None),
        ((1, 6), TransitionKind.LASER, 880.0, "852 nm", 0.001),
    ),
    CycleName.B: (
        ((1, 2), TransitionKind.LASER, 630.0, "895 nm", 0.001),
        ((2, 3), TransitionKind.LASER, 70.0, "495 nm", 10.0),
        ((3, 4), TransitionKind.MICROWAVE_CAVITY, 3.0, "5.04 GHz", None),
        ((4, 5), TransitionKind.LASER, 20.0, "319 nm", 10.0),
        ((5, 6), TransitionKind.LASER, 1200.0, "459 nm", 1.0),
        ((6, 7), TransitionKind.OPTICAL_CAVITY, 100.0, "1376 nm", None),
        ((1, 7), TransitionKind.LASER, 250.0, "690 nm", 10.0),
    ),
}


def build_cycle(
    name: Union[CycleName, str],
    kappa_policy: str = "two_g_o",
    *,
    kappa: float | None = None,
) -> CycleSpec:
    """Construct one of the built-in cycles.

    ``kappa_policy`` selects the optical cavity decay rate: "two_g_o" sets
    kappa = 2 g_o, "zero" models a lossless cavity, "explicit" uses the
    supplied ``kappa`` (1/ns).
    """
    try:
        cname = CycleName(name)
    except ValueError:
        raise ValueError(f"unknown cycle {name!r}; expected one of {[c.value for c in CycleName]}")
    levels = tuple(
        AtomicLevel(index=j, lifetime_ns=tau) for j, tau in sorted(_LIFETIMES[cname].items())
    )
    transitions = tuple(
        Transition(pair=pair, kind=kind, max_rate=rate * TWO_PI_MHZ,
                   wavelength_or_freq=label, power_mw=power)
        for pair, kind, rate, label, power in _TRANSITIONS[cname]
    )
    g_m = next(t.max_rate for t in transitions if t.kind is TransitionKind.MICROWAVE_CAVITY)
    g_o = next(t.max_rate for t in transitions if t.kind is TransitionKind.OPTICAL_CAVITY)
    kappa_value = _resolve_kappa(kappa_policy, g_o, kappa)
    return CycleSpec(
        name=cname,
        levels=levels,
        transitions=transitions,
        g_m=g_m,
        g_o=g_o,
        kappa=kappa_value,
        kappa_policy=kappa_policy,
    )


def _resolve_kappa(policy: str, g_o: float, explicit: float | None) -> float:
    if policy == "two_g_o":
        return 2.0 * g_o
    if policy == "zero":
        return 0.0
    if policy == "explicit":
        if explicit is None or explicit < 0.0:
            raise ValueError("explicit kappa policy requires a nonnegative kappa value")
        return explicit
    raise ValueError(f"unknown kappa policy {policy!r}")


class Sink(str, Enum):
    """Absorbing bookkeeping states appended to the physical basis."""

    LOSS = "loss"
    OUTPUT = "output"


@dataclass(frozen=True)
class JointState:
    """Atom level plus occupation of the two cavity modes (each 0 or 1)."""

    atom: int
    n_mw: int
    n_opt: int

    def __post_init__(self) -> None:
        if self.n_mw not in (0, 1) or self.n_opt not in (0, 1):
            raise ValueError("cavity occupations are restricted to {0, 1}")
        if self.n_mw and self.n_opt:
            raise ValueError("joint basis holds at most one excitation")

    @property
    def label(self) -> str:
        return f"a{self.atom}_m{self.n_mw}_o{self.n_opt}"


BasisState = Union[JointState, Sink]


@dataclass(frozen=True, eq=False)
class JointBasis:
    """Ordered reduced basis for one cycle.

    Ordering: microwave-photon states by ascending atom level, then bare-atom
    states, then the optical-photon pair (emitting level, then atom ground),
    then the uncoupled vacuum, then the two sinks. The order is deterministic
    and is the column order of every exported trajectory.
    """

    cycle_name: CycleName
    states: tuple[BasisState, ...]

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def n_live(self) -> int:
        """Number of non-sink states (the leading block)."""
        return self.size - 2

    def index_of(self, state: BasisState) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise KeyError(f"state {state} not in basis for cycle {self.cycle_name.value}")

    @property
    def initial_index(self) -> int:
        return self.index_of(JointState(1, 1, 0))

    @property
    def transfer_target_index(self) -> int:
        """Index of (atom ground, optical photon) - the pre-emission success state."""
        return self.index_of(JointState(1, 0, 1))

    @property
    def vacuum_index(self) -> int:
        return self.index_of(JointState(1, 0, 0))

    @property
    def loss_index(self) -> int:
        return self.index_of(Sink.LOSS)

    @property
    def output_index(self) -> int:
        return self.index_of(Sink.OUTPUT)

    def label(self, index: int) -> str:
        s = self.states[index]
        return s.value if isinstance(s, Sink) else s.label

    def labels(self) -> list[str]:
        return [self.label(i) for i in range(self.size)]


def enumerate_basis(cycle: CycleSpec) -> JointBasis:
    """Enumerate the reduced joint basis for ``cycle``.

    The basis keeps the single shared excitation: microwave photon present
    while the atom climbs the lower arc, no photon while it crosses the
    upper arc, optical photon from the emitting level onward, plus the
    excitation-free vacuum and the two absorbing sinks.
    """
    mw_lo, mw_hi = cycle.microwave_transition.pair
    opt_lo, opt_hi = cycle.optical_transition.pair
    states: list[BasisState] = []
    states.extend(JointState(j, 1, 0) for j in range(1, mw_lo + 1))
    states.extend(JointState(j, 0, 0) for j in range(mw_hi, opt_lo + 1))
    states.append(JointState(opt_hi, 0, 1))
    states.append(JointState(1, 0, 1))
    states.append(JointState(1, 0, 0))
    states.append(Sink.LOSS)
    states.append(Sink.OUTPUT)
    return JointBasis(cycle_name=cycle.name, states=tuple(states))


# What-if cycle files: a small YAML document overriding built-in constants.
_TOP_KEYS = {
    "cycle", "kappa_policy", "kappa_ns_inv", "levels", "transitions",
    "g_m_MHz_over_2pi", "g_o_MHz_over_2pi",
}


def cycle_from_mapping(doc: dict) -> CycleSpec:
    """Build a cycle from an override mapping (see ``cycle_from_file``)."""
    if not isinstance(doc, dict):
        raise ValueError("cycle override document must be a mapping")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown cycle override keys: {sorted(unknown)}")
    if "cycle" not in doc:
        raise ValueError("cycle override document requires a 'cycle' key")
    policy = doc.get("kappa_policy", "two_g_o")
    explicit = doc.get("kappa_ns_inv")
    base = build_cycle(doc["cycle"], "two_g_o")

    levels = list(base.levels)
    for key, fields in (doc.get("levels") or {}).items():
        idx = int(key)
        if idx < 1 or idx > base.n_levels:
            raise ValueError(f"level override {key}: no such level")
        extra = set(fields) - {"lifetime_ns"}
        if extra:
            raise ValueError(f"level override {key}: unknown fields {sorted(extra)}")
        if "lifetime_ns" in fields:
            levels[idx - 1] = replace(levels[idx - 1], lifetime_ns=float(fields["lifetime_ns"]))

    transitions = list(base.transitions)
    for key, fields in (doc.get("transitions") or {}).items():
        pair = _parse_pair(key)
        extra = set(fields) - {"max_rate_MHz_over_2pi"}
        if extra:
            raise ValueError(f"transition override {key}: unknown fields {sorted(extra)}")
        pos = next((i for i, t in enumerate(transitions) if t.pair == pair), None)
        if pos is None:
            raise ValueError(f"transition override {key}: no such transition")
        if "max_rate_MHz_over_2pi" in fields:
            rate = float(fields["max_rate_MHz_over_2pi"]) * TWO_PI_MHZ
            transitions[pos] = replace(transitions[pos], max_rate=rate)

    if "g_m_MHz_over_2pi" in doc:
        rate = float(doc["g_m_MHz_over_2pi"]) * TWO_PI_MHZ
        pos = next(i for i, t in enumerate(transitions)
                   if t.kind is TransitionKind.MICROWAVE_CAVITY)
        transitions[pos] = replace(transitions[pos], max_rate=rate)
    if "g_o_MHz_over_2pi" in doc:
        rate = float(doc["g_o_MHz_over_2pi"]) * TWO_PI_MHZ
        pos = next(i for i, t in enumerate(transitions)
                   if t.kind is TransitionKind.OPTICAL_CAVITY)
        transitions[pos] = replace(transitions[pos], max_rate=rate)

    g_m = next(t.max_rate for t in transitions if t.kind is TransitionKind.MICROWAVE_CAVITY)
    g_o = next(t.max_rate for t in transitions if t.kind is TransitionKind.OPTICAL_CAVITY)
    kappa_value = _resolve_kappa(policy, g_o, explicit)
    return CycleSpec(
        name=base.name,
        levels=tuple(levels),
        transitions=tuple(transitions),
        g_m=g_m,
        g_o=g_o,
        kappa=kappa_value,
        kappa_policy=policy,
    )


def cycle_from_file(path: Union[str, Path]) -> CycleSpec:
    """Load a what-if cycle from a YAML override file.

    Schema: ``cycle`` (A or B, required), optional ``kappa_policy`` /
    ``kappa_ns_inv``, ``levels: {index: {lifetime_ns}}``,
    ``transitions: {"j-k": {max_rate_MHz_over_2pi}}``, ``g_m_MHz_over_2pi``,
    ``g_o_MHz_over_2pi``. Unknown keys are rejected.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return cycle_from_mapping(doc)


def _parse_pair(key: str) -> tuple[int, int]:
    parts = str(key).split("-")
    if len(parts) != 2:
        raise ValueError(f"transition key {key!r} must look like 'j-k'")
    return int(parts[0]), int(parts[1])
