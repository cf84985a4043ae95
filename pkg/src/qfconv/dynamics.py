"""Master-equation dynamics on the reduced joint basis.

The Hamiltonian is interaction-picture: cavity couplings are static, each
laser line contributes Omega(t) e^{-i Delta(t) t} on its one basis pair, and
there are no diagonal terms. Dissipation routes every decay into one of two
absorbing sinks (atomic loss, cavity output), so converter figures of merit
read off the final state directly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from . import _kernels
from .model import (
    DETUNING_CAP,
    CycleSpec,
    JointBasis,
    JointState,
    Sink,
    enumerate_basis,
)
from .pulses import ProtocolSchedule

Pair = tuple[int, int]


class IntegrationError(RuntimeError):
    """Step-halving failed to converge; carries the last refinement diagnostics."""

    def __init__(self, message: str, *, last_change: float, steps: int):
        super().__init__(message)
        self.last_change = last_change
        self.steps = steps


@dataclass(frozen=True)
class ControlSample:
    """Instantaneous laser settings: Rabi amplitudes and detunings in rad/ns."""

    omega: Mapping[Pair, float]
    delta: Mapping[Pair, float] = field(default_factory=dict)


def control_sample(schedule: ProtocolSchedule, t: float) -> ControlSample:
    omega = {p: schedule.evaluate(p, t) for p in schedule.cycle.laser_pairs}
    delta = {p: schedule.delta(p, t) for p in schedule.cycle.laser_pairs}
    return ControlSample(omega=omega, delta=delta)


def laser_coupling_indices(
    cycle: CycleSpec, basis: JointBasis
) -> list[tuple[Pair, int, int]]:
    """Map each laser line to its unique (row, col) basis pair.

    A laser on levels (j, k) couples the two basis states with those atom
    levels in the same photon sector; the excitation-free vacuum never
    participates.
    """
    out = []
    for pair in cycle.laser_pairs:
        j, k = pair
        hits = []
        for a, sa in enumerate(basis.states):
            if not isinstance(sa, JointState) or sa.atom != j or a == basis.vacuum_index:
                continue
            partner = JointState(k, sa.n_mw, sa.n_opt)
            for b, sb in enumerate(basis.states):
                if sb == partner and b != basis.vacuum_index:
                    hits.append((a, b))
        if len(hits) != 1:
            raise ValueError(f"laser {pair} does not couple exactly one basis pair")
        out.append((pair, hits[0][0], hits[0][1]))
    return out


def static_hamiltonian(cycle: CycleSpec, basis: JointBasis) -> np.ndarray:
    """The always-on cavity couplings g_m and g_o (real symmetric)."""
    d = basis.size
    h0 = np.zeros((d, d), dtype=complex)
    mw_lo, mw_hi = cycle.microwave_transition.pair
    r = basis.index_of(JointState(mw_lo, 1, 0))
    c = basis.index_of(JointState(mw_hi, 0, 0))
    h0[r, c] = h0[c, r] = cycle.g_m
    opt_lo, opt_hi = cycle.optical_transition.pair
    r = basis.index_of(JointState(opt_hi, 0, 1))
    c = basis.index_of(JointState(opt_lo, 0, 0))
    h0[r, c] = h0[c, r] = cycle.g_o
    return h0


def assemble_hamiltonian(
    cycle: CycleSpec,
    controls: ControlSample,
    t: float,
    basis: JointBasis | None = None,
) -> np.ndarray:
    """Full interaction-picture Hamiltonian at time t for the given controls."""
    if basis is None:
        basis = enumerate_basis(cycle)
    h = static_hamiltonian(cycle, basis)
    couplings = {p: (r, c) for p, r, c in laser_coupling_indices(cycle, basis)}
    unknown = set(controls.omega) - set(couplings)
    if unknown:
        raise ValueError(f"controls reference unknown lasers: {sorted(unknown)}")
    for pair, omega in controls.omega.items():
        cap = cycle.max_rate(pair)
        if not 0.0 <= omega <= cap * (1.0 + 1e-9):
            raise ValueError(f"laser {pair}: Rabi amplitude {omega} outside [0, {cap}]")
        delta = controls.delta.get(pair, 0.0)
        if abs(delta) > DETUNING_CAP * (1.0 + 1e-9):
            raise ValueError(f"laser {pair}: detuning {delta} outside the allowed window")
        r, c = couplings[pair]
        coeff = omega * np.exp(-1j * delta * t)
        h[r, c] += coeff
        h[c, r] += np.conj(coeff)
    return h


@dataclass(frozen=True, eq=False)
class JumpSet:
    """Sink-routed jump channels, precomputed as flat arrays.

    Each decaying level feeds the loss sink at its own rate from every basis
    state carrying that level; each optical-photon state feeds the output
    sink at kappa. ``total_rate`` is the diagonal of the anticommutator term.
    """

    size: int
    total_rate: np.ndarray
    loss_sources: np.ndarray
    loss_rates: np.ndarray
    out_sources: np.ndarray
    out_rates: np.ndarray
    loss_index: int
    output_index: int


def build_jumps(cycle: CycleSpec, basis: JointBasis) -> JumpSet:
    d = basis.size
    total = np.zeros(d)
    loss_sources, loss_rates, out_sources, out_rates = [], [], [], []
    for i, state in enumerate(basis.states):
        if not isinstance(state, JointState):
            continue
        gamma = cycle.level(state.atom).decay_rate
        if gamma > 0.0:
            loss_sources.append(i)
            loss_rates.append(gamma)
            total[i] += gamma
        if state.n_opt == 1 and cycle.kappa > 0.0:
            out_sources.append(i)
            out_rates.append(cycle.kappa)
            total[i] += cycle.kappa
    return JumpSet(
        size=d,
        total_rate=total,
        loss_sources=np.asarray(loss_sources, dtype=np.int64),
        loss_rates=np.asarray(loss_rates, dtype=float),
        out_sources=np.asarray(out_sources, dtype=np.int64),
        out_rates=np.asarray(out_rates, dtype=float),
        loss_index=basis.loss_index,
        output_index=basis.output_index,
    )


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, jumps: JumpSet) -> np.ndarray:
    """d(rho)/dt for the sink-routed master equation (trace preserving)."""
    out = -1j * (h @ rho - rho @ h)
    r = jumps.total_rate
    out -= 0.5 * (r[:, None] * rho + rho * r[None, :])
    pops = np.real(np.diagonal(rho))
    if jumps.loss_sources.size:
        out[jumps.loss_index, jumps.loss_index] += float(
            jumps.loss_rates @ pops[jumps.loss_sources]
        )
    if jumps.out_sources.size:
        out[jumps.output_index, jumps.output_index] += float(
            jumps.out_rates @ pops[jumps.out_sources]
        )
    return out


@dataclass(eq=False)
class DensityMatrix:
    matrix: np.ndarray
    basis: JointBasis

    def population(self, which: Union[int, JointState, Sink]) -> float:
        idx = which if isinstance(which, (int, np.integer)) else self.basis.index_of(which)
        return float(np.real(self.matrix[idx, idx]))

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def physicality_violations(self, tol: float = 1e-8) -> list[str]:
        """Empty list when the state is physical within tol."""
        problems = []
        m = self.matrix
        if abs(self.trace - 1.0) > tol:
            problems.append(f"trace deviates by {abs(self.trace - 1.0):.3e}")
        herm = np.max(np.abs(m - m.conj().T))
        if herm > tol:
            problems.append(f"hermiticity deviates by {herm:.3e}")
        eigs = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
        if eigs.min() < -tol:
            problems.append(f"negative eigenvalue {eigs.min():.3e}")
        pops = np.real(np.diagonal(m))
        if pops.min() < -tol or pops.max() > 1.0 + tol:
            problems.append("population outside [0, 1]")
        return problems


def initial_state(basis: JointBasis, which: Union[int, JointState, None] = None) -> DensityMatrix:
    idx = basis.initial_index if which is None else (
        which if isinstance(which, (int, np.integer)) else basis.index_of(which)
    )
    m = np.zeros((basis.size, basis.size), dtype=complex)
    m[idx, idx] = 1.0
    return DensityMatrix(matrix=m, basis=basis)


def success_probability(final: DensityMatrix) -> float:
    """Population delivered to the optical side: photon still in the cavity
    with the atom back in the ground state, plus everything already emitted."""
    return final.population(final.basis.transfer_target_index) + final.population(
        final.basis.output_index
    )


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: list[DensityMatrix]
    basis: JointBasis
    refinements: int = 0

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]

    def population_series(self, which) -> np.ndarray:
        return np.array([s.population(which) for s in self.states])

    def success_series(self) -> np.ndarray:
        return np.array([success_probability(s) for s in self.states])

    def loss_series(self) -> np.ndarray:
        return self.population_series(self.basis.loss_index)

    def to_csv(self, path: Union[str, Path]) -> None:
        header = ["t_ns"] + [f"p_{lbl}" for lbl in self.basis.labels()]
        header += ["success", "loss"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t, state in zip(self.times, self.states):
                pops = np.real(np.diagonal(state.matrix))
                row = [f"{t:.9g}"] + [f"{p:.12g}" for p in pops]
                row += [
                    f"{success_probability(state):.12g}",
                    f"{state.population(self.basis.loss_index):.12g}",
                ]
                writer.writerow(row)


# ---------------------------------------------------------------------------
# Integration grids
# ---------------------------------------------------------------------------

# Discontinuities sit exactly on piece boundaries; stage evaluations at a
# piece end are nudged inward so they see the left limit there.
_EDGE_NUDGE = 1e-9


@dataclass(frozen=True)
class _Piece:
    start: float
    length: float
    n_steps: int
    n_samples: int


def _plan_pieces(
    schedule: ProtocolSchedule, h_target: float, samples_target: int
) -> list[_Piece]:
    edges = schedule.breakpoints()
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        length = float(b - a)
        n_samp = max(1, int(round(samples_target * length / schedule.tau)))
        n_raw = max(1, int(math.ceil(length / h_target)))
        n_steps = n_samp * int(math.ceil(n_raw / n_samp))
        pieces.append(_Piece(float(a), length, n_steps, n_samp))
    return pieces


def _piece_coefficients(
    schedule: ProtocolSchedule, piece: _Piece, pairs: Sequence[Pair]
) -> tuple[float, np.ndarray]:
    """Laser coefficients Omega e^{-i Delta t} on the (start, mid, end) stage grid."""
    h = piece.length / piece.n_steps
    starts = piece.start + h * np.arange(piece.n_steps)
    grid = np.stack([starts, starts + 0.5 * h, starts + h], axis=1)
    eval_grid = grid.copy()
    eval_grid[-1, 2] -= _EDGE_NUDGE
    flat = eval_grid.reshape(-1)
    coeffs = np.empty((len(pairs), piece.n_steps, 3), dtype=complex)
    for l, pair in enumerate(pairs):
        omega = schedule.evaluate_array(pair, flat)
        delta = schedule.delta_array(pair, flat)
        coeffs[l] = (omega * np.exp(-1j * delta * grid.reshape(-1))).reshape(
            piece.n_steps, 3
        )
    return h, coeffs


def _integrate_density(
    rho0: np.ndarray,
    schedule: ProtocolSchedule,
    basis: JointBasis,
    pieces: list[_Piece],
) -> tuple[list[float], list[np.ndarray]]:
    cycle = schedule.cycle
    h0 = static_hamiltonian(cycle, basis)
    jumps = build_jumps(cycle, basis)
    coupling = laser_coupling_indices(cycle, basis)
    pairs = [p for p, _, _ in coupling]
    rows = np.array([r for _, r, _ in coupling], dtype=np.intp)
    cols = np.array([c for _, _, c in coupling], dtype=np.intp)

    def ham(coeff_col: np.ndarray) -> np.ndarray:
        h = h0.copy()
        h[rows, cols] += coeff_col
        h[cols, rows] += np.conj(coeff_col)
        return h

    rho = rho0.astype(complex).copy()
    times = [pieces[0].start if pieces else 0.0]
    out_states = [rho.copy()]
    for piece in pieces:
        h, coeffs = _piece_coefficients(schedule, piece, pairs)
        stride = piece.n_steps // piece.n_samples
        for k in range(piece.n_steps):
            h_a = ham(coeffs[:, k, 0])
            h_m = ham(coeffs[:, k, 1])
            h_b = ham(coeffs[:, k, 2])
            k1 = lindblad_rhs(rho, h_a, jumps)
            k2 = lindblad_rhs(rho + 0.5 * h * k1, h_m, jumps)
            k3 = lindblad_rhs(rho + 0.5 * h * k2, h_m, jumps)
            k4 = lindblad_rhs(rho + h * k3, h_b, jumps)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            rho = (rho + rho.conj().T) / 2.0
            if (k + 1) % stride == 0:
                times.append(piece.start + (k + 1) * h)
                out_states.append(rho.copy())
    return times, out_states


def evolve(
    rho0: Union[DensityMatrix, np.ndarray],
    schedule: ProtocolSchedule,
    *,
    tol: float = 1e-6,
    base_step: float | None = None,
    max_refinements: int = 6,
    samples_target: int = 320,
) -> Trajectory:
    """Integrate the master equation over [0, tau] with step-halving control.

    The fixed RK4 step starts at tau/4000 (or ``base_step``) and halves until
    the final success probability moves by less than ``tol`` between
    consecutive grids; the finer result is returned. Exceeding
    ``max_refinements`` raises :class:`IntegrationError`.
    """
    basis = enumerate_basis(schedule.cycle)
    if isinstance(rho0, DensityMatrix):
        if rho0.basis.states != basis.states:
            raise ValueError("initial state basis does not match the schedule's cycle")
        mat = rho0.matrix
    else:
        mat = np.asarray(rho0)
    if mat.shape != (basis.size, basis.size):
        raise ValueError(f"initial state must be {basis.size}x{basis.size}")
    if abs(np.trace(mat).real - 1.0) > 1e-6 or np.max(np.abs(mat - mat.conj().T)) > 1e-8:
        raise ValueError("initial state must be a unit-trace Hermitian matrix")

    h_target = base_step if base_step is not None else schedule.tau / 4000.0
    pieces = _plan_pieces(schedule, h_target, samples_target)
    prev_success = None
    change = math.inf
    for refinement in range(max_refinements + 1):
        times, states = _integrate_density(mat, schedule, basis, pieces)
        final = states[-1]
        success = float(
            np.real(final[basis.transfer_target_index, basis.transfer_target_index])
            + np.real(final[basis.output_index, basis.output_index])
        )
        if prev_success is not None:
            change = abs(success - prev_success)
            if change < tol:
                wrapped = [DensityMatrix(matrix=s, basis=basis) for s in states]
                return Trajectory(
                    times=np.asarray(times),
                    states=wrapped,
                    basis=basis,
                    refinements=refinement,
                )
        prev_success = success
        pieces = [
            _Piece(p.start, p.length, 2 * p.n_steps, p.n_samples) for p in pieces
        ]
    raise IntegrationError(
        f"step halving did not converge below {tol} after {max_refinements} refinements",
        last_change=change,
        steps=sum(p.n_steps for p in pieces),
    )


# ---------------------------------------------------------------------------
# Pure-state fast path
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FastResult:
    """Final live populations plus the two accumulated sink weights."""

    populations: np.ndarray
    loss: float
    output: float
    success: float


def simulate_success(
    schedule: ProtocolSchedule,
    *,
    initial: Union[int, JointState, None] = None,
    h_target: float = 0.025,
) -> FastResult:
    """Propagate a pure initial basis state and return the final weights.

    Exact for this model (not an approximation): every jump is a rank-one map
    from a live state into an absorbing sink, so the live block evolves as a
    pure state under -iH - R/2 and each sink integrates its inflow. Agrees
    with :func:`evolve` to integration tolerance at a fraction of the cost.
    """
    cycle = schedule.cycle
    basis = enumerate_basis(cycle)
    n_live = basis.n_live
    idx = basis.initial_index if initial is None else (
        initial if isinstance(initial, (int, np.integer)) else basis.index_of(initial)
    )
    if idx >= n_live:
        raise ValueError("initial state must be a live basis state")

    h0 = static_hamiltonian(cycle, basis)[:n_live, :n_live]
    jumps = build_jumps(cycle, basis)
    coupling = laser_coupling_indices(cycle, basis)
    pairs = [p for p, _, _ in coupling]
    rows = np.array([r for _, r, _ in coupling], dtype=np.int64)
    cols = np.array([c for _, _, c in coupling], dtype=np.int64)
    decay_half = 0.5 * jumps.total_rate[:n_live]
    loss_rates = np.zeros(n_live)
    loss_rates[jumps.loss_sources] = jumps.loss_rates
    out_rates = np.zeros(n_live)
    out_rates[jumps.out_sources] = jumps.out_rates

    pieces = _plan_pieces(schedule, h_target, samples_target=1)
    step_h = []
    coeff_blocks = []
    for piece in pieces:
        h, coeffs = _piece_coefficients(schedule, piece, pairs)
        step_h.append(np.full(piece.n_steps, h))
        coeff_blocks.append(coeffs)
    hs = np.concatenate(step_h) if step_h else np.zeros(0)
    coeffs = (
        np.concatenate(coeff_blocks, axis=1)
        if coeff_blocks
        else np.zeros((len(pairs), 0, 3), dtype=complex)
    )

    psi0 = np.zeros(n_live, dtype=complex)
    psi0[idx] = 1.0
    psi, loss, output = _kernels.rk4_pure(
        psi0, np.ascontiguousarray(h0), rows, cols,
        np.ascontiguousarray(coeffs), decay_half, loss_rates, out_rates, hs,
    )
    pops = np.abs(psi) ** 2
    success = float(pops[basis.transfer_target_index] + output)
    return FastResult(
        populations=pops, loss=float(loss), output=float(output), success=success
    )
