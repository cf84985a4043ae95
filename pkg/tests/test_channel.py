"""Damping-channel quantities: two independent routes must agree."""

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from qfconv.channel import (
    QubitState,
    apply_channel,
    capacity,
    coherent_information,
    coherent_information_direct,
    comm_rate,
    kraus_operators,
    rate_scan,
)


def random_inputs(rng, n):
    q = rng.uniform(0.0, 1.0, size=n)
    frac = rng.uniform(0.0, 1.0, size=n)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=n)
    c = frac * np.sqrt(q * (1.0 - q)) * np.exp(1j * phase)
    p = rng.uniform(0.0, 1.0, size=n)
    return q, c, p


def test_kraus_operators_are_trace_preserving():
    for p in (0.0, 0.17, 0.5, 0.99, 1.0):
        k0, k1 = kraus_operators(p)
        total = k0.conj().T @ k0 + k1.conj().T @ k1
        assert np.allclose(total, np.eye(2), atol=1e-15)


def test_apply_channel_example():
    out = apply_channel(QubitState(q=0.5, c=0.5), 0.36)
    assert out.q == pytest.approx(0.32)
    assert out.c == pytest.approx(0.4)


def test_apply_channel_matches_kraus_action():
    rng = np.random.default_rng(5)
    for _ in range(100):
        q, c, p = (x.item() for x in random_inputs(rng, 1))
        state = QubitState(q=q, c=c)
        k0, k1 = kraus_operators(p)
        rho_out = k0 @ state.matrix @ k0.conj().T + k1 @ state.matrix @ k1.conj().T
        shortcut = apply_channel(state, p)
        assert np.allclose(shortcut.matrix, rho_out, atol=1e-14)


def test_qubit_state_validation():
    with pytest.raises(ValueError):
        QubitState(q=1.2)
    with pytest.raises(ValueError):
        QubitState(q=-0.1)
    with pytest.raises(ValueError):
        QubitState(q=0.5, c=0.6)
    QubitState(q=0.5, c=0.5)  # boundary coherence is allowed


def test_damping_probability_validation():
    with pytest.raises(ValueError):
        kraus_operators(-0.01)
    with pytest.raises(ValueError):
        apply_channel(QubitState(q=0.3), 1.01)
    with pytest.raises(ValueError):
        coherent_information(0.3, 0.0, 1.5)
    with pytest.raises(ValueError):
        capacity(-0.2)


def test_closed_form_matches_direct_route():
    rng = np.random.default_rng(1234)
    q, c, p = random_inputs(rng, 10_000)
    closed = coherent_information(q, c, p)
    direct = coherent_information_direct(q, c, p)
    assert np.max(np.abs(closed - direct)) < 1e-10
    # the batched route agrees with its own scalar evaluation
    for i in (0, 17, 991):
        assert coherent_information_direct(q[i], c[i], p[i]) == pytest.approx(
            direct[i], abs=1e-14)


def test_closed_form_edge_cases():
    assert coherent_information(1.0, 0.0, 0.3) == pytest.approx(0.0, abs=1e-12)
    assert coherent_information(0.5, 0.0, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert coherent_information(0.0, 0.0, 0.7) == pytest.approx(0.0, abs=1e-12)
    # p = 1 hands a pure input to the environment intact: both entropies vanish
    pure_c = np.sqrt(0.4 * 0.6)
    assert coherent_information(0.4, pure_c, 1.0) == pytest.approx(0.0, abs=1e-9)
    # for a mixed input the environment keeps the input entropy
    mixed = coherent_information(0.4, 0.3, 1.0)
    assert mixed == pytest.approx(coherent_information_direct(0.4, 0.3, 1.0),
                                  abs=1e-12)
    assert mixed < 0.0


def test_capacity_endpoints():
    assert capacity(0.0) == pytest.approx(1.0, abs=1e-6)
    for p in (0.5, 0.6, 0.8, 1.0):
        assert capacity(p) == pytest.approx(0.0, abs=1e-6)


def test_capacity_nonincreasing():
    ps = np.linspace(0.0, 1.0, 200)
    caps = np.array([capacity(p) for p in ps])
    assert np.all(np.diff(caps) <= 1e-9)
    assert np.all(caps >= 0.0)


def test_capacity_against_bounded_scalar_maximizer():
    for p in (0.05, 0.15, 0.25, 0.35, 0.45):
        res = minimize_scalar(
            lambda q: -coherent_information_direct(q, 0.0, p),
            bounds=(0.0, 1.0), method="bounded",
            options={"xatol": 1e-12},
        )
        assert capacity(p) == pytest.approx(-res.fun, abs=1e-9)


def test_diagonal_inputs_attain_the_maximum():
    qs = np.linspace(0.0, 1.0, 81)
    fracs = np.linspace(0.0, 1.0, 21)
    for p in (0.1, 0.3):
        best = 0.0
        for q in qs:
            for frac in fracs:
                c = frac * np.sqrt(q * (1.0 - q))
                best = max(best, coherent_information_direct(q, c, p))
        assert capacity(p) >= best - 1e-9


def test_comm_rate_window_and_units():
    kappa = 2.5
    pt = comm_rate(100.0, 0.1, kappa)
    assert pt.window_ns == pytest.approx(100.0 + 10.0 / kappa)
    assert pt.rate_Mqbps == pytest.approx(pt.capacity_qubits / pt.window_ns * 1e3)
    explicit = comm_rate(100.0, 0.1, 0.0, t_io_ns=4.0)
    assert explicit.window_ns == pytest.approx(104.0)


def test_comm_rate_validation():
    with pytest.raises(ValueError):
        comm_rate(0.0, 0.1, 2.5)
    with pytest.raises(ValueError):
        comm_rate(100.0, 0.1, 0.0)  # lossless cavity needs an explicit window
    with pytest.raises(ValueError):
        comm_rate(100.0, 0.1, 2.5, t_io_ns=-1.0)
    with pytest.raises(ValueError):
        comm_rate(100.0, 1.2, 2.5)


def test_rate_scan_picks_the_best_point():
    curve = [(60.0, 0.45), (80.0, 0.2), (100.0, 0.08), (150.0, 0.04),
             (250.0, 0.03)]
    result = rate_scan(curve, kappa=2.5)
    rates = [pt.rate_Mqbps for pt in result.points]
    assert result.best_index == int(np.argmax(rates))
    assert result.best.rate_Mqbps == max(rates)
    assert [pt.tau_ns for pt in result.points] == [t for t, _ in curve]
    # longer windows with equal capacity always lose
    assert result.points[-1].rate_Mqbps < result.points[result.best_index].rate_Mqbps


def test_rate_scan_validation():
    with pytest.raises(ValueError):
        rate_scan([], kappa=2.5)
    with pytest.raises(ValueError):
        rate_scan([(100.0, 0.1), (90.0, 0.2)], kappa=2.5)
