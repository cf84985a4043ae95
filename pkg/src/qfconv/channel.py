"""Amplitude-damping channel figures of merit and communication rates.

The converter's failure probability p defines a qubit amplitude-damping
channel. Quantum capacity comes from maximizing coherent information over
input states, and the achievable communication rate divides capacity by the
protocol duration plus a photon input/output window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

_TINY = 1e-300


@dataclass(frozen=True)
class QubitState:
    """Input qubit written as excited population q and coherence c = <0|rho|1>."""

    q: float
    c: complex = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"population q={self.q} outside [0, 1]")
        if abs(self.c) ** 2 > self.q * (1.0 - self.q) + 1e-12:
            raise ValueError("coherence too large for a positive qubit state")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[1.0 - self.q, self.c], [np.conj(self.c), self.q]], dtype=complex
        )


def kraus_operators(p: float) -> tuple[np.ndarray, np.ndarray]:
    """Trace-preserving Kraus pair for damping probability p."""
    _check_p(p)
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - p)]], dtype=complex)
    k1 = np.array([[0.0, np.sqrt(p)], [0.0, 0.0]], dtype=complex)
    return k0, k1


def apply_channel(state: QubitState, p: float) -> QubitState:
    """Output state of the damping channel: (q, c) -> ((1-p) q, sqrt(1-p) c)."""
    _check_p(p)
    return QubitState(q=(1.0 - p) * state.q, c=np.sqrt(1.0 - p) * state.c)


def _check_p(p) -> None:
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("damping probability must lie in [0, 1]")


def _f(x):
    """f(x) = ((1+x)log2(1+x) + (1-x)log2(1-x)) / 2, the entropy complement
    of a qubit with Bloch radius x: S = 1 - f(x)."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    lo = 1.0 - x
    hi = 1.0 + x
    t_lo = np.where(lo > 0.0, lo * np.log2(np.maximum(lo, _TINY)), 0.0)
    t_hi = hi * np.log2(hi)
    return 0.5 * (t_lo + t_hi)


def coherent_information(q, c, p):
    """Closed-form coherent information of the damping channel (base 2).

    Broadcasts over numpy arrays. Equals S(output) - S(environment), with the
    output Bloch radius sqrt((2(p-1)q+1)^2 - 4(p-1)|c|^2) and the environment
    entropy taken from the 2x2 Gram matrix of the Kraus pair.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    _check_p(p)
    if np.any(q < -1e-12) or np.any(q > 1.0 + 1e-12):
        raise ValueError("population q must lie in [0, 1]")
    c2 = np.abs(np.asarray(c)) ** 2
    a = np.sqrt((2.0 * (p - 1.0) * q + 1.0) ** 2 - 4.0 * (p - 1.0) * c2)
    b = np.sqrt((1.0 - 2.0 * p * q) ** 2 + 4.0 * p * c2)
    return _f(b) - _f(a)


def _entropy(matrix: np.ndarray):
    """Von Neumann entropy in bits; batches over leading axes."""
    w = np.clip(np.linalg.eigvalsh(matrix), 0.0, 1.0)
    terms = np.where(w > 0.0, w * np.log2(np.maximum(w, _TINY)), 0.0)
    return -np.sum(terms, axis=-1)


def _dagger(stack: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(stack, -1, -2))


def coherent_information_direct(q, c, p):
    """Independent route: explicit Kraus action and the exchange-entropy matrix
    W_jk = Tr[K_j rho K_k^dagger], with entropies from eigendecompositions.
    Broadcasts over array inputs; scalars in, float out."""
    q = np.asarray(q, dtype=float)
    c = np.asarray(c, dtype=complex)
    p = np.asarray(p, dtype=float)
    _check_p(p)
    if np.any(q < 0.0) or np.any(q > 1.0):
        raise ValueError("population q must lie in [0, 1]")
    scalar = q.ndim == 0 and c.ndim == 0 and p.ndim == 0
    q, c, p = np.broadcast_arrays(q, c, p)
    shape = q.shape
    qf, cf, pf = q.reshape(-1), c.reshape(-1), p.reshape(-1)
    n = qf.size
    rho = np.empty((n, 2, 2), dtype=complex)
    rho[:, 0, 0] = 1.0 - qf
    rho[:, 0, 1] = cf
    rho[:, 1, 0] = np.conj(cf)
    rho[:, 1, 1] = qf
    k0 = np.zeros((n, 2, 2), dtype=complex)
    k0[:, 0, 0] = 1.0
    k0[:, 1, 1] = np.sqrt(1.0 - pf)
    k1 = np.zeros((n, 2, 2), dtype=complex)
    k1[:, 0, 1] = np.sqrt(pf)
    kraus = (k0, k1)
    out = k0 @ rho @ _dagger(k0) + k1 @ rho @ _dagger(k1)
    w = np.empty((n, 2, 2), dtype=complex)
    for j, kj in enumerate(kraus):
        for k, kk in enumerate(kraus):
            w[:, j, k] = np.trace(kj @ rho @ _dagger(kk), axis1=-2, axis2=-1)
    result = _entropy(out) - _entropy(w)
    return float(result.reshape(shape)[()]) if scalar else result.reshape(shape)


def _golden_max(fn, lo: float, hi: float, tol: float = 1e-10) -> tuple[float, float]:
    """Golden-section maximization on [lo, hi]; returns (x, fn(x))."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = fn(x1), fn(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = fn(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = fn(x1)
    x = (a + b) / 2.0
    return x, fn(x)


def capacity(p: float, resolution: float = 1e-3) -> float:
    """Quantum capacity of the damping channel: max over inputs of coherent
    information, clamped at zero.

    Diagonal inputs suffice; the maximization runs a q-grid at ``resolution``
    and refines the best cell by golden section.
    """
    _check_p(p)
    if not 0.0 < resolution <= 0.1:
        raise ValueError("resolution must lie in (0, 0.1]")
    n = int(round(1.0 / resolution)) + 1
    qs = np.linspace(0.0, 1.0, n)
    vals = coherent_information(qs, 0.0, p)
    i = int(np.argmax(vals))
    lo = qs[max(i - 1, 0)]
    hi = qs[min(i + 1, n - 1)]
    _, refined = _golden_max(lambda q: float(coherent_information(q, 0.0, p)), lo, hi)
    return max(float(vals[i]), refined, 0.0)


@dataclass(frozen=True)
class RatePoint:
    """One point of the rate curve: converter setting and resulting rate."""

    tau_ns: float
    loss_p: float
    capacity_qubits: float
    window_ns: float
    rate_Mqbps: float


def comm_rate(
    tau_ns: float,
    p: float,
    kappa: float,
    *,
    t_io_ns: float | None = None,
    resolution: float = 1e-3,
) -> RatePoint:
    """Communication rate for one protocol: capacity(p) per total window.

    The window is tau plus a photon input/output allowance, 10/kappa by
    default; a lossless cavity (kappa = 0) has no finite default and requires
    an explicit ``t_io_ns``.
    """
    if tau_ns <= 0.0:
        raise ValueError("tau must be positive")
    if t_io_ns is None:
        if kappa <= 0.0:
            raise ValueError(
                "kappa = 0 protocols need an explicit t_io_ns input/output window"
            )
        t_io_ns = 10.0 / kappa
    elif t_io_ns < 0.0:
        raise ValueError("t_io_ns must be nonnegative")
    window = tau_ns + t_io_ns
    cap = capacity(p, resolution)
    rate = cap / window * 1.0e3  # qubits/ns -> Mqubits/s
    return RatePoint(
        tau_ns=float(tau_ns),
        loss_p=float(p),
        capacity_qubits=float(cap),
        window_ns=float(window),
        rate_Mqbps=float(rate),
    )


@dataclass(frozen=True)
class RateScanResult:
    points: tuple[RatePoint, ...]
    best_index: int

    @property
    def best(self) -> RatePoint:
        return self.points[self.best_index]


def rate_scan(
    curve: Sequence[tuple[float, float]],
    kappa: float,
    *,
    t_io_ns: float | None = None,
    resolution: float = 1e-3,
) -> RateScanResult:
    """Rate curve over a loss-vs-duration scan given as (tau_ns, p) pairs."""
    if not curve:
        raise ValueError("rate scan needs at least one (tau, p) point")
    taus = [t for t, _ in curve]
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("tau values must be strictly increasing")
    points = tuple(
        comm_rate(t, p, kappa, t_io_ns=t_io_ns, resolution=resolution)
        for t, p in curve
    )
    best = int(np.argmax([pt.rate_Mqbps for pt in points]))
    return RateScanResult(points=points, best_index=best)
