"""Compiled inner loop for the pure-state propagator.

The reduced model has every jump operator mapping a live state into one of
two absorbing sinks, so a pure initial state stays pure on the live block
under the non-Hermitian drift -iH - R/2 while the sink populations
accumulate as quadratures. This kernel advances that split form with
classical RK4 over precomputed per-step laser coefficients.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def rk4_pure(psi0, h0, rows, cols, coeffs, decay_half, loss_rates, out_rates, hs):
    """Advance psi through len(hs) RK4 steps; return (psi, loss, output).

    h0: static Hermitian couplings on the live block.
    coeffs[l, i, s]: complex laser coefficient for line l at step i, substep
    s in (start, midpoint, end).
    decay_half[a]: half the total outflow rate of live state a.
    loss_rates / out_rates[a]: rates feeding the two sinks from state a.
    """
    d = psi0.shape[0]
    n = hs.shape[0]
    n_lines = rows.shape[0]
    psi = psi0.copy()
    loss = 0.0
    out = 0.0
    k_psi = np.empty((4, d), np.complex128)
    k_loss = np.empty(4, np.float64)
    k_out = np.empty(4, np.float64)
    y = np.empty(d, np.complex128)
    for i in range(n):
        h = hs[i]
        for stage in range(4):
            if stage == 0:
                sub = 0
                for a in range(d):
                    y[a] = psi[a]
            elif stage == 1:
                sub = 1
                for a in range(d):
                    y[a] = psi[a] + 0.5 * h * k_psi[0, a]
            elif stage == 2:
                sub = 1
                for a in range(d):
                    y[a] = psi[a] + 0.5 * h * k_psi[1, a]
            else:
                sub = 2
                for a in range(d):
                    y[a] = psi[a] + h * k_psi[2, a]
            for a in range(d):
                acc = 0.0 + 0.0j
                for b in range(d):
                    acc += h0[a, b] * y[b]
                k_psi[stage, a] = acc
            for l in range(n_lines):
                c = coeffs[l, i, sub]
                a = rows[l]
                b = cols[l]
                k_psi[stage, a] += c * y[b]
                k_psi[stage, b] += np.conj(c) * y[a]
            dl = 0.0
            do = 0.0
            for a in range(d):
                k_psi[stage, a] = -1j * k_psi[stage, a] - decay_half[a] * y[a]
                w = y[a].real * y[a].real + y[a].imag * y[a].imag
                dl += loss_rates[a] * w
                do += out_rates[a] * w
            k_loss[stage] = dl
            k_out[stage] = do
        for a in range(d):
            psi[a] = psi[a] + (h / 6.0) * (
                k_psi[0, a] + 2.0 * k_psi[1, a] + 2.0 * k_psi[2, a] + k_psi[3, a]
            )
        loss += (h / 6.0) * (k_loss[0] + 2.0 * k_loss[1] + 2.0 * k_loss[2] + k_loss[3])
        out += (h / 6.0) * (k_out[0] + 2.0 * k_out[1] + 2.0 * k_out[2] + k_out[3])
    return psi, loss, out
