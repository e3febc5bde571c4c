"""Fixed-step RK4 kernel for the gauge-transformed cycle equation.

The equation of motion for the occupation amplitudes on the ring is

    i dc_n/dt = k_n c_{n+1} e^{+i Phi(t)} + k_{n-1} c_{n-1} e^{-i Phi(t)},

with Phi(t) = gamma*sin(t) and cyclic neighbours.  The kernel advances a
whole block of state columns at once; columns never couple, so any column
partition reproduces the serial result bit for bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _derivative(c, kb, kp, phase, out):
    n_sites, n_cols = c.shape
    phase_c = np.conj(phase)
    for n in range(n_sites):
        up = n + 1 if n + 1 < n_sites else 0
        dn = n - 1 if n > 0 else n_sites - 1
        a = -1j * phase * kb[n]
        b = -1j * phase_c * kp[n]
        for j in range(n_cols):
            out[n, j] = a * c[up, j] + b * c[dn, j]


@njit(cache=True)
def rk4_evolve(bonds, gamma, steps, c0, t_start, t_end):
    """Advance c0 (shape (N, M)) from t_start to t_end in ``steps`` RK4 steps.

    The gauge phase gamma*sin(t) is evaluated exactly at every stage time.
    Returns a fresh array; c0 is not modified.
    """
    n_sites, n_cols = c0.shape
    kb = bonds.astype(np.complex128)
    kp = np.empty(n_sites, dtype=np.complex128)
    for n in range(n_sites):
        kp[n] = bonds[n - 1] if n > 0 else bonds[n_sites - 1]
    h = (t_end - t_start) / steps
    c = c0.copy()
    k1 = np.empty_like(c)
    k2 = np.empty_like(c)
    k3 = np.empty_like(c)
    k4 = np.empty_like(c)
    tmp = np.empty_like(c)
    for s in range(steps):
        t = t_start + s * h
        ph1 = np.exp(1j * gamma * np.sin(t))
        ph2 = np.exp(1j * gamma * np.sin(t + 0.5 * h))
        ph3 = np.exp(1j * gamma * np.sin(t + h))
        _derivative(c, kb, kp, ph1, k1)
        for n in range(n_sites):
            for j in range(n_cols):
                tmp[n, j] = c[n, j] + 0.5 * h * k1[n, j]
        _derivative(tmp, kb, kp, ph2, k2)
        for n in range(n_sites):
            for j in range(n_cols):
                tmp[n, j] = c[n, j] + 0.5 * h * k2[n, j]
        _derivative(tmp, kb, kp, ph2, k3)
        for n in range(n_sites):
            for j in range(n_cols):
                tmp[n, j] = c[n, j] + h * k3[n, j]
        _derivative(tmp, kb, kp, ph3, k4)
        for n in range(n_sites):
            for j in range(n_cols):
                c[n, j] = c[n, j] + (h / 6.0) * (k1[n, j] + 2.0 * (k2[n, j] + k3[n, j]) + k4[n, j])
    return c
