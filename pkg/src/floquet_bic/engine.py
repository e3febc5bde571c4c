"""One-cycle propagator assembly and Floquet decomposition.

The one-period propagator S maps amplitudes at tau = 0 to amplitudes at
tau = T = 2*pi; its eigenphases give the quasienergies

    eps = -arg(lambda) / T   folded to (-1/2, 1/2]   (units of omega)

and its eigenvectors are the Floquet modes at the tau = 0 reference time
(start of the cosine drive, where the gauge phase vanishes).
"""

from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import j0 as _bessel_j0

from ._kernel import rk4_evolve
from .errors import IntegrationError, NumericalGateError
from .lattice import DriveSpec, LatticeSpec, SiteAmplitudes, participation_ratio

PERIOD = 2.0 * np.pi

#: gates used by the engine (all in omega = 1 units)
NORM_DRIFT_GATE = 1e-8
UNITARITY_GATE = 1e-8
#: quasienergy gap below which eigenvectors are treated as a degenerate
#: subspace and disentangled by the localization rotation
DEGENERACY_GAP = 1e-7
#: quasienergy tie window for the sort order (higher R first within a tie)
SORT_TIE = 1e-9


def default_steps_per_period(drive: DriveSpec) -> int:
    """4096 steps per period, scaled up with kappa/omega to hold the norm gate."""
    return 4096 * max(1, math.ceil(drive.kappa_over_omega))


def fold_quasienergy(value):
    """Fold a real number (or array) into the zone (-1/2, 1/2]."""
    folded = np.asarray(value, dtype=float)
    folded = folded - np.ceil(folded - 0.5)
    if np.ndim(value) == 0:
        return float(folded)
    return folded


@dataclass(frozen=True)
class Propagator:
    """One-cycle propagator S with S[n, m] = c_n(T) from c_l(0) = delta_{l,m}."""

    matrix: np.ndarray
    unitarity_residual: float
    lattice: LatticeSpec
    drive: DriveSpec
    steps_per_period: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("propagator must be a square matrix")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class FloquetSpectrum:
    """Quasienergies in (-1/2, 1/2] with matched modes at tau = 0.

    Sorted ascending in quasienergy; within ties of 1e-9 the more localized
    mode (higher participation ratio) comes first.  ``residuals[m]`` is
    ||S v_m - exp(-i eps_m T) v_m||_2.
    """

    quasienergies: np.ndarray
    modes: list[SiteAmplitudes]
    residuals: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.quasienergies.size

    def mode_matrix(self) -> np.ndarray:
        """Modes as columns of an (N, N) complex matrix."""
        return np.column_stack([m.values for m in self.modes])


def _as_column_block(initial: np.ndarray) -> np.ndarray:
    c = np.asarray(initial, dtype=complex)
    if c.ndim == 1:
        c = c[:, None]
    return np.ascontiguousarray(c)


def integrate_cycle(
    lattice: LatticeSpec,
    drive: DriveSpec,
    initial: SiteAmplitudes,
    steps_per_period: int | None = None,
    n_samples: int = 9,
) -> list[SiteAmplitudes]:
    """Integrate the cycle equation over one period, sampling uniformly.

    Returns ``n_samples`` states at times k*T/(n_samples-1), k = 0..n_samples-1,
    endpoint included.  The initial state must have unit norm; a norm drift
    beyond 1e-8 aborts with a step-size diagnostic.
    """
    steps = default_steps_per_period(drive) if steps_per_period is None else int(steps_per_period)
    if steps < 256:
        raise ValueError(f"steps_per_period must be >= 256, got {steps}")
    if n_samples < 2:
        raise ValueError("need at least the initial and final samples")
    if (steps % (n_samples - 1)) != 0:
        raise ValueError(f"n_samples - 1 = {n_samples - 1} must divide steps_per_period = {steps}")
    if abs(np.linalg.norm(initial.values) - 1.0) > 1e-9:
        raise ValueError("initial state must have unit norm")

    chunk = steps // (n_samples - 1)
    c = _as_column_block(initial.values)
    out = [SiteAmplitudes(c[:, 0], time_tag=0.0)]
    for k in range(n_samples - 1):
        t0 = PERIOD * k / (n_samples - 1)
        t1 = PERIOD * (k + 1) / (n_samples - 1)
        c = rk4_evolve(lattice.hoppings, drive.gamma, chunk, c, t0, t1)
        out.append(SiteAmplitudes(c[:, 0], time_tag=t1))
    drift = abs(np.linalg.norm(c[:, 0]) - 1.0)
    if drift > NORM_DRIFT_GATE:
        raise IntegrationError(
            f"norm drifted by {drift:.3e} over one period at {steps} steps/period; "
            f"increase steps_per_period (try {2 * steps})"
        )
    return out


def _integrate_columns(bonds: np.ndarray, gamma: float, steps: int, lo: int, hi: int) -> np.ndarray:
    n = bonds.size
    block = np.zeros((n, hi - lo), dtype=complex)
    for j in range(hi - lo):
        block[lo + j, j] = 1.0
    return rk4_evolve(bonds, gamma, steps, block, 0.0, PERIOD)


def _column_task(args):
    bonds, gamma, steps, lo, hi = args
    return lo, _integrate_columns(bonds, gamma, steps, lo, hi)


def build_propagator(
    lattice: LatticeSpec,
    drive: DriveSpec,
    steps_per_period: int | None = None,
    jobs: int = 1,
) -> Propagator:
    """Assemble S column by column from unit-vector initial conditions.

    Columns are independent, so ``jobs`` > 1 splits them over processes;
    the assembly order is fixed by column index and the result is identical
    to the serial run.
    """
    steps = default_steps_per_period(drive) if steps_per_period is None else int(steps_per_period)
    if steps < 256:
        raise ValueError(f"steps_per_period must be >= 256, got {steps}")
    n = lattice.n_sites
    bonds = np.asarray(lattice.hoppings, dtype=float)

    if jobs <= 1 or n < 4 * jobs:
        matrix = _integrate_columns(bonds, drive.gamma, steps, 0, n)
    else:
        bounds = np.linspace(0, n, jobs + 1).astype(int)
        tasks = [(bonds, drive.gamma, steps, int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        matrix = np.empty((n, n), dtype=complex)
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            for lo, block in pool.map(_column_task, tasks):
                matrix[:, lo : lo + block.shape[1]] = block

    column_norms = np.linalg.norm(matrix, axis=0)
    drift = np.abs(column_norms - 1.0)
    worst = int(np.argmax(drift))
    if drift[worst] > NORM_DRIFT_GATE:
        raise IntegrationError(
            f"column {worst} norm drifted by {drift[worst]:.3e} at {steps} steps/period; "
            f"increase steps_per_period (try {2 * steps})"
        )
    residual = float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(n))))
    return Propagator(
        matrix=matrix,
        unitarity_residual=residual,
        lattice=lattice,
        drive=drive,
        steps_per_period=steps,
    )


def _localization(vectors: np.ndarray) -> float:
    """Sum over columns of sum_n |v_n|^4 (the quantity the rotation maximizes)."""
    return float(np.sum(np.abs(vectors) ** 4))


def _best_pair_rotation(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Maximize sum|x'|^4 + sum|y'|^4 over 2x2 unitary mixes of (x, y).

    x' = cos(theta) x + e^{i phi} sin(theta) y,
    y' = -e^{-i phi} sin(theta) x + cos(theta) y.
    Returns (theta, phi, gain).  Coarse grid plus local polish; the objective
    is a low-order trig polynomial so this resolves the optimum reliably.
    """
    base = np.sum(np.abs(x) ** 4) + np.sum(np.abs(y) ** 4)

    thetas = np.linspace(0.0, np.pi / 2.0, 25, endpoint=False)
    phis = np.linspace(0.0, 2.0 * np.pi, 33, endpoint=False)
    ct, st = np.cos(thetas)[:, None], np.sin(thetas)[:, None]
    eph = np.exp(1j * phis)[None, :]
    # f[a, b] for theta_a, phi_b, vectorized over sites
    xa = ct[..., None] * x[None, None, :] + (eph * st)[..., None] * y[None, None, :]
    ya = -(np.conj(eph) * st)[..., None] * x[None, None, :] + ct[..., None] * y[None, None, :]
    f = np.sum(np.abs(xa) ** 4, axis=-1) + np.sum(np.abs(ya) ** 4, axis=-1)
    a, b = np.unravel_index(int(np.argmax(f)), f.shape)
    theta, phi = float(thetas[a]), float(phis[b])

    def objective(theta, phi):
        c, s, e = np.cos(theta), np.sin(theta), np.exp(1j * phi)
        xn = c * x + e * s * y
        yn = -np.conj(e) * s * x + c * y
        return float(np.sum(np.abs(xn) ** 4) + np.sum(np.abs(yn) ** 4))

    # golden-ratio-free local polish: coordinate refinement on a shrinking box
    dt, dp = thetas[1] - thetas[0], phis[1] - phis[0]
    best = objective(theta, phi)
    for _ in range(60):
        improved = False
        for cand_t, cand_p in (
            (theta + dt, phi), (theta - dt, phi), (theta, phi + dp), (theta, phi - dp),
        ):
            val = objective(cand_t, cand_p)
            if val > best + 1e-15:
                theta, phi, best, improved = cand_t, cand_p, val, True
        if not improved:
            dt *= 0.5
            dp *= 0.5
            if dt < 1e-9 and dp < 1e-9:
                break
    return theta, phi, best - base


def _rotate_degenerate_subspace(vectors: np.ndarray) -> np.ndarray:
    """Disentangle a (near-)degenerate eigenvector cluster deterministically.

    Orthonormalizes the cluster, then applies pairwise complex rotations that
    maximize sum_n |v_n|^4 until a full sweep improves it by less than 1e-12.
    Recovers an unmixed localized eigenvector when a bound state is buried in
    a finite-size continuum shell.
    """
    q, _ = np.linalg.qr(vectors)
    size = q.shape[1]
    for _ in range(50):
        gain_total = 0.0
        for i in range(size):
            for j in range(i + 1, size):
                theta, phi, gain = _best_pair_rotation(q[:, i], q[:, j])
                if gain > 0.0:
                    c, s, e = np.cos(theta), np.sin(theta), np.exp(1j * phi)
                    xi = c * q[:, i] + e * s * q[:, j]
                    yj = -np.conj(e) * s * q[:, i] + c * q[:, j]
                    q[:, i], q[:, j] = xi, yj
                    gain_total += gain
        if gain_total < 1e-12:
            break
    # most localized first so the cluster ordering is reproducible
    order = np.argsort(-np.sum(np.abs(q) ** 4, axis=0), kind="stable")
    return q[:, order]


def _degenerate_clusters(eps_sorted: np.ndarray) -> list[list[int]]:
    """Group sorted quasienergies into clusters with circular gaps < 1e-7."""
    n = eps_sorted.size
    if n == 0:
        return []
    gaps = np.diff(eps_sorted)
    links = gaps < DEGENERACY_GAP
    clusters: list[list[int]] = [[0]]
    for i in range(1, n):
        if links[i - 1]:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    # the zone is a circle: (eps[0] + 1) - eps[-1] can also be a degenerate gap
    if len(clusters) > 1 and (eps_sorted[0] + 1.0) - eps_sorted[-1] < DEGENERACY_GAP:
        clusters[0] = clusters.pop() + clusters[0]
    return clusters


def _fix_phase(vector: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude entry is real positive."""
    k = int(np.argmax(np.abs(vector)))
    phase = vector[k] / abs(vector[k]) if vector[k] != 0 else 1.0
    return vector / phase


def floquet_decompose(prop: Propagator, unitarity_gate: float = UNITARITY_GATE) -> FloquetSpectrum:
    """Quasienergies and Floquet modes from the eigen-decomposition of S.

    Eigenvalues must sit on the unit circle within the unitarity gate.
    Nearly degenerate eigenvector subspaces (quasienergy gaps < 1e-7) are
    replaced by their localization-maximizing rotation, which recovers
    deterministic representatives when bound and extended states collide.
    """
    if prop.unitarity_residual > unitarity_gate:
        raise NumericalGateError(
            "unitarity",
            f"propagator residual {prop.unitarity_residual:.3e} exceeds gate {unitarity_gate:.1e}; "
            "raise steps_per_period",
        )
    try:
        values, vectors = np.linalg.eig(prop.matrix)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure path
        cond = np.linalg.cond(prop.matrix)
        raise NumericalGateError("eigensolver", f"eigendecomposition failed (cond(S) = {cond:.3e})") from exc

    circle_err = float(np.max(np.abs(np.abs(values) - 1.0)))
    if circle_err > unitarity_gate:
        raise NumericalGateError(
            "spectral-circle", f"eigenvalue modulus off the unit circle by {circle_err:.3e}"
        )

    eps = -np.angle(values) / PERIOD
    eps[eps <= -0.5] += 1.0  # branch (-1/2, 1/2]

    order = np.argsort(eps, kind="stable")
    eps = eps[order]
    vectors = vectors[:, order]

    for cluster in _degenerate_clusters(eps):
        if len(cluster) > 1:
            vectors[:, cluster] = _rotate_degenerate_subspace(vectors[:, cluster])

    vectors = vectors / np.linalg.norm(vectors, axis=0)

    # ascending quasienergy; ties of < 1e-9 broken by descending localization
    ratios = np.array([participation_ratio(vectors[:, m]) for m in range(eps.size)])
    tie_rank = np.zeros(eps.size)
    start = 0
    for m in range(1, eps.size + 1):
        if m == eps.size or eps[m] - eps[start] > SORT_TIE:
            group = np.arange(start, m)
            tie_rank[group[np.argsort(-ratios[group], kind="stable")]] = np.arange(group.size)
            start = m
    final = np.lexsort((tie_rank, np.round(eps / SORT_TIE).astype(np.int64)))
    eps = eps[final]
    vectors = vectors[:, final]

    lam = np.exp(-1j * PERIOD * eps)
    residuals = np.linalg.norm(prop.matrix @ vectors - lam[None, :] * vectors, axis=0)
    modes = [SiteAmplitudes(_fix_phase(vectors[:, m]), time_tag=0.0) for m in range(eps.size)]
    return FloquetSpectrum(quasienergies=eps, modes=modes, residuals=residuals)


def sample_mode_cycle(
    lattice: LatticeSpec,
    drive: DriveSpec,
    mode: SiteAmplitudes,
    samples: int,
    steps_per_period: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Occupation maps |c_n(tau)|^2 and R(tau) of a Floquet mode over one cycle.

    Returns (times, maps, ratios) with ``samples + 1`` rows, endpoint included.
    The occupation map must return to its tau = 0 value at tau = T; a
    violation above 1e-4 means the mode does not belong to this propagator.
    """
    if samples < 1:
        raise ValueError("need at least one sample interval")
    steps = default_steps_per_period(drive) if steps_per_period is None else int(steps_per_period)
    chunk = max(256, int(np.ceil(steps / samples)))
    c = _as_column_block(mode.values / np.linalg.norm(mode.values))

    times = np.empty(samples + 1)
    maps = np.empty((samples + 1, lattice.n_sites))
    ratios = np.empty(samples + 1)
    times[0] = 0.0
    maps[0] = np.abs(c[:, 0]) ** 2
    ratios[0] = participation_ratio(c[:, 0])
    for k in range(samples):
        t0 = PERIOD * k / samples
        t1 = PERIOD * (k + 1) / samples
        c = rk4_evolve(lattice.hoppings, drive.gamma, chunk, c, t0, t1)
        times[k + 1] = t1
        maps[k + 1] = np.abs(c[:, 0]) ** 2
        ratios[k + 1] = participation_ratio(c[:, 0])
    violation = float(np.max(np.abs(maps[-1] - maps[0])))
    if violation > 1e-4:
        raise ValueError(
            f"occupation map is not cycle-periodic (violation {violation:.3e}); "
            "the state is not a Floquet mode of this lattice/drive pair"
        )
    return times, maps, ratios


def homogeneous_dispersion(p: float, gamma: float, kappa_over_omega: float) -> float:
    """Quasienergy branch 2*kappa*J0(Gamma)*cos(p) of the driven uniform ring.

    Pre-folding value in units of omega; the drive renormalizes the static
    bandwidth by J0(Gamma) and collapses it at the J0 zeros.
    """
    return float(2.0 * kappa_over_omega * _bessel_j0(gamma) * np.cos(p))


def scattered_state_phase(p: float, drive: DriveSpec, tau: float) -> float:
    """Accumulated phase Theta(p, tau) = Phi(tau) + 2k * int_0^tau cos(p - Phi(t')) dt'.

    Evaluated by adaptive quadrature to better than 1e-10 absolute error.
    Theta(p, 0) = 0 and Theta(p, T) = eps(p)*T modulo 2*pi.
    """
    gamma = drive.gamma
    kappa = drive.kappa_over_omega
    integral, estimate = quad(
        lambda t: np.cos(p - gamma * np.sin(t)), 0.0, tau, epsabs=1e-12, epsrel=1e-12, limit=400
    )
    if estimate > 1e-10:
        raise NumericalGateError("quadrature", f"phase integral error estimate {estimate:.2e} above 1e-10")
    return float(drive.phase(tau) + 2.0 * kappa * integral)
