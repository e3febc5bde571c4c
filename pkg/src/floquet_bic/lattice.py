"""Lattice and drive descriptions plus basic state utilities.

Conventions used throughout the package:

- The drive frequency sets the units: omega = 1, so the drive period is
  T = 2*pi and every hopping rate is the dimensionless ratio rate/omega.
- Sites carry internal indices 0..N-1.  The defect is centred on the ring,
  at internal index (N-1)/2, which is reported to the outside world as
  site 0 of the symmetric convention n in [-(N-1)/2, +(N-1)/2].
- Bond i couples sites i and i+1 (cyclically).  The defect profile carries
  a weakened rate rho on the two bonds adjacent to the central site and a
  uniform rate kappa everywhere else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np


@dataclass(frozen=True)
class LatticeSpec:
    """A tight-binding ring with per-bond hopping rates (units of omega).

    ``hoppings[i]`` couples sites i and (i+1) % n_sites.  ``defect_center``
    is the internal index of the site reported as 0 in symmetric indexing.
    ``rho_over_kappa``/``kappa_over_omega`` record the builder arguments so a
    spec can be serialized and rebuilt bit-for-bit.
    """

    n_sites: int
    hoppings: np.ndarray
    defect_center: int
    boundary: str = "periodic"
    rho_over_kappa: float | None = None
    kappa_over_omega: float | None = None

    def __post_init__(self):
        if self.boundary != "periodic":
            raise ValueError(f"unsupported boundary {self.boundary!r}; only 'periodic' is implemented")
        hop = np.asarray(self.hoppings, dtype=float).copy()
        if hop.ndim != 1 or hop.size != self.n_sites:
            raise ValueError(f"need one bond per site under periodic boundary: got {hop.size} bonds for {self.n_sites} sites")
        if not np.all(np.isfinite(hop)) or np.any(hop < 0.0):
            raise ValueError("hopping rates must be finite and non-negative")
        hop.setflags(write=False)
        object.__setattr__(self, "hoppings", hop)
        if not 0 <= self.defect_center < self.n_sites:
            raise ValueError("defect_center outside the lattice")

    def paper_indices(self) -> np.ndarray:
        """Symmetric site indices n with the defect site at n = 0."""
        return np.arange(self.n_sites) - self.defect_center

    def site_of(self, paper_index: int) -> int:
        """Internal index of a symmetric-convention site."""
        i = paper_index + self.defect_center
        if not 0 <= i < self.n_sites:
            raise ValueError(f"site {paper_index} outside the lattice")
        return i


@dataclass(frozen=True)
class DriveSpec:
    """Sinusoidal forcing, F(t) = F0*cos(t) in omega = 1 units.

    ``gamma`` is the dimensionless amplitude a*F0/omega; the accumulated
    gauge phase is Phi(tau) = gamma*sin(tau).  The period is fixed at 2*pi.
    """

    gamma: float
    kappa_over_omega: float
    period: float = field(default=2.0 * np.pi, init=False)

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma < 0.0:
            raise ValueError("gamma must be finite and >= 0")
        if not np.isfinite(self.kappa_over_omega) or self.kappa_over_omega <= 0.0:
            raise ValueError("kappa_over_omega must be finite and > 0")

    def phase(self, tau):
        """Gauge phase Phi(tau) = gamma*sin(tau)."""
        return self.gamma * np.sin(tau)


@dataclass(frozen=True)
class SiteAmplitudes:
    """Complex site amplitudes c_n at a given normalized time."""

    values: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).copy()
        if v.ndim != 1:
            raise ValueError("amplitudes must be a 1-D array")
        if not np.all(np.isfinite(v.view(float))):
            raise ValueError("amplitudes must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_sites(self) -> int:
        return self.values.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.values) ** 2


def build_defect_lattice(n_sites: int, rho_over_kappa: float, kappa_over_omega: float) -> LatticeSpec:
    """Ring of ``n_sites`` with two weakened bonds around the central site.

    Bonds -1 and 0 (symmetric convention) carry rho = rho_over_kappa * kappa,
    all others carry kappa = kappa_over_omega.  ``n_sites`` must be odd and
    at least 5 so the defect is centred; rho_over_kappa must lie in (0, 1]
    (stronger-than-bulk defect bonds are rejected as untested territory).
    """
    if n_sites < 5 or n_sites % 2 == 0:
        raise ValueError(f"n_sites must be odd and >= 5, got {n_sites}")
    if not 0.0 < rho_over_kappa <= 1.0:
        raise ValueError(f"rho_over_kappa must be in (0, 1], got {rho_over_kappa}")
    if kappa_over_omega <= 0.0 or not np.isfinite(kappa_over_omega):
        raise ValueError(f"kappa_over_omega must be positive and finite, got {kappa_over_omega}")
    center = (n_sites - 1) // 2
    hoppings = np.full(n_sites, float(kappa_over_omega))
    rho = rho_over_kappa * kappa_over_omega
    hoppings[center - 1] = rho
    hoppings[center] = rho
    return LatticeSpec(
        n_sites=n_sites,
        hoppings=hoppings,
        defect_center=center,
        rho_over_kappa=float(rho_over_kappa),
        kappa_over_omega=float(kappa_over_omega),
    )


def participation_ratio(state: SiteAmplitudes | np.ndarray) -> float:
    """R = (sum |c|^2)^2 / sum |c|^4: 1 for a single site, N for a flat state.

    Invariant under global rescaling and global phase of the amplitudes.
    """
    values = state.values if isinstance(state, SiteAmplitudes) else np.asarray(state)
    p = np.abs(values) ** 2
    total = p.sum()
    if total <= 0.0:
        raise ValueError("participation ratio of a zero-norm state is undefined")
    return float(total * total / np.sum(p * p))


def undriven_spectrum(lattice: LatticeSpec) -> list[tuple[float, SiteAmplitudes]]:
    """Eigenpairs of the static hopping matrix, sorted ascending in energy.

    The static Hamiltonian is the real symmetric matrix with H[i, i+1] =
    hoppings[i] on the ring.  For the defect-free ring the energies are the
    circulant values 2*kappa*cos(2*pi*m/N).
    """
    n = lattice.n_sites
    h = np.zeros((n, n))
    for i in range(n):
        j = (i + 1) % n
        h[i, j] += lattice.hoppings[i]
        h[j, i] += lattice.hoppings[i]
    energies, vectors = np.linalg.eigh(h)
    return [(float(energies[m]), SiteAmplitudes(vectors[:, m], time_tag=0.0)) for m in range(n)]


def config_to_json(lattice: LatticeSpec, drive: DriveSpec) -> str:
    """Canonical JSON run configuration for a defect lattice + drive pair."""
    if lattice.rho_over_kappa is None or lattice.kappa_over_omega is None:
        raise ValueError("only builder-produced lattices have a canonical JSON form")
    doc = {
        "n_sites": lattice.n_sites,
        "rho_over_kappa": lattice.rho_over_kappa,
        "kappa_over_omega": lattice.kappa_over_omega,
        "gamma": drive.gamma,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def config_from_json(text: str) -> tuple[LatticeSpec, DriveSpec]:
    """Inverse of :func:`config_to_json`; reproduces bond arrays bit-for-bit."""
    doc = json.loads(text)
    lattice = build_defect_lattice(int(doc["n_sites"]), float(doc["rho_over_kappa"]), float(doc["kappa_over_omega"]))
    drive = DriveSpec(gamma=float(doc["gamma"]), kappa_over_omega=float(doc["kappa_over_omega"]))
    return lattice, drive


def iter_paper_sites(lattice: LatticeSpec) -> Iterator[tuple[int, int]]:
    """Yield (internal index, symmetric index) pairs in internal order."""
    for i, n in enumerate(lattice.paper_indices()):
        yield i, int(n)
