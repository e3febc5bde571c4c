"""Floquet spectra and bound states in the continuum for ac-driven 1D lattices.

The package is organised around the one-cycle propagator of a sinusoidally
forced tight-binding ring:

- ``lattice``: lattice/drive descriptions, participation ratio, static spectra
- ``engine``: cycle integration, propagator assembly, Floquet decomposition
- ``analysis``: mode classification (scattered/BOC/resonance/BIC), drive-
  amplitude scans and BIC refinement
- ``effective``: high-frequency effective hoppings and the selective
  tunneling-destruction roots
- ``wavepacket``: Gaussian packet scattering off the defect
- ``cli``: command-line front end emitting CSV/JSON artifacts

All rates are expressed in units of the drive frequency (omega = 1, period
T = 2*pi).
"""

from .lattice import (
    DriveSpec,
    LatticeSpec,
    SiteAmplitudes,
    build_defect_lattice,
    participation_ratio,
    undriven_spectrum,
)
from .engine import (
    FloquetSpectrum,
    Propagator,
    build_propagator,
    floquet_decompose,
    homogeneous_dispersion,
    integrate_cycle,
    sample_mode_cycle,
    scattered_state_phase,
)
from .analysis import (
    GammaScan,
    ModeReport,
    bic_refine,
    classify_mode,
    classify_spectrum,
    count_boc,
    gamma_scan,
)
from .effective import (
    EffectiveLattice,
    bessel_j,
    effective_delta,
    effective_hoppings,
    find_sdt_roots,
    q_factor,
    trimer_modes,
)
from .wavepacket import PacketRun, evolve_packet, gaussian_packet, reflection_transmission

__version__ = "0.1.0"

__all__ = [
    "DriveSpec",
    "EffectiveLattice",
    "FloquetSpectrum",
    "GammaScan",
    "LatticeSpec",
    "ModeReport",
    "PacketRun",
    "Propagator",
    "SiteAmplitudes",
    "bessel_j",
    "bic_refine",
    "build_defect_lattice",
    "build_propagator",
    "classify_mode",
    "classify_spectrum",
    "count_boc",
    "effective_delta",
    "effective_hoppings",
    "evolve_packet",
    "find_sdt_roots",
    "floquet_decompose",
    "gamma_scan",
    "gaussian_packet",
    "homogeneous_dispersion",
    "integrate_cycle",
    "participation_ratio",
    "q_factor",
    "reflection_transmission",
    "sample_mode_cycle",
    "scattered_state_phase",
    "trimer_modes",
    "undriven_spectrum",
]
