"""Command-line front end.

Subcommands
-----------
spectrum    quasienergies + modes at a single drive amplitude
classify    per-mode localization report at a single drive amplitude
scan        classify spectra over a drive-amplitude grid, flag BIC brackets
bic-search  scan + golden-section refinement of every bracket
effective   effective hopping rates over a grid + tunneling-destruction roots
dispersion  analytic driven-band dispersion on the momentum grid
wavepacket  Gaussian-packet scattering run

Configuration precedence: built-in defaults < --config JSON < flags.  The
--config file may be a plain configuration or a previously emitted
manifest.json (its "config" block is used).  All outputs land in --out-dir
together with a manifest recording the resolved configuration and file
checksums.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .analysis import (
    DEFAULT_TAIL_MARGIN,
    classify_spectrum,
    gamma_scan,
    refine_candidates,
)
from .effective import effective_hoppings, find_sdt_roots
from .engine import build_propagator, floquet_decompose, homogeneous_dispersion
from .errors import NumericalGateError
from .fileio import write_csv, write_json, write_manifest
from .lattice import DriveSpec, build_defect_lattice
from .wavepacket import evolve_packet, gaussian_packet, reflection_transmission


@dataclass
class RunConfig:
    """Resolved options for one CLI invocation; every field has a default.

    The defaults reproduce the cheapest published panel: the N = 201 ring
    with rho/kappa = 0.7 driven at kappa/omega = 0.3 over the amplitude
    window (2.0, 2.8).
    """

    command: str = "scan"
    n_sites: int = 201
    rho_over_kappa: float = 0.7
    kappa_over_omega: float = 0.3
    gamma: float = 2.38
    gamma_lo: float = 2.0
    gamma_hi: float = 2.8
    gamma_points: int = 81
    steps_per_period: int = 0  # 0 = automatic (4096 * max(1, ceil(kappa/omega)))
    truncation: int = 40
    tail_margin: int = DEFAULT_TAIL_MARGIN
    packet_center: int = -20
    packet_width: float = 4.0
    packet_momentum: float = float(np.pi / 2)
    n_periods: int = 1000
    snapshots_per_period: int = 1
    out_dir: str = "."
    jobs: int = 0  # 0 = automatic (min(8, cpu count))

    def resolved_steps(self) -> int | None:
        return None if self.steps_per_period <= 0 else self.steps_per_period

    def resolved_jobs(self) -> int:
        return self.jobs if self.jobs > 0 else min(8, os.cpu_count() or 1)


def _load_config_file(path: str) -> dict:
    with open(path) as handle:
        doc = json.load(handle)
    if "config" in doc and isinstance(doc["config"], dict):
        doc = doc["config"]  # accept a manifest
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise SystemExit(f"error: unknown config fields: {', '.join(unknown)}")
    return doc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floquet-bic",
        description="Floquet spectra, bound states in the continuum and effective lattices "
        "for the ac-driven defect ring",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in [
        ("spectrum", "quasienergies and Floquet modes at one drive amplitude"),
        ("classify", "per-mode localization report at one drive amplitude"),
        ("scan", "drive-amplitude scan with BIC candidate brackets"),
        ("bic-search", "scan plus golden-section refinement of each bracket"),
        ("effective", "effective hopping rates and tunneling-destruction roots"),
        ("dispersion", "driven-band dispersion on the momentum grid"),
        ("wavepacket", "Gaussian packet scattering off the defect"),
    ]:
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", metavar="JSON", help="configuration file (or manifest) overriding defaults")
        p.add_argument("--n-sites", type=int, dest="n_sites")
        p.add_argument("--rho-over-kappa", type=float, dest="rho_over_kappa")
        p.add_argument("--kappa-over-omega", type=float, dest="kappa_over_omega")
        p.add_argument("--gamma", type=float)
        p.add_argument("--gamma-lo", type=float, dest="gamma_lo")
        p.add_argument("--gamma-hi", type=float, dest="gamma_hi")
        p.add_argument("--gamma-points", type=int, dest="gamma_points")
        p.add_argument("--steps-per-period", type=int, dest="steps_per_period")
        p.add_argument("--truncation", type=int)
        p.add_argument("--tail-margin", type=int, dest="tail_margin")
        p.add_argument("--packet-center", type=int, dest="packet_center")
        p.add_argument("--packet-width", type=float, dest="packet_width")
        p.add_argument("--packet-momentum", type=float, dest="packet_momentum")
        p.add_argument("--n-periods", type=int, dest="n_periods")
        p.add_argument("--snapshots-per-period", type=int, dest="snapshots_per_period")
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--jobs", type=int)
    return parser


def resolve_config(argv: list[str]) -> RunConfig:
    args = _build_parser().parse_args(argv)
    config = RunConfig(command=args.command)
    if args.config:
        for key, value in _load_config_file(args.config).items():
            if key != "command":
                setattr(config, key, type(getattr(config, key))(value))
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if f.name != "command" and value is not None:
            setattr(config, f.name, value)
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    problems = []
    if config.n_sites < 5 or config.n_sites % 2 == 0:
        problems.append(f"n_sites must be odd and >= 5 (got {config.n_sites})")
    if not 0.0 < config.rho_over_kappa <= 1.0:
        problems.append(f"rho_over_kappa must be in (0, 1] (got {config.rho_over_kappa})")
    if config.kappa_over_omega <= 0.0:
        problems.append(f"kappa_over_omega must be > 0 (got {config.kappa_over_omega})")
    if config.gamma < 0.0:
        problems.append(f"gamma must be >= 0 (got {config.gamma})")
    if config.command in ("scan", "bic-search", "effective") and not config.gamma_lo < config.gamma_hi:
        problems.append(f"need gamma_lo < gamma_hi (got {config.gamma_lo} .. {config.gamma_hi})")
    if config.gamma_points < 2:
        problems.append(f"gamma_points must be >= 2 (got {config.gamma_points})")
    if config.steps_per_period and config.steps_per_period < 256:
        problems.append(f"steps_per_period must be >= 256 or 0 for automatic (got {config.steps_per_period})")
    classifies = config.command in ("spectrum", "classify", "scan", "bic-search")
    if classifies and (config.tail_margin < 2 or config.tail_margin >= (config.n_sites - 1) // 2):
        problems.append(f"tail_margin must be in [2, (n_sites-1)/2) (got {config.tail_margin})")
    if problems:
        raise SystemExit("error: invalid configuration:\n  " + "\n  ".join(problems))


def _paper_sites(lattice) -> np.ndarray:
    return lattice.paper_indices()


def _run_spectrum(config: RunConfig, out: Path, with_report: bool) -> list[Path]:
    lattice = build_defect_lattice(config.n_sites, config.rho_over_kappa, config.kappa_over_omega)
    drive = DriveSpec(gamma=config.gamma, kappa_over_omega=config.kappa_over_omega)
    prop = build_propagator(lattice, drive, config.resolved_steps(), jobs=config.resolved_jobs())
    spectrum = floquet_decompose(prop)
    reports = classify_spectrum(spectrum, lattice, drive, config.tail_margin)

    files = [
        write_csv(
            out / "spectrum.csv",
            ["mode_index", "quasienergy", "R_at_0", "residual"],
            (
                (m, spectrum.quasienergies[m], reports[m].R0, spectrum.residuals[m])
                for m in range(spectrum.n_modes)
            ),
        )
    ]
    sites = _paper_sites(lattice)
    files.append(
        write_csv(
            out / "modes.csv",
            ["mode_index", "site_index", "re", "im"],
            (
                (m, sites[i], mode.values[i].real, mode.values[i].imag)
                for m, mode in enumerate(spectrum.modes)
                for i in range(lattice.n_sites)
            ),
        )
    )
    if with_report:
        files.append(
            write_csv(
                out / "classify.csv",
                ["mode_index", "quasienergy", "R0", "h1", "h2", "D", "label"],
                ((r.mode_index, r.quasienergy, r.R0, r.h1, r.h2, r.D, r.label) for r in reports),
            )
        )
    return files


def _run_scan(config: RunConfig, out: Path, refine: bool) -> list[Path]:
    lattice = build_defect_lattice(config.n_sites, config.rho_over_kappa, config.kappa_over_omega)
    scan = gamma_scan(
        lattice,
        config.kappa_over_omega,
        (config.gamma_lo, config.gamma_hi),
        config.gamma_points,
        steps_per_period=config.resolved_steps(),
        tail_margin=config.tail_margin,
        jobs=config.resolved_jobs(),
    )
    rows = (
        (scan.gamma_grid[i], m, scan.quasienergies[i, m], scan.ratios[i, m], scan.d_values[i, m], scan.labels[i, m])
        for i in range(scan.gamma_grid.size)
        for m in range(config.n_sites)
        if not np.isnan(scan.quasienergies[i, m])
    )
    files = [write_csv(out / "scan.csv", ["gamma", "mode_index", "quasienergy", "R0", "D", "label"], rows)]

    if refine:
        candidates = refine_candidates(
            lattice,
            config.kappa_over_omega,
            scan,
            steps_per_period=config.resolved_steps(),
            tail_margin=config.tail_margin,
            jobs=config.resolved_jobs(),
        )
    else:
        candidates = scan.candidates
    payload = [
        {
            "kappa_over_omega": c.kappa_over_omega,
            "gamma_star": c.gamma_star,
            "quasienergy": c.quasienergy,
            "D": c.D,
            "gamma_lo": c.gamma_lo,
            "gamma_hi": c.gamma_hi,
            "refined": c.refined,
            "label": c.label,
        }
        for c in candidates
    ]
    files.append(write_json(out / "bic.json", payload))
    if scan.failures:
        print(f"warning: {len(scan.failures)} grid points failed a numerical gate", file=sys.stderr)
        for index, message in scan.failures:
            print(f"  gamma[{index}] = {scan.gamma_grid[index]:.6f}: {message}", file=sys.stderr)
    return files


def _run_effective(config: RunConfig, out: Path) -> list[Path]:
    grid = np.linspace(config.gamma_lo, config.gamma_hi, config.gamma_points)
    rows = []
    for gamma in grid:
        eff = effective_hoppings(float(gamma), config.kappa_over_omega, config.rho_over_kappa)
        rows.append((gamma, eff.q_value, eff.kappa_e, eff.alpha, eff.beta))
    files = [write_csv(out / "effective.csv", ["gamma", "Q", "kappa_e", "alpha", "beta"], rows)]
    try:
        gamma1, gamma2 = find_sdt_roots(
            config.kappa_over_omega, config.rho_over_kappa, (config.gamma_lo, config.gamma_hi)
        )
        payload = {"gamma1": gamma1, "gamma2": gamma2}
    except ValueError as exc:
        payload = {"gamma1": None, "gamma2": None, "error": str(exc)}
    files.append(write_json(out / "roots.json", payload))
    return files


def _run_dispersion(config: RunConfig, out: Path) -> list[Path]:
    n = config.n_sites
    momenta = 2.0 * np.pi * np.arange(n) / n
    momenta[momenta >= np.pi] -= 2.0 * np.pi
    momenta.sort()
    rows = (
        (p, homogeneous_dispersion(float(p), config.gamma, config.kappa_over_omega))
        for p in momenta
    )
    return [write_csv(out / "dispersion.csv", ["p", "quasienergy"], rows)]


def _run_wavepacket(config: RunConfig, out: Path) -> list[Path]:
    lattice = build_defect_lattice(config.n_sites, config.rho_over_kappa, config.kappa_over_omega)
    drive = DriveSpec(gamma=config.gamma, kappa_over_omega=config.kappa_over_omega)
    packet = gaussian_packet(lattice, config.packet_center, config.packet_width, config.packet_momentum)
    run = evolve_packet(
        lattice,
        drive,
        packet,
        n_periods=config.n_periods,
        snapshots_per_period=config.snapshots_per_period,
        steps_per_period=config.resolved_steps(),
    )
    r, t, leak = reflection_transmission(run)
    sites = _paper_sites(lattice)
    rows = (
        (run.times[k], sites[i], run.snapshots[k, i])
        for k in range(run.times.size)
        for i in range(lattice.n_sites)
    )
    files = [write_csv(out / "packet.csv", ["time", "site", "probability"], rows)]
    files.append(
        write_json(
            out / "packet.json",
            {
                "r": r,
                "t": t,
                "leak": leak,
                "measure_time": run.measure_time,
                "stopped_by_rule": run.stopped_by_rule,
            },
        )
    )
    return files


def run(config: RunConfig) -> int:
    """Execute a resolved configuration; returns the process exit status."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if config.command == "spectrum":
            files = _run_spectrum(config, out, with_report=False)
        elif config.command == "classify":
            files = _run_spectrum(config, out, with_report=True)
        elif config.command == "scan":
            files = _run_scan(config, out, refine=False)
        elif config.command == "bic-search":
            files = _run_scan(config, out, refine=True)
        elif config.command == "effective":
            files = _run_effective(config, out)
        elif config.command == "dispersion":
            files = _run_dispersion(config, out)
        elif config.command == "wavepacket":
            files = _run_wavepacket(config, out)
        else:  # pragma: no cover - argparse restricts the choices
            raise SystemExit(f"error: unknown command {config.command!r}")
    except NumericalGateError as exc:
        print(f"error: numerical gate failed: {exc}", file=sys.stderr)
        return 1
    write_manifest(out, config.command, asdict(config), files)
    for path in files:
        print(path)
    return 0


def main(argv: list[str] | None = None) -> int:
    config = resolve_config(sys.argv[1:] if argv is None else argv)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
