import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet_bic.analysis import (
    GammaScan,
    band_halfwidth,
    bic_refine,
    classify_mode,
    classify_spectrum,
    count_boc,
    gamma_scan,
    refine_candidates,
)
from floquet_bic.engine import build_propagator, floquet_decompose
from floquet_bic.lattice import DriveSpec, SiteAmplitudes, build_defect_lattice


def two_site_bound_state(n: int, lattice) -> SiteAmplitudes:
    v = np.zeros(n, dtype=complex)
    v[lattice.site_of(-1)] = 1.0 / np.sqrt(2.0)
    v[lattice.site_of(1)] = -1.0 / np.sqrt(2.0)
    return SiteAmplitudes(v)


@pytest.fixture(scope="module")
def panel_03_at_alpha_root():
    """Full 201-site spectrum at the lower tunneling-destruction root."""
    lat = build_defect_lattice(201, 0.7, 0.3)
    drive = DriveSpec(gamma=2.3800, kappa_over_omega=0.3)
    spectrum = floquet_decompose(build_propagator(lat, drive))
    return lat, drive, spectrum


@pytest.fixture(scope="module")
def panel_03_at_beta_root():
    lat = build_defect_lattice(201, 0.7, 0.3)
    drive = DriveSpec(gamma=2.42875, kappa_over_omega=0.3)
    spectrum = floquet_decompose(build_propagator(lat, drive))
    return lat, drive, spectrum


class TestClassifyMode:
    def test_exact_two_site_state_is_bic(self):
        lat = build_defect_lattice(201, 0.7, 0.3)
        drive = DriveSpec(gamma=2.38, kappa_over_omega=0.3)
        report = classify_mode(two_site_bound_state(201, lat), 0.0, lat, drive, tail_margin=50)
        assert report.h1 == pytest.approx(0.5)
        assert report.h2 == 0.0
        assert report.D == 0.0
        assert report.label == "BIC"

    def test_uniform_wave_is_scattered_with_unit_contrast(self):
        lat = build_defect_lattice(201, 0.7, 0.3)
        drive = DriveSpec(gamma=2.38, kappa_over_omega=0.3)
        v = np.full(201, 1.0 / np.sqrt(201.0), dtype=complex)
        report = classify_mode(SiteAmplitudes(v), 0.0, lat, drive, tail_margin=50)
        assert report.D == pytest.approx(1.0)
        assert report.label == "scattered"

    def test_tail_margin_validation(self):
        lat = build_defect_lattice(201, 0.7, 0.3)
        drive = DriveSpec(gamma=2.38, kappa_over_omega=0.3)
        state = two_site_bound_state(201, lat)
        with pytest.raises(ValueError, match="defect core"):
            classify_mode(state, 0.0, lat, drive, tail_margin=1)
        with pytest.raises(ValueError):
            classify_mode(state, 0.0, lat, drive, tail_margin=100)

    def test_high_kappa_panel_has_resonances_and_boc_pair(self):
        # driven ring away from band collapse: localized-but-leaky modes plus
        # detached bound pairs must both be present
        lat = build_defect_lattice(201, 0.7, 2.0)
        drive = DriveSpec(gamma=2.28, kappa_over_omega=2.0)
        spectrum = floquet_decompose(build_propagator(lat, drive))
        reports = classify_spectrum(spectrum, lat, drive, tail_margin=50)
        resonances = [r for r in reports if r.label == "resonance"]
        boc = [r for r in reports if r.label == "BOC"]
        assert any(1e-6 < r.D < 0.1 for r in resonances)
        assert len(boc) >= 2 and len(boc) % 2 == 0
        edge = band_halfwidth(drive)
        assert all(abs(r.quasienergy) > edge for r in boc)

    @given(
        scale=st.floats(0.01, 50.0),
        phase=st.floats(0.0, 2.0 * np.pi),
    )
    @settings(max_examples=25, deadline=None)
    def test_contrast_invariant_under_scale_and_phase(self, scale, phase):
        lat = build_defect_lattice(41, 0.7, 0.3)
        drive = DriveSpec(gamma=2.3, kappa_over_omega=0.3)
        rng = np.random.default_rng(11)
        v = rng.normal(size=41) + 1j * rng.normal(size=41)
        base = classify_mode(SiteAmplitudes(v), 0.0, lat, drive, tail_margin=12)
        moved = classify_mode(
            SiteAmplitudes(scale * np.exp(1j * phase) * v), 0.0, lat, drive, tail_margin=12
        )
        assert moved.D == pytest.approx(base.D, rel=1e-12)
        assert moved.label == base.label

    def test_labels_partition_the_spectrum(self, panel_03_at_alpha_root):
        lat, drive, spectrum = panel_03_at_alpha_root
        reports = classify_spectrum(spectrum, lat, drive)
        assert len(reports) == 201
        assert all(r.label in ("scattered", "BOC", "resonance", "BIC") for r in reports)
        assert [r.mode_index for r in reports] == list(range(201))


class TestCountBoc:
    def test_undriven_lattice_has_none(self):
        lat = build_defect_lattice(201, 0.7, 0.3)
        drive = DriveSpec(gamma=0.0, kappa_over_omega=0.3)
        spectrum = floquet_decompose(build_propagator(lat, drive))
        assert count_boc(spectrum, drive, lat) == 0

    def test_alpha_root_supports_trimer_pair(self, panel_03_at_alpha_root):
        # severed three-site cluster: two bound satellites of the central BIC
        lat, drive, spectrum = panel_03_at_alpha_root
        assert count_boc(spectrum, drive, lat) == 2

    def test_beta_root_supports_four_edge_states(self, panel_03_at_beta_root):
        # the decoupled site leaves two semi-infinite chains, each with a
        # detached pair at the strengthened end bond
        lat, drive, spectrum = panel_03_at_beta_root
        assert count_boc(spectrum, drive, lat) == 4

    def test_bic_at_beta_root_is_central_site(self, panel_03_at_beta_root):
        lat, drive, spectrum = panel_03_at_beta_root
        reports = classify_spectrum(spectrum, lat, drive)
        bic = [r for r in reports if r.label == "BIC"]
        assert len(bic) == 1
        mode = spectrum.modes[bic[0].mode_index]
        assert mode.probabilities()[lat.defect_center] > 0.8
        assert abs(bic[0].quasienergy) < 1e-6


class TestGammaScan:
    def test_narrow_scan_brackets_the_alpha_root(self):
        # a cheap ring still resolves the defect physics; the candidate local
        # minimum must bracket the full-panel value near 2.38
        lat = build_defect_lattice(41, 0.7, 0.3)
        scan = gamma_scan(lat, 0.3, (2.35, 2.41), 7, tail_margin=12)
        assert scan.gamma_grid.shape == (7,)
        assert scan.quasienergies.shape == (7, 41)
        assert not scan.failures
        assert len(scan.candidates) >= 1
        best = min(scan.candidates, key=lambda c: c.D)
        assert best.gamma_lo < 2.38 < best.gamma_hi

    def test_parallel_scan_matches_serial(self):
        lat = build_defect_lattice(41, 0.7, 0.3)
        serial = gamma_scan(lat, 0.3, (2.36, 2.40), 5, tail_margin=12, jobs=1)
        parallel = gamma_scan(lat, 0.3, (2.36, 2.40), 5, tail_margin=12, jobs=2)
        assert serial.quasienergies.tobytes() == parallel.quasienergies.tobytes()
        assert serial.d_values.tobytes() == parallel.d_values.tobytes()
        assert [c.gamma_star for c in serial.candidates] == [c.gamma_star for c in parallel.candidates]

    def test_grid_validation(self):
        lat = build_defect_lattice(41, 0.7, 0.3)
        with pytest.raises(ValueError):
            gamma_scan(lat, 0.3, (2.4, 2.2), 5)
        with pytest.raises(ValueError):
            gamma_scan(lat, 0.3, (2.2, 2.4), 1)


class TestBicRefine:
    def test_refines_alpha_root_on_small_ring(self):
        # at N = 41 the finite-size window blurs the satellite/central-state
        # distinction, but the refined amplitude still lands on the root
        lat = build_defect_lattice(41, 0.7, 0.3)
        gamma_star, report = bic_refine(lat, 0.3, (2.35, 2.41), tail_margin=12)
        assert report.label == "BIC"
        assert report.D < 1e-6
        assert gamma_star == pytest.approx(2.380, abs=0.005)

    def test_monotone_bracket_returns_best_effort(self):
        # no dip inside: must come back with the honest non-BIC label
        lat = build_defect_lattice(41, 0.7, 0.3)
        gamma_star, report = bic_refine(lat, 0.3, (2.0, 2.05), tail_margin=12, width_tol=1e-3)
        assert report.label != "BIC"
        assert report.D > 1e-6
        assert 2.0 <= gamma_star <= 2.05

    def test_invalid_bracket(self):
        lat = build_defect_lattice(41, 0.7, 0.3)
        with pytest.raises(ValueError):
            bic_refine(lat, 0.3, (2.4, 2.3))


class TestRefineCandidates:
    def test_small_ring_search_finds_both_roots(self):
        # 0.01 grid spacing (the production resolution) resolves both dips
        lat = build_defect_lattice(41, 0.7, 0.3)
        scan = gamma_scan(lat, 0.3, (2.30, 2.48), 19, tail_margin=12)
        refined = refine_candidates(lat, 0.3, scan, tail_margin=12, jobs=2)
        bic = sorted(c.gamma_star for c in refined if c.label == "BIC" and c.D < 1e-6)
        assert len(bic) == 2
        assert bic[0] == pytest.approx(2.380, abs=0.01)
        assert bic[1] == pytest.approx(2.429, abs=0.01)
