import numpy as np
import pytest
from scipy.special import j0

from floquet_bic.errors import NumericalGateError
from floquet_bic.lattice import DriveSpec, build_defect_lattice
from floquet_bic.wavepacket import (
    CORE_HALFWIDTH,
    evolve_packet,
    gaussian_packet,
    reflection_transmission,
)


class TestGaussianPacket:
    def test_figure_initial_condition_is_normalized(self):
        lat = build_defect_lattice(201, 0.7, 0.3)
        packet = gaussian_packet(lat, -20, 4.0, np.pi / 2)
        assert np.linalg.norm(packet.values) == pytest.approx(1.0, abs=1e-14)
        probs = packet.probabilities()
        center = lat.site_of(-20)
        assert probs.argmax() == center

    def test_zero_momentum_packet_is_real_positive(self):
        lat = build_defect_lattice(201, 0.7, 0.3)
        packet = gaussian_packet(lat, 0, 4.0, 0.0)
        assert np.all(packet.values.imag == 0.0)
        assert np.all(packet.values.real > 0.0)

    def test_momentum_phase_imprinted(self):
        lat = build_defect_lattice(201, 0.7, 0.3)
        p = np.pi / 2
        packet = gaussian_packet(lat, -20, 4.0, p)
        n = lat.paper_indices()
        support = np.abs(n + 20) <= 16  # tails underflow beyond 4 widths
        expected_phase = np.exp(-1j * p * n[support])
        ratio = packet.values[support] / (np.abs(packet.values[support]) * expected_phase)
        np.testing.assert_allclose(ratio, ratio[0], atol=1e-12)

    def test_support_overflow_rejected(self):
        lat = build_defect_lattice(201, 0.7, 0.3)
        with pytest.raises(ValueError, match="seam"):
            gaussian_packet(lat, -90, 4.0, 0.0)
        with pytest.raises(ValueError, match="seam"):
            gaussian_packet(lat, 0, 30.0, 0.0)

    def test_band_center_packet_has_zero_mean_quasienergy(self):
        # momentum pi/2 rides the centre of the driven band
        lat = build_defect_lattice(201, 1.0, 0.3)
        drive = DriveSpec(gamma=2.0, kappa_over_omega=0.3)
        packet = gaussian_packet(lat, -20, 4.0, np.pi / 2)
        momenta = 2.0 * np.pi * np.fft.fftfreq(201)
        weights = np.abs(np.fft.fft(packet.values)) ** 2
        weights /= weights.sum()
        eps = 2.0 * 0.3 * j0(2.0) * np.cos(momenta)
        assert abs(np.sum(weights * eps)) < 1e-3


class TestEvolvePacket:
    def test_dynamic_localization_freezes_the_packet(self):
        lat = build_defect_lattice(201, 1.0, 0.3)
        drive = DriveSpec(gamma=2.404826, kappa_over_omega=0.3)
        packet = gaussian_packet(lat, -20, 4.0, np.pi / 2)
        run = evolve_packet(lat, drive, packet, n_periods=10, snapshots_per_period=1)
        assert not run.stopped_by_rule
        assert abs(run.centroids[-1] - run.centroids[0]) < 1.0
        sites = lat.paper_indices().astype(float)
        var0 = np.sum(run.snapshots[0] * sites**2) - run.centroids[0] ** 2
        var1 = np.sum(run.snapshots[-1] * sites**2) - run.centroids[-1] ** 2
        assert var1 < 1.05 * var0

    def test_group_velocity_matches_renormalized_band(self):
        kappa, gamma, p = 0.3, 2.0, np.pi / 2
        lat = build_defect_lattice(201, 1.0, kappa)
        drive = DriveSpec(gamma=gamma, kappa_over_omega=kappa)
        packet = gaussian_packet(lat, -40, 4.0, p)
        run = evolve_packet(lat, drive, packet, n_periods=10, snapshots_per_period=1)
        speed = (run.centroids[-1] - run.centroids[0]) / (run.times[-1] - run.times[0])
        expected = 2.0 * kappa * abs(j0(gamma)) * np.sin(p)
        assert speed == pytest.approx(expected, rel=0.05)

    def test_norm_conserved_across_snapshots(self):
        lat = build_defect_lattice(201, 0.7, 0.3)
        drive = DriveSpec(gamma=2.0, kappa_over_omega=0.3)
        packet = gaussian_packet(lat, -20, 4.0, np.pi / 2)
        run = evolve_packet(lat, drive, packet, n_periods=5, snapshots_per_period=4)
        np.testing.assert_allclose(run.snapshots.sum(axis=1), 1.0, atol=1e-8)

    def test_wraparound_contamination_aborts(self):
        # a resting packet at a fast-dispersing band edge spreads into the
        # seam without ever tripping the centroid stopping rule
        lat = build_defect_lattice(61, 1.0, 0.5)
        drive = DriveSpec(gamma=0.5, kappa_over_omega=0.5)
        packet = gaussian_packet(lat, 0, 4.0, 0.0)
        with pytest.raises(NumericalGateError, match="wrap-around"):
            evolve_packet(lat, drive, packet, n_periods=200, snapshots_per_period=1)

    def test_argument_validation(self):
        lat = build_defect_lattice(61, 1.0, 0.5)
        drive = DriveSpec(gamma=0.5, kappa_over_omega=0.5)
        packet = gaussian_packet(lat, 0, 3.0, 0.0)
        with pytest.raises(ValueError):
            evolve_packet(lat, drive, packet, n_periods=0)
        with pytest.raises(ValueError):
            evolve_packet(lat, drive, packet, n_periods=1, snapshots_per_period=3, steps_per_period=4096)


class TestReflectionTransmission:
    def test_no_defect_transmits(self):
        lat = build_defect_lattice(201, 1.0, 0.3)
        drive = DriveSpec(gamma=2.0, kappa_over_omega=0.3)
        packet = gaussian_packet(lat, -25, 4.0, np.pi / 2)
        run = evolve_packet(lat, drive, packet, n_periods=200, snapshots_per_period=1)
        assert run.stopped_by_rule
        r, t, leak = reflection_transmission(run)
        assert t > 0.99
        assert r + t + leak == pytest.approx(1.0, abs=1e-8)

    def test_partition_sums_to_snapshot_norm(self):
        lat = build_defect_lattice(201, 0.7, 0.3)
        drive = DriveSpec(gamma=2.2, kappa_over_omega=0.3)
        packet = gaussian_packet(lat, -30, 4.0, np.pi / 2)
        run = evolve_packet(lat, drive, packet, n_periods=3, snapshots_per_period=2)
        with pytest.warns(UserWarning):  # measured early on purpose
            r, t, leak = reflection_transmission(run, measure_time=run.times[-1])
        assert r + t + leak == pytest.approx(1.0, abs=1e-10)

    def test_resting_packet_measurement_is_flagged(self):
        # nothing ever approaches the defect: the measurement is premature and
        # the mass stays in the launch region
        lat = build_defect_lattice(201, 0.7, 0.3)
        drive = DriveSpec(gamma=2.0, kappa_over_omega=0.3)
        packet = gaussian_packet(lat, -60, 4.0, 0.0)
        run = evolve_packet(lat, drive, packet, n_periods=2, snapshots_per_period=1)
        assert not run.stopped_by_rule
        with pytest.warns(UserWarning, match="before the packet interacted"):
            r, t, leak = reflection_transmission(run, measure_time=run.times[-1])
        assert r == pytest.approx(1.0, abs=1e-3)
        assert t == pytest.approx(0.0, abs=1e-6)
        assert r + t + leak == pytest.approx(1.0, abs=1e-10)

    def test_core_exclusion_width(self):
        assert CORE_HALFWIDTH == 5
