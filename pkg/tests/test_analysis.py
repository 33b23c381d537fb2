"""Metric correctness: SI-SNR conventions, correlation oracle, prominence."""

import numpy as np
import pytest

from spikecodec.analysis import (
    CorrelationVolume,
    anchor_units,
    cross_correlation,
    peak_prominence,
    selectivity_report,
    si_snr,
)
from spikecodec.errors import DomainError, ShapeError
from spikecodec.event_matrix import EventMatrix, random_matrix


def brute_force_correlation(z_list, n_list, w):
    """Independent nested-loop oracle for C[i, alpha, tau]."""
    n_units = z_list[0].n_units
    n_notes = n_list[0].n_units
    out = np.zeros((n_units, n_notes, 2 * w + 1))
    for z, n in zip(z_list, n_list):
        zd, nd = z.to_dense(), n.to_dense()
        t_len = z.n_steps
        for i in range(n_units):
            for a in range(n_notes):
                for j, tau in enumerate(range(-w, w + 1)):
                    acc = 0
                    for t in range(t_len):
                        if 0 <= t + tau < t_len:
                            acc += int(zd[i, t]) * int(nd[a, t + tau])
                    out[i, a, j] += acc
    return out / len(z_list)


class TestSiSnr:
    def test_identity_hits_cap(self):
        x = np.sin(np.arange(200) * 0.1)
        assert si_snr(x, x) == 100.0

    def test_scale_invariance(self):
        x = np.sin(np.arange(300) * 0.07) + 0.3
        base = si_snr(x, x)
        for a in (0.1, 1.0, 7.3):
            assert abs(si_snr(x, a * x) - base) < 1e-9

    def test_orthogonal_equal_energy_noise_is_zero_db(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=500)
        x -= x.mean()
        e = rng.normal(size=500)
        e -= e.mean()
        e -= (e @ x) / (x @ x) * x
        e *= np.sqrt((x @ x) / (e @ e))
        assert si_snr(x, x + e) == pytest.approx(0.0, abs=1e-6)

    def test_known_ratio_ten_db(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=400)
        x -= x.mean()
        e = rng.normal(size=400)
        e -= e.mean()
        e -= (e @ x) / (x @ x) * x
        # orthogonal residual carrying 10% of the signal energy -> 10 dB
        e *= np.sqrt(0.1 * (x @ x) / (e @ e))
        assert si_snr(x, x + e) == pytest.approx(10.0, abs=1e-6)

    def test_mean_offset_ignored(self):
        x = np.sin(np.arange(100) * 0.3)
        assert si_snr(x, x + 5.0) == 100.0

    def test_zero_reference_rejected(self):
        with pytest.raises(DomainError):
            si_snr(np.full(10, 3.0), np.arange(10.0))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            si_snr(np.zeros(4), np.zeros(5))

    def test_anticorrelated_estimate_is_poor(self):
        x = np.sin(np.arange(100) * 0.3)
        assert si_snr(x, -x) == 100.0  # scale invariance includes sign flips
        rng = np.random.default_rng(1)
        assert si_snr(x, rng.normal(size=100)) < 10.0


class TestCrossCorrelation:
    def test_self_correlation_peaks_at_zero(self):
        m = random_matrix(0, 4, 30, 12)
        vol = cross_correlation([m], [m], w=5)
        for i in range(4):
            c0 = vol.at(i, i, 0)
            assert all(vol.at(i, i, tau) <= c0 for tau in range(-5, 6))
        total = sum(vol.at(i, i, 0) for i in range(4))
        assert total == m.event_count

    def test_shift_property(self):
        # n is z delayed by d steps: argmax over tau of C(tau) is d.
        t, d = 40, 3
        z = EventMatrix(1, t, [(0, s) for s in (5, 12, 20, 30)])
        n = EventMatrix(1, t, [(0, s + d) for s in (5, 12, 20, 30)])
        vol = cross_correlation([z], [n], w=6)
        curve = vol.values[0, 0]
        assert int(curve.argmax()) == d + 6

    def test_matches_bruteforce_oracle_small_instances(self):
        rng = np.random.default_rng(2)
        seed = 0
        for n_u in (1, 3, 8):
            for n_k in (1, 4, 8):
                for t in (1, 5, 8):
                    for w in (0, 2, 4):
                        z_list, n_list = [], []
                        for _ in range(2):
                            z_list.append(random_matrix(seed, n_u, t, int(rng.integers(0, n_u * t + 1))))
                            n_list.append(random_matrix(seed + 1, n_k, t, int(rng.integers(0, n_k * t + 1))))
                            seed += 2
                        got = cross_correlation(z_list, n_list, w=w)
                        expect = brute_force_correlation(z_list, n_list, w)
                        np.testing.assert_array_equal(got.values, expect)

    def test_bounded_by_marginal_counts(self):
        z = random_matrix(3, 5, 40, 37)
        n = random_matrix(4, 6, 40, 55)
        vol = cross_correlation([z], [n], w=8)
        z_counts = z.to_dense().sum(axis=1)
        n_counts = n.to_dense().sum(axis=1)
        for i in range(5):
            for a in range(6):
                bound = min(z_counts[i], n_counts[a])
                assert vol.values[i, a].max() <= bound
        assert vol.values.min() >= 0

    def test_validation(self):
        m = random_matrix(5, 2, 10, 4)
        with pytest.raises(ShapeError):
            cross_correlation([m], [], w=2)
        with pytest.raises(ShapeError):
            cross_correlation([m], [random_matrix(6, 2, 11, 4)], w=2)
        with pytest.raises(DomainError):
            cross_correlation([m], [m], w=-1)
        with pytest.raises(DomainError):
            cross_correlation([m], [m], w=2).at(0, 0, 3)

    def test_csv_shape(self):
        m = random_matrix(7, 2, 10, 5)
        vol = cross_correlation([m], [m], w=2)
        lines = vol.to_csv().splitlines()
        assert lines[0] == "i,alpha,tau,C"
        assert len(lines) == 1 + 2 * 2 * 5


def volume_from_curve(curve: np.ndarray, w: int) -> CorrelationVolume:
    return CorrelationVolume(values=curve.reshape(1, 1, 2 * w + 1), w=w, n_samples=1)


class TestPeakProminence:
    def test_delta_peak_large_positive(self):
        w = 20
        curve = np.ones(2 * w + 1)
        curve[w] = 30.0
        rng = np.random.default_rng(5)
        curve += rng.uniform(0, 0.1, size=curve.shape)
        prom = peak_prominence(volume_from_curve(curve, w), p=5)
        assert prom.phi[0, 0] > 10.0

    def test_flat_curve_scores_zero(self):
        w = 15
        prom = peak_prominence(volume_from_curve(np.full(2 * w + 1, 4.0), w), p=5)
        assert prom.phi[0, 0] == pytest.approx(0.0, abs=1e-9)

    def test_center_dip_scores_negative(self):
        w = 20
        curve = np.full(2 * w + 1, 5.0)
        curve[w - 3 : w + 4] = 0.5
        curve[::2] += 0.05  # baseline needs nonzero variance
        prom = peak_prominence(volume_from_curve(curve, w), p=5)
        assert prom.phi[0, 0] < -1.0

    def test_scale_invariance_of_phi(self):
        w = 25
        rng = np.random.default_rng(6)
        curve = rng.uniform(1, 2, size=2 * w + 1)
        curve[w] += 5
        base = peak_prominence(volume_from_curve(curve, w), p=4).phi[0, 0]
        scaled = peak_prominence(volume_from_curve(curve * 37.5, w), p=4).phi[0, 0]
        assert scaled == pytest.approx(base, abs=1e-9)

    def test_window_validation(self):
        vol = volume_from_curve(np.ones(11), 5)
        with pytest.raises(DomainError):
            peak_prominence(vol, p=6)
        with pytest.raises(DomainError):
            peak_prominence(vol, p=0)
        peak_prominence(vol, p=5)

    def test_csv_shape(self):
        vol = cross_correlation([random_matrix(8, 3, 12, 6)], [random_matrix(9, 2, 12, 5)], w=4)
        prom = peak_prominence(vol, p=2)
        lines = prom.to_csv().splitlines()
        assert lines[0] == "i,alpha,phi"
        assert len(lines) == 1 + 3 * 2


class TestSelectivity:
    def make_prominence(self):
        vol_phi = np.array([
            [0.1, 3.0, 0.2],
            [2.5, 0.0, 0.1],
            [0.0, 1.0, 4.0],
            [0.3, 2.0, 0.2],
        ])
        from spikecodec.analysis import ProminenceMatrix

        return ProminenceMatrix(phi=vol_phi, peak_window=10)

    def test_report_sorted_by_anchor_descending(self):
        prom = self.make_prominence()
        table = selectivity_report(prom, top_k=3, anchor_note=1)
        assert table.units == [0, 3, 2]
        np.testing.assert_array_equal(table.rows[0], prom.phi[0])

    def test_identity_case_top1(self):
        m = random_matrix(10, 4, 50, 25)
        vol = cross_correlation([m], [m], w=12)
        prom = peak_prominence(vol, p=3)
        for a in range(4):
            table = selectivity_report(prom, top_k=1, anchor_note=a)
            assert table.units == [a]

    def test_anchor_units_ranking(self):
        prom = self.make_prominence()
        top = anchor_units(prom, top_k=2)
        assert top == [(2, 2), (0, 1)]

    def test_validation(self):
        prom = self.make_prominence()
        with pytest.raises(DomainError):
            selectivity_report(prom, top_k=1, anchor_note=3)
        with pytest.raises(DomainError):
            selectivity_report(prom, top_k=0, anchor_note=0)
        with pytest.raises(DomainError):
            anchor_units(prom, top_k=0)

    def test_csv_layout(self):
        table = selectivity_report(self.make_prominence(), top_k=2, anchor_note=0)
        lines = table.to_csv().splitlines()
        assert lines[0] == "unit,phi_0,phi_1,phi_2"
        assert len(lines) == 3
