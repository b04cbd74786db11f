import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsemimo.harness import synthesize_cube_pulse_phases
from sparsemimo.radar import (IfDataCube, Target, TargetScene,
                              noise_sigma_from_snr, synthesize_cube)
from sparsemimo.rangedet import (bin_to_range, binary_integrate, detect_peaks,
                                 dft_all, focus_kernel_magnitude)


def direct_dft(row):
    n = row.size
    l, t = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(-2j * np.pi * l * t / n) @ row


def test_dft_zero_cube(iv_params, sparse_random):
    cube = synthesize_cube(iv_params, sparse_random, TargetScene(), 0.0, 0)
    plane = dft_all(cube)
    assert np.all(plane.coefficients == 0)
    assert plane.coefficients.shape == cube.samples.shape


def test_dft_on_bin_exponential_orthogonality(iv_params, sparse_random):
    n = iv_params.samples_per_pulse
    l0 = 40
    row = np.exp(2j * np.pi * l0 * np.arange(n) / n)
    samples = np.broadcast_to(row, (9, 10, n)).copy()
    plane = dft_all(IfDataCube(samples=samples, params=iv_params,
                               geometry=sparse_random))
    mags = np.abs(plane.coefficients[0, 0])
    assert mags[l0] == pytest.approx(n, rel=1e-9)
    others = np.delete(mags, l0)
    assert np.max(others) < 1e-9 * n


def test_dft_single_target_peak_bin(iv_params, sparse_random):
    # 2 R B / c = 33.36 for R = 20 m
    assert 2 * 20.0 * iv_params.bandwidth_hz / iv_params.light_speed_m_per_s == \
        pytest.approx(33.36, abs=0.01)
    scene = TargetScene.from_list([Target(20.0, 0.0, 1.0)])
    cube = synthesize_cube(iv_params, sparse_random, scene, 0.0, 0)
    plane = dft_all(cube)
    assert int(np.argmax(np.abs(plane.coefficients[0, 0]))) == 33


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_dft_matches_direct_summation(small_params, seed):
    lam = small_params.wavelength_m
    from sparsemimo.radar import random_sparse_geometry
    geom = random_sparse_geometry(2, 2, 6 * lam, 6 * lam, seed=1)
    rng = np.random.default_rng(seed)
    samples = (rng.standard_normal((4, 3, 64))
               + 1j * rng.standard_normal((4, 3, 64)))
    cube = IfDataCube(samples=samples, params=small_params, geometry=geom)
    plane = dft_all(cube)
    for c, p in ((0, 0), (3, 2)):
        expected = direct_dft(samples[c, p])
        scale = np.max(np.abs(expected))
        np.testing.assert_allclose(plane.coefficients[c, p], expected,
                                   atol=1e-9 * scale)


def test_dft_parseval(iv_params, sparse_random):
    scene = TargetScene.from_list([Target(25.0, 0.1, 1.0)])
    cube = synthesize_cube(iv_params, sparse_random, scene, 0.3, 5)
    plane = dft_all(cube)
    n = iv_params.samples_per_pulse
    for c, p in ((0, 0), (8, 9)):
        time_energy = np.sum(np.abs(cube.samples[c, p]) ** 2)
        freq_energy = np.sum(np.abs(plane.coefficients[c, p]) ** 2) / n
        assert freq_energy == pytest.approx(time_energy, rel=1e-9)


def test_focus_kernel_coherent_peak():
    assert focus_kernel_magnitude(1.3, 1.3, 508, 2.0) == 508.0


def test_focus_kernel_first_null():
    m = 508
    omega = 0.7
    x = 2 * np.pi / (m * omega)
    assert focus_kernel_magnitude(x, 0.0, m, omega) == pytest.approx(0.0, abs=1e-6)


def test_focus_kernel_against_direct_sum():
    m = 508
    omega = 1.1
    x = 3 * np.pi / (m * omega)
    direct = abs(np.sum(np.exp(1j * x * omega * np.arange(m))))
    assert focus_kernel_magnitude(x, 0.0, m, omega) == pytest.approx(
        direct, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_focus_kernel_random_draws(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 1025))
    omega = float(rng.uniform(0.05, 4.0))
    x = float(rng.uniform(-2.0, 2.0))
    x_bar = float(rng.uniform(-2.0, 2.0))
    direct = abs(np.sum(np.exp(1j * (x - x_bar) * omega * np.arange(m))))
    assert focus_kernel_magnitude(x, x_bar, m, omega) == pytest.approx(
        direct, abs=1e-9 * max(m, 1))


def test_focus_kernel_attenuation_outside_zone():
    # the magnitude just outside the focus zone approaches (2/pi) M, then
    # falls below M/2 once |x - x_bar| exceeds 4 / (M omega)
    m = 508
    omega = 1.0
    edge = np.pi / (m * omega)
    for x in np.linspace(edge * 1.0001, np.pi / omega, 4000):
        g = focus_kernel_magnitude(x, 0.0, m, omega)
        assert g <= (2 / np.pi) * m * 1.01
        if x >= 4.0 / (m * omega):
            assert g <= m / 2


def test_detect_peaks_empty_on_zero_row():
    assert detect_peaks(np.zeros(64), 3.0).size == 0


def test_detect_peaks_single_target(iv_params, sparse_random):
    scene = TargetScene.from_list([Target(20.0, 0.0, 1.0)])
    cube = synthesize_cube(iv_params, sparse_random, scene, 0.0, 0)
    mags = np.abs(dft_all(cube).coefficients[0, 0])
    peaks = detect_peaks(mags, 3.0)
    assert 33 in peaks
    strongest = peaks[np.argmax(mags[peaks])]
    assert strongest == 33


def test_detect_peaks_close_targets_union_covers_all(iv_params, sparse_random):
    # with per-pulse gain phases the union of looks shows all three
    # close-range targets within one bin each
    scene = TargetScene.from_list([Target(r, 0.0) for r in (20.6, 20.0, 19.4)])
    cube = synthesize_cube_pulse_phases(
        iv_params, sparse_random, scene, 0.0, 0,
        phase_rng=np.random.default_rng(17))
    mags = np.abs(dft_all(cube).coefficients)
    union = set()
    for c in range(9):
        for p in range(10):
            union.update(int(b) for b in detect_peaks(mags[c, p], 3.0))
    for true_bin in (32, 33, 34):
        assert any(abs(b - true_bin) <= 1 for b in union)


def test_bin_to_range_values(iv_params):
    assert bin_to_range(0, iv_params) == 0.0
    assert bin_to_range(33, iv_params) == pytest.approx(
        iv_params.light_speed_m_per_s * 33 / (2 * 250e6), rel=1e-12)
    assert bin_to_range(33, iv_params) == pytest.approx(19.786, abs=5e-4)
    assert bin_to_range(1, iv_params) == pytest.approx(0.6, rel=1e-3)
    with pytest.raises(ValueError):
        bin_to_range(508, iv_params)


@settings(max_examples=50, deadline=None)
@given(r=st.floats(1.0, 100.0))
def test_bin_range_roundtrip_within_half_bin(iv_params, r):
    bin_width = iv_params.range_bin_m
    nearest = int(round(r / bin_width))
    assert abs(bin_to_range(nearest, iv_params) - r) <= bin_width / 2 + 1e-9


def test_bin_to_range_monotone(iv_params):
    ranges = [bin_to_range(l, iv_params) for l in range(0, 508, 7)]
    assert all(b > a for a, b in zip(ranges, ranges[1:]))


def _detections(grid):
    """Shorthand: grid[channel][pulse] lists of bins -> arrays."""
    return [[np.asarray(p, dtype=int) for p in chan] for chan in grid]


def test_binary_integrate_full_agreement(iv_params):
    det = _detections([[[33]] * 10] * 9)
    rset = binary_integrate(det, 5, 5, 1, iv_params)
    assert rset.bins == [33]
    assert rset.confirmed[0].support_count == 9
    assert rset.confirmed[0].range_m == pytest.approx(bin_to_range(33, iv_params))


def test_binary_integrate_strict_m_of_n(iv_params):
    # bin present in m_of_pulses - 1 pulses on every channel: not confirmed
    det = _detections([[[33]] * 4 + [[]] * 6] * 9)
    rset = binary_integrate(det, 5, 5, 1, iv_params)
    assert rset.bins == []


def test_binary_integrate_two_stage_vote(iv_params):
    # 33 in 7/10 pulses on 8/9 channels; 90 in 1/10 pulses on one channel
    chan_with_33 = [[33]] * 7 + [[]] * 3
    chan_without = [[]] * 10
    det = [list(chan_with_33) for _ in range(8)] + [list(chan_without)]
    det[8][0] = [90]
    rset = binary_integrate(_detections(det), 5, 5, 1, iv_params)
    assert rset.bins == [33]


def test_binary_integrate_keeps_adjacent_bins(iv_params):
    # two persistent adjacent bins are distinct confirmations
    det = _detections([[[33], [34]] * 5] * 9)
    rset = binary_integrate(det, 5, 5, 1, iv_params)
    assert rset.bins == [33, 34]


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1),
       m_p=st.integers(1, 10), m_c=st.integers(1, 9))
def test_binary_integrate_monotone_in_thresholds(iv_params, seed, m_p, m_c):
    rng = np.random.default_rng(seed)
    det = [[rng.choice(508, size=rng.integers(0, 6), replace=False)
            for _ in range(10)] for _ in range(9)]
    base = set(binary_integrate(det, m_p, m_c, 1, iv_params).bins)
    if m_p < 10:
        tighter = set(binary_integrate(det, m_p + 1, m_c, 1, iv_params).bins)
        assert tighter <= base
    if m_c < 9:
        tighter = set(binary_integrate(det, m_p, m_c + 1, 1, iv_params).bins)
        assert tighter <= base


def test_binary_integrate_validation(iv_params):
    det = _detections([[[1]] * 10] * 9)
    with pytest.raises(ValueError):
        binary_integrate(det, 0, 5, 1, iv_params)
    with pytest.raises(ValueError):
        binary_integrate(det, 5, 10, 1, iv_params)
    with pytest.raises(ValueError):
        binary_integrate(det, 5, 5, -1, iv_params)


def test_single_target_confirmed_rate_at_20db(iv_params, sparse_random):
    # detection probability property with a calibrated-scale threshold
    sigma = noise_sigma_from_snr(20.0)
    scene = TargetScene.from_list([Target(20.0, 0.0, 1.0)])
    confirmed = 0
    false_on_empty = 0
    for trial in range(100):
        cube = synthesize_cube(iv_params, sparse_random, scene, sigma,
                               np.random.SeedSequence([41, trial]))
        mags = np.abs(dft_all(cube).coefficients)
        det = [[detect_peaks(mags[c, p], 3.0) for p in range(10)]
               for c in range(9)]
        bins = binary_integrate(det, 5, 5, 1, iv_params).bins
        confirmed += any(abs(b - 33) <= 1 for b in bins)

        empty = synthesize_cube(iv_params, sparse_random, TargetScene(), sigma,
                                np.random.SeedSequence([42, trial]))
        mags = np.abs(dft_all(empty).coefficients)
        det = [[detect_peaks(mags[c, p], 3.0) for p in range(10)]
               for c in range(9)]
        false_on_empty += len(binary_integrate(det, 5, 5, 1, iv_params).bins)
    assert confirmed >= 99
    assert false_on_empty / 100 <= 1.0
