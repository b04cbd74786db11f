import numpy as np
import pytest

from sparsemimo.radar import RadarParams, random_sparse_geometry


@pytest.fixture(scope="session")
def iv_params():
    """The X-band configuration used by the experiments."""
    return RadarParams(carrier_freq_hz=9.4e9, bandwidth_hz=250e6,
                       chirp_duration_s=363e-6, sample_rate_hz=1.4e6,
                       pulses_per_cpi=10)


@pytest.fixture(scope="session")
def small_params():
    """Tiny 64-sample configuration for brute-force oracle comparisons."""
    return RadarParams(carrier_freq_hz=9.4e9, bandwidth_hz=30e6,
                       chirp_duration_s=64 / 1.4e6, sample_rate_hz=1.4e6,
                       pulses_per_cpi=3)


@pytest.fixture(scope="session")
def sparse_random(iv_params):
    lam = iv_params.wavelength_m
    return random_sparse_geometry(3, 3, 6 * lam, 6 * lam, seed=20230511,
                                  placement="random")


@pytest.fixture(scope="session")
def sparse_spaced(iv_params):
    lam = iv_params.wavelength_m
    return random_sparse_geometry(3, 3, 6 * lam, 6 * lam, placement="spaced")


def rng_for(*entropy):
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))
