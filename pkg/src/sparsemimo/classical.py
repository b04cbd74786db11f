"""Classical FFT comparison pipeline.

Range detection integrates magnitude spectra non-coherently across all
pulses and channels before a single threshold pass; angle detection maps the
confirmed-bin measurements onto the virtual array and scans a zero-padded
spatial spectrum over the sin(theta) domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .radar import ArrayGeometry, IfDataCube, RadarParams
from .angledet import AngleEstimate, AngleEstimateSet, BinMeasurement
from .rangedet import (ConfirmedRangeBin, RangeDetectionSet, SpectrumPlane,
                       bin_to_range, detect_peaks, dft_all)


@dataclass(eq=False)
class FullArrayGeometry:
    """Reference full MIMO array whose virtual array is a filled lambda/2 ULA.

    Two transmitter pairs flank the array at lambda spacing; eight receivers
    sit in the middle at lambda/2 spacing with lambda/4 clearance to the
    closest transmitter.  The 32 (tx, rx) channels cover 20 unique virtual
    element locations at lambda/2 pitch; 12 channels are redundant.
    """

    geometry: ArrayGeometry
    virtual_positions_lambda: np.ndarray
    channel_to_virtual: np.ndarray

    @property
    def n_virtual(self) -> int:
        return self.virtual_positions_lambda.size


def virtual_positions_lambda(geometry: ArrayGeometry, params: RadarParams) -> np.ndarray:
    """Per-channel virtual element positions (tx + rx) in wavelengths."""
    z_lambda = geometry.aperture_total_m / params.wavelength_m
    return 0.5 * z_lambda * geometry.channel_sums()


def full_array_geometry(params: RadarParams) -> FullArrayGeometry:
    """Construct the 4 tx + 8 rx reference array for the given wavelength."""
    lam = params.wavelength_m
    tx_lambda = np.array([-3.0, -2.0, 2.0, 3.0])
    rx_lambda = np.arange(8) * 0.5 - 1.75
    aperture_tx = (tx_lambda.max() - tx_lambda.min()) * lam
    aperture_rx = (rx_lambda.max() - rx_lambda.min()) * lam
    z_lambda = (aperture_tx + aperture_rx) / lam
    geometry = ArrayGeometry(
        tx_positions_norm=tuple(2.0 * x / z_lambda for x in tx_lambda),
        rx_positions_norm=tuple(2.0 * x / z_lambda for x in rx_lambda),
        aperture_tx_m=aperture_tx,
        aperture_rx_m=aperture_rx,
    )
    per_channel = virtual_positions_lambda(geometry, params)
    unique = np.unique(np.round(per_channel / 0.25).astype(int)) * 0.25
    mapping = np.array([int(np.argmin(np.abs(unique - u))) for u in per_channel])
    return FullArrayGeometry(geometry=geometry,
                             virtual_positions_lambda=unique,
                             channel_to_virtual=mapping)


def integrate_magnitudes(plane: SpectrumPlane) -> np.ndarray:
    """Non-coherent integration: |Y| summed over all pulses and channels."""
    return np.abs(plane.coefficients).sum(axis=(0, 1))


def classical_range_detect_plane(plane: SpectrumPlane,
                                 threshold_mult: float) -> RangeDetectionSet:
    integrated = integrate_magnitudes(plane)
    params = plane.source.params
    n_channels = plane.coefficients.shape[0]
    bins = detect_peaks(integrated, threshold_mult)
    confirmed = [ConfirmedRangeBin(bin_index=int(b),
                                   range_m=bin_to_range(int(b), params),
                                   support_count=n_channels)
                 for b in bins]
    return RangeDetectionSet(confirmed=confirmed)


def classical_range_detect(cube: IfDataCube, threshold_mult: float) -> RangeDetectionSet:
    """Peak detection on the pulse- and channel-integrated magnitude spectrum."""
    return classical_range_detect_plane(dft_all(cube), threshold_mult)


def spatial_sin_grid(fft_size: int) -> np.ndarray:
    """The fft_size spatial sample points, equally spaced over [-1, 1)."""
    return -1.0 + 2.0 * np.arange(fft_size) / fft_size


def spatial_spectrum(values: np.ndarray, positions_lambda: np.ndarray,
                     sin_grid: np.ndarray) -> np.ndarray:
    """Direct spatial transform of element values at arbitrary positions.

    Evaluates sum_i v_i exp(-j 2 pi u_i s) on the sin grid; for elements on
    a half-wavelength lattice this equals the zero-padded spatial DFT up to
    a global phase per sample.
    """
    kernel = np.exp(-2j * np.pi * np.outer(positions_lambda, sin_grid))
    return values @ kernel


def classical_angle_detect(bin_measurement: BinMeasurement,
                           geometry: ArrayGeometry | FullArrayGeometry,
                           params: RadarParams,
                           fft_size: int = 256,
                           threshold_mult: float = 3.0) -> AngleEstimateSet:
    """Spatial-spectrum peak detection at one confirmed range bin.

    Pulses are summed coherently (stationary targets), redundant channels of
    a full array are averaged onto their shared virtual position, and a
    sparse array's channels are used as-is at their actual virtual
    positions.  Peaks are local maxima above ``threshold_mult`` times the
    median-based floor of the spatial spectrum; peak positions map to
    sin(theta) samples and are reported in degrees.
    """
    if fft_size < 2:
        raise ValueError("fft_size must be >= 2")
    summed = bin_measurement.samples.sum(axis=1)
    if isinstance(geometry, FullArrayGeometry):
        n_virtual = geometry.n_virtual
        values = np.zeros(n_virtual, dtype=complex)
        counts = np.zeros(n_virtual)
        np.add.at(values, geometry.channel_to_virtual, summed)
        np.add.at(counts, geometry.channel_to_virtual, 1.0)
        values = values / counts
        positions = geometry.virtual_positions_lambda
    else:
        values = summed
        positions = virtual_positions_lambda(geometry, params)

    sin_grid = spatial_sin_grid(fft_size)
    spectrum = np.abs(spatial_spectrum(values, positions, sin_grid))
    floor = float(np.median(spectrum)) / math.log(2.0)
    threshold = threshold_mult * floor
    inner = ((spectrum[1:-1] > spectrum[:-2])
             & (spectrum[1:-1] > spectrum[2:])
             & (spectrum[1:-1] > threshold))
    entries = []
    for q in np.flatnonzero(inner) + 1:
        s = float(sin_grid[q])
        entries.append(AngleEstimate(grid_index=int(q),
                                     aoa_deg=math.degrees(math.asin(s)),
                                     score=float(spectrum[q])))
    return AngleEstimateSet(entries=entries, solver="classical")
