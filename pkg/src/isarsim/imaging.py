"""Stepped-frequency phase history synthesis and range-Doppler imaging.

The radar sweeps num_frequencies discrete tones across the bandwidth for
each of num_pulses looks, and the looks span a small arc of aspect angles
centered on the nominal pose (turntable geometry: translational motion is
assumed perfectly compensated, only rotation remains). A 2-D inverse FFT
of the frequency/pulse sample matrix yields the complex image; the
transform is scaled to be unitary so image energy equals sample energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import RadarPose
from .mesh import TriangleMesh
from .scattering import Bvh, RaySpec, trace_field

SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class WaveformSpec:
    """Stepped-frequency collection parameters."""

    center_frequency_hz: float = 10.0e9
    bandwidth_hz: float = 300.0e6
    num_frequencies: int = 54
    num_pulses: int = 54
    aspect_span_deg: float = 3.0

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth must be positive")
        if not self.center_frequency_hz > self.bandwidth_hz / 2:
            raise ValueError("center frequency must exceed half the bandwidth")
        if self.num_frequencies < 2 or self.num_pulses < 2:
            raise ValueError("need at least 2 frequencies and 2 pulses")
        if not self.aspect_span_deg > 0:
            raise ValueError("aspect span must be positive")

    @property
    def frequencies_hz(self) -> np.ndarray:
        """Tone ladder from f_c - B/2 to f_c + B/2 inclusive."""
        k = np.arange(self.num_frequencies)
        step = self.bandwidth_hz / (self.num_frequencies - 1)
        return self.center_frequency_hz - self.bandwidth_hz / 2 + k * step

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.center_frequency_hz

    @property
    def range_bin_m(self) -> float:
        """One-way range extent of a single image row."""
        step = self.bandwidth_hz / (self.num_frequencies - 1)
        return SPEED_OF_LIGHT / (2.0 * self.num_frequencies * step)

    @property
    def cross_range_bin_m(self) -> float:
        """Cross-range extent of a single image column."""
        return self.wavelength_m / (2.0 * math.radians(self.aspect_span_deg))

    def pulse_azimuths_deg(self, center_azimuth_deg: float) -> np.ndarray:
        """Aspect angle of each look, centered on the nominal azimuth."""
        p = np.arange(self.num_pulses)
        step = self.aspect_span_deg / self.num_pulses
        return center_azimuth_deg + (p - self.num_pulses // 2) * step


@dataclass(frozen=True)
class PhaseHistory:
    """Complex samples on the (frequency, pulse) grid."""

    samples: np.ndarray
    spec: WaveformSpec = field(default_factory=WaveformSpec)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.shape != (self.spec.num_frequencies, self.spec.num_pulses):
            raise ValueError("sample grid does not match the waveform spec")
        object.__setattr__(self, "samples", s)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class ComplexImage:
    """Range-Doppler image; rows are range bins, columns Doppler bins."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.complex128)
        if d.ndim != 2:
            raise ValueError("image must be two dimensional")
        object.__setattr__(self, "data", d)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2))

    @property
    def peak_bin(self) -> tuple[int, int]:
        flat = int(np.argmax(np.abs(self.data)))
        return flat // self.data.shape[1], flat % self.data.shape[1]

    def magnitude_db(self, floor_db: float = -120.0) -> np.ndarray:
        mag = np.abs(self.data)
        peak = mag.max()
        if peak <= 0.0:
            return np.full(self.data.shape, floor_db)
        return np.maximum(20.0 * np.log10(np.maximum(mag / peak, 1e-300)), floor_db)


def pulse_samples(frequencies_hz: np.ndarray, paths_m: np.ndarray,
                  amplitudes: np.ndarray) -> np.ndarray:
    """Coherent sum of scatterer echoes at each tone for a single pulse."""
    if len(paths_m) == 0:
        return np.zeros(len(frequencies_hz), dtype=np.complex128)
    phase = (-2j * np.pi / SPEED_OF_LIGHT) * np.outer(frequencies_hz, paths_m)
    return np.exp(phase) @ amplitudes.astype(np.complex128)


def synthesize_phase_history(mesh: TriangleMesh, pose: RadarPose,
                             waveform: WaveformSpec | None = None,
                             rays: RaySpec | None = None, *,
                             seed: int = 0, bvh: Bvh | None = None) -> PhaseHistory:
    """Trace the ray grid at every look angle and build the sample matrix.

    The ray-grid jitter pattern is fixed by the seed and shared across
    pulses so that aspect change is the only pulse-to-pulse variation.
    """
    waveform = waveform or WaveformSpec()
    if rays is None:
        rays = RaySpec(wavelength_m=waveform.wavelength_m)
    if bvh is None:
        bvh = Bvh(mesh)
    freqs = waveform.frequencies_hz
    samples = np.zeros((waveform.num_frequencies, waveform.num_pulses),
                       dtype=np.complex128)
    for p, az in enumerate(waveform.pulse_azimuths_deg(pose.azimuth_deg)):
        look = RadarPose(azimuth_deg=float(az % 360.0),
                         elevation_deg=pose.elevation_deg,
                         slant_range_m=pose.slant_range_m)
        fieldout = trace_field(mesh, look, rays, seed=seed, bvh=bvh)
        paths, amps, _ = fieldout.compact()
        samples[:, p] = pulse_samples(freqs, paths, amps)
    return PhaseHistory(samples=samples, spec=waveform)


def form_image(history: PhaseHistory, window: str | None = None) -> ComplexImage:
    """Unitary 2-D inverse FFT of the phase history, DC bin centered.

    window="taylor" applies a separable -35 dB Taylor taper for sidelobe
    control; the default leaves the samples untapered so that image energy
    exactly equals sample energy.
    """
    samples = history.samples
    if window is not None:
        if window != "taylor":
            raise ValueError(f"unknown window {window!r}")
        from scipy.signal.windows import taylor
        wk = taylor(samples.shape[0], nbar=4, sll=35)
        wp = taylor(samples.shape[1], nbar=4, sll=35)
        samples = samples * np.outer(wk, wp)
    k, p = samples.shape
    image = np.fft.fftshift(np.fft.ifft2(samples)) * math.sqrt(k * p)
    return ComplexImage(data=image)


def expected_range_row(path_length_m: float, spec: WaveformSpec) -> int:
    """Image row where a scatterer with the given two-way path lands."""
    k = spec.num_frequencies
    step = spec.bandwidth_hz / (k - 1)
    m = (k * step * path_length_m / SPEED_OF_LIGHT) % k
    return (int(round(m)) + k // 2) % k


def expected_doppler_col(cross_range_m: float, elevation_deg: float,
                         spec: WaveformSpec) -> int:
    """Image column for a scatterer at the given signed cross-range offset.

    Cross-range is the horizontal coordinate along the direction of
    increasing azimuth as seen from the nominal look.
    """
    p = spec.num_pulses
    span = math.radians(spec.aspect_span_deg)
    eff = cross_range_m * math.cos(math.radians(elevation_deg))
    n = (-2.0 * eff * span / spec.wavelength_m) % p
    return (int(round(n)) + p // 2) % p
