"""Multipath channel model and per-subcarrier CSI sampling.

A channel is a list of :class:`MultipathComponent` paths. :func:`cir_compose`
bins them onto a uniform delay grid (the channel impulse response),
:func:`cir_to_cfr` transforms that into the full-band frequency response and
:func:`sample_subcarrier_csi` picks the 52 data/pilot subcarriers that an
802.11 receiver reports as CSI.

Subcarrier indices are zero-based and ascend in frequency: index ``k`` here
is what field logs usually call subcarrier ``k + 1`` (so "subcarrier 50" is
index 49, and "subcarriers 45-52" are indices 44..51).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ChannelError, DelayOutOfRangeError

BANDWIDTH_HZ = 22e6
DEFAULT_FFT_SIZE = 64
DEFAULT_DELAY_RESOLUTION = 1.0 / BANDWIDTH_HZ
CHANNEL_11_HZ = 2.462e9
SUBCARRIER_SPACING_HZ = 312.5e3
N_SUBCARRIERS = 52


@dataclass(frozen=True)
class MultipathComponent:
    """One propagation path: linear gain, phase shift (rad) and delay (s)."""

    amplitude_attenuation: float
    phase_shift: float
    delay: float

    def __post_init__(self):
        if not self.amplitude_attenuation >= 0:
            raise ChannelError(f"amplitude_attenuation must be >= 0, got {self.amplitude_attenuation}")
        if not self.delay >= 0:
            raise ChannelError(f"delay must be >= 0, got {self.delay}")


@dataclass(frozen=True)
class ChannelImpulseResponse:
    taps: np.ndarray
    delay_resolution: float = DEFAULT_DELAY_RESOLUTION

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.complex128)
        if taps.ndim != 1 or not kernels.is_power_of_two(taps.size):
            raise ChannelError(f"tap count must be a power of two, got {taps.shape}")
        if not self.delay_resolution > 0:
            raise ChannelError("delay_resolution must be positive")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def fft_size(self) -> int:
        return self.taps.size

    @property
    def window(self) -> float:
        """Largest representable delay (exclusive), in seconds."""
        return self.fft_size * self.delay_resolution


def _default_offsets() -> np.ndarray:
    return np.concatenate([np.arange(-26, 0), np.arange(1, 27)])


@dataclass(frozen=True)
class FrequencyGrid:
    center_frequency: float = CHANNEL_11_HZ
    subcarrier_spacing: float = SUBCARRIER_SPACING_HZ
    subcarrier_offsets: np.ndarray = field(default_factory=_default_offsets)

    def __post_init__(self):
        offsets = np.asarray(self.subcarrier_offsets, dtype=np.int64)
        if offsets.ndim != 1 or offsets.size == 0:
            raise ChannelError("subcarrier_offsets must be a non-empty 1-D sequence")
        if np.any(np.diff(offsets) <= 0):
            raise ChannelError("subcarrier_offsets must be strictly increasing")
        if np.any(offsets == 0):
            raise ChannelError("the DC subcarrier (offset 0) is not reported")
        offsets.setflags(write=False)
        object.__setattr__(self, "subcarrier_offsets", offsets)

    @property
    def subcarrier_count(self) -> int:
        return int(self.subcarrier_offsets.size)

    @property
    def frequencies(self) -> np.ndarray:
        return self.center_frequency + self.subcarrier_offsets * self.subcarrier_spacing

    def fft_bins(self, fft_size: int) -> np.ndarray:
        """FFT bin of every subcarrier (negative offsets wrap around)."""
        half = fft_size // 2
        if np.any(np.abs(self.subcarrier_offsets) >= half):
            raise ChannelError(f"subcarrier offset beyond +/-{half} for fft size {fft_size}")
        return np.mod(self.subcarrier_offsets, fft_size)


def _delay_bins(delays: np.ndarray, delay_resolution: float, fft_size: int) -> np.ndarray:
    delays = np.asarray(delays, dtype=np.float64)
    window = fft_size * delay_resolution
    bins = np.floor(delays / delay_resolution + 0.5).astype(np.int64)
    bad = (delays < 0) | (delays >= window) | (bins >= fft_size)
    if np.any(bad):
        worst = float(np.max(np.where(bad, delays, -np.inf)))
        raise DelayOutOfRangeError(f"path delay {worst:.4g} s outside CIR window [0, {window:.4g}) s")
    return bins


def cir_compose(components: Sequence[MultipathComponent],
                delay_resolution: float = DEFAULT_DELAY_RESOLUTION,
                fft_size: int = DEFAULT_FFT_SIZE) -> ChannelImpulseResponse:
    """Bin paths to the nearest delay tap; paths sharing a tap add coherently."""
    if not kernels.is_power_of_two(fft_size):
        raise ChannelError(f"fft_size must be a power of two, got {fft_size}")
    if not components:
        return ChannelImpulseResponse(np.zeros(fft_size, dtype=np.complex128), delay_resolution)
    amp = np.array([[c.amplitude_attenuation for c in components]])
    phase = np.array([[c.phase_shift for c in components]])
    bins = _delay_bins(np.array([[c.delay for c in components]]), delay_resolution, fft_size)
    taps = kernels.bin_taps(amp, phase, bins, fft_size)[0]
    return ChannelImpulseResponse(taps, delay_resolution)


def fft(x) -> np.ndarray:
    """Radix-2 FFT over the last axis; accepts 1-D or 2-D input."""
    x = np.asarray(x, dtype=np.complex128)
    if not kernels.is_power_of_two(x.shape[-1]):
        raise ChannelError(f"FFT length must be a power of two, got {x.shape[-1]}")
    if x.ndim == 1:
        return kernels.fft_rows(x[None, :])[0]
    return kernels.fft_rows(x)


def cir_to_cfr(cir: ChannelImpulseResponse | np.ndarray) -> np.ndarray:
    """Full-band channel frequency response (DFT of the taps)."""
    taps = cir.taps if isinstance(cir, ChannelImpulseResponse) else cir
    return fft(taps)


def sample_subcarrier_csi(cfr, grid: FrequencyGrid | None = None) -> np.ndarray:
    """Pick the reported subcarriers out of a full-band response.

    Works on a single response of shape ``(fft,)`` or a batch ``(n, fft)``.
    """
    grid = grid or FrequencyGrid()
    cfr = np.asarray(cfr, dtype=np.complex128)
    return cfr[..., grid.fft_bins(cfr.shape[-1])]


def decompose(csi) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude and principal phase of each value; the phase of 0 is 0."""
    csi = np.asarray(csi, dtype=np.complex128)
    amp = np.abs(csi)
    phase = np.where(amp == 0, 0.0, np.angle(csi))
    # np.angle returns -pi for (-x, -0.0); fold onto the (-pi, pi] convention
    phase = np.where(phase <= -np.pi, np.pi, phase)
    return amp, phase


def recompose(amplitudes, phases) -> np.ndarray:
    return np.asarray(amplitudes) * np.exp(1j * np.asarray(phases))


def validate_csi(csi, count: int = N_SUBCARRIERS) -> np.ndarray:
    csi = np.asarray(csi, dtype=np.complex128)
    if csi.shape[-1] != count:
        raise ChannelError(f"expected {count} subcarrier values, got {csi.shape[-1]}")
    if not np.all(np.isfinite(csi)):
        raise ChannelError("CSI values must be finite")
    return csi
