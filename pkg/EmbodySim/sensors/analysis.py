"""Spectral statistics of impact sounds, shared by encoders and classifiers."""

from dataclasses import dataclass

import numpy as np

PAD_FACTOR = 4
PEAK_FLOOR = 0.05
BAND_HALF_WIDTH = 0.35
FRAME_SECONDS = 0.01
ENVELOPE_FLOOR = 1e-2
ONSET_FRAMES = 2


@dataclass(frozen=True)
class SoundStats:
    centroid_hz: float
    fundamental_hz: float
    decay_rate: float


def _padded_length(n: int) -> int:
    return 1 << int(np.ceil(np.log2(max(n, 1) * PAD_FACTOR)))


def spectral_centroid(samples: np.ndarray, sample_rate: int) -> float:
    """Power-weighted mean frequency in Hz (0 for silence)."""
    power = np.abs(np.fft.rfft(samples)) ** 2
    freqs = np.fft.rfftfreq(len(samples), 1.0 / sample_rate)
    total = power.sum()
    if total <= 0:
        return 0.0
    return float((freqs * power).sum() / total)


def fundamental(samples: np.ndarray, sample_rate: int) -> float:
    """Frequency of the lowest spectral peak holding at least 5% of the top power."""
    size = _padded_length(len(samples))
    power = np.abs(np.fft.rfft(samples, n=size)) ** 2
    if power.max() <= 0:
        return 0.0
    freqs = np.fft.rfftfreq(size, 1.0 / sample_rate)
    inner = power[1:-1]
    floor = PEAK_FLOOR * power.max()
    is_peak = (inner > power[:-2]) & (inner >= power[2:]) & (inner >= floor)
    peaks = np.nonzero(is_peak)[0]
    if len(peaks) == 0:
        return float(freqs[int(np.argmax(power))])
    return float(freqs[peaks[0] + 1])


def band_decay_rate(samples: np.ndarray, sample_rate: int, center_hz: float) -> float:
    """Exponential decay rate (1/s) of the band around ``center_hz``.

    The band (center +/- 35%) is isolated with an FFT mask; the rate is the
    negated slope of log frame-RMS over 10 ms frames, ignoring the onset frames
    and frames below 1% of the loudest one.
    """
    n = len(samples)
    size = _padded_length(n)
    spectrum = np.fft.rfft(samples, n=size)
    freqs = np.fft.rfftfreq(size, 1.0 / sample_rate)
    mask = np.abs(freqs - center_hz) <= BAND_HALF_WIDTH * center_hz
    band = np.fft.irfft(spectrum * mask, n=size)[:n]

    frame = max(1, int(round(FRAME_SECONDS * sample_rate)))
    count = n // frame
    if count < 3:
        return 0.0
    frames = band[: count * frame].reshape(count, frame)
    rms = np.sqrt(np.mean(frames**2, axis=1))
    times = (np.arange(count) + 0.5) * frame / sample_rate
    keep = rms >= ENVELOPE_FLOOR * rms.max()
    keep[:ONSET_FRAMES] = False
    if keep.sum() < 2:
        return 0.0
    slope = np.polyfit(times[keep], np.log(rms[keep]), 1)[0]
    return float(-slope)


def sound_stats(samples: np.ndarray, sample_rate: int) -> SoundStats:
    """Centroid, fundamental and fundamental-band decay rate of a clip."""
    samples = np.asarray(samples, dtype=np.float64)
    f0 = fundamental(samples, sample_rate)
    decay = band_decay_rate(samples, sample_rate, f0) if f0 > 0 else 0.0
    return SoundStats(
        centroid_hz=spectral_centroid(samples, sample_rate),
        fundamental_hz=f0,
        decay_rate=decay,
    )
