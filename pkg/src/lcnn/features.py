"""Log-mel feature extraction.

A 1-second mono clip at the configured rate becomes a (1, 40, 51)
log-mel map:

* framing: window of ``round(0.040 * rate)`` samples, hop of
  ``round(0.020 * rate)``, reflect padding of half a window on each
  side, so a clip of N samples yields ``1 + floor(N / hop)`` frames
  (51 for one second at 44.1 kHz);
* window: periodic (DFT-even) Hamming;
* spectrum: magnitude of an rFFT sized to the next power of two at or
  above the window length (2048 at 44.1 kHz), 1025 bins;
* mel projection: 40 triangular filters, centers equally spaced on
  ``mel(f) = 2595 * log10(1 + f / 700)`` between 0 Hz and rate/2,
  applied to the power spectrum;
* compression: natural log of (energy + 1e-10), transposed to
  (mel, frames).

Extraction is pure and deterministic; clips may be featurized in
parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .exceptions import ConfigError
from .wav import AudioClip

LOG_FLOOR = 1e-10


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def hamming_periodic(n: int) -> np.ndarray:
    """DFT-even Hamming window of length n."""
    k = np.arange(n, dtype=np.float64)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / n)


def mel_filterbank(n_mels: int, fft_size: int, sample_rate: int,
                   f_min: float = 0.0, f_max: float | None = None) -> np.ndarray:
    """(n_mels, fft_size // 2 + 1) triangular filter matrix."""
    if n_mels < 1:
        raise ConfigError("n_mels must be >= 1")
    if f_max is None:
        f_max = sample_rate / 2.0
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    bin_freqs = np.arange(fft_size // 2 + 1, dtype=np.float64) * sample_rate / fft_size
    bank = np.zeros((n_mels, len(bin_freqs)), dtype=np.float64)
    for m in range(n_mels):
        lo, center, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    if np.any(bank.sum(axis=1) == 0.0):
        raise ConfigError(
            f"{n_mels} mel bands are not resolvable by a {fft_size}-point FFT "
            f"at {sample_rate} Hz"
        )
    return bank


@dataclass(frozen=True)
class FrontendConfig:
    sample_rate: int = 44100
    window_ms: float = 40.0
    hop_ms: float = 20.0
    n_mels: int = 40
    f_min: float = 0.0
    f_max: float | None = None
    log_floor: float = LOG_FLOOR
    mel_scale: str = "htk"
    spectrum: str = "power"

    @property
    def window_samples(self) -> int:
        return round(self.window_ms / 1000.0 * self.sample_rate)

    @property
    def hop_samples(self) -> int:
        return round(self.hop_ms / 1000.0 * self.sample_rate)

    @property
    def fft_size(self) -> int:
        n = 1
        while n < self.window_samples:
            n *= 2
        return n

    def as_meta(self) -> dict:
        out = {f"frontend.{k}": str(v) for k, v in asdict(self).items()}
        return out


class FeatureExtractor:
    """Configured log-mel extractor; ``__call__`` maps clip -> (1, mels, frames)."""

    def __init__(self, config: FrontendConfig | None = None, **overrides):
        if config is None:
            config = FrontendConfig(**overrides)
        elif overrides:
            raise ConfigError("pass either a FrontendConfig or keyword overrides")
        self.config = config
        self._window = hamming_periodic(config.window_samples)
        self._bank = mel_filterbank(
            config.n_mels, config.fft_size, config.sample_rate,
            config.f_min, config.f_max,
        )

    def _frames(self, samples: np.ndarray) -> np.ndarray:
        cfg = self.config
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("expected mono 1-D samples")
        if len(x) < cfg.hop_samples:
            raise ValueError(
                f"clip of {len(x)} samples is shorter than one hop ({cfg.hop_samples})"
            )
        pad = cfg.window_samples // 2
        x = np.pad(x, pad, mode="reflect")
        n_frames = (len(x) - cfg.window_samples) // cfg.hop_samples + 1
        idx = (
            np.arange(cfg.window_samples)[None, :]
            + cfg.hop_samples * np.arange(n_frames)[:, None]
        )
        return x[idx]

    def stft_magnitude(self, samples) -> np.ndarray:
        """(frames, fft_size // 2 + 1) magnitude spectrogram."""
        frames = self._frames(samples) * self._window
        return np.abs(np.fft.rfft(frames, n=self.config.fft_size, axis=1))

    def log_mel(self, clip: AudioClip) -> np.ndarray:
        """(1, n_mels, frames) float32 log-mel map of a mono clip."""
        if clip.sample_rate != self.config.sample_rate:
            raise ValueError(
                f"clip rate {clip.sample_rate} != configured "
                f"{self.config.sample_rate}; resampling is not supported"
            )
        mag = self.stft_magnitude(clip.samples)
        spectrum = mag ** 2 if self.config.spectrum == "power" else mag
        mel = self._bank @ spectrum.T  # (mels, frames)
        feat = np.log(mel + self.config.log_floor)
        return feat[None].astype(np.float32)

    def __call__(self, clip: AudioClip) -> np.ndarray:
        return self.log_mel(clip)


def log_mel(clip: AudioClip, config: FrontendConfig | None = None) -> np.ndarray:
    """One-shot log-mel extraction with the default (or given) config."""
    return FeatureExtractor(config)(clip)
