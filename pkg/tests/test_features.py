import numpy as np
import pytest

from lcnn.exceptions import ConfigError
from lcnn.features import (
    FeatureExtractor,
    FrontendConfig,
    hamming_periodic,
    hz_to_mel,
    log_mel,
    mel_filterbank,
    mel_to_hz,
)
from lcnn.wav import AudioClip


@pytest.fixture(scope="module")
def extractor():
    return FeatureExtractor()


def tone(freq, n=44100, rate=44100, amp=0.5):
    t = np.arange(n) / rate
    return (amp * np.sin(2 * np.pi * freq * t)).astype(np.float32)


class TestStft:
    def test_one_second_gives_51_frames(self, extractor):
        mag = extractor.stft_magnitude(np.zeros(44100, np.float32))
        assert mag.shape == (51, extractor.config.fft_size // 2 + 1)

    def test_window_hop_fft_sizes(self, extractor):
        cfg = extractor.config
        assert cfg.window_samples == 1764
        assert cfg.hop_samples == 882
        assert cfg.fft_size == 2048

    def test_zero_signal_zero_magnitudes(self, extractor):
        assert not extractor.stft_magnitude(np.zeros(44100, np.float32)).any()

    def test_too_short_clip_rejected(self, extractor):
        with pytest.raises(ValueError):
            extractor.stft_magnitude(np.zeros(100, np.float32))

    def test_sinusoid_at_bin_center_concentrates(self, extractor):
        # oracle: direct windowed DFT of one interior frame; the Hamming
        # mainlobe puts >90% of the frame energy in the peak bin +-1
        cfg = extractor.config
        k_bin = 200
        f0 = k_bin * cfg.sample_rate / cfg.fft_size
        sig = tone(f0, amp=1.0).astype(np.float64)
        mag = extractor.stft_magnitude(sig)
        frame_idx = 25
        spec = mag[frame_idx] ** 2
        assert spec.argmax() == k_bin
        assert spec[k_bin - 1 : k_bin + 2].sum() / spec.sum() > 0.9

        window = hamming_periodic(cfg.window_samples)
        pad = cfg.window_samples // 2
        padded = np.pad(sig, pad, mode="reflect")
        start = frame_idx * cfg.hop_samples
        frame = padded[start : start + cfg.window_samples] * window
        n = np.arange(cfg.window_samples)
        for k in range(k_bin - 3, k_bin + 4):
            oracle = np.abs(np.sum(frame * np.exp(-2j * np.pi * k * n / cfg.fft_size)))
            assert abs(oracle - mag[frame_idx, k]) < 1e-9 * max(oracle, 1.0)

    def test_hop_shift_moves_columns_by_one(self, extractor):
        rng = np.random.default_rng(3)
        hop = extractor.config.hop_samples
        base = rng.uniform(-0.5, 0.5, 44100 + hop).astype(np.float32)
        a = extractor.stft_magnitude(base[:44100])
        b = extractor.stft_magnitude(base[hop : hop + 44100])
        # interior frames of the shifted clip replicate the originals
        assert np.abs(a[3:49] - b[2:48]).max() < 1e-5


class TestMelFilterbank:
    def test_rows_positive_and_centers_monotone(self):
        bank = mel_filterbank(40, 2048, 44100)
        assert bank.shape == (40, 1025)
        assert np.all(bank.sum(axis=1) > 0)
        centers = bank.argmax(axis=1)
        assert np.all(np.diff(centers) > 0)

    def test_flat_spectrum_gives_row_sums(self):
        bank = mel_filterbank(40, 2048, 44100)
        flat = np.ones(1025)
        out = bank @ flat
        row_sums = bank.sum(axis=1)
        assert np.allclose(out, row_sums, rtol=0, atol=1e-12)
        # triangle area grows with bandwidth: sums follow the analytic
        # half-base width within sampling wiggle
        edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(22050.0), 42))
        widths = (edges[2:] - edges[:-2]) / 2.0
        expected = widths / (44100 / 2048)
        ratio = row_sums / expected
        assert ratio.max() / ratio.min() < 1.1

    def test_mel_scale_round_trip(self):
        f = np.array([0.0, 440.0, 7040.0, 22050.0])
        assert np.allclose(mel_to_hz(hz_to_mel(f)), f, rtol=1e-12, atol=1e-9)

    def test_too_many_bands_rejected(self):
        with pytest.raises(ConfigError):
            mel_filterbank(600, 256, 44100)


class TestLogMel:
    def test_one_second_shape(self, extractor):
        feat = extractor(AudioClip(tone(440.0), 44100))
        assert feat.shape == (1, 40, 51)
        assert feat.dtype == np.float32

    def test_silence_floor(self, extractor):
        feat = extractor(AudioClip(np.zeros(44100, np.float32), 44100))
        assert np.allclose(feat, np.log(1e-10), atol=1e-5)
        assert np.all(feat >= np.log(1e-10) - 1e-5)

    def test_deterministic(self, extractor):
        clip = AudioClip(tone(523.0), 44100)
        assert np.array_equal(extractor(clip), extractor(clip))

    def test_shape_independent_of_content(self, extractor):
        rng = np.random.default_rng(0)
        for _ in range(3):
            clip = AudioClip(rng.uniform(-1, 1, 44100).astype(np.float32), 44100)
            assert extractor(clip).shape == (1, 40, 51)

    def test_doubling_amplitude_adds_2log2(self, extractor):
        clip = tone(880.0, amp=0.25)
        f1 = extractor(AudioClip(clip, 44100)).astype(np.float64)
        f2 = extractor(AudioClip(2 * clip, 44100)).astype(np.float64)
        strong = f1 > np.log(1e-10) + 8  # well above the floor
        assert strong.any()
        diff = (f2 - f1)[strong]
        assert np.abs(diff - 2 * np.log(2)).max() < 1e-6

    def test_rate_mismatch_rejected(self, extractor):
        with pytest.raises(ValueError):
            extractor(AudioClip(np.zeros(16000, np.float32), 16000))

    def test_one_shot_helper(self):
        feat = log_mel(AudioClip(tone(300.0), 44100))
        assert feat.shape == (1, 40, 51)

    def test_config_override(self):
        ex = FeatureExtractor(FrontendConfig(sample_rate=22050))
        feat = ex(AudioClip(tone(300.0, n=22050, rate=22050), 22050))
        assert feat.shape[0:2] == (1, 40)
