import struct

import numpy as np
import pytest

from lcnn.exceptions import AudioError
from lcnn.wav import load_wav, save_wav


def test_float_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    samples = rng.uniform(-1, 1, 4410).astype(np.float32)
    path = tmp_path / "x.wav"
    save_wav(path, samples, 44100)
    clip = load_wav(path)
    assert clip.sample_rate == 44100
    assert np.array_equal(clip.samples, samples)


def test_pcm16_full_scale_value(tmp_path):
    path = tmp_path / "x.wav"
    save_wav(path, np.array([1.0, -1.0, 0.0], np.float32), 8000, fmt="pcm16")
    clip = load_wav(path)
    assert clip.samples[0] == pytest.approx(32767 / 32768)
    assert clip.samples[1] == -1.0
    assert clip.samples[2] == 0.0


def test_stereo_downmix(tmp_path):
    # L=1, R=-1 cancels to 0 after the mono average
    payload = np.array([1.0, -1.0, 0.5, 0.5], dtype="<f4").tobytes()
    fmt = struct.pack("<HHIIHH", 3, 2, 44100, 44100 * 8, 8, 32)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    path = tmp_path / "stereo.wav"
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    clip = load_wav(path)
    assert np.array_equal(clip.samples, np.array([0.0, 0.5], np.float32))


def test_missing_riff_magic(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"JUNKxxxxWAVE" + b"\x00" * 20)
    with pytest.raises(AudioError) as err:
        load_wav(path)
    assert err.value.offset == 0


def test_missing_wave_type(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"RIFF" + struct.pack("<I", 20) + b"AVI " + b"\x00" * 20)
    with pytest.raises(AudioError) as err:
        load_wav(path)
    assert err.value.offset == 8


def test_truncated_chunk_reports_offset(tmp_path):
    fmt = struct.pack("<HHIIHH", 1, 1, 8000, 16000, 2, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", 1000) + b"\x00" * 4  # claims 1000, has 4
    path = tmp_path / "trunc.wav"
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    with pytest.raises(AudioError) as err:
        load_wav(path)
    assert err.value.offset is not None


def test_unsupported_codec(tmp_path):
    fmt = struct.pack("<HHIIHH", 7, 1, 8000, 8000, 1, 8)  # mu-law
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", 2) + b"\x00\x00"
    path = tmp_path / "ulaw.wav"
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    with pytest.raises(AudioError, match="unsupported codec"):
        load_wav(path)
