import numpy as np
import pytest

from lcnn import ArchConfig, build, container, forward_batch
from lcnn.exceptions import ContainerError
from lcnn.quantization import quantize_model


def test_roundtrip_bytes_identical(tmp_path, unpruned_net):
    p1, p2 = tmp_path / "a.lcnn", tmp_path / "b.lcnn"
    container.save(unpruned_net, p1)
    net2 = container.load(p1)
    container.save(net2, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_roundtrip_preserves_everything(tmp_path, unpruned_net, rng):
    net = unpruned_net.copy()
    net.name = "Unpruned"
    net.input_norm = (-11.5, 4.25)
    net.meta["note"] = "hello"
    path = tmp_path / "n.lcnn"
    container.save(net, path)
    loaded = container.load(path)
    assert loaded.name == "Unpruned"
    assert loaded.input_norm == (-11.5, 4.25)
    assert loaded.meta["note"] == "hello"
    assert loaded.config == net.config
    for key in net.params:
        assert np.array_equal(loaded.params[key], net.params[key])
    x = rng.standard_normal((2, 1, 40, 51)).astype(np.float32)
    assert np.array_equal(forward_batch(net, x), forward_batch(loaded, x))


def test_quantized_roundtrip(tmp_path, unpruned_net):
    qnet = quantize_model(unpruned_net)
    path = tmp_path / "q.lcnn"
    container.save(qnet, path)
    loaded = container.load(path)
    assert loaded.precision == "int8"
    for key in qnet.params:
        assert loaded.params[key].dtype == np.int8
        assert np.array_equal(loaded.params[key], qnet.params[key])
        assert loaded.qparams[key] == qnet.qparams[key]
    container.save(loaded, tmp_path / "q2.lcnn")
    assert path.read_bytes() == (tmp_path / "q2.lcnn").read_bytes()


def test_loaded_config_reports_arch(tmp_path):
    net = build(ArchConfig.parse("16-12-32-100"), seed=0)
    path = tmp_path / "c2.lcnn"
    container.save(net, path)
    assert container.load(path).config.arch_string == "16-12-32-100"


def test_corrupted_payload_names_section(tmp_path, unpruned_net):
    path = tmp_path / "x.lcnn"
    container.save(unpruned_net, path)
    blob = bytearray(path.read_bytes())
    # flip a byte inside the first LAYR payload
    idx = blob.index(b"LAYR") + 12 + 40
    blob[idx] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ContainerError, match="LAYR"):
        container.load(path)


def test_truncation_rejected(tmp_path, unpruned_net):
    path = tmp_path / "x.lcnn"
    container.save(unpruned_net, path)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(ContainerError):
        container.load(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "x.lcnn"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ContainerError, match="magic"):
        container.load(path)


def test_no_partial_network_on_error(tmp_path, unpruned_net):
    path = tmp_path / "x.lcnn"
    container.save(unpruned_net, path)
    blob = path.read_bytes()
    # drop the END trailer entirely
    path.write_bytes(blob[:-16])
    with pytest.raises(ContainerError):
        container.load(path)


def test_feature_container_roundtrip(tmp_path, rng):
    feat = rng.standard_normal((1, 40, 51)).astype(np.float32)
    path = tmp_path / "f.lcnn"
    container.save_features(path, feat, meta={"frontend.sample_rate": "44100"})
    arr, meta = container.load_features(path)
    assert np.array_equal(arr, feat)
    assert meta["frontend.sample_rate"] == "44100"
