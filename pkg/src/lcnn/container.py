"""Binary ``.lcnn`` container for networks and cached feature maps.

Layout (all little-endian):

    header   magic b"LCNN" | u16 version | u16 reserved
    sections tag (4 bytes) | u64 payload length | payload | u32 crc32(payload)
    trailer  tag b"END " whose payload is a u32 crc32 of every preceding byte

Model files carry one ARCH section, one LAYR section per layer (each
holding that layer's named tensors, with per-tensor scale/zero-point for
int8 data), and one META key-value section. Feature files carry META
plus a single FEAT tensor section. Files are written deterministically:
saving a loaded network reproduces the input bytes exactly.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .exceptions import ContainerError
from .model import ArchConfig, Network, param_shapes

MAGIC = b"LCNN"
VERSION = 1

_DTYPES = {0: np.float32, 1: np.float64, 2: np.int8}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1, np.dtype(np.int8): 2}

LAYER_KINDS = {"conv": "conv3x3", "bn": "batchnorm", "dense": "dense"}


def _layer_groups(config: ArchConfig):
    """Layer name -> ordered tensor suffixes, in storage order."""
    groups = []
    for i in (1, 2, 3):
        groups.append((f"conv{i}", "conv3x3", ("weight", "bias")))
        groups.append((f"bn{i}", "batchnorm", ("gamma", "beta", "mean", "var")))
    groups.append(("dense1", "dense", ("weight", "bias")))
    groups.append(("dense2", "dense", ("weight", "bias")))
    return groups


# --- encoding helpers ------------------------------------------------------


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _pack_tensor(name, arr, qparam=None) -> bytes:
    out = [_pack_str(name)]
    code = _DTYPE_CODES.get(arr.dtype)
    if code is None:
        raise ContainerError(f"unsupported tensor dtype {arr.dtype}")
    out.append(struct.pack("<BB", code, arr.ndim))
    out.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    if qparam is not None:
        scale, zero_point = qparam
        out.append(struct.pack("<Bdi", 1, float(scale), int(zero_point)))
    else:
        out.append(struct.pack("<B", 0))
    out.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(out)


def _section(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<Q", len(payload)) + payload + struct.pack(
        "<I", zlib.crc32(payload)
    )


def _pack_meta(meta: dict) -> bytes:
    items = sorted((str(k), str(v)) for k, v in meta.items())
    out = [struct.pack("<I", len(items))]
    for k, v in items:
        raw_v = v.encode("utf-8")
        out.append(_pack_str(k) + struct.pack("<I", len(raw_v)) + raw_v)
    return b"".join(out)


def _pack_arch(config: ArchConfig) -> bytes:
    return struct.pack(
        "<5IB3Q",
        config.c1, config.c2, config.c3, config.dense, config.n_classes,
        3, *config.input_shape,
    )


# --- decoding helpers ------------------------------------------------------


class _Reader:
    def __init__(self, buf: bytes, section: str):
        self.buf = buf
        self.pos = 0
        self.section = section

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ContainerError("truncated payload", section=self.section)
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")


def _read_tensor(r: _Reader):
    name = r.string()
    code, ndim = r.unpack("<BB")
    if code not in _DTYPES:
        raise ContainerError(f"unknown dtype code {code}", section=r.section)
    shape = r.unpack(f"<{ndim}Q")
    (qflag,) = r.unpack("<B")
    qparam = None
    if qflag:
        scale, zero_point = r.unpack("<di")
        qparam = (scale, zero_point)
    dtype = np.dtype(_DTYPES[code])
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    data = np.frombuffer(r.take(count * dtype.itemsize), dtype=dtype).reshape(shape)
    return name, data.copy(), qparam


# --- public API ------------------------------------------------------------


def network_to_bytes(net: Network) -> bytes:
    """Serialize a network (float32 or int8) to container bytes."""
    net.validate()
    out = [MAGIC, struct.pack("<HH", VERSION, 0)]
    out.append(_section(b"ARCH", _pack_arch(net.config)))
    for lname, kind, suffixes in _layer_groups(net.config):
        payload = [_pack_str(lname), _pack_str(kind), struct.pack("<H", len(suffixes))]
        for suffix in suffixes:
            key = f"{lname}.{suffix}"
            qparam = net.qparams.get(key) if net.qparams else None
            payload.append(_pack_tensor(suffix, net.params[key], qparam))
        out.append(_section(b"LAYR", b"".join(payload)))
    meta = dict(net.meta)
    meta["precision"] = net.precision
    meta["name"] = net.name
    meta["arch"] = net.config.arch_string
    meta["layout"] = "channels_first_row_major"
    if net.input_norm is not None:
        meta["input_norm_mean"] = repr(float(net.input_norm[0]))
        meta["input_norm_std"] = repr(float(net.input_norm[1]))
    out.append(_section(b"META", _pack_meta(meta)))
    body = b"".join(out)
    return body + _section(b"END ", struct.pack("<I", zlib.crc32(body)))


def save(net: Network, path) -> None:
    with open(path, "wb") as f:
        f.write(network_to_bytes(net))


def _iter_sections(blob: bytes):
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise ContainerError("bad magic; not a container file", section="header")
    (version, _) = struct.unpack("<HH", blob[4:8])
    if version != VERSION:
        raise ContainerError(f"unsupported version {version}", section="header")
    pos = 8
    saw_end = False
    while pos < len(blob):
        if pos + 12 > len(blob):
            raise ContainerError("truncated section header", section=f"@{pos}")
        tag = blob[pos : pos + 4]
        (length,) = struct.unpack("<Q", blob[pos + 4 : pos + 12])
        start = pos + 12
        end = start + length
        if end + 4 > len(blob):
            raise ContainerError("truncated section", section=tag.decode("ascii", "replace"))
        payload = blob[start:end]
        (crc,) = struct.unpack("<I", blob[end : end + 4])
        if zlib.crc32(payload) != crc:
            raise ContainerError("checksum mismatch", section=tag.decode("ascii", "replace"))
        if tag == b"END ":
            (global_crc,) = struct.unpack("<I", payload)
            if zlib.crc32(blob[:pos]) != global_crc:
                raise ContainerError("global checksum mismatch", section="END")
            saw_end = True
            if end + 4 != len(blob):
                raise ContainerError("trailing bytes after END", section="END")
            break
        yield tag, payload
        pos = end + 4
    if not saw_end:
        raise ContainerError("missing END trailer", section="END")


def network_from_bytes(blob: bytes) -> Network:
    config = None
    layers = {}
    meta = {}
    for tag, payload in _iter_sections(blob):
        if tag == b"ARCH":
            r = _Reader(payload, "ARCH")
            c1, c2, c3, dense, n_classes, ndim = r.unpack("<5IB")
            shape = tuple(int(d) for d in r.unpack(f"<{ndim}Q"))
            config = ArchConfig(c1, c2, c3, dense, n_classes=n_classes, input_shape=shape)
        elif tag == b"LAYR":
            r = _Reader(payload, "LAYR")
            lname = r.string()
            r.string()  # kind, informational
            (n_tensors,) = r.unpack("<H")
            for _ in range(n_tensors):
                tname, arr, qparam = _read_tensor(r)
                layers[f"{lname}.{tname}"] = (arr, qparam)
        elif tag == b"META":
            r = _Reader(payload, "META")
            (count,) = r.unpack("<I")
            for _ in range(count):
                key = r.string()
                (vlen,) = r.unpack("<I")
                meta[key] = r.take(vlen).decode("utf-8")
    if config is None:
        raise ContainerError("missing ARCH section", section="ARCH")
    missing = set(param_shapes(config)) - set(layers)
    if missing:
        raise ContainerError(f"missing tensors {sorted(missing)}", section="LAYR")

    precision = meta.pop("precision", "float32")
    name = meta.pop("name", "")
    meta.pop("arch", None)
    meta.pop("layout", None)
    input_norm = None
    if "input_norm_mean" in meta:
        input_norm = (float(meta.pop("input_norm_mean")), float(meta.pop("input_norm_std")))
    params = {k: v[0] for k, v in layers.items()}
    qparams = {k: v[1] for k, v in layers.items() if v[1] is not None} or None
    net = Network(
        config=config, params=params, precision=precision,
        qparams=qparams, input_norm=input_norm, name=name, meta=meta,
    )
    net.validate()
    return net


def load(path) -> Network:
    with open(path, "rb") as f:
        return network_from_bytes(f.read())


def save_features(path, features, meta=None) -> None:
    """Write a feature map (or any float tensor) as a FEAT container."""
    arr = np.asarray(features, dtype=np.float32)
    out = [MAGIC, struct.pack("<HH", VERSION, 0)]
    out.append(_section(b"META", _pack_meta(meta or {})))
    out.append(_section(b"FEAT", _pack_tensor("logmel", arr)))
    body = b"".join(out)
    with open(path, "wb") as f:
        f.write(body + _section(b"END ", struct.pack("<I", zlib.crc32(body))))


def load_features(path):
    """Read back a FEAT container; returns (array, meta)."""
    with open(path, "rb") as f:
        blob = f.read()
    arr = None
    meta = {}
    for tag, payload in _iter_sections(blob):
        if tag == b"FEAT":
            _, arr, _ = _read_tensor(_Reader(payload, "FEAT"))
        elif tag == b"META":
            r = _Reader(payload, "META")
            (count,) = r.unpack("<I")
            for _ in range(count):
                key = r.string()
                (vlen,) = r.unpack("<I")
                meta[key] = r.take(vlen).decode("utf-8")
    if arr is None:
        raise ContainerError("missing FEAT section", section="FEAT")
    return arr, meta
