"""Synthetic 10-class audio dataset and manifest handling.

Each class is a band of fundamental frequencies (log-spaced bands from
120 Hz to 4.8 kHz). A clip is a fundamental with two harmonics at
random amplitudes and phases, a random overall level, and white noise.
The bands jitter enough that neighbouring classes overlap a little, so
the task is learnable in minutes by the small network without being
saturated at 100%.

Manifests are CSV files with header ``path,label,split``; paths are
relative to the manifest's directory.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .features import FeatureExtractor
from .training import LabeledDataset
from .wav import AudioClip, load_wav, save_wav

N_CLASSES = 10
LABELS = [f"tone{i}" for i in range(N_CLASSES)]
F_LO, F_HI = 120.0, 4800.0
NOISE_LEVEL = 0.15
BAND_JITTER = 1.2


def class_fundamental(class_idx: int) -> float:
    """Center fundamental frequency of a class band."""
    return F_LO * (F_HI / F_LO) ** (class_idx / (N_CLASSES - 1))


def make_clip(class_idx: int, rng: np.random.Generator,
              sample_rate: int = 44100, duration: float = 1.0) -> np.ndarray:
    """One synthetic tone+noise clip for a class (fixed draw order)."""
    f0 = class_fundamental(class_idx) * BAND_JITTER ** rng.uniform(-1.0, 1.0)
    t = np.arange(round(sample_rate * duration), dtype=np.float64) / sample_rate
    signal = np.zeros_like(t)
    for h, base_amp in ((1, 1.0), (2, 0.5), (3, 0.25)):
        amp = base_amp * rng.uniform(0.5, 1.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        signal += amp * np.sin(2.0 * np.pi * f0 * h * t + phase)
    signal /= np.max(np.abs(signal))
    level = rng.uniform(0.25, 0.7)
    noise = rng.standard_normal(len(t)) * NOISE_LEVEL
    out = level * signal + level * noise
    peak = np.max(np.abs(out))
    if peak > 0.99:
        out *= 0.99 / peak
    return out.astype(np.float32)


def _split_counts(per_class: int, val_ratio: float) -> tuple:
    n_val = int(round(per_class * val_ratio))
    n_val = min(max(n_val, 0), per_class)
    return per_class - n_val, n_val


def generate(out_dir, per_class: int = 30, seed: int = 0,
             val_ratio: float = 1.0 / 3.0, sample_rate: int = 44100) -> Path:
    """Write ``10 * per_class`` wav clips plus ``manifest.csv``; returns its path.

    Within each class the first clips are the train split and the rest
    validation (``val_ratio`` of the class, rounded). Deterministic
    under ``seed`` down to the file bytes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_train, _ = _split_counts(per_class, val_ratio)
    rows = []
    for class_idx, label in enumerate(LABELS):
        for i in range(per_class):
            name = f"{label}_{i:03d}.wav"
            save_wav(out_dir / name, make_clip(class_idx, rng, sample_rate), sample_rate)
            rows.append((name, label, "train" if i < n_train else "validation"))
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["path", "label", "split"])
        writer.writerows(rows)
    return manifest


def load_manifest(path) -> list:
    """Rows of (absolute wav path, label, split); validates the header."""
    path = Path(path)
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["path", "label", "split"]:
            raise ValueError(f"manifest {path} must start with 'path,label,split'")
        for rec in reader:
            if len(rec) != 3:
                raise ValueError(f"bad manifest row {rec!r}")
            wav, label, split = rec
            if split not in ("train", "validation"):
                raise ValueError(f"unknown split {split!r} in {path}")
            rows.append((path.parent / wav, label, split))
    if not rows:
        raise ValueError(f"manifest {path} has no rows")
    return rows


def featurize_manifest(path, extractor: FeatureExtractor | None = None) -> tuple:
    """Load and featurize a manifest; returns (train, validation, label names).

    Labels map to class indices by sorted label-name order.
    """
    extractor = extractor or FeatureExtractor()
    rows = load_manifest(path)
    labels = sorted({label for _, label, _ in rows})
    index = {label: i for i, label in enumerate(labels)}
    buckets = {"train": ([], []), "validation": ([], [])}
    for wav_path, label, split in rows:
        if not wav_path.exists():
            raise FileNotFoundError(f"manifest entry missing on disk: {wav_path}")
        feats, ys = buckets[split]
        feats.append(extractor(load_wav(wav_path)))
        ys.append(index[label])
    out = []
    for split in ("train", "validation"):
        feats, ys = buckets[split]
        if not feats:
            raise ValueError(f"manifest has no {split} rows")
        out.append(LabeledDataset(np.stack(feats), np.asarray(ys), split=split))
    return out[0], out[1], labels


def make_feature_dataset(per_class: int = 30, seed: int = 0,
                         val_ratio: float = 1.0 / 3.0,
                         sample_rate: int = 44100,
                         extractor: FeatureExtractor | None = None) -> tuple:
    """In-memory equivalent of generate + featurize (no disk round trip)."""
    extractor = extractor or FeatureExtractor()
    rng = np.random.default_rng(seed)
    n_train, _ = _split_counts(per_class, val_ratio)
    feats = {"train": [], "validation": []}
    ys = {"train": [], "validation": []}
    for class_idx in range(N_CLASSES):
        for i in range(per_class):
            clip = AudioClip(make_clip(class_idx, rng, sample_rate), sample_rate)
            split = "train" if i < n_train else "validation"
            feats[split].append(extractor(clip))
            ys[split].append(class_idx)
    train = LabeledDataset(np.stack(feats["train"]), np.asarray(ys["train"]), "train")
    val = LabeledDataset(
        np.stack(feats["validation"]), np.asarray(ys["validation"]), "validation"
    )
    return train, val
