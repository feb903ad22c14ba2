"""Scikit-learn style wrappers around the frontend and the classifier.

These compose with the wider ecosystem::

    from sklearn.pipeline import Pipeline
    pipe = Pipeline([
        ("logmel", LogMelTransformer()),
        ("clf", LowComplexityClassifier(arch="16-16-32-100", max_epochs=100)),
    ])
    pipe.fit(waveforms, labels)
    pipe.predict(waveforms)

``LowComplexityClassifier`` accepts feature maps as ``(n, C, H, W)`` or
flattened ``(n, C*H*W)`` matrices. Fitted attributes carry the usual
trailing underscore; ``get_params``/``set_params``/``clone`` behave as
sklearn expects.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import ensemble as ensemble_mod
from . import model
from .features import FeatureExtractor, FrontendConfig
from .training import LabeledDataset, TrainConfig, train
from .validation import check_feature_batch, check_labels, check_waveform_batch
from .wav import AudioClip


class LogMelTransformer(TransformerMixin, BaseEstimator):
    """Stateless transformer: equal-length waveforms -> log-mel feature maps.

    Parameters mirror :class:`lcnn.features.FrontendConfig`. ``transform``
    takes ``(n_clips, n_samples)`` (or a list of equal-length 1-D arrays)
    and returns ``(n_clips, 1, n_mels, n_frames)`` float32.
    """

    def __init__(self, sample_rate=44100, window_ms=40.0, hop_ms=20.0,
                 n_mels=40, f_min=0.0, f_max=None, log_floor=1e-10):
        self.sample_rate = sample_rate
        self.window_ms = window_ms
        self.hop_ms = hop_ms
        self.n_mels = n_mels
        self.f_min = f_min
        self.f_max = f_max
        self.log_floor = log_floor

    def _extractor(self) -> FeatureExtractor:
        return FeatureExtractor(FrontendConfig(
            sample_rate=self.sample_rate, window_ms=self.window_ms,
            hop_ms=self.hop_ms, n_mels=self.n_mels,
            f_min=self.f_min, f_max=self.f_max, log_floor=self.log_floor,
        ))

    def fit(self, X, y=None):
        check_waveform_batch(X)
        return self

    def transform(self, X):
        X = check_waveform_batch(X)
        extractor = self._extractor()
        return np.stack([
            extractor(AudioClip(row.astype(np.float32), self.sample_rate)) for row in X
        ])


class LowComplexityClassifier(ClassifierMixin, BaseEstimator):
    """CNN classifier over log-mel feature maps.

    Parameters
    ----------
    arch : channel widths as ``"c1-c2-c3-dense"``.
    validation_fraction : share of the training data held out for early
        stopping when no explicit validation set is passed to ``fit``.
    standardize : learn a scalar (mean, std) over the training features
        and bake it into the network as its input normalization.

    Attributes
    ----------
    classes_ : sorted unique labels seen in ``fit``.
    network_ : the trained :class:`lcnn.model.Network`.
    history_ : per-epoch (train loss, val loss, val accuracy) records.
    """

    def __init__(self, arch="16-16-32-100", batch_size=64, learning_rate=1e-3,
                 max_epochs=1000, patience=50, validation_fraction=0.2,
                 standardize=True, seed=0):
        self.arch = arch
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.standardize = standardize
        self.seed = seed

    def _input_shape(self):
        return model.ArchConfig.parse(self.arch).input_shape

    def fit(self, X, y, X_val=None, y_val=None):
        X = check_feature_batch(X, self._input_shape())
        y = check_labels(y, len(X))
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        config = model.ArchConfig.parse(self.arch, n_classes=len(self.classes_))

        if X_val is not None:
            X_val = check_feature_batch(X_val, config.input_shape)
            y_val = check_labels(y_val, len(X_val))
            val_idx = np.searchsorted(self.classes_, y_val)
            if not np.array_equal(self.classes_[val_idx], y_val):
                raise ValueError("validation labels outside the training classes")
            train_set = LabeledDataset(X, y_idx, "train")
            val_set = LabeledDataset(X_val, val_idx, "validation")
        else:
            rng = np.random.default_rng(self.seed)
            perm = rng.permutation(len(X))
            n_val = max(1, int(round(self.validation_fraction * len(X))))
            if n_val >= len(X):
                raise ValueError("validation_fraction leaves no training data")
            val_part, train_part = perm[:n_val], perm[n_val:]
            train_set = LabeledDataset(X[train_part], y_idx[train_part], "train")
            val_set = LabeledDataset(X[val_part], y_idx[val_part], "validation")

        net = model.build(config, seed=self.seed)
        tc = TrainConfig(
            batch_size=self.batch_size, max_epochs=self.max_epochs,
            learning_rate=self.learning_rate, patience=self.patience,
            seed=self.seed, standardize=self.standardize,
        )
        self.network_, self.history_ = train(net, train_set, val_set, tc)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        X = check_feature_batch(X, self.network_.config.input_shape)
        return model.forward_batch(self.network_, X)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]


class EnsembleClassifier(ClassifierMixin, BaseEstimator):
    """Probability-averaging ensemble over already-fitted members.

    ``members`` is a list of :class:`LowComplexityClassifier` (fitted) or
    :class:`lcnn.model.Network` objects sharing one class set.
    """

    def __init__(self, members=()):
        self.members = members

    def _networks(self):
        nets = []
        for m in self.members:
            if isinstance(m, model.Network):
                nets.append(m)
            else:
                check_is_fitted(m, "network_")
                nets.append(m.network_)
        if not nets:
            raise ValueError("ensemble has no members")
        return nets

    def fit(self, X=None, y=None):
        self.networks_ = self._networks()
        n_cls = {n.config.n_classes for n in self.networks_}
        if len(n_cls) != 1:
            raise ValueError("ensemble members disagree on the class count")
        self.classes_ = np.arange(n_cls.pop())
        for m in self.members:
            if hasattr(m, "classes_"):
                self.classes_ = m.classes_
                break
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "networks_")
        X = check_feature_batch(X, self.networks_[0].config.input_shape)
        return ensemble_mod.ensemble_probs(self.networks_, X)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]
