"""Hand-region classifiers with a scikit-learn style interface.

``HandRegionClassifier(variant="hrc")`` looks only at the 256x256 region crop;
``variant="hrc_p"`` also consumes the 256x512 pose half of the same person.
Both are trained with Adam on categorical cross-entropy, reshuffling the data
every epoch from a seeded generator.
"""
from __future__ import annotations

import contextlib
import hashlib
import io
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import torch
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted
from torch.nn import functional as F

from .exceptions import CheckpointError, ConfigError, DataError
from .networks import FULL, HRC, HRC_P, REDUCED, build_network
from .validation import CLASSES, unpack_inputs

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "handgun-pose-checkpoint/1"
SCORE_THRESHOLD = 0.5
_DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass(frozen=True)
class ModelConfig:
    variant: str = HRC
    backbone_scale: str = REDUCED
    input_region: Tuple[int, int, int] = (256, 256, 3)
    input_pose: Optional[Tuple[int, int, int]] = None

    def __post_init__(self):
        if self.variant not in (HRC, HRC_P):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.backbone_scale not in (FULL, REDUCED):
            raise ConfigError(f"unknown backbone scale {self.backbone_scale!r}")
        if tuple(self.input_region) != (256, 256, 3):
            raise ConfigError(f"region input must be 256x256x3, got {self.input_region}")
        if self.variant == HRC_P:
            if self.input_pose is None:
                object.__setattr__(self, "input_pose", (512, 256, 1))
            elif tuple(self.input_pose) != (512, 256, 1):
                raise ConfigError(f"pose input must be 512 tall, 256 wide, 1 channel; got {self.input_pose}")
        elif self.input_pose is not None:
            raise ConfigError("the appearance-only model takes no pose input")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    epochs: int = 60
    learning_rate: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be at least 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class ModelCheckpoint:
    config: ModelConfig
    parameters: dict
    training_meta: dict = field(default_factory=dict)


@contextlib.contextmanager
def _torch_threads(n):
    if n is None:
        yield
        return
    prev = torch.get_num_threads()
    torch.set_num_threads(n)
    try:
        yield
    finally:
        torch.set_num_threads(prev)


def dataset_fingerprint(crops, poses, y) -> str:
    h = hashlib.sha256()
    for arr in (crops, poses, y):
        if arr is not None:
            h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


class HandRegionClassifier(ClassifierMixin, BaseEstimator):
    """Binary handgun / no-handgun classifier over hand-region crops.

    Parameters
    ----------
    variant : {"hrc", "hrc_p"}
        Appearance only, or appearance fused with the pose half.
    backbone : {"full", "reduced"}
        Darknet-53 or a small eight-layer strided stack with the same interface.
    epochs, batch_size, learning_rate, seed
        Training recipe; defaults are 60 epochs of batch 4 at Adam step 1e-4.
    dtype : {"float32", "float64"}
    n_threads : int or None
        Torch CPU threads used while fitting; 1 keeps loss traces reproducible.
    backbone_weights : path or None
        Optional state dict loaded into the appearance backbone before training.

    Attributes
    ----------
    classes_ : ndarray of str, ``["no_handgun", "handgun"]``
    model_ : torch.nn.Module
    loss_curve_ : list of float, mean training loss per epoch
    initial_loss_ : float, training-set loss before the first update
    """

    def __init__(self, variant=HRC, backbone=REDUCED, epochs=60, batch_size=4, learning_rate=1e-4,
                 seed=0, dtype="float32", n_threads=1, backbone_weights=None, verbose=False):
        self.variant = variant
        self.backbone = backbone
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.dtype = dtype
        self.n_threads = n_threads
        self.backbone_weights = backbone_weights
        self.verbose = verbose

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig(self.variant, self.backbone)

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(self.batch_size, self.epochs, self.learning_rate, self.seed)

    def _torch_dtype(self):
        try:
            return _DTYPES[self.dtype]
        except KeyError:
            raise ConfigError(f"unsupported dtype {self.dtype!r}") from None

    def initialize(self):
        """Build a freshly seeded network; predictions work without fitting."""
        cfg = self.model_config
        torch.manual_seed(self.seed)
        net = build_network(cfg.variant, cfg.backbone_scale).to(self._torch_dtype())
        if self.backbone_weights is not None:
            state = torch.load(self.backbone_weights, map_location="cpu", weights_only=True)
            net.appearance.load_state_dict(state)
        self.model_ = net.eval()
        self.classes_ = np.array(CLASSES)
        self.loss_curve_ = []
        self.initial_loss_ = None
        self.training_meta_ = {}
        return self

    def _unpack(self, X, y=None):
        np_dtype = np.float64 if self.dtype == "float64" else np.float32
        return unpack_inputs(X, self.variant == HRC_P, y, np_dtype)

    def _tensors(self, crops, poses):
        dt = self._torch_dtype()
        x = torch.from_numpy(crops).to(dt)
        p = None if poses is None else torch.from_numpy(poses).to(dt)
        return x, p

    def _batch_loss(self, x, p, y, idx):
        logits = self.model_(x[idx], None if p is None else p[idx])
        return F.cross_entropy(logits, y[idx])

    def fit(self, X, y=None):
        cfg = self.train_config
        crops, poses, labels = self._unpack(X, y)
        if labels is None:
            raise DataError("fit needs labels")
        if crops.shape[0] == 0:
            raise DataError("cannot train on an empty dataset")
        self.initialize()
        net = self.model_
        x, p = self._tensors(crops, poses)
        t = torch.from_numpy(labels)
        n = x.shape[0]
        gen = torch.Generator().manual_seed(cfg.seed)
        opt = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)

        with _torch_threads(self.n_threads):
            self.initial_loss_ = self._mean_loss(x, p, t)
            net.train()
            for epoch in range(cfg.epochs):
                order = torch.randperm(n, generator=gen)
                total = 0.0
                for start in range(0, n, cfg.batch_size):
                    idx = order[start:start + cfg.batch_size]
                    opt.zero_grad()
                    loss = self._batch_loss(x, p, t, idx)
                    loss.backward()
                    opt.step()
                    total += loss.item() * len(idx)
                self.loss_curve_.append(total / n)
                if self.verbose:
                    log.info("epoch %d/%d loss %.6f", epoch + 1, cfg.epochs, self.loss_curve_[-1])
            net.eval()

        self.n_iter_ = cfg.epochs
        self.training_meta_ = {
            "epochs_run": cfg.epochs,
            "initial_loss": self.initial_loss_,
            "loss_curve": list(self.loss_curve_),
            "final_loss": self.loss_curve_[-1],
            "seed": cfg.seed,
            "train_config": asdict(cfg),
            "dataset_fingerprint": dataset_fingerprint(crops, poses, labels),
            "n_samples": int(n),
        }
        return self

    @torch.no_grad()
    def _mean_loss(self, x, p, t, chunk=16):
        was_training = self.model_.training
        self.model_.eval()
        total = 0.0
        for s in range(0, x.shape[0], chunk):
            idx = torch.arange(s, min(s + chunk, x.shape[0]))
            total += self._batch_loss(x, p, t, idx).item() * len(idx)
        self.model_.train(was_training)
        return total / x.shape[0]

    @torch.no_grad()
    def predict_proba(self, X, chunk=16):
        """Class probabilities, columns ordered as ``classes_``."""
        check_is_fitted(self, "model_")
        crops, poses, _ = self._unpack(X)
        x, p = self._tensors(crops, poses)
        out = []
        for s in range(0, x.shape[0], chunk):
            logits = self.model_(x[s:s + chunk], None if p is None else p[s:s + chunk])
            out.append(torch.softmax(logits.double(), dim=1).numpy())
        if not out:
            return np.zeros((0, 2))
        return np.concatenate(out)

    def predict(self, X):
        scores = self.predict_proba(X)[:, 1]
        return np.where(scores >= SCORE_THRESHOLD, CLASSES[1], CLASSES[0])

    def score(self, X, y=None, sample_weight=None):
        """Mean accuracy; labels default to those carried by labelled regions."""
        _, _, labels = self._unpack(X, y)
        if labels is None:
            raise DataError("score needs labels")
        pred = (self.predict_proba(X)[:, 1] >= SCORE_THRESHOLD).astype(np.int64)
        return float(np.average(pred == labels, weights=sample_weight))

    def predict_region(self, region, pose_half=None):
        """Classify one crop; returns ``(label, handgun_score)``."""
        X = region if self.variant == HRC else (region, pose_half)
        if self.variant == HRC_P and pose_half is None:
            raise DataError("the pose-fused model needs a pose half")
        score = float(self.predict_proba(X)[0, 1])
        return (CLASSES[1] if score >= SCORE_THRESHOLD else CLASSES[0]), score

    def checkpoint(self) -> ModelCheckpoint:
        check_is_fitted(self, "model_")
        state = {k: v.detach().clone() for k, v in self.model_.state_dict().items()}
        return ModelCheckpoint(self.model_config, state, dict(self.training_meta_))


def build_model(cfg: ModelConfig, seed=0, dtype="float32") -> HandRegionClassifier:
    """An initialized, untrained classifier for ``cfg``."""
    return HandRegionClassifier(cfg.variant, cfg.backbone_scale, seed=seed, dtype=dtype).initialize()


def train(model: HandRegionClassifier, dataset, cfg: TrainConfig = TrainConfig()) -> ModelCheckpoint:
    """Fit ``model`` on labelled regions with the recipe in ``cfg``."""
    model.set_params(epochs=cfg.epochs, batch_size=cfg.batch_size,
                     learning_rate=cfg.learning_rate, seed=cfg.seed)
    # validate pose availability before any training work
    unpack_inputs(list(dataset), model.variant == HRC_P)
    model.fit(list(dataset))
    return model.checkpoint()


def save_checkpoint(model, path) -> None:
    """Write a fitted classifier (or a :class:`ModelCheckpoint`) to ``path``."""
    ckpt = model if isinstance(model, ModelCheckpoint) else model.checkpoint()
    payload = {
        "format": CHECKPOINT_FORMAT,
        "config": {"variant": ckpt.config.variant, "backbone_scale": ckpt.config.backbone_scale},
        "dtype": str(next(iter(ckpt.parameters.values())).dtype).replace("torch.", ""),
        "parameters": ckpt.parameters,
        "training_meta": ckpt.training_meta,
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path, variant=None, backbone=None) -> HandRegionClassifier:
    """Load a classifier; ``variant``/``backbone`` if given must match the file."""
    raw = Path(path).read_bytes()
    try:
        payload = torch.load(io.BytesIO(raw), map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    try:
        cfg = ModelConfig(payload["config"]["variant"], payload["config"]["backbone_scale"])
        dtype = payload["dtype"]
        params = payload["parameters"]
    except (KeyError, TypeError, ConfigError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint header ({exc})") from exc
    if variant is not None and variant != cfg.variant:
        raise CheckpointError(f"{path}: holds a {cfg.variant!r} model, expected {variant!r}")
    if backbone is not None and backbone != cfg.backbone_scale:
        raise CheckpointError(f"{path}: holds a {cfg.backbone_scale!r} backbone, expected {backbone!r}")

    if dtype not in _DTYPES:
        raise CheckpointError(f"{path}: unsupported dtype {dtype!r}")
    meta = payload.get("training_meta", {}) or {}
    recipe = meta.get("train_config", {})
    clf = HandRegionClassifier(cfg.variant, cfg.backbone_scale, dtype=dtype, **recipe)
    clf.initialize()
    try:
        clf.model_.load_state_dict(params, strict=True)
    except (RuntimeError, TypeError, AttributeError) as exc:
        raise CheckpointError(f"{path}: weights do not match the declared config ({exc})") from exc
    clf.model_.eval()
    clf.training_meta_ = meta
    clf.loss_curve_ = list(meta.get("loss_curve", []))
    clf.initial_loss_ = meta.get("initial_loss")
    return clf
