"""Reference trainer and synthetic benchmark datasets.

The trainer is a linear softmax classifier fit by mini-batch SGD. It
exists to produce logit trajectories with known ground truth, not to be a
serious model: after every epoch it snapshots the logits of the full
dataset into a trajectory log.

Synthetic datasets are Gaussian blobs whose class means sit on a ring in
the first two feature dimensions, spaced so adjacent means are `sep`
standard deviations apart. Optional corruption: uniform label flips
(recorded per sample) and near-duplicates of class means (ids recorded),
so benchmarks can check what a cleanup pass found against what was
planted.

Feature matrices travel in a small binary format: 20-byte header
(magic "LFEA", u32 version, u64 n_samples, u32 dim) followed by
n*dim little-endian f32 values, row-major.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DivergenceDetected,
    FormatError,
    LabelOutOfRange,
    MagicMismatch,
    NonFinite,
    RatioOutOfRange,
    TruncatedFile,
)
from .rng import SplitMix64, derive_seed
from .store import TrajectoryLog, make_log

FEATURE_MAGIC = b"LFEA"
FEATURE_VERSION = 1
_FEATURE_HEADER = struct.Struct("<4sIQI")  # magic, version, n_samples, dim


@dataclass(frozen=True)
class SyntheticSpec:
    classes: int = 3
    dim: int = 2
    per_class: int = 200
    sigma: float = 1.0
    sep: float = 10.0  # adjacent class-mean distance, in sigmas
    noise: float = 0.0  # fraction of labels flipped to a random other class
    dup_frac: float = 0.0  # fraction of each class replaced by near-copies of its mean
    seed: int = 0
    geometry: str = "blob"  # "blob": isotropic noise; "ring": tangential noise only


@dataclass(frozen=True)
class FlipRecord:
    sample_id: int
    old_label: int
    new_label: int


@dataclass
class SyntheticDataset:
    spec: SyntheticSpec
    sample_ids: np.ndarray  # (n,) uint64
    features: np.ndarray  # (n, dim) float64
    labels: np.ndarray  # (n,) int64, after corruption
    true_labels: np.ndarray  # (n,) int64, before corruption
    flips: list[FlipRecord] = field(default_factory=list)
    dup_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint64))

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)


def class_means(classes: int, dim: int, sigma: float, sep: float) -> np.ndarray:
    """Class means on a ring in the first two dims, adjacent pairs sep*sigma apart."""
    means = np.zeros((classes, dim), dtype=np.float64)
    if classes == 1:
        return means
    if dim == 1:
        means[:, 0] = np.arange(classes) * sep * sigma
        return means
    radius = sep * sigma / (2.0 * math.sin(math.pi / classes))
    ang = 2.0 * math.pi * np.arange(classes) / classes
    means[:, 0] = radius * np.cos(ang)
    means[:, 1] = radius * np.sin(ang)
    return means


def inject_label_noise(
    labels: np.ndarray, frac: float, classes: int, rng: SplitMix64
) -> tuple[np.ndarray, list[FlipRecord]]:
    """Flip floor(frac*n + 0.5) labels, each to a uniform different class."""
    if not 0.0 <= frac <= 1.0:
        raise RatioOutOfRange(f"noise fraction must be in [0, 1], got {frac}")
    n = len(labels)
    n_flip = int(math.floor(frac * n + 0.5))
    out = labels.copy()
    flips: list[FlipRecord] = []
    if n_flip == 0 or classes < 2:
        return out, flips
    for i in rng.sample_without_replacement(n, n_flip):
        old = int(out[i])
        r = rng.randint_below(classes - 1)
        new = r if r < old else r + 1
        out[i] = new
        flips.append(FlipRecord(sample_id=i, old_label=old, new_label=new))
    flips.sort(key=lambda fr: fr.sample_id)
    return out, flips


def synth_dataset(spec: SyntheticSpec) -> SyntheticDataset:
    """Deterministic Gaussian-blob dataset with optional planted corruption.

    Feature draws and corruption draws use independent seed streams, so
    changing the noise settings never changes the feature values.
    """
    if spec.classes < 1 or spec.dim < 1 or spec.per_class < 1:
        raise RatioOutOfRange("classes, dim, and per_class must all be >= 1")
    if not 0.0 <= spec.dup_frac <= 1.0:
        raise RatioOutOfRange(f"dup_frac must be in [0, 1], got {spec.dup_frac}")
    if spec.geometry not in ("blob", "ring"):
        raise RatioOutOfRange(f"geometry must be 'blob' or 'ring', got {spec.geometry!r}")
    if spec.geometry == "ring" and (spec.dim < 2 or spec.classes < 2):
        raise RatioOutOfRange("ring geometry needs dim >= 2 and classes >= 2")
    means = class_means(spec.classes, spec.dim, spec.sigma, spec.sep)
    n = spec.classes * spec.per_class
    feat_rng = SplitMix64(derive_seed(spec.seed, 1))
    features = np.empty((n, spec.dim), dtype=np.float64)
    true_labels = np.empty(n, dtype=np.int64)
    dup_ids: list[int] = []
    n_dup = int(math.floor(spec.dup_frac * spec.per_class + 0.5))
    radius = (
        spec.sep * spec.sigma / (2.0 * math.sin(math.pi / spec.classes))
        if spec.geometry == "ring"
        else 0.0
    )
    # ring mode shares one offset pattern across classes (rotated), keeping the
    # dataset exactly class-symmetric; per-class draws would leave each class a
    # slightly different entropy baseline that drowns the within-class ordering.
    # the pattern is antithetic (each draw paired with its negation) so its
    # empirical mean is exactly zero and fitted boundaries stay radial
    ring_offsets: list[float] = []
    if spec.geometry == "ring":
        m = spec.per_class - n_dup
        half = [feat_rng.gauss() for _ in range((m + 1) // 2)]
        ring_offsets = (half + [-v for v in half])[:m]
    row = 0
    for c in range(spec.classes):
        theta = 2.0 * math.pi * c / spec.classes
        for j in range(spec.per_class):
            if j < n_dup:
                # near-copy of the class mean: tiny jitter keeps rows distinct
                for d in range(spec.dim):
                    features[row, d] = means[c, d] + spec.sigma * 1e-3 * feat_rng.gauss()
                dup_ids.append(row)
            elif spec.geometry == "ring":
                # fixed radius, noise along the arc: the class mean is the
                # deepest point of its decision region
                ang = theta + (spec.sigma / radius) * ring_offsets[j - n_dup]
                features[row, 0] = radius * math.cos(ang)
                features[row, 1] = radius * math.sin(ang)
                for d in range(2, spec.dim):
                    features[row, d] = spec.sigma * feat_rng.gauss()
            else:
                for d in range(spec.dim):
                    features[row, d] = means[c, d] + spec.sigma * feat_rng.gauss()
            true_labels[row] = c
            row += 1
    noise_rng = SplitMix64(derive_seed(spec.seed, 2))
    labels, flips = inject_label_noise(true_labels, spec.noise, spec.classes, noise_rng)
    return SyntheticDataset(
        spec=spec,
        sample_ids=np.arange(n, dtype=np.uint64),
        features=features,
        labels=labels,
        true_labels=true_labels,
        flips=flips,
        dup_ids=np.array(sorted(dup_ids), dtype=np.uint64),
    )


# ---------------------------------------------------------------------------
# trainer


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 12
    batch_size: int = 32
    lr: float = 0.1
    seed: int = 0
    weight_init_scale: float = 0.0  # 0 means start from zero weights


@dataclass
class TrainResult:
    weights: np.ndarray  # (classes, dim + 1), last column is the bias
    log: TrajectoryLog


def loss_and_grad(
    weights: np.ndarray, features_aug: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy (nats) and its gradient w.r.t. the weight matrix.

    `features_aug` must already carry the trailing bias column of ones.
    Pure function of its inputs, so it can be checked against finite
    differences.
    """
    b = len(labels)
    z = features_aug @ weights.T
    zmax = z.max(axis=1, keepdims=True)
    e = np.exp(z - zmax)
    p = e / e.sum(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(e.sum(axis=1))
    loss = float(np.mean(lse - z[np.arange(b), labels]))
    residual = p
    residual[np.arange(b), labels] -= 1.0
    grad = residual.T @ features_aug / b
    return loss, grad


def augment(features: np.ndarray) -> np.ndarray:
    """Append the bias column of ones."""
    x = np.asarray(features, dtype=np.float64)
    return np.hstack([x, np.ones((len(x), 1))])


def logits_of(weights: np.ndarray, features: np.ndarray) -> np.ndarray:
    return augment(features) @ weights.T


def predict(weights: np.ndarray, features: np.ndarray) -> np.ndarray:
    return logits_of(weights, features).argmax(axis=1).astype(np.int64)


def accuracy(weights: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(predict(weights, features) == np.asarray(labels)))


def train_softmax(
    features: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    classes: int | None = None,
    sample_ids: np.ndarray | None = None,
) -> TrainResult:
    """Mini-batch SGD on a linear softmax model, logging logits per epoch.

    The trajectory log snapshots the full dataset's logits (f32) after
    each epoch. Shuffling uses an integer PRNG, so runs are reproducible
    across platforms. A non-finite loss aborts the run.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n = len(y)
    c = int(classes) if classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= c:
        raise LabelOutOfRange(f"labels must lie in [0, {c})")
    if config.epochs < 1 or config.batch_size < 1 or n < 1:
        raise RatioOutOfRange("epochs, batch_size, and n_samples must all be >= 1")
    ids = (
        np.asarray(sample_ids, dtype=np.uint64)
        if sample_ids is not None
        else np.arange(n, dtype=np.uint64)
    )
    xa = augment(x)
    rng = SplitMix64(derive_seed(config.seed, 3))
    w = np.zeros((c, x.shape[1] + 1), dtype=np.float64)
    if config.weight_init_scale != 0.0:
        init_rng = SplitMix64(derive_seed(config.seed, 4))
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                w[i, j] = config.weight_init_scale * init_rng.gauss()
    snapshots = np.empty((config.epochs, n, c), dtype=np.float32)
    order = list(range(n))
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(order)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grad = loss_and_grad(w, xa[batch], y[batch])
            if not math.isfinite(loss):
                raise DivergenceDetected(
                    f"non-finite loss at epoch {epoch}, batch starting {start} "
                    f"(lr={config.lr})"
                )
            w -= config.lr * grad
        snapshots[epoch - 1] = (xa @ w.T).astype(np.float32)
    log = make_log(ids, y, snapshots, run_seed=config.seed)
    return TrainResult(weights=w, log=log)


# ---------------------------------------------------------------------------
# feature file


def write_features(features: np.ndarray, path) -> None:
    x = np.asarray(features)
    if x.ndim != 2:
        raise FormatError(f"features must be 2-D, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise NonFinite("refusing to write non-finite features")
    with open(path, "wb") as f:
        f.write(_FEATURE_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, x.shape[0], x.shape[1]))
        f.write(np.ascontiguousarray(x, dtype="<f4").tobytes())


def read_features(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _FEATURE_HEADER.size:
        raise TruncatedFile(f"{path}: shorter than the header")
    magic, version, n, dim = _FEATURE_HEADER.unpack_from(raw, 0)
    if magic != FEATURE_MAGIC:
        raise MagicMismatch(f"{path}: bad magic {magic!r}")
    if version != FEATURE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    body = raw[_FEATURE_HEADER.size :]
    want = n * dim * 4
    if len(body) < want:
        raise TruncatedFile(f"{path}: need {want} payload bytes, have {len(body)}")
    if len(body) > want:
        raise FormatError(f"{path}: {len(body) - want} trailing bytes")
    x = np.frombuffer(body, dtype="<f4").reshape(n, dim).copy()
    if not np.isfinite(x).all():
        raise NonFinite(f"{path}: non-finite feature values")
    return x
