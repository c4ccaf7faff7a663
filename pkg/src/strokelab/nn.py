"""From-scratch neural sequence classifiers: temporal-convolutional and dense.

Everything is plain numpy: valid (unpadded) 1D cross-correlation with stride
and dilation, dense affine layers, ReLU/softmax activations, mean
cross-entropy loss, and mini-batch gradient descent without momentum so
every gradient is checkable against central finite differences.

Layout conventions: batches enter as (N, T, C) time-major sequences (or
(N, D) flat vectors). Convolution works on (N, C, T); the first dense layer
after a convolution stack either global-average-pools over time (when its
input width equals the channel count) or flattens time-major (when it
equals channels x time).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, FormatError
from .pipeline import LABELS, StrokeLabel, StrokeSample, samples_to_arrays

NUM_CLASSES = len(LABELS)


@dataclass(frozen=True)
class Conv1dSpec:
    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int = 1
    dilation: int = 1
    activation: str = "relu"
    kind: str = field(default="conv1d", init=False)

    def __post_init__(self):
        for name in ("in_channels", "out_channels", "kernel_size", "stride", "dilation"):
            if getattr(self, name) < 1:
                raise DomainError(f"conv1d {name} must be positive")
        if self.activation not in ("relu", "none"):
            raise DomainError(f"conv1d activation must be relu or none, got {self.activation!r}")

    def param_count(self) -> int:
        return self.out_channels * self.in_channels * self.kernel_size + self.out_channels

    def fan_in(self) -> int:
        return self.in_channels * self.kernel_size


@dataclass(frozen=True)
class DenseSpec:
    in_units: int
    out_units: int
    activation: str = "none"
    kind: str = field(default="dense", init=False)

    def __post_init__(self):
        if self.in_units < 1 or self.out_units < 1:
            raise DomainError("dense layer dimensions must be positive")
        if self.activation not in ("relu", "softmax", "none"):
            raise DomainError(
                f"dense activation must be relu, softmax, or none, got {self.activation!r}"
            )

    def param_count(self) -> int:
        return self.in_units * self.out_units + self.out_units

    def fan_in(self) -> int:
        return self.in_units


LayerSpec = Conv1dSpec | DenseSpec


def validate_architecture(architecture: Sequence[LayerSpec]) -> None:
    if not architecture:
        raise DomainError("architecture must contain at least one layer")
    softmax_positions = [i for i, spec in enumerate(architecture)
                         if isinstance(spec, DenseSpec) and spec.activation == "softmax"]
    if len(softmax_positions) != 1 or softmax_positions[0] != len(architecture) - 1:
        raise DomainError("exactly one softmax layer is required, and it must be last")


@dataclass
class ModelDescriptor:
    """Architecture plus weights in a portable form.

    weights holds one [W, b] pair per layer: conv W is (out, in, k),
    dense W is (in, out). input_scaling is applied multiplicatively to the
    (x, y) channels before the first layer, so training and inference share
    the identical transform. The kind string namespaces future model
    families (e.g. recurrent ones) without a format change.
    """

    kind: str
    architecture: tuple[LayerSpec, ...]
    weights: list[list[np.ndarray]]
    input_scaling: tuple[float, float] = (1.0, 1.0)
    seed: int = 0
    schema_version: int = 1

    def __post_init__(self):
        self.architecture = tuple(self.architecture)
        validate_architecture(self.architecture)
        if len(self.weights) != len(self.architecture):
            raise DomainError("weights/architecture layer count mismatch")
        for i, (spec, pair) in enumerate(zip(self.architecture, self.weights)):
            w, b = pair
            if isinstance(spec, Conv1dSpec):
                expect = (spec.out_channels, spec.in_channels, spec.kernel_size)
                if w.shape != expect or b.shape != (spec.out_channels,):
                    raise DomainError(f"layer {i}: weight shapes {w.shape}/{b.shape} "
                                      f"inconsistent with conv spec {expect}")
            else:
                if w.shape != (spec.in_units, spec.out_units) or b.shape != (spec.out_units,):
                    raise DomainError(f"layer {i}: weight shapes {w.shape}/{b.shape} "
                                      f"inconsistent with dense spec "
                                      f"({spec.in_units}, {spec.out_units})")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise DomainError("learning_rate, epochs, and batch_size must all be positive")


def count_params(model: ModelDescriptor | Sequence[LayerSpec]) -> int:
    """Analytic parameter count: weight plus bias elements over all layers."""
    arch = model.architecture if isinstance(model, ModelDescriptor) else model
    return sum(spec.param_count() for spec in arch)


def default_tcn_architecture(num_classes: int = NUM_CLASSES) -> tuple[LayerSpec, ...]:
    """Four ReLU conv layers, global average pooling, and a 2-layer head."""
    return (
        Conv1dSpec(2, 48, kernel_size=5, stride=1),
        Conv1dSpec(48, 96, kernel_size=5, stride=2),
        Conv1dSpec(96, 128, kernel_size=3, stride=2, dilation=2),
        Conv1dSpec(128, 128, kernel_size=3, stride=2),
        DenseSpec(128, 128, activation="relu"),
        DenseSpec(128, num_classes, activation="softmax"),
    )


def default_fcnn_architecture(num_classes: int = NUM_CLASSES) -> tuple[LayerSpec, ...]:
    return (
        DenseSpec(400, 256, activation="relu"),
        DenseSpec(256, 128, activation="relu"),
        DenseSpec(128, num_classes, activation="softmax"),
    )


DEFAULT_INPUT_SCALING = (1.0 / 1920.0, 1.0 / 1080.0)


def init_weights(architecture: Sequence[LayerSpec], rng: np.random.Generator
                 ) -> list[list[np.ndarray]]:
    """Uniform(-a, a) weights with a = 1/sqrt(fan_in); zero biases."""
    weights = []
    for spec in architecture:
        a = 1.0 / np.sqrt(spec.fan_in())
        if isinstance(spec, Conv1dSpec):
            w = rng.uniform(-a, a, (spec.out_channels, spec.in_channels, spec.kernel_size))
            b = np.zeros(spec.out_channels)
        else:
            w = rng.uniform(-a, a, (spec.in_units, spec.out_units))
            b = np.zeros(spec.out_units)
        weights.append([w, b])
    return weights


def _conv_indices(spec: Conv1dSpec, t_in: int, layer_idx: int) -> np.ndarray:
    span = (spec.kernel_size - 1) * spec.dilation + 1
    if t_in < span:
        raise DomainError(
            f"layer {layer_idx}: input length {t_in} shorter than receptive span {span}"
        )
    t_out = (t_in - span) // spec.stride + 1
    return (np.arange(t_out)[:, None] * spec.stride
            + np.arange(spec.kernel_size)[None, :] * spec.dilation)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, spec: Conv1dSpec,
                  layer_idx: int):
    # x: (N, C, T) -> out: (N, O, T_out); valid cross-correlation.
    n, c, t_in = x.shape
    if c != spec.in_channels:
        raise DomainError(f"layer {layer_idx}: expected {spec.in_channels} channels, got {c}")
    idx = _conv_indices(spec, t_in, layer_idx)
    t_out, k = idx.shape
    cols = x[:, :, idx].transpose(0, 2, 1, 3).reshape(n * t_out, c * k)
    w2 = w.reshape(spec.out_channels, c * k)
    out = (cols @ w2.T).reshape(n, t_out, spec.out_channels).transpose(0, 2, 1)
    out += b[None, :, None]
    return out, (cols, idx, x.shape)


def _conv_backward(dout: np.ndarray, w: np.ndarray, cache, spec: Conv1dSpec):
    cols, idx, x_shape = cache
    n, c, t_in = x_shape
    t_out, k = idx.shape
    w2 = w.reshape(spec.out_channels, c * k)
    dout_r = dout.transpose(0, 2, 1).reshape(n * t_out, spec.out_channels)
    dw = (dout_r.T @ cols).reshape(spec.out_channels, c, k)
    db = dout.sum(axis=(0, 2))
    dcols = (dout_r @ w2).reshape(n, t_out, c, k).transpose(0, 2, 1, 3)
    dx = np.zeros(x_shape)
    for j in range(k):
        dx[:, :, idx[:, j]] += dcols[:, :, :, j]
    return dx, dw, db


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward(architecture, weights, x, input_scaling, *, collect_cache=False):
    """Run the network; x is (N, T, C) or (N, D). Returns (probs, caches)."""
    scaling = np.asarray(input_scaling, dtype=np.float64)
    h = np.asarray(x, dtype=np.float64)
    if h.ndim == 3:
        if h.shape[2] != len(scaling):
            raise DomainError(
                f"input channel count {h.shape[2]} does not match scaling length {len(scaling)}"
            )
        h = h * scaling
        layout = "tc"  # (N, T, C)
    elif h.ndim == 2:
        layout = "flat"
    else:
        raise DomainError(f"input must be 2- or 3-dimensional, got shape {h.shape}")
    caches = []
    for i, (spec, (w, b)) in enumerate(zip(architecture, weights)):
        if isinstance(spec, Conv1dSpec):
            if layout == "flat":
                raise DomainError(f"layer {i}: conv1d cannot follow a flat vector")
            if layout == "tc":
                h = h.transpose(0, 2, 1)
                layout = "ct"
            z, conv_cache = _conv_forward(h, w, b, spec, i)
            if spec.activation == "relu":
                h = np.maximum(z, 0.0)
            else:
                h = z
            caches.append(("conv", spec, conv_cache, z if spec.activation == "relu" else None))
        else:
            pool_cache = None
            if layout in ("tc", "ct"):
                if layout == "tc":
                    h = h.transpose(0, 2, 1)
                    layout = "ct"
                n, c, t = h.shape
                if spec.in_units == c:
                    pool_cache = ("gap", t)
                    h = h.mean(axis=2)
                elif spec.in_units == c * t:
                    pool_cache = ("flatten", (n, c, t))
                    h = h.transpose(0, 2, 1).reshape(n, c * t)
                else:
                    raise DomainError(
                        f"layer {i}: dense width {spec.in_units} matches neither "
                        f"channel count {c} (pool) nor flattened size {c * t}"
                    )
                layout = "flat"
            if h.shape[1] != spec.in_units:
                raise DomainError(
                    f"layer {i}: expected {spec.in_units} input units, got {h.shape[1]}"
                )
            z = h @ w + b
            if spec.activation == "relu":
                out = np.maximum(z, 0.0)
            elif spec.activation == "softmax":
                out = _softmax(z)
            else:
                out = z
            caches.append(("dense", spec, (h, pool_cache), z if spec.activation == "relu" else None))
            h = out
    if collect_cache:
        return h, caches
    return h, None


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean negative log-likelihood of the target classes."""
    picked = probs[np.arange(len(targets)), targets]
    with np.errstate(divide="ignore"):
        return float(-np.mean(np.log(picked)))


def _backward(architecture, weights, caches, probs, targets):
    """Gradients of mean cross-entropy; softmax+CE fused at the last layer."""
    n = len(targets)
    grads = []
    delta = probs.copy()
    delta[np.arange(n), targets] -= 1.0
    delta /= n  # d(loss)/d(logits) of the final softmax layer
    for i in range(len(architecture) - 1, -1, -1):
        kind, spec, cache, relu_z = caches[i]
        w, b = weights[i]
        if kind == "dense":
            h_in, pool_cache = cache
            if spec.activation == "relu":
                delta = delta * (relu_z > 0)
            dw = h_in.T @ delta
            db = delta.sum(axis=0)
            delta = delta @ w.T
            if pool_cache is not None:
                mode, info = pool_cache
                if mode == "gap":
                    t = info
                    delta = np.repeat(delta[:, :, None], t, axis=2) / t
                else:
                    n_b, c, t = info
                    delta = delta.reshape(n_b, t, c).transpose(0, 2, 1)
            grads.append([dw, db])
        else:
            if spec.activation == "relu":
                delta = delta * (relu_z > 0)
            delta, dw, db = _conv_backward(delta, w, cache, spec)
            grads.append([dw, db])
    grads.reverse()
    return grads


def nn_forward(model: ModelDescriptor, sample) -> np.ndarray:
    """Class probabilities for one StrokeSample (or raw sequence array)."""
    x = sample.sequence if isinstance(sample, StrokeSample) else np.asarray(sample)
    probs, _ = _forward(model.architecture, model.weights, x[None, ...],
                        model.input_scaling)
    return probs[0]


def forward_batch(model: ModelDescriptor, x: np.ndarray,
                  chunk: int = 256) -> np.ndarray:
    """Probabilities for a batch, chunked to bound im2col memory."""
    outs = []
    for lo in range(0, len(x), chunk):
        probs, _ = _forward(model.architecture, model.weights, x[lo:lo + chunk],
                            model.input_scaling)
        outs.append(probs)
    return np.concatenate(outs, axis=0)


def predict_batch(model: ModelDescriptor, x: np.ndarray) -> np.ndarray:
    return forward_batch(model, x).argmax(axis=1)


def _as_arrays(dataset) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(dataset, tuple) and len(dataset) == 2:
        return np.asarray(dataset[0], dtype=np.float64), np.asarray(dataset[1], dtype=np.int64)
    return samples_to_arrays(list(dataset))


def nn_train(architecture: Sequence[LayerSpec], train, validation, cfg: TrainConfig,
             *, kind: str = "custom", input_scaling: tuple[float, float] = (1.0, 1.0)
             ) -> tuple[ModelDescriptor, list[dict]]:
    """Mini-batch gradient descent on mean cross-entropy.

    Initialization, epoch ordering, and batch shuffling are fully determined
    by cfg.seed; reruns are bit-identical. Returns the weights that achieved
    the best validation accuracy (earliest epoch on ties) plus a per-epoch
    loss/accuracy log. Non-finite loss raises with the epoch/batch index.
    """
    architecture = tuple(architecture)
    validate_architecture(architecture)
    x_train, y_train = _as_arrays(train)
    x_val, y_val = _as_arrays(validation)
    if len(x_train) == 0 or len(x_val) == 0:
        raise DomainError("training and validation datasets must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    weights = init_weights(architecture, rng)
    best_acc = -1.0
    best_weights = [[w.copy(), b.copy()] for w, b in weights]
    log: list[dict] = []
    n = len(x_train)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = perm[start:start + cfg.batch_size]
            probs, caches = _forward(architecture, weights, x_train[batch],
                                     input_scaling, collect_cache=True)
            loss = cross_entropy(probs, y_train[batch])
            if not np.isfinite(loss):
                raise DomainError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch {start // cfg.batch_size}"
                )
            loss_sum += loss * len(batch)
            grads = _backward(architecture, weights, caches, probs, y_train[batch])
            for (w, b), (dw, db) in zip(weights, grads):
                w -= cfg.learning_rate * dw
                b -= cfg.learning_rate * db
        model = ModelDescriptor(kind=kind, architecture=architecture, weights=weights,
                                input_scaling=input_scaling, seed=cfg.seed)
        val_probs = forward_batch(model, x_val)
        val_loss = cross_entropy(val_probs, y_val)
        val_acc = float(np.mean(val_probs.argmax(axis=1) == y_val))
        log.append({
            "epoch": epoch,
            "train_loss": loss_sum / n,
            "val_loss": val_loss if np.isfinite(val_loss) else float("inf"),
            "val_accuracy": val_acc,
        })
        if val_acc > best_acc:
            best_acc = val_acc
            best_weights = [[w.copy(), b.copy()] for w, b in weights]
    descriptor = ModelDescriptor(kind=kind, architecture=architecture,
                                 weights=best_weights, input_scaling=input_scaling,
                                 seed=cfg.seed)
    return descriptor, log


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # rows = true label, columns = predicted

    def __post_init__(self):
        c = np.asarray(self.confusion, dtype=np.int64)
        if c.shape != (NUM_CLASSES, NUM_CLASSES):
            raise DomainError(f"confusion matrix must be {NUM_CLASSES}x{NUM_CLASSES}")
        total = int(c.sum())
        if total > 0 and abs(self.accuracy - np.trace(c) / total) > 1e-12:
            raise DomainError("accuracy inconsistent with confusion matrix")
        c.setflags(write=False)
        object.__setattr__(self, "confusion", c)


def evaluate_predictions(y_true: Sequence[int], y_pred: Sequence[int]) -> EvalReport:
    if len(y_true) == 0:
        raise DomainError("cannot evaluate on an empty dataset")
    confusion = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[t, p] += 1
    accuracy = float(np.trace(confusion) / confusion.sum())
    return EvalReport(accuracy=accuracy, confusion=confusion)


def evaluate_model(predict: Callable[[StrokeSample], StrokeLabel], samples) -> EvalReport:
    """Confusion matrix and accuracy of a label-valued predictor."""
    samples = list(samples)
    if not samples:
        raise DomainError("cannot evaluate on an empty dataset")
    y_true, y_pred = [], []
    for s in samples:
        if s.label is None:
            raise DomainError(f"unlabeled sample {s.source_id!r} cannot be evaluated")
        y_true.append(LABELS.index(s.label))
        y_pred.append(LABELS.index(predict(s)))
    return evaluate_predictions(y_true, y_pred)


def _spec_to_dict(spec: LayerSpec) -> dict:
    if isinstance(spec, Conv1dSpec):
        return {"kind": "conv1d", "in_channels": spec.in_channels,
                "out_channels": spec.out_channels, "kernel_size": spec.kernel_size,
                "stride": spec.stride, "dilation": spec.dilation,
                "activation": spec.activation}
    return {"kind": "dense", "in_units": spec.in_units, "out_units": spec.out_units,
            "activation": spec.activation}


def _spec_from_dict(doc: dict) -> LayerSpec:
    if doc.get("kind") == "conv1d":
        return Conv1dSpec(doc["in_channels"], doc["out_channels"], doc["kernel_size"],
                          doc.get("stride", 1), doc.get("dilation", 1),
                          doc.get("activation", "relu"))
    if doc.get("kind") == "dense":
        return DenseSpec(doc["in_units"], doc["out_units"], doc.get("activation", "none"))
    raise FormatError(f"unknown layer kind {doc.get('kind')!r}")


def model_to_dict(model: ModelDescriptor) -> dict:
    weights_flat: list = []
    for w, b in model.weights:
        weights_flat.append(w.tolist())
        weights_flat.append(b.tolist())
    return {
        "schema_version": model.schema_version,
        "kind": model.kind,
        "input_scaling": list(model.input_scaling),
        "seed": model.seed,
        "architecture": [_spec_to_dict(s) for s in model.architecture],
        "weights": weights_flat,
    }


def model_from_dict(doc: dict) -> ModelDescriptor:
    try:
        architecture = tuple(_spec_from_dict(d) for d in doc["architecture"])
        flat = doc["weights"]
        if len(flat) != 2 * len(architecture):
            raise FormatError("weights list must hold one weight and one bias per layer")
        weights = [
            [np.asarray(flat[2 * i], dtype=np.float64),
             np.asarray(flat[2 * i + 1], dtype=np.float64)]
            for i in range(len(architecture))
        ]
        return ModelDescriptor(kind=doc["kind"], architecture=architecture,
                               weights=weights,
                               input_scaling=tuple(doc.get("input_scaling", (1.0, 1.0))),
                               seed=int(doc.get("seed", 0)),
                               schema_version=int(doc.get("schema_version", 1)))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model file: {exc}") from None
