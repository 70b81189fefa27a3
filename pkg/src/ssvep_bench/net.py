"""From-scratch convolutional network with training and transfer mechanics.

Layers are fixed-geometry building blocks: 3x3 stride-1 pad-1 convolutions,
2x2 stride-2 max pooling, ReLU, inverted dropout, flatten and dense. All
math is float64 numpy; forward caches activations for an analytic backward
pass. Parameters live in a ModelParams store, so tensors can be frozen,
serialized and grafted onto a new classification head for transfer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .params import ModelParams
from .training import EarlyStopper, EpochRecord, TrainLog, minibatch_indices

KINDS = ("conv3x3", "maxpool2x2", "relu", "dropout", "flatten", "dense")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    channels: int = 0  # conv3x3 output channels
    units: int = 0  # dense output width
    rate: float = 0.0  # dropout rate

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv3x3" and self.channels < 1:
            raise ValueError("conv3x3 needs a positive channel count")
        if self.kind == "dense" and self.units < 1:
            raise ValueError("dense needs a positive unit count")
        if self.kind == "dropout" and not 0.0 <= self.rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.rate}")


def conv3x3(channels: int) -> LayerSpec:
    return LayerSpec("conv3x3", channels=channels)


def maxpool2x2() -> LayerSpec:
    return LayerSpec("maxpool2x2")


def relu() -> LayerSpec:
    return LayerSpec("relu")


def dropout(rate: float) -> LayerSpec:
    return LayerSpec("dropout", rate=rate)


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def dense(units: int) -> LayerSpec:
    return LayerSpec("dense", units=units)


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, int, int] = (1, 96, 64)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        layer_shapes(self)  # validates propagation


def default_cnn_spec(n_classes: int = 2, input_shape: tuple[int, int, int] = (1, 96, 64)) -> NetworkSpec:
    """The full network: five conv blocks then a two-layer dense head.

    Conv channels 64/128/256/256/512/512 with ReLU after every conv, four
    2x2 pools, 50% dropout around a 512-unit hidden dense layer, linear
    output layer.
    """
    return NetworkSpec(
        layers=(
            conv3x3(64), relu(), maxpool2x2(),
            conv3x3(128), relu(), maxpool2x2(),
            conv3x3(256), relu(), conv3x3(256), relu(), maxpool2x2(),
            conv3x3(512), relu(), conv3x3(512), relu(), maxpool2x2(),
            flatten(),
            dropout(0.5), dense(512), relu(),
            dropout(0.5), dense(n_classes),
        ),
        input_shape=input_shape,
    )


def small_cnn_spec(n_classes: int = 2, input_shape: tuple[int, int, int] = (1, 24, 16)) -> NetworkSpec:
    """Scaled-down variant (channels 8/16/32/32) for desk-scale experiments."""
    return NetworkSpec(
        layers=(
            conv3x3(8), relu(), maxpool2x2(),
            conv3x3(16), relu(), maxpool2x2(),
            conv3x3(32), relu(), conv3x3(32), relu(), maxpool2x2(),
            flatten(),
            dropout(0.5), dense(64), relu(),
            dropout(0.5), dense(n_classes),
        ),
        input_shape=input_shape,
    )


def tiny_cnn_spec(n_classes: int = 2, input_shape: tuple[int, int, int] = (1, 8, 8)) -> NetworkSpec:
    """Minimal conv-pool-dense stack for gradient checks and overfit sanity runs."""
    return NetworkSpec(
        layers=(conv3x3(8), relu(), maxpool2x2(), flatten(), dense(n_classes)),
        input_shape=input_shape,
    )


def layer_names(spec: NetworkSpec) -> list[str | None]:
    """Parameter-group name per layer: conv1, conv2, ... dense1, ... or None."""
    names: list[str | None] = []
    n_conv = n_dense = 0
    for layer in spec.layers:
        if layer.kind == "conv3x3":
            n_conv += 1
            names.append(f"conv{n_conv}")
        elif layer.kind == "dense":
            n_dense += 1
            names.append(f"dense{n_dense}")
        else:
            names.append(None)
    return names


def layer_shapes(spec: NetworkSpec) -> list[tuple[int, ...]]:
    """Output shape (without the batch axis) after each layer; validates the spec."""
    shape: tuple[int, ...] = spec.input_shape
    if len(shape) != 3:
        raise ValueError(f"input shape must be (channels, height, width), got {shape}")
    shapes = []
    for i, layer in enumerate(spec.layers):
        where = f"layer {i} ({layer.kind})"
        if layer.kind == "conv3x3":
            if len(shape) != 3:
                raise ValueError(f"{where}: needs 3-D input, has {shape}")
            shape = (layer.channels, shape[1], shape[2])
        elif layer.kind == "maxpool2x2":
            if len(shape) != 3:
                raise ValueError(f"{where}: needs 3-D input, has {shape}")
            if shape[1] < 2 or shape[2] < 2:
                raise ValueError(f"{where}: spatial size {shape[1]}x{shape[2]} too small")
            shape = (shape[0], shape[1] // 2, shape[2] // 2)
        elif layer.kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif layer.kind == "dense":
            if len(shape) != 1:
                raise ValueError(f"{where}: needs flattened input, has {shape}")
            shape = (layer.units,)
        shapes.append(shape)
    return shapes


def init_params(spec: NetworkSpec, seed: int = 0) -> ModelParams:
    """Kaiming-uniform fan-in weights, zero biases, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    params = ModelParams()
    names = layer_names(spec)
    shape: tuple[int, ...] = spec.input_shape
    for layer, name, out_shape in zip(spec.layers, names, layer_shapes(spec)):
        if layer.kind == "conv3x3":
            fan_in = shape[0] * 9
            bound = np.sqrt(6.0 / fan_in)
            params.add(f"{name}.weight", rng.uniform(-bound, bound, (layer.channels, shape[0], 3, 3)))
            params.add(f"{name}.bias", np.zeros(layer.channels))
        elif layer.kind == "dense":
            fan_in = shape[0]
            bound = np.sqrt(6.0 / fan_in)
            params.add(f"{name}.weight", rng.uniform(-bound, bound, (layer.units, fan_in)))
            params.add(f"{name}.bias", np.zeros(layer.units))
        shape = out_shape
    return params


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, c, h, width = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, w.shape[0], h, width))
    for di in range(3):
        for dj in range(3):
            patch = xp[:, :, di:di + h, dj:dj + width]
            out += np.einsum("nchw,oc->nohw", patch, w[:, :, di, dj], optimize=True)
    return out + b[None, :, None, None], xp


def _conv_backward(
    dout: np.ndarray, xp: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, o, h, width = dout.shape
    dw = np.zeros_like(w)
    dxp = np.zeros_like(xp)
    for di in range(3):
        for dj in range(3):
            patch = xp[:, :, di:di + h, dj:dj + width]
            dw[:, :, di, dj] = np.einsum("nohw,nchw->oc", dout, patch, optimize=True)
            dxp[:, :, di:di + h, dj:dj + width] += np.einsum(
                "nohw,oc->nchw", dout, w[:, :, di, dj], optimize=True
            )
    db = dout.sum(axis=(0, 2, 3))
    return dw, db, dxp[:, :, 1:-1, 1:-1]


def _pool_forward(x: np.ndarray) -> tuple[np.ndarray, dict]:
    n, c, h, width = x.shape
    h2, w2 = h // 2, width // 2
    xc = x[:, :, :2 * h2, :2 * w2]
    blocks = xc.reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4)
    argmax = blocks.argmax(axis=-1)  # first maximal element wins ties
    out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
    return out, {"argmax": argmax, "in_shape": x.shape}


def _pool_backward(dout: np.ndarray, cache: dict) -> np.ndarray:
    n, c, h, width = cache["in_shape"]
    h2, w2 = h // 2, width // 2
    dblocks = np.zeros((n, c, h2, w2, 4))
    np.put_along_axis(dblocks, cache["argmax"][..., None], dout[..., None], axis=-1)
    dx = np.zeros((n, c, h, width))
    dx[:, :, :2 * h2, :2 * w2] = (
        dblocks.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h2, 2 * w2)
    )
    return dx


def forward(
    spec: NetworkSpec,
    params: ModelParams,
    x: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, list[dict[str, Any]]]:
    """Run the network, returning logits and per-layer caches for backward.

    Dropout is active only in training mode (inverted scaling) and then
    requires an rng; inference mode is deterministic.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[:, np.newaxis, :, :]
    if x.shape[1:] != spec.input_shape:
        raise ValueError(f"input shape {x.shape[1:]} does not match spec {spec.input_shape}")
    names = layer_names(spec)
    caches: list[dict[str, Any]] = []
    for i, (layer, name) in enumerate(zip(spec.layers, names)):
        cache: dict[str, Any] = {}
        if layer.kind == "conv3x3":
            w = params[f"{name}.weight"].value
            if x.shape[1] != w.shape[1]:
                raise ValueError(
                    f"layer {i} ({name}): expected {w.shape[1]} input channels, got {x.shape[1]}"
                )
            x, xp = _conv_forward(x, w, params[f"{name}.bias"].value)
            cache["xp"] = xp
        elif layer.kind == "maxpool2x2":
            x, cache = _pool_forward(x)
        elif layer.kind == "relu":
            cache["mask"] = x > 0.0
            x = np.maximum(x, 0.0)
        elif layer.kind == "dropout":
            if training and layer.rate > 0.0:
                if rng is None:
                    raise ValueError("training-mode forward through dropout needs an rng")
                mask = rng.random(x.shape) >= layer.rate
                x = x * mask / (1.0 - layer.rate)
                cache["mask"] = mask
            else:
                cache["mask"] = None
        elif layer.kind == "flatten":
            cache["in_shape"] = x.shape
            x = x.reshape(x.shape[0], -1)
        elif layer.kind == "dense":
            w = params[f"{name}.weight"].value
            if x.shape[1] != w.shape[1]:
                raise ValueError(
                    f"layer {i} ({name}): expected {w.shape[1]} features, got {x.shape[1]}"
                )
            cache["x"] = x
            x = x @ w.T + params[f"{name}.bias"].value
        caches.append(cache)
    return x, caches


def backward(
    spec: NetworkSpec,
    params: ModelParams,
    caches: list[dict[str, Any]],
    grad_out: np.ndarray,
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Backpropagate grad_out through the cached forward pass.

    Returns gradients for every unfrozen parameter (frozen tensors get no
    entry) and the gradient with respect to the network input.
    """
    if len(caches) != len(spec.layers):
        raise ValueError(f"cache has {len(caches)} entries for {len(spec.layers)} layers")
    names = layer_names(spec)
    grads: dict[str, np.ndarray] = {}
    g = np.asarray(grad_out, dtype=np.float64)
    for layer, name, cache in zip(reversed(spec.layers), reversed(names), reversed(caches)):
        if layer.kind == "conv3x3":
            dw, db, g = _conv_backward(g, cache["xp"], params[f"{name}.weight"].value)
            if not params[f"{name}.weight"].frozen:
                grads[f"{name}.weight"] = dw
            if not params[f"{name}.bias"].frozen:
                grads[f"{name}.bias"] = db
        elif layer.kind == "maxpool2x2":
            g = _pool_backward(g, cache)
        elif layer.kind == "relu":
            g = g * cache["mask"]
        elif layer.kind == "dropout":
            if cache["mask"] is not None:
                g = g * cache["mask"] / (1.0 - layer.rate)
        elif layer.kind == "flatten":
            g = g.reshape(cache["in_shape"])
        elif layer.kind == "dense":
            x = cache["x"]
            if not params[f"{name}.weight"].frozen:
                grads[f"{name}.weight"] = g.T @ x
            if not params[f"{name}.bias"].frozen:
                grads[f"{name}.bias"] = g.sum(axis=0)
            g = g @ params[f"{name}.weight"].value
    return grads, g


def loss_xent(logits: np.ndarray, class_idx: np.ndarray | int) -> float:
    """Mean softmax cross-entropy, stabilized by max subtraction."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(np.asarray(class_idx, dtype=np.int64))
    z = logits - logits.max(axis=1, keepdims=True)
    log_softmax = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-log_softmax[np.arange(len(y)), y].mean())


def xent_gradient(logits: np.ndarray, class_idx: np.ndarray | int) -> np.ndarray:
    """Gradient of mean cross-entropy at the logits: (softmax - one_hot) / n."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(np.asarray(class_idx, dtype=np.int64))
    z = logits - logits.max(axis=1, keepdims=True)
    softmax = np.exp(z)
    softmax /= softmax.sum(axis=1, keepdims=True)
    softmax[np.arange(len(y)), y] -= 1.0
    return softmax / len(y)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.01
    batch_size: int = 128
    patience: int = 50
    max_epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.patience > self.max_epochs:
            raise ValueError(f"patience {self.patience} exceeds max_epochs {self.max_epochs}")


def sgd_step(params: ModelParams, grads: dict[str, np.ndarray], cfg: TrainConfig) -> None:
    """Momentum SGD with coupled weight decay; frozen tensors are untouched."""
    for name, tensor in params.items():
        if tensor.frozen or name not in grads:
            continue
        g = grads[name] + cfg.weight_decay * tensor.value
        tensor.momentum = cfg.momentum * tensor.momentum + g
        tensor.value = tensor.value - cfg.lr * tensor.momentum


def predict(
    spec: NetworkSpec, params: ModelParams, x: np.ndarray, chunk: int = 256
) -> np.ndarray:
    """Inference-mode class predictions."""
    x = np.asarray(x, dtype=np.float64)
    preds = []
    for start in range(0, len(x), chunk):
        logits, _ = forward(spec, params, x[start:start + chunk], training=False)
        preds.append(logits.argmax(axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def _eval_loss_acc(
    spec: NetworkSpec, params: ModelParams, x: np.ndarray, y: np.ndarray, chunk: int = 256
) -> tuple[float, float]:
    total_loss = 0.0
    correct = 0
    for start in range(0, len(x), chunk):
        xb, yb = x[start:start + chunk], y[start:start + chunk]
        logits, _ = forward(spec, params, xb, training=False)
        total_loss += loss_xent(logits, yb) * len(xb)
        correct += int((logits.argmax(axis=1) == yb).sum())
    return total_loss / len(x), correct / len(x)


def train(
    spec: NetworkSpec,
    params: ModelParams,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig = TrainConfig(),
) -> tuple[ModelParams, TrainLog]:
    """Mini-batch SGD with early stopping; returns the best-validation weights.

    The caller's params are not mutated; frozen tensors in the returned
    store are bit-identical to the initial ones.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    x_val = np.asarray(x_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.int64)
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValueError("train and validation partitions must both be non-empty")
    if len(np.unique(y_train)) < 2:
        raise ValueError("training data must contain both classes")

    params = params.copy()
    rng = np.random.default_rng(cfg.seed)
    stopper = EarlyStopper(cfg.patience)
    log = TrainLog()
    best = params.copy()

    for epoch in range(cfg.max_epochs):
        batch_losses = []
        for idx in minibatch_indices(len(x_train), cfg.batch_size, rng):
            xb, yb = x_train[idx], y_train[idx]
            logits, caches = forward(spec, params, xb, training=True, rng=rng)
            batch_losses.append(loss_xent(logits, yb) * len(idx))
            grads, _ = backward(spec, params, caches, xent_gradient(logits, yb))
            sgd_step(params, grads, cfg)
        train_loss = float(np.sum(batch_losses) / len(x_train))
        val_loss, val_acc = _eval_loss_acc(spec, params, x_val, y_val)
        log.append(EpochRecord(epoch, train_loss, val_loss, val_acc))
        if stopper.update(val_loss, epoch):
            best = params.copy()
            log.best_epoch = epoch
        if stopper.should_stop:
            break
    return best, log


def conv_param_names(params: ModelParams) -> list[str]:
    return [n for n in params.names() if n.startswith("conv")]


def replace_head(
    source: ModelParams, spec: NetworkSpec, seed: int = 0
) -> ModelParams:
    """Graft the source's conv tensors onto a freshly initialized network.

    Conv weights and biases are copied verbatim; dense layers come from the
    seeded initializer. Raises if the source is missing any conv tensor the
    target spec requires.
    """
    fresh = init_params(spec, seed)
    needed = conv_param_names(fresh)
    missing = [n for n in needed if n not in source]
    if missing:
        raise ValueError(f"source parameters missing conv tensors: {missing}")
    for name in needed:
        src = source[name].value
        if src.shape != fresh[name].value.shape:
            raise ValueError(
                f"shape mismatch for {name}: source {src.shape}, target {fresh[name].value.shape}"
            )
        fresh[name].value = src.copy()
    return fresh


def count_parameters(spec: NetworkSpec) -> int:
    """Closed-form parameter count: 9*c_in*c_out + c_out per conv, (f+1)*u per dense."""
    total = 0
    shape: tuple[int, ...] = spec.input_shape
    for layer, out_shape in zip(spec.layers, layer_shapes(spec)):
        if layer.kind == "conv3x3":
            total += 9 * shape[0] * layer.channels + layer.channels
        elif layer.kind == "dense":
            total += shape[0] * layer.units + layer.units
        shape = out_shape
    return total
