"""Stacked histogram layers, pooling, the MLP head, losses, and checkpoints."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CheckpointError, ConfigError, ShapeError
from .graphs import CLASSIFICATION, REGRESSION, Dataset, EgonetIndex, Graph
from .layer import HistogramLayer, LayerTape, layer_backward, layer_forward
from .rng import sub_rng

POOL_SUM = "sum"
POOL_MAX = "max"

CHECKPOINT_MAGIC = b"EGOHIST1"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    feature_dim: int
    task: str = CLASSIFICATION
    num_classes: int = 2
    num_layers: int = 3
    egonet_radius: int = 1
    masks_per_layer: int = 8
    dict_size: int = 8
    mlp_hidden: int = 64
    dropout: float = 0.0
    pooling: str = POOL_SUM
    hist_init_scale: float = 2.0

    def __post_init__(self):
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ConfigError(f"unknown task {self.task!r}")
        for name in ("feature_dim", "num_layers", "egonet_radius",
                     "masks_per_layer", "dict_size", "mlp_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.task == CLASSIFICATION and self.num_classes < 2:
            raise ConfigError("classification needs num_classes >= 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.pooling not in (POOL_SUM, POOL_MAX):
            raise ConfigError(f"pooling must be '{POOL_SUM}' or '{POOL_MAX}'")
        if self.hist_init_scale <= 0:
            raise ConfigError("hist_init_scale must be positive")

    @property
    def out_dim(self) -> int:
        return self.num_classes if self.task == CLASSIFICATION else 1


def config_for_dataset(dataset: Dataset, **overrides) -> ModelConfig:
    """ModelConfig with feature/task/scale fields filled in from the data.

    The learned-histogram init scale is the dataset's mean egonet size at
    radius 1 (mean degree + 1), the mass a soft histogram actually carries.
    """
    base = dict(
        feature_dim=dataset.feature_dim,
        task=dataset.task,
        num_classes=max(dataset.num_classes, 2),
        hist_init_scale=dataset.mean_degree() + 1.0,
    )
    base.update(overrides)
    return ModelConfig(**base)


class Model:
    """All trainable parameters plus paired gradient buffers."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = sub_rng(seed, "init")
        self.layers: list[HistogramLayer] = []
        in_dim = config.feature_dim
        for _ in range(config.num_layers):
            self.layers.append(
                HistogramLayer(
                    in_dim,
                    config.masks_per_layer,
                    config.dict_size,
                    rng,
                    hist_scale=config.hist_init_scale,
                )
            )
            in_dim = config.masks_per_layer
        m, out = config.mlp_hidden, config.out_dim
        self.w1 = rng.standard_normal((in_dim, m)) * np.sqrt(2.0 / in_dim)
        self.b1 = np.zeros(m)
        # zero-initialized output layer: the first forward pass is the zero
        # vector regardless of how large the pooled kernel values are, so
        # the loss starts at chance level instead of blowing up with n
        self.w2 = np.zeros((m, out))
        self.b2 = np.zeros(out)
        self.grad_w1 = np.zeros_like(self.w1)
        self.grad_b1 = np.zeros_like(self.b1)
        self.grad_w2 = np.zeros_like(self.w2)
        self.grad_b2 = np.zeros_like(self.b2)

    def named_parameters(self):
        params = []
        for i, layer in enumerate(self.layers):
            params.extend(layer.named_parameters(prefix=f"layers.{i}"))
        params.extend(
            [
                ("head.w1", self.w1, self.grad_w1),
                ("head.b1", self.b1, self.grad_b1),
                ("head.w2", self.w2, self.grad_w2),
                ("head.b2", self.b2, self.grad_b2),
            ]
        )
        return params

    def zero_grads(self):
        for _, _, grad in self.named_parameters():
            grad[...] = 0.0

    def get_state(self) -> list[np.ndarray]:
        return [param.copy() for _, param, _ in self.named_parameters()]

    def set_state(self, state):
        params = self.named_parameters()
        if len(state) != len(params):
            raise ShapeError("state does not match model parameters")
        for saved, (_, param, _) in zip(state, params):
            param[...] = saved

    def num_parameters(self) -> int:
        return sum(p.size for _, p, _ in self.named_parameters())


@dataclass
class ModelTape:
    layer_tapes: list[LayerTape]
    dropout_masks: list
    node_features: np.ndarray     # (n, M) final per-node features
    pooled: np.ndarray            # (M,)
    argmax: np.ndarray | None     # max pooling row choices
    a1: np.ndarray                # hidden pre-activation
    h1: np.ndarray                # hidden activation
    ablated: dict = field(default_factory=dict)


def _ablate_columns(ablate) -> dict[int, list[int]]:
    cols: dict[int, list[int]] = {}
    for layer_idx, mask_idx in ablate:
        cols.setdefault(int(layer_idx), []).append(int(mask_idx))
    return cols


def model_forward(
    g: Graph,
    egonets: EgonetIndex,
    model: Model,
    training: bool = False,
    dropout_rng: np.random.Generator | None = None,
    ablate=(),
    canonical: bool = False,
    dropout_masks=None,
):
    """Graph-level output vector (c logits, or one real for regression).

    ``ablate`` is a collection of (layer, mask) pairs whose kernel outputs
    are forced to zero, the mechanism behind mask-importance analysis.
    ``dropout_masks`` overrides the sampled masks (gradient testing hook).
    """
    cfg = model.config
    if egonets.radius != cfg.egonet_radius:
        raise ConfigError(
            f"egonets built at radius {egonets.radius}, model expects {cfg.egonet_radius}"
        )
    ablate_cols = _ablate_columns(ablate)
    for layer_idx in ablate_cols:
        if not 0 <= layer_idx < cfg.num_layers:
            raise IndexError(f"ablation layer {layer_idx} out of range")
        for mask_idx in ablate_cols[layer_idx]:
            if not 0 <= mask_idx < cfg.masks_per_layer:
                raise IndexError(f"ablation mask {mask_idx} out of range")

    use_dropout = training and cfg.dropout > 0.0
    if use_dropout and dropout_rng is None and dropout_masks is None:
        raise ConfigError("training with dropout needs a dropout generator")

    x = g.features
    tapes, masks = [], []
    for idx, layer in enumerate(model.layers):
        z, tape = layer_forward(x, egonets, layer, canonical=canonical)
        tapes.append(tape)
        if idx in ablate_cols:
            z = z.copy()
            z[:, ablate_cols[idx]] = 0.0
        if use_dropout:
            if dropout_masks is not None:
                mask = dropout_masks[idx]
            else:
                keep = dropout_rng.random(z.shape) >= cfg.dropout
                mask = keep / (1.0 - cfg.dropout)   # inverted scaling
            z = z * mask
            masks.append(mask)
        else:
            masks.append(None)
        x = z

    if cfg.pooling == POOL_SUM:
        pooled = np.sort(x, axis=0).sum(axis=0) if canonical else x.sum(axis=0)
        argmax = None
    else:
        argmax = np.argmax(x, axis=0)
        pooled = x[argmax, np.arange(x.shape[1])]

    a1 = pooled @ model.w1 + model.b1
    h1 = np.maximum(a1, 0.0)
    out = h1 @ model.w2 + model.b2
    tape = ModelTape(
        layer_tapes=tapes,
        dropout_masks=masks,
        node_features=x,
        pooled=pooled,
        argmax=argmax,
        a1=a1,
        h1=h1,
        ablated=ablate_cols,
    )
    return out, tape


def model_backward(tape: ModelTape, model: Model, d_out: np.ndarray) -> np.ndarray:
    """Accumulate gradients for every parameter; returns d(input features)."""
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.shape != (model.config.out_dim,):
        raise ShapeError(f"output grad {d_out.shape}, expected {(model.config.out_dim,)}")

    model.grad_w2 += np.outer(tape.h1, d_out)
    model.grad_b2 += d_out
    d_h1 = model.w2 @ d_out
    d_a1 = d_h1 * (tape.a1 > 0)
    model.grad_w1 += np.outer(tape.pooled, d_a1)
    model.grad_b1 += d_a1
    d_pooled = model.w1 @ d_a1

    n, m_cols = tape.node_features.shape
    if tape.argmax is None:
        d_z = np.repeat(d_pooled[None, :], n, axis=0)
    else:
        d_z = np.zeros((n, m_cols))
        d_z[tape.argmax, np.arange(m_cols)] = d_pooled

    for idx in range(len(model.layers) - 1, -1, -1):
        mask = tape.dropout_masks[idx]
        if mask is not None:
            d_z = d_z * mask
        if idx in tape.ablated:
            d_z = d_z.copy()
            d_z[:, tape.ablated[idx]] = 0.0
        d_z = layer_backward(tape.layer_tapes[idx], model.layers[idx], d_z)
    return d_z


# ---------------------------------------------------------------------------
# losses


def loss(output: np.ndarray, target, task: str) -> float:
    """Cross-entropy (natural log) for classification, absolute error otherwise."""
    output = np.asarray(output, dtype=np.float64)
    if task == CLASSIFICATION:
        t = int(target)
        if not 0 <= t < output.shape[0]:
            raise ValueError(f"target {t} outside [0, {output.shape[0]})")
        z = output - output.max()
        return float(np.log(np.exp(z).sum()) - z[t])
    return float(abs(float(output[0]) - float(target)))


def loss_grad(output: np.ndarray, target, task: str) -> np.ndarray:
    output = np.asarray(output, dtype=np.float64)
    if task == CLASSIFICATION:
        t = int(target)
        if not 0 <= t < output.shape[0]:
            raise ValueError(f"target {t} outside [0, {output.shape[0]})")
        z = output - output.max()
        p = np.exp(z)
        p /= p.sum()
        p[t] -= 1.0
        return p
    return np.array([float(np.sign(float(output[0]) - float(target)))])


def metric(output: np.ndarray, target, task: str) -> float:
    """Accuracy contribution (0/1) for classification, absolute error otherwise."""
    if task == CLASSIFICATION:
        return float(int(np.argmax(output)) == int(target))
    return float(abs(float(output[0]) - float(target)))


# ---------------------------------------------------------------------------
# checkpoints: magic, 8-byte header length, JSON header, raw float64 blob.
# Every byte is a pure function of (config, parameters), so identically
# seeded models produce identical files.


def save_checkpoint(model: Model, path: str) -> None:
    params = model.named_parameters()
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "arrays": [
            {"name": name, "shape": list(param.shape)} for name, param, _ in params
        ],
    }
    blob = b"".join(
        np.ascontiguousarray(param, dtype="<f8").tobytes() for _, param, _ in params
    )
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(encoded)))
        fh.write(encoded)
        fh.write(blob)


def load_checkpoint(path: str) -> Model:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not an egohist checkpoint")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt header ({exc})") from None
        blob = fh.read()

    if header.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: format version {header.get('format_version')}, "
            f"expected {CHECKPOINT_VERSION}"
        )
    try:
        config = ModelConfig(**header["config"])
    except (TypeError, ConfigError) as exc:
        raise CheckpointError(f"{path}: bad config ({exc})") from None

    model = Model(config, seed=0)
    params = model.named_parameters()
    declared = header.get("arrays", [])
    if [d.get("name") for d in declared] != [name for name, _, _ in params]:
        raise CheckpointError(f"{path}: parameter blocks do not match config")
    offset = 0
    for decl, (name, param, _) in zip(declared, params):
        if tuple(decl.get("shape", ())) != param.shape:
            raise CheckpointError(
                f"{path}: {name} declared {decl.get('shape')}, config implies {list(param.shape)}"
            )
        nbytes = param.size * 8
        chunk = blob[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"{path}: truncated parameter data at {name}")
        param[...] = np.frombuffer(chunk, dtype="<f8").reshape(param.shape)
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return model
