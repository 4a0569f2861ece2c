"""The histogram-intersection graph convolution and its hand-written gradients.

One layer holds M masks, each a learned dictionary (W rows in feature space)
paired with a learned histogram (W frequencies), plus one learnable softmax
temperature. The forward pass, per node v and mask j:

  1. score every node feature against the dictionary rows by cosine
     similarity, sharpened through a temperature softmax (a soft assignment
     of the feature to dictionary words);
  2. sum those soft assignments over v's egonet, giving a soft histogram
     whose total mass is exactly the egonet size;
  3. compare the soft histogram h with the learned histogram f through the
     intersection kernel K(h, f) = (|h|_1 + |f|_1 - |h - f|_1) / 2, which
     equals sum_i min(h_i, f_i) for nonnegative inputs.

The backward pass replays the same graph by hand: the subgradient of the
L1 terms (sign(0) taken as 0), the softmax Jacobian, the transpose of the
egonet summation, and the Jacobian of the unit-norm rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError
from .graphs import EgonetIndex

# guard added to Euclidean norms before dividing, so zero rows stay finite
NORM_EPS = 1e-12


def unit_rows(x: np.ndarray):
    """Rows rescaled to (almost) unit Euclidean norm; returns (rescaled, norms)."""
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / (norms + NORM_EPS), norms


def _unit_rows_backward(g: np.ndarray, xhat: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Pull a gradient back through unit_rows.

    For y = x / (r + eps) with r = |x|:  dL/dx = g/(r+eps) - (g.y) y / r.
    The r in the second denominator is floored to keep zero rows finite
    (their true Jacobian limit is I/eps, which the first term supplies).
    """
    safe = np.maximum(norms, 1e-30)
    inner = np.sum(g * xhat, axis=-1, keepdims=True)
    return g / (norms + NORM_EPS) - xhat * (inner / safe)


def normalized_similarity(x, dictionary, temperature: float) -> np.ndarray:
    """Softmax over temperature-scaled cosine similarities of x to each word.

    Both x and the dictionary rows are rescaled to unit norm before the
    inner product, so the result is scale invariant in x. Output entries
    are positive and sum to 1.
    """
    x = np.asarray(x, dtype=np.float64)
    dictionary = np.asarray(dictionary, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite feature vector")
    if x.ndim != 1 or dictionary.ndim != 2 or dictionary.shape[1] != x.shape[0]:
        raise ShapeError(
            f"expected x (d,) and dictionary (W, d); got {x.shape} and {dictionary.shape}"
        )
    xhat, _ = unit_rows(x[None, :])
    dhat, _ = unit_rows(dictionary)
    logits = float(temperature) * (xhat[0] @ dhat.T)
    logits -= logits.max()
    e = np.exp(logits)
    return e / e.sum()


def soft_histogram(features, dictionary, temperature: float) -> np.ndarray:
    """Sum of normalized similarities over a set of feature vectors.

    The total mass equals the number of vectors (each softmax row sums
    to 1), which is what makes this a soft count of dictionary words.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise ValueError("need a non-empty (k, d) feature matrix")
    rows = [normalized_similarity(f, dictionary, temperature) for f in feats]
    return np.sum(rows, axis=0)


def histogram_intersection(h, f) -> float:
    """Intersection kernel (|h|_1 + |f|_1 - |h - f|_1) / 2.

    The value is nonnegative for any sign pattern (triangle inequality);
    the clamp only removes the last-ulp negative roundoff of the sums.
    """
    h = np.asarray(h, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if h.shape != f.shape:
        raise ShapeError(f"histogram shapes differ: {h.shape} vs {f.shape}")
    return max(
        0.0,
        0.5 * float(np.abs(h).sum() + np.abs(f).sum() - np.abs(h - f).sum()),
    )


@dataclass(frozen=True)
class Mask:
    """One convolution unit: a dictionary (W, d) and its learned histogram (W,)."""

    dictionary: np.ndarray
    histogram: np.ndarray


class HistogramLayer:
    """M masks plus a learnable temperature; maps (n, d) features to (n, M)."""

    def __init__(
        self,
        in_dim: int,
        num_masks: int,
        dict_size: int,
        rng: np.random.Generator,
        hist_scale: float = 2.0,
    ):
        if min(in_dim, num_masks, dict_size) < 1:
            raise ValueError("in_dim, num_masks and dict_size must all be >= 1")
        self.in_dim = in_dim
        self.num_masks = num_masks
        self.dict_size = dict_size
        # dictionaries start isotropic; rows are renormalized at forward time
        self.dicts = rng.standard_normal((num_masks, dict_size, in_dim))
        # learned histograms start inside the attainable soft-histogram range
        # (mass per egonet ~ egonet size) to avoid the flat K = |h|_1 regime
        self.hists = rng.uniform(0.0, hist_scale, (num_masks, dict_size))
        self.temperature = np.full((), 1.0)
        self.grad_dicts = np.zeros_like(self.dicts)
        self.grad_hists = np.zeros_like(self.hists)
        self.grad_temperature = np.zeros(())

    def masks(self) -> list[Mask]:
        return [
            Mask(dictionary=self.dicts[j].copy(), histogram=self.hists[j].copy())
            for j in range(self.num_masks)
        ]

    def named_parameters(self, prefix: str = "layer"):
        return [
            (f"{prefix}.dicts", self.dicts, self.grad_dicts),
            (f"{prefix}.hists", self.hists, self.grad_hists),
            (f"{prefix}.temperature", self.temperature, self.grad_temperature),
        ]

    def zero_grads(self):
        self.grad_dicts[...] = 0.0
        self.grad_hists[...] = 0.0
        self.grad_temperature[...] = 0.0


@dataclass
class LayerTape:
    """Everything the backward pass needs to replay one forward call."""

    egonets: EgonetIndex
    xhat: np.ndarray        # (n, d) unit-rescaled inputs
    xnorms: np.ndarray      # (n, 1)
    dhat: np.ndarray        # (M*W, d) unit-rescaled dictionary rows
    dnorms: np.ndarray      # (M*W, 1)
    cosines: np.ndarray     # (n, M*W) inner products of the above
    sims: np.ndarray        # (n, M, W) softmax rows
    hist: np.ndarray        # (n, M, W) soft histograms
    sign_hist: np.ndarray   # (n, M, W)
    sign_diff: np.ndarray   # (n, M, W) sign(h - f)
    canonical: bool = False
    _consumed: bool = field(default=False, repr=False)


def layer_forward(
    features: np.ndarray,
    egonets: EgonetIndex,
    layer: HistogramLayer,
    canonical: bool = False,
):
    """Per-node intersection-kernel scores against every mask.

    Returns ((n, M) kernel outputs, tape). With ``canonical=True`` all
    order-sensitive float summations (cosine accumulation, egonet sums)
    run in a node-label-independent order, making outputs bit-identical
    under node relabeling; the default path is faster and equal to ~1 ulp.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != layer.in_dim:
        raise ShapeError(
            f"features {features.shape} incompatible with layer input width {layer.in_dim}"
        )
    n = features.shape[0]
    if egonets.node_count != n:
        raise ShapeError(
            f"egonet index covers {egonets.node_count} nodes, features have {n}"
        )
    M, W = layer.num_masks, layer.dict_size

    xhat, xnorms = unit_rows(features)
    dhat, dnorms = unit_rows(layer.dicts.reshape(M * W, layer.in_dim))
    if canonical:
        dhat_t = np.ascontiguousarray(dhat.T)
        cosines = np.stack([row @ dhat_t for row in xhat])
    else:
        cosines = xhat @ dhat.T                        # (n, M*W)
    logits = (float(layer.temperature) * cosines).reshape(n, M, W)
    logits -= logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    sims = e / e.sum(axis=-1, keepdims=True)           # (n, M, W)

    if canonical:
        hist = np.empty_like(sims)
        for v, mem in enumerate(egonets.members):
            hist[v] = np.sort(sims[mem], axis=0).sum(axis=0)
    else:
        hist = (egonets.matrix @ sims.reshape(n, M * W)).reshape(n, M, W)

    diff = hist - layer.hists[None, :, :]
    out = 0.5 * (
        np.abs(hist).sum(axis=-1)
        + np.abs(layer.hists).sum(axis=-1)[None, :]
        - np.abs(diff).sum(axis=-1)
    )
    np.maximum(out, 0.0, out=out)  # clamp the negative roundoff of the sums
    tape = LayerTape(
        egonets=egonets,
        xhat=xhat,
        xnorms=xnorms,
        dhat=dhat,
        dnorms=dnorms,
        cosines=cosines,
        sims=sims,
        hist=hist,
        sign_hist=np.sign(hist),
        sign_diff=np.sign(diff),
        canonical=canonical,
    )
    return out, tape


def layer_backward(
    tape: LayerTape, layer: HistogramLayer, upstream: np.ndarray
) -> np.ndarray:
    """Exact reverse of layer_forward.

    Accumulates parameter gradients into the layer's buffers and returns
    the gradient with respect to the input features.
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    n, d = tape.xhat.shape
    M, W = layer.num_masks, layer.dict_size
    if upstream.shape != (n, M):
        raise ShapeError(f"upstream grad {upstream.shape}, expected {(n, M)}")
    if tape.sims.shape != (n, M, W):
        raise ShapeError("tape does not match this layer's mask shapes")

    up = upstream[:, :, None]                           # (n, M, 1)

    # kernel: dK/dh_i = (sign(h_i) - sign(h_i - f_i)) / 2
    #         dK/df_i = (sign(f_i) + sign(h_i - f_i)) / 2
    d_hist = 0.5 * (tape.sign_hist - tape.sign_diff) * up
    layer.grad_hists += (
        0.5 * (np.sign(layer.hists)[None, :, :] + tape.sign_diff) * up
    ).sum(axis=0)

    # egonet summation: h = A @ s, so ds = A^T @ dh
    d_sims = (tape.egonets.matrix.T @ d_hist.reshape(n, M * W)).reshape(n, M, W)

    # softmax rows: ds/dlogits = diag(s) - s s^T
    d_logits = tape.sims * (d_sims - (d_sims * tape.sims).sum(axis=-1, keepdims=True))
    d_logits_flat = d_logits.reshape(n, M * W)

    # logits = temperature * cosines
    layer.grad_temperature += (d_logits_flat * tape.cosines).sum()
    d_cos = float(layer.temperature) * d_logits_flat    # (n, M*W)

    # cosines = xhat @ dhat^T
    d_xhat = d_cos @ tape.dhat                          # (n, d)
    d_dhat = d_cos.T @ tape.xhat                        # (M*W, d)

    layer.grad_dicts += _unit_rows_backward(d_dhat, tape.dhat, tape.dnorms).reshape(
        M, W, d
    )
    return _unit_rows_backward(d_xhat, tape.xhat, tape.xnorms)
