"""Mask-importance analysis by single-mask ablation, and mask exports.

Importance of a mask is the change in validation loss when its kernel
output is forced to zero while everything else stays fixed. Ranking is by
the signed delta: the mask whose removal hurts most matters most.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .graphs import Dataset, build_egonets
from .layer import unit_rows
from .model import Model
from .optim import evaluate


@dataclass
class MaskReport:
    layer: int
    mask: int
    baseline_loss: float
    ablated_loss: float
    delta: float
    dictionary: np.ndarray   # unit-normalized rows, as used at forward time
    histogram: np.ndarray


def mask_importance(
    model: Model, dataset: Dataset, indices, layer: int, egonets=None
) -> list[MaskReport]:
    """One report per mask in the layer, against a shared baseline loss."""
    if not 0 <= layer < model.config.num_layers:
        raise IndexError(f"layer {layer} out of range for {model.config.num_layers} layers")
    if len(indices) == 0:
        raise ValueError("validation set is empty")
    if egonets is None:
        egonets = build_egonets(dataset, model.config.egonet_radius)
    baseline = evaluate(model, dataset, egonets, indices)[0]
    lay = model.layers[layer]
    reports = []
    for j in range(model.config.masks_per_layer):
        ablated = _ablated_loss(model, dataset, egonets, indices, [(layer, j)])
        reports.append(
            MaskReport(
                layer=layer,
                mask=j,
                baseline_loss=baseline,
                ablated_loss=ablated,
                delta=ablated - baseline,
                dictionary=unit_rows(lay.dicts[j])[0],
                histogram=lay.hists[j].copy(),
            )
        )
    return reports


def _ablated_loss(model, dataset, egonets, indices, ablate):
    from .model import loss, model_forward  # local import keeps module load light

    task = model.config.task
    total = 0.0
    for gi in indices:
        g = dataset.graphs[gi]
        out, _ = model_forward(g, egonets[gi], model, training=False, ablate=ablate)
        total += loss(out, g.target, task)
    return total / len(indices)


def importance_summary(reports: list[MaskReport]) -> dict:
    """JSON-ready summary, most impactful mask first."""
    ranked = sorted(reports, key=lambda r: -r.delta)
    return {
        "criterion": "validation_loss",
        "layer": reports[0].layer if reports else None,
        "baseline": reports[0].baseline_loss if reports else None,
        "masks": [
            {"mask": r.mask, "ablated": r.ablated_loss, "delta": r.delta}
            for r in ranked
        ],
    }


def export_masks(model: Model, out_dir: str) -> list[str]:
    """Write one CSV per layer: a row per dictionary word with its frequency.

    Dictionary rows are exported unit-normalized, exactly as the forward
    pass consumes them. Columns: layer, mask, word, frequency, c0..c{d-1}.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for li, layer in enumerate(model.layers):
        path = os.path.join(out_dir, f"masks_layer{li}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["# schema: egohist.masks.v1"])
            header = ["layer", "mask", "word", "frequency"] + [
                f"c{k}" for k in range(layer.in_dim)
            ]
            writer.writerow(header)
            for j in range(layer.num_masks):
                words = unit_rows(layer.dicts[j])[0]
                for w in range(layer.dict_size):
                    writer.writerow(
                        [li, j, w, repr(float(layer.hists[j, w]))]
                        + [repr(float(x)) for x in words[w]]
                    )
        paths.append(path)
    return paths
