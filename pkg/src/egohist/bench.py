"""Scaling benchmark: forward+backward wall time across a node-count ladder.

The per-layer work is linear in node count at fixed degree, mask count and
dictionary size, so the log-log slope of runtime against nodes should sit
near 1. Circulant graphs keep the degree (and hence egonet size) exactly
constant while the ladder grows.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .graphs import circulant_graph, extract_egonets
from .model import Model, ModelConfig, loss, loss_grad, model_backward, model_forward
from .rng import sub_rng


@dataclass
class BenchResult:
    node_counts: list[int]
    seconds: list[float]
    slope: float
    degree: int
    feature_dim: int
    masks: int
    dict_size: int
    layers: int
    radius: int
    repeats: int
    dict_ladder: list[int] = field(default_factory=list)
    dict_seconds: list[float] = field(default_factory=list)
    dict_slope: float | None = None


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def _prepare_case(n, degree, feature_dim, masks, dict_size, layers, radius, seed):
    rng = sub_rng(seed, f"bench-n{n}-w{dict_size}")
    graph = circulant_graph(n, degree, feature_dim, rng)
    egonets = extract_egonets(graph, radius)
    config = ModelConfig(
        feature_dim=feature_dim,
        num_classes=2,
        num_layers=layers,
        egonet_radius=radius,
        masks_per_layer=masks,
        dict_size=dict_size,
        mlp_hidden=8,
        hist_init_scale=degree + 1.0,
    )
    model = Model(config, seed=seed)

    def once():
        model.zero_grads()
        out, tape = model_forward(graph, egonets, model, training=False)
        model_backward(tape, model, loss_grad(out, 0, config.task))

    return once


def _time_cases(cases, repeats):
    """Min-of-repeats wall time per case, sweeps interleaved across cases so
    clock-frequency drift and cache warmup do not bias any single rung."""
    for once in cases:
        once()  # warmup
    best = [float("inf")] * len(cases)
    for _ in range(repeats):
        for i, once in enumerate(cases):
            tic = time.perf_counter()
            once()
            best[i] = min(best[i], time.perf_counter() - tic)
    return best


def run_scaling(
    node_counts,
    degree: int = 4,
    feature_dim: int = 16,
    masks: int = 8,
    dict_size: int = 16,
    layers: int = 1,
    radius: int = 1,
    repeats: int = 5,
    seed: int = 0,
    dict_sizes=None,
) -> BenchResult:
    """Time forward+backward over the node ladder; optionally over a
    dictionary-size ladder at fixed n (the largest of the node ladder)."""
    node_counts = [int(n) for n in node_counts]
    if len(node_counts) < 3:
        raise ConfigError("need at least 3 node counts to fit a slope")
    cases = [
        _prepare_case(n, degree, feature_dim, masks, dict_size, layers, radius, seed)
        for n in node_counts
    ]
    seconds = _time_cases(cases, repeats)
    result = BenchResult(
        node_counts=node_counts,
        seconds=seconds,
        slope=loglog_slope(node_counts, seconds),
        degree=degree,
        feature_dim=feature_dim,
        masks=masks,
        dict_size=dict_size,
        layers=layers,
        radius=radius,
        repeats=repeats,
    )
    if dict_sizes:
        ladder = [int(w) for w in dict_sizes]
        n_fixed = max(node_counts)
        result.dict_ladder = ladder
        result.dict_seconds = _time_cases(
            [
                _prepare_case(n_fixed, degree, feature_dim, masks, w, layers, radius, seed)
                for w in ladder
            ],
            repeats,
        )
        if len(ladder) >= 2:
            result.dict_slope = loglog_slope(ladder, result.dict_seconds)
    return result


def total_egonet_membership(egonets) -> int:
    """Sum of egonet sizes; for radius 1 this equals 2|E| + n (centers included)."""
    return int(egonets.sizes().sum())
