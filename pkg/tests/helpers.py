"""Shared test machinery: independent finite-difference oracles and
random-instance builders kept deliberately separate from the library's
own backward implementation."""

import numpy as np

import egohist as eh

FD_STEP = 1e-5
# resampling margin: instances whose forward pass sits closer than this to
# an |h - f|, ReLU, or |pred - target| kink are redrawn, so central
# differences at FD_STEP never straddle a non-smooth point
KINK_MARGIN = 2e-3


def central_diff(f, array, step=FD_STEP):
    """Central finite differences of scalar f() w.r.t. every entry of array."""
    grad = np.zeros_like(array, dtype=np.float64)
    it = np.ndindex(*array.shape) if array.ndim else [()]
    for idx in it:
        orig = array[idx]
        array[idx] = orig + step
        fp = f()
        array[idx] = orig - step
        fm = f()
        array[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * step)
    return grad


def max_rel_err(analytic, fd, floor=1e-4):
    """Worst |analytic - fd| / max(|analytic|, |fd|, floor) over entries.

    The floor turns the comparison into an absolute one for near-zero
    gradients, where finite differences are dominated by roundoff.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    fd = np.asarray(fd, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), floor)
    return float(np.max(np.abs(analytic - fd) / denom))


def random_graph(rng, max_nodes=8, dim=3, one_hot=False):
    n = int(rng.integers(1, max_nodes + 1))
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < 0.4:
                edges.append((u, v))
    if one_hot:
        feats = np.zeros((n, dim))
        feats[np.arange(n), rng.integers(0, dim, n)] = 1.0
    else:
        feats = rng.standard_normal((n, dim))
    return eh.Graph(features=feats, edges=tuple(edges), target=0)


def random_instance(rng):
    """Random (graph, egonets, model, target) within the small-instance box
    n <= 8, d <= 5, W <= 6, M <= 3, L <= 2."""
    n = int(rng.integers(2, 9))
    d = int(rng.integers(1, 6))
    W = int(rng.integers(1, 7))
    M = int(rng.integers(1, 4))
    L = int(rng.integers(1, 3))
    task = eh.CLASSIFICATION if rng.random() < 0.7 else eh.REGRESSION
    c = int(rng.integers(2, 4))
    graph = random_graph(rng, max_nodes=n, dim=d)
    graph = eh.Graph(features=graph.features, edges=graph.edges,
                     target=int(rng.integers(0, c)) if task == eh.CLASSIFICATION
                     else float(rng.standard_normal()))
    radius = int(rng.integers(1, 3))
    config = eh.ModelConfig(
        feature_dim=d,
        task=task,
        num_classes=c,
        num_layers=L,
        egonet_radius=radius,
        masks_per_layer=M,
        dict_size=W,
        mlp_hidden=int(rng.integers(2, 5)),
        pooling=eh.model.POOL_SUM if rng.random() < 0.7 else eh.model.POOL_MAX,
        hist_init_scale=float(graph.node_count) / 2.0 + 0.5,
    )
    model = eh.Model(config, seed=int(rng.integers(0, 2**31)))
    # the production output layer starts at zero; randomize it here so the
    # finite-difference checks drive gradients through every layer
    model.w2[...] = rng.standard_normal(model.w2.shape) / np.sqrt(config.mlp_hidden)
    model.b2[...] = 0.1 * rng.standard_normal(model.b2.shape)
    egonets = eh.extract_egonets(graph, radius)
    return graph, egonets, model


def kink_distance(model, graph, egonets):
    """Distance of the forward pass to its nearest non-smooth point."""
    out, tape = eh.model_forward(graph, egonets, model, training=False)
    dist = np.inf
    for lt, layer in zip(tape.layer_tapes, model.layers):
        dist = min(dist, float(np.abs(lt.hist - layer.hists[None, :, :]).min()))
    dist = min(dist, float(np.abs(tape.a1).min()))
    if model.config.task == eh.REGRESSION:
        dist = min(dist, abs(float(out[0]) - float(graph.target)))
    if model.config.pooling == eh.model.POOL_MAX and graph.node_count > 1:
        z = np.sort(tape.node_features, axis=0)
        if z.shape[0] >= 2:
            dist = min(dist, float((z[-1] - z[-2]).min()))
    return dist


def smooth_instance(rng, max_tries=50):
    """Random instance resampled until it sits clear of every kink."""
    for _ in range(max_tries):
        graph, egonets, model = random_instance(rng)
        if kink_distance(model, graph, egonets) > KINK_MARGIN:
            return graph, egonets, model
    raise RuntimeError("could not sample a kink-free instance")


def model_loss(model, graph, egonets):
    out, _ = eh.model_forward(graph, egonets, model, training=False)
    return eh.loss(out, graph.target, model.config.task)


def analytic_model_grads(model, graph, egonets):
    model.zero_grads()
    out, tape = eh.model_forward(graph, egonets, model, training=False)
    d_feats = eh.model_backward(
        tape, model, eh.loss_grad(out, graph.target, model.config.task)
    )
    return {name: grad.copy() for name, _, grad in model.named_parameters()}, d_feats


def check_model_gradients(model, graph, egonets, rtol=1e-5):
    """Max relative error between analytic and FD gradients, params + inputs."""
    analytic, d_feats = analytic_model_grads(model, graph, egonets)
    worst = 0.0
    for name, param, _ in model.named_parameters():
        fd = central_diff(lambda: model_loss(model, graph, egonets), param)
        worst = max(worst, max_rel_err(analytic[name], fd))
    fd_feats = central_diff(lambda: model_loss(model, graph, egonets), graph.features)
    worst = max(worst, max_rel_err(d_feats, fd_feats))
    return worst
