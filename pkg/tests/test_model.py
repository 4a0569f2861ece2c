import hashlib
import math
import struct

import numpy as np
import pytest

import egohist as eh


def _tiny_setup(rng, num_graphs=4, d=3, **cfg_over):
    graphs = []
    for _ in range(num_graphs):
        n = int(rng.integers(2, 8))
        feats = np.zeros((n, d))
        feats[np.arange(n), rng.integers(0, d, n)] = 1.0
        edges = tuple(
            (u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.5
        )
        graphs.append(eh.Graph(features=feats, edges=edges, target=int(rng.integers(0, 2))))
    cfg = dict(feature_dim=d, num_classes=2, num_layers=2, masks_per_layer=3,
               dict_size=4, mlp_hidden=5, hist_init_scale=3.0)
    cfg.update(cfg_over)
    config = eh.ModelConfig(**cfg)
    model = eh.Model(config, seed=int(rng.integers(0, 1000)))
    egonets = [eh.extract_egonets(g, config.egonet_radius) for g in graphs]
    return graphs, egonets, model


def test_zero_final_histograms_collapse_to_head_of_zero():
    rng = np.random.default_rng(0)
    graphs, egonets, model = _tiny_setup(rng)
    model.layers[-1].hists[...] = 0.0
    h0 = np.maximum(model.b1, 0.0)
    expected = h0 @ model.w2 + model.b2
    outs = []
    for g, ego in zip(graphs, egonets):
        out, tape = eh.model_forward(g, ego, model)
        np.testing.assert_array_equal(tape.pooled, 0.0)
        np.testing.assert_allclose(out, expected, atol=0)
        outs.append(out)
    # identical for every graph
    for out in outs[1:]:
        np.testing.assert_array_equal(out, outs[0])


def test_one_layer_model_composes_module_oracles():
    rng = np.random.default_rng(1)
    feats = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    g = eh.Graph(features=feats, edges=((0, 1), (1, 2)), target=0)
    ego = eh.extract_egonets(g, 1)
    config = eh.ModelConfig(feature_dim=2, num_classes=2, num_layers=1,
                            masks_per_layer=2, dict_size=3, mlp_hidden=4,
                            hist_init_scale=2.0)
    model = eh.Model(config, seed=9)
    out, _ = eh.model_forward(g, ego, model)

    layer = model.layers[0]
    t = float(layer.temperature)
    z = np.zeros((3, 2))
    for v in range(3):
        for j in range(2):
            h = eh.soft_histogram(feats[ego.members[v]], layer.dicts[j], t)
            z[v, j] = eh.histogram_intersection(h, layer.hists[j])
    pooled = z.sum(axis=0)
    expected = np.maximum(pooled @ model.w1 + model.b1, 0.0) @ model.w2 + model.b2
    np.testing.assert_allclose(out, expected, atol=1e-9)


def _permute(graph, perm):
    feats = np.empty_like(graph.features)
    feats[perm] = graph.features
    edges = tuple((int(perm[u]), int(perm[v])) for u, v in graph.edges)
    return eh.Graph(features=feats, edges=edges, target=graph.target)


def test_permutation_invariance_default_and_canonical():
    rng = np.random.default_rng(2)
    for pooling in ("sum", "max"):
        graphs, egonets, model = _tiny_setup(rng, num_graphs=3, pooling=pooling)
        for g, ego in zip(graphs, egonets):
            perm = rng.permutation(g.node_count)
            gp = _permute(g, perm)
            egop = eh.extract_egonets(gp, model.config.egonet_radius)
            out, _ = eh.model_forward(g, ego, model)
            outp, _ = eh.model_forward(gp, egop, model)
            np.testing.assert_allclose(outp, out, atol=1e-9)
            # canonicalized summation: bit-identical
            outc, _ = eh.model_forward(g, ego, model, canonical=True)
            outpc, _ = eh.model_forward(gp, egop, model, canonical=True)
            np.testing.assert_array_equal(outpc, outc)


def test_layerwise_outputs_nonnegative():
    rng = np.random.default_rng(3)
    graphs, egonets, model = _tiny_setup(rng, num_layers=3)
    for g, ego in zip(graphs, egonets):
        _, tape = eh.model_forward(g, ego, model)
        for lt, lay in zip(tape.layer_tapes, model.layers):
            diff = lt.hist - lay.hists[None]
            k = 0.5 * (np.abs(lt.hist).sum(-1) + np.abs(lay.hists).sum(-1)[None]
                       - np.abs(diff).sum(-1))
            assert k.min() >= 0.0


def test_forward_deterministic_without_dropout():
    rng = np.random.default_rng(4)
    graphs, egonets, model = _tiny_setup(rng)
    out1, _ = eh.model_forward(graphs[0], egonets[0], model)
    out2, _ = eh.model_forward(graphs[0], egonets[0], model)
    np.testing.assert_array_equal(out1, out2)


def test_dropout_train_time_scaling_and_eval_identity():
    rng = np.random.default_rng(5)
    graphs, egonets, model = _tiny_setup(rng, dropout=0.5)
    g, ego = graphs[0], egonets[0]
    # eval path ignores dropout entirely
    out_eval, tape = eh.model_forward(g, ego, model, training=False)
    assert all(m is None for m in tape.dropout_masks)
    # train path needs a generator and changes the output
    with pytest.raises(eh.ConfigError):
        eh.model_forward(g, ego, model, training=True)
    d_rng = np.random.default_rng(0)
    out_train, tape_train = eh.model_forward(g, ego, model, training=True, dropout_rng=d_rng)
    kept = tape_train.dropout_masks[0][tape_train.dropout_masks[0] > 0]
    np.testing.assert_allclose(kept, 2.0)  # inverted scaling by 1/keep
    assert not np.array_equal(tape_train.node_features, tape.node_features)


def test_radius_mismatch_rejected():
    rng = np.random.default_rng(6)
    graphs, egonets, model = _tiny_setup(rng, egonet_radius=2)
    wrong = eh.extract_egonets(graphs[0], 1)
    with pytest.raises(eh.ConfigError):
        eh.model_forward(graphs[0], wrong, model)


def test_ablate_out_of_range():
    rng = np.random.default_rng(7)
    graphs, egonets, model = _tiny_setup(rng)
    with pytest.raises(IndexError):
        eh.model_forward(graphs[0], egonets[0], model, ablate=[(5, 0)])
    with pytest.raises(IndexError):
        eh.model_forward(graphs[0], egonets[0], model, ablate=[(0, 99)])


# ---------------------------------------------------------------------------
# losses


def test_loss_uniform_logits_is_log2():
    assert eh.loss(np.zeros(2), 0, eh.CLASSIFICATION) == pytest.approx(math.log(2), abs=1e-12)
    assert eh.loss(np.full(2, 3.7), 1, eh.CLASSIFICATION) == pytest.approx(math.log(2), abs=1e-12)


def test_loss_worked_example():
    # logits [2, 0], target 0 -> ln(1 + e^-2)
    expected = math.log(1.0 + math.exp(-2.0))
    assert eh.loss(np.array([2.0, 0.0]), 0, eh.CLASSIFICATION) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.1269, abs=1e-4)


def test_regression_loss_zero_at_target():
    assert eh.loss(np.array([0.75]), 0.75, eh.REGRESSION) == 0.0
    assert eh.loss(np.array([1.0]), -1.5, eh.REGRESSION) == pytest.approx(2.5)


def test_loss_target_out_of_range():
    with pytest.raises(ValueError):
        eh.loss(np.zeros(2), 2, eh.CLASSIFICATION)
    with pytest.raises(ValueError):
        eh.loss_grad(np.zeros(2), -1, eh.CLASSIFICATION)


def test_metric_semantics():
    assert eh.metric(np.array([0.2, 0.9]), 1, eh.CLASSIFICATION) == 1.0
    assert eh.metric(np.array([0.2, 0.9]), 0, eh.CLASSIFICATION) == 0.0
    assert eh.metric(np.array([2.0]), 1.0, eh.REGRESSION) == 1.0


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_roundtrip_bit_identical(tmp_path):
    rng = np.random.default_rng(8)
    graphs, egonets, model = _tiny_setup(rng)
    path = str(tmp_path / "model.egh")
    eh.save_checkpoint(model, path)
    back = eh.load_checkpoint(path)
    assert back.config == model.config
    for (n1, p1, _), (n2, p2, _) in zip(model.named_parameters(), back.named_parameters()):
        assert n1 == n2
        np.testing.assert_array_equal(p1, p2)
    out1, _ = eh.model_forward(graphs[0], egonets[0], model)
    out2, _ = eh.model_forward(graphs[0], egonets[0], back)
    np.testing.assert_array_equal(out1, out2)


def test_checkpoint_digest_deterministic(tmp_path):
    config = eh.ModelConfig(feature_dim=4, num_classes=3, num_layers=2,
                            masks_per_layer=2, dict_size=3, mlp_hidden=4)
    digests = []
    for i in range(2):
        path = str(tmp_path / f"m{i}.egh")
        eh.save_checkpoint(eh.Model(config, seed=123), path)
        with open(path, "rb") as fh:
            digests.append(hashlib.sha256(fh.read()).hexdigest())
    assert digests[0] == digests[1]
    # a different seed must give different bytes
    path = str(tmp_path / "other.egh")
    eh.save_checkpoint(eh.Model(config, seed=124), path)
    with open(path, "rb") as fh:
        assert hashlib.sha256(fh.read()).hexdigest() != digests[0]


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.egh"
    path.write_bytes(b"NOTEGOHI" + b"\x00" * 32)
    with pytest.raises(eh.CheckpointError):
        eh.load_checkpoint(str(path))


def test_checkpoint_shape_mismatch(tmp_path):
    import json

    rng = np.random.default_rng(9)
    _, _, model = _tiny_setup(rng)
    path = tmp_path / "model.egh"
    eh.save_checkpoint(model, str(path))
    raw = path.read_bytes()
    hlen = struct.unpack("<Q", raw[8:16])[0]
    header = json.loads(raw[16 : 16 + hlen])
    # declare a different feature width than the arrays were written with
    header["config"]["feature_dim"] = header["config"]["feature_dim"] + 1
    enc = json.dumps(header, sort_keys=True).encode()
    path.write_bytes(raw[:8] + struct.pack("<Q", len(enc)) + enc + raw[16 + hlen :])
    with pytest.raises(eh.CheckpointError):
        eh.load_checkpoint(str(path))


def test_checkpoint_truncated(tmp_path):
    rng = np.random.default_rng(10)
    _, _, model = _tiny_setup(rng)
    path = tmp_path / "model.egh"
    eh.save_checkpoint(model, str(path))
    raw = path.read_bytes()
    path.write_bytes(raw[:-16])
    with pytest.raises(eh.CheckpointError):
        eh.load_checkpoint(str(path))


def test_checkpoint_version_guard(tmp_path):
    import json

    rng = np.random.default_rng(11)
    _, _, model = _tiny_setup(rng)
    path = tmp_path / "model.egh"
    eh.save_checkpoint(model, str(path))
    raw = path.read_bytes()
    hlen = struct.unpack("<Q", raw[8:16])[0]
    header = json.loads(raw[16 : 16 + hlen])
    header["format_version"] = 99
    enc = json.dumps(header, sort_keys=True).encode()
    path.write_bytes(raw[:8] + struct.pack("<Q", len(enc)) + enc + raw[16 + hlen :])
    with pytest.raises(eh.CheckpointError):
        eh.load_checkpoint(str(path))


# ---------------------------------------------------------------------------
# config validation


def test_model_config_validation():
    good = dict(feature_dim=2)
    eh.ModelConfig(**good)
    for bad in (
        dict(feature_dim=0),
        dict(feature_dim=2, num_layers=0),
        dict(feature_dim=2, dropout=1.0),
        dict(feature_dim=2, dropout=-0.1),
        dict(feature_dim=2, pooling="avg"),
        dict(feature_dim=2, task="ranking"),
        dict(feature_dim=2, num_classes=1),
        dict(feature_dim=2, hist_init_scale=0.0),
    ):
        with pytest.raises(eh.ConfigError):
            eh.ModelConfig(**bad)


def test_config_for_dataset(synthetic_cls):
    cfg = eh.config_for_dataset(synthetic_cls, num_layers=2)
    assert cfg.feature_dim == synthetic_cls.feature_dim
    assert cfg.num_classes == synthetic_cls.num_classes
    assert cfg.num_layers == 2
    assert cfg.hist_init_scale == pytest.approx(synthetic_cls.mean_degree() + 1.0)


def test_concurrent_evaluation_matches_sequential():
    # forward is pure given frozen parameters: thread-pool evaluation over
    # graphs must agree bitwise with the sequential pass
    from concurrent.futures import ThreadPoolExecutor

    rng = np.random.default_rng(12)
    graphs, egonets, model = _tiny_setup(rng, num_graphs=8)
    sequential = [eh.model_forward(g, e, model)[0] for g, e in zip(graphs, egonets)]
    with ThreadPoolExecutor(max_workers=4) as pool:
        threaded = list(
            pool.map(lambda ge: eh.model_forward(ge[0], ge[1], model)[0],
                     zip(graphs, egonets))
        )
    for a, b in zip(sequential, threaded):
        np.testing.assert_array_equal(a, b)


def test_loss_decreases_on_mutag_subset():
    from conftest import require_dataset

    mutag = require_dataset("MUTAG")
    subset = eh.Dataset(
        name="mutag20",
        graphs=mutag.graphs[:20],
        feature_dim=mutag.feature_dim,
        task=mutag.task,
        num_classes=mutag.num_classes,
    )
    config = eh.config_for_dataset(subset)
    model = eh.Model(config, seed=0)
    idx = np.arange(len(subset))
    record = eh.train(
        model, subset, eh.TrainSplit(train=idx, val=idx),
        eh.TrainConfig(epochs=50, patience=50, seed=0),
    )
    assert record.train_loss[-1] < record.train_loss[0]


def test_loss_decreases_on_synthetic_subset(synthetic_cls):
    subset = eh.Dataset(
        name="sub",
        graphs=synthetic_cls.graphs[:20],
        feature_dim=synthetic_cls.feature_dim,
        task=synthetic_cls.task,
        num_classes=synthetic_cls.num_classes,
    )
    config = eh.config_for_dataset(subset, num_layers=1, masks_per_layer=4,
                                   dict_size=4, mlp_hidden=8)
    model = eh.Model(config, seed=0)
    idx = np.arange(len(subset))
    record = eh.train(
        model, subset, eh.TrainSplit(train=idx, val=idx),
        eh.TrainConfig(epochs=50, patience=50, seed=0),
    )
    assert record.train_loss[-1] < record.train_loss[0]
