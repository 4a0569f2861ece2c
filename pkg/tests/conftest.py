import functools
import os

import numpy as np
import pytest

import egohist as eh

# Real benchmark datasets are looked up under EGOHIST_DATA (default: ./data
# at the repo root). Tests that need them skip with a pointer to the fetch
# script when the files are absent.
DATA_ROOT = os.environ.get(
    "EGOHIST_DATA",
    os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data"),
)


@functools.lru_cache(maxsize=None)
def _load(name):
    return eh.load_tudataset(DATA_ROOT, name)


def require_dataset(name):
    try:
        return _load(name)
    except eh.DatasetFormatError:
        pytest.skip(
            f"dataset {name} not present under {DATA_ROOT} "
            f"(run scripts/fetch_tudatasets.py on a networked machine)"
        )


@pytest.fixture
def fixture_dataset_dir(tmp_path):
    """Hand-written two-graph dataset: a triangle and a single edge.

    Graph 1 (nodes 1,2,3): triangle, node labels 7,9,7, graph label 1.
    Graph 2 (nodes 4,5): one edge, node labels 9,9, graph label -1.
    Labels {7,9} one-hot to d=2; graph labels {-1,1} remap to {0,1}.
    """
    d = tmp_path / "TINY"
    d.mkdir()
    (d / "TINY_A.txt").write_text(
        "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n"
    )
    (d / "TINY_graph_indicator.txt").write_text("1\n1\n1\n2\n2\n")
    (d / "TINY_graph_labels.txt").write_text("1\n-1\n")
    (d / "TINY_node_labels.txt").write_text("7\n9\n7\n9\n9\n")
    return tmp_path


def small_trained_model(dataset, epochs=60, seed=0, **config_overrides):
    """Train a small model quickly; shared by interpret/CLI/acceptance tests."""
    overrides = dict(num_layers=1, masks_per_layer=4, dict_size=4, mlp_hidden=8)
    overrides.update(config_overrides)
    config = eh.config_for_dataset(dataset, **overrides)
    model = eh.Model(config, seed=seed)
    split = eh.holdout_split(dataset, seed)
    record = eh.train(
        model,
        dataset,
        split,
        eh.TrainConfig(epochs=epochs, learning_rate=0.01, patience=max(epochs, 1), seed=seed),
    )
    return model, split, record


@pytest.fixture(scope="session")
def synthetic_cls():
    return eh.synthetic_classification_dataset(num_graphs=60, seed=11)


@pytest.fixture(scope="session")
def synthetic_reg():
    return eh.synthetic_regression_dataset(num_graphs=40, seed=12)
