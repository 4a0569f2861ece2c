"""Graph containers, TUDataset flat-file ingestion, and egonet extraction.

The on-disk layout is the community-standard one used by the common graph
classification benchmarks: ``<name>_A.txt`` (comma separated, 1-indexed edge
pairs, each undirected edge usually listed twice), ``<name>_graph_indicator.txt``
(1-indexed graph id per node line), ``<name>_graph_labels.txt`` (one integer
per graph) or ``<name>_graph_attributes.txt`` (one real per graph, regression),
and optionally ``<name>_node_labels.txt`` (one integer per node).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import DatasetFormatError, DatasetIntegrityError, DatasetParseError

CLASSIFICATION = "classification"
REGRESSION = "regression"

# egonet membership matrices are kept dense below this node count; the
# dense matmul beats CSR up to roughly this size despite its n^2 work
_DENSE_LIMIT = 48


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph: one feature row per node, one target.

    Edges are normalized on construction: endpoints validated, pairs stored
    as (min, max), duplicates collapsed. ``target`` is a class index for
    classification datasets and a real scalar for regression ones.
    """

    features: np.ndarray
    edges: tuple[tuple[int, int], ...]
    target: float

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ValueError("features must be a non-empty (n, d) matrix")
        n = feats.shape[0]
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for {n} nodes")
            seen.add((min(u, v), max(u, v)))
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "edges", tuple(sorted(seen)))

    @property
    def node_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def adjacency_lists(self) -> list[np.ndarray]:
        """Sorted neighbour indices per node (self-loops ignored)."""
        neigh = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            if u != v:
                neigh[u].append(v)
                neigh[v].append(u)
        return [np.array(sorted(ns), dtype=np.intp) for ns in neigh]

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency_lists()], dtype=np.intp)


@dataclass(frozen=True)
class EgonetIndex:
    """Per-node membership lists for radius-r neighbourhoods.

    ``members[v]`` holds the sorted indices of every node within hop
    distance ``radius`` of v, v itself included. ``matrix`` is the 0/1
    membership operator with rows indexed by center: (matrix @ S)[v] sums
    S over the egonet of v. Dense for small graphs, CSR for large ones.
    """

    radius: int
    members: tuple[np.ndarray, ...]
    matrix: object = field(repr=False)

    @property
    def node_count(self) -> int:
        return len(self.members)

    def sizes(self) -> np.ndarray:
        return np.array([len(m) for m in self.members], dtype=np.intp)


def extract_egonets(g: Graph, r: int) -> EgonetIndex:
    """BFS ball of radius r around every node, including the center."""
    if r < 1:
        raise ValueError(f"egonet radius must be >= 1, got {r}")
    adj = g.adjacency_lists()
    n = g.node_count
    members = []
    for v in range(n):
        reached = {v}
        frontier = [v]
        for _ in range(r):
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if w not in reached:
                        reached.add(w)
                        nxt.append(w)
            if not nxt:
                break
            frontier = nxt
        members.append(np.array(sorted(reached), dtype=np.intp))

    if n <= _DENSE_LIMIT:
        mat = np.zeros((n, n), dtype=np.float64)
        for v, mem in enumerate(members):
            mat[v, mem] = 1.0
    else:
        indptr = np.zeros(n + 1, dtype=np.intp)
        indptr[1:] = np.cumsum([len(m) for m in members])
        indices = np.concatenate(members)
        data = np.ones(len(indices), dtype=np.float64)
        mat = sparse.csr_matrix((data, indices, indptr), shape=(n, n))
    return EgonetIndex(radius=r, members=tuple(members), matrix=mat)


@dataclass(frozen=True)
class Dataset:
    """A list of graphs sharing one feature encoding and one task."""

    name: str
    graphs: tuple[Graph, ...]
    feature_dim: int
    task: str
    num_classes: int = 0

    def __post_init__(self):
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown task {self.task!r}")
        object.__setattr__(self, "graphs", tuple(self.graphs))
        for i, g in enumerate(self.graphs):
            if g.feature_dim != self.feature_dim:
                raise ValueError(
                    f"graph {i} has feature width {g.feature_dim}, expected {self.feature_dim}"
                )
        if self.task == CLASSIFICATION:
            targets = self.targets()
            if self.num_classes < 1:
                raise ValueError("classification dataset needs num_classes >= 1")
            if len(self.graphs) and (
                targets.min() < 0 or targets.max() >= self.num_classes
            ):
                raise ValueError("class targets must lie in [0, num_classes)")

    def __len__(self) -> int:
        return len(self.graphs)

    def targets(self) -> np.ndarray:
        if self.task == CLASSIFICATION:
            return np.array([int(g.target) for g in self.graphs], dtype=np.intp)
        return np.array([float(g.target) for g in self.graphs], dtype=np.float64)

    def mean_nodes(self) -> float:
        return float(np.mean([g.node_count for g in self.graphs]))

    def mean_degree(self) -> float:
        degs = np.concatenate([g.degrees() for g in self.graphs])
        return float(degs.mean())


def build_egonets(dataset: Dataset, radius: int) -> list[EgonetIndex]:
    """Egonet indices for every graph, computed once per (dataset, radius)."""
    return [extract_egonets(g, radius) for g in dataset.graphs]


# ---------------------------------------------------------------------------
# TUDataset flat-file reader / writer


def _resolve_dir(root_path: str, name: str) -> str:
    direct = os.path.join(root_path, f"{name}_A.txt")
    nested = os.path.join(root_path, name, f"{name}_A.txt")
    if os.path.isfile(direct):
        return root_path
    if os.path.isfile(nested):
        return os.path.join(root_path, name)
    raise DatasetFormatError(
        f"missing mandatory file {name}_A.txt under {root_path!r}"
    )


def _require(base: str, name: str, suffix: str) -> str:
    path = os.path.join(base, f"{name}_{suffix}.txt")
    if not os.path.isfile(path):
        raise DatasetFormatError(f"missing mandatory file {os.path.basename(path)}")
    return path


def _optional(base: str, name: str, suffix: str) -> str | None:
    path = os.path.join(base, f"{name}_{suffix}.txt")
    return path if os.path.isfile(path) else None


def _parse_lines(path: str, conv, expect_pair: bool):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            toks = [t.strip() for t in line.split(",")] if "," in line else [line]
            try:
                vals = [conv(t) for t in toks]
            except ValueError as exc:
                raise DatasetParseError(
                    f"{os.path.basename(path)}:{lineno}: {exc}"
                ) from None
            if expect_pair:
                if len(vals) != 2:
                    raise DatasetParseError(
                        f"{os.path.basename(path)}:{lineno}: expected a pair, got {len(vals)} values"
                    )
                rows.append((vals[0], vals[1]))
            else:
                if len(vals) != 1:
                    raise DatasetParseError(
                        f"{os.path.basename(path)}:{lineno}: expected one value, got {len(vals)}"
                    )
                rows.append(vals[0])
    return rows


def _strict_int(tok: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ValueError(f"non-integer entry {tok!r}") from None


def _strict_float(tok: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ValueError(f"non-numeric entry {tok!r}") from None


def load_tudataset(root_path: str, dataset_name: str) -> Dataset:
    """Parse a TUDataset-format directory into a Dataset.

    Categorical node labels are one-hot encoded; datasets without node
    labels get the constant feature vector [1] (the one-hot of a single
    shared label). Class labels are remapped to contiguous [0, c).
    Graph labels take precedence over graph attributes when both exist.
    """
    base = _resolve_dir(root_path, dataset_name)
    edges_raw = _parse_lines(
        _require(base, dataset_name, "A"), _strict_int, expect_pair=True
    )
    indicator = _parse_lines(
        _require(base, dataset_name, "graph_indicator"), _strict_int, expect_pair=False
    )
    labels_path = _optional(base, dataset_name, "graph_labels")
    attrs_path = _optional(base, dataset_name, "graph_attributes")
    if labels_path is None and attrs_path is None:
        raise DatasetFormatError(
            f"missing mandatory file {dataset_name}_graph_labels.txt "
            f"(or {dataset_name}_graph_attributes.txt for regression)"
        )
    node_labels_path = _optional(base, dataset_name, "node_labels")

    num_nodes = len(indicator)
    if num_nodes == 0:
        raise DatasetIntegrityError(f"{dataset_name}_graph_indicator.txt is empty")
    num_graphs = max(indicator)
    present = set(indicator)
    if present != set(range(1, num_graphs + 1)):
        raise DatasetIntegrityError(
            "graph indicator ids must cover 1..G with no gaps"
        )

    # global node id (1-based) -> (graph id, local index)
    node_graph = np.asarray(indicator, dtype=np.intp)
    local_index = np.zeros(num_nodes, dtype=np.intp)
    counts = np.zeros(num_graphs + 1, dtype=np.intp)
    for i, gid in enumerate(indicator):
        local_index[i] = counts[gid]
        counts[gid] += 1

    if node_labels_path is not None:
        raw_node_labels = _parse_lines(node_labels_path, _strict_int, expect_pair=False)
        if len(raw_node_labels) != num_nodes:
            raise DatasetIntegrityError(
                f"{dataset_name}_node_labels.txt has {len(raw_node_labels)} lines, "
                f"expected {num_nodes} (one per node)"
            )
        distinct = sorted(set(raw_node_labels))
        label_col = {lab: i for i, lab in enumerate(distinct)}
        feature_dim = len(distinct)
        node_cols = np.array([label_col[lab] for lab in raw_node_labels], dtype=np.intp)
    else:
        feature_dim = 1
        node_cols = np.zeros(num_nodes, dtype=np.intp)

    if labels_path is not None:
        raw_targets = _parse_lines(labels_path, _strict_int, expect_pair=False)
        task = CLASSIFICATION
    else:
        raw_targets = _parse_lines(attrs_path, _strict_float, expect_pair=False)
        task = REGRESSION
    if len(raw_targets) != num_graphs:
        raise DatasetIntegrityError(
            f"target file has {len(raw_targets)} lines, expected {num_graphs} (one per graph)"
        )

    if task == CLASSIFICATION:
        classes = sorted(set(raw_targets))
        class_index = {c: i for i, c in enumerate(classes)}
        targets = [class_index[t] for t in raw_targets]
        num_classes = len(classes)
    else:
        targets = [float(t) for t in raw_targets]
        num_classes = 0

    edge_lists: list[list[tuple[int, int]]] = [[] for _ in range(num_graphs)]
    for u, v in edges_raw:
        if not (1 <= u <= num_nodes and 1 <= v <= num_nodes):
            raise DatasetIntegrityError(
                f"edge ({u}, {v}) references a node outside 1..{num_nodes}"
            )
        gu, gv = node_graph[u - 1], node_graph[v - 1]
        if gu != gv:
            raise DatasetIntegrityError(
                f"edge ({u}, {v}) crosses graphs {gu} and {gv}"
            )
        edge_lists[gu - 1].append((int(local_index[u - 1]), int(local_index[v - 1])))

    graphs = []
    for gid in range(1, num_graphs + 1):
        n = int(counts[gid])
        feats = np.zeros((n, feature_dim), dtype=np.float64)
        mask = node_graph == gid
        feats[local_index[mask], node_cols[mask]] = 1.0
        graphs.append(
            Graph(features=feats, edges=tuple(edge_lists[gid - 1]), target=targets[gid - 1])
        )

    return Dataset(
        name=dataset_name,
        graphs=tuple(graphs),
        feature_dim=feature_dim,
        task=task,
        num_classes=num_classes,
    )


def save_tudataset(dataset: Dataset, root_path: str) -> str:
    """Write a Dataset back to the flat-file layout it was parsed from.

    Feature rows must be one-hot (this loader only produces one-hot
    encodings); the column of the 1 is written as the node label.
    Returns the directory the files were written to.
    """
    base = os.path.join(root_path, dataset.name)
    os.makedirs(base, exist_ok=True)
    name = dataset.name

    rows_a, indicator, node_labels = [], [], []
    offset = 0
    for gid, g in enumerate(dataset.graphs, start=1):
        feats = g.features
        ones = feats == 1.0
        if not (np.all(ones.sum(axis=1) == 1) and np.all((feats == 0.0) | ones)):
            raise ValueError("features must be one-hot rows to serialize as node labels")
        for v in range(g.node_count):
            indicator.append(gid)
            node_labels.append(int(np.argmax(feats[v])))
        for u, v in g.edges:
            rows_a.append((offset + u + 1, offset + v + 1))
            rows_a.append((offset + v + 1, offset + u + 1))
        offset += g.node_count

    with open(os.path.join(base, f"{name}_A.txt"), "w", encoding="utf-8") as fh:
        for u, v in sorted(rows_a):
            fh.write(f"{u}, {v}\n")
    with open(os.path.join(base, f"{name}_graph_indicator.txt"), "w", encoding="utf-8") as fh:
        fh.writelines(f"{gid}\n" for gid in indicator)
    with open(os.path.join(base, f"{name}_node_labels.txt"), "w", encoding="utf-8") as fh:
        fh.writelines(f"{lab}\n" for lab in node_labels)
    if dataset.task == CLASSIFICATION:
        with open(os.path.join(base, f"{name}_graph_labels.txt"), "w", encoding="utf-8") as fh:
            fh.writelines(f"{int(g.target)}\n" for g in dataset.graphs)
    else:
        with open(os.path.join(base, f"{name}_graph_attributes.txt"), "w", encoding="utf-8") as fh:
            fh.writelines(f"{float(g.target)!r}\n" for g in dataset.graphs)
    return base


def load_fixed_split(root_path: str, dataset_name: str):
    """Optional fixed train/val/test split shipped beside the dataset files.

    Reads ``<name>_train_indices.txt`` / ``_val_indices.txt`` /
    ``_test_indices.txt`` (one 1-based graph index per line). Returns
    (train, val, test) as 0-based index arrays, or None when absent.
    """
    base = _resolve_dir(root_path, dataset_name)
    parts = []
    for part in ("train", "val", "test"):
        path = _optional(base, dataset_name, f"{part}_indices")
        if path is None:
            return None
        idx = _parse_lines(path, _strict_int, expect_pair=False)
        parts.append(np.asarray(idx, dtype=np.intp) - 1)
    return tuple(parts)


# ---------------------------------------------------------------------------
# synthetic data (tests, demos, scaling benchmarks)


def _random_connected_edges(n: int, rng: np.random.Generator):
    """Random tree plus ~n/2 extra chords: connected, mean degree near 3."""
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.add((u, v))
    for _ in range(n // 2):
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return tuple(edges)


def synthetic_classification_dataset(
    num_graphs: int = 60,
    num_classes: int = 2,
    num_labels: int | None = None,
    nodes: tuple[int, int] = (6, 14),
    skew: float = 6.0,
    seed: int = 0,
    name: str = "synthetic-cls",
) -> Dataset:
    """Random graphs whose node-label mixture encodes the class.

    Class k draws node labels from a distribution peaked on label k, so
    the task is solvable from egonet label histograms alone.
    """
    num_labels = num_labels or num_classes
    if num_labels < num_classes:
        raise ValueError("need at least one peaked label per class")
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(num_graphs):
        cls = i % num_classes
        n = int(rng.integers(nodes[0], nodes[1] + 1))
        weights = np.ones(num_labels)
        weights[cls] = skew
        labels = rng.choice(num_labels, size=n, p=weights / weights.sum())
        feats = np.zeros((n, num_labels))
        feats[np.arange(n), labels] = 1.0
        graphs.append(Graph(features=feats, edges=_random_connected_edges(n, rng), target=cls))
    return Dataset(
        name=name,
        graphs=tuple(graphs),
        feature_dim=num_labels,
        task=CLASSIFICATION,
        num_classes=num_classes,
    )


def synthetic_regression_dataset(
    num_graphs: int = 60,
    num_labels: int = 3,
    nodes: tuple[int, int] = (6, 14),
    seed: int = 0,
    name: str = "synthetic-reg",
) -> Dataset:
    """Random graphs whose target is the fraction of label-0 nodes."""
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(num_graphs):
        n = int(rng.integers(nodes[0], nodes[1] + 1))
        p0 = rng.uniform(0.05, 0.95)
        rest = (1.0 - p0) / (num_labels - 1)
        labels = rng.choice(num_labels, size=n, p=[p0] + [rest] * (num_labels - 1))
        feats = np.zeros((n, num_labels))
        feats[np.arange(n), labels] = 1.0
        target = float(np.mean(labels == 0))
        graphs.append(Graph(features=feats, edges=_random_connected_edges(n, rng), target=target))
    return Dataset(
        name=name, graphs=tuple(graphs), feature_dim=num_labels, task=REGRESSION
    )


def circulant_graph(n: int, degree: int, feature_dim: int, rng: np.random.Generator) -> Graph:
    """Ring lattice with exact degree (chords to degree/2 neighbours each side).

    Used by the scaling benchmark: every node has the same degree, so
    egonet sizes stay constant while n grows.
    """
    if degree % 2 != 0 or degree < 2:
        raise ValueError("circulant degree must be even and >= 2")
    if n <= degree:
        raise ValueError("need n > degree")
    edges = []
    for v in range(n):
        for k in range(1, degree // 2 + 1):
            edges.append((v, (v + k) % n))
    feats = rng.standard_normal((n, feature_dim))
    return Graph(features=feats, edges=tuple(edges), target=0.0)
