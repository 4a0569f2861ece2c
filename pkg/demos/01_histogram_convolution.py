"""Walk through one histogram-intersection convolution by hand.

Builds a 5-node graph with 3 node labels, then shows each stage of the
layer for a single node: cosine-softmax word assignment, the soft
histogram over the egonet, and the intersection score against a mask.
"""

import numpy as np

import egohist as eh

rng = np.random.default_rng(0)

# a path with a chord; labels one-hot encoded, d = 3
labels = [0, 1, 0, 2, 1]
features = np.zeros((5, 3))
features[np.arange(5), labels] = 1.0
graph = eh.Graph(features=features, edges=((0, 1), (1, 2), (2, 3), (3, 4), (1, 3)),
                 target=0)
egonets = eh.extract_egonets(graph, 1)

print("graph edges:", graph.edges)
print("node labels:", labels)
for v in range(5):
    print(f"egonet of node {v}: {list(egonets.members[v])}")

layer = eh.HistogramLayer(in_dim=3, num_masks=2, dict_size=4, rng=rng, hist_scale=3.0)
t = float(layer.temperature)
v = 1  # the hub node

print(f"\n-- mask 0, centered on node {v} (egonet {list(egonets.members[v])}) --")
print("dictionary rows (unit-normalized):")
print(np.round(eh.unit_rows(layer.dicts[0])[0], 3))

print("\nper-node soft word assignments (softmax of cosine similarities):")
for u in egonets.members[v]:
    s = eh.normalized_similarity(graph.features[u], layer.dicts[0], t)
    print(f"  node {u} (label {labels[u]}): {np.round(s, 3)}  (sums to {s.sum():.6f})")

h = eh.soft_histogram(graph.features[egonets.members[v]], layer.dicts[0], t)
print(f"\nsoft histogram of the egonet: {np.round(h, 3)}")
print(f"total mass = {h.sum():.6f} = egonet size {len(egonets.members[v])}")

f = layer.hists[0]
print(f"\nlearned histogram:       {np.round(f, 3)}")
print(f"intersection kernel K = {eh.histogram_intersection(h, f):.4f}")
print(f"(equals sum of minima:  {np.minimum(h, f).sum():.4f} for nonnegative inputs)")

out, _ = eh.layer_forward(graph.features, egonets, layer)
print(f"\nfull layer output (n x M):\n{np.round(out, 4)}")
print("row", v, "column 0 matches the hand computation above:",
      np.isclose(out[v, 0], eh.histogram_intersection(h, f)))
