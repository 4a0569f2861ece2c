"""Empirical check of the layer's linear runtime in the node count.

Times forward+backward on constant-degree ring lattices as n doubles;
the log-log slope should sit near 1. Doubling the dictionary size at
fixed n should roughly double the time as well.
"""

import egohist as eh

result = eh.run_scaling(
    node_counts=[256, 512, 1024, 2048, 4096],
    degree=4, feature_dim=16, masks=8, dict_size=16,
    repeats=9, seed=0, dict_sizes=[8, 16, 32],
)

print(f"{'nodes':>8}{'time (ms)':>12}{'ms / knode':>12}")
for n, s in zip(result.node_counts, result.seconds):
    print(f"{n:>8}{s * 1e3:>12.2f}{s * 1e6 / n:>12.2f}")
print(f"\nlog-log slope of time vs n: {result.slope:.3f}  (linear => ~1.0)")

print(f"\n{'dict size':>10}{'time (ms)':>12}")
for w, s in zip(result.dict_ladder, result.dict_seconds):
    print(f"{w:>10}{s * 1e3:>12.2f}")
print(f"log-log slope of time vs dictionary size: {result.dict_slope:.3f}")

ego = eh.extract_egonets(eh.circulant_graph(1000, 4, 2,
                                            __import__('numpy').random.default_rng(0)), 1)
print(f"\nradius-1 membership identity on a 1000-node, degree-4 ring:")
print(f"  total egonet membership {eh.total_egonet_membership(ego)} "
      f"= 2|E| + n = {2 * 2000 + 1000}")
