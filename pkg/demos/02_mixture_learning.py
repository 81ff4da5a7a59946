#!/usr/bin/env python3
"""Learning a mixture of generalized Gaussians with the EM/fixed-point solver.

Generates a two-component synthetic mixture with different tail
behaviors, fits it, and prints the negative-log-likelihood trace plus
the recovered parameters next to the truth.
"""

import numpy as np

from ggmm_sr import EmConfig, GgdParams, fit

TRUE = [
    dict(mu=[-5.0, 0.0], beta=0.6, weight=0.4),
    dict(mu=[5.0, 0.0], beta=1.8, weight=0.6),
]

components = [GgdParams(t["mu"], np.eye(2), t["beta"]) for t in TRUE]
rng_seeds = (101, 102)
data = np.vstack(
    [
        c.sample(int(6000 * t["weight"]), seed)
        for c, t, seed in zip(components, TRUE, rng_seeds)
    ]
)
print(f"fitting K = 2 on {len(data)} samples in dimension 2 ...")

model, report = fit(data, EmConfig(K=2, seed=1))

print(f"\nNLL trace ({report.n_outer_iters} outer iterations, "
      f"converged = {report.converged}):")
trace = report.nll_trace
step = max(1, len(trace) // 8)
for i in range(0, len(trace), step):
    print(f"  iter {i:3d}: {trace[i]:.6f}")
print(f"  iter {len(trace) - 1:3d}: {trace[-1]:.6f}")

order = np.argsort([c.mu[0] for c in model.components])
print("\nrecovered vs true:")
for rank, k in enumerate(order):
    comp = model.components[k]
    t = TRUE[rank]
    print(
        f"  component {rank}: weight {model.weights[k]:.3f} (true {t['weight']}), "
        f"mu {np.round(comp.mu, 2)} (true {t['mu']}), "
        f"beta {comp.beta:.2f} (true {t['beta']})"
    )

print("\nThe shape parameters separate the heavy-tailed cluster (beta < 1)")
print("from the light-tailed one (beta > 1), which a plain Gaussian mixture")
print("cannot express.")
