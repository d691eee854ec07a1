"""How sure are we about each term?

Noisy Lorenz data is fitted by a bootstrap ensemble of thresholded
regressions, and a small synthetic problem is analysed with the
spike-and-slab Gibbs sampler next to its exact enumeration.
"""
import numpy as np

from dediscover import (DiffConfig, LibrarySpec, SimSpec, SolverConfig, SsvsConfig,
                        bootstrap_ensemble, build_library, build_response, differentiate_dataset,
                        enumerate_model_posterior, simulate, ssvs_gibbs)

spec = SimSpec("lorenz63", dt=1e-3, n_steps=10_000, noise_level=0.01, seed=0)
data = simulate(spec)
derivs = differentiate_dataset(data, DiffConfig("smoothed_poly", 51, 3, "trim"))
F = build_library(data, derivs, LibrarySpec(poly_degree=2))
U = build_response(derivs)
E = bootstrap_ensemble(F, U, SolverConfig(kappa=0.25, lam=0.0), q=100, seed=0)

print("bootstrap inclusion probabilities (rows = terms, columns = equations)")
print(f"{'':>8}" + "".join(f"{d:>12}" for d in U.descriptors))
for d, row in zip(F.descriptors, E.inclusion_probability):
    print(f"{d:>8}" + "".join(f"{p:>12.2f}" for p in row))

rng = np.random.default_rng(1)
X = rng.standard_normal((40, 8))
X /= np.linalg.norm(X, axis=0)
y = X @ np.array([3.0, 0, -2.0, 0, 0, 0.6, 0, 0.35]) + 0.3 * rng.standard_normal(40)
cfg = SsvsConfig(n_samples=20_000, n_burnin=2_000, spike_var=0.01, slab_var=10, seed=3)
post = ssvs_gibbs(X, y, cfg)
exact = enumerate_model_posterior(X, y, cfg)
print("\nspike-and-slab inclusion: Gibbs vs exact enumeration")
for j, (g, e, se) in enumerate(zip(post.inclusion_probability, exact, post.inclusion_se)):
    print(f"  term {j}: {g:.3f} +/- {se:.3f}   exact {e:.3f}")
