"""Genetic programming finds the cubic oscillator's right-hand side.

Trees are evolved against the numerical derivative of one component.
Each individual's additive terms are refit by least squares, so the
search only has to discover the shape ``u^3``; the coefficient follows.
"""
from dediscover import SimSpec, differentiate_dataset, simulate
from dediscover.symbolic import GpConfig, evolve

data = simulate(SimSpec("cubic_oscillator", dt=0.01, n_steps=1000))
derivs = differentiate_dataset(data)
u = data.values[0, ::5, :1]
du = derivs.temporal[1][0, ::5, 0]

for seed in range(3):
    result = evolve(u, du, GpConfig(population_size=300, max_generations=80, seed=seed), ("u1",))
    print(f"seed {seed}: d(u1)/dt = {result.best_infix}   "
          f"(mse {result.best_loss:.2e}, {result.generations} generations)")
