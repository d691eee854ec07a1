"""Discover the heat equation, then track a diffusion coefficient that jumps.

A diffusion profile is simulated with the explicit finite-difference
scheme.  Sequential thresholded ridge regression picks ``u_xx`` out of a
small PDE library.  A second simulation doubles the diffusion coefficient
halfway through, and grouped thresholding by time recovers one shared
support with a coefficient per time step.
"""
import numpy as np

from dediscover import (DiffConfig, LibrarySpec, SimSpec, SolverConfig, build_library,
                        build_response, differentiate_dataset, fit_group_stridge, fit_stridge,
                        simulate, split_groups)

dx = 1 / 101
library = LibrarySpec(poly_degree=1, derivative_terms=("u1_x", "u1_xx"),
                      interaction_with_derivatives=("u1_x",))

spec = SimSpec("diffusion_1d", {"b": 0.5}, dt=0.9 * dx**2, n_steps=499, n_space=100)
data = simulate(spec)
derivs = differentiate_dataset(data, DiffConfig("central_fd", boundary="trim"), (1,), (1, 2))
F, U = build_library(data, derivs, library), build_response(derivs)
M = fit_stridge(F, U, SolverConfig(kappa=0.1))
print("library:", ", ".join(F.descriptors))
print("constant b = 0.5 ->", M.terms())

dt = 0.4 * dx**2 / 0.6
switch = 200 * dt
spec = SimSpec("diffusion_1d", {"b": 0.3}, dt=dt, n_steps=399, n_space=100,
               b_schedule=[[switch, 0.6]])
data = simulate(spec)
# forward differences in time reproduce the explicit scheme exactly
derivs = differentiate_dataset(data, DiffConfig("forward_fd", boundary="trim"), (1,), (1, 2))
F, U = build_library(data, derivs, library), build_response(derivs)
Fg, Ug = split_groups(F, U, derivs.shape[:2], "by_time")
groups = fit_group_stridge(Fg, Ug, SolverConfig(kappa=0.1, lam=1e-5), "by_time")
j = F.descriptors.index("u1_xx")
b_t = np.array([g.values[j, 0] for g in groups])
times = data.grid.times[derivs.time_slice]
print("\nshared support:", [d for d, keep in zip(F.descriptors, groups[0].support[:, 0]) if keep])
print(f"mean b before the switch: {b_t[times < switch].mean():.4f}")
print(f"mean b after the switch:  {b_t[times >= switch].mean():.4f}")
