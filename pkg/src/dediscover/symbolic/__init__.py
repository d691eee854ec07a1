"""Genetic-programming symbolic regression over expression trees."""
from .evolve import GpResult, evolve
from .fitness import (assemble_linear, fit_linear_coefficients, fitness_mse,
                      fitness_pairwise_log, linear_refit, split_additive)
from .operators import GpConfig, crossover, mutate, ramped_population, random_tree, snip
from .tree import (ExpressionTree, Node, const, differentiate_tree, eval_tree, op,
                   simplify, var)

__all__ = [
    "ExpressionTree", "Node", "const", "op", "var", "eval_tree", "differentiate_tree",
    "simplify", "GpConfig", "random_tree", "ramped_population", "crossover", "mutate",
    "snip", "fitness_mse", "fitness_pairwise_log", "fit_linear_coefficients",
    "split_additive", "assemble_linear", "linear_refit", "evolve", "GpResult",
]
