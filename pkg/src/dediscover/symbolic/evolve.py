"""Generational genetic-programming loop."""
from dataclasses import dataclass, field

import numpy as np

from ..errors import UndefinedFitnessError
from .fitness import fitness_mse, fitness_pairwise_log, linear_refit
from .operators import crossover, mutate, ramped_population, snip
from .tree import simplify


@dataclass
class GpResult:
    """Outcome of :func:`evolve`.

    ``trace`` holds the best-so-far selection score per generation: the
    loss times ``1 + parsimony * size`` (lower is better; for the pairwise
    fitness the loss is the negated score).  ``best_loss`` is the raw loss
    of the best individual.
    """

    best: object
    best_loss: float
    trace: list
    generations: int
    population_scores: list = field(default_factory=list)
    config: object = None

    @property
    def best_infix(self):
        return simplify(self.best).infix()

    @property
    def best_fitness(self):
        return -self.best_loss if self.config is not None and self.config.fitness == "pairwise_log" \
            else self.best_loss


def _loss_function(cfg, X, target):
    if cfg.fitness == "mse":
        return lambda tree: fitness_mse(tree, X, target)

    def pairwise(tree):
        try:
            return -fitness_pairwise_log(tree, X, target)
        except UndefinedFitnessError:
            return np.inf
    return pairwise


def _tournament(scores, cfg, rng):
    idx = rng.integers(len(scores), size=cfg.tournament_size)
    return int(idx[np.argmin(np.asarray(scores)[idx])])


def evolve(X, target, cfg, var_names=None, initial_population=None):
    """Evolve expression trees against ``target``.

    Parameters
    ----------
    X : array_like, shape (n, n_vars)
        Variable values at the sample points.
    target : array_like
        ``mse`` fitness: the precomputed derivative column.
        ``pairwise_log`` fitness: the ``(n, 2)`` time derivatives of the two
        variables.
    cfg : GpConfig
    var_names : sequence of str, optional
    initial_population : list of ExpressionTree, optional
        Replaces the ramped half-and-half start.

    Returns
    -------
    GpResult
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    var_names = tuple(var_names or [f"u{i + 1}" for i in range(X.shape[1])])
    rng = np.random.default_rng(cfg.seed)
    loss_of = _loss_function(cfg, X, target)
    hybrid = cfg.hybrid and cfg.fitness == "mse"
    cache = {}

    def prepare(tree):
        if hybrid:
            fitted = linear_refit(tree, X, target, cfg.sparsity)
            if fitted.is_valid(cfg.max_depth, cfg.max_nodes):
                tree = fitted
        key = tree.nodes
        if key not in cache:
            cache[key] = loss_of(tree)
        return tree, cache[key] * (1 + cfg.parsimony * tree.size)

    if initial_population is None:
        population = ramped_population(cfg, rng, var_names)
    else:
        population = list(initial_population)
    evaluated = [prepare(t) for t in population]
    population = [t for t, _ in evaluated]
    scores = [l for _, l in evaluated]

    best_i = int(np.argmin(scores))
    best, best_score = population[best_i], scores[best_i]
    trace = [best_score]
    stall = 0
    gen = 0
    while gen < cfg.max_generations and stall < cfg.patience:
        gen += 1
        new = [best]
        while len(new) < cfg.population_size:
            r = rng.random()
            if r < cfg.p_crossover:
                a = population[_tournament(scores, cfg, rng)]
                b = population[_tournament(scores, cfg, rng)]
                c1, c2, _ = crossover(a, b, rng, cfg)
                new.append(c1)
                if len(new) < cfg.population_size:
                    new.append(c2)
            elif r < cfg.p_crossover + cfg.p_mutation:
                new.append(mutate(population[_tournament(scores, cfg, rng)], cfg, rng))
            else:
                new.append(population[_tournament(scores, cfg, rng)])
        if cfg.snip_every and gen % cfg.snip_every == 0:
            new = [new[0]] + [snip(t, X, cfg.snip_threshold) for t in new[1:]]
        evaluated = [prepare(t) for t in new]
        population = [t for t, _ in evaluated]
        scores = [l for _, l in evaluated]

        i = int(np.argmin(scores))
        improvement = best_score - scores[i]
        if scores[i] < best_score:
            best, best_score = population[i], scores[i]
        stall = stall + 1 if not improvement > cfg.tolerance else 0
        trace.append(best_score)
    return GpResult(best, float(cache[best.nodes]), trace, gen, list(map(float, scores)), cfg)
