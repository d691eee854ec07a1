"""Random tree generation and the genetic operators."""
from dataclasses import dataclass, asdict

import numpy as np

from ..errors import ConfigError
from .tree import ARITY, ExpressionTree, const, eval_tree, op, var


@dataclass(frozen=True)
class GpConfig:
    """Genetic-programming settings.

    ``tolerance``/``patience``: evolution stops once the best loss has
    improved by less than ``tolerance`` for ``patience`` consecutive
    generations.  ``hybrid`` refits the linear coefficients of every
    individual's additive terms, dropping weights with magnitude at most
    ``sparsity`` and refitting the survivors.  Selection ranks individuals by
    ``loss * (1 + parsimony * size)``.
    """

    function_set: tuple = ("+", "-", "*", "/", "sin", "cos", "exp")
    population_size: int = 300
    max_generations: int = 80
    p_crossover: float = 0.7
    p_mutation: float = 0.2
    p_reproduction: float = 0.1
    max_depth: int = 6
    max_nodes: int = 40
    tournament_size: int = 5
    snip_threshold: float = 1e-3
    snip_every: int = 5
    const_range: tuple = (-2.0, 2.0)
    p_constant: float = 0.3
    tolerance: float = 1e-12
    patience: int = 15
    parsimony: float = 0.01
    hybrid: bool = True
    sparsity: float = 1e-3
    fitness: str = "mse"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "function_set", tuple(self.function_set))
        object.__setattr__(self, "const_range", tuple(float(c) for c in self.const_range))
        if not self.function_set or any(f not in ARITY for f in self.function_set):
            raise ConfigError(f"invalid function set {self.function_set}")
        probs = (self.p_crossover, self.p_mutation, self.p_reproduction)
        if min(probs) < 0 or abs(sum(probs) - 1) > 1e-9:
            raise ConfigError("operator probabilities must be non-negative and sum to 1")
        if self.population_size < 10:
            raise ConfigError("population_size must be >= 10")
        if self.max_generations < 0 or self.max_depth < 1 or self.max_nodes < 1:
            raise ConfigError("max_generations >= 0, max_depth >= 1, max_nodes >= 1 required")
        if self.tournament_size < 1 or self.patience < 1 or self.snip_every < 0:
            raise ConfigError("tournament_size and patience must be >= 1, snip_every >= 0")
        if self.parsimony < 0:
            raise ConfigError("parsimony must be non-negative")
        if self.fitness not in ("mse", "pairwise_log"):
            raise ConfigError(f"unknown fitness {self.fitness!r}")
        if not 0 <= self.p_constant <= 1 or self.const_range[0] > self.const_range[1]:
            raise ConfigError("invalid constant settings")

    def to_dict(self):
        d = asdict(self)
        d["function_set"] = list(self.function_set)
        d["const_range"] = list(self.const_range)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown symbolic keys {sorted(unknown)}")
        return cls(**d)


def _terminal(cfg, rng, n_vars):
    if rng.random() < cfg.p_constant:
        return const(rng.uniform(*cfg.const_range))
    return var(rng.integers(n_vars))


def _build(cfg, rng, n_vars, depth, full):
    """Prefix node list of a random tree of at most ``depth`` levels."""
    funcs = cfg.function_set
    if depth <= 1:
        return [_terminal(cfg, rng, n_vars)]
    if not full:
        n_term = n_vars + (1 if cfg.p_constant > 0 else 0)
        if rng.random() < n_term / (n_term + len(funcs)):
            return [_terminal(cfg, rng, n_vars)]
    name = funcs[rng.integers(len(funcs))]
    nodes = [op(name)]
    for _ in range(ARITY[name]):
        nodes.extend(_build(cfg, rng, n_vars, depth - 1, full))
    return nodes


def random_tree(cfg, rng, var_names=("x",), depth=None, full=None):
    """Random tree by the grow or full method.

    Without ``depth``/``full`` a depth is drawn from ``2..max_depth`` and
    the method from {grow, full}; trees over the node budget are redrawn
    one level shallower.  ``max_depth == 1`` always yields one terminal.
    """
    n_vars = len(var_names)
    if depth is None:
        lo = min(2, cfg.max_depth)
        depth = int(rng.integers(lo, cfg.max_depth + 1))
    if full is None:
        full = bool(rng.random() < 0.5)
    depth = min(depth, cfg.max_depth)
    while True:
        nodes = _build(cfg, rng, n_vars, depth, full)
        if len(nodes) <= cfg.max_nodes:
            return ExpressionTree(tuple(nodes), var_names)
        depth -= 1


def ramped_population(cfg, rng, var_names, size=None):
    """Ramped half-and-half: depths cycle through ``2..max_depth``,
    alternating full and grow."""
    size = cfg.population_size if size is None else size
    lo = min(2, cfg.max_depth)
    depths = list(range(lo, cfg.max_depth + 1))
    return [random_tree(cfg, rng, var_names, depth=depths[(i // 2) % len(depths)],
                        full=bool(i % 2)) for i in range(size)]


def crossover(a, b, rng, cfg=None):
    """Swap uniformly chosen subtrees of ``a`` and ``b``.

    Returns ``(child_a, child_b, rejected)``.  If either child would break
    ``cfg.max_depth``/``cfg.max_nodes`` the parents come back unchanged
    with ``rejected`` set.
    """
    i = int(rng.integers(a.size))
    j = int(rng.integers(b.size))
    sub_a = a.nodes[i:a.subtree_end(i)]
    sub_b = b.nodes[j:b.subtree_end(j)]
    child_a = a.replace(i, sub_b)
    child_b = b.replace(j, sub_a)
    if cfg is not None and not (child_a.is_valid(cfg.max_depth, cfg.max_nodes)
                                and child_b.is_valid(cfg.max_depth, cfg.max_nodes)):
        return a, b, True
    return child_a, child_b, False


def mutate(tree, cfg, rng):
    """Point mutation of one uniformly chosen node.

    Operators become another operator of the same arity; terminals become
    a variable or a fresh constant.  ``cfg.p_mutation == 0`` disables it.
    """
    if cfg.p_mutation == 0:
        return tree
    i = int(rng.integers(tree.size))
    node = tree.nodes[i]
    if node.kind == "op":
        same = [f for f in cfg.function_set if ARITY[f] == node.arity and f != node.value]
        if not same:
            return tree
        new = op(same[rng.integers(len(same))])
    else:
        new = _terminal(cfg, rng, len(tree.var_names))
    return ExpressionTree(tree.nodes[:i] + (new,) + tree.nodes[i + 1:], tree.var_names)


def coefficient_of_variation(values):
    sd = float(np.std(values))
    if sd == 0:
        return 0.0
    mean = float(np.mean(values))
    return sd / abs(mean) if mean != 0 else np.inf


def snip(tree, X, threshold):
    """Replace near-constant subtrees by their batch mean.

    Scanning in prefix order, any operator subtree whose output over the
    batch ``X`` has coefficient of variation below ``threshold`` is
    replaced by one constant node (outermost subtrees first).
    """
    out, i = [], 0
    nodes = tree.nodes
    while i < len(nodes):
        node = nodes[i]
        if node.kind == "op":
            end = tree.subtree_end(i)
            values = eval_tree(ExpressionTree(nodes[i:end], tree.var_names), X)
            if coefficient_of_variation(values) < threshold:
                out.append(const(float(np.mean(values))))
                i = end
                continue
        out.append(node)
        i += 1
    if len(out) == len(nodes):
        return tree
    return ExpressionTree(tuple(out), tree.var_names)
