"""Fitness functions and linear coefficient fitting for expression trees."""
import numpy as np

from ..errors import UndefinedFitnessError
from .tree import ExpressionTree, const, differentiate_tree, eval_tree, from_nested, op, to_nested


def fitness_mse(tree, X, target):
    """Mean squared error against a precomputed target; ``inf`` if not finite."""
    pred = eval_tree(tree, X)
    with np.errstate(all="ignore"):
        err = float(np.mean((pred - np.asarray(target, dtype=float).ravel()) ** 2))
    return err if np.isfinite(err) else np.inf


def fitness_pairwise_log(tree, X, derivs, min_rate=1e-8, return_skipped=False):
    """Mean log error between numeric and symbolic derivative ratios.

    For two variables ``(x, y)`` with time derivatives ``derivs[:, 0]`` and
    ``derivs[:, 1]``, the numeric ratio is ``(dx/dt) / (dy/dt)`` and the
    symbolic one is ``-(df/dy) / (df/dx)`` for the candidate invariant
    ``f(x, y)``.  The score is ``-mean(log(1 + |numeric - symbolic|))``, so
    0 is a perfect match and larger errors are more negative.

    Points where ``|dy/dt| < min_rate`` or ``|df/dx| < min_rate`` are skipped;
    if every point is skipped :class:`UndefinedFitnessError` is raised.
    """
    X = np.asarray(X, dtype=float)
    derivs = np.asarray(derivs, dtype=float)
    if X.shape[1] != 2 or derivs.shape != X.shape:
        raise ValueError("pairwise fitness needs two variables and matching derivatives")
    fx = eval_tree(differentiate_tree(tree, 0), X)
    fy = eval_tree(differentiate_tree(tree, 1), X)
    dxdt, dydt = derivs[:, 0], derivs[:, 1]
    ok = (np.abs(dydt) >= min_rate) & (np.abs(fx) >= min_rate)
    skipped = int((~ok).sum())
    if not ok.any():
        raise UndefinedFitnessError("no usable points for the pairwise derivative fitness")
    numeric = dxdt[ok] / dydt[ok]
    symbolic = -fy[ok] / fx[ok]
    with np.errstate(all="ignore"):
        score = -float(np.mean(np.log1p(np.abs(numeric - symbolic))))
    if not np.isfinite(score):
        score = -np.inf
    return (score, skipped) if return_skipped else score


MAX_EXPANDED_TERMS = 16


def _expand(e):
    """Distribute products and quotients over sums; returns a term list."""
    head = e[0]
    if head in ("+", "-"):
        return _expand(e[1]) + _expand(e[2])
    if head == "*":
        left, right = _expand(e[1]), _expand(e[2])
        if len(left) * len(right) > MAX_EXPANDED_TERMS:
            return [e]
        return [("*", a, b) for a in left for b in right]
    if head == "/":
        return [("/", a, e[2]) for a in _expand(e[1])]
    return [e]


def _canonical_term(e):
    """Drop constant factors and sort the remaining factors of a product."""
    factors = []

    def collect(x):
        if x[0] == "*":
            collect(x[1])
            collect(x[2])
        elif x[0] != "const":
            factors.append(x)

    collect(e)
    if not factors:
        return ("const", 1.0)
    factors.sort(key=repr)
    out = factors[0]
    for f in factors[1:]:
        out = ("*", out, f)
    return out


def split_additive(tree):
    """Additive terms of ``tree`` with their scale factors removed.

    Products and quotients are distributed over sums (up to 16 terms),
    constant factors dropped and product factors put in a canonical order,
    so ``2*(x + x*x)`` gives the terms ``x`` and ``(x * x)``.  Signs and
    scales are left to the coefficients.
    """
    terms = _expand(to_nested(tree))
    if len(terms) > MAX_EXPANDED_TERMS:
        terms = terms[:0] or [to_nested(tree)]
    unique = []
    for t in map(_canonical_term, terms):
        if t not in unique:
            unique.append(t)
    return [from_nested(t, tree.var_names) for t in unique]


def fit_linear_coefficients(terms, X, target, sparsity=0.0):
    """Least-squares weights of the term columns against ``target``.

    Rank deficiency gives the minimum-norm solution.  With ``sparsity > 0``
    weights with ``|c| <= sparsity`` are dropped and the survivors refit
    without penalty, repeated until the kept set stops changing.
    """
    if isinstance(terms, ExpressionTree):
        terms = [terms]
    y = np.asarray(target, dtype=float).ravel()
    A = np.column_stack([eval_tree(t, X) for t in terms])
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    if sparsity > 0:
        keep = np.ones(coef.size, bool)
        while True:
            new_keep = keep & (np.abs(coef) > sparsity)
            if np.array_equal(new_keep, keep) and not (coef[~keep] != 0).any():
                break
            keep = new_keep
            coef = np.zeros_like(coef)
            if keep.any():
                coef[keep] = np.linalg.lstsq(A[:, keep], y, rcond=None)[0]
    return coef


def assemble_linear(terms, coef, var_names):
    """Tree ``c_1 * t_1 + c_2 * t_2 + ...`` skipping zero weights."""
    nodes_terms = []
    for t, c in zip(terms, coef):
        if c == 0:
            continue
        if t.size == 1 and t.nodes[0].kind == "const":
            nodes_terms.append((const(c * t.nodes[0].value),))
        else:
            nodes_terms.append((op("*"), const(c)) + t.nodes)
    if not nodes_terms:
        return ExpressionTree((const(0.0),), var_names)
    nodes = nodes_terms[0]
    for extra in nodes_terms[1:]:
        nodes = (op("+"),) + nodes + extra
    return ExpressionTree(nodes, var_names)


def linear_refit(tree, X, target, sparsity=0.0):
    """Rewrite ``tree`` as the best linear combination of its additive terms."""
    terms = split_additive(tree)
    coef = fit_linear_coefficients(terms, X, target, sparsity)
    if not np.all(np.isfinite(coef)):
        return tree
    return assemble_linear(terms, coef, tree.var_names)
