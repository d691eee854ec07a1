"""Sparse regression for ``U = F M``.

Sequential thresholded least squares (STLS), its ridge variant (STRidge),
a group-thresholded STRidge for parametric equations, and the relaxed
splitting solver SR3.  Every solver works column by column on ``U`` and
returns a :class:`CoefficientMatrix`.
"""
import warnings
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .errors import ConfigError, NumericError, SchemaError


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters shared by the solvers.

    ``kappa`` is the hard threshold, ``lam`` the ridge weight (also the
    SR3 penalty weight), ``nu`` the SR3 relaxation parameter.
    """

    kappa: float = 0.1
    lam: float = 0.0
    nu: float = 1.0
    max_iters: int = 10
    tolerance: float = 1e-6
    sr3_penalty: str = "l0"
    normalize: bool = True

    def __post_init__(self):
        if self.kappa < 0 or self.lam < 0:
            raise ConfigError("kappa and lambda must be non-negative")
        if self.nu <= 0:
            raise ConfigError("nu must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.tolerance < 0:
            raise ConfigError("tolerance must be non-negative")
        if self.sr3_penalty not in ("l0", "l1"):
            raise ConfigError(f"unknown SR3 penalty {self.sr3_penalty!r}")

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown solver keys {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    """Sparse ``D x N`` coefficients with support mask and fit diagnostics."""

    values: np.ndarray
    support: np.ndarray
    descriptors: tuple
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        s = np.array(self.support, dtype=bool)
        if v.ndim == 1:
            v, s = v[:, None], s.reshape(-1, 1)
        if v.shape != s.shape:
            raise SchemaError("values and support shapes differ")
        if len(self.descriptors) != v.shape[0]:
            raise SchemaError("descriptor count does not match coefficient rows")
        v[~s] = 0.0
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "descriptors", tuple(self.descriptors))

    @property
    def shape(self):
        return self.values.shape

    def with_values(self, values):
        return replace(self, values=values)

    def terms(self, n=0):
        """``[(descriptor, coefficient), ...]`` of the active terms of column n."""
        return [(d, float(self.values[i, n])) for i, d in enumerate(self.descriptors)
                if self.support[i, n]]


def _arrays(F, U):
    Fm = np.asarray(getattr(F, "matrix", F), dtype=float)
    Um = np.asarray(getattr(U, "matrix", U), dtype=float)
    if Um.ndim == 1:
        Um = Um[:, None]
    if Fm.ndim != 2 or Fm.shape[0] != Um.shape[0]:
        raise SchemaError(f"design {Fm.shape} and response {Um.shape} are not compatible")
    if not (np.all(np.isfinite(Fm)) and np.all(np.isfinite(Um))):
        raise NumericError("non-finite values in design or response")
    desc = getattr(F, "descriptors", None) or tuple(f"f{j}" for j in range(Fm.shape[1]))
    return Fm, Um, tuple(desc)


def ridge_solve(F, y, lam):
    """Minimise ``||y - F m||^2 + lam ||m||^2`` by orthogonal factorisation.

    Returns ``(m, rank_deficient)``.  For ``lam == 0`` a rank-deficient
    ``F`` yields the minimum-norm least-squares solution.
    """
    D = F.shape[1]
    if D == 0:
        return np.zeros((0,) + y.shape[1:]), False
    if lam > 0:
        A = np.vstack([F, np.sqrt(lam) * np.eye(D)])
        b = np.concatenate([y, np.zeros((D,) + y.shape[1:])])
        m, *_ = np.linalg.lstsq(A, b, rcond=None)
        return m, False
    m, _, rank, _ = np.linalg.lstsq(F, y, rcond=None)
    return m, rank < D


def _default_init_lambda(F):
    D = F.shape[1]
    return 1e-6 * float(np.einsum("ij,ij->", F, F)) / max(D, 1)


def least_squares_ridge(F, U, lam=0.0):
    """Full-support ridge (or least-squares) fit of every response column."""
    if lam < 0:
        raise ConfigError("lambda must be non-negative")
    Fm, Um, desc = _arrays(F, U)
    M, deficient = ridge_solve(Fm, Um, lam)
    resid = np.sum((Um - Fm @ M) ** 2, axis=0)
    return CoefficientMatrix(M, np.ones(M.shape, bool), desc,
                             {"residual_ss": resid.tolist(), "iterations": 0,
                              "rank_deficient": bool(deficient)})


def _sequential_threshold(Fm, Um, kappa, refit_lam, init_lam, max_iters):
    """Shared loop of STLS/STRidge; returns values, support and diagnostics."""
    D, N = Fm.shape[1], Um.shape[1]
    M, deficient = ridge_solve(Fm, Um, init_lam)
    support = np.ones((D, N), bool)
    history = [support.copy()]
    iterations = 0
    for k in range(max_iters):
        new_support = support & (np.abs(M) >= kappa)
        if k > 0 and np.array_equal(new_support, support):
            break
        support = new_support
        M = np.zeros((D, N))
        for n in range(N):
            idx = np.flatnonzero(support[:, n])
            if idx.size:
                m, bad = ridge_solve(Fm[:, idx], Um[:, n], refit_lam)
                M[idx, n] = m
                deficient |= bad
        iterations = k + 1
        history.append(support.copy())
    resid = np.sum((Um - Fm @ M) ** 2, axis=0)
    empty = ~support.any(axis=0)
    if empty.any():
        warnings.warn("all library terms removed for at least one component", RuntimeWarning,
                      stacklevel=3)
    diag = {"residual_ss": resid.tolist(), "iterations": iterations,
            "rank_deficient": bool(deficient), "empty": empty.tolist(),
            "support_history": history}
    return M, support, diag


def fit_stls(F, U, cfg):
    """Sequential thresholded least squares.

    Ridge initialisation with a small stabilising weight, then up to
    ``cfg.max_iters`` rounds of: zero entries with ``|m| < kappa``, refit
    ordinary least squares on the surviving terms.  Stops early once the
    support is unchanged.
    """
    Fm, Um, desc = _arrays(F, U)
    M, support, diag = _sequential_threshold(Fm, Um, cfg.kappa, 0.0, _default_init_lambda(Fm),
                                             cfg.max_iters)
    return CoefficientMatrix(M, support, desc, diag)


def fit_stridge(F, U, cfg):
    """Sequential thresholded ridge regression.

    Same loop as :func:`fit_stls` with every refit penalised by
    ``cfg.lam``; the reported values are the last ridge solution.  With
    ``lam == 0`` this is exactly :func:`fit_stls`.
    """
    Fm, Um, desc = _arrays(F, U)
    init = cfg.lam if cfg.lam > 0 else _default_init_lambda(Fm)
    M, support, diag = _sequential_threshold(Fm, Um, cfg.kappa, cfg.lam, init, cfg.max_iters)
    return CoefficientMatrix(M, support, desc, diag)


def group_rows(shape, by):
    """Row indices of each group for data flattened space-major.

    ``shape`` is ``(S, T)``; ``by`` is ``"by_space"`` (one group per
    location, all times) or ``"by_time"`` (one group per time, all
    locations).
    """
    S, T = shape
    rows = np.arange(S * T).reshape(S, T)
    if by == "by_space":
        return [rows[s] for s in range(S)]
    if by == "by_time":
        return [rows[:, t] for t in range(T)]
    raise ConfigError(f"unknown grouping {by!r}")


def split_groups(F, U, shape, by):
    """Partition a design/response pair into per-group blocks."""
    idx = group_rows(shape, by)
    return [F.rows(i) for i in idx], [U.rows(i) for i in idx]


def fit_group_stridge(F_groups, U_groups, cfg, grouping="by_time"):
    """STRidge with one support shared by all groups.

    A term is removed for a component when the Euclidean norm of its
    coefficients across groups falls below ``kappa``; survivors are refit by
    ridge regression in every group separately.

    Returns
    -------
    list of CoefficientMatrix
        One per group, all with the same support.
    """
    if grouping not in ("by_space", "by_time"):
        raise ConfigError(f"unknown grouping {grouping!r}")
    if len(F_groups) != len(U_groups) or not F_groups:
        raise SchemaError("need matching, non-empty lists of group blocks")
    blocks = [_arrays(F, U) for F, U in zip(F_groups, U_groups)]
    desc = blocks[0][2]
    if any(b[2] != desc for b in blocks):
        raise SchemaError("groups have inconsistent library descriptors")
    D, N = blocks[0][0].shape[1], blocks[0][1].shape[1]
    if any(b[1].shape[1] != N for b in blocks):
        raise SchemaError("groups have inconsistent response widths")

    def init_lam(Fm):
        return cfg.lam if cfg.lam > 0 else _default_init_lambda(Fm)

    G = len(blocks)
    M = np.stack([ridge_solve(Fm, Um, init_lam(Fm))[0] for Fm, Um, _ in blocks])
    support = np.ones((D, N), bool)
    iterations = 0
    for k in range(cfg.max_iters):
        norms = np.linalg.norm(M, axis=0)
        new_support = support & (norms >= cfg.kappa)
        if k > 0 and np.array_equal(new_support, support):
            break
        support = new_support
        M = np.zeros((G, D, N))
        for g, (Fm, Um, _) in enumerate(blocks):
            for n in range(N):
                idx = np.flatnonzero(support[:, n])
                if idx.size:
                    M[g, idx, n] = ridge_solve(Fm[:, idx], Um[:, n], cfg.lam)[0]
        iterations = k + 1
    out = []
    for g, (Fm, Um, _) in enumerate(blocks):
        resid = np.sum((Um - Fm @ M[g]) ** 2, axis=0)
        out.append(CoefficientMatrix(M[g], support, desc,
                                     {"residual_ss": resid.tolist(), "iterations": iterations,
                                      "group": g, "grouping": grouping}))
    return out


def prox_l0(M, threshold):
    """Hard threshold: keep entries with ``|m| > threshold``."""
    M = np.asarray(M, dtype=float)
    return np.where(np.abs(M) > threshold, M, 0.0)


def prox_l1(M, threshold):
    """Soft threshold by ``threshold``."""
    M = np.asarray(M, dtype=float)
    return np.sign(M) * np.maximum(np.abs(M) - threshold, 0.0)


def sr3_objective(F, U, M, W, lam, nu, penalty="l0"):
    """``0.5||U - F M||^2 + lam R(W) + ||M - W||^2 / (2 nu)``."""
    R = np.count_nonzero(W) if penalty == "l0" else np.abs(W).sum()
    return (0.5 * np.sum((U - F @ M) ** 2) + lam * R
            + np.sum((M - W) ** 2) / (2 * nu))


def fit_sr3(F, U, cfg):
    """Sparse relaxed regularized regression.

    Alternates the exact ``M`` minimisation of
    ``0.5||U - F M||^2 + ||M - W||^2 / (2 nu)`` with the proximal update
    of ``W`` (hard threshold at ``sqrt(2 lam nu)`` for ``l0``, soft
    threshold by ``lam nu`` for ``l1``) until
    ``||W_k - W_{k-1}|| / nu <= tolerance`` or ``max_iters`` iterations.

    Returns
    -------
    (CoefficientMatrix, CoefficientMatrix)
        The reported model (support of ``W``, values refit by unpenalised
        least squares on that support) and the sparse auxiliary ``W``.  The
        joint objective after every iteration is in
        ``diagnostics["objective"]``.
    """
    if cfg.nu <= 0:
        raise ConfigError("nu must be positive")
    Fm, Um, desc = _arrays(F, U)
    D, N = Fm.shape[1], Um.shape[1]
    nu, lam = cfg.nu, cfg.lam
    if cfg.sr3_penalty == "l0":
        prox, thr = prox_l0, np.sqrt(2 * lam * nu)
    else:
        prox, thr = prox_l1, lam * nu

    M, _ = ridge_solve(Fm, Um, lam)
    W = M.copy()
    # M-update normal equations: (F'F + I/nu) M = F'U + W/nu
    H = Fm.T @ Fm + np.eye(D) / nu
    try:
        chol = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SR3 system not positive definite: {exc}") from None
    FtU = Fm.T @ Um

    objective = [sr3_objective(Fm, Um, M, W, lam, nu, cfg.sr3_penalty)]
    err, k = np.inf, 0
    while k < cfg.max_iters and err > cfg.tolerance:
        k += 1
        rhs = FtU + W / nu
        M = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        W_new = prox(M, thr)
        err = np.linalg.norm(W_new - W) / nu
        W = W_new
        objective.append(sr3_objective(Fm, Um, M, W, lam, nu, cfg.sr3_penalty))

    support = W != 0
    values = np.zeros((D, N))
    deficient = False
    for n in range(N):
        idx = np.flatnonzero(support[:, n])
        if idx.size:
            values[idx, n], bad = ridge_solve(Fm[:, idx], Um[:, n], 0.0)
            deficient |= bad
    resid = np.sum((Um - Fm @ values) ** 2, axis=0)
    diag = {"residual_ss": resid.tolist(), "iterations": k, "objective": objective,
            "converged": bool(err <= cfg.tolerance), "rank_deficient": bool(deficient),
            "relaxed_M": M}
    return (CoefficientMatrix(values, support, desc, diag),
            CoefficientMatrix(W, support, desc, {"iterations": k}))


SOLVERS = {"stls": fit_stls, "stridge": fit_stridge,
           "sr3": lambda F, U, cfg: fit_sr3(F, U, cfg)[0]}


def hyperparam_search(F, U, base, grid, holdout=0.2, seed=0, method="stridge"):
    """Pick ``(kappa, lam)`` from ``grid`` by hold-out validation.

    Rows are split once by a seeded permutation.  Each grid point is scored
    by the validation residual sum of squares plus
    ``1e-3 * var(U_val) * (number of active terms)``; ties go to the earlier
    grid point.  The winner is refit on all rows.

    Returns
    -------
    (SolverConfig, CoefficientMatrix)
    """
    grid = [tuple(map(float, g)) for g in grid]
    if not grid:
        raise ConfigError("hyperparameter grid is empty")
    if not 0 < holdout <= 0.5:
        raise ConfigError("holdout fraction must be in (0, 0.5]")
    if method not in SOLVERS:
        raise ConfigError(f"unknown solver {method!r}")
    solve = SOLVERS[method]
    Fm, Um, desc = _arrays(F, U)
    n = Fm.shape[0]
    perm = np.random.default_rng(seed).permutation(n)
    n_val = max(1, int(round(holdout * n)))
    val, train = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    F_tr = type(F)(Fm[train], desc) if hasattr(F, "descriptors") else Fm[train]
    eps0 = 1e-3 * float(np.var(Um[val]))

    best, best_score, scores = None, np.inf, []
    for kappa, lam in grid:
        cfg = replace(base, kappa=kappa, lam=lam)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            M = solve(F_tr, Um[train], cfg)
        score = (float(np.sum((Um[val] - Fm[val] @ M.values) ** 2))
                 + eps0 * int(M.support.sum()))
        scores.append(score)
        if score < best_score:
            best, best_score = cfg, score
    if best is None:
        raise NumericError("every grid point gave a non-finite validation score")
    fit = solve(F, U, best)
    fit.diagnostics["search_scores"] = scores
    return best, fit
