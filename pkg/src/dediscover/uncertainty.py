"""Term-inclusion uncertainty.

Bootstrap ensembles of STRidge fits (row or library-column resampling)
and a continuous spike-and-slab Gibbs sampler, together with an exact
enumeration of the same spike-and-slab posterior for small libraries.

The spike-and-slab model for one response column ``y`` is::

    y | m, s2      ~ N(F m, s2 I)
    m_d | g_d, s2  ~ N(0, s2 * (v1 if g_d else v0))
    g_d            ~ Bernoulli(p)
    s2             ~ InvGamma(a, b)

Coefficient variances are scaled by ``s2`` so that both ``m`` and ``s2``
integrate out in closed form for every inclusion pattern.
"""
import itertools
import math
import warnings
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, NumericError
from .solvers import CoefficientMatrix, _arrays, fit_stridge

QUANTILES = (0.05, 0.5, 0.95)
MAX_ENUMERATION_TERMS = 12


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Bootstrap ensemble summary.

    ``member_coefficients`` is ``(q, D, N)``; ``quantiles`` is
    ``(3, D, N)`` for the 5%, 50% and 95% levels over all members.
    """

    member_coefficients: np.ndarray
    inclusion_probability: np.ndarray
    aggregated: CoefficientMatrix
    quantiles: np.ndarray
    threshold: float = 0.5

    @property
    def descriptors(self):
        return self.aggregated.descriptors


def aggregate_members(members, descriptors, p0=0.5):
    """Inclusion probabilities, thresholded mean model and quantiles."""
    members = np.asarray(members, dtype=float)
    q = members.shape[0]
    included = members != 0
    inclusion = included.sum(axis=0) / q
    counts = np.maximum(included.sum(axis=0), 1)
    mean_when_included = members.sum(axis=0) / counts
    support = (inclusion >= p0) & (inclusion > 0)
    aggregated = CoefficientMatrix(np.where(support, mean_when_included, 0.0), support,
                                   descriptors, {"members": q, "threshold": p0})
    quantiles = np.quantile(members, QUANTILES, axis=0)
    return inclusion, aggregated, quantiles


def bootstrap_ensemble(F, U, cfg, q=100, mode="rows", column_keep=1.0, seed=0, p0=0.5):
    """Fit STRidge on ``q`` resampled problems and aggregate.

    Parameters
    ----------
    F, U : DesignMatrix / ResponseMatrix or arrays
    cfg : SolverConfig
        ``kappa`` and ``lam`` are held fixed across members.
    q : int
    mode : {"rows", "columns"}
        ``rows`` draws rows with replacement (same count as the data);
        ``columns`` keeps ``ceil(column_keep * D)`` library columns drawn
        without replacement.  A term left out of a member counts as not
        included for that member.
    seed : int
        Member streams are spawned from this seed, so the result does not
        depend on the order members are fitted in.
    p0 : float
        Minimum inclusion probability of the aggregated model.
    """
    if q < 1:
        raise ConfigError("q must be >= 1")
    if mode not in ("rows", "columns"):
        raise ConfigError(f"unknown bootstrap mode {mode!r}")
    Fm, Um, desc = _arrays(F, U)
    n, D = Fm.shape
    keep = math.ceil(column_keep * D)
    if mode == "columns" and not (0 < column_keep <= 1 and keep >= 1):
        raise ConfigError("column_keep must be in (0, 1] and keep at least one column")

    members = np.zeros((q,) + (D, Um.shape[1]))
    streams = np.random.SeedSequence(seed).spawn(q)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i, ss in enumerate(streams):
            rng = np.random.default_rng(ss)
            if mode == "rows":
                rows = rng.integers(0, n, size=n)
                members[i] = fit_stridge(Fm[rows], Um[rows], cfg).values
            else:
                cols = np.sort(rng.choice(D, size=keep, replace=False))
                members[i, cols] = fit_stridge(Fm[:, cols], Um, cfg).values
    inclusion, aggregated, quantiles = aggregate_members(members, desc, p0)
    return EnsembleResult(members, inclusion, aggregated, quantiles, p0)


@dataclass(frozen=True)
class SsvsConfig:
    """Spike-and-slab Gibbs settings (see module docstring for the model)."""

    n_samples: int = 5000
    n_burnin: int = 1000
    spike_var: float = 1e-4
    slab_var: float = 10.0
    prior_inclusion: float = 0.5
    noise_shape: float = 1.0
    noise_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1 or self.n_burnin < 0:
            raise ConfigError("n_samples must be positive and n_burnin non-negative")
        if not 0 < self.spike_var <= self.slab_var:
            raise ConfigError("need 0 < spike_var <= slab_var")
        if not 0 < self.prior_inclusion < 1:
            raise ConfigError("prior_inclusion must be in (0, 1)")
        if self.noise_shape <= 0 or self.noise_scale <= 0:
            raise ConfigError("inverse-gamma shape and scale must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown ssvs keys {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class PosteriorResult:
    """Retained Gibbs draws for one response column."""

    coefficients: np.ndarray
    inclusion: np.ndarray
    sigma2: np.ndarray
    descriptors: tuple

    @property
    def inclusion_probability(self):
        return self.inclusion.mean(axis=0)

    @property
    def inclusion_se(self):
        """Monte-Carlo standard error of the inclusion probabilities.

        Batch means over 50 contiguous batches, so chain autocorrelation is
        accounted for.  Falls back to the i.i.d. formula for short chains.
        """
        g = self.inclusion.astype(float)
        n = g.shape[0]
        n_batches = 50
        if n < 2 * n_batches:
            p = g.mean(axis=0)
            return np.sqrt(p * (1 - p) / n)
        size = n // n_batches
        means = g[:size * n_batches].reshape(n_batches, size, -1).mean(axis=1)
        return means.std(axis=0, ddof=1) / np.sqrt(n_batches)

    def conditional_mean(self):
        """Posterior mean of each coefficient given inclusion (NaN if never)."""
        g = self.inclusion
        with np.errstate(invalid="ignore"):
            return np.where(g.any(0), (self.coefficients * g).sum(0) / g.sum(0), np.nan)

    def conditional_sd(self):
        g = self.inclusion
        mean = self.conditional_mean()
        with np.errstate(invalid="ignore"):
            var = ((self.coefficients - mean) ** 2 * g).sum(0) / g.sum(0)
        return np.where(g.any(0), np.sqrt(var), np.nan)


def _single_column(F, y):
    Fm, Um, desc = _arrays(F, y)
    if Um.shape[1] != 1:
        raise ConfigError("spike-and-slab routines take a single response column")
    return Fm, Um[:, 0], desc


def ssvs_gibbs(F, y, cfg, init="slab"):
    """Gibbs sampler for the continuous spike-and-slab regression.

    Each sweep draws every inclusion indicator given the coefficient and
    noise variance, the coefficients from their conjugate Gaussian, and the
    noise variance from its inverse-gamma conditional.

    Parameters
    ----------
    F : DesignMatrix or array
        A column-normalised library is recommended.
    y : ResponseMatrix or array
        One response column.
    cfg : SsvsConfig
    init : {"slab", "spike"}
        Start with every indicator on (at the least-squares fit) or off (at
        zero).
    """
    Fm, y, desc = _single_column(F, y)
    n, D = Fm.shape
    rng = np.random.default_rng(cfg.seed)
    v0, v1, p = cfg.spike_var, cfg.slab_var, cfg.prior_inclusion
    a, b = cfg.noise_shape, cfg.noise_scale
    FtF, Fty = Fm.T @ Fm, Fm.T @ y
    log_prior_odds = math.log(p / (1 - p))
    half_log_ratio = 0.5 * math.log(v0 / v1)
    diff_prec = 0.5 * (1 / v0 - 1 / v1)

    if init == "slab":
        gamma = np.ones(D, bool)
        m = np.linalg.lstsq(Fm, y, rcond=None)[0]
    elif init == "spike":
        gamma = np.zeros(D, bool)
        m = np.zeros(D)
    else:
        raise ConfigError(f"unknown init {init!r}")
    resid = y - Fm @ m
    sigma2 = max(float(resid @ resid) / max(n - 1, 1), 1e-12)

    total = cfg.n_burnin + cfg.n_samples
    keep_m = np.empty((cfg.n_samples, D))
    keep_g = np.empty((cfg.n_samples, D), bool)
    keep_s = np.empty(cfg.n_samples)
    for it in range(total):
        # indicators: log odds = prior odds + log N(m;0,s2 v1) - log N(m;0,s2 v0)
        log_odds = log_prior_odds + half_log_ratio + diff_prec * m**2 / sigma2
        prob = 0.5 * (1 + np.tanh(0.5 * log_odds))
        gamma = rng.random(D) < prob

        prior_prec = np.where(gamma, 1 / v1, 1 / v0)
        A = FtF + np.diag(prior_prec)
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise NumericError(f"conditional precision not positive definite at sweep {it}; "
                               f"min diag {np.diag(A).min():.3g}") from None
        mean = np.linalg.solve(L.T, np.linalg.solve(L, Fty))
        z = rng.standard_normal(D)
        m = mean + math.sqrt(sigma2) * np.linalg.solve(L.T, z)

        resid = y - Fm @ m
        shape = a + 0.5 * (n + D)
        scale = b + 0.5 * (resid @ resid + np.sum(prior_prec * m**2))
        sigma2 = scale / rng.gamma(shape)

        j = it - cfg.n_burnin
        if j >= 0:
            keep_m[j], keep_g[j], keep_s[j] = m, gamma, sigma2
    return PosteriorResult(keep_m, keep_g, keep_s, desc)


def ssvs_components(F, U, cfg):
    """Run :func:`ssvs_gibbs` on each response column; returns a list."""
    Fm, Um, desc = _arrays(F, U)
    return [ssvs_gibbs(type(F)(Fm, desc) if hasattr(F, "descriptors") else Fm, Um[:, n], cfg)
            for n in range(Um.shape[1])]


def log_marginal_likelihood(F, y, prior_var, a, b):
    """``log p(y | prior variances)`` with ``m`` and ``s2`` integrated out."""
    n, D = F.shape
    A = F.T @ F + np.diag(1.0 / prior_var)
    L = np.linalg.cholesky(A)
    w = np.linalg.solve(L, F.T @ y)
    quad = float(y @ y - w @ w)
    logdet_A = 2 * np.sum(np.log(np.diag(L)))
    return (-0.5 * n * math.log(2 * math.pi) - 0.5 * np.sum(np.log(prior_var))
            - 0.5 * logdet_A + a * math.log(b) - (a + 0.5 * n) * math.log(b + 0.5 * quad)
            + gammaln(a + 0.5 * n) - gammaln(a))


def enumerate_model_posterior(F, y, cfg):
    """Exact posterior inclusion probabilities by summing over all ``2^D``
    indicator patterns of the spike-and-slab model (``D <= 12``)."""
    Fm, y, _ = _single_column(F, y)
    D = Fm.shape[1]
    if D > MAX_ENUMERATION_TERMS:
        raise ConfigError(f"enumeration limited to {MAX_ENUMERATION_TERMS} terms, got {D}")
    p = cfg.prior_inclusion
    patterns = np.array(list(itertools.product((0, 1), repeat=D)), dtype=bool)
    logpost = np.empty(len(patterns))
    for i, g in enumerate(patterns):
        var = np.where(g, cfg.slab_var, cfg.spike_var)
        k = int(g.sum())
        logpost[i] = (log_marginal_likelihood(Fm, y, var, cfg.noise_shape, cfg.noise_scale)
                      + k * math.log(p) + (D - k) * math.log(1 - p))
    w = np.exp(logpost - logpost.max())
    w /= w.sum()
    return w @ patterns
