"""Candidate-term libraries (design matrices) and response matrices.

Column order is canonical: constant, monomials in graded-lex order,
trigonometric terms, derivative terms, monomial x derivative interactions,
covariates.  Every column carries a descriptor string that
:func:`evaluate_descriptor` can turn back into the column.
"""
import itertools
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DegenerateColumnError, MissingInputError, SchemaError, StateError

DOT = "·"
_DERIV = re.compile(r"^(?P<name>.+?)_(?P<axis>x+|t+)$")
_TRIG = re.compile(r"^(?P<fn>sin|cos)\((?:(?P<k>[^·()]+)" + DOT + r")?(?P<name>[^()]+)\)$")
_POWER = re.compile(r"^(?P<name>.+)\^(?P<p>\d+)$")


@dataclass(frozen=True)
class LibrarySpec:
    """Which candidate terms to put in the library.

    Parameters
    ----------
    poly_degree : int
        All monomials in the components up to this total degree (the
        constant is controlled separately).
    include_trig : tuple of float
        Frequencies ``k``; adds ``sin(k·u)`` and ``cos(k·u)`` per component.
    derivative_terms : tuple of str
        Derivative descriptors such as ``"u1_x"`` or ``"u1_xx"``.
    interaction_with_derivatives : bool or tuple of str
        ``True`` multiplies every non-constant monomial with every
        derivative term; a tuple restricts the products to those derivative
        descriptors.
    include_covariates, include_constant : bool
    """

    poly_degree: int = 2
    include_trig: tuple = ()
    derivative_terms: tuple = ()
    interaction_with_derivatives: object = False
    include_covariates: bool = False
    include_constant: bool = True

    def __post_init__(self):
        object.__setattr__(self, "include_trig", tuple(float(k) for k in self.include_trig))
        object.__setattr__(self, "derivative_terms", tuple(self.derivative_terms))
        inter = self.interaction_with_derivatives
        if not isinstance(inter, bool):
            inter = tuple(inter)
            missing = set(inter) - set(self.derivative_terms)
            if missing:
                raise ConfigError(f"interaction terms {sorted(missing)} not in derivative_terms")
            object.__setattr__(self, "interaction_with_derivatives", inter)
        if self.poly_degree < 0:
            raise ConfigError("poly_degree must be >= 0")
        if not (self.include_constant or self.poly_degree > 0 or self.include_trig
                or self.derivative_terms or self.include_covariates):
            raise ConfigError("library spec enables no terms")

    def interaction_terms(self):
        inter = self.interaction_with_derivatives
        if inter is True:
            return self.derivative_terms
        if inter is False:
            return ()
        return inter

    def to_dict(self):
        inter = self.interaction_with_derivatives
        return {
            "poly_degree": self.poly_degree,
            "include_trig": list(self.include_trig),
            "derivative_terms": list(self.derivative_terms),
            "interaction_with_derivatives": inter if isinstance(inter, bool) else list(inter),
            "include_covariates": self.include_covariates,
            "include_constant": self.include_constant,
        }

    @classmethod
    def from_dict(cls, d):
        known = set(cls().to_dict())
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown library keys {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Evaluated library ``F`` of shape ``(rows, D)``."""

    matrix: np.ndarray
    descriptors: tuple
    column_norms: np.ndarray = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[1] != len(self.descriptors):
            raise SchemaError("matrix columns do not match descriptors")
        if len(set(self.descriptors)) != len(self.descriptors):
            raise SchemaError("library descriptors must be unique")
        if not np.all(np.isfinite(m)):
            raise SchemaError("library contains non-finite entries")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "descriptors", tuple(self.descriptors))

    @property
    def shape(self):
        return self.matrix.shape

    def select(self, descriptors):
        """Sub-library with the given columns, in the given order."""
        idx = [self.descriptors.index(d) for d in descriptors]
        norms = None if self.column_norms is None else self.column_norms[idx]
        return DesignMatrix(self.matrix[:, idx], tuple(descriptors), norms)

    def rows(self, index):
        return replace(self, matrix=self.matrix[index])


@dataclass(frozen=True, eq=False)
class ResponseMatrix:
    """Response ``U_t^(J)`` of shape ``(rows, N)``."""

    matrix: np.ndarray
    order: int = 1
    descriptors: tuple = field(default=())

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim == 1:
            m = m[:, None]
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self):
        return self.matrix.shape

    def rows(self, index):
        return replace(self, matrix=self.matrix[index])


def _flat(arr):
    """(S, T, K) -> (S*T, K), space-major."""
    return arr.reshape(-1, arr.shape[-1])


def _fmt_k(k):
    return str(int(k)) if float(k).is_integer() else repr(float(k))


def monomial_exponents(n_components, degree):
    """Exponent tuples of all monomials of total degree 1..degree, graded-lex."""
    out = []
    for deg in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(n_components), deg):
            out.append(tuple(combo.count(i) for i in range(n_components)))
    return out


def monomial_name(exponents, names):
    parts = []
    for name, p in zip(names, exponents):
        if p == 1:
            parts.append(name)
        elif p > 1:
            parts.append(f"{name}^{p}")
    return DOT.join(parts)


def derivative_name(component, axis, order):
    return f"{component}_{axis * order}"


def _derivative_column(descriptor, derivs, names):
    m = _DERIV.match(descriptor)
    if not m or m.group("name") not in names:
        raise MissingInputError(f"unknown derivative term {descriptor!r}")
    order = len(m.group("axis"))
    store = derivs.spatial if m.group("axis")[0] == "x" else derivs.temporal
    if order not in store:
        raise MissingInputError(f"derivative {descriptor!r} not computed")
    return store[order][:, :, names.index(m.group("name"))]


def build_library(data, derivs, spec):
    """Evaluate the candidate library on the derivative sub-grid.

    Parameters
    ----------
    data : Dataset
    derivs : DerivativeField
        Fixes the (possibly trimmed) rows; must hold every derivative the
        spec asks for.
    spec : LibrarySpec

    Returns
    -------
    DesignMatrix
    """
    if derivs.source is not data and derivs.source != data:
        raise SchemaError("derivative field was computed from a different dataset")
    names = data.component_names
    u = derivs.state
    cols, desc = [], []

    if spec.include_constant:
        cols.append(np.ones(u.shape[:2]))
        desc.append("1")
    monomials = monomial_exponents(len(names), spec.poly_degree)
    mono_cols = []
    for exps in monomials:
        col = np.prod([u[:, :, i] ** p for i, p in enumerate(exps) if p], axis=0)
        mono_cols.append((monomial_name(exps, names), col))
    for d, c in mono_cols:
        desc.append(d)
        cols.append(c)
    for k in spec.include_trig:
        for fn, f in (("sin", np.sin), ("cos", np.cos)):
            for i, name in enumerate(names):
                arg = name if k == 1 else f"{_fmt_k(k)}{DOT}{name}"
                desc.append(f"{fn}({arg})")
                cols.append(f(k * u[:, :, i]))
    for term in spec.derivative_terms:
        desc.append(term)
        cols.append(_derivative_column(term, derivs, names))
    for d, c in mono_cols:
        for term in spec.interaction_terms():
            desc.append(f"{d}{DOT}{term}")
            cols.append(c * _derivative_column(term, derivs, names))
    if spec.include_covariates:
        w = derivs.covariates
        if w is None:
            raise MissingInputError("library asks for covariates but the dataset has none")
        for i, name in enumerate(data.covariate_names):
            desc.append(name)
            cols.append(w[:, :, i])
    if not cols:
        raise ConfigError("library is empty")
    matrix = np.stack([np.asarray(c, dtype=float).ravel() for c in cols], axis=1)
    return DesignMatrix(matrix, tuple(desc))


def build_response(derivs, order=1):
    """Flatten the order-``order`` time derivative into a response matrix."""
    if order not in derivs.temporal:
        raise MissingInputError(f"temporal derivative of order {order} not computed")
    names = derivs.source.component_names
    if order == 1:
        desc = tuple(f"d({n})/dt" for n in names)
    else:
        desc = tuple(f"d^{order}({n})/dt^{order}" for n in names)
    return ResponseMatrix(_flat(derivs.temporal[order]), order, desc)


def evaluate_descriptor(descriptor, derivs):
    """Recompute a library column from its descriptor.

    Understands products (``·``) of ``1``, components with optional
    integer powers, ``sin(k·u)``/``cos(k·u)``, derivative terms and
    covariate names.
    """
    data = derivs.source
    names = data.component_names
    u = derivs.state
    shape = u.shape[:2]

    factors, depth, start = [], 0, 0
    for i, ch in enumerate(descriptor):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == DOT and depth == 0:
            factors.append(descriptor[start:i])
            start = i + 1
    factors.append(descriptor[start:])

    out = np.ones(shape)
    for fac in factors:
        if fac == "1":
            continue
        if fac in names:
            out = out * u[:, :, names.index(fac)]
            continue
        if fac in data.covariate_names:
            out = out * derivs.covariates[:, :, data.covariate_names.index(fac)]
            continue
        m = _TRIG.match(fac)
        if m and m.group("name") in names:
            k = float(m.group("k")) if m.group("k") else 1.0
            f = np.sin if m.group("fn") == "sin" else np.cos
            out = out * f(k * u[:, :, names.index(m.group("name"))])
            continue
        m = _POWER.match(fac)
        if m and m.group("name") in names:
            out = out * u[:, :, names.index(m.group("name"))] ** int(m.group("p"))
            continue
        out = out * _derivative_column(fac, derivs, names)
    return out.ravel()


def normalize_columns(F):
    """Scale every non-constant column to unit Euclidean norm.

    The norms are recorded on the result (the constant column keeps norm 1)
    so that coefficients can be mapped back with
    :func:`denormalize_coefficients`.
    """
    norms = np.linalg.norm(F.matrix, axis=0)
    for j, d in enumerate(F.descriptors):
        if d == "1":
            norms[j] = 1.0
        elif norms[j] == 0:
            raise DegenerateColumnError(d)
    prior = np.ones_like(norms) if F.column_norms is None else F.column_norms
    return DesignMatrix(F.matrix / norms, F.descriptors, prior * norms)


def denormalize_coefficients(M, norms):
    """Map coefficients fitted on a normalized library back to raw units."""
    if norms is None:
        raise StateError("no column norms recorded; library was not normalized")
    norms = np.asarray(norms, dtype=float)
    if norms.shape != (M.values.shape[0],):
        raise SchemaError("norm vector does not match coefficient rows")
    return M.with_values(M.values / norms[:, None])
