"""Observed-data model: grid geometry, datasets and CSV ingestion.

Values are stored as a ``(S, T, N)`` array (space, time, component).  Pure
ODE data has ``S == 1`` and no spatial coordinates.  Flattening for
regression is space-major: row ``s * T + t``.
"""
import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (DuplicateCoordinateError, GeometryError, ParseError,
                     SchemaError, DiscoveryError)

MIN_TIMES = 5
UNIFORM_RTOL = 1e-9
DIFF_METHODS = ("central_fd", "smoothed_poly", "forward_fd")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _uniform_step(coords):
    """Return the common step of ``coords`` or ``None`` if not uniform."""
    if len(coords) < 2:
        return None
    steps = np.diff(coords)
    step = (coords[-1] - coords[0]) / (len(coords) - 1)
    if np.max(np.abs(steps - step)) <= UNIFORM_RTOL * abs(step):
        return float(step)
    return None


@dataclass(frozen=True, eq=False)
class Grid:
    """Rectilinear space-time grid.

    Parameters
    ----------
    times : array_like
        Strictly increasing sample times, at least five of them.
    spatial_coords : array_like, optional
        Strictly increasing spatial coordinates.  ``None`` for ODE data.
    """

    times: np.ndarray
    spatial_coords: np.ndarray = None
    dt: float = field(init=False, default=None)
    dx: float = field(init=False, default=None)

    def __post_init__(self):
        times = _frozen(self.times).ravel()
        if times.size < MIN_TIMES:
            raise GeometryError(f"need at least {MIN_TIMES} time points, got {times.size}")
        if not np.all(np.isfinite(times)) or np.any(np.diff(times) <= 0):
            raise GeometryError("times must be finite and strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "dt", _uniform_step(times))
        if self.spatial_coords is not None:
            xs = _frozen(self.spatial_coords).ravel()
            if xs.size < 1:
                raise GeometryError("spatial_coords must be non-empty")
            if not np.all(np.isfinite(xs)) or np.any(np.diff(xs) <= 0):
                raise GeometryError("spatial_coords must be finite and strictly increasing")
            object.__setattr__(self, "spatial_coords", xs)
            object.__setattr__(self, "dx", _uniform_step(xs))

    @property
    def n_times(self):
        return self.times.size

    @property
    def n_space(self):
        return 1 if self.spatial_coords is None else self.spatial_coords.size

    @property
    def has_space(self):
        return self.spatial_coords is not None

    @property
    def uniform_time(self):
        return self.dt is not None

    @property
    def uniform_space(self):
        return self.dx is not None

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        if self.has_space != other.has_space:
            return False
        same_x = (not self.has_space
                  or np.array_equal(self.spatial_coords, other.spatial_coords))
        return np.array_equal(self.times, other.times) and same_x

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed field ``u(s, t, n)`` plus optional covariates.

    ``values`` may be given as ``(T,)`` or ``(T, N)`` for ODE data; it is
    stored as ``(S, T, N)``.
    """

    grid: Grid
    values: np.ndarray
    component_names: tuple = None
    covariates: np.ndarray = None
    covariate_names: tuple = ()

    def __post_init__(self):
        S, T = self.grid.n_space, self.grid.n_times
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[None, :, None]
        elif v.ndim == 2:
            v = v[None, :, :]
        if v.ndim != 3 or v.shape[:2] != (S, T):
            raise GeometryError(f"values shape {np.shape(self.values)} does not match grid ({S}, {T})")
        if not np.all(np.isfinite(v)):
            raise DiscoveryError("dataset values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

        names = self.component_names
        if names is None:
            names = tuple(f"u{i + 1}" for i in range(v.shape[2]))
        names = tuple(str(n) for n in names)
        if len(names) != v.shape[2]:
            raise SchemaError(f"{len(names)} component names for {v.shape[2]} components")
        if len(set(names)) != len(names):
            raise SchemaError(f"component names must be unique: {names}")
        object.__setattr__(self, "component_names", names)

        cov_names = tuple(str(n) for n in self.covariate_names)
        if self.covariates is None:
            if cov_names:
                raise SchemaError("covariate names given without covariates")
        else:
            c = np.array(self.covariates, dtype=float)
            if c.ndim == 2:
                c = c[None]
            if c.ndim != 3 or c.shape[:2] != (S, T):
                raise GeometryError("covariate array does not match grid")
            if not np.all(np.isfinite(c)):
                raise DiscoveryError("covariates must be finite")
            if not cov_names:
                cov_names = tuple(f"w{i + 1}" for i in range(c.shape[2]))
            if len(cov_names) != c.shape[2]:
                raise SchemaError("covariate names do not match covariate count")
            if set(cov_names) & set(names) or len(set(cov_names)) != len(cov_names):
                raise SchemaError("covariate names must be unique and distinct from components")
            c.setflags(write=False)
            object.__setattr__(self, "covariates", c)
        object.__setattr__(self, "covariate_names", cov_names)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_components(self):
        return self.values.shape[2]

    def component(self, name):
        return self.values[:, :, self.component_names.index(name)]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.grid != other.grid or self.component_names != other.component_names
                or self.covariate_names != other.covariate_names
                or not np.array_equal(self.values, other.values)):
            return False
        if self.covariates is None or other.covariates is None:
            return self.covariates is None and other.covariates is None
        return np.array_equal(self.covariates, other.covariates)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DerivativeField:
    """Derivative arrays computed from a dataset.

    ``temporal[j]`` and ``spatial[k]`` are ``(S', T', N)`` arrays on the
    (possibly trimmed) sub-grid selected by ``space_slice``/``time_slice``.
    ``methods`` maps keys like ``"t1"`` or ``"x2"`` to the method tag.
    """

    source: Dataset
    temporal: dict
    spatial: dict
    methods: dict
    space_slice: slice = slice(None)
    time_slice: slice = slice(None)

    def __post_init__(self):
        shape = self.state.shape
        for key, arrays in (("t", self.temporal), ("x", self.spatial)):
            for order, arr in arrays.items():
                if arr.shape != shape:
                    raise GeometryError(f"derivative {key}{order} has shape {arr.shape}, expected {shape}")
        for tag in self.methods.values():
            if tag not in DIFF_METHODS:
                raise SchemaError(f"unknown differentiation method {tag!r}")

    @property
    def state(self):
        """Source values restricted to the derivative sub-grid."""
        return self.source.values[self.space_slice, self.time_slice, :]

    @property
    def covariates(self):
        if self.source.covariates is None:
            return None
        return self.source.covariates[self.space_slice, self.time_slice, :]

    @property
    def shape(self):
        return self.state.shape

    @property
    def times(self):
        return self.source.grid.times[self.time_slice]

    @property
    def spatial_coords(self):
        xs = self.source.grid.spatial_coords
        return None if xs is None else xs[self.space_slice]


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CsvLayout:
    """Column mapping for :func:`load_csv`."""

    time: str = "t"
    space: str = None
    components: tuple = ()
    covariates: tuple = ()

    @classmethod
    def for_dataset(cls, data):
        return cls(time="t", space="x" if data.grid.has_space else None,
                   components=tuple(data.component_names),
                   covariates=tuple(data.covariate_names))


def _infer_layout(header):
    space = "x" if len(header) > 1 and header[1] == "x" else None
    start = 2 if space else 1
    return CsvLayout(time=header[0], space=space, components=tuple(header[start:]))


def _as_layout(layout, header):
    if layout is None:
        return _infer_layout(header)
    if isinstance(layout, dict):
        return CsvLayout(time=layout.get("time", "t"), space=layout.get("space"),
                         components=tuple(layout.get("components", ())),
                         covariates=tuple(layout.get("covariates", ())))
    return layout


def load_csv(path, layout=None):
    """Read a dataset from CSV.

    Parameters
    ----------
    path : str or path-like
    layout : CsvLayout or dict, optional
        Which columns hold time, space, components and covariates.  When
        omitted the header is read as ``t[,x],components...``.

    Returns
    -------
    Dataset
    """
    with open(path, newline="") as fh:
        lines = [(i, line) for i, line in enumerate(fh, start=1)
                 if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise SchemaError(f"{path}: missing header row")
    rows = list(csv.reader(line for _, line in lines))
    header = [h.strip() for h in rows[0]]
    layout = _as_layout(layout, header)
    if not layout.components:
        raise SchemaError(f"{path}: layout names no component columns")

    wanted = [layout.time] + ([layout.space] if layout.space else [])
    wanted += list(layout.components) + list(layout.covariates)
    missing = [c for c in wanted if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    col = [header.index(c) for c in wanted]

    table = np.empty((len(rows) - 1, len(col)))
    for r, (row, (lineno, _)) in enumerate(zip(rows[1:], lines[1:])):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", row=lineno)
        for j, c in enumerate(col):
            try:
                table[r, j] = float(row[c])
            except ValueError:
                raise ParseError(f"non-numeric cell {row[c]!r} in column {header[c]!r}",
                                 row=lineno) from None
    if not np.all(np.isfinite(table)):
        raise ParseError("non-finite value in data")

    t = table[:, 0]
    if layout.space:
        x = table[:, 1]
        order = np.lexsort((t, x))
        payload = table[order, 2:]
        t, x = t[order], x[order]
    else:
        order = np.argsort(t, kind="stable")
        payload = table[order, 1:]
        t, x = t[order], np.zeros_like(t)

    same = (np.diff(x) == 0) & (np.diff(t) == 0)
    if np.any(same):
        i = int(np.argmax(same))
        raise DuplicateCoordinateError(f"duplicate coordinate (x={x[i]}, t={t[i]})")

    xs = np.unique(x)
    times = t[x == xs[0]]
    S, T = xs.size, times.size
    if S * T != t.size:
        raise GeometryError("rows do not form a complete space-time grid")
    t_grid = t.reshape(S, T)
    if not np.all(t_grid == times[None, :]):
        raise GeometryError("time coordinates differ between spatial locations")

    n_comp = len(layout.components)
    block = payload.reshape(S, T, -1)
    grid = Grid(times, xs if layout.space else None)
    covs = block[:, :, n_comp:] if layout.covariates else None
    return Dataset(grid, block[:, :, :n_comp], tuple(layout.components),
                   covs, tuple(layout.covariates))


def _fmt(v):
    return format(v, ".17g")


def save_csv(data, path):
    """Write ``data`` as CSV with 17 significant digits (exact round trip).

    The file is written to a temporary sibling and renamed into place.
    """
    S, T, N = data.shape
    header = ["t"] + (["x"] if data.grid.has_space else [])
    header += list(data.component_names) + list(data.covariate_names)
    tmp = f"{os.fspath(path)}.tmp"
    try:
        with open(tmp, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for s in range(S):
                for t in range(T):
                    cells = [data.grid.times[t]]
                    if data.grid.has_space:
                        cells.append(data.grid.spatial_coords[s])
                    cells.extend(data.values[s, t])
                    if data.covariates is not None:
                        cells.extend(data.covariates[s, t])
                    fh.write(",".join(_fmt(float(c)) for c in cells) + "\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
