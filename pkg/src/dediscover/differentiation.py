"""Numerical differentiation of sampled signals.

Three 1-D routes are provided: central finite differences, forward
differences and a local least-squares polynomial (Savitzky-Golay) fit for
noisy data.  :func:`differentiate_dataset` applies them along the time and
space axes of a :class:`~dediscover.data.Dataset`.
"""
from dataclasses import dataclass, asdict

import numpy as np
from scipy.signal import savgol_filter

from .data import DerivativeField, _uniform_step
from .errors import ConfigError, GeometryError

BOUNDARIES = ("one_sided", "trim")


@dataclass(frozen=True)
class DiffConfig:
    """Differentiation settings.

    ``method`` is ``"central_fd"``, ``"smoothed_poly"`` or ``"forward_fd"``
    (first order only; second derivatives fall back to central
    differences).  ``poly_window``/``poly_degree`` only matter for
    ``smoothed_poly``.
    """

    method: str = "central_fd"
    poly_window: int = 11
    poly_degree: int = 3
    boundary: str = "one_sided"

    def __post_init__(self):
        if self.method not in ("central_fd", "smoothed_poly", "forward_fd"):
            raise ConfigError(f"unknown differentiation method {self.method!r}")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"unknown boundary policy {self.boundary!r}")
        if self.method == "smoothed_poly":
            _check_poly(self.poly_window, self.poly_degree, strict=True)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"method", "poly_window", "poly_degree", "boundary"}
        if unknown:
            raise ConfigError(f"unknown differentiation keys {sorted(unknown)}")
        return cls(**d)


def _check_poly(window, degree, strict):
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"poly_window must be odd, got {window}")
    if degree >= window:
        raise ConfigError("poly_degree must be smaller than poly_window")
    if strict and (window < 5 or not 2 <= degree <= 6):
        raise ConfigError("smoothed_poly needs window >= 5 and degree in [2, 6]")


def _resolve_step(step, n):
    """Accept a scalar step or a coordinate array; return the scalar step."""
    arr = np.asarray(step, dtype=float)
    if arr.ndim == 0:
        if not arr > 0:
            raise GeometryError("step must be positive")
        return float(arr)
    if arr.size != n:
        raise GeometryError("coordinate array length does not match series")
    h = _uniform_step(arr)
    if h is None or h <= 0:
        raise GeometryError("non-uniform grid; differentiation needs uniform spacing")
    return h


def central_difference(series, step, order=1, boundary="one_sided"):
    """Second-order central difference along the last axis.

    Parameters
    ----------
    series : array_like
        Samples; differentiation runs along the last axis.
    step : float or array_like
        Uniform spacing, or the sample coordinates (checked for uniformity).
    order : {1, 2}
    boundary : {"one_sided", "trim"}
        ``one_sided`` uses second-order one-sided stencils at the ends,
        ``trim`` drops the first and last sample.
    """
    u = np.asarray(series, dtype=float)
    n = u.shape[-1]
    if n < 3:
        raise GeometryError("central difference needs at least 3 samples")
    if order not in (1, 2):
        raise ConfigError(f"central difference supports order 1 or 2, got {order}")
    if boundary not in BOUNDARIES:
        raise ConfigError(f"unknown boundary policy {boundary!r}")
    h = _resolve_step(step, n)

    out = np.empty_like(u)
    if order == 1:
        out[..., 1:-1] = (u[..., 2:] - u[..., :-2]) / (2 * h)
        out[..., 0] = (-3 * u[..., 0] + 4 * u[..., 1] - u[..., 2]) / (2 * h)
        out[..., -1] = (3 * u[..., -1] - 4 * u[..., -2] + u[..., -3]) / (2 * h)
    else:
        out[..., 1:-1] = (u[..., 2:] - 2 * u[..., 1:-1] + u[..., :-2]) / h**2
        if n >= 4:
            out[..., 0] = (2 * u[..., 0] - 5 * u[..., 1] + 4 * u[..., 2] - u[..., 3]) / h**2
            out[..., -1] = (2 * u[..., -1] - 5 * u[..., -2] + 4 * u[..., -3] - u[..., -4]) / h**2
        else:
            out[..., 0] = out[..., 1]
            out[..., -1] = out[..., -2]
    if boundary == "trim":
        return out[..., 1:-1]
    return out


def forward_difference(series, step, boundary="one_sided"):
    """First-order forward difference ``(u[i+1] - u[i]) / h``.

    The last sample uses the backward difference (``one_sided``) or is
    dropped (``trim``).
    """
    u = np.asarray(series, dtype=float)
    n = u.shape[-1]
    if n < 2:
        raise GeometryError("forward difference needs at least 2 samples")
    if boundary not in BOUNDARIES:
        raise ConfigError(f"unknown boundary policy {boundary!r}")
    h = _resolve_step(step, n)
    d = np.diff(u, axis=-1) / h
    if boundary == "trim":
        return d
    return np.concatenate([d, d[..., -1:]], axis=-1)


def smoothed_poly_derivative(series, step, cfg=None, order=1, *, window=None, degree=None):
    """Derivative of a sliding local least-squares polynomial fit.

    Each sample gets the derivative, at that sample, of the degree-``degree``
    polynomial fitted over the centred window; near the ends the window is
    shifted inwards and the edge polynomial is evaluated off-centre.  With
    ``boundary == "trim"`` the ``window // 2`` samples at each end are
    dropped.

    ``window``/``degree`` override the config values and are not subject to
    the config's ``[2, 6]`` degree range, which allows whole-series fits.
    """
    cfg = cfg or DiffConfig(method="smoothed_poly")
    window = cfg.poly_window if window is None else window
    degree = cfg.poly_degree if degree is None else degree
    _check_poly(window, degree, strict=False)
    u = np.asarray(series, dtype=float)
    n = u.shape[-1]
    if window > n:
        raise ConfigError(f"window {window} exceeds series length {n}")
    if order < 1 or order > degree:
        raise ConfigError(f"derivative order {order} not supported by degree {degree}")
    h = _resolve_step(step, n)
    d = savgol_filter(u, window, degree, deriv=order, delta=h, axis=-1, mode="interp")
    if cfg.boundary == "trim":
        half = window // 2
        return d[..., half:n - half]
    return d


def _trim_width(cfg):
    if cfg.boundary != "trim":
        return 0
    if cfg.method == "smoothed_poly":
        return cfg.poly_window // 2
    return 1


def _derive_1d(u, h, cfg, order):
    """Untrimmed derivative along the last axis for the configured method."""
    if cfg.method == "smoothed_poly":
        return smoothed_poly_derivative(u, h, DiffConfig("smoothed_poly", cfg.poly_window,
                                                         cfg.poly_degree, "one_sided"), order)
    if cfg.method == "forward_fd" and order == 1:
        return forward_difference(u, h)
    return central_difference(u, h, order)


def _method_tag(cfg, order):
    if cfg.method == "forward_fd" and order != 1:
        return "central_fd"
    return cfg.method


def differentiate_dataset(data, cfg=None, temporal_orders=(1,), spatial_orders=()):
    """Compute temporal and spatial derivative arrays of every component.

    Parameters
    ----------
    data : Dataset
    cfg : DiffConfig, optional
    temporal_orders, spatial_orders : iterable of int

    Returns
    -------
    DerivativeField
        All arrays share one sub-grid.  Under ``trim`` the time axis loses
        the points needed by the temporal stencil (and the space axis those of
        the spatial stencil) at each end.
    """
    cfg = cfg or DiffConfig()
    temporal_orders = sorted(set(temporal_orders))
    spatial_orders = sorted(set(spatial_orders))
    grid = data.grid
    if spatial_orders and not grid.has_space:
        raise GeometryError("spatial derivatives requested for data without spatial coordinates")
    if temporal_orders and not grid.uniform_time:
        raise GeometryError("temporal differentiation needs a uniform time grid")
    if spatial_orders and not grid.uniform_space:
        raise GeometryError("spatial differentiation needs a uniform spatial grid")

    # (S, T, N): time is axis 1, space axis 0
    u = np.asarray(data.values)
    tw = _trim_width(cfg) if temporal_orders else 0
    sw = _trim_width(cfg) if spatial_orders else 0
    S, T, _ = u.shape
    if 2 * tw >= T or (sw and 2 * sw >= S):
        raise ConfigError("trimming leaves no samples")
    ts = slice(tw, T - tw)
    ss = slice(sw, S - sw)

    temporal, spatial, methods = {}, {}, {}
    for j in temporal_orders:
        d = _derive_1d(np.moveaxis(u, 1, -1), grid.dt, cfg, j)
        temporal[j] = np.ascontiguousarray(np.moveaxis(d, -1, 1)[ss, ts, :])
        methods[f"t{j}"] = _method_tag(cfg, j)
    for k in spatial_orders:
        d = _derive_1d(np.moveaxis(u, 0, -1), grid.dx, cfg, k)
        spatial[k] = np.ascontiguousarray(np.moveaxis(d, -1, 0)[ss, ts, :])
        methods[f"x{k}"] = _method_tag(cfg, k)
    return DerivativeField(data, temporal, spatial, methods, ss, ts)
