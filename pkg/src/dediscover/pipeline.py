"""End-to-end runs driven by a JSON run configuration.

The pipeline is: load or simulate data, differentiate, build the
library, then discover (sparse regression), quantify uncertainty or run
symbolic regression.  Each ``run_*`` function returns a JSON-ready report
dictionary; :mod:`dediscover.cli` handles files and exit codes.
"""
import copy
import json
import os
from dataclasses import dataclass

import numpy as np

from .data import load_csv
from .differentiation import DiffConfig, differentiate_dataset
from .errors import ConfigError, MissingInputError
from .library import (DOT, LibrarySpec, _DERIV, build_library, build_response,
                      denormalize_coefficients, normalize_columns)
from .simulate import SimSpec, simulate, true_terms
from .solvers import (CoefficientMatrix, SolverConfig, fit_group_stridge, fit_sr3, fit_stls, fit_stridge,
                      group_rows, hyperparam_search)
from .symbolic import GpConfig, evolve
from .symbolic.fitness import fitness_pairwise_log
from .uncertainty import QUANTILES, SsvsConfig, bootstrap_ensemble, ssvs_gibbs

SCHEMA_VERSION = 1
METHODS = ("stls", "stridge", "group_stridge", "sr3")
TOP_KEYS = {"schema_version", "data", "differentiation", "library", "solver", "uq",
            "symbolic", "seed", "output_dir", "response_order"}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration (see README for the JSON layout)."""

    raw: dict
    seed: int
    output_dir: str
    data_path: str
    sim: SimSpec
    layout: dict
    diff: DiffConfig
    library: LibrarySpec
    response_order: int
    method: str
    solver: SolverConfig
    grouping: str
    search: dict
    uq: dict
    symbolic: dict

    @classmethod
    def from_dict(cls, raw, base_dir=".", seed=None, output_dir=None):
        if not isinstance(raw, dict):
            raise ConfigError("run config must be a JSON object")
        unknown = set(raw) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        version = raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        resolved = copy.deepcopy(raw)
        resolved["schema_version"] = SCHEMA_VERSION
        if seed is not None:
            resolved["seed"] = int(seed)
        resolved.setdefault("seed", 0)
        if output_dir is not None:
            resolved["output_dir"] = output_dir
        resolved.setdefault("output_dir", "output")
        seed = int(resolved["seed"])

        data = resolved.get("data")
        if not isinstance(data, dict) or (("path" in data) == ("sim" in data)):
            raise ConfigError("data section needs exactly one of 'path' or 'sim'")
        unknown = set(data) - {"path", "layout", "sim"}
        if unknown:
            raise ConfigError(f"unknown data keys {sorted(unknown)}")
        if "sim" in data and "layout" in data:
            raise ConfigError("'layout' applies only to CSV input")
        data_path, sim = None, None
        if "path" in data:
            data_path = os.path.join(base_dir, data["path"])
            if not os.path.exists(data_path):
                raise ConfigError(f"data file {data_path} does not exist")
        else:
            sim_d = dict(data["sim"])
            sim_d.setdefault("seed", seed)
            sim = SimSpec.from_dict(sim_d)
            resolved["data"]["sim"] = sim.to_dict()

        diff = DiffConfig.from_dict(resolved.get("differentiation", {}))
        library = LibrarySpec.from_dict(resolved.get("library", {}))
        order = int(resolved.get("response_order", 1))
        if order < 1:
            raise ConfigError("response_order must be >= 1")
        if any(t.endswith("_" + "t" * order) for t in library.derivative_terms):
            raise ConfigError("library must not contain the response derivative itself")

        solver_d = dict(resolved.get("solver", {}))
        method = solver_d.pop("method", "stridge")
        if method not in METHODS:
            raise ConfigError(f"unknown solver method {method!r}")
        grouping = solver_d.pop("grouping", "by_time")
        search = solver_d.pop("search", None)
        solver = SolverConfig.from_dict(solver_d)
        if search is not None:
            if not isinstance(search, dict) or not search.get("grid"):
                raise ConfigError("solver.search needs a non-empty 'grid'")
        resolved["differentiation"] = diff.to_dict()
        resolved["library"] = library.to_dict()
        resolved["solver"] = {"method": method, **solver.to_dict()}
        if method == "group_stridge":
            resolved["solver"]["grouping"] = grouping
        if search is not None:
            resolved["solver"]["search"] = search
        resolved["response_order"] = order
        return cls(resolved, seed, resolved["output_dir"], data_path, sim,
                   data.get("layout"), diff, library, order, method, solver, grouping,
                   search, resolved.get("uq"), resolved.get("symbolic"))

    @classmethod
    def load(cls, path, seed=None, output_dir=None):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(raw, os.path.dirname(os.path.abspath(path)), seed, output_dir)


def load_data(cfg):
    if cfg.sim is not None:
        return simulate(cfg.sim)
    return load_csv(cfg.data_path, cfg.layout)


def _required_orders(cfg):
    temporal, spatial = {cfg.response_order}, set()
    for term in cfg.library.derivative_terms:
        m = _DERIV.match(term)
        if not m:
            raise ConfigError(f"cannot parse derivative term {term!r}")
        axis = m.group("axis")
        (spatial if axis[0] == "x" else temporal).add(len(axis))
    return temporal, spatial


def regression_problem(cfg, data=None):
    """Data -> (data, derivative field, library, response)."""
    data = load_data(cfg) if data is None else data
    temporal, spatial = _required_orders(cfg)
    derivs = differentiate_dataset(data, cfg.diff, temporal, spatial)
    F = build_library(data, derivs, cfg.library)
    U = build_response(derivs, cfg.response_order)
    return data, derivs, F, U


def format_equation(lhs, terms, digits=4):
    """``d(u1)/dt = 9.998·u2 − 9.997·u1`` style text."""
    if not terms:
        return f"{lhs} = 0"
    parts = []
    for i, (desc, coef) in enumerate(terms):
        mag = f"{abs(coef):.{digits}g}"
        body = mag if desc == "1" else f"{mag}{DOT}{desc}"
        if i == 0:
            parts.append(body if coef >= 0 else f"−{body}")
        else:
            parts.append(("+ " if coef >= 0 else "− ") + body)
    return f"{lhs} = " + " ".join(parts)


def _equations(M, U, names, extra=None):
    out = []
    empty = M.diagnostics.get("empty", [not M.support[:, n].any() for n in range(M.shape[1])])
    resid = M.diagnostics.get("residual_ss", [None] * M.shape[1])
    for n, name in enumerate(names):
        terms = M.terms(n)
        eq = {"component": name, "lhs": U.descriptors[n],
              "terms": [{"descriptor": d, "coefficient": c} for d, c in terms],
              "text": format_equation(U.descriptors[n], terms),
              "residual_ss": resid[n], "empty": bool(empty[n])}
        if extra:
            for t in eq["terms"]:
                t.update(extra(t["descriptor"], n))
        out.append(eq)
    return out


def _solve(cfg, F, U, derivs):
    """Fit the configured solver; returns (CoefficientMatrix, details)."""
    solver, details = cfg.solver, {}
    Fs = normalize_columns(F) if solver.normalize else F

    if cfg.search is not None:
        if cfg.method == "group_stridge":
            raise ConfigError("hyperparameter search is not available for group_stridge")
        best, M = hyperparam_search(Fs, U, solver, cfg.search["grid"],
                                    cfg.search.get("holdout", 0.2), cfg.seed, cfg.method)
        solver = best
        details["search"] = {"grid": [list(map(float, g)) for g in cfg.search["grid"]],
                             "scores": M.diagnostics["search_scores"],
                             "selected": {"kappa": best.kappa, "lambda": best.lam}}
    elif cfg.method == "stls":
        M = fit_stls(Fs, U, solver)
    elif cfg.method == "stridge":
        M = fit_stridge(Fs, U, solver)
    elif cfg.method == "sr3":
        M, _ = fit_sr3(Fs, U, solver)
        details["sr3_objective"] = M.diagnostics["objective"]
    else:
        idx = group_rows(derivs.shape[:2], cfg.grouping)
        groups = fit_group_stridge([Fs.rows(i) for i in idx], [U.rows(i) for i in idx],
                                   solver, cfg.grouping)
        if solver.normalize:
            groups = [denormalize_coefficients(G, Fs.column_norms) for G in groups]
        details["groups"] = groups
        stack = np.stack([G.values for G in groups])
        M = groups[0].with_values(stack.mean(axis=0))
        M.diagnostics["residual_ss"] = np.sum([G.diagnostics["residual_ss"] for G in groups],
                                              axis=0).tolist()
        return M, solver, details
    if solver.normalize:
        M = denormalize_coefficients(M, Fs.column_norms)
    return M, solver, details


def _diagnostics(M, F):
    d = M.diagnostics
    return {"rows": int(F.shape[0]), "library_size": int(F.shape[1]),
            "iterations": int(d.get("iterations", 0)),
            "rank_deficient": bool(d.get("rank_deficient", False))}


def run_discover(cfg, data=None):
    """Sparse-regression discovery report."""
    data, derivs, F, U = regression_problem(cfg, data)
    M, used, details = _solve(cfg, F, U, derivs)
    names = data.component_names
    extra = None
    if "groups" in details:
        groups = details["groups"]

        def extra(desc, n):
            i = M.descriptors.index(desc)
            return {"per_group": [float(G.values[i, n]) for G in groups]}

    equations = _equations(M, U, names, extra)
    warnings = []
    if any(eq["empty"] for eq in equations):
        warnings.append("empty_model: every term was removed for at least one component")
    if M.diagnostics.get("rank_deficient"):
        warnings.append("rank_deficient: minimum-norm solution used")
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "discover",
        "method": cfg.method,
        "hyperparameters": {"kappa": used.kappa, "lambda": used.lam, "nu": used.nu,
                            "max_iters": used.max_iters, "tolerance": used.tolerance,
                            "sr3_penalty": used.sr3_penalty, "normalize": used.normalize},
        "differentiation": {"method": cfg.diff.method, "tags": dict(derivs.methods)},
        "library": {"descriptors": list(F.descriptors)},
        "equations": equations,
        "diagnostics": _diagnostics(M, F),
        "warnings": warnings,
        "config": cfg.raw,
    }
    if "search" in details:
        report["search"] = details["search"]
    if "sr3_objective" in details:
        report["diagnostics"]["sr3_objective"] = details["sr3_objective"]
        report["diagnostics"]["sr3_estimate"] = "least-squares refit on the support of W"
    return report


def _uq_rows(names, descriptors, inclusion, quantiles):
    rows = []
    for n, name in enumerate(names):
        for d, desc in enumerate(descriptors):
            rows.append({"component": name, "descriptor": desc,
                         "inclusion": float(inclusion[d, n]),
                         "q05": float(quantiles[0][d, n]), "q50": float(quantiles[1][d, n]),
                         "q95": float(quantiles[2][d, n])})
    return rows


def run_uq(cfg, data=None):
    """Inclusion-probability report (bootstrap or spike-and-slab)."""
    if not cfg.uq:
        raise ConfigError("config has no 'uq' section")
    uq = dict(cfg.uq)
    kind = uq.pop("method", "bootstrap")
    threshold = float(uq.pop("threshold", 0.5))
    data, derivs, F, U = regression_problem(cfg, data)
    names = data.component_names
    Fs = normalize_columns(F) if cfg.solver.normalize else F
    norms = Fs.column_norms if cfg.solver.normalize else np.ones(F.shape[1])

    if kind == "bootstrap":
        unknown = set(uq) - {"q", "mode", "column_keep"}
        if unknown:
            raise ConfigError(f"unknown bootstrap keys {sorted(unknown)}")
        E = bootstrap_ensemble(Fs, U, cfg.solver, q=int(uq.get("q", 100)),
                               mode=uq.get("mode", "rows"),
                               column_keep=float(uq.get("column_keep", 1.0)),
                               seed=cfg.seed, p0=threshold)
        members = E.member_coefficients / norms[None, :, None]
        inclusion = E.inclusion_probability
        quantiles = np.quantile(members, QUANTILES, axis=0)
        aggregated = denormalize_coefficients(E.aggregated, norms)
        settings = {"method": "bootstrap", "q": int(uq.get("q", 100)),
                    "mode": uq.get("mode", "rows"),
                    "column_keep": float(uq.get("column_keep", 1.0))}
    elif kind == "ssvs":
        scfg = SsvsConfig.from_dict({**uq, "seed": cfg.seed})
        cols, qs, means = [], [], []
        for n in range(U.shape[1]):
            post = ssvs_gibbs(Fs, U.matrix[:, n], scfg)
            coefs = post.coefficients / norms
            cols.append(post.inclusion_probability)
            qs.append(np.quantile(coefs, QUANTILES, axis=0))
            means.append(np.nan_to_num(post.conditional_mean() / norms))
        inclusion = np.stack(cols, axis=1)
        quantiles = np.stack(qs, axis=2)
        support = inclusion >= threshold
        aggregated = CoefficientMatrix(np.stack(means, axis=1), support, F.descriptors)
        settings = {"method": "ssvs", **scfg.to_dict()}
    else:
        raise ConfigError(f"unknown uq method {kind!r}")

    return {
        "schema_version": SCHEMA_VERSION,
        "command": "uq",
        "uq": {**settings, "threshold": threshold},
        "differentiation": {"method": cfg.diff.method, "tags": dict(derivs.methods)},
        "library": {"descriptors": list(F.descriptors)},
        "table": _uq_rows(names, F.descriptors, inclusion, quantiles),
        "aggregated": _equations(aggregated, U, names),
        "limitations": "uncertainty is conditional on the numerically differentiated "
                       "response; derivative error is not propagated",
        "config": cfg.raw,
    }


def run_symbolic(cfg, data=None):
    """Genetic-programming report for one component (or one pair)."""
    if cfg.symbolic is None:
        raise ConfigError("config has no 'symbolic' section")
    sym = dict(cfg.symbolic)
    component = sym.pop("component", None)
    stride = int(sym.pop("subsample", 1))
    if stride < 1:
        raise ConfigError("subsample must be >= 1")
    gcfg = GpConfig.from_dict({**sym, "seed": cfg.seed})
    data = load_data(cfg) if data is None else data
    temporal, spatial = _required_orders(cfg)
    derivs = differentiate_dataset(data, cfg.diff, temporal, spatial)
    names = data.component_names
    X = derivs.state.reshape(-1, len(names))[::stride]
    dU = derivs.temporal[cfg.response_order].reshape(-1, len(names))[::stride]

    if gcfg.fitness == "pairwise_log":
        if len(names) != 2:
            raise ConfigError("pairwise fitness needs exactly two components")
        target, lhs = dU, "f(" + ", ".join(names) + ") = const"
    else:
        component = component or names[0]
        if component not in names:
            raise MissingInputError(f"unknown component {component!r}")
        target = dU[:, names.index(component)]
        lhs = build_response(derivs, cfg.response_order).descriptors[names.index(component)]
    result = evolve(X, target, gcfg, names)
    extra = {}
    if gcfg.fitness == "pairwise_log":
        _, skipped = fitness_pairwise_log(result.best, X, target, return_skipped=True)
        extra["skipped_points"] = skipped
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "symbolic",
        "equation": f"{lhs} = {result.best_infix}" if gcfg.fitness == "mse"
        else f"{result.best_infix} = const",
        "best_infix": result.best_infix,
        "best_nodes": json.loads(result.best.to_json()),
        "best_loss": result.best_loss,
        "fitness": gcfg.fitness,
        "fitness_trace": [float(v) for v in result.trace],
        "generations": result.generations,
        "component": component,
        "seed": cfg.seed,
        "gp_config": gcfg.to_dict(),
        **extra,
        "config": cfg.raw,
    }


def run_simulate(cfg):
    """Simulated dataset plus its ground-truth description."""
    if cfg.sim is None:
        raise ConfigError("simulate needs a data.sim section")
    data = simulate(cfg.sim)
    truth = {"schema_version": SCHEMA_VERSION, "system": cfg.sim.system,
             "parameters": dict(cfg.sim.parameters), "noise_level": cfg.sim.noise_level,
             "seed": cfg.sim.seed}
    if cfg.sim.b_schedule:
        truth["b_schedule"] = [list(p) for p in cfg.sim.b_schedule]
    else:
        truth["terms"] = {c: [{"descriptor": d, "coefficient": v} for d, v in terms.items()]
                          for c, terms in true_terms(cfg.sim).items()}
    return data, truth
