"""JSON Schemas (draft 2020-12) for the files written by the command line.

They are plain dictionaries so any validator can consume them; the test
suite uses ``jsonschema``.
"""

_NUM = {"type": ["number", "null"]}

_TERM = {
    "type": "object",
    "required": ["descriptor", "coefficient"],
    "properties": {"descriptor": {"type": "string"}, "coefficient": {"type": "number"},
                   "per_group": {"type": "array", "items": {"type": "number"}}},
}

_EQUATION = {
    "type": "object",
    "required": ["component", "lhs", "terms", "text", "residual_ss", "empty"],
    "properties": {
        "component": {"type": "string"},
        "lhs": {"type": "string"},
        "terms": {"type": "array", "items": _TERM},
        "text": {"type": "string"},
        "residual_ss": _NUM,
        "empty": {"type": "boolean"},
    },
}

_DIFF = {
    "type": "object",
    "required": ["method", "tags"],
    "properties": {"method": {"type": "string"},
                   "tags": {"type": "object", "additionalProperties": {"type": "string"}}},
}

_LIBRARY = {
    "type": "object",
    "required": ["descriptors"],
    "properties": {"descriptors": {"type": "array", "items": {"type": "string"}, "minItems": 1}},
}

_VERSION = {"const": 1}

DISCOVER_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "discover report",
    "type": "object",
    "required": ["schema_version", "command", "method", "hyperparameters", "differentiation",
                 "library", "equations", "diagnostics", "warnings", "config"],
    "properties": {
        "schema_version": _VERSION,
        "command": {"const": "discover"},
        "method": {"enum": ["stls", "stridge", "group_stridge", "sr3"]},
        "hyperparameters": {
            "type": "object",
            "required": ["kappa", "lambda", "nu", "max_iters", "tolerance", "sr3_penalty",
                         "normalize"],
        },
        "differentiation": _DIFF,
        "library": _LIBRARY,
        "equations": {"type": "array", "items": _EQUATION, "minItems": 1},
        "diagnostics": {
            "type": "object",
            "required": ["rows", "library_size", "iterations", "rank_deficient"],
            "properties": {"rows": {"type": "integer"}, "library_size": {"type": "integer"},
                           "iterations": {"type": "integer"},
                           "rank_deficient": {"type": "boolean"}},
        },
        "warnings": {"type": "array", "items": {"type": "string"}},
        "search": {"type": "object", "required": ["grid", "scores", "selected"]},
        "config": {"type": "object", "required": ["schema_version", "seed", "data"]},
    },
}

UQ_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "uq report",
    "type": "object",
    "required": ["schema_version", "command", "uq", "differentiation", "library", "table",
                 "aggregated", "limitations", "config"],
    "properties": {
        "schema_version": _VERSION,
        "command": {"const": "uq"},
        "uq": {"type": "object", "required": ["method", "threshold"],
               "properties": {"method": {"enum": ["bootstrap", "ssvs"]}}},
        "differentiation": _DIFF,
        "library": _LIBRARY,
        "table": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["component", "descriptor", "inclusion", "q05", "q50", "q95"],
                "properties": {
                    "component": {"type": "string"}, "descriptor": {"type": "string"},
                    "inclusion": {"type": "number", "minimum": 0, "maximum": 1},
                    "q05": {"type": "number"}, "q50": {"type": "number"},
                    "q95": {"type": "number"},
                },
            },
        },
        "aggregated": {"type": "array", "items": _EQUATION},
        "limitations": {"type": "string"},
        "config": {"type": "object"},
    },
}

SYMBOLIC_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "symbolic report",
    "type": "object",
    "required": ["schema_version", "command", "equation", "best_infix", "best_nodes",
                 "best_loss", "fitness", "fitness_trace", "generations", "seed", "gp_config",
                 "config"],
    "properties": {
        "schema_version": _VERSION,
        "command": {"const": "symbolic"},
        "equation": {"type": "string"},
        "best_infix": {"type": "string"},
        "best_nodes": {"type": "object", "required": ["var_names", "nodes"]},
        "best_loss": _NUM,
        "fitness": {"enum": ["mse", "pairwise_log"]},
        "fitness_trace": {"type": "array", "items": _NUM, "minItems": 1},
        "generations": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer"},
        "skipped_points": {"type": "integer", "minimum": 0},
        "gp_config": {"type": "object"},
        "config": {"type": "object"},
    },
}

GROUND_TRUTH = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "simulation ground truth",
    "type": "object",
    "required": ["schema_version", "system", "parameters", "noise_level", "seed"],
    "properties": {
        "schema_version": _VERSION,
        "system": {"type": "string"},
        "parameters": {"type": "object", "additionalProperties": {"type": "number"}},
        "terms": {"type": "object", "additionalProperties": {"type": "array", "items": _TERM}},
        "b_schedule": {"type": "array"},
    },
}

SCHEMAS = {"discover": DISCOVER_REPORT, "uq": UQ_REPORT, "symbolic": SYMBOLIC_REPORT,
           "ground_truth": GROUND_TRUTH}
