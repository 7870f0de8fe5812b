# JSON Schemas for config validation and the JSON artifacts written by a run

import jsonschema

from .errors import FormatError

STAGES = ["baseline", "fully_supervised", "lp_ssl", "full"]

UNIT_INTERVAL = {"type": "number", "minimum": 0, "maximum": 1}
OPTIONAL_UNIT_INTERVAL = {"type": ["number", "null"], "minimum": 0, "maximum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "embedding_dim": {"type": "integer", "minimum": 1},
        "num_classes": {"type": "integer", "minimum": 2},
        "vocab_max_size": {"type": "integer", "minimum": 1},
        "max_len": {"type": "integer", "minimum": 1},
        "train_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "label_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "k": {"type": "integer", "minimum": 1},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": "integer", "minimum": 1},
        "hidden_dim": {"type": "integer", "minimum": 1},
        "num_hidden_layers": {"type": "integer", "minimum": 1},
        "finetune_embeddings": {"type": "boolean"},
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "batch_size": {"type": "integer", "minimum": 1},
        "epochs_m": {"type": "integer", "minimum": 1},
        "epochs_e": {"type": "integer", "minimum": 1},
        "epochs_n": {"type": "integer", "minimum": 1},
        "n_jobs": {"type": "integer"},
        "report_timing": {"type": "boolean"},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "properties": {
        "accuracy": UNIT_INTERVAL,
        "f1": UNIT_INTERVAL,
        "auc_roc": OPTIONAL_UNIT_INTERVAL,
    },
    "required": ["accuracy", "f1", "auc_roc"],
}

METRICS_SCHEMA = {
    "type": "object",
    "properties": {
        "stage": {"type": "string", "enum": STAGES},
        "accuracy": UNIT_INTERVAL,
        "f1": UNIT_INTERVAL,
        "auc_roc": OPTIONAL_UNIT_INTERVAL,
        "wall_time_s": {"type": ["number", "null"], "minimum": 0},
        "config_digest": {"type": "string", "pattern": r"^[0-9a-f]{16}$"},
        "test": REPORT_SCHEMA,
    },
    "required": ["stage", "accuracy", "f1", "auc_roc", "wall_time_s", "config_digest"],
}

PSEUDO_LABEL_SIDECAR_SCHEMA = {
    "type": "object",
    "properties": {
        "class_weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "residual": {"type": "number", "minimum": 0},
        "iterations": {"type": "integer", "minimum": 0},
        "converged": {"type": "boolean"},
        "fallback_count": {"type": "integer", "minimum": 0},
    },
    "required": ["class_weights", "residual", "iterations", "fallback_count"],
}

CONFIG_OVERRIDES_SCHEMA = {
    "type": ["object", "null"],
    "additionalProperties": {"type": ["string", "number", "boolean"]},
}

SWEEP_REQUEST_SCHEMA = {
    "type": "object",
    "properties": {
        "sweep": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "array",
                "minItems": 1,
                "items": {"type": ["string", "number", "boolean"]},
            },
        },
        "overrides": CONFIG_OVERRIDES_SCHEMA,
    },
    "required": ["sweep"],
}


def validate_json_schema(instance: dict, schema: dict, name: str = "") -> None:
    try:
        jsonschema.validate(instance=instance, schema=schema)
    except jsonschema.ValidationError as e:
        raise FormatError(f"{name} JSON Schema validation error: {e.message}")


def schema_errors(instance: dict, schema: dict) -> list[str]:
    """All violations of ``schema`` as readable strings, sorted by key."""
    validator = jsonschema.Draft7Validator(schema)
    errors = []
    for error in sorted(validator.iter_errors(instance), key=lambda e: list(e.path)):
        key = ".".join(str(p) for p in error.path) or "<root>"
        errors.append(f"{key}: {error.message}")
    return errors


__all__ = [
    "STAGES",
    "CONFIG_SCHEMA",
    "METRICS_SCHEMA",
    "PSEUDO_LABEL_SIDECAR_SCHEMA",
    "REPORT_SCHEMA",
    "CONFIG_OVERRIDES_SCHEMA",
    "SWEEP_REQUEST_SCHEMA",
    "validate_json_schema",
    "schema_errors",
]
