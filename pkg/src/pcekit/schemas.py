"""JSON schemas for the on-disk documents, and a validator that reports the failing path."""

import jsonschema

from .errors import SchemaValidationError

_number_or_null = {"type": ["number", "null"]}

BASIS = {
    "type": "object",
    "required": ["n", "p", "families", "ordering"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "p": {"type": "integer", "minimum": 0},
        "families": {"type": "array", "items": {"type": "string"}},
        "ordering": {"type": "string"},
        "indices": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
    },
}

SURROGATE = {
    "type": "object",
    "required": ["schema", "basis", "channels"],
    "properties": {
        "schema": {"const": "pcekit.surrogate/1"},
        "basis": BASIS,
        "channels": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["coefficients", "diagnostics"],
                "properties": {
                    "coefficients": {"type": "array", "items": {"type": "number"}},
                    "diagnostics": {
                        "type": "object",
                        "required": ["residual_norm", "loo", "condition", "degenerate"],
                        "properties": {
                            "residual_norm": {"type": "number"},
                            "loo": _number_or_null,
                            "condition": {"type": "number"},
                            "degenerate": {"type": "boolean"},
                        },
                    },
                },
            },
        },
        "meta": {"type": "object"},
    },
}

DISTRIBUTION = {
    "type": "object",
    "required": ["kind"],
    "oneOf": [
        {"properties": {"kind": {"const": "normal"}, "mean": {"type": "number"},
                        "std": {"type": "number", "exclusiveMinimum": 0}},
         "required": ["mean", "std"]},
        {"properties": {"kind": {"const": "uniform"}, "low": {"type": "number"}, "high": {"type": "number"}},
         "required": ["low", "high"]},
    ],
}

OUTPUT_RULE = {
    "type": "object",
    "required": ["channel", "parser"],
    "properties": {
        "channel": {"type": "string", "minLength": 1},
        "source": {"type": "string"},
        "parser": {"enum": ["csv", "regex", "json"]},
        "column": {"type": "string"},
        "time_column": {"type": "string"},
        "pattern": {"type": "string"},
        "pointer": {"type": "string"},
    },
}

SIMULATOR = {
    "type": "object",
    "required": ["command", "outputs"],
    "properties": {
        "command": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "input_template": {"type": "string"},
        "input_template_file": {"type": "string"},
        "input_filename": {"type": "string"},
        "outputs": {"type": "array", "items": OUTPUT_RULE, "minItems": 1},
        "timeout": {"type": "number", "exclusiveMinimum": 0},
    },
}

CONFIG = {
    "type": "object",
    "required": ["inputs", "order", "samples", "seed", "simulator"],
    "properties": {
        "inputs": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "distribution"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"},
                    "distribution": DISTRIBUTION,
                    "units": {"type": "string"},
                },
            },
        },
        "order": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "simulator": SIMULATOR,
        "output_dir": {"type": "string"},
        "analysis": {
            "type": "object",
            "properties": {
                "pdf_resamples": {"type": "integer", "minimum": 1000},
                "pdf_method": {"enum": ["histogram", "kernel"]},
                "pdf_step": {"type": "integer"},
                "condition_limit": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


def validate(doc, schema, source="<document>"):
    """Raise SchemaValidationError naming the JSON path of the first problem found."""
    validator = jsonschema.Draft202012Validator(schema)
    error = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if error is not None:
        path = "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in error.absolute_path)
        raise SchemaValidationError(source, path, error.message)
