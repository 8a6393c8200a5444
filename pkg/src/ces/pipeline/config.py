"""Pipeline configuration: versioned JSON schema, defaults, and presets.

A configuration is a single JSON document validated before any computation;
unknown keys are rejected and every validation error names the offending
field by its JSON path. Presets for the four benchmark problems ship as
package data.
"""

import json
import os
from importlib import resources

import jsonschema

CONFIG_VERSION = 1

PRESET_NAMES = ("linear", "darcy", "lorenz63", "lorenz96", "lorenz96_smoke")


class ConfigError(Exception):
    """Invalid configuration; message names the offending field."""


_PRIOR_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["mean"],
    "properties": {
        "mean": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "cov": {"type": "array",
                "items": {"type": "array", "items": {"type": "number"}}},
        "diag": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
    },
    "oneOf": [{"required": ["cov"]}, {"required": ["diag"]}],
}

_PROBLEM_SCHEMAS = {
    "linear": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "truth"],
        "properties": {
            "kind": {"const": "linear"},
            "output_dim": {"type": "integer", "minimum": 1},
            "matrix_seed": {"type": "integer", "minimum": 0},
            "truth": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "noise_std": {"type": "number", "exclusiveMinimum": 0},
            "data_seed": {"type": "integer", "minimum": 0},
        },
    },
    "darcy": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind"],
        "properties": {
            "kind": {"const": "darcy"},
            "grid": {"type": "integer", "minimum": 4},
            "n_modes": {"type": "integer", "minimum": 1},
            "truth_modes": {"type": "integer", "minimum": 1},
            "noise_std": {"type": "number", "exclusiveMinimum": 0},
            "truth_seed": {"type": "integer", "minimum": 0},
            "data_seed": {"type": "integer", "minimum": 0},
            "obs_grid": {"type": "array", "items": {"type": "integer", "minimum": 1},
                         "minItems": 2, "maxItems": 2},
        },
    },
    "lorenz63": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "truth"],
        "properties": {
            "kind": {"const": "lorenz63"},
            "spinup": {"type": "number", "exclusiveMinimum": 0},
            "horizon": {"type": "number", "exclusiveMinimum": 0},
            "step": {"type": "number", "exclusiveMinimum": 0},
            "truth": {"type": "array", "items": {"type": "number"},
                      "minItems": 2, "maxItems": 2},
            "data_time": {"type": "number", "exclusiveMinimum": 0},
        },
    },
    "lorenz96": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "truth"],
        "properties": {
            "kind": {"const": "lorenz96"},
            "slow_count": {"type": "integer", "minimum": 4},
            "fast_count": {"type": "integer", "minimum": 1},
            "spinup": {"type": "number", "exclusiveMinimum": 0},
            "horizon": {"type": "number", "exclusiveMinimum": 0},
            "step": {"type": "number", "exclusiveMinimum": 0},
            "truth": {"type": "array", "items": {"type": "number"},
                      "minItems": 4, "maxItems": 4},
            "data_time": {"type": "number", "exclusiveMinimum": 0},
        },
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "problem", "prior"],
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string", "minLength": 1},
        "problem": {"oneOf": list(_PROBLEM_SCHEMAS.values())},
        "prior": _PRIOR_SCHEMA,
        "calibration": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ensemble_size": {"type": "integer", "minimum": 1},
                "n_iterations": {"type": "integer", "minimum": 0},
                "step0": {"type": "number", "exclusiveMinimum": 0},
                "variant": {"enum": ["eks", "eki"]},
                "snapshot_stride": {"type": "integer", "minimum": 0},
            },
        },
        "emulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "transform": {"enum": ["identity", "diagonal", "svd"]},
                "kernel": {"enum": ["squared-exponential", "matern52"]},
                "mean": {"enum": ["zero", "linear"]},
                "design": {"enum": ["final", "all"]},
                "lengthscale_priors": {"type": "boolean"},
                "n_restarts": {"type": "integer", "minimum": 1},
                "holdout_fraction": {"type": "number", "minimum": 0, "maximum": 0.5},
            },
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "misfit": {"enum": ["phi_m", "phi_gp", "phi_gp_combined",
                                    "phi_T_direct"]},
                "n_samples": {"type": "integer", "minimum": 1},
                "proposal_scale": {"type": "number", "exclusiveMinimum": 0},
                "n_chains": {"type": "integer", "minimum": 1},
            },
        },
        "uq": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_samples": {"type": "integer", "minimum": 1},
            },
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "output_dir": "ces-out",
    "calibration": {"ensemble_size": 100, "n_iterations": 20, "step0": 1.0,
                    "variant": "eks", "snapshot_stride": 0},
    "emulation": {"transform": "diagonal", "kernel": "squared-exponential",
                  "mean": "linear", "design": "final",
                  "lengthscale_priors": True, "n_restarts": 8,
                  "holdout_fraction": 0.1},
    "sampling": {"misfit": "phi_gp_combined", "n_samples": 20000,
                 "proposal_scale": 1.0, "n_chains": 1},
    "uq": {"n_samples": 250},
}

_PROBLEM_DEFAULTS = {
    "linear": {"output_dim": 10, "matrix_seed": 0, "noise_std": 0.1, "data_seed": 42},
    "darcy": {"grid": 32, "n_modes": 10, "truth_modes": 256, "noise_std": 0.005,
              "truth_seed": 0, "data_seed": 42, "obs_grid": [10, 5]},
    "lorenz63": {"spinup": 30.0, "horizon": 10.0, "step": 0.01, "data_time": 360.0},
    "lorenz96": {"slow_count": 36, "fast_count": 10, "spinup": 20.0,
                 "horizon": 100.0, "step": 0.005, "data_time": 40000.0},
}


def _json_path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    return "$" + "".join(f".{p}" if not p.isdigit() else f"[{p}]" for p in parts)


def validate_config(raw: dict) -> dict:
    """Validate and fill defaults; returns a new, fully populated config dict."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    # discriminate the problem kind first so errors point at the right sub-schema
    kind = raw.get("problem", {}).get("kind") if isinstance(raw.get("problem"), dict) else None
    schema = dict(SCHEMA)
    if kind in _PROBLEM_SCHEMAS:
        schema = {**SCHEMA, "properties": {**SCHEMA["properties"],
                                           "problem": _PROBLEM_SCHEMAS[kind]}}
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(f"{_json_path(err)}: {err.message}")

    config = json.loads(json.dumps(raw))  # deep copy
    for key, block in DEFAULTS.items():
        if isinstance(block, dict):
            merged = dict(block)
            merged.update(config.get(key, {}))
            config[key] = merged
        else:
            config.setdefault(key, block)
    kind = config["problem"]["kind"]
    merged = dict(_PROBLEM_DEFAULTS[kind])
    merged.update(config["problem"])
    config["problem"] = merged

    _check_consistency(config)
    return config


def _check_consistency(config: dict) -> None:
    prior = config["prior"]
    p = len(prior["mean"])
    if "diag" in prior and len(prior["diag"]) != p:
        raise ConfigError("$.prior.diag: length does not match the prior mean")
    if "cov" in prior:
        cov = prior["cov"]
        if len(cov) != p or any(len(row) != p for row in cov):
            raise ConfigError("$.prior.cov: shape does not match the prior mean")
    problem = config["problem"]
    kind = problem["kind"]
    expected = {"linear": len(problem.get("truth", prior["mean"])),
                "darcy": problem.get("n_modes"),
                "lorenz63": 2, "lorenz96": 4}[kind]
    if p != expected:
        raise ConfigError(
            f"$.prior.mean: length {p} does not match the {kind} parameter count {expected}")
    if kind == "darcy" and problem["truth_modes"] < problem["n_modes"]:
        raise ConfigError("$.problem.truth_modes: must be >= n_modes")


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    return validate_config(raw)


def load_preset(name: str) -> dict:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    text = resources.files("ces.pipeline").joinpath(f"presets/{name}.json").read_text()
    return validate_config(json.loads(text))


def preset_path(name: str) -> str:
    return str(resources.files("ces.pipeline").joinpath(f"presets/{name}.json"))
