"""Experiment configuration: YAML files, defaults and validation.

A config is a mapping with a required ``experiment`` key, optional
``seed``, ``output_dir`` and ``paper_scale``, plus the experiment's own
keys.  Unspecified keys take the desk-scale defaults below; with
``paper_scale`` the published chain lengths are substituted first.
Validation uses JSON Schema and reports the dotted path of the first
offending field.
"""

import copy
import math
import re

import jsonschema
import yaml

from ..exceptions import ConfigError

EXPERIMENTS = (
    "fig1_posterior_means",
    "inverse_regression",
    "dj94_denoise",
    "density_estimation",
    "classification",
    "rate_sweep",
    "prior_mass",
    "theory_suite",
)

_FUNCTION_PRIORS = [
    {"name": "Gaussian", "kind": "Gaussian", "alpha": 5.0},
    {"name": "HT", "kind": "HT", "alpha": 5.0, "tail": "Cauchy"},
    {"name": "OT", "kind": "OT", "a": 1.0, "delta": 1.0, "tail": "Cauchy"},
]

DEFAULTS = {
    "fig1_posterior_means": {
        "n": 1e7,
        "sigmas": [1e-2, 1e-3, 1e-4, 1e-5],
        "tails": [{"kind": "StudentT", "nu": 3.0}],
        "x_max": 0.01,
        "n_points": 201,
    },
    "inverse_regression": {
        "n_grid": [1e3, 1e5, 1e7, 1e9, 1e11],
        "truncation": 200,
        "forward": "volterra",
        "rho": [1.0],
        "priors": [
            {"name": "GaussianHierarchical", "kind": "GaussianHierarchical"},
            {"name": "HT", "kind": "HT", "alpha": 5.0, "tail": "StudentT", "nu": 3.0},
            {"name": "OT", "kind": "OT", "a": 1.0, "delta": 0.5, "tail": "StudentT", "nu": 3.0},
        ],
        "sampler": {"kind": "RandomWalk", "n_draws": 3000, "burn_in": 1000},
        "mcmc_max_n": 1e7,
        "level": 0.95,
        "n_points": 200,
    },
    "dj94_denoise": {
        "signals": ["Blocks", "Bumps", "HeaviSine", "Doppler"],
        "length": 2048,
        "snr": 7.0,
        "coarse_level": 5,
        "wavelet": "symmlet8",
        "replicates": 1,
        "priors": ["OT", "GaussianHierarchical"],
        "ot": {"a": 1.0, "delta": 0.5},
        "mala": {"n_draws": 20000, "burn_in": 10000, "thin": 10, "step": 0.1},
        "mwg": {"n_draws": 20000, "burn_in": 10000, "thin": 10},
        "level": 0.95,
    },
    "density_estimation": {
        "n_grid": [1e2, 1e4, 1e6],
        "max_level": 10,
        "rho": [1.0],
        "priors": copy.deepcopy(_FUNCTION_PRIORS),
        "sampler": {"n_draws": 5000, "burn_in": 2500, "thin": 5, "beta": 0.1},
        "level": 0.95,
        "n_points": 256,
    },
    "classification": {
        "n_grid": [1e2, 1e4, 1e6],
        "max_level": 10,
        "rho": [1.0],
        "priors": copy.deepcopy(_FUNCTION_PRIORS),
        "sampler": {"n_draws": 5000, "burn_in": 2500, "thin": 5, "beta": 0.1},
        "level": 0.95,
        "n_points": 256,
    },
    "rate_sweep": {
        "n_grid": [1e2, 1e3, 1e4, 1e5, 1e6],
        "replicates": 20,
        "truncation": 1000,
        "models": ["direct", "inverse"],
        "prior": {"kind": "OT", "a": 1.0, "delta": 0.5, "tail": "Cauchy"},
    },
    "prior_mass": {
        "n_grid": [50, 100, 200],
        "truncation": 100,
        "prior": {"kind": "OT", "a": 1.0, "delta": 1.0, "tail": "Cauchy"},
        "beta": 1.0,
        "n_mc": 100000,
        "calibration_n_mc": 20000,
        "target_ratio": -0.2,
    },
    "theory_suite": {
        "bvm_n": 1e6,
        "bvm_draws": 10000,
        "renyi_n": 100.0,
        "renyi_rho": 0.5,
    },
}

PAPER_SCALE = {
    "inverse_regression": {"sampler": {"n_draws": 5000, "burn_in": 1000}},
    "dj94_denoise": {
        "mala": {"n_draws": 120000, "burn_in": 20000, "thin": 10},
        "mwg": {"n_draws": 400000, "burn_in": 200000, "thin": 20},
    },
    "density_estimation": {"sampler": {"n_draws": 50000, "burn_in": 25000, "thin": 5}},
    "classification": {"sampler": {"n_draws": 50000, "burn_in": 25000, "thin": 5}},
    "prior_mass": {"n_mc": 1000000},
}

_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_TAIL = {"enum": ["Cauchy", "StudentT", "Gaussian", "Laplace"]}
_RHO_LIST = {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}}
_N_GRID = {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 1}}
_LEVEL = {"type": "number", "exclusiveMinimum": 0, "maximum": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_SERIES_PRIOR = _obj({
    "name": {"type": "string"},
    "kind": {"enum": ["OT", "HT", "Gaussian", "GaussianHierarchical"]},
    "a": _POS, "delta": _POS, "alpha": _POS, "tail": _TAIL, "nu": _POS,
}, required=("kind",))

_CHAIN = _obj({"n_draws": _POS_INT, "burn_in": {"type": "integer", "minimum": 0},
               "thin": _POS_INT, "step": _POS, "beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
               "kind": {"enum": ["RandomWalk", "Slice"]}})

_FUNCTION_SCHEMA = {
    "n_grid": _N_GRID, "max_level": {"type": "integer", "minimum": 1, "maximum": 11}, "rho": _RHO_LIST,
    "priors": {"type": "array", "minItems": 1, "items": _SERIES_PRIOR}, "sampler": _CHAIN,
    "level": _LEVEL, "n_points": {"type": "integer", "minimum": 2, "maximum": 4096},
}

SCHEMAS = {
    "fig1_posterior_means": {
        "n": _POS, "sigmas": {"type": "array", "minItems": 1, "items": _POS},
        "tails": {"type": "array", "minItems": 1, "items": _obj({"kind": _TAIL, "nu": _POS}, ("kind",))},
        "x_max": _POS, "n_points": {"type": "integer", "minimum": 2},
    },
    "inverse_regression": {
        "n_grid": _N_GRID, "truncation": _POS_INT, "forward": {"enum": ["volterra", "identity"]},
        "rho": _RHO_LIST, "priors": {"type": "array", "minItems": 1, "items": _SERIES_PRIOR},
        "sampler": _CHAIN, "mcmc_max_n": _POS, "level": _LEVEL, "n_points": {"type": "integer", "minimum": 2},
    },
    "dj94_denoise": {
        "signals": {"type": "array", "minItems": 1,
                    "items": {"enum": ["Blocks", "Bumps", "HeaviSine", "Doppler"]}},
        "length": {"type": "integer", "minimum": 64},
        "snr": _POS, "coarse_level": {"type": "integer", "minimum": 0},
        "wavelet": {"enum": ["haar", "symmlet8", "daubechies8"]},
        "replicates": _POS_INT,
        "priors": {"type": "array", "minItems": 1, "items": {"enum": ["OT", "GaussianHierarchical"]}},
        "ot": _obj({"a": _POS, "delta": _POS}), "mala": _CHAIN, "mwg": _CHAIN, "level": _LEVEL,
    },
    "density_estimation": _FUNCTION_SCHEMA,
    "classification": _FUNCTION_SCHEMA,
    "rate_sweep": {
        "n_grid": _N_GRID, "replicates": _POS_INT, "truncation": _POS_INT,
        "models": {"type": "array", "minItems": 1, "items": {"enum": ["direct", "inverse"]}},
        "prior": _SERIES_PRIOR,
    },
    "prior_mass": {
        "n_grid": {"type": "array", "minItems": 2, "items": {"type": "number", "minimum": 3}},
        "truncation": _POS_INT, "prior": _SERIES_PRIOR, "beta": _POS, "n_mc": {"type": "integer", "minimum": 1000},
        "calibration_n_mc": {"type": "integer", "minimum": 1000}, "target_ratio": {"type": "number", "maximum": 0},
    },
    "theory_suite": {
        "bvm_n": _POS, "bvm_draws": {"type": "integer", "minimum": 100},
        "renyi_n": _POS, "renyi_rho": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    },
}

_COMMON = {
    "experiment": {"enum": list(EXPERIMENTS)},
    "seed": {"type": "integer", "minimum": 0},
    "output_dir": {"type": "string", "minLength": 1},
    "paper_scale": {"type": "boolean"},
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _path(error):
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "required":
        missing = error.message.split("'")[1]
        parts.append(missing)
    elif error.validator == "additionalProperties":
        extra = error.message.split("'")[1]
        parts.append(extra)
    return ".".join(parts) or "<root>"


def validate(raw):
    """Validate a raw config mapping and return the resolved config.

    Raises :class:`ConfigError` naming the offending field.
    """
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    if "experiment" not in raw:
        raise ConfigError("experiment", "missing required field")
    exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {exp!r}; expected one of {', '.join(EXPERIMENTS)}")
    schema = _obj({**_COMMON, **SCHEMAS[exp]}, required=("experiment",))
    validator = jsonschema.Draft7Validator(schema)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(list(e.absolute_path)), str(e.absolute_path)))
    if errors:
        err = errors[0]
        raise ConfigError(_path(err), err.message)
    cfg = {"seed": 0, "paper_scale": False, **copy.deepcopy(DEFAULTS[exp])}
    if raw.get("paper_scale"):
        cfg = _merge(cfg, PAPER_SCALE.get(exp, {}))
    cfg = _merge(cfg, raw)
    _semantic_checks(cfg)
    return cfg


def _chain_check(chain, path):
    if chain.get("burn_in", 0) >= chain.get("n_draws", math.inf):
        raise ConfigError(f"{path}.burn_in", "burn_in must be smaller than n_draws")


def _semantic_checks(cfg):
    exp = cfg["experiment"]
    for key in ("sampler", "mala", "mwg"):
        if key in cfg:
            _chain_check(cfg[key], key)
    if "n_grid" in cfg and list(cfg["n_grid"]) != sorted(set(cfg["n_grid"])):
        raise ConfigError("n_grid", "must be strictly increasing")
    if exp == "dj94_denoise":
        L = cfg["length"]
        if L & (L - 1):
            raise ConfigError("length", "must be a power of two")
        if not cfg["coarse_level"] < int(math.log2(L)):
            raise ConfigError("coarse_level", "must be below log2(length)")
    if exp in ("density_estimation", "classification", "inverse_regression", "rate_sweep"):
        priors = cfg.get("priors", [cfg.get("prior")])
        for i, p in enumerate(priors):
            if p is None:
                continue
            if p["kind"] in ("HT", "Gaussian") and "alpha" not in p:
                raise ConfigError(f"priors.{i}.alpha", "required for polynomial scales")
            if p.get("tail") == "StudentT" and "nu" not in p:
                raise ConfigError(f"priors.{i}.nu", "required for the StudentT tail")
    if exp == "rate_sweep" and cfg["prior"]["kind"] == "GaussianHierarchical":
        raise ConfigError("prior.kind", "rate_sweep supports product priors only")
    if exp == "prior_mass" and cfg["prior"]["kind"] not in ("OT", "HT"):
        raise ConfigError("prior.kind", "prior_mass needs an OT or HT prior")


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e7``-style numbers as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def load_config(path, overrides=None):
    """Read a YAML config file, apply ``overrides`` and validate."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.load(fh, Loader=_Loader)
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"cannot parse YAML: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    raw = {**raw, **(overrides or {})}
    return validate(raw)
