"""Experiment configuration: JSON documents with validated, defaulted params.

A document looks like::

    {"experiment": "detect", "seed": 7, "workers": 2, "output": "out/",
     "params": {"M": 40, "K": 40, "rho_db": [4, 8, 12]}}

Only ``experiment`` is required. Every key of ``params`` must be one of the
defaults listed for that experiment kind in :data:`DEFAULTS`; its type is
checked against the default's type.
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field

from ..errors import MissingKey, RangeViolation, TypeMismatch, UnknownKey

__all__ = ['ExperimentConfig', 'DEFAULTS', 'KINDS', 'parse_config', 'emit_config',
           'load_config']

# Defaults follow the figure settings where the source states them.
DEFAULTS = {
    "capacity": {
        "K": 15, "M": [15, 40, 100], "rho_db": [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
        "draws": 200, "coupling_draws": 1000, "coupling_rho_db": 20.0,
    },
    "precoding": {
        "K": 15, "alpha": [2.0, 4.0], "rho_db": [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
        "techniques": ["IF", "ZF", "MF"], "xi": 1.0, "trials": 1000,
        "rzf_delta": 1.0,
    },
    "multicell": {
        "K": 10, "M": [10, 100, 1000], "radius": 800.0, "tiers": 2,
        "wraparound": True, "min_distance": 100.0, "sigma_shadow_db": 8.0,
        "exponent": 3.8, "rho_p_db": None, "rho_f_db": None,
        "techniques": ["MF", "ZF", "RZF"], "rzf_delta_over_M": 0.05, "drops": 20,
        "asymptotic_drops": 10000,
    },
    "detect": {
        "M": 40, "K": 15, "rho_db": [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
        "techniques": ["MMSE", "MMSE-SIC", "BI-GDFE", "TS", "LAS"],
        "target_errors": 500, "max_vectors": 20000, "batch": 50,
        "sic_iters": 6, "bigdfe_iters": 4, "ts_iters": 60, "tabu": 60, "fcsd_r": 8,
        "rho_scale_with_M": False, "rho_ref_M": 40,
    },
    "focusing": {
        "M": [10, 100], "grid_lambda": 10.0, "step_lambda": 0.1,
        "n_scatterers": 400, "side": 800.0, "standoff": 1600.0, "spacing": 0.5,
        "amp_exponent": 1.0,
    },
    "eigen_cdf": {
        "shapes": [[6, 128], [6, 6]], "draws": 1000,
    },
    "neumann_bench": {
        "K": 50, "alpha": [2.0, 4.0, 8.0, 16.0], "terms": [1, 2, 3, 4, 6, 8], "delta": None,
        "weighting": "fixed", "draws": 20,
    },
}

KINDS = tuple(DEFAULTS)
TOP_KEYS = ("experiment", "seed", "workers", "output", "params")

# (min, max) bounds on scalar params; lists are checked element-wise
_RANGES = {
    "K": (1, None), "M": (1, None), "draws": (1, None), "trials": (100, None),
    "coupling_draws": (1, None), "xi": (0.0, 1.0), "alpha": (1, None), "radius": (1e-9, None),
    "tiers": (0, 5), "min_distance": (0.0, None), "sigma_shadow_db": (0.0, None),
    "exponent": (0.0, None), "rzf_delta_over_M": (0.0, None), "drops": (1, None),
    "asymptotic_drops": (1, None), "target_errors": (1, None), "max_vectors": (1, None),
    "batch": (1, None), "sic_iters": (1, None), "bigdfe_iters": (1, None),
    "ts_iters": (1, None), "tabu": (0, None), "fcsd_r": (0, None), "rho_ref_M": (1, None),
    "grid_lambda": (1e-9, None), "step_lambda": (1e-9, None), "n_scatterers": (1, None),
    "side": (1e-9, None), "standoff": (0.0, None), "spacing": (1e-9, None),
    "amp_exponent": (0.0, None), "terms": (0, None), "delta": (1e-9, 2.0),
    "rzf_delta": (0.0, None),
}
_CHOICES = {
    "techniques": {"IF", "ZF", "MF", "RZF", "VP", "MMSE", "MMSE-SIC", "BI-GDFE", "TS",
                   "LAS", "FCSD", "ML"},
    "weighting": {"fixed", "trace"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    workers: int = 1
    output: str = "."
    params: dict = field(default_factory=dict)

    def to_document(self):
        return {"experiment": self.experiment, "seed": self.seed, "workers": self.workers,
                "output": self.output, "params": copy.deepcopy(self.params)}

    def config_hash(self):
        """Hash of everything that affects the data (workers and output excluded)."""
        doc = {"experiment": self.experiment, "seed": self.seed, "params": self.params}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **kw):
        doc = self.to_document()
        doc.update(kw)
        return parse_config(doc)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_type(name, value, default):
    if default is None:
        ok = value is None or _is_number(value)
    elif isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = _is_number(value)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list) and len(value) > 0
        if ok and default:
            proto = default[0]
            ok = all(_element_ok(v, proto) for v in value)
    else:
        ok = False
    if not ok:
        raise TypeMismatch(name, f"expected {type(default).__name__}, got {value!r}")


def _element_ok(v, proto):
    if isinstance(proto, list):
        return isinstance(v, list) and all(_is_number(e) for e in v)
    if isinstance(proto, str):
        return isinstance(v, str)
    if isinstance(proto, int):
        return _is_number(v) and float(v).is_integer()
    return _is_number(v)


def _check_range(name, value):
    vals = value if isinstance(value, list) else [value]
    if name in _CHOICES:
        for v in vals:
            if v not in _CHOICES[name]:
                raise RangeViolation(name, f"{v!r} is not one of {sorted(_CHOICES[name])}")
    if name in _RANGES:
        lo, hi = _RANGES[name]
        for v in vals:
            if v is None or isinstance(v, list):
                continue
            if (lo is not None and v < lo) or (hi is not None and v > hi):
                raise RangeViolation(name, f"{v!r} outside [{lo}, {hi}]")


def parse_config(document):
    """Validate a config document (dict or JSON text) and apply defaults.

    Raises
    ------
    MissingKey, TypeMismatch, RangeViolation, UnknownKey
    """
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    if not isinstance(document, dict):
        raise TypeMismatch("<document>", "config must be a JSON object")
    for key in document:
        if key not in TOP_KEYS:
            raise UnknownKey(key, f"unknown top-level key {key!r}")
    if "experiment" not in document:
        raise MissingKey("experiment", "config must name an experiment")
    kind = document["experiment"]
    if not isinstance(kind, str):
        raise TypeMismatch("experiment", "experiment must be a string")
    kind = kind.replace("-", "_")
    if kind not in DEFAULTS:
        raise RangeViolation("experiment", f"{kind!r} is not one of {list(KINDS)}")
    seed = document.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise TypeMismatch("seed", "seed must be an integer")
    if not 0 <= seed < 2 ** 64:
        raise RangeViolation("seed", "seed must be a 64-bit unsigned integer")
    workers = document.get("workers", 1)
    if not isinstance(workers, int) or isinstance(workers, bool):
        raise TypeMismatch("workers", "workers must be an integer")
    if workers < 1:
        raise RangeViolation("workers", "workers must be at least 1")
    output = document.get("output", ".")
    if not isinstance(output, str):
        raise TypeMismatch("output", "output must be a path string")
    given = document.get("params", {})
    if not isinstance(given, dict):
        raise TypeMismatch("params", "params must be an object")
    params = copy.deepcopy(DEFAULTS[kind])
    for name, value in given.items():
        if name not in params:
            raise UnknownKey(name, f"unknown parameter {name!r} for {kind}")
        _check_type(name, value, DEFAULTS[kind][name])
        _check_range(name, value)
        if isinstance(DEFAULTS[kind][name], float) and _is_number(value):
            value = float(value)
        params[name] = copy.deepcopy(value)
    return ExperimentConfig(kind, seed, workers, output, params)


def emit_config(cfg):
    """JSON text that parses back to ``cfg``."""
    return json.dumps(cfg.to_document(), indent=2, sort_keys=True)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
