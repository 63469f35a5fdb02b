"""Experiment configs: YAML/JSON files validated against a shipped JSON schema, plus presets."""
from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import spectral
from .dlam import DlamConfig, TrigSeries
from .errors import ConfigurationError
from .models import ModelSpec
from .trainer import TrainConfig

SCHEMA_VERSION = 1


def schema():
    return json.loads(resources.files("dool").joinpath("schema/experiment.schema.json").read_text())


def preset_names():
    files = resources.files("dool").joinpath("presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".yaml"))


def preset_text(name):
    if name not in preset_names():
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return resources.files("dool").joinpath(f"presets/{name}.yaml").read_text()


def deep_merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse(text, origin):
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{origin}: not valid YAML/JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{origin}: the top level must be a mapping")
    return doc


def validate(doc):
    """Raise ConfigurationError listing every schema violation with its field path."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            path = ".".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"  {path}: {e.message}")
        raise ConfigurationError("invalid config:\n" + "\n".join(lines))
    if doc.get("inversion", {}).get("interval") is not None:
        lo, hi = doc["inversion"]["interval"]
        if not lo < hi:
            raise ConfigurationError(f"  inversion.interval: reversed or empty interval [{lo}, {hi}]")
    basis = doc.get("basis")
    if basis is not None and len(basis["grid_size"]) != basis["dim"]:
        raise ConfigurationError("  basis.grid_size: needs one entry per dimension")
    return doc


def load(source, paper_scale=False, overrides=None):
    """Load a preset name or a config file, apply overrides, validate, and return a dict."""
    if isinstance(source, dict):
        doc = copy.deepcopy(source)
    elif source in preset_names():
        doc = _parse(preset_text(source), f"preset {source}")
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigurationError(f"{source}: no such config file or preset")
        doc = _parse(path.read_text(), str(path))
    scale = doc.pop("paper_scale", None)
    if paper_scale:
        if not scale:
            raise ConfigurationError("this config has no paper_scale section")
        doc = deep_merge(doc, scale)
    if overrides:
        doc = deep_merge(doc, overrides)
    return validate(doc)


# --------------------------------------------------------------------------
# typed views

def basis_of(doc):
    b = doc["basis"]
    return spectral.BasisSpec(b["family"], b["dim"], float(b["half_width"]), b["K"], tuple(b["grid_size"]),
                              b.get("resolution", 40))


def model_of(doc):
    if "model" not in doc or "basis" not in doc:
        raise ConfigurationError("config needs model and basis sections")
    m = doc["model"]
    return ModelSpec(m["name"], basis_of(doc), dict(m.get("params", {})), float(m.get("eps_u", 1e-3)))


def _mode_key(key):
    parts = tuple(int(s) for s in str(key).split(","))
    return parts if len(parts) > 1 else parts[0]


def sampling_of(doc, basis):
    s = doc.get("sampling", {})
    centers = {_mode_key(k): complex(v[0], v[1]) for k, v in s.get("centers", {}).items()}
    spec = spectral.SamplingSpec.geometric(basis, s.get("center0", 0.0), s.get("r0", 0.5),
                                           s.get("positivity_floor", 0.0), centers)
    spec.max_retries = s.get("max_retries", 1000)
    return spec


def train_config_of(doc):
    model = model_of(doc)
    net, tr = doc.get("net", {}), doc.get("training", {})
    gr = tr.get("gamma_range")
    return TrainConfig(model=model, sampling=sampling_of(doc, model.basis), n_samples=tr.get("n_samples", 50),
                       depth=net.get("depth", 3), width=net.get("width", 50), p=net.get("p", 120),
                       activation=net.get("activation", "tanh"), epochs=tr.get("epochs", 20000),
                       lr=tr.get("lr", 5e-4), seed=doc["seed"], log_every=tr.get("log_every", 100),
                       gamma_range=None if gr is None else tuple(gr), n_gammas=tr.get("n_gammas"),
                       min_shifted=tr.get("min_shifted", 0.5))


def band_limit_of(doc, basis):
    bl = doc.get("stepping", {}).get("band_limit", "auto")
    if bl == "none":
        return None
    if bl == "auto":
        return basis.K if basis.family == "fourier" else None
    if basis.family != "fourier":
        raise ConfigurationError("stepping.band_limit applies to Fourier bases only")
    return int(bl)


def dlam_config_of(doc):
    d = doc.get("dlam")
    if d is None:
        raise ConfigurationError("config has no dlam section")
    kw = {k: v for k, v in d.items() if k not in ("f", "g", "test_grid")}
    if "f" in d:
        kw["f"] = TrigSeries.from_dict(d["f"])
    if "g" in d:
        kw["g"] = TrigSeries.from_dict(d["g"])
    return DlamConfig(seed=doc["seed"], **kw)


def dump(doc):
    return yaml.safe_dump(doc, sort_keys=False)


def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x
