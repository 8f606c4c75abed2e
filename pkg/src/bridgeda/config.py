"""Run-configuration files: strict parsing, validation, serialization.

A run config is a single JSON object with four sections. "data" describes
either a classification triple, a translation task, or paths to dataset
files on disk. "model" carries network widths, "train" carries optimizer
and loss settings (seed is mandatory), "report" controls what the train
command writes besides the metrics log. Unknown keys anywhere are
rejected before any compute happens, so a typo in a loss-weight name
fails fast instead of silently training with the default.

parse -> serialize -> parse is a fixed point: serialization materializes
every default, and parsing a serialized document reproduces an equal
RunConfig.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple

import jsonschema

from .errors import ConfigError
from .pipelines import CfganConfig, PadaConfig
from .synthdata import PointFamily, TranslationTaskSpec, TripleSpec

__all__ = [
    "DataSection",
    "ReportSection",
    "RunConfig",
    "dump_run_config",
    "load_run_config",
    "parse_data_section",
    "parse_run_config",
    "pada_config",
    "cfgan_config",
    "serialize_run_config",
]

_WIDTHS = {"type": "array", "items": {"type": "integer", "minimum": 1}}
_NUMBER = {"type": "number"}

_TRIPLE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n_classes", "n_features", "n_per_domain"],
    "properties": {
        "n_classes": {"type": "integer"},
        "n_features": {"type": "integer"},
        "n_per_domain": {"type": "integer"},
        "radius": _NUMBER,
        "sigma": _NUMBER,
        "rotation": _NUMBER,
        "scale": _NUMBER,
        "translation": {"type": "array", "items": _NUMBER},
        "feature_noise": _NUMBER,
        "swap_coords": {"type": "boolean"},
        "gap": _NUMBER,
        "seed": {"type": "integer"},
    },
}

_FAMILY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"type": "string"},
        "radius": _NUMBER,
        "noise": _NUMBER,
        "pitch": _NUMBER,
        "extent": _NUMBER,
        "components": {"type": "integer"},
        "sigma": _NUMBER,
        "rotation": _NUMBER,
    },
}

_TRANSLATION_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["source", "bridge", "target"],
    "properties": {
        "source": _FAMILY_SCHEMA,
        "bridge": _FAMILY_SCHEMA,
        "target": _FAMILY_SCHEMA,
        "n_per_domain": {"type": "integer"},
        "seed": {"type": "integer"},
    },
}

_FILES_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["source", "bridge", "target"],
    "properties": {
        "source": {"type": "string"},
        "bridge": {"type": "string"},
        "target": {"type": "string"},
    },
}

_DATA_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "minProperties": 1,
    "maxProperties": 1,
    "properties": {
        "triple": _TRIPLE_SCHEMA,
        "translation": _TRANSLATION_SCHEMA,
        "files": _FILES_SCHEMA,
    },
}

_MODEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "g_widths": _WIDTHS,
        "d_widths": _WIDTHS,
        "c_widths": _WIDTHS,
        "di_widths": _WIDTHS,
        "r_widths": _WIDTHS,
        "t_widths": _WIDTHS,
    },
}

# keys the classification trainers accept beyond the shared optimizer block
_PADA_ONLY = (
    "lam",
    "alpha_adv",
    "beta_proto",
    "gamma_ent",
    "delta_rec",
    "eta_mi",
    "pseudo_threshold",
    "proto_momentum",
    "warmup_adv",
    "warmup_proto",
    "warmup_ent",
    "warmup_mi",
    "warmup_rec",
    "di_branch",
    "eval_every",
)
_CFGAN_ONLY = ("lam", "cycle_weight", "beta1", "log_every", "sw_projections")
_SHARED_TRAIN = ("seed", "lr", "iterations", "batch_size")

_TRAIN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["seed"],
    "properties": {
        "seed": {"type": "integer"},
        "lr": _NUMBER,
        "iterations": {"type": "integer"},
        "batch_size": {"type": "integer"},
        "alpha_adv": _NUMBER,
        "beta_proto": _NUMBER,
        "gamma_ent": _NUMBER,
        "delta_rec": _NUMBER,
        "eta_mi": _NUMBER,
        "pseudo_threshold": _NUMBER,
        "proto_momentum": _NUMBER,
        "warmup_adv": {"type": "integer"},
        "warmup_proto": {"type": "integer"},
        "warmup_ent": {"type": "integer"},
        "warmup_mi": {"type": "integer"},
        "warmup_rec": {"type": "integer"},
        "di_branch": {"type": "string"},
        "eval_every": {"type": "integer"},
        "lam": _NUMBER,
        "cycle_weight": _NUMBER,
        "beta1": _NUMBER,
        "log_every": {"type": "integer"},
        "sw_projections": {"type": "integer"},
    },
}

_REPORT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "out_dir": {"type": ["string", "null"]},
        "curves": {"type": "boolean"},
        "scatter": {"type": "boolean"},
    },
}

_RUN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["data", "train"],
    "properties": {
        "data": _DATA_SCHEMA,
        "model": _MODEL_SCHEMA,
        "train": _TRAIN_SCHEMA,
        "report": _REPORT_SCHEMA,
    },
}


@dataclass(frozen=True)
class DataSection:
    """One of three data sources; exactly one field is set."""

    triple: Optional[TripleSpec] = None
    translation: Optional[TranslationTaskSpec] = None
    files: Optional[Tuple[str, str, str]] = None

    @property
    def kind(self) -> str:
        if self.triple is not None:
            return "triple"
        if self.translation is not None:
            return "translation"
        return "files"


@dataclass(frozen=True)
class ReportSection:
    out_dir: Optional[str] = None
    curves: bool = True
    scatter: bool = False


@dataclass(frozen=True)
class RunConfig:
    data: DataSection
    model: Dict[str, Tuple[int, ...]]
    train: Dict[str, Any]
    report: ReportSection


def _validate(obj: Mapping[str, Any]) -> None:
    try:
        jsonschema.validate(obj, _RUN_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"run config invalid at {where}: {exc.message}") from None


def parse_data_section(section: Mapping[str, Any]) -> DataSection:
    """Build a DataSection from an already-deserialized "data" object."""
    try:
        jsonschema.validate(section, _DATA_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"data section invalid at {where}: {exc.message}") from None
    if "triple" in section:
        spec = TripleSpec(**{k: (tuple(v) if k == "translation" else v)
                             for k, v in section["triple"].items()})
        return DataSection(triple=spec)
    if "translation" in section:
        d = dict(section["translation"])
        fams = {k: PointFamily(**d.pop(k)) for k in ("source", "bridge", "target")}
        return DataSection(translation=TranslationTaskSpec(**fams, **d))
    f = section["files"]
    return DataSection(files=(f["source"], f["bridge"], f["target"]))


def parse_run_config(obj: Mapping[str, Any]) -> RunConfig:
    _validate(obj)
    data = parse_data_section(obj["data"])
    model = {k: tuple(v) for k, v in obj.get("model", {}).items()}
    train = dict(obj["train"])
    report = ReportSection(**obj.get("report", {}))
    return RunConfig(data=data, model=model, train=train, report=report)


def load_run_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"run config is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("run config must be a JSON object")
    return parse_run_config(obj)


def _data_payload(data: DataSection) -> Dict[str, Any]:
    if data.triple is not None:
        payload = dataclasses.asdict(data.triple)
        payload["translation"] = list(payload["translation"])
        return {"triple": payload}
    if data.translation is not None:
        payload = dataclasses.asdict(data.translation)
        return {"translation": payload}
    assert data.files is not None
    src, bri, tgt = data.files
    return {"files": {"source": src, "bridge": bri, "target": tgt}}


def dump_run_config(cfg: RunConfig) -> Dict[str, Any]:
    """Plain-JSON form of a RunConfig; parse(dump(cfg)) == cfg."""
    return {
        "data": _data_payload(cfg.data),
        "model": {k: list(v) for k, v in sorted(cfg.model.items())},
        "train": {k: cfg.train[k] for k in sorted(cfg.train)},
        "report": dataclasses.asdict(cfg.report),
    }


def serialize_run_config(cfg: RunConfig) -> str:
    text = json.dumps(dump_run_config(cfg), indent=2, sort_keys=True)
    return text + "\n"


def _train_kwargs(cfg: RunConfig, allowed: Tuple[str, ...], label: str) -> Dict[str, Any]:
    extra = sorted(set(cfg.train) - set(allowed) - set(_SHARED_TRAIN))
    if extra:
        raise ConfigError(f"train keys not understood by {label}: {', '.join(extra)}")
    return {k: cfg.train[k] for k in cfg.train}


def pada_config(cfg: RunConfig) -> PadaConfig:
    """PadaConfig from the model and train sections (source-only and pada)."""
    kwargs = _train_kwargs(cfg, _PADA_ONLY, "source-only/pada training")
    for key, value in cfg.model.items():
        kwargs[key] = value
    try:
        return PadaConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"model section key not understood: {exc}") from None


def cfgan_config(cfg: RunConfig) -> CfganConfig:
    """CfganConfig from the model and train sections."""
    kwargs = _train_kwargs(cfg, _CFGAN_ONLY, "cfgan training")
    for key, value in cfg.model.items():
        if key not in ("g_widths", "d_widths"):
            raise ConfigError(f"model section key not used by cfgan: {key}")
        kwargs[key] = value
    return CfganConfig(**kwargs)
