"""JSON configuration: schema, loading, and building the model objects."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .link import ChannelParams
from .perception import (
    MAX_BER,
    ForwardShape,
    Metric,
    MetricPreset,
    PerceptionModel,
    Scheme,
    StreamProfile,
)
from .simkit import KINDS, ExperimentSpec, Scenario

_METRICS = [m.value for m in Metric]
_SCHEMES = [s.value for s in Scheme]
_POS = {"type": "number", "exclusiveMinimum": 0}
_GRID = {"type": "array", "items": {"type": "number"}}
_PROB = {"type": "number", "minimum": 0, "maximum": 1}

_SHAPE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["midpoint"],
    "properties": {
        "midpoint": _POS,
        "steepness": _POS,
        "floor": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    },
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["metric", "scheme", "channel", "streams", "presets"],
    "properties": {
        "metric": {"enum": _METRICS},
        "scheme": {"enum": _SCHEMES},
        "max_ber": {"type": "number", "exclusiveMinimum": 0, "maximum": MAX_BER},
        "channel": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "distance_m": _POS,
                "reference_distance_m": _POS,
                "pl0_db": {"type": "number"},
                "path_loss_exponent": _POS,
                "noise_dbm": {"type": "number"},
                "fading": {
                    "oneOf": [
                        {"const": "rayleigh"},
                        {"type": "array", "items": _POS, "minItems": 1},
                    ]
                },
            },
        },
        "streams": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "bits", "codeword"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "bits": {"type": "integer", "minimum": 1},
                    "codeword": {"type": "integer", "minimum": 1},
                    "shapes": {
                        "type": "object",
                        "propertyNames": {"enum": _METRICS},
                        "additionalProperties": _SHAPE,
                    },
                },
            },
        },
        "presets": {
            "type": "object",
            "propertyNames": {"enum": _METRICS},
            "additionalProperties": {
                "type": "object",
                "additionalProperties": False,
                "required": ["p_best", "p_worst_uncoded"],
                "properties": {
                    "p_best": _PROB,
                    "p_worst_uncoded": _PROB,
                    "semantic_values": {"type": "array", "items": _PROB},
                    "subset_perception": {"type": "array", "items": _PROB},
                    "stream_worst": {"type": "array", "items": _PROB},
                },
            },
        },
        "experiments": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "kind"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "kind": {"enum": list(KINDS)},
                    "scheme": {"enum": _SCHEMES},
                    "metric": {"enum": _METRICS},
                    "p_bar_grid": _GRID,
                    "power_budget_grid": _GRID,
                    "n_realizations": {"type": "integer", "minimum": 1},
                    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                    "methods": {
                        "type": "array",
                        "items": {"enum": ["unaware", "proportional", "bisection"]},
                        "minItems": 1,
                        "uniqueItems": True,
                    },
                    "psi_grid": _GRID,
                    "n_blocks": {"type": "integer", "minimum": 1},
                    "block_bits": {"type": "integer", "minimum": 1},
                },
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending location."""


def _where(path) -> str:
    return "/".join(str(p) for p in path) or "<root>"


@dataclass(frozen=True)
class Config:
    """A validated configuration document plus its source bytes."""

    doc: dict
    raw: bytes

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.raw).hexdigest()

    @property
    def metric(self) -> Metric:
        return Metric(self.doc["metric"])

    @property
    def scheme(self) -> Scheme:
        return Scheme(self.doc["scheme"])

    @property
    def channel(self) -> ChannelParams:
        ch = dict(self.doc["channel"])
        if isinstance(ch.get("fading"), list):
            ch["fading"] = tuple(ch["fading"])
        return ChannelParams(**ch)

    def preset(self, metric: Metric) -> MetricPreset:
        try:
            p = self.doc["presets"][metric.value]
        except KeyError:
            raise ConfigError(f"presets: no entry for metric {metric.value}") from None
        if "subset_perception" in p:
            return MetricPreset(
                metric=metric,
                p_best=p["p_best"],
                p_worst_uncoded=p["p_worst_uncoded"],
                subset_perception=tuple(p["subset_perception"]),
                stream_worst=tuple(p["stream_worst"]) if "stream_worst" in p else None,
            )
        if "semantic_values" not in p:
            raise ConfigError(f"presets/{metric.value}: need semantic_values or subset_perception")
        return MetricPreset.from_semantic_values(
            metric, p["p_best"], p["p_worst_uncoded"], p["semantic_values"], p.get("stream_worst")
        )

    def model(self, scheme: Scheme | None = None, metric: Metric | None = None) -> PerceptionModel:
        scheme = self.scheme if scheme is None else Scheme(scheme)
        metric = self.metric if metric is None else Metric(metric)
        preset = self.preset(metric)
        streams = []
        for i, s in enumerate(self.doc["streams"]):
            shape = s.get("shapes", {}).get(metric.value)
            streams.append(
                StreamProfile(
                    name=s["name"],
                    bits=s["bits"],
                    codeword=s["codeword"],
                    semantic_value=1.0 - preset.subset_perception[1 << i]
                    if i < preset.n_streams
                    else 0.0,
                    shape=ForwardShape(**shape) if shape else ForwardShape(0.01),
                )
            )
        return PerceptionModel(scheme, preset, tuple(streams), self.doc.get("max_ber", MAX_BER))

    def scenario(self, spec: ExperimentSpec) -> Scenario:
        return Scenario(self.model(spec.scheme, spec.metric), self.channel)

    def experiments(self) -> list[ExperimentSpec]:
        out = []
        for block in self.doc.get("experiments", []):
            kw = dict(block)
            kw.setdefault("scheme", self.doc["scheme"])
            kw.setdefault("metric", self.doc["metric"])
            out.append(ExperimentSpec(**kw))
        return out

    def experiment(self, name: str) -> ExperimentSpec:
        for spec in self.experiments():
            if spec.name == name:
                return spec
        names = ", ".join(s.name for s in self.experiments()) or "none"
        raise ConfigError(f"experiments: no block named {name!r} (have: {names})")


def _check_semantics(cfg: Config) -> None:
    """Build every object the document describes so invariants fail at load."""
    try:
        cfg.channel
    except ValueError as exc:
        raise ConfigError(f"channel: {exc}") from None
    for i, s in enumerate(cfg.doc["streams"]):
        if s["codeword"] < s["bits"]:
            raise ConfigError(f"streams/{i}: codeword must be >= bits")
    for name in cfg.doc["presets"]:
        metric = Metric(name)
        try:
            preset = cfg.preset(metric)
        except ValueError as exc:
            raise ConfigError(f"presets/{name}: {exc}") from None
        if preset.n_streams != len(cfg.doc["streams"]):
            raise ConfigError(
                f"presets/{name}: describes {preset.n_streams} streams, config has "
                f"{len(cfg.doc['streams'])}"
            )
        for scheme in Scheme:
            try:
                cfg.model(scheme, metric)
            except ValueError as exc:
                raise ConfigError(f"presets/{name}: {exc}") from None
    seen = set()
    for i, block in enumerate(cfg.doc.get("experiments", [])):
        if block["name"] in seen:
            raise ConfigError(f"experiments/{i}: duplicate name {block['name']!r}")
        seen.add(block["name"])
        try:
            spec = cfg.experiments()[i]
            if spec.metric.value not in cfg.doc["presets"]:
                raise ValueError(f"no preset for metric {spec.metric.value}")
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"experiments/{i}: {exc}") from None


def parse(raw: bytes) -> Config:
    try:
        doc = json.loads(raw)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"not valid JSON: {exc}") from None
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_where(e.absolute_path)}: {e.message}")
    cfg = Config(doc, raw)
    _check_semantics(cfg)
    return cfg


def load(path: str | Path | None = None) -> Config:
    """Load and validate a config; ``None`` loads the bundled default."""
    if path is None:
        raw = resources.files("sempower").joinpath("data/default_config.json").read_bytes()
    else:
        raw = Path(path).read_bytes()
    return parse(raw)


def dumps(cfg: Config) -> str:
    return json.dumps(cfg.doc, indent=2, sort_keys=True) + "\n"


def with_overrides(cfg: Config, **top_level) -> Config:
    doc = copy.deepcopy(cfg.doc)
    doc.update(top_level)
    return parse(json.dumps(doc).encode())
