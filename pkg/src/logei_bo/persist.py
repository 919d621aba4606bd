"""Serialization: float formatting, config schema, manifests, trial streams."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema
import numpy as np

from .acquisition import Variant
from .bo import BOConfig, TrialRecord
from .errors import DomainError
from .gp import GPHyperparams
from .oracle import GENERATOR_NAME, QuadratureConfig


def fmt17(value: float) -> str:
    """Decimal text with 17 significant digits (round-trips any double)."""
    v = float(value)
    if not math.isfinite(v):
        return repr(v)
    if v != 0 and not 1e-4 <= abs(v) < 1e16:
        return np.format_float_scientific(v, precision=16, unique=False)
    return np.format_float_positional(v, precision=17, unique=False, fractional=False)


_POS_INT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "logei-bo optimize config",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "acquisition": {"enum": ["ei", "logei", "logofei"]},
        "init_design_size": _POS_INT,
        "max_evaluations": _POS_INT,
        "candidate_pool": _POS_INT,
        "local_refinement_steps": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "tune_budget": _POS_INT,
        "maximize": {"type": "boolean"},
        "record_timing": {"type": "boolean"},
        "gp_hyperparams": {
            "type": "object",
            "additionalProperties": False,
            "required": ["length_scales", "signal_variance", "noise_variance"],
            "properties": {
                "length_scales": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "number", "exclusiveMinimum": 0},
                },
                "signal_variance": {"type": "number", "exclusiveMinimum": 0},
                "noise_variance": {"type": "number", "minimum": 0},
            },
        },
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "node_count": {"type": "integer", "minimum": 16},
                "mc_samples": {"type": "integer", "minimum": 10000},
                "mc_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
        },
    },
}


class ConfigError(DomainError):
    """Config does not match :data:`CONFIG_SCHEMA`; ``pointer`` locates the bad field."""

    def __init__(self, message: str, pointer: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


def _pointer(path: Iterable) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def validate_config(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            if extra:
                path = path + [extra[0]]
                raise ConfigError(f"unknown field {extra[0]!r}", _pointer(path))
        raise ConfigError(err.message, _pointer(path))


@dataclass
class RunConfig:
    """Everything ``optimize`` needs besides the problem name."""

    bo: BOConfig
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    record_timing: bool = False

    def to_dict(self) -> dict:
        bo = self.bo
        out = {
            "acquisition": bo.acquisition.value,
            "init_design_size": bo.init_design_size,
            "max_evaluations": bo.max_evaluations,
            "candidate_pool": bo.candidate_pool,
            "local_refinement_steps": bo.local_refinement_steps,
            "seed": int(bo.seed),
            "tune_budget": bo.tune_budget,
            "maximize": bo.maximize,
            "record_timing": self.record_timing,
            "quadrature": self.quadrature.to_dict(),
        }
        if bo.hyperparams is not None:
            out["gp_hyperparams"] = bo.hyperparams.to_dict()
        return out

    @classmethod
    def from_dict(cls, raw: dict, seed: int | None = None) -> RunConfig:
        """Validate ``raw`` and build a config; ``seed`` overrides ``raw["seed"]``."""
        validate_config(raw)
        kwargs = {
            k: raw[k]
            for k in (
                "acquisition",
                "init_design_size",
                "max_evaluations",
                "candidate_pool",
                "local_refinement_steps",
                "tune_budget",
                "maximize",
                "seed",
            )
            if k in raw
        }
        if seed is not None:
            kwargs["seed"] = seed
        if "acquisition" in kwargs:
            kwargs["acquisition"] = Variant.parse(kwargs["acquisition"])
        if "gp_hyperparams" in raw:
            kwargs["hyperparams"] = GPHyperparams.from_dict(raw["gp_hyperparams"])
        try:
            bo = BOConfig(**kwargs)
        except DomainError as exc:
            raise ConfigError(str(exc), "") from None
        quad = QuadratureConfig(**raw.get("quadrature", {}))
        return cls(bo, quad, bool(raw.get("record_timing", False)))


@dataclass
class RunManifest:
    problem: str
    config: dict
    seed: int
    artifact_version: str
    generator: str = GENERATOR_NAME
    started_at: str = ""
    finished_at: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunManifest:
        raw = json.loads(text)
        return cls(**raw)


def write_jsonl(path: Path, records: Sequence[TrialRecord], timing: bool) -> None:
    with Path(path).open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(timing), allow_nan=False) + "\n")


def read_jsonl(path: Path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(path_or_file, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (float, np.floating)):
            return fmt17(v)
        return str(v)

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([cell(v) for v in row])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with Path(path_or_file).open("w", newline="") as fh:
            emit(fh)
