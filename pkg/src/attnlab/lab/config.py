"""Experiment configs: JSON files validated against the schema shipped in
``attnlab/schema/experiment.schema.json``. Unknown keys are rejected."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from attnlab.errors import FormatError, ParameterError

U64_MAX = 2**64 - 1


@lru_cache(maxsize=1)
def schema() -> dict:
    text = resources.files("attnlab").joinpath("schema/experiment.schema.json").read_text()
    return json.loads(text)


def validate_dict(d: dict) -> None:
    """Raise ParameterError listing every schema violation."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(d), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{where}: {e.message}")
        raise ParameterError("invalid experiment config:\n  " + "\n  ".join(lines))


@dataclass
class ExperimentConfig:
    """One experiment run. ``sections`` holds everything besides the name,
    seed and output directory, keyed as in the schema."""

    experiment: str
    seed: int | None = None
    out: str | None = None
    sections: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ParameterError("experiment config must be a JSON object")
        validate_dict(d)
        rest = {k: copy.deepcopy(v) for k, v in d.items() if k not in ("experiment", "seed", "out")}
        return cls(d["experiment"], d.get("seed"), d.get("out"), rest)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"experiment": self.experiment}
        if self.seed is not None:
            d["seed"] = self.seed
        if self.out is not None:
            d["out"] = self.out
        d.update(copy.deepcopy(self.sections))
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(d)

    def get(self, key, default=None):
        return self.sections.get(key, default)


def load_config(path) -> ExperimentConfig:
    """Read a config file. A ``report.json`` is accepted too: its embedded
    resolved config is used, so any report can be re-run as-is."""
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if isinstance(d, dict) and "report_version" in d:
        d = d["config"]
    return ExperimentConfig.from_dict(d)
