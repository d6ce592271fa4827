"""Datasets, experiment configs and the ``attnlab`` command-line runner."""
from attnlab.lab.config import ExperimentConfig, load_config, schema, validate_dict
from attnlab.lab.datasets import IdxData, LabeledPoints, MoonSpec, generate_moons, load_idx, make_moons, parse_idx
from attnlab.lab.runner import REGISTRY, csv_text, resolve, run_experiment

__all__ = [
    "REGISTRY",
    "ExperimentConfig",
    "IdxData",
    "LabeledPoints",
    "MoonSpec",
    "csv_text",
    "generate_moons",
    "load_config",
    "load_idx",
    "make_moons",
    "parse_idx",
    "resolve",
    "run_experiment",
    "schema",
    "validate_dict",
]
