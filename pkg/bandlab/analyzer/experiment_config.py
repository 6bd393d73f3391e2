# -*- coding: utf-8 -*-
"""
This module holds ExperimentConfig, the serializable description of a run: an experiment id, the root seed, the
output directory and the list of checks with their keyword arguments.

JSON form::

    {"experiment": "A3", "seed": 7, "output_dir": "runs",
     "checks": [{"check": "AlgebraCheck.GRASSMANN_DETERMINANT", "arguments": {"count": 10}}]}

Complex arguments (``xi``, ``xi_points``, ``target``) are written as [re, im] pairs.

Typical usage example:

    config = ExperimentConfig.from_experiment("A6", output_dir="runs")
    same = ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict())))

"""
from __future__ import annotations

import copy
import hashlib
import importlib.util
import json
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from bandlab.checks import AlgebraCheck, LimitCheck, SpectralCheck
from bandlab.errors import ConfigInvalidError

CHECK_FAMILIES = (SpectralCheck, AlgebraCheck, LimitCheck)
COMPLEX_SCALARS = {"target"}
COMPLEX_VECTORS = {"xi"}
COMPLEX_MATRICES = {"xi_points"}
CONFIG_KEYS = {"experiment", "seed", "output_dir", "checks"}
CHECK_KEYS = {"check", "arguments", "gating"}


def check_name(check: Enum) -> str:
    return "{}.{}".format(type(check).__name__, check.name)


def resolve_check(name: str) -> Enum:
    """ Finds a check by ``Family.NAME`` or by its bare name.

    Raises:
        ConfigInvalidError: if no registered check has that name
    """
    family, _, member = name.rpartition(".")
    for enum in CHECK_FAMILIES:
        if family and family != enum.__name__:
            continue
        if member in enum.__members__:
            return enum[member]
    raise ConfigInvalidError("Unknown check {!r}.".format(name), check=name)


def _to_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigInvalidError("Complex numbers are written as [re, im], got {!r}.".format(value))
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def _encode_complex(value: complex) -> list:
    value = complex(value)
    return [value.real, value.imag]


def _normalize(arguments: dict) -> dict:
    normalized = copy.deepcopy(arguments)
    for key, value in normalized.items():
        if key in COMPLEX_SCALARS:
            normalized[key] = _to_complex(value)
        elif key in COMPLEX_VECTORS:
            normalized[key] = [_to_complex(v) for v in value]
        elif key in COMPLEX_MATRICES:
            normalized[key] = [[_to_complex(v) for v in row] for row in value]
    return normalized


def _encode(arguments: dict) -> dict:
    encoded = {}
    for key, value in arguments.items():
        if key in COMPLEX_SCALARS:
            encoded[key] = _encode_complex(value)
        elif key in COMPLEX_VECTORS:
            encoded[key] = [_encode_complex(v) for v in value]
        elif key in COMPLEX_MATRICES:
            encoded[key] = [[_encode_complex(v) for v in row] for row in value]
        else:
            encoded[key] = copy.deepcopy(value)
    return encoded


@dataclass
class CheckSpec:
    """ One check of an experiment with its keyword arguments; ``gating`` checks decide the exit code. """
    check: Enum
    arguments: dict = field(default_factory=dict)
    gating: bool = True

    def __post_init__(self):
        if not isinstance(self.check, CHECK_FAMILIES):
            raise ConfigInvalidError("{!r} is not a registered check.".format(self.check))
        if not isinstance(self.arguments, dict):
            raise ConfigInvalidError("Arguments of {} must be a mapping.".format(check_name(self.check)))
        unknown = set(self.arguments) - set(self.check.value.defaults)
        if unknown:
            raise ConfigInvalidError("Unknown arguments for {}: {}".format(check_name(self.check), sorted(unknown)),
                                     check=check_name(self.check))
        self.arguments = _normalize(self.arguments)

    def to_dict(self) -> dict:
        data = {"check": check_name(self.check), "arguments": _encode(self.arguments)}
        if not self.gating:
            data["gating"] = False
        return data

    @classmethod
    def from_dict(cls, data) -> "CheckSpec":
        if not isinstance(data, dict):
            raise ConfigInvalidError("A check entry must be a mapping, got {!r}.".format(data))
        unknown = set(data) - CHECK_KEYS
        if unknown or "check" not in data:
            raise ConfigInvalidError("Check entries need 'check' and accept only {}; got {}".format(
                sorted(CHECK_KEYS), sorted(data)))
        return cls(check=resolve_check(data["check"]), arguments=data.get("arguments", {}),
                   gating=bool(data.get("gating", True)))


@dataclass
class ExperimentConfig:
    """ Everything a run depends on.

    Attributes:
        experiment: experiment id, one of the ids in bandlab.config or a custom name
        seed: root seed, 0 <= seed < 2^64
        checks: non-empty list of CheckSpec
        output_dir: directory receiving the manifest and CSV files
    """
    experiment: str
    seed: int
    checks: List[CheckSpec]
    output_dir: str = "."

    def __post_init__(self):
        if not isinstance(self.experiment, str) or not self.experiment:
            raise ConfigInvalidError("experiment must be a non-empty string.")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigInvalidError("seed must be an integer in [0, 2^64), got {!r}.".format(self.seed))
        if not self.checks:
            raise ConfigInvalidError("Experiment {} declares no checks.".format(self.experiment),
                                     experiment=self.experiment)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, "output_dir": self.output_dir,
                "checks": [spec.to_dict() for spec in self.checks]}

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        """
        Raises:
            ConfigInvalidError: on unknown or missing keys, unknown checks or arguments, and empty check lists
        """
        if not isinstance(data, dict) or not data:
            raise ConfigInvalidError("Empty configuration.")
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ConfigInvalidError("Unknown configuration keys: {}".format(sorted(unknown)))
        missing = {"experiment", "seed", "checks"} - set(data)
        if missing:
            raise ConfigInvalidError("Missing configuration keys: {}".format(sorted(missing)))
        if not isinstance(data["checks"], list):
            raise ConfigInvalidError("checks must be a list.")
        return cls(experiment=data["experiment"], seed=data["seed"],
                   checks=[CheckSpec.from_dict(entry) for entry in data["checks"]],
                   output_dir=data.get("output_dir", "."))

    def content_hash(self) -> str:
        """ sha256 of the canonical JSON form, output directory excluded. """
        data = self.to_dict()
        data.pop("output_dir")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf-8")).hexdigest()

    @classmethod
    def from_checks(cls, experiment: str, seed: int, checks, output_dir: str = ".",
                    non_gating=()) -> "ExperimentConfig":
        """ Builds a config from ``(check, kwargs)`` tuples as listed in a config module. """
        specs = []
        for entry in checks:
            check, kwargs = (entry[0], entry[1]) if len(entry) > 1 else (entry[0], {})
            specs.append(CheckSpec(check=check, arguments=kwargs, gating=experiment not in non_gating))
        return cls(experiment=experiment, seed=seed, checks=specs, output_dir=output_dir)

    @classmethod
    def from_experiment(cls, experiment: str, seed: Optional[int] = None,
                        output_dir: str = ".") -> "ExperimentConfig":
        """ One of the default experiments of bandlab.config. """
        import bandlab.config as cfg

        if experiment not in cfg.experiments:
            raise ConfigInvalidError("Unknown experiment {!r}; known: {}".format(experiment, sorted(cfg.experiments)))
        return cls.from_checks(experiment, cfg.seed if seed is None else seed, cfg.experiments[experiment],
                               output_dir, cfg.non_gating)


def load_config(path: str) -> ExperimentConfig:
    """ Reads a ``.json`` ExperimentConfig or a ``.py`` module defining ``experiment``, ``seed`` and ``checks``.

    Raises:
        ConfigInvalidError: if the file cannot be read or does not describe a valid experiment
    """
    path = os.path.abspath(path)
    if path.endswith(".json"):
        try:
            with open(path) as fp:
                data = json.load(fp)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigInvalidError("Cannot read {}: {}".format(path, err)) from err
        return ExperimentConfig.from_dict(data)

    if path.endswith(".py"):
        module_name = os.path.splitext(os.path.basename(path))[0]
        try:
            module_spec = importlib.util.spec_from_file_location(module_name, path)
            cfg = importlib.util.module_from_spec(module_spec)
            module_spec.loader.exec_module(cfg)
        except (ImportError, OSError, SyntaxError) as err:
            raise ConfigInvalidError("Cannot load {}: {}".format(path, err)) from err
        missing = [name for name in ("experiment", "seed", "checks") if not hasattr(cfg, name)]
        if missing:
            raise ConfigInvalidError("{} does not define {}".format(path, ", ".join(missing)))
        return ExperimentConfig.from_checks(cfg.experiment, cfg.seed, cfg.checks, getattr(cfg, "output_dir", "."),
                                            getattr(cfg, "non_gating", ()))

    raise ConfigInvalidError("Configuration files are .json or .py, got {}".format(path))
