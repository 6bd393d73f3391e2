# -*- coding: utf-8 -*-
"""
This module contains ExperimentRunner class which runs the spectral, algebra and limit checks of an ExperimentConfig
and stores the verdicts in a run manifest (JSON and HTML) next to the CSV tables the checks measured.

Typical usage example:

    config = ExperimentConfig.from_experiment("A3", output_dir="runs")
    manifest = run_experiment(config)
    print(manifest.passed)

"""

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import List

import numpy as np
from json2html import json2html

from bandlab import __version__
from bandlab.analyzer.experiment_config import ExperimentConfig, check_name
from bandlab.checks import AlgebraCheck, LimitCheck, SpectralCheck, check_algebra, check_limit, check_spectra
from bandlab.errors import BandLabError, ConfigInvalidError, ModuleError

logger = logging.getLogger(__name__)


def jsonable(value):
    """ Plain-JSON image of measured values: complex numbers become [re, im], arrays become lists. """
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.name
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


@dataclass
class RunManifest:
    """ Record of one run.

    Attributes:
        experiment: experiment id
        seed: root seed
        config: the configuration echo, as written by ExperimentConfig.to_dict
        config_hash: sha256 of the canonical configuration
        version: bandlab version
        wall_time: seconds spent in the checks
        checks: one entry per declared check with verdict, arguments, measured values and run time
        artifacts: files written for the run
    """
    experiment: str
    seed: int
    config: dict
    config_hash: str
    version: str
    wall_time: float
    checks: List[dict]
    artifacts: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(entry["passed"] for entry in self.checks if entry["gating"])

    def to_dict(self) -> dict:
        data = asdict(self)
        data["passed"] = self.passed
        return data


class ExperimentRunner(object):
    """ Takes an ExperimentConfig and runs its checks. Output is returned as a RunManifest. """

    def __init__(self, config: ExperimentConfig):
        self.__config = config
        self.__results = []
        self.__tables = []
        self.result_filename = os.path.join(config.output_dir,
                                            "bandlab_{}_{}.json".format(config.experiment, config.seed))

    def run_check(self, check, kwargs=None, gating=True):
        """
        Runs a spectral, algebra or limit check and appends its verdict to the results list.

        Args:
            check: check definition
            kwargs: check keyword arguments
            gating: whether the verdict enters the overall result

        Raises:
            ModuleError: wrapping any BandLabError raised by the check
        """
        kwargs = {} if kwargs is None else kwargs
        seed = self.__config.seed
        started = time.perf_counter()

        try:
            if isinstance(check, SpectralCheck):
                passed, measured = check_spectra(check, seed, **kwargs)
            elif isinstance(check, AlgebraCheck):
                passed, measured = check_algebra(check, seed, **kwargs)
            elif isinstance(check, LimitCheck):
                passed, measured = check_limit(check, **kwargs)
            else:
                raise ValueError("check must be of type SpectralCheck, AlgebraCheck or LimitCheck.")
        except BandLabError as err:
            logger.error("%s raised %s: %s", check.name, err.code, err)
            raise ModuleError(err, self.__config.experiment, check_name(check), kwargs) from err

        self.append_result(passed, measured, check, kwargs, time.perf_counter() - started, gating)

    def append_result(self, result, measured, check, arguments=None, seconds=0.0, gating=True):
        """
        Appends check's result into the results list; a ``table`` entry of ``measured`` is kept for the CSV output.

        Args:
            result: check's verdict
            measured: dict of measured values
            check: check enum definition
            arguments: check's keyword arguments
            seconds: time spent in the check
            gating: whether the verdict enters the overall result
        """
        measured = dict(measured)
        table = measured.pop("table", None)
        if table is not None:
            self.__tables.append((len(self.__results), table.pop("name", check.name), table))

        logger.info("%s: %s", check_name(check), "PASS" if result else "FAIL")
        self.__results.append({"check": check_name(check), "passed": bool(result), "gating": bool(gating),
                               "arguments": jsonable(arguments or {}), "measured": jsonable(measured),
                               "seconds": seconds})

    def get_results(self):
        """ Get results list. """
        return self.__results

    def clear_results(self):
        """ Clear results list. """
        self.__results = []
        self.__tables = []

    def write_tables(self) -> List[str]:
        """ Writes every measured table as CSV; returns the file names. """
        files = []
        prefix = os.path.splitext(self.result_filename)[0]
        for index, name, table in self.__tables:
            filename = "{}_{:02d}_{}.csv".format(prefix, index, name.lower())
            np.savetxt(filename, np.asarray(table["rows"], dtype=float), delimiter=",",
                       header=",".join(table["columns"]), comments="", fmt="%.17g")
            files.append(filename)
        return files

    def run_checks(self) -> RunManifest:
        """ Runs the configured checks and writes the manifest, its HTML rendering and the CSV tables. """
        config = self.__config
        logger.info("Running experiment %s with seed %d (%d checks)", config.experiment, config.seed,
                    len(config.checks))
        self.clear_results()
        started = time.perf_counter()
        for spec in config.checks:
            self.run_check(spec.check, spec.arguments, spec.gating)
        wall_time = time.perf_counter() - started

        os.makedirs(config.output_dir, exist_ok=True)
        artifacts = self.write_tables()
        html_filename = self.result_filename.replace(".json", ".html")
        artifacts = [self.result_filename, html_filename] + artifacts
        manifest = RunManifest(experiment=config.experiment, seed=config.seed, config=config.to_dict(),
                               config_hash=config.content_hash(), version=__version__, wall_time=wall_time,
                               checks=list(self.__results), artifacts=artifacts)

        with open(self.result_filename, "w") as fp:
            json.dump(manifest.to_dict(), fp, indent=4)
        with open(html_filename, "w", encoding="utf-8") as fp:
            fp.write(json2html.convert(json=json.dumps(manifest.to_dict(), indent=4)))

        logger.info("Experiment %s finished in %.1f s: %s", config.experiment, wall_time,
                    "PASS" if manifest.passed else "FAIL")
        return manifest


def run_experiment(config) -> RunManifest:
    """ Runs an experiment from an ExperimentConfig or its dict form.

    Raises:
        ConfigInvalidError: if the configuration is empty or malformed
        ModuleError: if a check raises
    """
    if not isinstance(config, ExperimentConfig):
        if not config:
            raise ConfigInvalidError("Empty configuration.")
        config = ExperimentConfig.from_dict(config)
    return ExperimentRunner(config).run_checks()
