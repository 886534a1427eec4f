"""Experiment orchestration: config parsing, figure drivers and CSV output."""

from .config import DEFAULTS, KINDS, ExperimentConfig, emit_config, load_config, parse_config
from .csvio import read_csv, write_csv
from .experiments import (EXPERIMENTS, eigen_cdf_experiment, focusing_experiment,
                          run_experiment)

__all__ = ['DEFAULTS', 'KINDS', 'ExperimentConfig', 'emit_config', 'load_config',
           'parse_config', 'read_csv', 'write_csv', 'EXPERIMENTS', 'eigen_cdf_experiment',
           'focusing_experiment', 'run_experiment']
