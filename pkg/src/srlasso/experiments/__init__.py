"""Synthetic experiments on the square-root LASSO and the LASSO."""

from .config import (EXPERIMENTS, PROFILES, ExperimentConfig, config_from_dict,
                     default_config, load_config)
from .data import (DataModel, Instance, LambdaGrid, best_lambda, build_lambda_grid,
                   generate_instance, lambda_star, solve_path)
from .runner import COLUMNS, ExperimentResult, run_experiment

__all__ = ["EXPERIMENTS", "PROFILES", "ExperimentConfig", "config_from_dict", "default_config",
           "load_config", "DataModel", "Instance", "LambdaGrid", "best_lambda",
           "build_lambda_grid", "generate_instance", "lambda_star", "solve_path", "COLUMNS",
           "ExperimentResult", "run_experiment"]
