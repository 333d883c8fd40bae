"""Metrics, configuration, experiment orchestration and the command line."""
from .config import ExperimentConfig, load_experiment, load_scene, parse_experiment, parse_scene
from .estimators import ESTIMATORS, FitContext, fit_estimator
from .experiment import ResultsBundle, run_experiment
from .export import PlaneSpec, export_heatmap, plane_points
from .metrics import FDGrid, helmholtz_residual, nmse, residual_grid
