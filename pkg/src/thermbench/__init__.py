"""Grey-box thermal-zone workbench: RC-network plant simulation, regression
identification under several sensor configurations, and receding-horizon
climate control over a discrete control set."""

__version__ = "0.1.0"

from .errors import (ConfigError, DivergenceError, HistoryUnderflowError,
                     NumericalError, ParameterError, ShapeError,
                     ThermbenchError)
from .regressors import RegressorSpec, Structure
from .simulator import SimConfig, TimeSeriesDataset, run_experiment
from .thermal_core import (ControlInput, Disturbance, HvacParams, PlantState,
                           RhParams, SeparatorParams, ZoneParams)

__all__ = [
    "ConfigError", "ControlInput", "Disturbance", "DivergenceError",
    "HistoryUnderflowError", "HvacParams", "NumericalError", "ParameterError",
    "PlantState", "RegressorSpec", "RhParams", "SeparatorParams", "ShapeError",
    "SimConfig", "Structure", "ThermbenchError", "TimeSeriesDataset",
    "ZoneParams", "run_experiment",
]
