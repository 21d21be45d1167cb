"""Adaptive flux, resistance, load and speed estimation for an induction motor
from regression equations built by filtering, stacking and mixing.

Modules: ``motor`` (plant, controller, RK4), ``filters``, ``drem``,
``electrical``, ``mechanical``, ``observers``, ``simulation`` (compiled
augmented system), ``config``, ``harness``, ``acceptance`` and ``cli``.
"""
from .config import ConfigError, ScenarioConfig, config_from_dict, load_config, preset
from .harness import Telemetry, emit_plot_data, read_telemetry, run_scenario
from .motor import ControllerGains, IntegrationFault, MotorParams

__all__ = [
    "ConfigError", "ControllerGains", "IntegrationFault", "MotorParams", "ScenarioConfig",
    "Telemetry", "config_from_dict", "emit_plot_data", "load_config", "preset", "read_telemetry",
    "run_scenario",
]
__version__ = "0.1.0"
