"""Instance I/O, experiment orchestration and the command line interface."""

from .experiment import (
    ExperimentConfig,
    Report,
    config_from_dict,
    estimate_ratio,
    load_config,
    run_suite,
)
from .io import (
    ParseError,
    instance_from_dict,
    instance_to_dict,
    irsg_from_dict,
    irsg_to_dict,
    load_instance,
    load_irsg,
)

__all__ = [
    "ExperimentConfig",
    "ParseError",
    "Report",
    "config_from_dict",
    "estimate_ratio",
    "instance_from_dict",
    "instance_to_dict",
    "irsg_from_dict",
    "irsg_to_dict",
    "load_config",
    "load_instance",
    "load_irsg",
    "run_suite",
]
