# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Experiment plugin system: one Experiment subclass per command line subcommand
"""

from typing import Dict, Type

from lorentz_diffuse.errors import UnknownExperimentError
from lorentz_diffuse.experiments.base import (
    ConvergenceTable,
    Experiment,
    ExperimentResult,
    ExperimentSpec,
    load_experiment_spec,
    parse_experiment_spec,
)
from lorentz_diffuse.experiments.diffusion import DiffusionExperiment, GreenKuboExperiment
from lorentz_diffuse.experiments.heat import ConvergeHeatExperiment
from lorentz_diffuse.experiments.relaxation import RelaxExperiment
from lorentz_diffuse.experiments.scattering import (
    ConvergeOperatorExperiment,
    ConvergeThetaExperiment,
    ScatterTableExperiment,
)
from lorentz_diffuse.experiments.trajectory import TrajectoryExperiment

EXPERIMENTS: Dict[str, Type[Experiment]] = {
    cls.name: cls
    for cls in (
        ScatterTableExperiment,
        DiffusionExperiment,
        ConvergeThetaExperiment,
        ConvergeOperatorExperiment,
        ConvergeHeatExperiment,
        RelaxExperiment,
        GreenKuboExperiment,
        TrajectoryExperiment,
    )
}


def get_experiment(name: str) -> Type[Experiment]:
    """
    :raises UnknownExperimentError: for names that are not registered
    """
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise UnknownExperimentError(
            f"unknown subcommand {name!r}; choose from {', '.join(EXPERIMENTS)}"
        ) from None


__all__ = [
    "EXPERIMENTS",
    "ConvergenceTable",
    "Experiment",
    "ExperimentResult",
    "ExperimentSpec",
    "get_experiment",
    "load_experiment_spec",
    "parse_experiment_spec",
    "ConvergeHeatExperiment",
    "ConvergeOperatorExperiment",
    "ConvergeThetaExperiment",
    "DiffusionExperiment",
    "GreenKuboExperiment",
    "RelaxExperiment",
    "ScatterTableExperiment",
    "TrajectoryExperiment",
]
