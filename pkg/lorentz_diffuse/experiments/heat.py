# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Diffusive limit of the jump process: particles released from the origin are compared with
the heat equation started from their own initial empirical measure.
"""

import logging
from typing import List

import numpy as np

from lorentz_diffuse.config_scaling import check_regime, derive_scales
from lorentz_diffuse.experiments.base import ConvergenceTable, Experiment, ExperimentResult
from lorentz_diffuse.hydrodynamics import (
    DensityField,
    diffusion_spectral,
    empirical_density,
    heat_solve,
    msd_fit,
)
from lorentz_diffuse.obstacle_field import replica_generator
from lorentz_diffuse.scattering_kinetics import (
    boltzmann_jump_ensemble,
    build_scattering_table,
    landau_coefficient_B,
)

logger = logging.getLogger(__name__)

DEFAULT_EPSILONS = (2e-1, 1e-1, 5e-2)
GRID_POINTS = 32
LOW_PASS = 4
BOX_WIDTHS = 6.0
FINAL_DISTANCE = 0.05
MSD_TOLERANCE = 0.1


def isotropic_velocities(rng: np.random.Generator, n: int, dim: int, speed: float):
    g = rng.standard_normal((n, dim))
    return speed * g / np.linalg.norm(g, axis=1, keepdims=True)


class ConvergeHeatExperiment(Experiment):
    """Grid L2 distance between the kinetic density and the heat prediction along eps"""

    name = "converge-heat"
    description = "jump process against the heat equation along an eps sweep"

    def _execute(self) -> ExperimentResult:
        base = self.params.replace(diffusive=True)
        if base.eta_exponent == 0.0:
            logger.warning("eta_exponent is 0: the sweep has no diffusive rescaling")
        regime = check_regime(base)
        U = self.spec.potential()
        dim, speed = base.dim, base.speed
        n = self.spec.get_int("n_particles", 10_000)
        T = self.spec.get_float("t_final", 1.0)
        times = np.linspace(0.0, T, 21)
        n_grid = self.spec.get_int("n_grid", 128)
        rng = replica_generator(self.spec.seed, 0, stream=1)
        x0 = np.zeros((n, dim))
        v0 = isotropic_velocities(rng, n, dim, speed)

        table = ConvergenceTable("epsilon")
        sweep = self.spec.epsilons(DEFAULT_EPSILONS)
        distances: List[float] = []
        t0_zero = True
        last_msd = None
        last_fields = None
        for eps in sweep:
            params = base.replace(epsilon=eps)
            scales = derive_scales(params)
            scattering = build_scattering_table(U, speed, params.coupling, n_grid)
            B = landau_coefficient_B(scattering, speed, eps, params.alpha)
            D = diffusion_spectral(dim, speed, B).value
            ensemble = boltzmann_jump_ensemble(
                x0,
                v0,
                times,
                scattering,
                self.spec.seed,
                transport_scale=scales.transport_scale,
                collision_scale=scales.collision_scale,
            )
            half = BOX_WIDTHS * np.sqrt(2.0 * D * T)
            template = DensityField(
                -half * np.ones(dim), half * np.ones(dim), np.zeros((GRID_POINTS,) * dim)
            )
            initial = empirical_density(ensemble.positions[0], template, LOW_PASS)
            kinetic = empirical_density(ensemble.positions[-1], template, LOW_PASS)
            heat = heat_solve(initial, D, T, check_resolution=False)
            distance = kinetic.distance(heat)
            t0_zero = t0_zero and initial.distance(heat_solve(initial, D, 0.0)) == 0.0
            msd = msd_fit(times, ensemble.positions, dim, window=(0.25 * T, T))

            distances.append(distance)
            table.add(eps, "heat_distance", 0.0, distance)
            table.add(eps, "D_msd", D, msd.value, msd.std_error)
            logger.info(f"eps={eps:.3g}: B={B:.5g}, D={D:.5g}, distance={distance:.4f}")
            last_msd, last_fields = (msd, D), (kinetic, heat)

        msd, D = last_msd
        checks = {
            "t0_distance_zero": t0_zero,
            "distance_decreasing": all(b < a for a, b in zip(distances, distances[1:])),
            "final_distance": distances[-1] < FINAL_DISTANCE,
            "msd_matches_spectral": abs(msd.value - D) <= MSD_TOLERANCE * D,
            "msd_diffusive": "non-diffusive" not in msd.flags,
        }
        report = {
            "distances": distances,
            "msd": msd.to_dict(),
            "spectral_D": D,
            "regime_exponent": regime.exponent,
            "regime_passed": regime.passed,
        }
        kinetic, heat = last_fields
        return ExperimentResult(
            table=table,
            report=report,
            checks=checks,
            artifacts={"density_kinetic.csv": kinetic.to_csv, "density_heat.csv": heat.to_csv},
        )
