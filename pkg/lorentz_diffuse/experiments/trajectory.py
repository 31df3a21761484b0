# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Microscopic trajectories through quenched obstacle fields next to jump-process paths at
the same scaling parameters.
"""

import logging

import numpy as np

from lorentz_diffuse.config_scaling import derive_scales
from lorentz_diffuse.experiments.base import ConvergenceTable, Experiment, ExperimentResult
from lorentz_diffuse.hydrodynamics import mean_squared_displacement
from lorentz_diffuse.microdynamics import (
    BumpDensity,
    PhaseState,
    ensemble_positions,
    evolve,
)
from lorentz_diffuse.obstacle_field import Region, sample_configuration
from lorentz_diffuse.potentials_forces import PolynomialBump, build_force_context
from lorentz_diffuse.scattering_kinetics import (
    boltzmann_jump_ensemble,
    build_scattering_table,
)

logger = logging.getLogger(__name__)

ENERGY_DRIFT_LIMIT = 1e-3
SPEED_DRIFT_LIMIT = 1e-9


class TrajectoryExperiment(Experiment):
    """One recorded Hamiltonian path plus microscopic and kinetic ensembles"""

    name = "trajectory"
    description = "dump microscopic and kinetic trajectories"

    def _execute(self) -> ExperimentResult:
        params = self.params
        dim, speed, eps = params.dim, params.speed, params.epsilon
        U = self.spec.potential()
        Lambda = self.spec.mean_field() or PolynomialBump(0.0, eps * U.support_radius)
        T = self.spec.get_float("t_final", 1.0)
        dt = self.spec.get_float("dt")
        n = self.spec.get_int("n_particles", 20)
        seed = self.spec.seed
        scales = derive_scales(params)

        v0 = speed * np.eye(dim)[0]
        reach = max(eps * U.support_radius, Lambda.support_radius)
        region = Region.padded_box(np.zeros(dim), np.zeros(dim), 1.5 * speed * T + 2 * reach)
        config = sample_configuration(region, scales.mu, seed)
        ctx = build_force_context(config, U, Lambda, params, scales)
        path = evolve(PhaseState(np.zeros(dim), v0), T, ctx, dt)
        drift = path.energy_drift()

        times = np.linspace(0.0, T, 11)
        f0 = BumpDensity(np.zeros(dim), 0.5, dim, speed)
        # the ensemble keeps the adaptive step so speeds settle after each passage
        micro = ensemble_positions(
            f0, times, n, params, seed, U=U, Lambda=Lambda, workers=self.workers
        )
        micro_speeds = np.linalg.norm(micro.velocities[micro.free], axis=-1)
        micro_drift = float(np.max(np.abs(micro_speeds - speed), initial=0.0))
        scattering = build_scattering_table(U, speed, params.coupling)
        kinetic = boltzmann_jump_ensemble(
            micro.positions[0],
            micro.velocities[0],
            times,
            scattering,
            seed,
            transport_scale=scales.transport_scale,
            collision_scale=scales.collision_scale,
        )
        speed_drift = float(
            np.max(np.abs(np.linalg.norm(kinetic.velocities, axis=-1) - speed))
        )
        msd_micro = mean_squared_displacement(micro.positions)
        msd_kinetic = mean_squared_displacement(kinetic.positions)

        table = ConvergenceTable("t")
        for t, a, b in zip(times, msd_kinetic, msd_micro):
            table.add(t, "msd", a, b)
        table.add(T, "energy_drift", 0.0, drift)
        table.add(T, "kinetic_speed_drift", 0.0, speed_drift)
        table.add(T, "micro_speed_drift", 0.0, micro_drift)

        checks = {
            "energy_conserved": drift < ENERGY_DRIFT_LIMIT,
            "kinetic_speed_conserved": speed_drift < SPEED_DRIFT_LIMIT,
        }
        # a mean field bends paths between obstacles too
        if self.spec.mean_field() is None:
            checks["micro_speed_conserved"] = micro_drift < SPEED_DRIFT_LIMIT
        report = {
            "obstacles": config.count,
            "energy_drift": drift,
            "kinetic_speed_drift": speed_drift,
            "micro_speed_drift": micro_drift,
            "free_fraction_final": float(np.mean(micro.free[-1])),
        }
        return ExperimentResult(
            table=table,
            report=report,
            checks=checks,
            artifacts={"trajectory.csv": path.to_csv, "ensemble.csv": micro.to_csv},
        )
