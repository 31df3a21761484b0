# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Diffusion coefficient experiments: the spectral value with the Hilbert hierarchy check,
and the Green-Kubo integral of the Landau SDE velocity autocorrelation.
"""

import logging
import math
from pathlib import Path

import numpy as np

from lorentz_diffuse.errors import SpecError
from lorentz_diffuse.experiments.base import ConvergenceTable, Experiment, ExperimentResult
from lorentz_diffuse.hydrodynamics import (
    build_hilbert_state,
    diffusion_closed_form,
    diffusion_spectral,
    diffusion_tensor,
    fit_decay_rate,
    green_kubo,
    hilbert_residuals,
    spectral_gap,
)
from lorentz_diffuse.scattering_kinetics import sde_vacf

logger = logging.getLogger(__name__)

HILBERT_TOL = 1e-10
D_PERTURBATION = 0.1
DECAY_TOLERANCE = 0.02
GK_SIGMAS = 3.0


class DiffusionExperiment(Experiment):
    """Spectral D, the full tensor and the Hilbert residuals at one wavevector"""

    name = "diffusion"
    description = "spectral diffusion coefficient and Hilbert hierarchy residuals"

    def _execute(self) -> ExperimentResult:
        params = self.params
        dim, speed = params.dim, params.speed
        B = self.spec.get_float("B", 1.0)
        if B <= 0.0:
            raise SpecError(f"B must be positive, got {B}")
        xi = np.array(self.spec.get_floats("wavevector", np.eye(dim)[0]))
        if xi.size != dim:
            raise SpecError(f"wavevector has {xi.size} components, dim is {dim}")

        estimate = diffusion_spectral(dim, speed, B)
        closed = diffusion_closed_form(dim, speed, B)
        tensor = diffusion_tensor(dim, speed, B)
        residuals = hilbert_residuals(build_hilbert_state(xi, 1.0, dim, speed, B))
        perturbed_D = (1.0 + D_PERTURBATION) * estimate.value
        perturbed = hilbert_residuals(build_hilbert_state(xi, 1.0, dim, speed, B, D=perturbed_D))
        predicted_defect = D_PERTURBATION * estimate.value * float(xi @ xi)

        table = ConvergenceTable("B")
        table.add(B, "D_spectral", closed, estimate.value)
        table.add(B, "hilbert_max_residual", 0.0, residuals.max_residual)
        table.add(B, "hilbert_perturbed_compatibility", predicted_defect, perturbed.compatibility)

        off_diagonal = tensor - np.diag(np.diag(tensor))
        checks = {
            "closed_form": abs(estimate.value - closed) < 1e-10,
            "isotropic_tensor": bool(
                np.allclose(np.diag(tensor), closed, rtol=0.0, atol=1e-10)
                and np.max(np.abs(off_diagonal)) < 1e-10
            ),
            "hilbert_residuals": residuals.max_residual < HILBERT_TOL,
            "hilbert_perturbation": math.isclose(
                perturbed.compatibility, predicted_defect, rel_tol=1e-8, abs_tol=1e-12
            ),
        }
        report = {
            "diffusion": estimate.to_dict(),
            "tensor": tensor.tolist(),
            "hilbert": residuals.to_dict(),
            "hilbert_perturbed": perturbed.to_dict(),
            "wavevector": xi.tolist(),
        }
        return ExperimentResult(table=table, report=report, checks=checks)


class GreenKuboExperiment(Experiment):
    """Velocity autocorrelation of the Landau SDE and its time integral"""

    name = "green-kubo"
    description = "Green-Kubo diffusion coefficient from Landau SDE paths"

    def _execute(self) -> ExperimentResult:
        params = self.params
        dim, speed = params.dim, params.speed
        B = self.spec.get_float("B", 1.0)
        T = self.spec.get_float("t_final", 10.0)
        dt = self.spec.get_float("dt", 1e-3)
        n_paths = self.spec.get_int("n_paths", 10_000)
        v0 = speed * np.eye(dim)[0]

        vacf = sde_vacf(v0, B, T, dt, self.spec.seed, n_paths)
        estimate = green_kubo(
            vacf.times,
            vacf.mean,
            dim,
            std_error=vacf.std_error,
            integral_std_error=vacf.integral_std_error,
            speed=speed,
            B=B,
        )
        gap = spectral_gap(dim, speed, B)
        decay = fit_decay_rate(vacf.times, vacf.mean, start=0.0, stop=min(T, 2.0 / gap))
        reference = diffusion_spectral(dim, speed, B).value

        table = ConvergenceTable("n_paths")
        table.add(n_paths, "D_green_kubo", reference, estimate.value, estimate.std_error)
        table.add(n_paths, "vacf_decay_rate", gap, decay.rate, decay.std_error)

        sigma = max(estimate.std_error, 1e-300)
        checks = {
            "within_3_sigma": abs(estimate.value - reference) <= GK_SIGMAS * sigma,
            "decay_rate": abs(decay.rate - gap) <= DECAY_TOLERANCE * gap,
        }
        report = {
            "diffusion": estimate.to_dict(),
            "spectral_D": reference,
            "decay_rate": decay.rate,
            "predicted_decay_rate": gap,
        }

        def write_vacf(path: Path) -> None:
            np.savetxt(
                path,
                np.column_stack([vacf.times, vacf.mean, vacf.std_error]),
                delimiter=",",
                header="t,vacf,std_error",
                comments="",
                fmt="%.17g",
            )

        return ExperimentResult(
            table=table, report=report, checks=checks, artifacts={"vacf.csv": write_vacf}
        )
