# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Tests for the Hamiltonian flow, initial densities and the configuration Monte Carlo
"""

import math
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from lorentz_diffuse.config_scaling import ScalingParams, derive_scales  # noqa: E402
from lorentz_diffuse.errors import (  # noqa: E402
    BoundaryContactError,
    NumericGuardError,
    SamplingError,
    SpecError,
    StepSizeError,
)
from lorentz_diffuse.microdynamics import (  # noqa: E402
    BumpDensity,
    InitialDensity,
    PhaseState,
    backward_evolve,
    ensemble_positions,
    estimate_f,
    evolve,
    evolve_to,
    single_obstacle_deflection,
    step,
)
from lorentz_diffuse.obstacle_field import (  # noqa: E402
    ObstacleConfiguration,
    Region,
    sample_configuration,
)
from lorentz_diffuse.potentials_forces import PolynomialBump, build_force_context  # noqa: E402
from lorentz_diffuse.scattering_kinetics import deflection_angle  # noqa: E402


def _context(params, T=1.0, seed=3, power=3):
    U = PolynomialBump(1.0, 1.0, power=power)
    Lambda = PolynomialBump(0.0, params.epsilon)
    region = Region.padded_box([0.0, 0.0], [0.0, 0.0], 1.5 * params.speed * T + 1.0)
    config = sample_configuration(region, derive_scales(params).mu, seed)
    return build_force_context(config, U, Lambda, params)


class TestPhaseState(unittest.TestCase):
    """Test phase state validation"""

    def test_shapes(self):
        with self.assertRaises(SpecError):
            PhaseState(np.zeros(2), np.zeros(3))

    def test_non_finite(self):
        with self.assertRaises(NumericGuardError):
            PhaseState(np.array([math.nan, 0.0]), np.ones(2))

    def test_reversed(self):
        s = PhaseState([1.0, 2.0], [0.5, -0.5])
        np.testing.assert_array_equal(s.reversed().v, [-0.5, 0.5])
        self.assertAlmostEqual(s.speed, math.sqrt(0.5))


class TestHamiltonianFlow(unittest.TestCase):
    """Test the velocity Verlet flow through a quenched configuration"""

    def setUp(self):
        self.params = ScalingParams(epsilon=0.1, alpha=0.25)
        self.ctx = _context(self.params)
        self.s0 = PhaseState(np.zeros(2), np.array([1.0, 0.0]))

    def test_energy_drift(self):
        """Test the energy drift falls about fourfold when dt is halved"""
        coarse = evolve(self.s0, 1.0, self.ctx, dt=self.params.epsilon / 200.0)
        fine = evolve(self.s0, 1.0, self.ctx, dt=self.params.epsilon / 400.0)
        self.assertLess(coarse.energy_drift(), 1e-3)
        ratio = coarse.energy_drift() / fine.energy_drift()
        self.assertGreaterEqual(ratio, 3.5)
        self.assertLessEqual(ratio, 4.5)
        self.assertAlmostEqual(coarse.times[-1], 1.0)

    def test_adaptive_step(self):
        path = evolve(self.s0, 1.0, self.ctx)
        self.assertEqual(path.times[0], 0.0)
        self.assertEqual(path.times[-1], 1.0)
        self.assertTrue(np.all(np.diff(path.times) > 0.0))
        self.assertLess(path.energy_drift(), 1e-2)

    def test_reversibility(self):
        """Test U^{-T} U^{T} returns to the start for a fixed step"""
        dt = self.params.epsilon / 100.0
        forward = evolve_to(self.s0, 1.0, self.ctx, dt)
        back = backward_evolve(forward, 1.0, self.ctx, dt)
        np.testing.assert_allclose(back.x, self.s0.x, atol=1e-7)
        np.testing.assert_allclose(back.v, self.s0.v, atol=1e-7)

    def test_free_flight(self):
        """Test straight lines without obstacles"""
        config = sample_configuration(Region.box([-5.0, -5.0], [5.0, 5.0]), 0.0, 1)
        ctx = build_force_context(config, PolynomialBump(), PolynomialBump(0.0, 0.1), self.params)
        final = evolve_to(PhaseState([0.0, 0.0], [0.6, 0.8]), 2.0, ctx)
        np.testing.assert_allclose(final.x, [1.2, 1.6], atol=1e-12)

    def test_trajectory_csv(self):
        path = evolve(self.s0, 0.2, self.ctx, dt=0.005)
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "trajectory.csv"
            path.to_csv(out)
            data = np.loadtxt(out, delimiter=",", comments="#")
        self.assertEqual(data.shape, (path.times.size, 6))
        np.testing.assert_allclose(data[:, 5], path.energies)

    def test_step_size_guard(self):
        """Test a large fixed step inside the 2 eps shell is refused"""
        config = ObstacleConfiguration(
            centers=np.zeros((1, 2)),
            region=Region.box([-2.0, -2.0], [2.0, 2.0]),
            intensity=1.0,
            seed=0,
        )
        ctx = build_force_context(config, PolynomialBump(), PolynomialBump(0.0, 0.1), self.params)
        state = PhaseState([0.05, 0.0], [1.0, 0.0])
        with self.assertRaises(StepSizeError):
            step(state, 0.05, ctx)
        with self.assertRaises(StepSizeError):
            step(state, 0.0, ctx)
        step(state, 0.005, ctx)
        # far from every obstacle the step is free
        step(PhaseState([1.0, 1.0], [1.0, 0.0]), 0.05, ctx)

    def test_boundary_contact(self):
        config = ObstacleConfiguration(
            centers=np.zeros((1, 2)),
            region=Region.box([-1.0, -1.0], [1.0, 1.0]),
            intensity=1.0,
            seed=0,
        )
        ctx = build_force_context(config, PolynomialBump(), PolynomialBump(0.0, 0.1), self.params)
        with self.assertRaises(BoundaryContactError):
            evolve(PhaseState([0.5, 0.5], [1.0, 0.0]), 1.0, ctx)

    def test_invalid_time(self):
        with self.assertRaises(SpecError):
            evolve(self.s0, -1.0, self.ctx)
        with self.assertRaises(SpecError):
            evolve(self.s0, 1.0, self.ctx, dt=-0.1)


class TestSingleObstacle(unittest.TestCase):
    """Test direct integration against the deflection quadrature"""

    def test_matches_quadrature(self):
        U = PolynomialBump(1.0, 1.0, power=2)
        for rho in (0.2, 0.5, 0.8):
            expected = deflection_angle(rho, 1.0, 0.1, U)
            measured = single_obstacle_deflection(rho, 1.0, 0.1, U)
            self.assertAlmostEqual(measured, expected, delta=1e-5 * expected + 1e-7)

    def test_outside_support(self):
        self.assertEqual(single_obstacle_deflection(1.2, 1.0, 0.1, PolynomialBump()), 0.0)


class TestBumpDensity(unittest.TestCase):
    """Test the built-in initial density"""

    def test_normalization(self):
        self.assertAlmostEqual(
            BumpDensity([0.0, 0.0], 1.0, 2, 1.0).check_normalization(), 1.0, delta=1e-3
        )
        self.assertAlmostEqual(
            BumpDensity([0.5, 0.0, 0.0], 0.8, 3, 2.0).check_normalization(), 1.0, delta=1e-2
        )

    def test_velocity_integral(self):
        """Test int f0 dv equals the spatial marginal, with or without anisotropy"""
        f0 = BumpDensity([0.0, 0.0], 1.0, 2, 2.0, anisotropy=0.7)
        point = np.array([[0.3, -0.2]])
        phi = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
        v = 2.0 * np.column_stack([np.cos(phi), np.sin(phi)])
        integral = np.mean(f0.evaluate(np.repeat(point, 64, axis=0), v)) * 4.0 * math.pi
        self.assertAlmostEqual(integral, float(f0.spatial_marginal(point)[0]))

    def test_sampling(self):
        f0 = BumpDensity([1.0, -1.0], 0.5, 2, 1.0, anisotropy=0.6)
        x, v = f0.sample(np.random.default_rng(0), 20000)
        self.assertEqual(x.shape, (20000, 2))
        self.assertTrue(np.all(np.linalg.norm(x - [1.0, -1.0], axis=1) <= 0.5))
        np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0)
        # E[v1] = a/2 on the unit circle
        self.assertAlmostEqual(float(np.mean(v[:, 0])), 0.3, delta=0.02)

    def test_invalid(self):
        with self.assertRaises(SpecError):
            BumpDensity([0.0, 0.0], -1.0, 2)
        with self.assertRaises(SpecError):
            BumpDensity([0.0, 0.0], 1.0, 2, anisotropy=1.5)

    def test_sampling_guard(self):
        """Test a density that is zero everywhere exhausts the proposal budget"""

        class Empty(InitialDensity):
            def _evaluate(self, x, v):
                return np.zeros(x.shape[0])

            @property
            def bound(self):
                return 1.0

        with self.assertRaises(SamplingError):
            Empty(2, 1.0, [0.0, 0.0], [1.0, 1.0]).sample(
                np.random.default_rng(0), 10, max_proposals=1000
            )


class TestMonteCarlo(unittest.TestCase):
    """Test estimate_f and ensemble_positions"""

    def setUp(self):
        self.params = ScalingParams(epsilon=0.2, alpha=0.25)
        self.f0 = BumpDensity([0.0, 0.0], 1.0, 2, 1.0)

    def test_free_transport(self):
        """Test zero intensity gives f0(x - v t, v) with no spread"""
        x, v, t = np.array([0.3, 0.1]), np.array([0.6, 0.8]), 0.25
        estimate = estimate_f(x, v, t, self.f0, 4, self.params, seed=1, intensity=0.0)
        self.assertAlmostEqual(estimate.value, self.f0.evaluate(x - v * t, v))
        self.assertEqual(estimate.std_error, 0.0)
        self.assertEqual(estimate.n_used, 4)

    def test_time_zero(self):
        x, v = np.array([0.1, 0.1]), np.array([1.0, 0.0])
        estimate = estimate_f(x, v, 0.0, self.f0, 3, self.params, seed=2)
        self.assertAlmostEqual(estimate.value, self.f0.evaluate(x, v))

    def test_worker_independence(self):
        """Test the estimate is identical for one and two workers"""
        x, v = np.array([0.1, 0.0]), np.array([1.0, 0.0])
        serial = estimate_f(x, v, 0.2, self.f0, 4, self.params, seed=7, workers=1)
        parallel = estimate_f(x, v, 0.2, self.f0, 4, self.params, seed=7, workers=2)
        self.assertEqual(serial.value, parallel.value)
        self.assertEqual(serial.std_error, parallel.std_error)
        self.assertGreater(serial.value, 0.0)

    def test_invalid_arguments(self):
        with self.assertRaises(SpecError):
            estimate_f([0.0, 0.0], [1.0, 0.0], 0.1, self.f0, 1, self.params, seed=0)
        with self.assertRaises(SpecError):
            estimate_f([0.0, 0.0], [1.0, 0.0], -0.1, self.f0, 4, self.params, seed=0)

    def test_ensemble_free_transport(self):
        times = [0.0, 0.5, 1.0]
        ensemble = ensemble_positions(self.f0, times, 20, self.params, seed=3, intensity=0.0)
        self.assertEqual(ensemble.positions.shape, (3, 20, 2))
        np.testing.assert_allclose(
            ensemble.positions[2], ensemble.positions[0] + ensemble.velocities[0], atol=1e-12
        )
        self.assertTrue(np.all(ensemble.free))

    def test_standard_error_scaling(self):
        """Test the standard error falls like n^{-1/2}"""
        params = ScalingParams(epsilon=0.5, alpha=0.25)
        f0 = BumpDensity([0.0, 0.0], 2.0, 2, 1.0)
        x, v = np.zeros(2), np.array([1.0, 0.0])
        small = estimate_f(x, v, 1.0, f0, 200, params, seed=12, dt=0.025)
        large = estimate_f(x, v, 1.0, f0, 800, params, seed=12, dt=0.025)
        self.assertGreater(large.std_error, 0.0)
        self.assertAlmostEqual(small.std_error / large.std_error, 2.0, delta=0.4)

    def test_ensemble_speed_after_collisions(self):
        """Test particles outside every support have |v| = speed after scattering"""
        params = ScalingParams(epsilon=0.1, alpha=0.25)
        ensemble = ensemble_positions(self.f0, [0.0, 0.5, 1.0], 12, params, seed=6, intensity=10.0)
        later = ensemble.velocities[1:][ensemble.free[1:]]
        self.assertGreater(later.shape[0], 0)
        drift = np.abs(np.linalg.norm(later, axis=-1) - params.speed)
        self.assertLess(float(np.max(drift)), 1e-9)
        turned = np.linalg.norm(ensemble.velocities[-1] - ensemble.velocities[0], axis=-1)
        self.assertGreater(float(np.max(turned)), 1e-3)

    def test_ensemble_csv(self):
        ensemble = ensemble_positions(self.f0, [0.0, 0.5], 5, self.params, seed=4)
        self.assertTrue(np.all(np.linalg.norm(ensemble.positions[0], axis=1) <= 1.0))
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "ensemble.csv"
            ensemble.to_csv(out)
            data = np.loadtxt(out, delimiter=",", skiprows=1)
        self.assertEqual(data.shape, (10, 4))


if __name__ == "__main__":
    unittest.main()
