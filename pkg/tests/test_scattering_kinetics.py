# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Tests for deflection tables, the Landau coefficient and the kinetic processes
"""

import json
import math
import os
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from lorentz_diffuse.errors import NumericGuardError, ProfileError, SpecError  # noqa: E402
from lorentz_diffuse.hydrodynamics import sphere_average  # noqa: E402
from lorentz_diffuse.potentials_forces import PolynomialBump  # noqa: E402
from lorentz_diffuse.scattering_kinetics import (  # noqa: E402
    BUMP2_GRAZING_B,
    KineticParticle,
    LandauCoefficientCache,
    ScatteringTable,
    apply_boltzmann,
    apply_landau,
    boltzmann_eigenvalues,
    boltzmann_jump_ensemble,
    boltzmann_jump_evolve,
    build_scattering_table,
    bump2_grazing_B,
    chebyshev_lobatto,
    collision_integral_at,
    deflection,
    deflection_angle,
    extrapolate_B,
    grazing_deflection,
    grazing_limit_B,
    landau_coefficient_B,
    landau_sde_evolve,
    operator_mismatch,
    predicted_operator_mismatch,
    reflect,
    scattering_direction,
    sde_vacf,
)
from lorentz_diffuse.spherical_field import SphericalField  # noqa: E402


def _bump2_theta1(rho, speed):
    return 16.0 * rho * (1.0 - rho * rho) ** 1.5 / (3.0 * speed**2)


class TestDeflection(unittest.TestCase):
    """Test the deflection angle quadrature"""

    def setUp(self):
        self.U = PolynomialBump(1.0, 1.0, power=2)

    def test_trivial_cases(self):
        self.assertEqual(deflection_angle(0.5, 1.0, 0.0, self.U), 0.0)
        self.assertEqual(deflection_angle(1.0, 1.0, 0.3, self.U), 0.0)
        with self.assertRaises(SpecError):
            deflection_angle(1.5, 1.0, 0.1, self.U)
        with self.assertRaises(SpecError):
            deflection_angle(0.5, 0.0, 0.1, self.U)

    def test_grazing_closed_form(self):
        for speed in (1.0, 2.0):
            for rho in (0.1, 0.4, 0.9):
                self.assertAlmostEqual(
                    grazing_deflection(rho, speed, self.U), _bump2_theta1(rho, speed), places=10
                )

    def test_weak_coupling_limit(self):
        """Test theta / coupling approaches theta_1"""
        coupling = 1e-4
        for rho in (0.2, 0.6):
            ratio = deflection_angle(rho, 1.0, coupling, self.U) / coupling
            self.assertAlmostEqual(ratio / _bump2_theta1(rho, 1.0), 1.0, delta=1e-3)

    def test_reflection_regime(self):
        """Test a barrier above the kinetic energy reflects head-on particles"""
        with self.assertLogs("lorentz_diffuse.scattering_kinetics", level="WARNING"):
            result = deflection(0.05, 1.0, 2.0, self.U)
        self.assertTrue(result.reflected)
        self.assertAlmostEqual(deflection(0.0, 1.0, 2.0, self.U).theta, math.pi)
        self.assertFalse(deflection(0.05, 1.0, 0.2, self.U).reflected)

    def test_grazing_limit_B(self):
        self.assertAlmostEqual(grazing_limit_B(self.U, 1.0), BUMP2_GRAZING_B, places=9)
        self.assertAlmostEqual(grazing_limit_B(self.U, 2.0), bump2_grazing_B(2.0), places=9)


class TestScatteringTable(unittest.TestCase):
    """Test the tabulated deflection"""

    @classmethod
    def setUpClass(cls):
        cls.U = PolynomialBump(1.0, 1.0, power=2)
        cls.table = build_scattering_table(cls.U, 1.0, 0.1)

    def test_nodes(self):
        nodes = chebyshev_lobatto(64, 2.0)
        self.assertEqual(nodes[0], 0.0)
        self.assertAlmostEqual(nodes[-1], 2.0)
        self.assertTrue(np.all(np.diff(nodes) > 0.0))

    def test_grid_guard(self):
        with self.assertRaises(SpecError):
            build_scattering_table(self.U, 1.0, 0.1, n_grid=32)

    def test_interpolation(self):
        """Test off-grid values against direct quadrature"""
        for rho in (0.013, 0.377, 0.5, 0.861, 0.99):
            self.assertAlmostEqual(
                self.table(rho), deflection_angle(rho, 1.0, 0.1, self.U), delta=1e-6
            )
        self.assertEqual(self.table(1.0), 0.0)
        self.assertEqual(self.table(3.0), 0.0)
        self.assertAlmostEqual(self.table(-0.5), self.table(0.5))

    def test_lookup(self):
        rho = np.linspace(-1.2, 1.2, 101)
        np.testing.assert_allclose(self.table.lookup(rho), self.table(rho), atol=1e-5)

    def test_flags(self):
        self.assertTrue(self.table.continuous)
        self.assertFalse(self.table.reflected)
        self.assertLess(self.table.max_theta, 0.5 * math.pi)

    def test_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "table.csv"
            self.table.to_csv(path)
            loaded = ScatteringTable.from_csv(path)
        np.testing.assert_array_equal(loaded.theta, self.table.theta)
        np.testing.assert_array_equal(loaded.rho_grid, self.table.rho_grid)
        self.assertEqual(loaded.coupling, 0.1)
        self.assertEqual(loaded.potential_id, "bump2")

    def test_csv_missing(self):
        with self.assertRaises(SpecError):
            ScatteringTable.from_csv("/nonexistent/table.csv")


class TestLandauCoefficient(unittest.TestCase):
    """Test B(eps) and its limit"""

    def test_approaches_grazing_limit(self):
        U = PolynomialBump(1.0, 1.0, power=2)
        eps, alpha = 1e-8, 0.25
        table = build_scattering_table(U, 1.0, eps**alpha)
        B = landau_coefficient_B(table, 1.0, eps, alpha)
        self.assertAlmostEqual(B / BUMP2_GRAZING_B, 1.0, delta=0.05)

    def test_extrapolation(self):
        """Test the power fit recovers the constant term exactly"""
        alpha = 0.25
        eps = [1e-2, 1e-3, 1e-4]
        values = [1.5 + 0.3 * e**alpha - 0.2 * e ** (2 * alpha) for e in eps]
        self.assertAlmostEqual(extrapolate_B(eps, values, alpha), 1.5, places=10)


class TestLandauCoefficientCache(unittest.TestCase):
    """Test the B* cache"""

    def test_cache_save_and_load(self):
        """Test a stored value is returned by a new cache instance"""
        with tempfile.NamedTemporaryFile(suffix=".json", delete=False) as f:
            cache_file = f.name
        os.remove(cache_file)
        try:
            cache = LandauCoefficientCache(cache_file)
            self.assertIsNone(cache.get("bump2", 0.25, 1.0))
            cache.put("bump2", 0.25, 1.0, 1.4447)
            self.assertEqual(LandauCoefficientCache(cache_file).get("bump2", 0.25, 1.0), 1.4447)
            self.assertIsNone(cache.get("bump2", 0.3, 1.0))
        finally:
            if os.path.exists(cache_file):
                os.remove(cache_file)

    def test_read_only_cache(self):
        with tempfile.TemporaryDirectory() as tmp:
            cache_file = Path(tmp) / "bstar.json"
            cache = LandauCoefficientCache(cache_file, read_only_cache=True)
            cache.put("bump2", 0.25, 1.0, 1.0)
            self.assertFalse(cache_file.exists())

    def test_cache_invalid_json(self):
        """Test a corrupt file is ignored"""
        with tempfile.NamedTemporaryFile(mode="w", suffix=".json", delete=False) as f:
            f.write("not valid json {")
            cache_file = f.name
        try:
            cache = LandauCoefficientCache(cache_file)
            self.assertIsNone(cache.get("bump2", 0.25, 1.0))
            cache.put("bump2", 0.25, 1.0, 2.0)
            with open(cache_file) as f:
                data = json.load(f)
            self.assertEqual(len(data["entries"]), 1)
        finally:
            os.remove(cache_file)

    def test_limit_B_uses_cache(self):
        """Test limit_B returns a cached value without computing tables"""
        with tempfile.TemporaryDirectory() as tmp:
            cache = LandauCoefficientCache(Path(tmp) / "bstar.json")
            cache.put("bump2", 0.25, 1.0, 42.0)
            self.assertEqual(cache.limit_B(PolynomialBump(), 0.25, 1.0), 42.0)

    def test_limit_B_computes(self):
        with tempfile.TemporaryDirectory() as tmp:
            cache = LandauCoefficientCache(Path(tmp) / "bstar.json")
            value = cache.limit_B(PolynomialBump(), 0.25, 1.0, epsilons=(1e-6, 1e-8, 1e-10))
            self.assertAlmostEqual(value / BUMP2_GRAZING_B, 1.0, delta=0.01)
            self.assertEqual(cache.get("bump2", 0.25, 1.0), value)


class TestCollisionGeometry(unittest.TestCase):
    """Test reflections through omega"""

    def test_two_dimensions(self):
        v = np.array([2.0, 0.0])
        omega = scattering_direction(v, 0.3, 0.4)
        self.assertAlmostEqual(np.linalg.norm(omega), 1.0)
        out = reflect(v, omega)
        self.assertAlmostEqual(np.linalg.norm(out), 2.0)
        self.assertAlmostEqual(math.atan2(out[1], out[0]), 0.4)
        out = reflect(v, scattering_direction(v, -0.3, 0.4))
        self.assertAlmostEqual(math.atan2(out[1], out[0]), -0.4)

    def test_three_dimensions(self):
        v = np.array([0.0, 0.6, 0.8])
        for azimuth in (0.0, 1.0, 4.0):
            out = reflect(v, scattering_direction(v, 0.5, 1.1, azimuth=azimuth))
            self.assertAlmostEqual(np.linalg.norm(out), 1.0)
            self.assertAlmostEqual(math.acos(float(out @ v)), 1.1)

    def test_invalid_angle(self):
        with self.assertRaises(SpecError):
            scattering_direction(np.array([1.0, 0.0]), 0.1, 4.0)


class TestJumpProcess(unittest.TestCase):
    """Test the linear Boltzmann jump process"""

    @classmethod
    def setUpClass(cls):
        cls.U = PolynomialBump(1.0, 1.0, power=2)
        cls.table = build_scattering_table(cls.U, 1.0, 0.3)

    def test_speed_and_counts(self):
        n = 4000
        v0 = np.tile([1.0, 0.0], (n, 1))
        ensemble = boltzmann_jump_ensemble(np.zeros((n, 2)), v0, [0.0, 2.5, 5.0], self.table, 3)
        speeds = np.linalg.norm(ensemble.velocities, axis=-1)
        self.assertLess(float(np.max(np.abs(speeds - 1.0))), 1e-12)
        # rate 2 * collision_scale * speed = 2, so 10 collisions on average by t = 5
        self.assertAlmostEqual(float(np.mean(ensemble.n_collisions)), 10.0, delta=0.25)
        np.testing.assert_array_equal(ensemble.positions[0], np.zeros((n, 2)))

    def test_deterministic(self):
        x0, v0 = np.zeros((50, 2)), np.tile([0.0, 1.0], (50, 1))
        a = boltzmann_jump_ensemble(x0, v0, [1.0, 2.0], self.table, 9)
        b = boltzmann_jump_ensemble(x0, v0, [1.0, 2.0], self.table, 9)
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_mean_squared_displacement(self):
        """Test the late-time MSD slope 2 speed^2 / |lambda_1|"""
        eps, alpha, n = 1e-2, 0.25, 2000
        table = build_scattering_table(self.U, 1.0, eps**alpha)
        collision_scale = eps ** (-2 * alpha)
        rate = -boltzmann_eigenvalues(table, eps, alpha, 1)[2]
        times = np.linspace(10.0, 40.0, 13)
        phi = np.random.default_rng(0).uniform(0.0, 2.0 * math.pi, n)
        v0 = np.column_stack([np.cos(phi), np.sin(phi)])
        ensemble = boltzmann_jump_ensemble(
            np.zeros((n, 2)), v0, times, table, 5, collision_scale=collision_scale
        )
        msd = np.mean(np.sum(ensemble.positions**2, axis=-1), axis=1)
        slope = np.polyfit(times, msd, 1)[0]
        self.assertAlmostEqual(slope / (2.0 / rate), 1.0, delta=0.1)

    def test_short_support_matches_eigenvalue(self):
        """Test E[v1(t)] = exp(lambda_1 t) when U is supported on [0, 1/2]"""
        n = 20000
        table = build_scattering_table(PolynomialBump(1.0, 0.5, power=2), 1.0, 0.3)
        rate = -boltzmann_eigenvalues(table, 1.0, 0.25, 1)[2]
        t = 1.0 / rate
        v0 = np.tile([1.0, 0.0], (n, 1))
        ensemble = boltzmann_jump_ensemble(np.zeros((n, 2)), v0, [t], table, 11)
        mean = float(np.mean(ensemble.velocities[-1, :, 0]))
        self.assertAlmostEqual(mean, math.exp(-1.0), delta=0.03)

    def test_wide_support_rejected(self):
        with self.assertRaises(ProfileError):
            build_scattering_table(PolynomialBump(1.0, 1.5, power=2), 1.0, 0.3)

    def test_mean_field_projection(self):
        """Test a mean-field kick keeps the speed on the sphere"""

        def grad(x):
            return np.column_stack([np.ones(x.shape[0]), 0.5 * x[:, 0]])

        x0, v0 = np.zeros((20, 2)), np.tile([0.0, 1.0], (20, 1))
        ensemble = boltzmann_jump_ensemble(x0, v0, [0.5, 1.0], self.table, 2, mean_field=grad)
        speeds = np.linalg.norm(ensemble.velocities, axis=-1)
        np.testing.assert_allclose(speeds, 1.0, atol=1e-9)

    def test_single_path(self):
        particle = KineticParticle([0.0, 0.0], [1.0, 0.0])
        path = boltzmann_jump_evolve(particle, 3.0, self.table, 4)
        self.assertEqual(path.times[0], 0.0)
        self.assertEqual(path.times[-1], 3.0)
        self.assertLess(path.max_speed_drift(1.0), 1e-12)
        self.assertEqual(len(path.times), path.n_collisions + 2)
        np.testing.assert_allclose(particle.x, path.positions[-1])

    def test_invalid(self):
        with self.assertRaises(SpecError):
            boltzmann_jump_ensemble(
                np.zeros((2, 2)), np.array([[1.0, 0.0], [2.0, 0.0]]), [1.0], self.table, 0
            )
        with self.assertRaises(SpecError):
            boltzmann_jump_ensemble(np.zeros(2), np.array([1.0, 0.0]), [-1.0], self.table, 0)


class TestLandauDiffusion(unittest.TestCase):
    """Test the spherical Brownian motion"""

    def test_vacf_circle(self):
        """Test E[v(t).v(0)] = speed^2 exp(-B t / speed^2) in d = 2"""
        vacf = sde_vacf(np.array([1.0, 0.0]), 1.0, 2.0, 1e-3, 1, n_paths=20000)
        for t in (0.5, 1.0, 2.0):
            i = int(np.argmin(np.abs(vacf.times - t)))
            expected = math.exp(-vacf.times[i])
            self.assertLess(abs(vacf.mean[i] - expected), 4.0 * vacf.std_error[i] + 1e-3)
        self.assertEqual(vacf.mean[0], 1.0)
        self.assertGreater(vacf.integral_std_error, 0.0)

    def test_vacf_sphere(self):
        """Test E[v(t).v(0)] = speed^2 exp(-2 B t / speed^2) in d = 3"""
        vacf = sde_vacf(np.array([0.0, 0.0, 2.0]), 1.0, 1.0, 2e-3, 2, n_paths=20000)
        i = int(np.argmin(np.abs(vacf.times - 1.0)))
        expected = 4.0 * math.exp(-0.5)
        self.assertLess(abs(vacf.mean[i] - expected), 4.0 * vacf.std_error[i] + 1e-2)

    def test_projection_retraction(self):
        path = landau_sde_evolve([0.0, 3.0], 1.0, 1.0, 1e-2, 0, n_paths=10, retraction="projection")
        np.testing.assert_allclose(np.linalg.norm(path.velocities, axis=-1), 3.0)
        self.assertEqual(path.velocities.shape, (101, 10, 2))

    def test_zero_B(self):
        path = landau_sde_evolve([1.0, 0.0], 0.0, 0.5, 0.1, 0)
        np.testing.assert_array_equal(path.velocities, np.tile([1.0, 0.0], (6, 1)))

    def test_guards(self):
        with self.assertRaises(NumericGuardError):
            landau_sde_evolve([1.0, 0.0], 1.0, 1.0, 0.1, 0)
        with self.assertRaises(SpecError):
            landau_sde_evolve([1.0, 0.0], 1.0, 1.0, 1e-3, 0, retraction="cayley")
        with self.assertRaises(SpecError):
            landau_sde_evolve([1.0, 0.0], -1.0, 1.0, 1e-3, 0)


class TestOperators(unittest.TestCase):
    """Test L against B * Laplace-Beltrami"""

    @classmethod
    def setUpClass(cls):
        cls.U = PolynomialBump(1.0, 1.0, power=2)

    def test_landau_eigenvalues(self):
        f = SphericalField.from_modes(2, 2.0, {3: 1.0})
        out = apply_landau(f, 0.5)
        self.assertAlmostEqual(out.coeffs[f.degree + 3], -0.5 * 9.0 / 4.0)

    def test_first_mode_matches(self):
        """Test the k = 1 mode of L equals B * Laplace-Beltrami for the same table"""
        eps, alpha = 1e-4, 0.25
        table = build_scattering_table(self.U, 1.0, eps**alpha)
        B = landau_coefficient_B(table, 1.0, eps, alpha)
        f = SphericalField.from_modes(2, 1.0, {1: 0.5, -1: 0.5})
        self.assertLess(operator_mismatch(f, table, B, eps, alpha), 1e-8 * B)
        constant = SphericalField.constant(2, 1.0, 1.0)
        self.assertEqual(operator_mismatch(constant, table, B, eps, alpha), 0.0)

    def test_mismatch_leading_order(self):
        """Test the cos(2 phi) mismatch against its leading-order expansion"""
        eps, alpha = 1e-8, 0.25
        table = build_scattering_table(self.U, 1.0, eps**alpha)
        B = landau_coefficient_B(table, 1.0, eps, alpha)
        f = SphericalField.from_modes(2, 1.0, {2: 0.5, -2: 0.5})
        measured = operator_mismatch(f, table, B, eps, alpha)
        predicted = predicted_operator_mismatch(f, self.U, eps, alpha)
        self.assertAlmostEqual(measured / predicted, 1.0, delta=0.1)

    def test_pointwise_collision_integral(self):
        eps, alpha = 1e-2, 0.25
        table = build_scattering_table(self.U, 1.0, eps**alpha)
        f = SphericalField.random(2, 1.0, 4, np.random.default_rng(8))
        phi = np.linspace(0.0, 2.0 * math.pi, 9, endpoint=False)
        points = np.column_stack([np.cos(phi), np.sin(phi)])
        spectral = apply_boltzmann(f, table, eps, alpha).synthesize(points)
        direct = collision_integral_at(f, table, eps, alpha, points)
        np.testing.assert_allclose(direct, spectral, rtol=1e-7, atol=1e-9)

    def test_collisions_conserve_average(self):
        """Test <L f> and <B Laplace-Beltrami f> vanish for random band-limited f"""
        eps, alpha = 1e-2, 0.25
        table = build_scattering_table(self.U, 1.0, eps**alpha)
        rng = np.random.default_rng(21)
        for _ in range(5):
            f = SphericalField.random(2, 1.0, 6, rng)
            self.assertLess(abs(sphere_average(apply_landau(f, 0.7))), 1e-10)
            self.assertLess(abs(sphere_average(apply_boltzmann(f, table, eps, alpha))), 1e-10)
            pointwise = sphere_average(
                lambda p, f=f: collision_integral_at(f, table, eps, alpha, p).real, 2, 1.0
            )
            self.assertLess(abs(pointwise), 1e-10)
            g = SphericalField.random(3, 2.0, 5, rng)
            landau = apply_landau(g, 0.7)
            self.assertLess(abs(sphere_average(landau)), 1e-10)
            quadrature = sphere_average(lambda p, h=landau: h.synthesize(p).real, 3, 2.0)
            self.assertLess(abs(quadrature), 1e-10)

    def test_three_dimensions_rejected(self):
        table = build_scattering_table(self.U, 1.0, 0.1)
        with self.assertRaises(SpecError):
            apply_boltzmann(SphericalField.constant(3, 1.0, 1.0), table, 1e-4, 0.25)


if __name__ == "__main__":
    unittest.main()
