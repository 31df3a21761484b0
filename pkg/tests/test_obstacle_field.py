# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Tests for Poisson obstacle sampling and the spatial index
"""

import math
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))


class TestRegion(unittest.TestCase):
    """Test region geometry"""

    def test_box_volume_and_contains(self):
        from lorentz_diffuse.obstacle_field import Region

        box = Region.box([0.0, 0.0], [2.0, 3.0])
        self.assertAlmostEqual(box.volume(), 6.0)
        self.assertTrue(box.contains(np.array([1.0, 1.0])))
        self.assertFalse(box.contains(np.array([2.5, 1.0])))
        np.testing.assert_array_equal(
            box.contains(np.array([[0.0, 0.0], [3.0, 0.0]])), [True, False]
        )

    def test_ball_volume(self):
        from lorentz_diffuse.obstacle_field import Region

        self.assertAlmostEqual(Region.ball([0.0, 0.0], 2.0).volume(), 4.0 * math.pi)
        self.assertAlmostEqual(Region.ball([0.0, 0.0, 0.0], 1.0).volume(), 4.0 * math.pi / 3.0)

    def test_invalid_regions(self):
        """Test degenerate regions are rejected"""
        from lorentz_diffuse.errors import SpecError
        from lorentz_diffuse.obstacle_field import Region

        with self.assertRaises(SpecError):
            Region.box([0.0, 1.0], [1.0, 1.0])
        with self.assertRaises(SpecError):
            Region.ball([0.0, 0.0], 0.0)

    def test_interior_distance(self):
        from lorentz_diffuse.obstacle_field import Region

        box = Region.box([0.0, 0.0], [4.0, 4.0])
        self.assertAlmostEqual(box.interior_distance(np.array([1.0, 2.0])), 1.0)
        self.assertAlmostEqual(box.interior_distance(np.array([7.0, 8.0])), -5.0)
        self.assertAlmostEqual(box.distance(np.array([2.0, 2.0])), 0.0)

    def test_wrap(self):
        from lorentz_diffuse.obstacle_field import Region

        box = Region.box([0.0, 0.0], [1.0, 2.0], periodic=True)
        np.testing.assert_allclose(box.wrap(np.array([1.25, -0.5])), [0.25, 1.5])

    def test_ray_interval(self):
        """Test ray/region intersection for box and ball"""
        from lorentz_diffuse.obstacle_field import Region

        box = Region.box([-1.0, -1.0], [1.0, 1.0])
        a, b = box.ray_interval(np.zeros(2), np.array([1.0, 0.0]))
        self.assertAlmostEqual(a, 0.0)
        self.assertAlmostEqual(b, 1.0)
        self.assertIsNone(box.ray_interval(np.array([3.0, 0.0]), np.array([1.0, 0.0])))

        ball = Region.ball([0.0, 0.0], 1.0)
        a, b = ball.ray_interval(np.array([-3.0, 0.0]), np.array([1.0, 0.0]))
        self.assertAlmostEqual(a, 2.0)
        self.assertAlmostEqual(b, 4.0)


class TestSampling(unittest.TestCase):
    """Test sample_configuration"""

    def test_poisson_mean(self):
        """Test the empirical mean count matches mu |Sigma|"""
        from lorentz_diffuse.obstacle_field import Region, sample_configuration

        region = Region.box([0.0, 0.0], [10.0, 10.0])
        counts = [sample_configuration(region, 1.0, seed).count for seed in range(400)]
        # Poisson(100): the mean of 400 samples has standard error 0.5
        self.assertLess(abs(np.mean(counts) - 100.0), 2.5)
        self.assertLess(abs(np.var(counts) - 100.0), 25.0)

    def test_centers_inside(self):
        from lorentz_diffuse.obstacle_field import Region, sample_configuration

        for region in (Region.box([0.0, 0.0], [3.0, 1.0]), Region.ball([1.0, 1.0, 1.0], 2.0)):
            config = sample_configuration(region, 20.0, 7)
            self.assertGreater(config.count, 0)
            self.assertTrue(np.all(region.contains(config.centers)))

    def test_deterministic(self):
        """Test equal seeds give identical configurations"""
        from lorentz_diffuse.obstacle_field import Region, sample_configuration

        region = Region.box([0.0, 0.0], [5.0, 5.0])
        a = sample_configuration(region, 3.0, 11)
        b = sample_configuration(region, 3.0, 11)
        np.testing.assert_array_equal(a.centers, b.centers)

    def test_zero_intensity(self):
        from lorentz_diffuse.obstacle_field import Region, sample_configuration

        config = sample_configuration(Region.box([0.0, 0.0], [1.0, 1.0]), 0.0, 1)
        self.assertEqual(config.count, 0)
        self.assertEqual(config.centers.shape, (0, 2))

    def test_capacity_guard(self):
        from lorentz_diffuse.errors import CapacityError
        from lorentz_diffuse.obstacle_field import Region, sample_configuration

        with self.assertRaises(CapacityError):
            sample_configuration(Region.box([0.0, 0.0], [1e5, 1e5]), 1e3, 1)

    def test_frozen_centers(self):
        """Test the centers array cannot be modified in place"""
        from lorentz_diffuse.obstacle_field import Region, sample_configuration

        config = sample_configuration(Region.box([0.0, 0.0], [2.0, 2.0]), 5.0, 3)
        with self.assertRaises(ValueError):
            config.centers[0, 0] = 1.0

    def test_replica_streams(self):
        """Test replica generators differ across replicas and streams"""
        from lorentz_diffuse.obstacle_field import replica_generator, replica_seed

        a = replica_generator(5, 0).random(4)
        b = replica_generator(5, 1).random(4)
        c = replica_generator(5, 0, stream=1).random(4)
        np.testing.assert_array_equal(a, replica_generator(5, 0).random(4))
        self.assertFalse(np.allclose(a, b))
        self.assertFalse(np.allclose(a, c))
        self.assertEqual(replica_seed(5, 2), replica_seed(5, 2))
        self.assertNotEqual(replica_seed(5, 2), replica_seed(5, 3))


class TestSpatialIndex(unittest.TestCase):
    """Test neighbor queries against a linear scan"""

    def _linear_scan(self, config, x, r, periodic=False):
        diff = x - config.centers
        if periodic:
            lengths = config.region.lengths
            diff -= lengths * np.round(diff / lengths)
        return [i for i, d in enumerate(np.linalg.norm(diff, axis=1)) if d <= r]

    def test_matches_linear_scan(self):
        from lorentz_diffuse.obstacle_field import (
            Region,
            build_index,
            neighbors_within,
            sample_configuration,
        )

        config = sample_configuration(Region.box([0.0, 0.0], [10.0, 10.0]), 5.0, 2)
        index = build_index(config, 0.5)
        rng = np.random.default_rng(0)
        for x in rng.uniform(-1.0, 11.0, size=(200, 2)):
            for r in (0.1, 0.5):
                self.assertEqual(
                    neighbors_within(config, index, x, r), self._linear_scan(config, x, r)
                )

    def test_three_dimensions(self):
        from lorentz_diffuse.obstacle_field import (
            Region,
            build_index,
            neighbors_within,
            sample_configuration,
        )

        config = sample_configuration(Region.ball([0.0, 0.0, 0.0], 3.0), 4.0, 9)
        index = build_index(config, 0.7)
        rng = np.random.default_rng(1)
        for x in rng.uniform(-3.0, 3.0, size=(100, 3)):
            self.assertEqual(
                neighbors_within(config, index, x, 0.7), self._linear_scan(config, x, 0.7)
            )

    def test_periodic(self):
        """Test minimum-image queries near the edges of a periodic box"""
        from lorentz_diffuse.obstacle_field import (
            Region,
            build_index,
            neighbors_within,
            sample_configuration,
        )

        region = Region.box([0.0, 0.0], [4.0, 4.0], periodic=True)
        config = sample_configuration(region, 10.0, 4)
        index = build_index(config, 0.5)
        for x in (np.array([0.05, 0.05]), np.array([3.95, 2.0]), np.array([2.0, 2.0])):
            self.assertEqual(
                neighbors_within(config, index, x, 0.5),
                self._linear_scan(config, x, 0.5, periodic=True),
            )

    def test_radius_guard(self):
        from lorentz_diffuse.errors import IndexRadiusError
        from lorentz_diffuse.obstacle_field import (
            Region,
            build_index,
            neighbors_within,
            sample_configuration,
        )

        config = sample_configuration(Region.box([0.0, 0.0], [2.0, 2.0]), 5.0, 2)
        index = build_index(config, 0.2)
        with self.assertRaises(IndexRadiusError):
            neighbors_within(config, index, np.ones(2), 0.3)

    def test_empty_configuration(self):
        from lorentz_diffuse.obstacle_field import (
            Region,
            build_index,
            neighbors_within,
            sample_configuration,
        )

        config = sample_configuration(Region.box([0.0, 0.0], [1.0, 1.0]), 0.0, 1)
        index = build_index(config, 0.5)
        self.assertEqual(neighbors_within(config, index, np.zeros(2), 0.5), [])


class TestConfigurationFiles(unittest.TestCase):
    """Test CSV export and import"""

    def test_export_import(self):
        from lorentz_diffuse.obstacle_field import (
            Region,
            export_configuration,
            import_configuration,
            sample_configuration,
        )

        region = Region.box([0.0, -1.0], [2.0, 1.0], periodic=True)
        config = sample_configuration(region, 10.0, 12)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "obstacles.csv"
            export_configuration(config, path)
            loaded = import_configuration(path)
        np.testing.assert_array_equal(loaded.centers, config.centers)
        self.assertEqual(loaded.region, region)
        self.assertEqual(loaded.seed, 12)
        self.assertEqual(loaded.intensity, 10.0)

    def test_import_ball(self):
        from lorentz_diffuse.obstacle_field import (
            Region,
            export_configuration,
            import_configuration,
            sample_configuration,
        )

        config = sample_configuration(Region.ball([0.5, 0.5], 1.5), 3.0, 8)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "ball.csv"
            export_configuration(config, path)
            loaded = import_configuration(path)
        self.assertEqual(loaded.region, config.region)
        self.assertEqual(loaded.count, config.count)

    def test_import_missing(self):
        from lorentz_diffuse.errors import SpecError
        from lorentz_diffuse.obstacle_field import import_configuration

        with self.assertRaises(SpecError):
            import_configuration("/nonexistent/obstacles.csv")


if __name__ == "__main__":
    unittest.main()
