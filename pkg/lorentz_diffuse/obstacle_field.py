# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Quenched Poisson obstacle configurations and a cell-list spatial index.

A configuration is drawn once per replica and frozen for the whole trajectory;
averaging over configurations is an outer Monte Carlo loop. Replica generators are
derived from ``(master seed, replica id, stream)`` through ``numpy.random.SeedSequence``
so that parallel sampling is reproducible and independent of the worker count.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import gamma

from lorentz_diffuse.errors import CapacityError, IndexRadiusError, SpecError

logger = logging.getLogger(__name__)

MAX_EXPECTED_OBSTACLES = 1e9


def replica_generator(master_seed: int, replica: int, stream: int = 0) -> np.random.Generator:
    """Independent deterministic generator for one replica and stream"""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(replica, stream)))


def replica_seed(master_seed: int, replica: int, stream: int = 0) -> int:
    """64-bit integer token derived from (master seed, replica, stream)"""
    state = np.random.SeedSequence(master_seed, spawn_key=(replica, stream)).generate_state(
        1, np.uint64
    )
    return int(state[0])


@dataclass(frozen=True)
class Region:
    """
    Axis-aligned box or ball in macroscopic units.

    Use :meth:`box` and :meth:`ball` to construct. A periodic box wraps neighbor
    queries with the minimum-image convention.
    """

    kind: str
    lower: Tuple[float, ...] = ()
    upper: Tuple[float, ...] = ()
    center: Tuple[float, ...] = ()
    radius: float = 0.0
    periodic: bool = False

    def __post_init__(self):
        if self.kind == "box":
            if len(self.lower) != len(self.upper) or len(self.lower) < 1:
                raise SpecError("box needs lower and upper corners of equal dimension")
            if any(u <= lo for lo, u in zip(self.lower, self.upper)):
                raise SpecError(f"box has non-positive extent: {self.lower} .. {self.upper}")
        elif self.kind == "ball":
            if self.radius <= 0.0 or not self.center:
                raise SpecError("ball needs a center and a positive radius")
            if self.periodic:
                raise SpecError("only boxes can be periodic")
        else:
            raise SpecError(f"unknown region kind {self.kind!r}")

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float], periodic: bool = False):
        return cls(
            kind="box",
            lower=tuple(float(v) for v in lower),
            upper=tuple(float(v) for v in upper),
            periodic=periodic,
        )

    @classmethod
    def ball(cls, center: Sequence[float], radius: float):
        return cls(kind="ball", center=tuple(float(v) for v in center), radius=float(radius))

    @classmethod
    def padded_box(cls, lower: Sequence[float], upper: Sequence[float], padding: float):
        """Box enlarged by ``padding`` on every side"""
        return cls.box(
            [v - padding for v in lower],
            [v + padding for v in upper],
        )

    @property
    def dim(self) -> int:
        return len(self.lower) if self.kind == "box" else len(self.center)

    @property
    def lengths(self) -> np.ndarray:
        if self.kind == "box":
            return np.asarray(self.upper) - np.asarray(self.lower)
        return np.full(self.dim, 2.0 * self.radius)

    @property
    def bounding_lower(self) -> np.ndarray:
        if self.kind == "box":
            return np.asarray(self.lower, dtype=float)
        return np.asarray(self.center, dtype=float) - self.radius

    def volume(self) -> float:
        if self.kind == "box":
            return float(np.prod(self.lengths))
        d = self.dim
        return float(math.pi ** (d / 2.0) / gamma(d / 2.0 + 1.0) * self.radius**d)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Closed-set membership for an array of points (n, d) or a single point"""
        pts = np.atleast_2d(points)
        if self.kind == "box":
            lo, up = np.asarray(self.lower), np.asarray(self.upper)
            inside = np.all((pts >= lo) & (pts <= up), axis=1)
        else:
            inside = np.linalg.norm(pts - np.asarray(self.center), axis=1) <= self.radius
        return inside if np.ndim(points) > 1 else bool(inside[0])

    def interior_distance(self, x: np.ndarray) -> float:
        """Signed distance from x to the boundary, positive inside"""
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            lo, up = np.asarray(self.lower), np.asarray(self.upper)
            inside = np.minimum(x - lo, up - x)
            if np.all(inside >= 0.0):
                return float(inside.min())
            outside = np.maximum(np.maximum(lo - x, x - up), 0.0)
            return -float(np.linalg.norm(outside))
        return self.radius - float(np.linalg.norm(x - np.asarray(self.center)))

    def distance(self, x: np.ndarray) -> float:
        """Euclidean distance from x to the region (0 inside)"""
        return max(0.0, -self.interior_distance(x))

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map positions into a periodic box (identity otherwise)"""
        if not self.periodic:
            return np.asarray(x, dtype=float)
        lo = np.asarray(self.lower)
        return lo + np.mod(np.asarray(x, dtype=float) - lo, self.lengths)

    def ray_interval(self, x: np.ndarray, u: np.ndarray) -> Optional[Tuple[float, float]]:
        """
        Parameter interval [a, b] with a >= 0 of the ray x + s*u inside the region.

        Regions are convex, so the intersection is a single interval or empty.
        """
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if self.kind == "box":
            a, b = 0.0, math.inf
            for xi, ui, lo, up in zip(x, u, self.lower, self.upper):
                if abs(ui) < 1e-300:
                    if xi < lo or xi > up:
                        return None
                    continue
                s1, s2 = (lo - xi) / ui, (up - xi) / ui
                if s1 > s2:
                    s1, s2 = s2, s1
                a, b = max(a, s1), min(b, s2)
                if a > b:
                    return None
            return a, b
        w = x - np.asarray(self.center)
        wu = float(w @ u)
        disc = wu * wu - (float(w @ w) - self.radius**2)
        if disc < 0.0:
            return None
        root = math.sqrt(disc)
        a, b = -wu - root, -wu + root
        if b < 0.0:
            return None
        return max(a, 0.0), b

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        d = self.dim
        if self.kind == "box":
            return np.asarray(self.lower) + rng.random((n, d)) * self.lengths
        directions = rng.standard_normal((n, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = self.radius * rng.random(n) ** (1.0 / d)
        return np.asarray(self.center) + directions * radii[:, None]

    def describe(self) -> str:
        if self.kind == "box":
            lower = " ".join(repr(v) for v in self.lower)
            upper = " ".join(repr(v) for v in self.upper)
            return f"box lower={lower} upper={upper} periodic={int(self.periodic)}"
        center = " ".join(repr(v) for v in self.center)
        return f"ball center={center} radius={self.radius!r}"


@dataclass(frozen=True)
class ObstacleConfiguration:
    """A frozen sample of obstacle centers"""

    centers: np.ndarray
    region: Region
    intensity: float
    seed: int

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float).reshape(-1, self.region.dim)
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)

    @property
    def count(self) -> int:
        return int(self.centers.shape[0])

    @property
    def dim(self) -> int:
        return self.region.dim


@dataclass(frozen=True)
class SpatialIndex:
    """Cell list: integer cell coordinates -> ascending center indices"""

    cell_size: float
    origin: np.ndarray
    buckets: Dict[Tuple[int, ...], np.ndarray] = field(default_factory=dict)
    # cells per axis for periodic boxes, None otherwise
    n_cells: Optional[Tuple[int, ...]] = None


def sample_configuration(region: Region, intensity: float, seed: int) -> ObstacleConfiguration:
    """
    Sample a Poisson configuration: N ~ Poisson(mu |Sigma|), centers i.i.d. uniform.

    :raises CapacityError: when mu |Sigma| exceeds the memory guard
    """
    if intensity < 0.0:
        raise SpecError(f"intensity must be >= 0, got {intensity}")
    expected = intensity * region.volume()
    if expected > MAX_EXPECTED_OBSTACLES:
        raise CapacityError(
            f"expected obstacle count {expected:.3g} exceeds the guard {MAX_EXPECTED_OBSTACLES:.0e}"
        )
    rng = np.random.default_rng(seed)
    count = int(rng.poisson(expected)) if expected > 0.0 else 0
    centers = region.sample_uniform(rng, count)
    logger.debug(f"Sampled {count} obstacles (expected {expected:.4g}) with seed {seed}")
    return ObstacleConfiguration(centers=centers, region=region, intensity=intensity, seed=seed)


def build_index(config: ObstacleConfiguration, cell_size: float) -> SpatialIndex:
    """Bucket the centers into cubic cells of side at least ``cell_size``"""
    if cell_size <= 0.0:
        raise SpecError(f"cell size must be positive, got {cell_size}")
    region = config.region
    origin = region.bounding_lower
    n_cells = None
    if region.periodic:
        counts = np.maximum(np.floor(region.lengths / cell_size), 1).astype(int)
        n_cells = tuple(int(c) for c in counts)
        widths = region.lengths / counts
        coords = np.floor((config.centers - origin) / widths).astype(int)
        coords = np.mod(coords, counts)
    else:
        coords = np.floor((config.centers - origin) / cell_size).astype(int)

    buckets: Dict[Tuple[int, ...], List[int]] = {}
    for i, key in enumerate(map(tuple, coords)):
        buckets.setdefault(key, []).append(i)
    frozen = {key: np.asarray(idx, dtype=np.int64) for key, idx in buckets.items()}
    return SpatialIndex(cell_size=float(cell_size), origin=origin, buckets=frozen, n_cells=n_cells)


def _candidate_indices(config: ObstacleConfiguration, index: SpatialIndex, x: np.ndarray):
    region = config.region
    d = config.dim
    if index.n_cells is not None:
        counts = np.asarray(index.n_cells)
        widths = region.lengths / counts
        home = np.floor((region.wrap(x) - index.origin) / widths).astype(int)
        keys = {
            tuple(np.mod(home + np.asarray(offset), counts))
            for offset in itertools.product((-1, 0, 1), repeat=d)
        }
    else:
        home = np.floor((x - index.origin) / index.cell_size).astype(int)
        offsets = itertools.product((-1, 0, 1), repeat=d)
        keys = {tuple(home + np.asarray(offset)) for offset in offsets}
    found = [index.buckets[key] for key in keys if key in index.buckets]
    if not found:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(found)


def displacements_within(
    config: ObstacleConfiguration, index: SpatialIndex, x: np.ndarray, r: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Indices (ascending) and displacement vectors x - c_i for all |x - c_i| <= r.

    Periodic boxes use the minimum-image displacement.
    """
    if r > index.cell_size:
        raise IndexRadiusError(f"query radius {r} exceeds index cell size {index.cell_size}")
    x = np.asarray(x, dtype=float)
    candidates = _candidate_indices(config, index, x)
    if candidates.size == 0:
        return candidates, np.empty((0, config.dim))
    diff = x - config.centers[candidates]
    if config.region.periodic:
        lengths = config.region.lengths
        diff -= lengths * np.round(diff / lengths)
    keep = np.einsum("ij,ij->i", diff, diff) <= r * r
    candidates, diff = candidates[keep], diff[keep]
    order = np.argsort(candidates, kind="stable")
    return candidates[order], diff[order]


def neighbors_within(
    config: ObstacleConfiguration, index: SpatialIndex, x: np.ndarray, r: float
) -> List[int]:
    """
    Indices of the centers in the closed ball of radius r around x, ascending.

    :raises IndexRadiusError: if r exceeds the index cell size
    """
    indices, _ = displacements_within(config, index, x, r)
    return [int(i) for i in indices]


# ------------------------------------------------------------------
# CSV import / export
# ------------------------------------------------------------------


def _parse_region(text: str) -> Region:
    parts = text.split()
    kind, fields_ = parts[0], {}
    current = None
    for token in parts[1:]:
        if "=" in token:
            current, value = token.split("=", 1)
            fields_[current] = [value] if value else []
        elif current is not None:
            fields_[current].append(token)
    if kind == "box":
        return Region.box(
            [float(v) for v in fields_["lower"]],
            [float(v) for v in fields_["upper"]],
            periodic=bool(int(fields_.get("periodic", ["0"])[0])),
        )
    return Region.ball([float(v) for v in fields_["center"]], float(fields_["radius"][0]))


def export_configuration(config: ObstacleConfiguration, path: Union[str, Path]) -> None:
    """Write one row per center with columns c1..cd; metadata as # comments"""
    d = config.dim
    header = "\n".join(
        [
            f"region={config.region.describe()}",
            f"intensity={config.intensity!r}",
            f"seed={config.seed}",
            ",".join(f"c{i + 1}" for i in range(d)),
        ]
    )
    np.savetxt(path, config.centers, delimiter=",", header=header, comments="# ", fmt="%.17g")


def import_configuration(path: Union[str, Path]) -> ObstacleConfiguration:
    """Read a configuration written by :func:`export_configuration`"""
    meta = {}
    try:
        with open(path) as f:
            for line in f:
                if not line.startswith("#"):
                    break
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta[key] = value
        region = _parse_region(meta["region"])
        centers = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        return ObstacleConfiguration(
            centers=centers.reshape(-1, region.dim),
            region=region,
            intensity=float(meta["intensity"]),
            seed=int(meta["seed"]),
        )
    except (OSError, KeyError, ValueError, IndexError) as e:
        raise SpecError(f"cannot import obstacle configuration from {path}: {e}") from e
