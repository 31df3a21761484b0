# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Classical scattering by one soft obstacle and the two kinetic processes built on it.

* deflection angle theta(rho) of a radial potential, tabulated on Chebyshev nodes;
* the Landau coefficient B from the grazing-collision expansion, with a JSON cache of its
  eps -> 0 limit;
* the linear Boltzmann jump process (exponential collision clock, table-driven jumps)
  and the Landau spherical diffusion (Brownian motion on the velocity sphere);
* the collision operator L and the Landau operator B * Laplace-Beltrami on spectral fields.

Impact parameters and radii are in units of the obstacle, so the built-in bumps have
support radius 1.
"""

import json
import logging
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, optimize
from scipy.interpolate import BarycentricInterpolator

from lorentz_diffuse.errors import (
    NumericGuardError,
    ProfileError,
    ProjectionError,
    ScatteringError,
    SpecError,
)
from lorentz_diffuse.obstacle_field import replica_generator
from lorentz_diffuse.potentials_forces import RadialPotential
from lorentz_diffuse.spherical_field import SphericalField

logger = logging.getLogger(__name__)

MIN_GRID = 64
DENSE_POINTS = 4097
SPEED_TOL = 1e-9
SDE_STEP_FACTOR = 0.01
# 4096/2835: grazing limit of B for (1 - r^2)^2 at unit speed
BUMP2_GRAZING_B = 4096.0 / 2835.0


# ------------------------------------------------------------------
# Deflection angle
# ------------------------------------------------------------------


@dataclass(frozen=True)
class Deflection:
    """Deflection angle with the reflection-regime flag"""

    theta: float
    reflected: bool = False


def _closest_approach(rho: float, k: float, U: RadialPotential) -> float:
    """Root of g(r) = 1 - rho^2/r^2 - k U(r) on (rho, R); g is increasing for decreasing U"""
    big_r = U.support_radius

    def g(r):
        return 1.0 - (rho / r) ** 2 - k * float(U.value(r))

    return optimize.brentq(g, rho, big_r, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def _reflection_radius(k: float, U: RadialPotential) -> float:
    """r* with k U(r*) = 1; zero when the barrier is below the kinetic energy"""
    if k * U.value_at_zero < 1.0:
        return 0.0
    return optimize.brentq(lambda r: k * float(U.value(r)) - 1.0, 0.0, U.support_radius)


def deflection(rho: float, speed: float, coupling: float, U: RadialPotential) -> Deflection:
    """
    theta = pi - 2 rho int_{r_min}^R dr / (r^2 sqrt(g(r))) - 2 arcsin(rho/R),
    g(r) = 1 - rho^2/r^2 - 2 coupling U(r)/speed^2.

    The substitution r = r_min + u^2 removes the inverse square-root singularity at the
    turning point; g/u^2 is evaluated in factored form.

    :raises ScatteringError: if the turning point cannot be bracketed
    """
    big_r = U.support_radius
    if not 0.0 <= rho <= big_r * (1.0 + 1e-12):
        raise SpecError(f"impact parameter must lie in [0, {big_r}], got {rho}")
    if speed <= 0.0 or coupling < 0.0:
        raise SpecError(f"need speed > 0 and coupling >= 0 (got {speed}, {coupling})")
    if coupling == 0.0 or rho >= big_r:
        return Deflection(0.0)

    k = 2.0 * coupling / speed**2
    reflected = rho < _reflection_radius(k, U)
    if rho == 0.0:
        return Deflection(math.pi if k * U.value_at_zero >= 1.0 else 0.0, reflected)

    try:
        r_min = _closest_approach(rho, k, U)
    except (ValueError, RuntimeError) as e:
        raise ScatteringError(f"turning point not found for rho={rho}: {e}") from e
    u_min = float(U.value(r_min))
    slope_min = float(U.first(r_min))

    def integrand(u):
        r = r_min + u * u
        du2 = u * u
        quotient = slope_min if du2 < 1e-10 else (float(U.value(r)) - u_min) / du2
        q = rho * rho * (r + r_min) / (r * r * r_min * r_min) - k * quotient
        return 2.0 / (r * r * math.sqrt(q))

    upper = math.sqrt(big_r - r_min)
    value, _ = integrate.quad(integrand, 0.0, upper, epsabs=1e-13, epsrel=1e-12, limit=200)
    theta = math.pi - 2.0 * rho * value - 2.0 * math.asin(min(rho / big_r, 1.0))
    theta = min(max(theta, 0.0), math.pi)
    if reflected:
        logger.warning(f"rho={rho:.6g} lies in the reflection regime (theta={theta:.4f})")
    return Deflection(theta, reflected)


def deflection_angle(rho: float, speed: float, coupling: float, U: RadialPotential) -> float:
    """Deflection magnitude in [0, pi]"""
    return deflection(rho, speed, coupling, U).theta


def grazing_deflection(rho: float, speed: float, U: RadialPotential) -> float:
    """
    First-order deflection per unit coupling:
    theta_1 = -(2 rho/speed^2) int_rho^R U'(r)/sqrt(r^2 - rho^2) dr.

    With r = sqrt(rho^2 + z^2) the integrand becomes U'(r)/r dz and is regular.
    """
    big_r = U.support_radius
    if rho >= big_r:
        return 0.0

    def integrand(z):
        r = math.hypot(rho, z)
        if r == 0.0:
            return float(U.second(0.0))
        return float(U.first(r)) / r

    value, _ = integrate.quad(
        integrand, 0.0, math.sqrt(big_r**2 - rho**2), epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return -2.0 * rho * value / speed**2


def grazing_limit_B(U: RadialPotential, speed: float) -> float:
    """B* = speed^3 int_0^R theta_1(rho)^2 d rho, the eps -> 0 limit of the Landau coefficient"""
    value, _ = integrate.quad(
        lambda rho: grazing_deflection(rho, speed, U) ** 2,
        0.0,
        U.support_radius,
        epsabs=1e-14,
        epsrel=1e-10,
        limit=200,
    )
    return speed**3 * value


def bump2_grazing_B(speed: float) -> float:
    """Closed form 4096/(2835 speed) for U = (1 - r^2)^2"""
    return BUMP2_GRAZING_B / speed


# ------------------------------------------------------------------
# Scattering table
# ------------------------------------------------------------------


@dataclass
class ScatteringTable:
    """
    theta(rho) on Chebyshev-Lobatto nodes of [0, R].

    Off-grid values use barycentric interpolation clipped to [0, pi]; ``lookup`` is a
    vectorized linear interpolation on a dense uniform resampling.
    """

    rho_grid: np.ndarray
    theta: np.ndarray
    coupling: float
    speed: float
    potential_id: str
    support_radius: float = 1.0
    reflected: bool = False
    continuous: bool = True
    _interpolator: Optional[BarycentricInterpolator] = field(default=None, repr=False)
    _dense_rho: Optional[np.ndarray] = field(default=None, repr=False)
    _dense_theta: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.rho_grid = np.asarray(self.rho_grid, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.rho_grid.shape != self.theta.shape:
            raise SpecError("rho grid and theta must have the same length")
        self._interpolator = BarycentricInterpolator(self.rho_grid, self.theta)
        self._dense_rho = np.linspace(0.0, self.support_radius, DENSE_POINTS)
        self._dense_theta = self._interpolate(self._dense_rho)

    def _interpolate(self, rho: np.ndarray) -> np.ndarray:
        out = np.clip(self._interpolator(rho), 0.0, math.pi)
        return np.where(rho >= self.support_radius, 0.0, out)

    def __call__(self, rho):
        rho = np.abs(np.asarray(rho, dtype=float))
        out = self._interpolate(np.atleast_1d(rho))
        return out.reshape(rho.shape) if rho.ndim else float(out[0])

    def lookup(self, rho: np.ndarray) -> np.ndarray:
        """Fast vectorized theta(|rho|)"""
        return np.interp(np.abs(rho), self._dense_rho, self._dense_theta, right=0.0)

    @property
    def max_theta(self) -> float:
        return float(np.max(self.theta))

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write ``rho,theta`` with the table metadata as comment lines"""
        header = (
            f"potential={self.potential_id} speed={self.speed!r} coupling={self.coupling!r} "
            f"support_radius={self.support_radius!r}\nrho,theta"
        )
        np.savetxt(
            path,
            np.column_stack([self.rho_grid, self.theta]),
            delimiter=",",
            header=header,
            comments="# ",
            fmt="%.17g",
        )

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "ScatteringTable":
        path = Path(path)
        try:
            with path.open() as f:
                meta_line = f.readline().lstrip("#").strip()
            meta = dict(item.split("=", 1) for item in meta_line.split())
            data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, ndmin=2)
            return cls(
                rho_grid=data[:, 0],
                theta=data[:, 1],
                coupling=float(meta["coupling"]),
                speed=float(meta["speed"]),
                potential_id=meta["potential"],
                support_radius=float(meta.get("support_radius", 1.0)),
            )
        except (OSError, KeyError, ValueError, IndexError) as e:
            raise SpecError(f"cannot read scattering table {path}: {e}") from e


def chebyshev_lobatto(n: int, upper: float = 1.0) -> np.ndarray:
    """n + 1 Chebyshev-Lobatto nodes on [0, upper], ascending, endpoints included"""
    return 0.5 * upper * (1.0 - np.cos(math.pi * np.arange(n + 1) / n))


def _check_continuity(rho: np.ndarray, theta: np.ndarray) -> bool:
    slopes = np.abs(np.diff(theta) / np.diff(rho))
    if slopes.size < 3:
        return True
    neighbor = np.maximum(np.r_[slopes[1:], 0.0], np.r_[0.0, slopes[:-1]])
    jumps = slopes > 10.0 * neighbor + 1e-9
    if np.any(jumps):
        where = int(np.argmax(jumps))
        logger.warning(
            f"Deflection table jumps between rho={rho[where]:.6g} and {rho[where + 1]:.6g}"
        )
        return False
    return True


def build_scattering_table(
    U: RadialPotential, speed: float, coupling: float, n_grid: int = 128
) -> ScatteringTable:
    """
    Tabulate theta on n_grid + 1 Chebyshev-Lobatto nodes of [0, R].

    :raises ProfileError: if the support of U reaches beyond radius 1
    :raises ScatteringError: naming the node where the turning point search failed
    """
    if n_grid < MIN_GRID:
        raise SpecError(f"n_grid must be >= {MIN_GRID}, got {n_grid}")
    if U.support_radius > 1.0:
        raise ProfileError(
            f"{U.name}: impact parameters live on [-1, 1], so the support radius must be "
            f"<= 1 (got {U.support_radius})"
        )
    rho = chebyshev_lobatto(n_grid, U.support_radius)
    theta = np.empty_like(rho)
    reflected = False
    for j, r in enumerate(rho):
        try:
            result = deflection(float(r), speed, coupling, U)
        except ScatteringError as e:
            raise ScatteringError(f"node {j} (rho={r!r}): {e}") from e
        theta[j] = result.theta
        reflected = reflected or result.reflected
    table = ScatteringTable(
        rho_grid=rho,
        theta=theta,
        coupling=coupling,
        speed=speed,
        potential_id=U.name,
        support_radius=U.support_radius,
        reflected=reflected,
        continuous=_check_continuity(rho, theta),
    )
    logger.debug(
        f"Scattering table {U.name}: coupling={coupling:.4g}, speed={speed}, "
        f"max theta={table.max_theta:.4g}"
    )
    return table


# ------------------------------------------------------------------
# Landau coefficient
# ------------------------------------------------------------------


def landau_coefficient_B(
    table: ScatteringTable, speed: float, epsilon: float, alpha: float
) -> float:
    """
    B = (speed eps^{-2 alpha}/2) int_{-R}^{R} 4 speed^2 sin^2(theta(|rho|)/2) d rho.

    Logs a warning when some theta exceeds pi/2 (grazing expansion not valid).
    """
    if table.max_theta > 0.5 * math.pi:
        logger.warning(
            f"max deflection {table.max_theta:.4f} > pi/2: grazing expansion is not valid"
        )
    value, _ = integrate.quad(
        lambda rho: math.sin(0.5 * table(rho)) ** 2,
        0.0,
        table.support_radius,
        epsabs=1e-14,
        epsrel=1e-10,
        limit=400,
    )
    return speed * epsilon ** (-2.0 * alpha) * 4.0 * speed**2 * value


def extrapolate_B(epsilons: Sequence[float], values: Sequence[float], alpha: float) -> float:
    """
    Limit of B(eps) as eps -> 0 from a least-squares fit in powers of eps**alpha.

    B(eps) = B* + a eps^alpha + b eps^(2 alpha) + ...; the number of correction terms is
    one less than the number of points (at most two).
    """
    eps = np.asarray(epsilons, dtype=float)
    vals = np.asarray(values, dtype=float)
    n_terms = min(len(eps), 3)
    design = np.column_stack([eps ** (alpha * p) for p in range(n_terms)])
    coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
    return float(coef[0])


class LandauCoefficientCache:
    """
    JSON cache of the numerical limit B* per (potential, alpha, speed).

    Reading and writing are best effort; a missing or corrupt file means recomputation.
    """

    def __init__(self, cache_file: Optional[Union[str, Path]] = None, read_only_cache=False):
        if cache_file is None:
            cache_file = Path.home() / ".cache" / "lorentz_diffuse_bstar.json"
        self.cache_file = Path(cache_file)
        self.read_only_cache = read_only_cache
        self._lock = threading.Lock()

    @staticmethod
    def key(potential_id: str, alpha: float, speed: float) -> str:
        return f"{potential_id}|alpha={alpha!r}|speed={speed!r}"

    def _load(self) -> Dict[str, float]:
        try:
            if not self.cache_file.exists():
                return {}
            with open(self.cache_file) as f:
                data = json.load(f)
            return {str(k): float(v["B"]) for k, v in data["entries"].items()}
        except (json.JSONDecodeError, OSError, KeyError, TypeError) as e:
            logger.debug(f"Ignoring unreadable B* cache {self.cache_file}: {e}")
            return {}

    def _save(self, entries: Dict[str, float]) -> bool:
        try:
            self.cache_file.parent.mkdir(parents=True, exist_ok=True)
            data = {"entries": {k: {"B": v} for k, v in sorted(entries.items())}}
            with open(self.cache_file, "w") as f:
                json.dump(data, f, indent=2)
            return True
        except OSError as e:
            logger.debug(f"Could not write B* cache {self.cache_file}: {e}")
            return False

    def get(self, potential_id: str, alpha: float, speed: float) -> Optional[float]:
        with self._lock:
            return self._load().get(self.key(potential_id, alpha, speed))

    def put(self, potential_id: str, alpha: float, speed: float, value: float) -> None:
        if self.read_only_cache:
            return
        with self._lock:
            entries = self._load()
            entries[self.key(potential_id, alpha, speed)] = float(value)
            self._save(entries)

    def limit_B(
        self,
        U: RadialPotential,
        alpha: float,
        speed: float,
        epsilons: Sequence[float] = (1e-2, 1e-3, 1e-4),
        n_grid: int = 128,
    ) -> float:
        """Cached B*: landau_coefficient_B along an eps sweep, extrapolated to eps = 0"""
        cached = self.get(U.name, alpha, speed)
        if cached is not None:
            logger.debug(f"B* cache hit for {U.name}, alpha={alpha}, speed={speed}")
            return cached
        values = []
        for eps in epsilons:
            table = build_scattering_table(U, speed, eps**alpha, n_grid)
            values.append(landau_coefficient_B(table, speed, eps, alpha))
        value = extrapolate_B(epsilons, values, alpha)
        logger.info(f"B* for {U.name} (alpha={alpha}, speed={speed}): {value:.8g}")
        self.put(U.name, alpha, speed, value)
        return value


# ------------------------------------------------------------------
# Collision geometry
# ------------------------------------------------------------------


def _perpendicular_basis(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Two unit vectors orthogonal to the unit rows of u (n, 3) and to each other"""
    helper = np.zeros_like(u)
    use_y = np.abs(u[:, 0]) > 0.9
    helper[~use_y, 0] = 1.0
    helper[use_y, 1] = 1.0
    e1 = np.cross(u, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    return e1, np.cross(u, e1)


def _side_vectors(u: np.ndarray, rho: np.ndarray, psi: Optional[np.ndarray]) -> np.ndarray:
    if u.shape[1] == 2:
        sign = np.where(rho < 0.0, -1.0, 1.0)
        return sign[:, None] * np.column_stack([-u[:, 1], u[:, 0]])
    if u.shape[1] == 3:
        e1, e2 = _perpendicular_basis(u)
        return np.cos(psi)[:, None] * e1 + np.sin(psi)[:, None] * e2
    raise SpecError(f"collision geometry supports d = 2, 3 (got {u.shape[1]})")


def _omegas(v: np.ndarray, rho: np.ndarray, theta: np.ndarray, psi) -> np.ndarray:
    u = v / np.linalg.norm(v, axis=1, keepdims=True)
    e = _side_vectors(u, rho, psi)
    # beta = (pi - theta)/2
    return np.sin(0.5 * theta)[:, None] * u - np.cos(0.5 * theta)[:, None] * e


def reflect(v: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """v' = v - 2 (omega . v) omega, row-wise for arrays"""
    v = np.asarray(v, dtype=float)
    omega = np.asarray(omega, dtype=float)
    dots = np.sum(v * omega, axis=-1, keepdims=True)
    return v - 2.0 * dots * omega


def scattering_direction(
    v: Sequence[float],
    rho_signed: float,
    theta: float,
    azimuth: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Unit omega with reflect(v, omega) at angle theta from v.

    d = 2: positive rho turns v counterclockwise. d = 3: the scattering plane has
    azimuth ``azimuth`` around v, drawn uniformly from ``rng`` when not given.
    """
    if abs(theta) > math.pi:
        raise SpecError(f"|theta| must be <= pi, got {theta}")
    v = np.asarray(v, dtype=float)[None, :]
    psi = None
    if v.shape[1] == 3:
        if azimuth is None:
            azimuth = (rng or np.random.default_rng()).uniform(0.0, 2.0 * math.pi)
        psi = np.array([azimuth])
    return _omegas(v, np.array([rho_signed]), np.array([abs(theta)]), psi)[0]


def _draw_impacts(rng: np.random.Generator, n: int, dim: int):
    """rho uniform on [-1, 1] in d = 2; density 2 rho on [0, 1] with uniform azimuth in d = 3"""
    if dim == 2:
        return rng.uniform(-1.0, 1.0, n), None
    return np.sqrt(rng.random(n)), rng.uniform(0.0, 2.0 * math.pi, n)


def _collide(v: np.ndarray, table: ScatteringTable, rng: np.random.Generator) -> np.ndarray:
    n, dim = v.shape
    rho, psi = _draw_impacts(rng, n, dim)
    theta = table.lookup(rho)
    return reflect(v, _omegas(v, rho, theta, psi))


# ------------------------------------------------------------------
# Linear Boltzmann jump process
# ------------------------------------------------------------------


@dataclass
class KineticParticle:
    """Kinetic state; clock is the time to the next collision (jump process only)"""

    x: np.ndarray
    v: np.ndarray
    clock: float = math.inf

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        self.v = np.array(self.v, dtype=float)


@dataclass
class KineticPath:
    """Sampled kinetic path: times, positions and velocities"""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    n_collisions: int = 0
    metadata: Dict[str, str] = field(default_factory=dict)

    def max_speed_drift(self, speed: float) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.velocities, axis=-1) - speed)))

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write ``t,v1..vd`` with the metadata as a comment line"""
        d = self.velocities.shape[-1]
        meta = " ".join(f"{k}={v}" for k, v in sorted(self.metadata.items()))
        header = f"{meta}\n" + ",".join(["t"] + [f"v{i + 1}" for i in range(d)])
        np.savetxt(
            path,
            np.column_stack([self.times, self.velocities]),
            delimiter=",",
            header=header,
            comments="# ",
            fmt="%.17g",
        )


GradientField = Callable[[np.ndarray], np.ndarray]


def _mean_field_drift(
    x: np.ndarray,
    v: np.ndarray,
    duration: np.ndarray,
    grad: GradientField,
    transport_scale: float,
    speed: float,
    max_dt: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Transport under x' = s v, v' = -s (grad Phi)_T with half-kick, drift, half-kick steps;
    v is projected back to the sphere after every kick.

    :raises ProjectionError: if |v| deviates from speed by more than 1e-9 after projection
    """
    n_sub = max(1, int(math.ceil(float(np.max(duration)) / max_dt)))
    h = (duration / n_sub)[:, None]

    def kick(xk, vk, tau):
        force = -grad(xk)
        unit = vk / np.linalg.norm(vk, axis=1, keepdims=True)
        tangential = force - np.sum(force * unit, axis=1, keepdims=True) * unit
        vk = vk + tau * transport_scale * tangential
        vk = speed * vk / np.linalg.norm(vk, axis=1, keepdims=True)
        drift = np.max(np.abs(np.linalg.norm(vk, axis=1) - speed)) if vk.size else 0.0
        if not drift <= SPEED_TOL:
            raise ProjectionError(f"speed drift {drift:.3g} after mean-field projection")
        return vk

    for _ in range(n_sub):
        v = kick(x, v, 0.5 * h)
        x = x + transport_scale * h * v
        v = kick(x, v, 0.5 * h)
    return x, v


def _transport(x, v, duration, grad, transport_scale, speed, max_dt):
    if grad is None:
        return x + transport_scale * duration[:, None] * v, v
    return _mean_field_drift(x, v, duration, grad, transport_scale, speed, max_dt)


def collision_rate(collision_scale: float, speed: float) -> float:
    """collision_scale * speed * 2, the total mass of d rho on [-1, 1]"""
    return 2.0 * collision_scale * speed


@dataclass
class JumpEnsemble:
    """Positions and velocities of independent jump-process particles at record times"""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    n_collisions: np.ndarray


def boltzmann_jump_ensemble(
    x0: np.ndarray,
    v0: np.ndarray,
    times: Sequence[float],
    table: ScatteringTable,
    seed: int,
    mean_field: Optional[GradientField] = None,
    transport_scale: float = 1.0,
    collision_scale: float = 1.0,
    mean_field_dt: float = 1e-2,
) -> JumpEnsemble:
    """
    Run n independent jump processes started at (x0, v0) and record them at ``times``.

    Clocks are exponential with rate collision_rate(collision_scale, speed); at each epoch
    the impact parameter is drawn and the velocity reflected through scattering_direction.
    """
    x = np.array(x0, dtype=float, ndmin=2)
    v = np.array(v0, dtype=float, ndmin=2)
    if x.shape != v.shape:
        raise SpecError(f"x0 and v0 shapes differ: {x.shape} vs {v.shape}")
    if transport_scale <= 0.0 or collision_scale <= 0.0:
        raise SpecError("transport and collision scales must be positive")
    speeds = np.linalg.norm(v, axis=1)
    speed = float(speeds[0])
    if np.max(np.abs(speeds - speed)) > SPEED_TOL:
        raise SpecError("all initial velocities must share the same speed")
    record = np.asarray(sorted(float(t) for t in times))
    if record.size == 0 or record[0] < 0.0:
        raise SpecError("record times must be non-negative")

    rng = replica_generator(seed, 0, stream=2)
    rate = collision_rate(collision_scale, speed)
    n = x.shape[0]
    clock = rng.exponential(1.0 / rate, n)
    counts = np.zeros(n, dtype=np.int64)
    positions, velocities = [], []
    t = 0.0
    for t_rec in record:
        left = np.full(n, t_rec - t)
        while True:
            hit = np.flatnonzero(clock <= left)
            if hit.size == 0:
                break
            x[hit], v[hit] = _transport(
                x[hit], v[hit], clock[hit], mean_field, transport_scale, speed, mean_field_dt
            )
            left[hit] -= clock[hit]
            v[hit] = _collide(v[hit], table, rng)
            counts[hit] += 1
            clock[hit] = rng.exponential(1.0 / rate, hit.size)
        x, v = _transport(x, v, left, mean_field, transport_scale, speed, mean_field_dt)
        clock -= left
        t = t_rec
        positions.append(x.copy())
        velocities.append(v.copy())
    return JumpEnsemble(
        times=record,
        positions=np.asarray(positions),
        velocities=np.asarray(velocities),
        n_collisions=counts,
    )


def boltzmann_jump_evolve(
    p: KineticParticle,
    T: float,
    table: ScatteringTable,
    seed: int,
    mean_field: Optional[GradientField] = None,
    transport_scale: float = 1.0,
    collision_scale: float = 1.0,
    mean_field_dt: float = 1e-2,
) -> KineticPath:
    """
    One jump-process path on [0, T], sampled at 0, at every collision epoch and at T.
    """
    if T < 0.0:
        raise SpecError(f"T must be >= 0, got {T}")
    speed = float(np.linalg.norm(p.v))
    rng = replica_generator(seed, 0, stream=2)
    rate = collision_rate(collision_scale, speed)
    x, v = p.x[None, :].copy(), p.v[None, :].copy()

    def move(xs_, vs_, duration):
        return _transport(
            xs_, vs_, np.array([duration]), mean_field, transport_scale, speed, mean_field_dt
        )

    clock = p.clock if math.isfinite(p.clock) else float(rng.exponential(1.0 / rate))
    times, xs, vs = [0.0], [x[0].copy()], [v[0].copy()]
    t = 0.0
    count = 0
    while t + clock <= T:
        x, v = move(x, v, clock)
        t += clock
        v = _collide(v, table, rng)
        count += 1
        times.append(t)
        xs.append(x[0].copy())
        vs.append(v[0].copy())
        clock = float(rng.exponential(1.0 / rate))
    if T > t:
        x, v = move(x, v, T - t)
        times.append(T)
        xs.append(x[0].copy())
        vs.append(v[0].copy())
    p.x, p.v, p.clock = x[0].copy(), v[0].copy(), clock - (T - t)
    return KineticPath(
        times=np.asarray(times),
        positions=np.asarray(xs),
        velocities=np.asarray(vs),
        n_collisions=count,
        metadata={
            "table": table.potential_id,
            "coupling": repr(table.coupling),
            "collision_scale": repr(collision_scale),
            "transport_scale": repr(transport_scale),
            "seed": str(seed),
        },
    )


# ------------------------------------------------------------------
# Landau spherical diffusion
# ------------------------------------------------------------------


RETRACTIONS = ("exponential", "projection")


def _check_sde_step(dim: int, speed: float, B: float, dt: float) -> None:
    if B < 0.0:
        raise SpecError(f"B must be >= 0, got {B}")
    if dt <= 0.0:
        raise SpecError(f"dt must be positive, got {dt}")
    if B > 0.0:
        limit = SDE_STEP_FACTOR * speed**2 / ((dim - 1) * B)
        if dt > limit:
            raise NumericGuardError(
                f"dt={dt:.3g} exceeds 0.01 speed^2/((d-1)B)={limit:.3g}; the relaxation time "
                "is not resolved"
            )


def _sde_steps(
    v0: np.ndarray, B: float, T: float, dt: float, seed: int, retraction: str
) -> Iterator[Tuple[float, np.ndarray]]:
    if retraction not in RETRACTIONS:
        raise SpecError(f"unknown retraction {retraction!r}; expected one of {RETRACTIONS}")
    n, dim = v0.shape
    speed = float(np.linalg.norm(v0[0]))
    _check_sde_step(dim, speed, B, dt)
    rng = replica_generator(seed, 0, stream=3)
    v = v0.copy()
    n_steps = int(math.ceil(T / dt - 1e-9))
    yield 0.0, v
    for i in range(n_steps):
        h = min(dt, T - i * dt)
        if B > 0.0:
            unit = v / speed
            z = rng.standard_normal((n, dim))
            xi = math.sqrt(2.0 * B * h) * (z - np.sum(z * unit, axis=1, keepdims=True) * unit)
            if retraction == "exponential":
                size = np.linalg.norm(xi, axis=1, keepdims=True)
                angle = size / speed
                direction = np.divide(xi, size, out=np.zeros_like(xi), where=size > 0.0)
                v = v * np.cos(angle) + speed * np.sin(angle) * direction
            else:
                v = v + xi
            v = speed * v / np.linalg.norm(v, axis=1, keepdims=True)
        yield min((i + 1) * dt, T), v


def _initial_velocities(v0, n_paths: int) -> np.ndarray:
    v0 = np.asarray(v0, dtype=float)
    if v0.ndim == 1:
        v0 = np.repeat(v0[None, :], n_paths, axis=0)
    speeds = np.linalg.norm(v0, axis=1)
    if np.max(np.abs(speeds - speeds[0])) > SPEED_TOL or speeds[0] <= 0.0:
        raise SpecError("initial velocities must lie on one sphere of positive radius")
    return v0


def landau_sde_evolve(
    v0,
    B: float,
    T: float,
    dt: float,
    seed: int,
    n_paths: int = 1,
    retraction: str = "exponential",
    record_every: int = 1,
) -> KineticPath:
    """
    Brownian motion on the sphere of radius |v0| with generator B * Laplace-Beltrami.

    Each step draws a tangent Gaussian increment of covariance 2 B dt and maps it back to
    the sphere, along the geodesic (``exponential``, exact in d = 2) or by renormalizing
    v + xi (``projection``). Velocities have shape (n_times, n_paths, d).

    :raises NumericGuardError: if dt > 0.01 speed^2/((d-1) B)
    """
    v = _initial_velocities(v0, n_paths)
    times, velocities = [], []
    for i, (t, vt) in enumerate(_sde_steps(v, B, T, dt, seed, retraction)):
        if i % record_every == 0 or t == T:
            times.append(t)
            velocities.append(vt.copy())
    return KineticPath(
        times=np.asarray(times),
        positions=np.zeros((len(times), 0)),
        velocities=np.asarray(velocities) if n_paths > 1 else np.asarray(velocities)[:, 0],
        metadata={"B": repr(B), "dt": repr(dt), "seed": str(seed), "retraction": retraction},
    )


@dataclass
class VACFEstimate:
    """Velocity autocorrelation E[v(t).v(0)] with standard errors"""

    times: np.ndarray
    mean: np.ndarray
    std_error: np.ndarray
    integral_std_error: float
    n_paths: int


def sde_vacf(
    v0,
    B: float,
    T: float,
    dt: float,
    seed: int,
    n_paths: int,
    retraction: str = "exponential",
) -> VACFEstimate:
    """
    Accumulate v(t).v(0) over n_paths without storing paths.

    integral_std_error is the standard error of the per-path trapezoid integral of the
    autocorrelation over [0, T].
    """
    v = _initial_velocities(v0, n_paths)
    times, means, errors = [], [], []
    integral = np.zeros(v.shape[0])
    prev_t, prev_c = None, None
    for t, vt in _sde_steps(v, B, T, dt, seed, retraction):
        c = np.sum(vt * v, axis=1)
        times.append(t)
        means.append(float(c.mean()))
        errors.append(float(c.std(ddof=1) / math.sqrt(c.size)) if c.size > 1 else 0.0)
        if prev_t is not None:
            integral += 0.5 * (t - prev_t) * (c + prev_c)
        prev_t, prev_c = t, c
    integral_error = 0.0
    if integral.size > 1:
        integral_error = float(integral.std(ddof=1) / math.sqrt(integral.size))
    return VACFEstimate(
        times=np.asarray(times),
        mean=np.asarray(means),
        std_error=np.asarray(errors),
        integral_std_error=integral_error,
        n_paths=v.shape[0],
    )


# ------------------------------------------------------------------
# Spectral operators
# ------------------------------------------------------------------


def apply_landau(f: SphericalField, B: float) -> SphericalField:
    """B * Laplace-Beltrami, diagonal in the mode basis"""
    return f.with_coeffs(B * f.laplace_beltrami_eigenvalues() * f.coeffs)


def boltzmann_eigenvalues(
    table: ScatteringTable, epsilon: float, alpha: float, degree: int
) -> np.ndarray:
    """
    lambda_k = -2 speed eps^{-2 alpha} int_0^R (1 - cos(k theta(rho))) d rho, k = -K..K.

    e^{ik phi} is an eigenfunction of L in d = 2 because each collision rotates v by
    +-theta(|rho|).
    """
    scale = 2.0 * table.speed * epsilon ** (-2.0 * alpha)
    values = np.zeros(2 * degree + 1)
    for k in range(1, degree + 1):
        integral, _ = integrate.quad(
            lambda rho, k=k: 1.0 - math.cos(k * table(rho)),
            0.0,
            table.support_radius,
            epsabs=1e-14,
            epsrel=1e-10,
            limit=400,
        )
        values[degree + k] = values[degree - k] = -scale * integral
    return values


def apply_boltzmann(
    f: SphericalField, table: ScatteringTable, epsilon: float, alpha: float
) -> SphericalField:
    """(L f)(v) = speed eps^{-2 alpha} int_{-1}^{1} (f(v'(rho)) - f(v)) d rho for d = 2 fields"""
    if f.dim != 2:
        raise SpecError("the spectral collision operator is implemented for d = 2")
    return f.with_coeffs(boltzmann_eigenvalues(table, epsilon, alpha, f.degree) * f.coeffs)


def collision_integral_at(
    f: SphericalField,
    table: ScatteringTable,
    epsilon: float,
    alpha: float,
    points: np.ndarray,
    n_quad: int = 400,
) -> np.ndarray:
    """Pointwise (L f)(v) by Gauss-Legendre quadrature over rho in [-R, R]"""
    if f.dim != 2:
        raise SpecError("the collision integral is implemented for d = 2")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    nodes, weights = leggauss(n_quad)
    big_r = table.support_radius
    rho = 0.5 * big_r * (nodes + 1.0)
    w = 0.5 * big_r * weights
    theta = table(rho)
    phi = np.arctan2(points[:, 1], points[:, 0])
    speed = table.speed
    base = f.synthesize(points)
    total = np.zeros(points.shape[0], dtype=complex)
    for sign in (1.0, -1.0):
        turned = phi[:, None] + sign * theta[None, :]
        rotated = speed * np.stack([np.cos(turned), np.sin(turned)], axis=-1).reshape(-1, 2)
        values = f.synthesize(rotated).reshape(points.shape[0], -1)
        total += (values - base[:, None]) @ w
    return speed * epsilon ** (-2.0 * alpha) * total


def operator_mismatch(
    f: SphericalField, table: ScatteringTable, B: float, epsilon: float, alpha: float
) -> float:
    """L2 norm over the sphere of (L - B Laplace-Beltrami) f"""
    difference = apply_boltzmann(f, table, epsilon, alpha) - apply_landau(f, B)
    return difference.l2_norm()


def fourth_moment(f: SphericalField) -> float:
    """Smoothness proxy: norm of the fourth angular derivatives"""
    return f.spectral_moment(4)


def predicted_operator_mismatch(
    f: SphericalField, U: RadialPotential, epsilon: float, alpha: float
) -> float:
    """
    Leading order of ||(L - B(eps) Laplace-Beltrami) f|| for d = 2 fields.

    With theta = eps^alpha theta_1 the mode-k eigenvalue difference is
    speed eps^{2 alpha} (k^4 - k^2)/12 int_0^R theta_1^4 d rho.
    """
    if f.dim != 2:
        raise SpecError("the mismatch expansion is implemented for d = 2")
    speed = f.speed
    fourth, _ = integrate.quad(
        lambda rho: grazing_deflection(rho, speed, U) ** 4,
        0.0,
        U.support_radius,
        epsabs=1e-16,
        epsrel=1e-10,
        limit=200,
    )
    k = f.mode_numbers().astype(float)
    per_mode = speed * epsilon ** (2.0 * alpha) * (k**4 - k**2) / 12.0 * fourth
    return f.with_coeffs(per_mode * f.coeffs).l2_norm()
