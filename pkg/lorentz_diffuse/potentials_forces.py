# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Radial profiles, the assembled force field and the limiting mean-field potential.

Two roles share one profile type: the scattering profile U (support radius 1 before
scaling, strictly decreasing) and the mean-field profile Lambda (finite support R,
non-increasing). Profiles are either built in (polynomial bumps) or read from a table.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Union

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline, RegularGridInterpolator
from scipy.special import comb

from lorentz_diffuse.config_scaling import DerivedScales, ScalingParams, derive_scales
from lorentz_diffuse.errors import ProfileError, UnknownExperimentError
from lorentz_diffuse.obstacle_field import (
    ObstacleConfiguration,
    Region,
    SpatialIndex,
    build_index,
    displacements_within,
)

logger = logging.getLogger(__name__)

SCATTERING = "scattering"
MEAN_FIELD = "mean-field"


class RadialPotential(ABC):
    """Base class for radial profiles with compact support"""

    def __init__(self, name: str, support_radius: float):
        """
        :param name: identifier used in tables, caches and reports
        :param support_radius: profile vanishes for r >= support_radius
        """
        if support_radius <= 0.0:
            raise ProfileError(f"support radius must be positive, got {support_radius}")
        self.name = name
        self.support_radius = float(support_radius)

    @abstractmethod
    def _value(self, r: np.ndarray) -> np.ndarray:
        """Profile on 0 <= r < support_radius"""

    @abstractmethod
    def _first(self, r: np.ndarray) -> np.ndarray:
        """First derivative on 0 <= r < support_radius"""

    @abstractmethod
    def _second(self, r: np.ndarray) -> np.ndarray:
        """Second derivative on 0 <= r < support_radius"""

    def _masked(self, fn: Callable, r):
        r = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r)
        out = np.zeros_like(flat)
        inside = flat < self.support_radius
        if np.any(inside):
            out[inside] = fn(flat[inside])
        return out.reshape(r.shape) if r.ndim else float(out[0])

    def value(self, r):
        return self._masked(self._value, r)

    def first(self, r):
        return self._masked(self._first, r)

    def second(self, r):
        return self._masked(self._second, r)

    @property
    def value_at_zero(self) -> float:
        return float(self.value(0.0))

    def radial_moment(self, s: float, dim: int, derivative: int = 0) -> float:
        """
        ``int_0^s p(r) r**(dim-1) dr`` for the profile (derivative=0) or its slope (1).
        """
        s = min(float(s), self.support_radius)
        if s <= 0.0:
            return 0.0
        fn = self.value if derivative == 0 else self.first
        result, _ = integrate.quad(
            lambda r: fn(r) * r ** (dim - 1), 0.0, s, epsabs=1e-13, epsrel=1e-12, limit=200
        )
        return result

    def integral(self, dim: int) -> float:
        """Integral of the profile over R^dim"""
        area = 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)
        return area * self.radial_moment(self.support_radius, dim)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, support_radius={self.support_radius})"


class PolynomialBump(RadialPotential):
    """A (1 - (r/R)**2)**power for r < R; power >= 2 gives a W^{2,inf} profile"""

    def __init__(self, amplitude: float = 1.0, support_radius: float = 1.0, power: int = 2):
        super().__init__(f"bump{power}", support_radius)
        if power < 1:
            raise ProfileError(f"bump power must be >= 1, got {power}")
        self.amplitude = float(amplitude)
        self.power = int(power)

    def _value(self, r):
        s = r / self.support_radius
        return self.amplitude * (1.0 - s * s) ** self.power

    def _first(self, r):
        n, big_r = self.power, self.support_radius
        s = r / big_r
        return self.amplitude * n * (1.0 - s * s) ** (n - 1) * (-2.0 * s) / big_r

    def _second(self, r):
        n, big_r = self.power, self.support_radius
        s = r / big_r
        q = 1.0 - s * s
        term = -2.0 * n * q ** (n - 1)
        if n >= 2:
            term = term + 4.0 * n * (n - 1) * q ** (n - 2) * s * s
        return self.amplitude * term / big_r**2

    def radial_moment(self, s: float, dim: int, derivative: int = 0) -> float:
        # binomial expansion of (1 - r^2/R^2)^n integrates term by term
        s = min(float(s), self.support_radius)
        if s <= 0.0:
            return 0.0
        n, big_r = self.power, self.support_radius
        total = 0.0
        for k in range(n + 1):
            c = comb(n, k, exact=True) * (-1.0) ** k / big_r ** (2 * k)
            if derivative == 0:
                total += c * s ** (dim + 2 * k) / (dim + 2 * k)
            elif k > 0:
                total += c * 2 * k * s ** (dim + 2 * k - 1) / (dim + 2 * k - 1)
        return self.amplitude * total


class TabulatedPotential(RadialPotential):
    """
    Profile from a table of (r, value, dvalue, d2value).

    The value is a cubic Hermite spline through (value, dvalue); the first derivative
    is the Hermite spline through (dvalue, d2value); the second derivative is linear.
    """

    def __init__(self, name: str, r, value, dvalue, d2value):
        r = np.asarray(r, dtype=float)
        if r.ndim != 1 or r.size < 2 or r[0] != 0.0 or np.any(np.diff(r) <= 0.0):
            raise ProfileError(f"{name}: r must start at 0 and increase strictly")
        super().__init__(name, float(r[-1]))
        self._r = r
        self._d2 = np.asarray(d2value, dtype=float)
        slope = np.asarray(dvalue, dtype=float)
        self._spline = CubicHermiteSpline(r, np.asarray(value, dtype=float), slope)
        self._dspline = CubicHermiteSpline(r, slope, self._d2)

    @classmethod
    def from_csv(cls, path: Union[str, Path], name: Optional[str] = None) -> "TabulatedPotential":
        """Read a CSV with header ``r,value,dvalue,d2value``"""
        try:
            table = np.genfromtxt(path, delimiter=",", names=True)
            return cls(
                name or Path(path).stem,
                table["r"],
                table["value"],
                table["dvalue"],
                table["d2value"],
            )
        except (OSError, ValueError) as e:
            raise ProfileError(f"cannot read profile table {path}: {e}") from e

    def _value(self, r):
        return self._spline(r)

    def _first(self, r):
        return self._dspline(r)

    def _second(self, r):
        return np.interp(r, self._r, self._d2)


def profile_from_id(profile_id: str, amplitude: float = 1.0, support_radius: float = 1.0):
    """Resolve built-in ids (``bump2``, ``bump3``) or a path to a CSV table"""
    if profile_id in ("bump2", "bump3", "bump4"):
        return PolynomialBump(amplitude, support_radius, power=int(profile_id[-1]))
    path = Path(profile_id)
    if path.suffix == ".csv" and path.exists():
        return TabulatedPotential.from_csv(path)
    raise UnknownExperimentError(f"unresolvable potential id {profile_id!r}")


# ------------------------------------------------------------------
# Validation
# ------------------------------------------------------------------


@dataclass
class ProfileReport:
    """Violations found by validate_profile (empty list means all checks passed)"""

    role: str
    violations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def validate_profile(
    p: RadialPotential, role: str = SCATTERING, n_grid: int = 10_000
) -> ProfileReport:
    """
    Check the hypotheses on a profile.

    Positivity at 0 (scattering role), monotonicity on a grid, vanishing and C^1 matching at
    the support, zero slope at the origin, and bounded finite-difference second derivatives.
    """
    report = ProfileReport(role=role)
    big_r = p.support_radius
    r = np.linspace(0.0, big_r, n_grid)
    values = np.asarray(p.value(r), dtype=float)
    scale = max(float(np.max(np.abs(values))), 1e-300)

    if not np.all(np.isfinite(values)):
        report.violations.append("non_finite_values")
    if role == SCATTERING:
        if not p.value_at_zero > 0.0:
            report.violations.append("value_at_zero_not_positive")
        # the last grid point sits on the support edge where the profile is 0
        if not np.all(np.diff(values) < 0.0):
            report.violations.append("not_strictly_decreasing")
    elif np.any(np.diff(values) > 1e-14 * scale):
        report.violations.append("increasing_somewhere")

    edge = big_r * (1.0 - 1e-9)
    at_edge = float(p._value(np.array([big_r]))[0])
    if abs(float(p.value(edge))) > 1e-6 * scale or abs(at_edge) > 1e-9 * scale:
        report.violations.append("not_vanishing_at_support")
    if abs(float(p.first(edge))) > 1e-6 * max(scale / big_r, 1e-300):
        report.violations.append("derivative_jump_at_support")
    if abs(float(p.first(0.0))) > 1e-9 * max(scale / big_r, 1e-300):
        report.violations.append("nonzero_slope_at_origin")

    h = r[1] - r[0]
    extended = np.linspace(0.0, big_r * 1.1, int(n_grid * 1.1))
    ext_values = np.asarray(p.value(extended), dtype=float)
    second = np.diff(ext_values, 2) / h**2
    bound = 1e3 * max(scale, 1.0) / big_r**2
    if not np.all(np.isfinite(second)) or np.max(np.abs(second)) > bound:
        report.violations.append("second_derivative_unbounded")

    for violation in report.violations:
        logger.warning(f"Profile {p.name} ({role}): {violation}")
    return report


# ------------------------------------------------------------------
# Forces
# ------------------------------------------------------------------


@dataclass(frozen=True)
class ForceFieldContext:
    """Everything needed to evaluate the right-hand side of the equations of motion"""

    config: ObstacleConfiguration
    index: SpatialIndex
    U: RadialPotential
    Lambda: RadialPotential
    params: ScalingParams
    scales: DerivedScales

    @property
    def scattering_radius(self) -> float:
        return self.params.epsilon * self.U.support_radius

    @property
    def interaction_radius(self) -> float:
        return max(self.scattering_radius, self.Lambda.support_radius)


def build_force_context(
    config: ObstacleConfiguration,
    U: RadialPotential,
    Lambda: RadialPotential,
    params: ScalingParams,
    scales: Optional[DerivedScales] = None,
) -> ForceFieldContext:
    """Index the configuration with cells large enough for the 2 eps shell and Lambda"""
    scales = scales or derive_scales(params)
    cell = max(2.0 * params.epsilon * U.support_radius, Lambda.support_radius)
    return ForceFieldContext(
        config=config,
        index=build_index(config, cell),
        U=U,
        Lambda=Lambda,
        params=params,
        scales=scales,
    )


def scattering_energy(x, c, params: ScalingParams, U: RadialPotential) -> float:
    """eps**alpha * U(|x - c| / eps)"""
    r = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(c, dtype=float)))
    return params.coupling * float(U.value(r / params.epsilon))


def _radial_gradient(profile_slope: np.ndarray, diff: np.ndarray, dist: np.ndarray) -> np.ndarray:
    # profile'(r) (x - c)/|x - c|; zero contribution at r = 0
    unit = np.zeros_like(diff)
    nonzero = dist > 0.0
    unit[nonzero] = diff[nonzero] / dist[nonzero, None]
    return profile_slope[:, None] * unit


def total_force(x, ctx: ForceFieldContext) -> np.ndarray:
    """Acceleration at x: scattering plus empirical mean-field contributions"""
    x = np.asarray(x, dtype=float)
    force = np.zeros(ctx.config.dim)
    if ctx.config.count == 0:
        return force
    eps = ctx.params.epsilon
    _, diff = displacements_within(ctx.config, ctx.index, x, ctx.interaction_radius)
    if diff.shape[0] == 0:
        return force
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))

    near = dist < ctx.scattering_radius
    if np.any(near):
        slope = np.asarray(ctx.U.first(dist[near] / eps))
        grad = _radial_gradient(slope, diff[near], dist[near])
        force -= eps ** (ctx.params.alpha - 1.0) * grad.sum(axis=0)

    lam = dist < ctx.Lambda.support_radius
    if np.any(lam):
        slope = np.asarray(ctx.Lambda.first(dist[lam]))
        grad = _radial_gradient(slope, diff[lam], dist[lam])
        force -= grad.sum(axis=0) / ctx.scales.mu
    return force


def potential_energy(x, ctx: ForceFieldContext) -> float:
    """eps**alpha sum U(|x-c|/eps) + (1/mu) sum Lambda(|x-c|)"""
    x = np.asarray(x, dtype=float)
    if ctx.config.count == 0:
        return 0.0
    _, diff = displacements_within(ctx.config, ctx.index, x, ctx.interaction_radius)
    if diff.shape[0] == 0:
        return 0.0
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    scattering = ctx.params.coupling * float(np.sum(ctx.U.value(dist / ctx.params.epsilon)))
    mean_field = float(np.sum(ctx.Lambda.value(dist))) / ctx.scales.mu
    return scattering + mean_field


def near_obstacle(x, ctx: ForceFieldContext, shell: float = 2.0) -> bool:
    """True when some obstacle center lies within shell * eps of x"""
    if ctx.config.count == 0:
        return False
    radius = shell * ctx.scattering_radius
    indices, _ = displacements_within(ctx.config, ctx.index, np.asarray(x, dtype=float), radius)
    return indices.size > 0


# ------------------------------------------------------------------
# Limiting mean-field potential Phi = 1_Sigma * Lambda
# ------------------------------------------------------------------


def _sphere_directions_integral(dim: int, fn: Callable[[np.ndarray], np.ndarray], tol: float):
    """Integrate a direction-valued function over the unit sphere (d = 2 or 3)"""
    if dim == 2:
        def component(i):
            return integrate.quad(
                lambda phi: fn(np.array([math.cos(phi), math.sin(phi)]))[i],
                0.0,
                2.0 * math.pi,
                epsabs=tol,
                epsrel=tol,
                limit=500,
            )[0]

    elif dim == 3:
        def component(i):
            return integrate.dblquad(
                lambda phi, theta: fn(
                    np.array(
                        [
                            math.sin(theta) * math.cos(phi),
                            math.sin(theta) * math.sin(phi),
                            math.cos(theta),
                        ]
                    )
                )[i]
                * math.sin(theta),
                0.0,
                math.pi,
                0.0,
                2.0 * math.pi,
                epsabs=tol,
                epsrel=tol,
            )[0]

    else:
        raise ProfileError(f"limit potential quadrature supports d = 2, 3 (got {dim})")
    sample = fn(np.eye(dim)[0])
    return np.array([component(i) for i in range(len(sample))])


def _ray_moments(x, region: Region, Lambda: RadialPotential, derivative: int):
    dim = region.dim
    big_r = Lambda.support_radius

    def along(u):
        interval = region.ray_interval(x, u)
        if interval is None:
            return np.zeros(dim if derivative else 1)
        a, b = interval
        a, b = min(a, big_r), min(b, big_r)
        if b <= a:
            return np.zeros(dim if derivative else 1)
        m = Lambda.radial_moment(b, dim, derivative) - Lambda.radial_moment(a, dim, derivative)
        # grad Lambda(x - c) with c = x + s u is -Lambda'(s) u
        return -m * u if derivative else np.array([m])

    return along


def limit_potential(x, region: Region, Lambda: RadialPotential, tol: float = 1e-11) -> float:
    """
    Phi(x) = int_Sigma Lambda(|x - c|) dc.

    Polar coordinates around x: along every direction the ray meets the convex region in
    one interval, and the radial integral is a difference of radial moments of Lambda.
    """
    x = np.asarray(x, dtype=float)
    if region.distance(x) > Lambda.support_radius:
        return 0.0
    along = _ray_moments(x, region, Lambda, derivative=0)
    return float(_sphere_directions_integral(region.dim, along, tol)[0])


def limit_force(x, region: Region, Lambda: RadialPotential, tol: float = 1e-11) -> np.ndarray:
    """Gradient of Phi: int_Sigma grad Lambda(x - c) dc"""
    x = np.asarray(x, dtype=float)
    if region.distance(x) > Lambda.support_radius:
        return np.zeros(region.dim)
    along = _ray_moments(x, region, Lambda, derivative=1)
    return _sphere_directions_integral(region.dim, along, tol)


def empirical_mean_field(x, config: ObstacleConfiguration, Lambda: RadialPotential, mu: float):
    """(1/mu) sum Lambda(x - c_i) and (1/mu) sum grad Lambda(x - c_i) by direct summation"""
    x = np.asarray(x, dtype=float)
    if config.count == 0 or mu <= 0.0:
        return 0.0, np.zeros(config.dim)
    diff = x - config.centers
    dist = np.linalg.norm(diff, axis=1)
    potential = float(np.sum(Lambda.value(dist))) / mu
    grad = _radial_gradient(np.asarray(Lambda.first(dist)), diff, dist).sum(axis=0) / mu
    return potential, grad


def tabulate_limit_force(region: Region, Lambda: RadialPotential, lower, upper, shape):
    """
    Tabulate grad Phi on a regular grid and return a callable (n, d) -> (n, d).

    Points outside the tabulated box get zero force.
    """
    axes = [np.linspace(lo, up, n) for lo, up, n in zip(lower, upper, shape)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    flat = mesh.reshape(-1, region.dim)
    logger.info(f"Tabulating mean-field force on {flat.shape[0]} grid points")
    values = np.array([limit_force(p, region, Lambda, tol=1e-9) for p in flat])
    values = values.reshape(*mesh.shape)
    interpolator = RegularGridInterpolator(axes, values, bounds_error=False, fill_value=0.0)

    def gradient(points: np.ndarray) -> np.ndarray:
        return interpolator(np.atleast_2d(points))

    return gradient
