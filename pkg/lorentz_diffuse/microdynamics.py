# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Hamiltonian test-particle dynamics through a quenched obstacle configuration.

The equations of motion x' = v, v' = -grad(eps**alpha sum U(|x-c|/eps) + (1/mu) sum Lambda)
are integrated with velocity Verlet (half-kick, drift, half-kick). The annealed law
f_eps(x, v, t) = E[f0(U^{-t}(x, v))] is estimated by Monte Carlo over configurations,
one configuration per replica.

Usage:
    from lorentz_diffuse.microdynamics import InitialDensity, estimate_f

    f0 = InitialDensity.isotropic_bump(center=(0.0, 0.0), radius=0.5, dim=2, speed=1.0)
    estimate = estimate_f([0.1, 0.0], [1.0, 0.0], 0.2, f0, 200, params, seed=7)
    print(estimate.value, estimate.std_error)
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from numpy.polynomial.legendre import leggauss
from scipy.special import beta

from lorentz_diffuse.config_scaling import (
    DerivedScales,
    ScalingParams,
    derive_scales,
    sphere_area,
    sphere_normalization,
)
from lorentz_diffuse.errors import (
    BoundaryContactError,
    NumericGuardError,
    SamplingError,
    SpecError,
    StepSizeError,
)
from lorentz_diffuse.obstacle_field import (
    Region,
    neighbors_within,
    replica_generator,
    replica_seed,
    sample_configuration,
)
from lorentz_diffuse.potentials_forces import (
    ForceFieldContext,
    PolynomialBump,
    RadialPotential,
    build_force_context,
    near_obstacle,
    potential_energy,
    total_force,
)
from lorentz_diffuse.spherical_field import sphere_quadrature

logger = logging.getLogger(__name__)

MAX_PROPOSALS = 1_000_000
COARSE_STEPS_PER_EPS = 2.0
# a single passage then leaves | |v| - speed | below 1e-9 for the built-in bumps
FINE_STEPS_PER_EPS = 1000.0
MAX_FIXED_STEP_FRACTION = 0.1


@dataclass(frozen=True)
class PhaseState:
    """Position and velocity of the test particle"""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        v = np.array(self.v, dtype=float)
        if x.shape != v.shape or x.ndim != 1:
            raise SpecError(f"x and v must be vectors of equal length ({x.shape}, {v.shape})")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise NumericGuardError(f"non-finite phase state x={x}, v={v}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v))

    def reversed(self) -> "PhaseState":
        return PhaseState(self.x, -self.v)


@dataclass
class Trajectory:
    """States sampled at every integrator step, with the energy log"""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    energies: np.ndarray
    config_seed: Optional[int] = None

    @property
    def states(self) -> List[PhaseState]:
        return [PhaseState(x, v) for x, v in zip(self.positions, self.velocities)]

    @property
    def final(self) -> PhaseState:
        return PhaseState(self.positions[-1], self.velocities[-1])

    def energy_drift(self) -> float:
        """max_t |H(t) - H(0)| / |H(0)|"""
        h0 = self.energies[0]
        return float(np.max(np.abs(self.energies - h0)) / abs(h0))

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write ``t,x1..xd,v1..vd,H``"""
        d = self.positions.shape[1]
        columns = ["t"] + [f"x{i + 1}" for i in range(d)] + [f"v{i + 1}" for i in range(d)] + ["H"]
        table = np.column_stack([self.times, self.positions, self.velocities, self.energies])
        header = ",".join(columns)
        if self.config_seed is not None:
            header = f"config_seed={self.config_seed}\n{header}"
        np.savetxt(path, table, delimiter=",", header=header, comments="# ", fmt="%.17g")


# ------------------------------------------------------------------
# Integrator
# ------------------------------------------------------------------


def velocity_verlet(
    x: np.ndarray,
    v: np.ndarray,
    dt: float,
    accel: Callable[[np.ndarray], np.ndarray],
    a0: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    One half-kick, drift, half-kick step.

    :param a0: acceleration at x when already known
    :return: (x', v', acceleration at x')
    """
    a = accel(x) if a0 is None else a0
    v_half = v + 0.5 * dt * a
    x_new = x + dt * v_half
    a_new = accel(x_new)
    return x_new, v_half + 0.5 * dt * a_new, a_new


def _check_step(x: np.ndarray, v: np.ndarray, dt: float, ctx: ForceFieldContext) -> None:
    if dt == 0.0 or not math.isfinite(dt):
        raise StepSizeError(f"time step must be finite and non-zero, got {dt}")
    speed = float(np.linalg.norm(v))
    if speed == 0.0:
        return
    limit = MAX_FIXED_STEP_FRACTION * ctx.params.epsilon / speed
    if abs(dt) > limit and near_obstacle(x, ctx):
        raise StepSizeError(
            f"|dt|={abs(dt):.3g} exceeds eps/(10|v|)={limit:.3g} within 2 eps of an obstacle"
        )


def step(s: PhaseState, dt: float, ctx: ForceFieldContext) -> PhaseState:
    """
    Advance one velocity Verlet step. Negative dt integrates backward.

    :raises StepSizeError: when |dt| > eps/(10|v|) inside the 2 eps shell
    """
    _check_step(s.x, s.v, dt, ctx)
    x, v, _ = velocity_verlet(s.x, s.v, dt, lambda y: total_force(y, ctx))
    return PhaseState(x, v)


def _check_boundary(x: np.ndarray, ctx: ForceFieldContext) -> None:
    region = ctx.config.region
    if region.periodic or ctx.config.intensity == 0.0:
        return
    if region.interior_distance(x) < ctx.interaction_radius:
        raise BoundaryContactError(
            f"particle at {x} is within the interaction radius of the region boundary "
            f"({region.describe()})"
        )


def _adaptive_dt(x: np.ndarray, v: np.ndarray, ctx: ForceFieldContext) -> float:
    speed = float(np.linalg.norm(v))
    per_eps = FINE_STEPS_PER_EPS if near_obstacle(x, ctx) else COARSE_STEPS_PER_EPS
    return ctx.params.epsilon / (per_eps * speed)


def _integrate(s0: PhaseState, T: float, ctx: ForceFieldContext, dt: Optional[float], record):
    if T < 0.0:
        raise SpecError(f"evolution time must be >= 0, got {T}")
    if dt is not None and dt <= 0.0:
        raise SpecError(f"dt must be positive, got {dt}")
    if s0.speed == 0.0 and dt is None:
        raise SpecError("adaptive stepping needs a non-zero speed")

    def accel(y):
        return total_force(y, ctx)

    x, v = s0.x.copy(), s0.v.copy()
    a = accel(x)
    t = 0.0
    _check_boundary(x, ctx)
    if record is not None:
        record(t, x, v)
    while t < T:
        h = dt if dt is not None else _adaptive_dt(x, v, ctx)
        last = t + h >= T * (1.0 - 1e-14)
        if last:
            h = T - t
        if dt is not None:
            _check_step(x, v, h, ctx)
        x, v, a = velocity_verlet(x, v, h, accel, a)
        t = T if last else t + h
        _check_boundary(x, ctx)
        if record is not None:
            record(t, x, v)
    return PhaseState(x, v)


def evolve(
    s0: PhaseState, T: float, ctx: ForceFieldContext, dt: Optional[float] = None
) -> Trajectory:
    """
    Integrate from s0 over [0, T] and record every step.

    With ``dt=None`` the step is eps/(2|v|) away from obstacles and eps/(1000|v|) inside the
    2 eps shell; the last step is shortened to land on T. After an isolated passage the
    speed is back at |v0| to within 1e-9.

    :raises BoundaryContactError: if the particle comes within the interaction radius of
        the boundary of a non-periodic region
    """
    times: List[float] = []
    positions: List[np.ndarray] = []
    velocities: List[np.ndarray] = []
    energies: List[float] = []

    def record(t, x, v):
        times.append(t)
        positions.append(x.copy())
        velocities.append(v.copy())
        energies.append(0.5 * float(v @ v) + potential_energy(x, ctx))

    _integrate(s0, T, ctx, dt, record)
    return Trajectory(
        times=np.asarray(times),
        positions=np.asarray(positions),
        velocities=np.asarray(velocities),
        energies=np.asarray(energies),
        config_seed=ctx.config.seed,
    )


def evolve_to(
    s0: PhaseState, T: float, ctx: ForceFieldContext, dt: Optional[float] = None
) -> PhaseState:
    """Final state of :func:`evolve` without storing the path"""
    return _integrate(s0, T, ctx, dt, None)


def backward_evolve(
    s: PhaseState, T: float, ctx: ForceFieldContext, dt: Optional[float] = None
) -> PhaseState:
    """U^{-T}: evolve (x, -v) forward and negate the final velocity"""
    return evolve_to(s.reversed(), T, ctx, dt).reversed()


def single_obstacle_deflection(
    rho: float,
    speed: float,
    coupling: float,
    U: RadialPotential,
    dt: Optional[float] = None,
    extrapolate: bool = True,
) -> float:
    """
    Deflection angle of one passage through U centered at the origin, by direct integration.

    Units are those of the obstacle (support radius 1 for the built-in bumps). With
    ``extrapolate`` the result is the Richardson combination (4 theta(dt/2) - theta(dt))/3.
    """
    if dt is None:
        dt = 2e-3 / speed

    def passage(h: float) -> float:
        big_r = U.support_radius
        x = np.array([-1.5 * big_r, rho * big_r])
        v0 = np.array([speed, 0.0])
        v = v0.copy()

        def accel(y):
            r = float(np.linalg.norm(y))
            if r == 0.0 or r >= big_r:
                return np.zeros(2)
            return -coupling * float(U.first(r)) * y / r

        a = accel(x)
        max_steps = int(100.0 * big_r / (speed * h)) + 1000
        for _ in range(max_steps):
            x, v, a = velocity_verlet(x, v, h, accel, a)
            if float(x @ x) > big_r * big_r and float(x @ v) > 0.0:
                break
        else:
            raise NumericGuardError(f"passage at rho={rho} did not leave the obstacle")
        cross = v0[0] * v[1] - v0[1] * v[0]
        return abs(math.atan2(cross, float(v0 @ v)))

    coarse = passage(dt)
    if not extrapolate:
        return coarse
    return (4.0 * passage(0.5 * dt) - coarse) / 3.0


# ------------------------------------------------------------------
# Initial densities
# ------------------------------------------------------------------


class InitialDensity(ABC):
    """
    Probability density f0(x, v) on R^d x S^{d-1}_{|v|} with compact spatial support.

    Subclasses evaluate f0 for arrays of points (n, d); only the direction of v is used.
    """

    def __init__(self, dim: int, speed: float, lower: Sequence[float], upper: Sequence[float]):
        self.dim = int(dim)
        self.speed = float(speed)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.smooth = True
        if self.lower.shape != (self.dim,) or np.any(self.upper <= self.lower):
            raise SpecError(f"invalid support box {lower} .. {upper} for d={dim}")

    @abstractmethod
    def _evaluate(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Values on points inside the support box"""

    @property
    @abstractmethod
    def bound(self) -> float:
        """Upper bound of f0, used by the rejection sampler"""

    def evaluate(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        xs, vs = np.atleast_2d(x), np.atleast_2d(v)
        inside = np.all((xs >= self.lower) & (xs <= self.upper), axis=1)
        out = np.zeros(xs.shape[0])
        if np.any(inside):
            out[inside] = self._evaluate(xs[inside], vs[inside])
        return out if x.ndim > 1 else float(out[0])

    def spatial_marginal(self, x: np.ndarray, n_sphere: int = 32) -> np.ndarray:
        """rho0(x) = int f0(x, v) dv over the sphere"""
        xs = np.atleast_2d(np.asarray(x, dtype=float))
        nodes, weights = sphere_quadrature(self.dim, self.speed, n_sphere)
        out = np.empty(xs.shape[0])
        for i, point in enumerate(xs):
            repeated = np.repeat(point[None, :], nodes.shape[0], axis=0)
            out[i] = self.evaluate(repeated, nodes) @ weights
        return out

    def check_normalization(self, n_space: Optional[int] = None, n_sphere: int = 32) -> float:
        """
        Integral of f0 by tensor Gauss-Legendre in x times the sphere quadrature in v.
        """
        n_space = n_space or (200 if self.dim == 2 else 40)
        nodes, weights = leggauss(n_space)
        half = 0.5 * (self.upper - self.lower)
        mid = 0.5 * (self.upper + self.lower)
        axes = [mid[i] + half[i] * nodes for i in range(self.dim)]
        w_axes = [half[i] * weights for i in range(self.dim)]
        total = 0.0
        # one slab per node of the first axis
        rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, self.dim - 1)
        w_rest = np.ones(1)
        for w in w_axes[1:]:
            w_rest = np.outer(w_rest, w).ravel()
        for x0, w0 in zip(axes[0], w_axes[0]):
            points = np.column_stack([np.full(rest.shape[0], x0), rest])
            total += w0 * float(self.spatial_marginal(points, n_sphere) @ w_rest)
        return total

    def sample(
        self, rng: np.random.Generator, n: int, max_proposals: int = MAX_PROPOSALS
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Rejection sampling: x uniform on the support box, v uniform on the sphere.

        :raises SamplingError: if fewer than n samples are accepted within max_proposals
        """
        xs, vs = [], []
        accepted, proposed = 0, 0
        batch = max(64, 4 * n)
        while accepted < n:
            if proposed >= max_proposals:
                raise SamplingError(
                    f"accepted {accepted}/{n} samples after {proposed} proposals; "
                    "f0 is inconsistent with its declared support or bound"
                )
            m = min(batch, max_proposals - proposed)
            x = self.lower + rng.random((m, self.dim)) * (self.upper - self.lower)
            u = rng.standard_normal((m, self.dim))
            v = self.speed * u / np.linalg.norm(u, axis=1, keepdims=True)
            keep = rng.random(m) * self.bound < self.evaluate(x, v)
            xs.append(x[keep])
            vs.append(v[keep])
            accepted += int(keep.sum())
            proposed += m
        return np.concatenate(xs)[:n], np.concatenate(vs)[:n]

    @staticmethod
    def isotropic_bump(
        center: Sequence[float],
        radius: float,
        dim: int,
        speed: float = 1.0,
        anisotropy: float = 0.0,
    ) -> "BumpDensity":
        return BumpDensity(center, radius, dim, speed, anisotropy)


class BumpDensity(InitialDensity):
    """f0 = C (1 - |x-c|^2/R^2)^3_+ K (1 + a v1/|v|), normalized exactly"""

    def __init__(self, center, radius: float, dim: int, speed: float = 1.0, anisotropy=0.0):
        center = np.asarray(center, dtype=float)
        if radius <= 0.0:
            raise SpecError(f"bump radius must be positive, got {radius}")
        if abs(anisotropy) > 1.0:
            raise SpecError(f"anisotropy must lie in [-1, 1] for f0 >= 0, got {anisotropy}")
        super().__init__(dim, speed, center - radius, center + radius)
        self.center = center
        self.radius = float(radius)
        self.anisotropy = float(anisotropy)
        # int (1 - s^2)^3 s^(d-1) ds over [0, 1] is B(d/2, 4)/2
        mass = sphere_area(dim, 1.0) * radius**dim * 0.5 * beta(dim / 2.0, 4.0)
        self.spatial_constant = 1.0 / mass
        self.velocity_constant = sphere_normalization(dim, speed)

    @property
    def bound(self) -> float:
        return self.spatial_constant * self.velocity_constant * (1.0 + abs(self.anisotropy))

    def spatial_marginal(self, x: np.ndarray, n_sphere: int = 32) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(x, dtype=float))
        s2 = np.sum((xs - self.center) ** 2, axis=1) / self.radius**2
        return self.spatial_constant * np.clip(1.0 - s2, 0.0, None) ** 3

    def _evaluate(self, x, v):
        angular = 1.0 + self.anisotropy * v[:, 0] / np.linalg.norm(v, axis=1)
        return self.spatial_marginal(x) * self.velocity_constant * angular


# ------------------------------------------------------------------
# Monte Carlo over configurations
# ------------------------------------------------------------------


@dataclass
class DensityEstimate:
    """Monte Carlo estimate of f_eps at one phase point"""

    value: float
    std_error: float
    n_used: int
    failures: List[Tuple[int, str]] = field(default_factory=list)


def _zero_mean_field(params: ScalingParams, U: RadialPotential) -> RadialPotential:
    return PolynomialBump(amplitude=0.0, support_radius=params.epsilon * U.support_radius)


def _resolve(params, U, Lambda, intensity):
    U = U or PolynomialBump(power=2)
    Lambda = Lambda or _zero_mean_field(params, U)
    scales = derive_scales(params)
    if intensity is not None:
        scales = DerivedScales(
            mu=intensity if intensity > 0.0 else scales.mu,
            eta=scales.eta,
            collision_rate_scale=scales.collision_rate_scale,
            critical_error=scales.critical_error,
            transport_scale=scales.transport_scale,
            collision_scale=scales.collision_scale,
        )
        mu = intensity
    else:
        mu = scales.mu
    return U, Lambda, scales, mu


def _padding(params: ScalingParams, U: RadialPotential, Lambda: RadialPotential, T: float):
    reach = max(params.epsilon * U.support_radius, Lambda.support_radius)
    return 1.5 * params.speed * T + 2.0 * reach + params.epsilon


def _backward_value(x, v, t, f0, params, scales, mu, U, Lambda, token, dt):
    try:
        if t == 0.0:
            return f0.evaluate(x, v), None
        region = Region.padded_box(x, x, _padding(params, U, Lambda, t))
        config = sample_configuration(region, mu, token)
        ctx = build_force_context(config, U, Lambda, params, scales)
        back = backward_evolve(PhaseState(x, v), t, ctx, dt)
        return f0.evaluate(back.x, back.v), None
    except NumericGuardError as e:
        return math.nan, str(e)


def estimate_f(
    x: Sequence[float],
    v: Sequence[float],
    t: float,
    f0: InitialDensity,
    n_configs: int,
    params: ScalingParams,
    seed: int,
    U: Optional[RadialPotential] = None,
    Lambda: Optional[RadialPotential] = None,
    workers: int = 1,
    intensity: Optional[float] = None,
    dt: Optional[float] = None,
) -> DensityEstimate:
    """
    Estimate f_eps(x, v, t) = E[f0(U^{-t}(x, v))] over n_configs configurations.

    Replica r draws its configuration from ``replica_seed(seed, r)``; results are reduced
    in replica order, so the estimate does not depend on ``workers``.

    :param intensity: overrides the obstacle intensity mu (0 gives free transport)
    :raises NumericGuardError: if fewer than two replicas succeed
    """
    if t < 0.0:
        raise SpecError(f"t must be >= 0, got {t}")
    if n_configs < 2:
        raise SpecError(f"n_configs must be >= 2, got {n_configs}")
    U, Lambda, scales, mu = _resolve(params, U, Lambda, intensity)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)

    results = Parallel(n_jobs=workers)(
        delayed(_backward_value)(
            x, v, t, f0, params, scales, mu, U, Lambda, replica_seed(seed, r), dt
        )
        for r in range(n_configs)
    )
    values = np.array([value for value, _ in results])
    failures = [(r, message) for r, (_, message) in enumerate(results) if message is not None]
    for r, message in failures:
        logger.warning(f"Replica {r} failed: {message}")
    ok = values[np.isfinite(values)]
    if ok.size < 2:
        raise NumericGuardError(f"only {ok.size} of {n_configs} replicas succeeded")
    return DensityEstimate(
        value=float(ok.mean()),
        std_error=float(ok.std(ddof=1) / math.sqrt(ok.size)),
        n_used=int(ok.size),
        failures=failures,
    )


@dataclass
class EnsemblePositions:
    """Particle positions at each requested time; free marks particles outside all supports"""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    free: np.ndarray

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write ``replica,t,x1..xd``"""
        n_times, n, d = self.positions.shape
        replica = np.tile(np.arange(n), n_times)
        t = np.repeat(self.times, n)
        table = np.column_stack([replica, t, self.positions.reshape(-1, d)])
        header = ",".join(["replica", "t"] + [f"x{i + 1}" for i in range(d)])
        fmt = ["%d", "%.17g"] + ["%.17g"] * d
        np.savetxt(path, table, delimiter=",", header=header, comments="", fmt=fmt)


def _particle_path(f0, times, params, scales, mu, U, Lambda, seed, r, dt):
    rng = replica_generator(seed, r, stream=1)
    x0, v0 = f0.sample(rng, 1)
    state = PhaseState(x0[0], v0[0])
    region = Region.padded_box(f0.lower, f0.upper, _padding(params, U, Lambda, times[-1]))
    config = sample_configuration(region, mu, replica_seed(seed, r, 0))
    ctx = build_force_context(config, U, Lambda, params, scales)
    xs, vs, free = [], [], []
    t_prev = 0.0
    for t in times:
        if t > t_prev:
            state = evolve_to(state, t - t_prev, ctx, dt)
            t_prev = t
        xs.append(state.x)
        vs.append(state.v)
        touching = neighbors_within(config, ctx.index, state.x, ctx.interaction_radius)
        free.append(not touching)
    return np.asarray(xs), np.asarray(vs), np.asarray(free)


def ensemble_positions(
    f0: InitialDensity,
    times: Sequence[float],
    n_particles: int,
    params: ScalingParams,
    seed: int,
    U: Optional[RadialPotential] = None,
    Lambda: Optional[RadialPotential] = None,
    workers: int = 1,
    intensity: Optional[float] = None,
    dt: Optional[float] = None,
) -> EnsemblePositions:
    """
    Push n_particles samples of f0 forward, each through its own quenched configuration.

    Particle r draws its initial state from stream 1 and its configuration from stream 0
    of ``(seed, r)``.
    """
    times = np.asarray(sorted(float(t) for t in times))
    if times.size == 0 or times[0] < 0.0:
        raise SpecError("times must be a non-empty list of non-negative values")
    if n_particles < 1:
        raise SpecError(f"n_particles must be >= 1, got {n_particles}")
    U, Lambda, scales, mu = _resolve(params, U, Lambda, intensity)
    logger.info(f"Evolving {n_particles} particles to t={times[-1]:.4g} (workers={workers})")
    paths = Parallel(n_jobs=workers)(
        delayed(_particle_path)(f0, times, params, scales, mu, U, Lambda, seed, r, dt)
        for r in range(n_particles)
    )
    return EnsemblePositions(
        times=times,
        positions=np.stack([p[0] for p in paths], axis=1),
        velocities=np.stack([p[1] for p in paths], axis=1),
        free=np.stack([p[2] for p in paths], axis=1),
    )
