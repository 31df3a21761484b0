# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Hydrodynamic limit: sphere averages, the pseudo-inverse of the Landau operator, three
routes to the diffusion coefficient, the heat equation on a periodic grid, the truncated
Hilbert hierarchy and relaxation to the sphere average.

The diffusion coefficient is the index form D_ij = D delta_ij, i.e. (1/d) times the time
integral of E[v . V_t]. The MSD route (E|x|^2 = 2 d D t) fixes this normalization.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import integrate, stats

from lorentz_diffuse.config_scaling import sphere_normalization
from lorentz_diffuse.errors import (
    GridResolutionError,
    KernelError,
    NonDecayingError,
    RelaxationFitError,
    SpecError,
)
from lorentz_diffuse.scattering_kinetics import apply_landau
from lorentz_diffuse.spherical_field import SphericalField, sphere_quadrature

logger = logging.getLogger(__name__)

SPECTRAL = "spectral"
GREEN_KUBO = "green-kubo"
MSD = "msd"

NON_DECAYING_RATIO = 0.1
SLOW_DECAY_RATIO = 0.01
MIN_R_SQUARED = 0.99
MIN_E_FOLDS = 3.0
NEGATIVE_TOL = 1e-14


def _real_if_close(value: complex, tol: float = 1e-13):
    value = complex(value)
    if abs(value.imag) <= tol * max(1.0, abs(value.real)):
        return value.real
    return value


# ------------------------------------------------------------------
# Sphere averages and the pseudo-inverse
# ------------------------------------------------------------------


def sphere_average(
    f: Union[SphericalField, Callable[[np.ndarray], np.ndarray]],
    dim: Optional[int] = None,
    speed: Optional[float] = None,
    n: int = 64,
):
    """
    <f> = K int f dv.

    Spectral fields return their constant mode; callables ``f(points) -> values`` are
    integrated with the sphere quadrature of ``n`` nodes.
    """
    if isinstance(f, SphericalField):
        return _real_if_close(f.average())
    if dim is None or speed is None:
        raise SpecError("dim and speed are required to average a callable")
    points, weights = sphere_quadrature(dim, speed, n)
    total = np.asarray(f(points)) @ weights
    return _real_if_close(sphere_normalization(dim, speed) * total)


def landau_inverse(f: SphericalField, B: float) -> SphericalField:
    """
    Pseudo-inverse of B * Laplace-Beltrami on mean-zero fields.

    :raises KernelError: if f has a constant component
    """
    if B <= 0.0:
        raise SpecError(f"B must be positive, got {B}")
    if not f.mean_zero:
        raise KernelError(
            f"source has sphere average {f.average():.3g}; the Landau operator is not "
            "invertible on constants"
        )
    eig = B * f.laplace_beltrami_eigenvalues()
    safe = np.where(eig == 0.0, 1.0, eig)
    return f.with_coeffs(np.where(eig == 0.0, 0.0, f.coeffs / safe))


def coordinate_field(dim: int, speed: float, direction, wavevector=None) -> SphericalField:
    """The linear function v -> direction . v"""
    unit = SphericalField.constant(dim, speed, 1.0, wavevector=wavevector)
    return unit.multiply_velocity(direction)


# ------------------------------------------------------------------
# Diffusion coefficient
# ------------------------------------------------------------------


@dataclass
class DiffusionEstimate:
    """Diffusion coefficient from one route, with flags raised along the way"""

    value: float
    method: str
    std_error: float = 0.0
    metadata: Dict[str, float] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        """JSON form ``{method, D, std_error, d, speed, B, notes}``"""
        out = {
            "method": self.method,
            "D": self.value,
            "std_error": self.std_error,
            "d": self.metadata.get("d"),
            "speed": self.metadata.get("speed"),
            "B": self.metadata.get("B"),
            "notes": list(self.flags),
        }
        extra = {k: v for k, v in self.metadata.items() if k not in ("d", "speed", "B")}
        out.update(extra)
        return out


def diffusion_closed_form(dim: int, speed: float, B: float) -> float:
    return speed**4 / (dim * (dim - 1) * B)


def diffusion_tensor(dim: int, speed: float, B: float, n: int = 32) -> np.ndarray:
    """D_ij = -K int v_i L^{-1} v_j dv by sphere quadrature"""
    if B <= 0.0:
        raise SpecError(f"B must be positive, got {B}")
    points, weights = sphere_quadrature(dim, speed, n)
    k = sphere_normalization(dim, speed)
    eye = np.eye(dim)
    inverses = [landau_inverse(coordinate_field(dim, speed, eye[j]), B) for j in range(dim)]
    tensor = np.empty((dim, dim))
    for j, inv in enumerate(inverses):
        values = inv.synthesize(points).real
        for i in range(dim):
            tensor[i, j] = -k * float((points[:, i] * values) @ weights)
    return tensor


def diffusion_spectral(dim: int, speed: float, B: float) -> DiffusionEstimate:
    """D = -K int v_1 L^{-1} v_1 dv; equals speed^4/(d (d-1) B)"""
    value = float(diffusion_tensor(dim, speed, B)[0, 0])
    return DiffusionEstimate(
        value=value,
        method=SPECTRAL,
        metadata={
            "d": dim,
            "speed": speed,
            "B": B,
            "closed_form": diffusion_closed_form(dim, speed, B),
        },
    )


@dataclass
class DecayFit:
    """Exponential decay rate fitted on a window of a positive signal"""

    rate: float
    std_error: float
    r_squared: float


def fit_decay_rate(times, values, start: float = 0.0, stop: Optional[float] = None) -> DecayFit:
    """Least-squares slope of log(values) on [start, stop]; only positive values are used"""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    stop = t[-1] if stop is None else stop
    keep = (t >= start) & (t <= stop) & (y > 0.0)
    if np.count_nonzero(keep) < 3:
        raise RelaxationFitError(f"need >= 3 positive samples in [{start}, {stop}]")
    fit = stats.linregress(t[keep], np.log(y[keep]))
    return DecayFit(rate=-fit.slope, std_error=fit.stderr, r_squared=fit.rvalue**2)


def green_kubo(
    times: Sequence[float],
    vacf: Sequence[float],
    dim: int,
    std_error: Optional[Sequence[float]] = None,
    integral_std_error: Optional[float] = None,
    speed: Optional[float] = None,
    B: Optional[float] = None,
    tail_fraction: float = 0.1,
) -> DiffusionEstimate:
    """
    D = (1/d) (int_0^T vacf dt + vacf(T)/lambda_tail).

    The tail rate is fitted on the last ``tail_fraction`` of the samples. The error bar is
    ``integral_std_error`` (per-path integral spread) when given, otherwise the per-point
    errors combined with the trapezoid weights.

    :raises NonDecayingError: if |vacf(T)| > 10% of |vacf(0)|
    """
    t = np.asarray(times, dtype=float)
    c = np.asarray(vacf, dtype=float)
    if t.size < 2 or t.shape != c.shape or np.any(np.diff(t) <= 0.0):
        raise SpecError("vacf needs >= 2 samples at strictly increasing times")
    meta = {"d": dim, "speed": speed, "B": B}
    if np.all(c == 0.0):
        logger.warning("Green-Kubo input is identically zero")
        return DiffusionEstimate(0.0, GREEN_KUBO, 0.0, meta, ["degenerate"])

    flags: List[str] = []
    ratio = abs(c[-1]) / abs(c[0]) if c[0] != 0.0 else math.inf
    if ratio > NON_DECAYING_RATIO:
        raise NonDecayingError(
            f"vacf(T)/vacf(0) = {ratio:.3g} > {NON_DECAYING_RATIO}; use longer paths"
        )
    if ratio > SLOW_DECAY_RATIO:
        logger.warning(f"vacf(T)/vacf(0) = {ratio:.3g} exceeds 1%; tail extrapolation dominates")
        flags.append("slow-decay")

    body = float(integrate.trapezoid(c, t))
    tail_start = t[-1] - tail_fraction * (t[-1] - t[0])
    tail = 0.0
    noise = 2.0 * float(np.asarray(std_error)[-1]) if std_error is not None else 0.0
    if abs(c[-1]) <= noise:
        flags.append("tail-below-noise")
    else:
        try:
            decay = fit_decay_rate(t, c, start=tail_start)
            if decay.rate > 2.0 * decay.std_error:
                tail = c[-1] / decay.rate
                meta["tail_rate"] = decay.rate
            else:
                flags.append("no-tail-fit")
        except RelaxationFitError:
            flags.append("no-tail-fit")

    if integral_std_error is not None:
        error = float(integral_std_error)
    elif std_error is not None:
        weights = np.zeros_like(t)
        dt = np.diff(t)
        weights[:-1] += 0.5 * dt
        weights[1:] += 0.5 * dt
        error = float(np.sqrt(np.sum((weights * np.asarray(std_error)) ** 2)))
    else:
        error = 0.0
    meta["integral"] = body
    meta["tail"] = tail
    return DiffusionEstimate((body + tail) / dim, GREEN_KUBO, error / dim, meta, flags)


def mean_squared_displacement(positions: np.ndarray) -> np.ndarray:
    """mean_j |x_j(t) - x_j(t_0)|^2 for positions (n_times, n, d)"""
    positions = np.asarray(positions, dtype=float)
    disp = positions - positions[0]
    return np.mean(np.sum(disp**2, axis=-1), axis=1)


def msd_fit(
    times: Sequence[float],
    positions: np.ndarray,
    dim: Optional[int] = None,
    window: Optional[Sequence[float]] = None,
) -> DiffusionEstimate:
    """
    Slope of the mean squared displacement divided by 2d.

    ``window`` = (t_min, t_max) selects the diffusive range. Fits with R^2 < 0.99 are
    flagged as non-diffusive.
    """
    t = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    dim = dim or positions.shape[-1]
    msd = mean_squared_displacement(positions)
    lo, hi = window if window is not None else (t[0], t[-1])
    keep = (t >= lo) & (t <= hi)
    if np.count_nonzero(keep) < 3:
        raise SpecError(f"msd_fit needs >= 3 time points in [{lo}, {hi}]")
    fit = stats.linregress(t[keep], msd[keep])
    r_squared = fit.rvalue**2
    flags = []
    if r_squared < MIN_R_SQUARED:
        logger.warning(f"MSD fit R^2 = {r_squared:.4f} < {MIN_R_SQUARED}: not diffusive")
        flags.append("non-diffusive")
    return DiffusionEstimate(
        value=fit.slope / (2.0 * dim),
        method=MSD,
        std_error=fit.stderr / (2.0 * dim),
        metadata={"d": dim, "r_squared": r_squared, "n_particles": positions.shape[1]},
        flags=flags,
    )


# ------------------------------------------------------------------
# Heat equation on a periodic grid
# ------------------------------------------------------------------


@dataclass
class DensityField:
    """Cell-centred values on a periodic box grid"""

    lower: np.ndarray
    upper: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.lower.size or np.any(self.upper <= self.lower):
            raise SpecError("grid values must have one axis per box dimension")

    @property
    def shape(self):
        return self.values.shape

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / np.asarray(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def axes(self) -> List[np.ndarray]:
        return [
            self.lower[i] + (np.arange(n) + 0.5) * self.spacing[i] for i, n in enumerate(self.shape)
        ]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.dim)

    def wavevectors(self) -> List[np.ndarray]:
        return [2.0 * math.pi * np.fft.fftfreq(n, d) for n, d in zip(self.shape, self.spacing)]

    def with_values(self, values: np.ndarray) -> "DensityField":
        return DensityField(self.lower, self.upper, values)

    @classmethod
    def gaussian(cls, lower, upper, shape, center, variance: float) -> "DensityField":
        """Isotropic Gaussian density of the given per-coordinate variance, sampled on the grid"""
        empty = cls(lower, upper, np.zeros(tuple(shape)))
        diff = empty.points() - np.asarray(center, dtype=float)
        dim = empty.dim
        values = np.exp(-np.sum(diff**2, axis=1) / (2.0 * variance)) / (
            2.0 * math.pi * variance
        ) ** (dim / 2.0)
        return empty.with_values(values.reshape(tuple(shape)))

    def distance(self, other: "DensityField", relative: bool = True) -> float:
        """Grid L2 distance, relative to the norm of ``other`` by default"""
        diff = math.sqrt(float(np.sum((self.values - other.values) ** 2)) * self.cell_volume)
        if not relative:
            return diff
        norm = math.sqrt(float(np.sum(other.values**2)) * self.cell_volume)
        return diff / norm if norm > 0.0 else diff

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write ``x1..xd,value`` rows in C order"""
        header = ",".join([f"x{i + 1}" for i in range(self.dim)] + ["value"])
        table = np.column_stack([self.points(), self.values.reshape(-1)])
        np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")


def heat_plane_wave_factor(D: float, wavevector, t: float) -> float:
    """exp(-D |xi|^2 t), the heat evolution of e^{i xi . x}"""
    xi = np.asarray(wavevector, dtype=float)
    return math.exp(-D * float(xi @ xi) * t)


def _heat_multiplier(rho: DensityField, D: float, t: float) -> np.ndarray:
    ks = np.meshgrid(*rho.wavevectors(), indexing="ij")
    k2 = sum(k**2 for k in ks)
    return np.exp(-D * k2 * t)


def heat_solve(rho0: DensityField, D: float, t: float, check_resolution: bool = True):
    """
    Convolve with the heat kernel of variance 2 D t per coordinate (FFT multiplier).

    :raises GridResolutionError: if sqrt(2 D t) is below two grid cells
    """
    if D <= 0.0 or t < 0.0:
        raise SpecError(f"heat_solve needs D > 0 and t >= 0 (got D={D}, t={t})")
    if t == 0.0:
        return rho0.with_values(rho0.values.copy())
    width = math.sqrt(2.0 * D * t)
    if check_resolution and width < 2.0 * float(np.max(rho0.spacing)):
        raise GridResolutionError(
            f"heat kernel width {width:.3g} is below two grid cells ({np.max(rho0.spacing):.3g})"
        )
    spectrum = np.fft.fftn(rho0.values) * _heat_multiplier(rho0, D, t)
    values = np.fft.ifftn(spectrum).real
    scale = max(float(np.max(np.abs(values))), 1e-300)
    small = (values < 0.0) & (values >= -NEGATIVE_TOL * scale)
    values[small] = 0.0
    if np.any(values < 0.0) and np.all(rho0.values >= 0.0):
        logger.warning(f"heat_solve produced negative values down to {values.min():.3g}")
    return rho0.with_values(values)


def empirical_density(
    positions: np.ndarray, template: DensityField, cutoff: Optional[int] = None
) -> DensityField:
    """
    Low-pass projection of the empirical measure (1/n) sum delta_{x_j} onto the grid's
    Fourier modes with |index| <= cutoff per axis (Nyquist excluded).

    Positions may lie outside the box; the projection is periodic.
    """
    x = np.atleast_2d(np.asarray(positions, dtype=float)) - template.lower
    n = x.shape[0]
    shape = template.shape
    if x.shape[1] != template.dim:
        raise SpecError(f"positions have dimension {x.shape[1]}, grid has {template.dim}")
    factors = []
    for axis, (k, size, h) in enumerate(zip(template.wavevectors(), shape, template.spacing)):
        index = np.fft.fftfreq(size) * size
        keep = np.abs(index) < size / 2.0
        if cutoff is not None:
            keep &= np.abs(index) <= cutoff
        # e^{-i k x_j}, shifted to cell centres
        phase = np.exp(-1j * np.outer(x[:, axis], k)) * np.exp(0.5j * k * h)[None, :]
        factors.append(phase * keep[None, :])
    letters = "abc"[: template.dim]
    spec = ",".join(f"n{c}" for c in letters) + "->" + letters
    coefficients = np.einsum(spec, *factors) / n
    volume = float(np.prod(template.upper - template.lower))
    values = np.fft.ifftn(coefficients * np.prod(shape) / volume).real
    return template.with_values(values)


# ------------------------------------------------------------------
# Hilbert hierarchy
# ------------------------------------------------------------------


def hilbert_g1(xi, amplitude: complex, dim: int, speed: float, B: float) -> SphericalField:
    """g1 = L^{-1}(i (xi . v) amplitude), a mean-zero field carrying wavevector xi"""
    xi = np.asarray(xi, dtype=float)
    source = 1j * amplitude * coordinate_field(dim, speed, xi, wavevector=xi)
    return landau_inverse(source, B)


@dataclass
class HilbertState:
    """Plane-wave Hilbert state at time t: g0 = A e^{-D|xi|^2 t} e^{i xi.x}, g1, g2"""

    wavevector: np.ndarray
    amplitude: complex
    dim: int
    speed: float
    B: float
    D: float
    t: float
    g0: SphericalField
    g1: SphericalField
    g2: SphericalField
    source: SphericalField
    mean_field_gradient: Optional[np.ndarray] = None

    @property
    def g0_amplitude(self) -> complex:
        return self.g0.average()


def _g2_source(g0_amp, xi, D, g1, mean_field_gradient):
    dt_g0 = -D * float(xi @ xi) * g0_amp
    source = 1j * g1.multiply_velocity(xi) + dt_g0
    if mean_field_gradient is not None:
        source = source - g1.tangential_divergence(mean_field_gradient)
    return source


def build_hilbert_state(
    xi,
    amplitude: complex,
    dim: int,
    speed: float,
    B: float,
    D: Optional[float] = None,
    t: float = 0.0,
    mean_field_gradient=None,
) -> HilbertState:
    """
    Assemble g0, g1 and g2 for a plane wave.

    D defaults to the spectral value. The g2 source is
    dt g0 + v . grad_x g1 - div_S((grad Phi)_T g1) for a constant gradient of Phi;
    g2 inverts its mean-zero part.
    """
    xi = np.asarray(xi, dtype=float)
    if D is None:
        D = diffusion_spectral(dim, speed, B).value
    grad = None if mean_field_gradient is None else np.asarray(mean_field_gradient, dtype=float)
    g0_amp = amplitude * heat_plane_wave_factor(D, xi, t)
    g0 = SphericalField.constant(dim, speed, g0_amp, wavevector=xi)
    g1 = hilbert_g1(xi, g0_amp, dim, speed, B)
    source = _g2_source(g0_amp, xi, D, g1, grad)
    g2 = landau_inverse(source.remove_mean(), B)
    return HilbertState(xi, amplitude, dim, speed, B, D, t, g0, g1, g2, source, grad)


@dataclass
class HilbertResiduals:
    """The four hierarchy residuals plus the size of dt g1 and g2"""

    kernel: float
    solvability: float
    compatibility: float
    source_mean: float
    dt_g1_norm: float
    g2_norm: float

    @property
    def max_residual(self) -> float:
        return max(self.kernel, self.solvability, self.compatibility, self.source_mean)

    def to_dict(self) -> Dict[str, float]:
        return {
            "kernel": self.kernel,
            "solvability": self.solvability,
            "compatibility": self.compatibility,
            "source_mean": self.source_mean,
            "dt_g1_norm": self.dt_g1_norm,
            "g2_norm": self.g2_norm,
        }


def hilbert_residuals(state: HilbertState) -> HilbertResiduals:
    """
    (a) |L g0|, (b) |<v . grad_x g0>|, (c) |dt g0 + <v . grad_x g1>|, (d) |<g2 source>|.
    """
    xi = state.wavevector
    k2 = float(xi @ xi)
    g0_amp = state.g0.average()
    kernel = apply_landau(state.g0, state.B).l2_norm()
    solvability = abs(sphere_average(1j * state.g0.multiply_velocity(xi)))
    transport_g1 = sphere_average(1j * state.g1.multiply_velocity(xi))
    compatibility = abs(-state.D * k2 * g0_amp + transport_g1)
    source_mean = abs(sphere_average(state.source))
    return HilbertResiduals(
        kernel=kernel,
        solvability=solvability,
        compatibility=compatibility,
        source_mean=source_mean,
        dt_g1_norm=state.D * k2 * state.g1.l2_norm(),
        g2_norm=state.g2.l2_norm(),
    )


# ------------------------------------------------------------------
# Relaxation to the sphere average
# ------------------------------------------------------------------


def spectral_gap(dim: int, speed: float, B: float) -> float:
    """(d - 1) B / speed^2, the smallest non-zero eigenvalue of -B Laplace-Beltrami"""
    return (dim - 1) * B / speed**2


def landau_semigroup(f: SphericalField, B: float, t: float, rate_factor: float = 1.0):
    """exp(rate_factor B Laplace-Beltrami t) f"""
    if t < 0.0:
        raise SpecError(f"t must be >= 0, got {t}")
    return f.with_coeffs(np.exp(rate_factor * B * f.laplace_beltrami_eigenvalues() * t) * f.coeffs)


def deviation_norms(fields: Sequence[SphericalField]) -> np.ndarray:
    """||g - <g>|| for each field"""
    return np.array([g.remove_mean().l2_norm() for g in fields])


@dataclass
class RelaxationFit:
    """Fitted decay rate of ||g - <g>|| against lambda eta^{2 delta}"""

    rate: float
    predicted: float
    std_error: float
    e_folds: float
    degenerate: bool = False

    @property
    def relative_error(self) -> float:
        return abs(self.rate - self.predicted) / self.predicted


def relaxation_fit(
    times: Sequence[float],
    trajectory: Union[Sequence[SphericalField], Sequence[float]],
    eta: float,
    delta: float,
    B: float,
    speed: float,
    dim: int,
) -> RelaxationFit:
    """
    Exponential fit of ||g(t) - <g(t)>||; the trajectory is a list of fields or of norms.

    :raises RelaxationFitError: if the trajectory spans fewer than 3 e-folds
    """
    t = np.asarray(times, dtype=float)
    items = list(trajectory)
    norms = deviation_norms(items) if isinstance(items[0], SphericalField) else np.asarray(items)
    predicted = spectral_gap(dim, speed, B) * eta ** (2.0 * delta)
    if np.all(norms <= 1e-14):
        logger.info("Relaxation input has no sphere-varying part")
        return RelaxationFit(math.nan, predicted, math.nan, 0.0, degenerate=True)
    positive = norms[norms > 0.0]
    e_folds = math.log(positive[0] / positive[-1]) if positive.size > 1 else 0.0
    if e_folds < MIN_E_FOLDS:
        raise RelaxationFitError(
            f"trajectory spans {e_folds:.2f} e-folds, need >= {MIN_E_FOLDS}; extend the time grid"
        )
    decay = fit_decay_rate(t, norms)
    return RelaxationFit(decay.rate, predicted, decay.std_error, e_folds)


def semigroup_bound_holds(times, norms, rate: float, rel_tol: float = 1e-6) -> bool:
    """||g(t) - <g>|| <= e^{-rate t} ||g(0) - <g>|| (1 + rel_tol) on every sample"""
    t = np.asarray(times, dtype=float)
    n = np.asarray(norms, dtype=float)
    return bool(np.all(n <= np.exp(-rate * (t - t[0])) * n[0] * (1.0 + rel_tol)))
