# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Band-limited functions on the velocity sphere of radius ``speed``.

d = 2 fields are Fourier series sum_k c_k e^{ik phi}, stored as a complex array indexed
k + K for k = -K..K. d = 3 fields are spherical harmonic series sum a_lm Y_lm, stored as an
(L + 1, 2L + 1) complex array indexed [l, m + L] with zeros for |m| > l. Coefficients use
the unit-sphere normalization of ``scipy.special.sph_harm_y``.

A field may carry a spatial wavevector xi; it then stands for the plane wave
g(x, v) = e^{i xi.x} g(v).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import sph_harm_y

from lorentz_diffuse.errors import SpecError

logger = logging.getLogger(__name__)

MEAN_ZERO_TOL = 1e-12


def sphere_quadrature(dim: int, speed: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes (m, dim) on the sphere of radius ``speed`` and surface-measure weights.

    d = 2: n equispaced angles (exact for trigonometric degree < n).
    d = 3: n Gauss-Legendre nodes in cos(theta) times 2n equispaced azimuths
    (exact for harmonic degree <= 2n - 1).
    """
    if dim == 2:
        phi = 2.0 * math.pi * np.arange(n) / n
        points = speed * np.column_stack([np.cos(phi), np.sin(phi)])
        return points, np.full(n, 2.0 * math.pi * speed / n)
    if dim == 3:
        points, weights = _unit_sphere_grid(n)
        return speed * points, speed**2 * weights
    raise SpecError(f"sphere quadrature supports d = 2, 3 (got {dim})")


def _unit_sphere_grid(n_gl: int, n_phi: Optional[int] = None):
    n_phi = n_phi or 2 * n_gl
    x, w = leggauss(n_gl)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    cos_t, az = np.meshgrid(x, phi, indexing="ij")
    sin_t = np.sqrt(1.0 - cos_t**2)
    points = np.stack([sin_t * np.cos(az), sin_t * np.sin(az), cos_t], axis=-1).reshape(-1, 3)
    weights = np.repeat(w, n_phi) * (2.0 * math.pi / n_phi)
    return points, weights


def _angles(points: np.ndarray):
    norms = np.linalg.norm(points, axis=1)
    theta = np.arccos(np.clip(points[:, 2] / norms, -1.0, 1.0))
    phi = np.arctan2(points[:, 1], points[:, 0])
    return theta, phi


def _harmonic_matrix(degree: int, points: np.ndarray) -> np.ndarray:
    """Y_lm at the points, shape (m_points, L + 1, 2L + 1)"""
    theta, phi = _angles(points)
    out = np.zeros((points.shape[0], degree + 1, 2 * degree + 1), dtype=complex)
    for ell in range(degree + 1):
        for m in range(-ell, ell + 1):
            out[:, ell, m + degree] = sph_harm_y(ell, m, theta, phi)
    return out


@dataclass(frozen=True)
class SphericalField:
    """Spectral representation of a function on the velocity sphere"""

    dim: int
    speed: float
    coeffs: np.ndarray
    wavevector: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise SpecError(f"spherical fields support d = 2, 3 (got {self.dim})")
        if self.speed <= 0.0:
            raise SpecError(f"speed must be positive, got {self.speed}")
        coeffs = np.array(self.coeffs, dtype=complex)
        if self.dim == 2 and (coeffs.ndim != 1 or coeffs.size % 2 == 0):
            raise SpecError("d = 2 coefficients must be a 1-D array of odd length")
        if self.dim == 3 and (coeffs.ndim != 2 or coeffs.shape[1] != 2 * coeffs.shape[0] - 1):
            raise SpecError("d = 3 coefficients must have shape (L + 1, 2L + 1)")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        if self.wavevector is not None:
            object.__setattr__(self, "wavevector", tuple(float(v) for v in self.wavevector))

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def zeros(cls, dim: int, speed: float, degree: int = 0, wavevector=None) -> "SphericalField":
        shape = (2 * degree + 1,) if dim == 2 else (degree + 1, 2 * degree + 1)
        return cls(dim, speed, np.zeros(shape, dtype=complex), wavevector)

    @classmethod
    def constant(cls, dim: int, speed: float, value: complex, degree: int = 0, wavevector=None):
        field = cls.zeros(dim, speed, degree, wavevector)
        coeffs = np.array(field.coeffs)
        if dim == 2:
            coeffs[degree] = value
        else:
            coeffs[0, degree] = value * math.sqrt(4.0 * math.pi)
        return field.with_coeffs(coeffs)

    @classmethod
    def from_modes(cls, dim: int, speed: float, modes: Dict, wavevector=None) -> "SphericalField":
        """
        Build from a mode dictionary: {k: c} for d = 2, {(l, m): a} for d = 3.
        """
        if dim == 2:
            degree = max((abs(k) for k in modes), default=0)
            coeffs = np.zeros(2 * degree + 1, dtype=complex)
            for k, c in modes.items():
                coeffs[k + degree] += c
        else:
            degree = max((ell for ell, _ in modes), default=0)
            coeffs = np.zeros((degree + 1, 2 * degree + 1), dtype=complex)
            for (ell, m), a in modes.items():
                if abs(m) > ell:
                    raise SpecError(f"invalid harmonic order m={m} for l={ell}")
                coeffs[ell, m + degree] += a
        return cls(dim, speed, coeffs, wavevector)

    @classmethod
    def from_function(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        dim: int,
        speed: float,
        degree: int,
        wavevector=None,
    ) -> "SphericalField":
        """
        Project ``func(points) -> values`` onto modes up to ``degree``.

        Exact for band-limited inputs of degree <= ``degree + 1``.
        """
        if dim == 2:
            n = max(4 * degree + 8, 16)
            points, _ = sphere_quadrature(2, speed, n)
            values = np.asarray(func(points), dtype=complex)
            spectrum = np.fft.fft(values) / n
            ks = np.arange(-degree, degree + 1)
            return cls(2, speed, spectrum[ks % n], wavevector)
        unit, weights = _unit_sphere_grid(degree + 3, 2 * degree + 5)
        values = np.asarray(func(speed * unit), dtype=complex)
        basis = _harmonic_matrix(degree, unit)
        coeffs = np.einsum("p,p,plm->lm", weights, values, np.conj(basis))
        for ell in range(degree + 1):
            coeffs[ell, : degree - ell] = 0.0
            coeffs[ell, degree + ell + 1 :] = 0.0
        return cls(3, speed, coeffs, wavevector)

    @classmethod
    def random(
        cls,
        dim: int,
        speed: float,
        degree: int,
        rng: np.random.Generator,
        mean_zero: bool = False,
        real: bool = True,
    ) -> "SphericalField":
        """Random band-limited field with coefficients decaying like 1/(1 + degree)"""
        if dim == 2:
            ks = np.arange(-degree, degree + 1)
            coeffs = (rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)) / (
                1.0 + np.abs(ks)
            )
            if real:
                coeffs = 0.5 * (coeffs + np.conj(coeffs[::-1]))
        else:
            coeffs = np.zeros((degree + 1, 2 * degree + 1), dtype=complex)
            for ell in range(degree + 1):
                for m in range(-ell, ell + 1):
                    coeffs[ell, m + degree] = complex(*rng.standard_normal(2)) / (1.0 + ell)
            if real:
                # Y_{l,-m} = (-1)^m conj(Y_lm)
                ms = np.arange(-degree, degree + 1)
                mirrored = np.conj(coeffs[:, ::-1]) * ((-1.0) ** ms)[None, :]
                coeffs = 0.5 * (coeffs + mirrored)
        field = cls(dim, speed, coeffs)
        return field.remove_mean() if mean_zero else field

    def with_coeffs(self, coeffs: np.ndarray, wavevector="keep") -> "SphericalField":
        wv = self.wavevector if wavevector == "keep" else wavevector
        return SphericalField(self.dim, self.speed, coeffs, wv)

    # ------------------------------------------------------------------
    # Basic properties
    # ------------------------------------------------------------------

    @property
    def degree(self) -> int:
        return (self.coeffs.size - 1) // 2 if self.dim == 2 else self.coeffs.shape[0] - 1

    @property
    def constant_coefficient(self) -> complex:
        if self.dim == 2:
            return complex(self.coeffs[self.degree])
        return complex(self.coeffs[0, self.degree])

    def average(self) -> complex:
        """K times the sphere integral: the constant mode in function units"""
        if self.dim == 2:
            return self.constant_coefficient
        return self.constant_coefficient / math.sqrt(4.0 * math.pi)

    def sphere_integral(self) -> complex:
        if self.dim == 2:
            return 2.0 * math.pi * self.speed * self.constant_coefficient
        return self.speed**2 * math.sqrt(4.0 * math.pi) * self.constant_coefficient

    @property
    def mean_zero(self) -> bool:
        scale = max(float(np.max(np.abs(self.coeffs))), 1.0)
        return abs(self.constant_coefficient) <= MEAN_ZERO_TOL * scale

    def l2_norm(self) -> float:
        """L2 norm with respect to the surface measure of the sphere of radius speed"""
        total = float(np.sum(np.abs(self.coeffs) ** 2))
        if self.dim == 2:
            return math.sqrt(2.0 * math.pi * self.speed * total)
        return self.speed * math.sqrt(total)

    def mode_numbers(self) -> np.ndarray:
        """k (d = 2) or l (d = 3) for every coefficient slot"""
        if self.dim == 2:
            return np.arange(-self.degree, self.degree + 1)
        ells = np.arange(self.degree + 1)
        return np.repeat(ells[:, None], 2 * self.degree + 1, axis=1)

    def laplace_beltrami_eigenvalues(self) -> np.ndarray:
        """-k^2/speed^2 (d = 2) or -l(l+1)/speed^2 (d = 3), per coefficient slot"""
        n = self.mode_numbers().astype(float)
        if self.dim == 2:
            return -(n**2) / self.speed**2
        return -n * (n + 1.0) / self.speed**2

    def spectral_moment(self, order: int) -> float:
        """
        Norm of (-Laplace-Beltrami)**(order/2) f; order 4 measures the fourth derivatives.
        """
        eig = np.abs(self.laplace_beltrami_eigenvalues())
        total = float(np.sum(eig**order * np.abs(self.coeffs) ** 2))
        scale = 2.0 * math.pi * self.speed if self.dim == 2 else self.speed**2
        return math.sqrt(scale * total)

    # ------------------------------------------------------------------
    # Synthesis and arithmetic
    # ------------------------------------------------------------------

    def synthesize(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the field at velocity points (m, dim); only their direction matters"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dim == 2:
            phi = np.arctan2(points[:, 1], points[:, 0])
            ks = np.arange(-self.degree, self.degree + 1)
            return np.exp(1j * np.outer(phi, ks)) @ self.coeffs
        basis = _harmonic_matrix(self.degree, points)
        return np.einsum("plm,lm->p", basis, self.coeffs)

    def resize(self, degree: int) -> "SphericalField":
        """Zero-pad or truncate to a new band limit"""
        if self.dim == 2:
            coeffs = np.zeros(2 * degree + 1, dtype=complex)
            keep = min(degree, self.degree)
            coeffs[degree - keep : degree + keep + 1] = self.coeffs[
                self.degree - keep : self.degree + keep + 1
            ]
        else:
            coeffs = np.zeros((degree + 1, 2 * degree + 1), dtype=complex)
            keep = min(degree, self.degree)
            coeffs[: keep + 1, degree - keep : degree + keep + 1] = self.coeffs[
                : keep + 1, self.degree - keep : self.degree + keep + 1
            ]
        return self.with_coeffs(coeffs)

    def _aligned(self, other: "SphericalField"):
        if self.dim != other.dim or not math.isclose(self.speed, other.speed):
            raise SpecError("fields live on different spheres")
        degree = max(self.degree, other.degree)
        return self.resize(degree), other.resize(degree)

    def __add__(self, other):
        if isinstance(other, SphericalField):
            a, b = self._aligned(other)
            return a.with_coeffs(a.coeffs + b.coeffs)
        return self + SphericalField.constant(self.dim, self.speed, other, self.degree)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def remove_mean(self) -> "SphericalField":
        coeffs = np.array(self.coeffs)
        if self.dim == 2:
            coeffs[self.degree] = 0.0
        else:
            coeffs[0, self.degree] = 0.0
        return self.with_coeffs(coeffs)

    def multiply_velocity(self, direction) -> "SphericalField":
        """(direction . v) f, one degree higher"""
        a = np.asarray(direction, dtype=float)
        if self.dim == 2:
            padded = self.resize(self.degree + 1).coeffs
            # a.v = speed/2 [(a1 - i a2) e^{i phi} + (a1 + i a2) e^{-i phi}]
            up = 0.5 * self.speed * (a[0] - 1j * a[1])
            down = 0.5 * self.speed * (a[0] + 1j * a[1])
            coeffs = np.zeros_like(padded)
            coeffs[1:] += up * padded[:-1]
            coeffs[:-1] += down * padded[1:]
            return self.with_coeffs(coeffs)
        return SphericalField.from_function(
            lambda v: (v @ a) * self.synthesize(v),
            3,
            self.speed,
            self.degree + 1,
            self.wavevector,
        )

    def tangential_divergence(self, force) -> "SphericalField":
        """
        div_S(a_T f) on the circle: (1/speed) d/dphi [(a . e_phi) f] for a constant vector a.

        Conservative form of the Vlasov term; its sphere integral is identically zero.
        """
        if self.dim != 2:
            raise SpecError("tangential divergence is implemented for d = 2 fields")
        a = np.asarray(force, dtype=float)
        padded = self.resize(self.degree + 1).coeffs
        # a.e_phi = 1/2 [(a2 + i a1) e^{i phi} + (a2 - i a1) e^{-i phi}]
        up = 0.5 * (a[1] + 1j * a[0])
        down = 0.5 * (a[1] - 1j * a[0])
        product = np.zeros_like(padded)
        product[1:] += up * padded[:-1]
        product[:-1] += down * padded[1:]
        ks = np.arange(-(self.degree + 1), self.degree + 2)
        return self.with_coeffs(1j * ks * product / self.speed)
