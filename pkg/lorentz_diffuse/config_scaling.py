# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Scaling parameters of the weak-coupling Lorentz gas.

A run is fixed by the ratio epsilon between obstacle radius and macroscopic length,
the coupling exponent alpha, the diffusive exponent delta, the dimension and the
conserved speed. The scaling function is the power law eta = epsilon**(-eta_exponent);
every regime condition then reduces to a sign check on an exponent.

Usage:
    from lorentz_diffuse.config_scaling import ScalingParams, derive_scales

    params = ScalingParams(epsilon=0.1, alpha=0.25, dim=2)
    scales = derive_scales(params)
    print(scales.mu)   # obstacles per unit volume
"""

import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Optional, Union

from scipy.special import gamma

from lorentz_diffuse.errors import ScalingError, SpecError

logger = logging.getLogger(__name__)

SCALING_KEYS = (
    "epsilon",
    "alpha",
    "delta",
    "dim",
    "speed",
    "eta_exponent",
    "t_eta_exponent",
    "diffusive",
)

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class ScalingParams:
    """Immutable scaling parameters; validated on construction"""

    epsilon: float = 0.1
    alpha: float = 0.25
    delta: float = 1.0
    dim: int = 2
    speed: float = 1.0
    eta_exponent: float = 0.0
    t_eta_exponent: Optional[float] = None
    diffusive: bool = False

    def __post_init__(self):
        if self.t_eta_exponent is None:
            object.__setattr__(self, "t_eta_exponent", 2.0 * self.delta + 1.0)
        self.validate()

    def validate(self) -> None:
        """
        Check the parameter invariants.

        :raises ScalingError: naming the first violated condition
        """
        if not 0.0 < self.epsilon <= 1.0:
            raise ScalingError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0.0 < self.alpha < 0.5:
            raise ScalingError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        if self.delta <= 0.0:
            raise ScalingError(f"delta must be positive, got {self.delta}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ScalingError(f"dim must be an integer >= 2, got {self.dim}")
        if self.speed <= 0.0:
            raise ScalingError(f"speed must be positive, got {self.speed}")
        if self.eta_exponent < 0.0:
            raise ScalingError(f"eta_exponent must be >= 0, got {self.eta_exponent}")
        if self.t_eta_exponent <= 2.0 * self.delta:
            raise ScalingError(
                f"t_eta_exponent must exceed 2*delta = {2.0 * self.delta}, "
                f"got {self.t_eta_exponent}"
            )

    @property
    def eta(self) -> float:
        """Scaling function eta = epsilon**(-eta_exponent)"""
        return self.epsilon ** (-self.eta_exponent)

    @property
    def coupling(self) -> float:
        """Amplitude epsilon**alpha of the scaled scattering potential"""
        return self.epsilon**self.alpha

    @property
    def t_eta(self) -> float:
        """Short time t_eta = eta**(-t_eta_exponent)"""
        return self.eta ** (-self.t_eta_exponent)

    def replace(self, **changes) -> "ScalingParams":
        """Return a copy with some fields changed (validated again)"""
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        if "delta" in changes and "t_eta_exponent" not in changes:
            values["t_eta_exponent"] = None
        values.update(changes)
        return ScalingParams(**values)


@dataclass(frozen=True)
class DerivedScales:
    """Quantities derived from ScalingParams"""

    mu: float
    eta: float
    collision_rate_scale: float
    critical_error: float
    # eta**delta in the diffusive regime, 1 otherwise
    transport_scale: float = 1.0
    # eta**(2 delta) * epsilon**(-2 alpha) in the diffusive regime, epsilon**(-2 alpha) otherwise
    collision_scale: float = 1.0


@dataclass(frozen=True)
class RegimeReport:
    """Outcome of check_regime"""

    exponent: float
    critical_error_vanishes: bool
    alpha_admissible: bool

    @property
    def passed(self) -> bool:
        return self.critical_error_vanishes and self.alpha_admissible


def derive_scales(params: ScalingParams, diffusive: Optional[bool] = None) -> DerivedScales:
    """
    Derive the obstacle intensity and the diffusive-regime quantities.

    :param params: validated scaling parameters
    :param diffusive: overrides ``params.diffusive`` when given
    :return: DerivedScales
    """
    params.validate()
    if diffusive is None:
        diffusive = params.diffusive
    eps, alpha, d = params.epsilon, params.alpha, params.dim
    eta = params.eta

    mu = eps ** (-d + 1 - 2 * alpha)
    if diffusive:
        mu *= eta**params.delta
    rate = eps ** (-2 * alpha)
    critical = eps ** (d - 1 - 8 * alpha) * eta ** (4 * params.delta)
    transport = eta**params.delta if diffusive else 1.0
    collision = (eta ** (2 * params.delta) if diffusive else 1.0) * rate

    for name, value in (("mu", mu), ("eta", eta), ("critical_error", critical)):
        if not (math.isfinite(value) and value > 0.0):
            raise ScalingError(f"derived {name} is not positive and finite: {value}")

    return DerivedScales(
        mu=mu,
        eta=eta,
        collision_rate_scale=rate,
        critical_error=critical,
        transport_scale=transport,
        collision_scale=collision,
    )


def check_regime(params: ScalingParams) -> RegimeReport:
    """
    Report whether the critical error eps**(d-1-8a) * eta**(4 delta) vanishes as eps -> 0.

    With eta = eps**(-beta) the error is eps**(d - 1 - 8a - 4 delta beta); the inequality is
    strict, so an exponent of exactly zero fails.
    """
    d, alpha = params.dim, params.alpha
    exponent = d - 1 - 8 * alpha - 4 * params.delta * params.eta_exponent
    report = RegimeReport(
        exponent=exponent,
        critical_error_vanishes=exponent > 0.0,
        alpha_admissible=alpha < (d - 1) / 8.0,
    )
    if not report.passed:
        logger.info(f"Regime check failed: exponent={exponent:.6g}, alpha={alpha}, dim={d}")
    return report


def sphere_normalization(dim: int, speed: float) -> float:
    """
    Normalization K = Gamma(d/2) / (2 pi**(d/2) |v|**(d-1)).

    K times the surface measure of the sphere of radius ``speed`` is 1.
    """
    if dim < 2 or speed <= 0.0:
        raise ScalingError(f"sphere normalization needs dim >= 2 and speed > 0 ({dim}, {speed})")
    return float(gamma(dim / 2.0) / (2.0 * math.pi ** (dim / 2.0) * speed ** (dim - 1)))


def sphere_area(dim: int, speed: float) -> float:
    """Surface measure of the velocity sphere, 1/K"""
    return 1.0 / sphere_normalization(dim, speed)


# ------------------------------------------------------------------
# key=value files
# ------------------------------------------------------------------


def parse_key_values(text: str, source: str = "<string>") -> Dict[str, str]:
    """
    Parse ``key = value`` lines. Blank lines and ``#`` comments are skipped.

    :raises SpecError: on malformed lines or duplicate keys
    """
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise SpecError(f"{source}:{lineno}: empty key")
        if key in values:
            raise SpecError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def read_key_values(path: Union[str, Path]) -> Dict[str, str]:
    """Read a key=value file from disk"""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise SpecError(f"cannot read spec file {path}: {e}") from e
    return parse_key_values(text, source=str(path))


def parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in _TRUE_WORDS:
        return True
    if lowered in _FALSE_WORDS:
        return False
    raise SpecError(f"not a boolean: {value!r}")


def scaling_params_from_mapping(values: Dict[str, str]) -> ScalingParams:
    """
    Build ScalingParams from the ScalingParams subset of a key=value mapping.

    Keys that are not ScalingParams keys are ignored here; callers decide whether
    they are allowed.
    """
    kwargs = {}
    try:
        for key in SCALING_KEYS:
            if key not in values:
                continue
            raw = values[key]
            if key == "dim":
                kwargs[key] = int(raw)
            elif key == "diffusive":
                kwargs[key] = parse_bool(raw)
            else:
                kwargs[key] = float(raw)
    except ValueError as e:
        raise SpecError(f"invalid scaling parameter value: {e}") from e
    return ScalingParams(**kwargs)


def load_scaling_params(path: Union[str, Path]) -> ScalingParams:
    """
    Load ScalingParams from a key=value file accepting exactly the scaling keys.

    :raises SpecError: on unknown keys (typos) or invalid values
    """
    values = read_key_values(path)
    unknown = sorted(set(values) - set(SCALING_KEYS))
    if unknown:
        raise SpecError(f"unknown keys in {path}: {', '.join(unknown)}")
    params = scaling_params_from_mapping(values)
    logger.debug(f"Loaded scaling parameters from {path}: {params}")
    return params
