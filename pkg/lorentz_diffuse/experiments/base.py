# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Base experiment plugin, the experiment spec and the convergence table.
"""

import hashlib
import logging
import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from lorentz_diffuse.config_scaling import (
    SCALING_KEYS,
    ScalingParams,
    parse_key_values,
    scaling_params_from_mapping,
)
from lorentz_diffuse.errors import SpecError
from lorentz_diffuse.potentials_forces import RadialPotential, profile_from_id

logger = logging.getLogger(__name__)

EXPERIMENT_KEYS = (
    "potential",
    "potential_amplitude",
    "mean_field",
    "mean_field_amplitude",
    "mean_field_radius",
    "coupling",
    "n_grid",
    "n_paths",
    "n_particles",
    "dt",
    "t_final",
    "times",
    "epsilons",
    "eta_factors",
    "B",
    "wavevector",
    "seed",
    "out",
    "cache",
)


@dataclass(frozen=True)
class ExperimentSpec:
    """
    A parsed key=value experiment file.

    ``params`` holds the scaling keys; every other key stays as text in ``options`` and is
    converted on access.
    """

    subcommand: str
    params: ScalingParams
    options: Dict[str, str]
    seed: int = 0
    out: Path = Path("out")
    text: str = ""

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def has(self, key: str) -> bool:
        return key in self.options

    def given(self, key: str) -> bool:
        """Whether the spec text sets ``key`` (scaling keys included)"""
        return key in parse_key_values(self.text)

    def get_str(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.options.get(key, default)

    def get_float(self, key: str, default: Optional[float] = None) -> Optional[float]:
        if key not in self.options:
            return default
        try:
            return float(self.options[key])
        except ValueError as e:
            raise SpecError(f"{key}: expected a number, got {self.options[key]!r}") from e

    def get_int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        if key not in self.options:
            return default
        try:
            return int(self.options[key])
        except ValueError as e:
            raise SpecError(f"{key}: expected an integer, got {self.options[key]!r}") from e

    def get_floats(self, key: str, default: Sequence[float] = ()) -> Tuple[float, ...]:
        """Comma separated list"""
        if key not in self.options:
            return tuple(default)
        try:
            return tuple(float(item) for item in self.options[key].split(",") if item.strip())
        except ValueError as e:
            raise SpecError(f"{key}: expected comma separated numbers") from e

    def epsilons(self, default: Sequence[float]) -> Tuple[float, ...]:
        return self.get_floats("epsilons", default)

    def potential(self) -> RadialPotential:
        """Scattering profile U (default bump2)"""
        return profile_from_id(
            self.get_str("potential", "bump2"), self.get_float("potential_amplitude", 1.0)
        )

    def mean_field(self) -> Optional[RadialPotential]:
        """Mean-field profile Lambda, or None"""
        kind = self.get_str("mean_field", "none")
        if kind == "none":
            return None
        return profile_from_id(
            kind,
            self.get_float("mean_field_amplitude", 1.0),
            self.get_float("mean_field_radius", 1.0),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Spec echo for the manifest"""
        return {
            "subcommand": self.subcommand,
            "params": {key: getattr(self.params, key) for key in SCALING_KEYS},
            "options": dict(sorted(self.options.items())),
            "seed": self.seed,
        }


def _check_decreasing(name: str, values: Sequence[float]) -> None:
    if any(b >= a for a, b in zip(values, values[1:])):
        raise SpecError(f"{name} must be strictly decreasing, got {list(values)}")


def parse_experiment_spec(
    text: str,
    subcommand: str,
    source: str = "<string>",
    seed: Optional[int] = None,
    out: Optional[Union[str, Path]] = None,
) -> ExperimentSpec:
    """
    Parse and validate an experiment spec.

    The command line ``seed`` and ``out`` take precedence over the file.

    :raises SpecError: on unknown keys, unresolvable profile ids, non-decreasing sweeps or
        invalid scaling parameters (including t_eta_exponent <= 2 delta)
    """
    values = parse_key_values(text, source)
    unknown = sorted(set(values) - set(SCALING_KEYS) - set(EXPERIMENT_KEYS))
    if unknown:
        raise SpecError(f"{source}: unknown keys {', '.join(unknown)}")
    params = scaling_params_from_mapping(values)
    options = {k: v for k, v in values.items() if k not in SCALING_KEYS}
    if seed is None:
        try:
            seed = int(options.get("seed", "0"))
        except ValueError as e:
            raise SpecError(f"seed: expected an integer, got {options['seed']!r}") from e
    spec = ExperimentSpec(
        subcommand=subcommand,
        params=params,
        options=options,
        seed=int(seed),
        out=Path(out if out is not None else options.get("out", "out")),
        text=text,
    )
    _check_decreasing("epsilons", spec.epsilons(()))
    spec.potential()
    spec.mean_field()
    return spec


def load_experiment_spec(
    path: Union[str, Path],
    subcommand: str,
    seed: Optional[int] = None,
    out: Optional[Union[str, Path]] = None,
) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise SpecError(f"cannot read spec file {path}: {e}") from e
    return parse_experiment_spec(text, subcommand, str(path), seed, out)


# ------------------------------------------------------------------
# Convergence tables
# ------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    sweep: float
    observable: str
    predicted: float
    measured: float
    error: float = 0.0


@dataclass(frozen=True)
class SlopeFit:
    """Log-log slope with a two-sided confidence interval"""

    slope: float
    intercept: float
    std_error: float
    ci_low: float
    ci_high: float
    n: int

    def within(self, target: float, rel_tol: float) -> bool:
        return abs(self.slope - target) <= rel_tol * abs(target)

    def overlaps(self, other: "SlopeFit") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high

    def to_dict(self) -> Dict[str, float]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "std_error": self.std_error,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n": self.n,
        }


@dataclass
class ConvergenceTable:
    """Rows of (sweep, observable, predicted, measured, error), kept sorted by sweep"""

    sweep_name: str
    rows: List[ConvergenceRow] = field(default_factory=list)

    def add(
        self, sweep: float, observable: str, predicted: float, measured: float, error=0.0
    ) -> None:
        self.rows.append(
            ConvergenceRow(
                float(sweep), observable, float(predicted), float(measured), float(error)
            )
        )
        self.rows.sort(key=lambda row: row.sweep)

    def select(self, observable: str) -> List[ConvergenceRow]:
        return [row for row in self.rows if row.observable == observable]

    def column(self, observable: str, name: str = "measured") -> np.ndarray:
        return np.array([getattr(row, name) for row in self.select(observable)])

    def fit_slope(self, observable: str, confidence: float = 0.95) -> Optional[SlopeFit]:
        """
        Least-squares slope of log(measured) against log(sweep).

        Returns None when fewer than three rows have positive values (a degenerate table).
        """
        rows = [r for r in self.select(observable) if r.measured > 0.0 and r.sweep > 0.0]
        if len(rows) < 3:
            logger.warning(f"Cannot fit a slope for {observable}: {len(rows)} positive rows")
            return None
        x = np.log([r.sweep for r in rows])
        y = np.log([r.measured for r in rows])
        fit = stats.linregress(x, y)
        half = stats.t.ppf(0.5 + 0.5 * confidence, len(rows) - 2) * fit.stderr
        return SlopeFit(
            slope=fit.slope,
            intercept=fit.intercept,
            std_error=fit.stderr,
            ci_low=fit.slope - half,
            ci_high=fit.slope + half,
            n=len(rows),
        )

    def to_csv(self, path: Union[str, Path], comment: Optional[str] = None) -> None:
        lines = []
        if comment:
            lines.append(f"# {comment}")
        lines.append(f"{self.sweep_name},observable,predicted,measured,error")
        for row in self.rows:
            lines.append(
                f"{row.sweep!r},{row.observable},{row.predicted!r},{row.measured!r},{row.error!r}"
            )
        Path(path).write_text("\n".join(lines) + "\n")


# ------------------------------------------------------------------
# Plugin base
# ------------------------------------------------------------------


@dataclass
class ExperimentResult:
    """Table, JSON report, named pass/fail checks and extra artifact writers"""

    table: ConvergenceTable
    report: Dict[str, Any] = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)
    artifacts: Dict[str, Callable[[Path], None]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def failed_checks(self) -> List[str]:
        return [name for name, ok in self.checks.items() if not ok]


class Experiment(ABC):
    """Base class for experiment plugins"""

    name = ""
    description = ""

    def __init__(self, spec: ExperimentSpec, workers: int = 1):
        """
        :param spec: validated experiment spec
        :param workers: joblib worker count for replica loops
        """
        self.spec = spec
        self.workers = workers
        self.wall_time = 0.0

    @property
    def params(self) -> ScalingParams:
        return self.spec.params

    @abstractmethod
    def _execute(self) -> ExperimentResult:
        """
        Run the experiment.

        :return: ExperimentResult
        """

    def run(self) -> ExperimentResult:
        logger.info(f"Running {self.name} (seed={self.spec.seed}, workers={self.workers})")
        start = time.perf_counter()
        result = self._execute()
        self.wall_time = time.perf_counter() - start
        for name in result.failed_checks:
            logger.warning(f"{self.name}: check {name} failed")
        logger.info(f"{self.name} finished in {self.wall_time:.2f} s")
        return result


def finite_or_none(value: float) -> Optional[float]:
    """JSON has no NaN"""
    return value if value is not None and math.isfinite(value) else None