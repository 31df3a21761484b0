# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Command line harness.

    lorentz-diffuse <subcommand> --spec FILE [--seed N] [--out DIR] [--strict] [--workers N]

Every run writes ``table.csv``, ``report.json`` and ``manifest.json`` (plus experiment
specific CSV files) to the output directory. Exit codes: 0 success, 2 spec error,
3 numeric guard, 4 failed statistical check with ``--strict``.
"""

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional

from lorentz_diffuse.errors import LorentzDiffuseError
from lorentz_diffuse.experiments import EXPERIMENTS, get_experiment, load_experiment_spec
from lorentz_diffuse.experiments.base import ExperimentResult, ExperimentSpec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 4
VERSIONED_PACKAGES = ("lorentz-diffuse", "numpy", "scipy", "joblib")


def setup_logging(verbose: bool = False) -> None:
    """Configure the root logger once; RichHandler when rich is installed"""
    level = logging.DEBUG if verbose else logging.INFO
    try:
        from rich.logging import RichHandler  # noqa: PLC0415 - optional dependency

        logging.basicConfig(
            level=level, format="%(message)s", datefmt="[%X]", handlers=[RichHandler()]
        )
    except ImportError:
        logging.basicConfig(
            level=level, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        )


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _json_safe(value):
    """Replace NaN and infinities, which JSON cannot carry"""
    if isinstance(value, float):
        return value if value == value and abs(value) != float("inf") else None
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if hasattr(value, "item"):
        return _json_safe(value.item())
    return value


def write_artifacts(
    spec: ExperimentSpec, result: ExperimentResult, wall_time: float
) -> List[Path]:
    """
    Write the table, the report, experiment artifacts and finally the manifest.

    The manifest is the only file with wall-clock content; numeric artifacts depend on the
    spec and seed alone.
    """
    out = spec.out
    out.mkdir(parents=True, exist_ok=True)
    stamp = f"spec_sha256={spec.sha256} seed={spec.seed}"
    written = []

    table_path = out / "table.csv"
    result.table.to_csv(table_path, comment=stamp)
    written.append(table_path)

    report = {
        "subcommand": spec.subcommand,
        "spec_sha256": spec.sha256,
        "seed": spec.seed,
        "passed": result.passed,
        "checks": result.checks,
        "results": result.report,
    }
    report_path = out / "report.json"
    report_path.write_text(json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n")
    written.append(report_path)

    for name, writer in sorted(result.artifacts.items()):
        path = out / name
        writer(path)
        written.append(path)

    manifest = {
        "subcommand": spec.subcommand,
        "spec": spec.to_dict(),
        "spec_text": spec.text,
        "spec_sha256": spec.sha256,
        "seed": spec.seed,
        "versions": package_versions(),
        "wall_time_s": wall_time,
        "artifacts": {p.name: _sha256(p) for p in written},
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(_json_safe(manifest), indent=2, sort_keys=True) + "\n")
    written.append(manifest_path)
    logger.info(f"Wrote {len(written)} files to {out}")
    return written


def run(
    subcommand: str,
    spec_path: Path,
    seed: Optional[int] = None,
    out: Optional[Path] = None,
    strict: bool = False,
    workers: int = 1,
) -> int:
    """
    Execute one experiment and return the process exit code.
    """
    start = time.perf_counter()
    try:
        experiment_cls = get_experiment(subcommand)
        spec = load_experiment_spec(spec_path, subcommand, seed=seed, out=out)
        result = experiment_cls(spec, workers=workers).run()
        write_artifacts(spec, result, time.perf_counter() - start)
    except LorentzDiffuseError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    if strict and not result.passed:
        logger.error(f"Failed checks: {', '.join(result.failed_checks)}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lorentz-diffuse",
        description="Numerical experiments on the weak-coupling Lorentz gas",
    )
    parser.add_argument("subcommand", choices=sorted(EXPERIMENTS), help="experiment to run")
    parser.add_argument("--spec", type=Path, required=True, help="key=value experiment file")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides spec)")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument(
        "--strict", action="store_true", help="exit with 4 when a statistical check fails"
    )
    parser.add_argument("--workers", type=int, default=1, help="joblib worker count")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    return run(args.subcommand, args.spec, args.seed, args.out, args.strict, args.workers)


if __name__ == "__main__":
    sys.exit(main())
