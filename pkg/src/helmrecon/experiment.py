"""Experiment orchestration and the on-disk artifact tree.

Layout of an output directory::

    config.cfg              canonical echo of the run configuration
    measurements.csv        d_ell(xi) for every evaluated frequency
    spectra/data_l<ell>.csv, spectra/recovered_l<ell>.csv
    fields/{truth,reference,corrected,naive}_l<ell>.hfield
    images/{truth,reference,corrected,naive}_l<ell>.pgm
    errors.csv              ell, naive_rel_err, corrected_rel_err, ...
    manifest.json           config hash, artifact checksums, solve counts, timings
    error.json              only when the run failed
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import time
import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig
from .grid import Grid2D, ScalarField2D, SupportSpec, bumps_from_spec, synth_coefficient, write_field, write_pgm
from .inversion import (
    ForwardSetup,
    ReconstructionPlan,
    ReconstructionResult,
    back_substitute,
    build_data_tables,
    synthesize,
)
from .inversion import reconstruct as _reconstruct
from .measurement import write_measurements_csv
from .solver import PicardOptions, assemble_operator
from .spectral import SpectrumTable, write_spectrum_csv

log = logging.getLogger(__name__)


def build_truth(cfg: ExperimentConfig, grid: Grid2D) -> list[ScalarField2D]:
    """``c_1..c_m`` on ``grid`` with bump amplitudes scaled by ``cfg.amplitude``."""
    support = SupportSpec(cfg.support_radius)
    out = []
    for ell in range(1, cfg.m + 1):
        spec = [(x, y, a * cfg.amplitude, w) for x, y, a, w in cfg.truth_bumps(ell)]
        out.append(synth_coefficient(grid, bumps_from_spec(spec), support))
    return out


def make_plan(cfg: ExperimentConfig) -> ReconstructionPlan:
    return ReconstructionPlan(
        m=cfg.m,
        k=cfg.k,
        source="measured" if cfg.mode == "full" else "oracle",
        interpolation=cfg.interpolation,
        margin=cfg.margin,
        fill=cfg.fill,
    )


def make_forward(cfg: ExperimentConfig) -> ForwardSetup | None:
    if cfg.mode != "full":
        return None
    grid = Grid2D(cfg.forward_n)
    op = assemble_operator(grid, cfg.k)
    return ForwardSetup(
        op,
        build_truth(cfg, grid),
        PicardOptions(cfg.picard_tol, cfg.picard_max_iters),
        noise=cfg.noise,
        seed=cfg.seed,
    )


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def measurement_rows(tables: dict[int, SpectrumTable], provenance: str):
    rows = []
    for ell in sorted(tables):
        for p, q, v, st in tables[ell].entries():
            xi = 2 * np.pi * np.array([p, q], dtype=float)
            rows.append((ell, xi[0], xi[1], v, provenance))
    return rows


def write_errors_csv(path, result: ReconstructionResult) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["ell", "naive_rel_err", "corrected_rel_err", "corrected_vs_truth_rel_err", "reference_is_zero"])
        for ell in result.plan.levels:
            out.writerow(
                [
                    ell,
                    repr(result.naive_errors[ell].value),
                    repr(result.errors[ell].value),
                    repr(result.full_errors[ell].value),
                    int(result.errors[ell].absolute),
                ]
            )


def read_errors_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {
                "ell": int(r["ell"]),
                "naive": float(r["naive_rel_err"]),
                "corrected": float(r["corrected_rel_err"]),
                "vs_truth": float(r["corrected_vs_truth_rel_err"]),
                "absolute": bool(int(r["reference_is_zero"])),
            }
            for r in csv.DictReader(fh)
        ]


def write_result(out: Path, cfg: ExperimentConfig, result: ReconstructionResult, truth: list[ScalarField2D]) -> list[Path]:
    """Write every artifact of a finished reconstruction; returns the paths."""
    paths = []
    (out / "spectra").mkdir(parents=True, exist_ok=True)
    (out / "fields").mkdir(exist_ok=True)
    prov = "measured" if cfg.mode == "full" else "oracle"
    p = out / "measurements.csv"
    write_measurements_csv(p, measurement_rows(result.data, prov))
    paths.append(p)
    for ell in result.plan.levels:
        for name, table in (("data", result.data[ell]), ("recovered", result.spectra[ell])):
            p = out / "spectra" / f"{name}_l{ell}.csv"
            write_spectrum_csv(p, table)
            paths.append(p)
        named = {
            "truth": truth[ell - 1],
            "reference": result.references[ell],
            "corrected": result.fields[ell],
            "naive": result.naive_fields[ell],
        }
        for name, f in named.items():
            p = out / "fields" / f"{name}_l{ell}.hfield"
            write_field(p, f)
            paths.append(p)
        if cfg.images:
            (out / "images").mkdir(exist_ok=True)
            vmax = float(np.max(np.abs(truth[ell - 1].values))) or None
            for name, f in named.items():
                p = out / "images" / f"{name}_l{ell}.pgm"
                write_pgm(p, f, vmax)
                paths.append(p)
    p = out / "errors.csv"
    write_errors_csv(p, result)
    paths.append(p)
    return paths


def write_manifest(out: Path, cfg: ExperimentConfig, paths: list[Path], diagnostics: dict, status: str) -> Path:
    manifest = {
        "status": status,
        "config_hash": cfg.digest(),
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "artifacts": {str(p.relative_to(out)): _sha256(p) for p in sorted(paths)},
        **diagnostics,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def write_error_record(out: Path, exc: BaseException, stage: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    rec = {
        "status": "error",
        "stage": stage,
        "type": type(exc).__name__,
        "message": str(exc),
        "problems": getattr(exc, "problems", None),
        "traceback": traceback.format_exc(),
    }
    path = out / "error.json"
    path.write_text(json.dumps(rec, indent=2) + "\n")
    return path


@dataclass
class RunOutcome:
    status: int
    out: Path
    result: ReconstructionResult | None = None
    error: BaseException | None = None


def run_experiment(cfg: ExperimentConfig, progress: Callable[[str], None] | None = None) -> RunOutcome:
    """Full pipeline: truth, data, back-substitution, synthesis, artifacts.

    Returns status 0 on success; on failure writes ``error.json`` and returns
    a nonzero status instead of raising.
    """
    out = Path(cfg.out)
    stage = "config"
    try:
        cfg.validate()
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").unlink(missing_ok=True)
        cfg_path = out / "config.cfg"
        cfg_path.write_text(cfg.echo())
        t0 = time.perf_counter()
        stage = "setup"
        truth = build_truth(cfg, Grid2D(cfg.inverse_n))
        forward = make_forward(cfg)
        t_setup = time.perf_counter() - t0
        stage = "reconstruct"
        result = _reconstruct(make_plan(cfg), truth, forward, workers=cfg.workers, progress=progress)
        stage = "write"
        paths = [cfg_path] + write_result(out, cfg, result, truth)
        diag = dict(result.diagnostics)
        diag["timings"] = {**diag["timings"], "setup": t_setup, "total": time.perf_counter() - t0}
        diag["mode"] = cfg.mode
        write_manifest(out, cfg, paths, diag, "ok")
        return RunOutcome(0, out, result)
    except Exception as exc:  # surfaced as a machine-readable record
        log.error("run failed during %s: %s", stage, exc)
        write_error_record(out, exc, stage)
        return RunOutcome(2 if stage == "config" else 1, out, None, exc)


def measure_only(cfg: ExperimentConfig, progress=None) -> tuple[dict[int, SpectrumTable], dict]:
    cfg.validate()
    truth = build_truth(cfg, Grid2D(cfg.inverse_n))
    return build_data_tables(make_plan(cfg), truth, make_forward(cfg), cfg.workers, progress)


def invert_tables(cfg: ExperimentConfig, tables: dict[int, SpectrumTable]) -> ReconstructionResult:
    """Back-substitute previously measured tables and score them against the truth."""
    cfg.validate()
    plan = make_plan(cfg)
    truth = build_truth(cfg, Grid2D(cfg.inverse_n))
    spectra = back_substitute(tables, plan, cfg.workers)
    diag = {"points_per_level": {ell: len(tables[ell].entries()) for ell in plan.levels}, "timings": {}}
    return synthesize(plan, tables, spectra, truth, diag)
