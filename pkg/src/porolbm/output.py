"""Writers for run artifacts: field snapshots, scalar logs, summaries.

A run directory holds

* ``summary.json``: the resolved configuration, headline results, and
  wall time, written with sorted keys so identical runs give
  byte-identical files apart from the timing block;
* ``errors.csv``: one row per time level with max-field magnitudes,
  subsidence when tracked, and per-level errors when an analytic
  reference exists;
* ``fields_t<k>.csv`` / ``fields_t<k>.vtk``: full field snapshots at
  selected levels, one row per cell in the CSV, legacy structured
  points in the VTK.

Floats in the CSV files are rendered with 17 significant digits, which
round-trips IEEE doubles exactly.  Problems that are solved in rescaled
units (compressible storage prescaling) declare ``c0 != 1``; the
snapshot and log writers divide pressure and stress by ``c0`` so files
always hold the physical fields, while displacement needs no rescaling.
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Sequence

import numpy as np

from .coupling import LevelFields, SolveResult
from .lattice import Grid

__all__ = [
    "write_fields_csv",
    "write_fields_vtk",
    "write_errors_csv",
    "summary_dict",
    "write_summary",
    "save_run",
]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# field snapshots
# ---------------------------------------------------------------------------

_FIELD_COLUMNS = ("p", "eta1", "eta2", "sig11", "sig12", "sig22")


def _physical_fields(level: LevelFields, c0: float) -> dict[str, np.ndarray]:
    inv = 1.0 / c0
    return {
        "p": level.p * inv if c0 != 1.0 else level.p,
        "eta1": level.eta1,
        "eta2": level.eta2,
        "sig11": level.sig11 * inv if c0 != 1.0 else level.sig11,
        "sig12": level.sig12 * inv if c0 != 1.0 else level.sig12,
        "sig22": level.sig22 * inv if c0 != 1.0 else level.sig22,
    }


def write_fields_csv(path: str, level: LevelFields, grid: Grid, c0: float = 1.0) -> None:
    """Dump one snapshot as a flat CSV, one row per cell."""
    fields = _physical_fields(level, c0)
    x, y = grid.cell_centers()
    with open(path, "w", encoding="ascii") as fh:
        fh.write("i,j,x,y," + ",".join(_FIELD_COLUMNS) + "\n")
        for i in range(grid.nx):
            for j in range(grid.ny):
                row = [str(i), str(j), _fmt(x[i, j]), _fmt(y[i, j])]
                row += [_fmt(fields[name][i, j]) for name in _FIELD_COLUMNS]
                fh.write(",".join(row) + "\n")


def write_fields_vtk(path: str, level: LevelFields, grid: Grid, c0: float = 1.0) -> None:
    """Dump one snapshot as a legacy-VTK structured-points file.

    Points sit at the cell centers, so the origin is offset half a
    spacing from the domain corner.  VTK expects the x index to vary
    fastest; the arrays are indexed [i, j] so a Fortran-order ravel
    gives the required layout.
    """
    fields = _physical_fields(level, c0)

    def flat(arr: np.ndarray) -> np.ndarray:
        return np.asarray(arr).ravel(order="F")

    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"porolbm snapshot at t = {_fmt(level.t)}\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {grid.nx} {grid.ny} 1\n")
        fh.write(f"ORIGIN {_fmt(0.5 * grid.dx)} {_fmt(0.5 * grid.dx)} 0\n")
        fh.write(f"SPACING {_fmt(grid.dx)} {_fmt(grid.dx)} 1\n")
        fh.write(f"POINT_DATA {grid.nx * grid.ny}\n")

        fh.write("SCALARS pressure double 1\nLOOKUP_TABLE default\n")
        for v in flat(fields["p"]):
            fh.write(_fmt(v) + "\n")

        fh.write("VECTORS displacement double\n")
        e1 = flat(fields["eta1"])
        e2 = flat(fields["eta2"])
        for a, b in zip(e1, e2):
            fh.write(f"{_fmt(a)} {_fmt(b)} 0\n")

        for name in ("sig11", "sig12", "sig22"):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in flat(fields[name]):
                fh.write(_fmt(v) + "\n")


# ---------------------------------------------------------------------------
# per-level scalar log
# ---------------------------------------------------------------------------


def write_errors_csv(path: str, result: SolveResult, c0: float = 1.0) -> None:
    """Write the per-level scalar log.

    Always contains the level index, time, and max-field magnitudes;
    adds a subsidence column when the run tracked it and per-level
    error columns when an analytic reference was available.
    """
    n = len(result.ts)
    header = ["k", "t", "max_p", "max_eta", "max_sigma"]
    columns: list[Sequence[float]] = [
        result.ts,
        [v / c0 for v in result.max_p],
        result.max_eta,
        [v / c0 for v in result.max_sigma],
    ]
    if result.subsidence is not None:
        header.append("subsidence")
        columns.append(result.subsidence)
    per_level = result.errors.per_level if result.errors is not None else {}
    for key in sorted(per_level):
        header.append(f"err_{key}")
        columns.append(per_level[key])
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(n):
            row = [str(k), _fmt(result.ts[k])]
            row += [_fmt(col[k]) for col in columns[1:]]
            fh.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# machine-readable summary
# ---------------------------------------------------------------------------


def summary_dict(problem, result: SolveResult, extra_config: dict | None = None) -> dict:
    """Assemble the summary structure for a finished run.

    The ``config`` block holds everything needed to reproduce the run,
    the ``result`` block the headline outcomes, and ``timing`` the wall
    time.  Reproducibility comparisons should ignore ``timing``.
    """
    grid = result.grid
    cfg = result.config
    params = problem.params
    config = {
        "problem": problem.name,
        "alpha": params.alpha,
        "r": cfg.r,
        "nx": grid.nx,
        "ny": grid.ny,
        "dx": grid.dx,
        "dt": grid.dt,
        "ne": cfg.n_e,
        "nt": cfg.n_t,
        "tf": cfg.n_t * grid.dt,
        "backend": result.backend,
        "lam": params.lam,
        "mu": params.mu,
        "kappa": params.kappa,
        "c0": params.c0,
    }
    if extra_config:
        config.update(extra_config)

    c0 = params.c0
    res: dict = {
        "diverged": result.diverged,
        "divergence": result.divergence,
        "levels_completed": len(result.ts),
    }
    if result.ts:
        res["final_time"] = result.ts[-1]
        res["final_max_p"] = result.max_p[-1] / c0
        res["final_max_eta"] = result.max_eta[-1]
        res["final_max_sigma"] = result.max_sigma[-1] / c0
    if result.subsidence:
        res["final_subsidence"] = result.subsidence[-1]
    if result.errors is not None:
        res["errors_abs"] = dict(result.errors.abs)
        res["errors_rel"] = dict(result.errors.rel)

    return {
        "config": config,
        "result": res,
        "timing": {"wall_time_s": result.wall_time},
    }


def write_summary(path: str, problem, result: SolveResult, extra_config: dict | None = None) -> dict:
    data = summary_dict(problem, result, extra_config)
    with open(path, "w", encoding="ascii") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return data


# ---------------------------------------------------------------------------
# run directory
# ---------------------------------------------------------------------------


def save_run(
    outdir: str,
    problem,
    result: SolveResult,
    formats: Iterable[str] = ("csv",),
    extra_config: dict | None = None,
) -> dict:
    """Write the complete artifact set for one run and return the summary."""
    os.makedirs(outdir, exist_ok=True)
    c0 = problem.params.c0
    summary = write_summary(os.path.join(outdir, "summary.json"), problem, result, extra_config)
    write_errors_csv(os.path.join(outdir, "errors.csv"), result, c0)
    fmts = set(formats)
    for level in result.snapshots:
        stem = os.path.join(outdir, f"fields_t{level.k}")
        if "csv" in fmts:
            write_fields_csv(stem + ".csv", level, result.grid, c0)
        if "vtk" in fmts:
            write_fields_vtk(stem + ".vtk", level, result.grid, c0)
    return summary
