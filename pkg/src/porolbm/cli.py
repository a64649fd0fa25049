"""Command-line interface: single runs, convergence sweeps, artifacts.

Subcommands
-----------
``run``
    Execute one configuration and write ``summary.json``,
    ``errors.csv``, and field snapshots to the output directory.
    Exits nonzero when the solver diverges, printing the divergence
    report (time level, pseudo-iteration, field).
``sweep``
    Execute a family of configurations varying ``nx``, ``r``, ``ne``,
    or ``alpha`` (comma-separated flag values; an axis needs at least
    two). Emits a table of relative errors per configuration plus
    observed orders between consecutive grid resolutions, printed and
    optionally written as ``sweep.csv``.

Configuration files
-------------------
``--config FILE`` seeds flag values from a file; explicit flags always
override it.  Two formats are understood:

* plain ``key = value`` lines ('#' starts a comment).  Recognized keys:
  ``problem``, ``alpha``, ``r``, ``nx``, ``ne``, ``dt_rule`` (or ``dt``
  for an absolute step), ``tf``, ``out``, ``snapshots``, ``format``,
  ``backend``, ``progress``.
* a ``summary.json`` written by a previous run (detected by a leading
  '{'); its resolved ``config`` block is mapped back onto the same
  keys, so a run can be reproduced directly from its summary.

Flag grammar
------------
``--ne`` accepts ``N`` (absolute count), ``xN`` (N per grid cell,
i.e. N*nx), or ``q:C`` (round(C*nx^2), clamped to at least 1).
``--dt-rule`` accepts ``dx2`` (dx^2), ``dx2/4``, ``C*dx2`` for a
numeric C, or a plain number for an absolute step.  Each problem
carries a default rule matching its benchmark setup.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass

from .coupling import CouplingConfig, SolveResult, solve
from .output import save_run, summary_dict
from .problems import (
    ProblemDefinition,
    loading2d_problem,
    manufactured_problem,
    terzaghi_problem,
)

__all__ = ["RunConfig", "run", "sweep", "main"]

_PROBLEMS = ("manufactured", "terzaghi", "loading2d")


class UsageError(Exception):
    """Invalid configuration detected after argument parsing."""


# ---------------------------------------------------------------------------
# config resolution
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """One fully specified run, before numeric resolution.

    ``nx`` is the resolution parameter handed to the problem's grid
    builder (cells per unit length; the narrow consolidation column
    derives its own cross-section from it).  ``ne`` and ``dt_rule``
    stay in flag-grammar form so they can adapt to ``nx`` in sweeps.
    """

    problem: str
    alpha: float | None = None
    r: float = 0.5
    nx: int = 32
    ne: str | None = None
    dt_rule: str | None = None
    tf: float | None = None
    out: str | None = None
    snapshots: tuple[float, ...] = ()
    formats: str = "csv"
    backend: str = "auto"
    progress: int | None = None


def resolve_ne(spec: str, nx: int) -> int:
    """Resolve an ``--ne`` flag value to a pseudo-iteration count."""
    s = spec.strip()
    try:
        if s.startswith("q:"):
            n = int(round(float(s[2:]) * nx * nx))
            return max(1, n)
        if s.startswith("x"):
            n = int(round(float(s[1:]) * nx))
        else:
            n = int(s)
    except ValueError:
        raise UsageError(f"cannot parse ne spec {spec!r}") from None
    if n < 1:
        raise UsageError(f"ne spec {spec!r} resolves to {n}; need at least 1")
    return n


def resolve_dt(rule: str | None, dx: float) -> float | None:
    """Resolve a ``--dt-rule`` flag value to a time step (None: default)."""
    if rule is None:
        return None
    s = rule.strip().lower()
    try:
        if s == "dx2":
            return dx * dx
        if s == "dx2/4":
            return dx * dx / 4.0
        if s.endswith("*dx2"):
            return float(s[:-4]) * dx * dx
        return float(s)
    except ValueError:
        raise UsageError(f"cannot parse dt rule {rule!r}") from None


def build_problem(name: str, alpha: float | None) -> ProblemDefinition:
    if name == "manufactured":
        if alpha is None:
            raise UsageError("manufactured requires --alpha")
        return manufactured_problem(alpha)
    if name == "terzaghi":
        if alpha is None:
            raise UsageError("terzaghi requires --alpha")
        return terzaghi_problem(alpha)
    if name == "loading2d":
        if alpha is not None and alpha != 1.0:
            raise UsageError("loading2d has a fixed coupling of alpha = 1")
        return loading2d_problem()
    raise UsageError(f"unknown problem {name!r}")


def _steps_for(tf: float, dt: float) -> int:
    n = int(round(tf / dt))
    if n < 1 or abs(n * dt - tf) > 1e-9 * max(1.0, abs(tf)):
        raise UsageError(f"final time {tf} is not an integer number of steps of {dt}")
    return n


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def run(cfg: RunConfig) -> tuple[dict, SolveResult]:
    """Execute one configuration; write artifacts when an output
    directory is set.  Returns the summary structure and the result."""
    problem = build_problem(cfg.problem, cfg.alpha)
    dt = resolve_dt(cfg.dt_rule, problem.dx_of(cfg.nx))
    grid = problem.make_grid(cfg.nx, dt=dt)
    tf = cfg.tf if cfg.tf is not None else problem.t_final
    n_t = _steps_for(tf, grid.dt)
    ne = resolve_ne(cfg.ne, cfg.nx) if cfg.ne is not None else problem.ne_default(cfg.nx)
    for s in cfg.snapshots:
        if not 0.0 <= s <= tf:
            raise UsageError(f"snapshot time {s} outside [0, {tf}]")
    config = CouplingConfig(alpha=problem.params.alpha, r=cfg.r, n_e=ne, n_t=n_t)
    result = solve(
        problem,
        grid,
        config,
        backend=cfg.backend,
        snapshot_times=list(cfg.snapshots),
        progress=cfg.progress,
    )
    extra = {"resolution": cfg.nx}
    if cfg.out:
        summary = save_run(cfg.out, problem, result, formats=_format_set(cfg.formats), extra_config=extra)
    else:
        summary = summary_dict(problem, result, extra_config=extra)
    return summary, result


def _format_set(formats: str) -> tuple[str, ...]:
    if formats == "both":
        return ("csv", "vtk")
    if formats in ("csv", "vtk"):
        return (formats,)
    raise UsageError(f"unknown format {formats!r}")


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

_ERROR_KEYS = ("p", "eta", "sigma")


def sweep(base: RunConfig, axes: dict[str, list]) -> dict:
    """Run the cartesian family of configurations and tabulate errors.

    ``axes`` maps a subset of {"alpha", "r", "ne", "nx"} to value
    lists; at least one axis needs two or more entries.  Observed
    orders are computed between consecutive ``nx`` values within each
    group of fixed remaining axes.  Returns {"header", "rows"} where
    each row is a list of strings ready for CSV or table rendering.
    """
    if not axes or max(len(v) for v in axes.values()) < 2:
        raise UsageError("sweep needs at least one axis with two or more values")
    alphas = axes.get("alpha", [base.alpha])
    rs = axes.get("r", [base.r])
    nes = axes.get("ne", [base.ne])
    nxs = axes.get("nx", [base.nx])
    nxs = sorted(int(n) for n in nxs)

    header = [
        "problem", "alpha", "r", "ne", "nx", "nt", "diverged",
        "rel_p", "rel_eta", "rel_sigma", "order_p", "order_eta", "order_sigma",
    ]
    rows: list[list[str]] = []
    for alpha in alphas:
        for r in rs:
            for ne in nes:
                prev: tuple[int, dict] | None = None
                for nx in nxs:
                    cfg = RunConfig(
                        problem=base.problem,
                        alpha=alpha,
                        r=r,
                        nx=nx,
                        ne=ne,
                        dt_rule=base.dt_rule,
                        tf=base.tf,
                        backend=base.backend,
                        progress=base.progress if base.progress is not None else 0,
                    )
                    summary, result = run(cfg)
                    rel = (summary["result"].get("errors_rel") or {})
                    rel = {k: rel.get(k) for k in _ERROR_KEYS}
                    row = [
                        base.problem,
                        _cell(alpha),
                        _cell(r),
                        "" if ne is None else str(ne),
                        str(nx),
                        str(summary["config"]["nt"]),
                        "true" if result.diverged else "false",
                    ]
                    row += [_cell(rel[k]) for k in _ERROR_KEYS]
                    orders = ["", "", ""]
                    if prev is not None:
                        pnx, prel = prev
                        ratio = math.log(nx / pnx)
                        for idx, k in enumerate(_ERROR_KEYS):
                            a, b = prel.get(k), rel.get(k)
                            if _usable(a) and _usable(b) and b > 0.0:
                                orders[idx] = f"{math.log(a / b) / ratio:.3f}"
                    row += orders
                    rows.append(row)
                    prev = (nx, rel)
    return {"header": header, "rows": rows}


def _usable(v) -> bool:
    return v is not None and math.isfinite(v) and v > 0.0


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return format(v, ".6g") if isinstance(v, float) else str(v)


def _write_table(path: str, table: dict) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(table["header"]) + "\n")
        for row in table["rows"]:
            fh.write(",".join(row) + "\n")


def _print_table(table: dict) -> None:
    cols = list(zip(table["header"], *table["rows"])) if table["rows"] else [(h,) for h in table["header"]]
    widths = [max(len(str(v)) for v in col) for col in cols]
    def line(vals):
        return "  ".join(str(v).rjust(w) for v, w in zip(vals, widths))
    print(line(table["header"]))
    for row in table["rows"]:
        print(line(row))


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

_CONFIG_KEYS = (
    "problem", "alpha", "r", "nx", "ne", "dt_rule", "tf",
    "out", "snapshots", "formats", "backend", "progress",
)
_FILE_KEY_ALIASES = {"format": "formats", "dt": "dt_rule"}


def load_config_file(path: str) -> dict[str, str]:
    """Read flag defaults from a key=value file or a run summary."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        block = data.get("config", data)
        out: dict[str, str] = {}
        for key in ("problem", "alpha", "r", "ne", "tf", "backend"):
            if key in block and block[key] is not None:
                out[key] = _to_flag(block[key])
        if "resolution" in block:
            out["nx"] = _to_flag(block["resolution"])
        elif "nx" in block:
            out["nx"] = _to_flag(block["nx"])
        if "dt" in block:
            out["dt_rule"] = _to_flag(block["dt"])
        return out
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        key = _FILE_KEY_ALIASES.get(key, key)
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def _to_flag(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _merged(args: argparse.Namespace) -> dict[str, str | None]:
    file_vals = load_config_file(args.config_file) if args.config_file else {}
    merged: dict[str, str | None] = {}
    for key in _CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is None:
            v = file_vals.get(key)
        merged[key] = v
    return merged


def _want_float(vals: dict, key: str, default: float | None) -> float | None:
    v = vals.get(key)
    if v is None:
        return default
    try:
        return float(v)
    except ValueError:
        raise UsageError(f"cannot parse --{key.replace('_', '-')} value {v!r}") from None


def _want_int(vals: dict, key: str, default: int | None) -> int | None:
    v = vals.get(key)
    if v is None:
        return default
    try:
        return int(v)
    except ValueError:
        raise UsageError(f"cannot parse --{key.replace('_', '-')} value {v!r}") from None


def _scalar(vals: dict, key: str) -> None:
    v = vals.get(key)
    if isinstance(v, str) and "," in v:
        raise UsageError(f"--{key} takes a single value for run; lists are for sweep")


def _split(v: str) -> list[str]:
    return [tok.strip() for tok in v.split(",") if tok.strip()]


def _base_config(vals: dict[str, str | None]) -> RunConfig:
    problem = vals.get("problem")
    if problem is None:
        raise UsageError("--problem is required")
    if problem not in _PROBLEMS:
        raise UsageError(f"unknown problem {problem!r}")
    snaps: tuple[float, ...] = ()
    if vals.get("snapshots"):
        try:
            snaps = tuple(float(tok) for tok in _split(vals["snapshots"]))
        except ValueError:
            raise UsageError(f"cannot parse --snapshots value {vals['snapshots']!r}") from None
    formats = vals.get("formats") or "csv"
    if formats not in ("csv", "vtk", "both"):
        raise UsageError(f"unknown format {formats!r}")
    backend = vals.get("backend") or "auto"
    return RunConfig(
        problem=problem,
        alpha=_want_float(vals, "alpha", None),
        r=_want_float(vals, "r", 0.5),
        nx=_want_int(vals, "nx", 32),
        ne=vals.get("ne"),
        dt_rule=vals.get("dt_rule"),
        tf=_want_float(vals, "tf", None),
        out=vals.get("out"),
        snapshots=snaps,
        formats=formats,
        backend=backend,
        progress=_want_int(vals, "progress", None),
    )


def _cmd_run(args: argparse.Namespace) -> int:
    vals = _merged(args)
    for key in ("alpha", "r", "nx", "ne"):
        _scalar(vals, key)
    cfg = _base_config(vals)
    summary, result = run(cfg)

    res = summary["result"]
    c = summary["config"]
    print(
        f"{cfg.problem}: nx = {c['nx']}, ny = {c['ny']}, dt = {c['dt']:.6g}, "
        f"ne = {c['ne']}, nt = {c['nt']}, alpha = {c['alpha']:g}, r = {c['r']:g}"
    )
    if result.diverged:
        d = res["divergence"]
        where = f"t = {d['t']:.6g}"
        if d["tau"] is not None:
            where += f", pseudo-iteration {d['tau']}"
        print(f"diverged: true ({d['field']} field, {where})", file=sys.stderr)
        return 1
    print("diverged: false")
    if "errors_rel" in res:
        for key in _ERROR_KEYS:
            rel = res["errors_rel"].get(key)
            if rel is not None:
                print(f"relative error, {key}: {rel:.6e}")
    if "final_subsidence" in res:
        print(f"final subsidence: {res['final_subsidence']:.6e}")
    print(f"wall time: {summary['timing']['wall_time_s']:.2f} s")
    if cfg.out:
        print(f"artifacts written to {cfg.out}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    vals = _merged(args)
    axes: dict[str, list] = {}
    if vals.get("alpha") is not None:
        toks = _split(vals["alpha"])
        if len(toks) > 1:
            axes["alpha"] = [float(t) for t in toks]
            vals["alpha"] = None
        else:
            vals["alpha"] = toks[0]
    if vals.get("r") is not None:
        toks = _split(vals["r"])
        if len(toks) > 1:
            axes["r"] = [float(t) for t in toks]
            vals["r"] = None
        else:
            vals["r"] = toks[0]
    if vals.get("ne") is not None:
        toks = _split(vals["ne"])
        if len(toks) > 1:
            axes["ne"] = toks
            vals["ne"] = None
        else:
            vals["ne"] = toks[0]
    if vals.get("nx") is not None:
        toks = _split(vals["nx"])
        if len(toks) > 1:
            axes["nx"] = [int(t) for t in toks]
            vals["nx"] = None
        else:
            vals["nx"] = toks[0]
    out = vals.get("out")
    vals["out"] = None
    base = _base_config(vals)
    table = sweep(base, axes)
    _print_table(table)
    if out:
        import os

        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, "sweep.csv")
        _write_table(path, table)
        print(f"table written to {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="porolbm",
        description="Coupled lattice Boltzmann solver for linear poroelastic consolidation.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)
    for name, help_text in (
        ("run", "execute one configuration and write artifacts"),
        ("sweep", "run a family of configurations and tabulate errors"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--problem", choices=_PROBLEMS, default=None)
        sp.add_argument("--alpha", default=None, help="coupling coefficient (list allowed in sweep)")
        sp.add_argument("--r", default=None, help="implicitness weight in [0, 1] (list allowed in sweep)")
        sp.add_argument("--nx", default=None, help="cells per unit length (list allowed in sweep)")
        sp.add_argument("--ne", default=None, help="pseudo-iterations: N, xN, or q:C (list allowed in sweep)")
        sp.add_argument("--dt-rule", dest="dt_rule", default=None, help="dx2, dx2/4, C*dx2, or absolute step")
        sp.add_argument("--tf", default=None, help="final time (default: problem benchmark time)")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--snapshots", default=None, help="comma-separated snapshot times")
        sp.add_argument("--format", dest="formats", choices=("csv", "vtk", "both"), default=None)
        sp.add_argument("--backend", choices=("auto", "kernel", "reference"), default=None)
        sp.add_argument("--progress", default=None, help="log every N steps (0 silences)")
        sp.add_argument("--config", dest="config_file", default=None, help="key=value file or summary.json")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.cmd == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
