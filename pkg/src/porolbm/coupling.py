"""Two-way coupling of the pressure and displacement fields.

One flow time step of length ``dt`` contains a complete pseudo-time
relaxation of the elastic field (``n_e`` inner iterations), because the
solid responds quasi-statically on the flow time scale.  The coupling
runs in both directions:

* the pressure gradient enters the elastic update as part of the
  effective body force ``f_eff = f - alpha grad p``;
* the rate of the dilatation ``div eta`` enters the flow update as part
  of the effective source.

The dilatation rate is discretized with a backward difference whose
newer end can be taken either at the previous flow step (explicit,
weight ``1 - r``) or at the most recent pseudo-time iterate
(semi-implicit, weight ``r``).  The explicit portion is frozen once per
flow step; only the semi-implicit correction changes inside the
pseudo-time loop.

Scaling conventions
-------------------
The driver works in the unit system of the problem definition.  Three
internal factors connect it to the lattice quantities:

* the elastic body-force kick carries ``eps**2`` with ``eps = dx``;
* the flow source enters in per-step integrated form, ``dt`` times the
  source rate;
* stress and dilatation read off the elastic moments carry one factor
  of the cell width, removed here during extraction.

Divergence histories stored on the state are length scaled (raw moment
value over ``2 (lam + mu)``), which is the form the source formula
consumes together with the ``1 / eps`` factor.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lattice import Grid, stream
from .flow import (
    FlowState,
    flow_collide,
    flow_init,
    flow_pressure,
    flow_relaxation_rate,
)
from .elasticity import (
    ElasticParams,
    ElasticState,
    back_transform,
    collide_moments,
    divergence_eta,
    elastic_init,
    extract_solution,
    half_collision,
    half_force,
    moments_forward,
)
from .boundary import (
    BoundarySpec,
    apply_elastic_bcs,
    apply_flow_bcs,
    assert_filled,
    pad_pressure,
)

__all__ = [
    "CouplingConfig",
    "CoupledState",
    "LevelFields",
    "DivergenceError",
    "pressure_gradient",
    "effective_source_explicit",
    "effective_source_semi_implicit",
    "effective_force",
    "initialize",
    "time_step",
    "final_level",
    "solve",
    "SolveResult",
]

logger = logging.getLogger("porolbm")

DIVERGENCE_THRESHOLD = 1e12


class DivergenceError(RuntimeError):
    """Raised when a field exceeds the blow-up threshold or loses finiteness.

    Attributes
    ----------
    t : float
        Flow time at which the blow-up was detected.
    tau : int or None
        Pseudo-time iteration (1-based) for elastic blow-ups, None for
        flow blow-ups.
    field : str
        ``"elastic"`` or ``"flow"``.
    """

    def __init__(self, t: float, tau: Optional[int], field_name: str) -> None:
        self.t = t
        self.tau = tau
        self.field = field_name
        where = f" (pseudo-iteration {tau})" if tau is not None else ""
        super().__init__(f"{field_name} field diverged at t = {t:.6g}{where}")


@dataclass(frozen=True)
class CouplingConfig:
    """Coupling and run-length parameters of one solve.

    ``alpha`` duplicates the value on the problem definition so that a
    config is self-describing; the two must agree.
    """

    alpha: float
    r: float
    n_e: int
    n_t: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"implicitness weight r must lie in [0, 1], got {self.r}")
        if self.n_e < 1:
            raise ValueError("need at least one pseudo-time iteration per step")
        if self.n_t < 1:
            raise ValueError("need at least one flow step")
        if self.alpha < 0.0:
            raise ValueError(f"coupling coefficient alpha must be nonnegative, got {self.alpha}")


@dataclass
class LevelFields:
    """Solution fields extracted at one flow time level.

    Stress and dilatation are in the working units of the problem (the
    lattice scale factor has been removed).
    """

    k: int
    t: float
    p: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    sig11: np.ndarray
    sig12: np.ndarray
    sig22: np.ndarray
    div: np.ndarray


@dataclass
class CoupledState:
    """Complete solver state between two flow steps."""

    flow: FlowState
    elastic: ElasticState
    t: float
    step: int
    grid: Grid
    explicit_source_part: np.ndarray | float | None = None
    level_fields: LevelFields | None = None


# ---------------------------------------------------------------------------
# spatial operators
# ---------------------------------------------------------------------------

def pressure_gradient(
    p: np.ndarray,
    grid: Grid,
    bcs: BoundarySpec,
    t: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic lattice gradient of the pressure field.

    The stencil is the weighted first moment of the neighborhood,

        grad p = (3 / dx) sum_k w_k e_k p(x + dx e_k),

    which is exact for affine fields and second-order accurate in
    general.  Wall neighbors come from the ghost rules of
    :func:`porolbm.boundary.pad_pressure`; ``t`` is the time level of
    ``p``, used to evaluate prescribed-pressure data.
    """
    pp = pad_pressure(p, bcs, t, grid)
    c = 3.0 / grid.dx
    gx = c * (
        (pp[2:, 1:-1] - pp[:-2, 1:-1]) / 9.0
        + (pp[2:, 2:] + pp[2:, :-2] - pp[:-2, 2:] - pp[:-2, :-2]) / 36.0
    )
    gy = c * (
        (pp[1:-1, 2:] - pp[1:-1, :-2]) / 9.0
        + (pp[2:, 2:] + pp[:-2, 2:] - pp[2:, :-2] - pp[:-2, :-2]) / 36.0
    )
    return gx, gy


# ---------------------------------------------------------------------------
# effective source and force
# ---------------------------------------------------------------------------

def _source_base(problem, grid: Grid, t: float) -> np.ndarray | float:
    """Fluid source rate minus conductivity times gravity divergence."""
    base: np.ndarray | float = 0.0
    if problem.source is not None:
        base = problem.source(t, grid)
    if problem.div_gravity is not None:
        base = base - problem.params.kappa * problem.div_gravity(t, grid)
    return base


def effective_source_explicit(problem, state: CoupledState, t: float) -> np.ndarray | float:
    """Fully explicit effective source rate.

    The dilatation rate uses the two most recent completed flow levels:

        s_eff = s - kappa div g - (alpha / eps) (D1 - D2) / dt

    with ``D1, D2`` the length-scaled dilatations at the previous and
    the one-before-previous level.
    """
    el = state.elastic
    coef = problem.params.alpha / el.params.eps
    rate = (el.div_eta - el.div_eta_prev_t) / state.grid.dt
    return _source_base(problem, state.grid, t) - coef * rate


def _frozen_part(problem, state: CoupledState, t: float, r: float) -> np.ndarray | float:
    """The portion of the source held fixed across the pseudo-time loop."""
    el = state.elastic
    coef = problem.params.alpha / el.params.eps
    rate = (el.div_eta - el.div_eta_prev_t) / state.grid.dt
    return _source_base(problem, state.grid, t) - (1.0 - r) * coef * rate


def effective_source_semi_implicit(
    problem,
    state: CoupledState,
    tau: int,
    t: float,
    r: float,
) -> np.ndarray | float:
    """Effective source with the semi-implicit dilatation correction.

    Blends the frozen explicit portion (weight ``1 - r``) with a
    backward difference reaching to the most recent pseudo-time
    dilatation (weight ``r``):

        s_eff = s - kappa div g
                - (alpha / eps) [(1-r)(D1 - D2) + r (D_rec - D1)] / dt

    ``tau`` is accepted for bookkeeping; the recent dilatation is read
    from ``state.elastic.div_eta_prev_tau``.  If the frozen portion has
    been cached on the state it is reused, which is what makes the
    explicit part of the source invariant across the loop.
    """
    del tau
    part = state.explicit_source_part
    if part is None:
        part = _frozen_part(problem, state, t, r)
    if r == 0.0:
        return part
    el = state.elastic
    coef = problem.params.alpha / el.params.eps
    return part - r * coef * (el.div_eta_prev_tau - el.div_eta) / state.grid.dt


def effective_force(
    problem,
    p: np.ndarray,
    t: float,
    grid: Grid,
    bcs: BoundarySpec,
) -> tuple[np.ndarray, np.ndarray]:
    """Effective body force on the solid, ``f - alpha grad p``."""
    gx, gy = pressure_gradient(p, grid, bcs, t=t)
    alpha = problem.params.alpha
    if problem.body_force is not None:
        fx, fy = problem.body_force(t, grid)
        return fx - alpha * gx, fy - alpha * gy
    return -alpha * gx, -alpha * gy


# ---------------------------------------------------------------------------
# state setup
# ---------------------------------------------------------------------------

def initialize(problem, grid: Grid, config: CouplingConfig) -> CoupledState:
    """Build the coupled state at time zero, starting from rest.

    The flow populations compensate the half-source so the initial
    pressure vanishes exactly; the elastic populations are preset so
    the initial displacement vanishes under the initial effective
    force.
    """
    if abs(config.alpha - problem.params.alpha) > 0:
        raise ValueError(
            f"config alpha {config.alpha} does not match problem alpha {problem.params.alpha}"
        )
    params = ElasticParams(lam=problem.params.lam, mu=problem.params.mu, eps=grid.dx)
    omega = flow_relaxation_rate(problem.params.kappa, grid)

    s0 = problem.source(0.0, grid) if problem.source is not None else 0.0
    dg0 = problem.div_gravity(0.0, grid) if problem.div_gravity is not None else 0.0
    f0 = flow_init(s0, dg0, problem.params.kappa, grid)
    p0 = np.zeros(grid.shape)
    flow_state = FlowState(f=f0, pressure=p0, omega=omega)

    feff0 = effective_force(problem, p0, 0.0, grid, problem.flow_bcs)
    fx0 = np.broadcast_to(np.asarray(feff0[0], dtype=np.float64), grid.shape)
    fy0 = np.broadcast_to(np.asarray(feff0[1], dtype=np.float64), grid.shape)
    g0 = elastic_init((fx0, fy0), params)

    zeros = np.zeros(grid.shape)
    elastic_state = ElasticState(
        g=g0,
        g_prev=g0,
        div_eta=zeros,
        div_eta_prev_tau=zeros,
        div_eta_prev_t=zeros.copy(),
        params=params,
    )
    return CoupledState(flow=flow_state, elastic=elastic_state, t=0.0, step=0, grid=grid)


# ---------------------------------------------------------------------------
# one flow step
# ---------------------------------------------------------------------------

def _reference_pseudo_loop(state: CoupledState, problem, config: CouplingConfig) -> None:
    """Relax the elastic field at the current flow time, plain array ops."""
    grid = state.grid
    el = state.elastic
    params = el.params
    t = state.t
    wrap = problem.elastic_bcs.wrap
    el.g_prev = el.g
    for j in range(1, config.n_e + 1):
        s_eff = effective_source_semi_implicit(problem, state, j, t, config.r)
        s_hat = grid.dt * s_eff
        p = flow_pressure(state.flow.f, s_hat, grid)
        feff = effective_force(problem, p, t, grid, problem.flow_bcs)
        m = moments_forward(el.g, params)
        half_force(m, feff, params)
        collide_moments(m, params)
        el.div_eta_prev_tau = divergence_eta(m) * params.div_scale
        g_star = back_transform(m)
        g_new = stream(g_star, grid, wrap)
        apply_elastic_bcs(g_new, g_star, el.g_prev, problem.elastic_bcs, params, t, grid)
        assert_filled(g_new, "elastic populations")
        magnitude = np.abs(g_new).max()
        if not magnitude <= DIVERGENCE_THRESHOLD:
            raise DivergenceError(t, j, "elastic")
        el.g_prev = el.g
        el.g = g_new


def _kernel_pseudo_loop(state: CoupledState, problem, config: CouplingConfig) -> None:
    from ._kernels import run_pseudo_loop

    run_pseudo_loop(state, problem, config)


def _begin_step(state: CoupledState, problem, config: CouplingConfig) -> None:
    state.explicit_source_part = _frozen_part(problem, state, state.t, config.r)
    state.elastic.div_eta_prev_tau = state.elastic.div_eta


def _extract_level(state: CoupledState, problem, config: CouplingConfig):
    """Read off the solution at the current time and the final source.

    Returns the level fields together with the per-step source and
    pressure that the subsequent flow update must reuse.
    """
    grid = state.grid
    el = state.elastic
    params = el.params
    t = state.t

    m = moments_forward(el.g, params)
    half_collision(m, params)
    div_hat = divergence_eta(m) * params.div_scale
    el.div_eta_prev_tau = div_hat
    s_eff = effective_source_semi_implicit(problem, state, config.n_e + 1, t, config.r)
    s_hat = grid.dt * s_eff
    p = flow_pressure(state.flow.f, s_hat, grid)
    feff = effective_force(problem, p, t, grid, problem.flow_bcs)
    half_force(m, feff, params)
    (eta1, eta2), (sig11, sig12, sig22) = extract_solution(m)
    dx = grid.dx
    level = LevelFields(
        k=state.step,
        t=t,
        p=p,
        eta1=eta1,
        eta2=eta2,
        sig11=sig11 / dx,
        sig12=sig12 / dx,
        sig22=sig22 / dx,
        div=div_hat / dx,
    )
    return level, s_hat, div_hat


def _advance_flow(state: CoupledState, problem, config: CouplingConfig, s_hat, p) -> None:
    grid = state.grid
    state.flow.pressure = p
    f_star = flow_collide(state.flow, s_hat, grid)
    f_new = stream(f_star, grid, problem.flow_bcs.wrap)
    apply_flow_bcs(f_new, f_star, problem.flow_bcs, state.t + grid.dt, grid)
    assert_filled(f_new, "flow populations")
    magnitude = np.abs(f_new).max()
    if not magnitude <= DIVERGENCE_THRESHOLD:
        raise DivergenceError(state.t + grid.dt, None, "flow")
    state.flow.f = f_new


def time_step(
    state: CoupledState,
    problem,
    config: CouplingConfig,
    backend: str = "reference",
) -> CoupledState:
    """Advance the coupled system by one flow step.

    On entry ``state.t`` is the level about to be produced; the elastic
    field is relaxed at that time, the solution is extracted into
    ``state.level_fields``, and the flow field is then advanced to
    ``state.t + dt``.
    """
    _begin_step(state, problem, config)
    if backend == "kernel":
        _kernel_pseudo_loop(state, problem, config)
    else:
        _reference_pseudo_loop(state, problem, config)
    level, s_hat, div_hat = _extract_level(state, problem, config)
    _advance_flow(state, problem, config, s_hat, level.p)
    state.level_fields = level
    el = state.elastic
    el.div_eta_prev_t = el.div_eta
    el.div_eta = div_hat
    state.step += 1
    state.t = state.step * state.grid.dt
    return state


def final_level(
    state: CoupledState,
    problem,
    config: CouplingConfig,
    backend: str = "reference",
) -> CoupledState:
    """Produce the solution at the final time without advancing the flow.

    The last flow step leaves the pressure populations at the final
    time with the elastic field one level behind; this runs one more
    pseudo-time relaxation and extraction to close the gap.
    """
    _begin_step(state, problem, config)
    if backend == "kernel":
        _kernel_pseudo_loop(state, problem, config)
    else:
        _reference_pseudo_loop(state, problem, config)
    level, _, _ = _extract_level(state, problem, config)
    state.level_fields = level
    return state


# ---------------------------------------------------------------------------
# full solve
# ---------------------------------------------------------------------------

@dataclass
class SolveResult:
    """Everything a run produces, in problem working units."""

    grid: Grid
    config: CouplingConfig
    backend: str
    ts: list[float]
    max_p: list[float]
    max_eta: list[float]
    max_sigma: list[float]
    subsidence: list[float] | None
    errors: "object | None"
    snapshots: list[LevelFields]
    final: LevelFields | None
    diverged: bool
    divergence: dict | None
    wall_time: float


def _resolve_backend(backend: str, problem) -> str:
    if backend == "auto":
        return "kernel" if getattr(problem, "kernel_layout", None) else "reference"
    if backend not in ("kernel", "reference"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "kernel" and not getattr(problem, "kernel_layout", None):
        raise ValueError("this problem has no compiled kernel layout; use the reference backend")
    return backend


def solve(
    problem,
    grid: Grid,
    config: CouplingConfig,
    backend: str = "auto",
    snapshot_times: list[float] | None = None,
    progress: int | None = None,
) -> SolveResult:
    """Run the coupled solver from rest to the final time.

    Parameters
    ----------
    backend : str
        ``"auto"`` picks the compiled pseudo-time kernel when the
        problem declares a supported layout, else the plain array path.
    snapshot_times : list of float, optional
        Times whose nearest levels are kept as full field snapshots.
        The final level is always kept.
    progress : int, optional
        Log every this many steps (default: a tenth of the run; 0
        disables logging).
    """
    from .problems import ErrorAccumulator

    resolved = _resolve_backend(backend, problem)
    state = initialize(problem, grid, config)
    acc = ErrorAccumulator(problem, grid) if problem.exact is not None else None

    n_t = config.n_t
    wanted = {n_t}
    for ts_req in snapshot_times or []:
        wanted.add(min(max(int(round(ts_req / grid.dt)), 0), n_t))
    stride = progress if progress is not None else max(1, n_t // 10)

    ts: list[float] = []
    max_p: list[float] = []
    max_eta: list[float] = []
    max_sigma: list[float] = []
    subsidence: list[float] | None = [] if problem.track_subsidence else None
    snapshots: list[LevelFields] = []
    diverged = None

    def consume(level: LevelFields) -> None:
        ts.append(level.t)
        max_p.append(float(np.abs(level.p).max()))
        max_eta.append(float(max(np.abs(level.eta1).max(), np.abs(level.eta2).max())))
        max_sigma.append(
            float(
                max(
                    np.abs(level.sig11).max(),
                    np.abs(level.sig12).max(),
                    np.abs(level.sig22).max(),
                )
            )
        )
        if subsidence is not None:
            subsidence.append(float(-level.eta2[:, -1].mean()))
        if acc is not None:
            acc.add_level(level)
        if level.k in wanted:
            snapshots.append(level)

    started = time.perf_counter()
    try:
        for k in range(n_t):
            time_step(state, problem, config, backend=resolved)
            consume(state.level_fields)
            if stride and (k + 1) % stride == 0:
                logger.info(
                    "step %d/%d (t = %.6g, max |p| = %.3e)",
                    k + 1,
                    n_t,
                    state.t,
                    max_p[-1],
                )
        final_level(state, problem, config, backend=resolved)
        consume(state.level_fields)
    except DivergenceError as err:
        diverged = err
        logger.warning("%s", err)
    wall = time.perf_counter() - started

    final = None
    for snap in snapshots:
        if snap.k == n_t:
            final = snap
    return SolveResult(
        grid=grid,
        config=config,
        backend=resolved,
        ts=ts,
        max_p=max_p,
        max_eta=max_eta,
        max_sigma=max_sigma,
        subsidence=subsidence,
        errors=acc.report(diverged=diverged is not None) if acc is not None else None,
        snapshots=snapshots,
        final=final,
        diverged=diverged is not None,
        divergence=(
            {"t": diverged.t, "tau": diverged.tau, "field": diverged.field}
            if diverged is not None
            else None
        ),
        wall_time=wall,
    )
