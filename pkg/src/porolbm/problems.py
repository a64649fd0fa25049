"""Benchmark problem definitions, analytic references, and error norms.

Three setups exercise the coupled solver.

Smooth periodic benchmark
    A manufactured solution on the unit square with periodic walls.
    Source and body force are chosen so that pressure, displacement,
    and stress follow closed trigonometric expressions, giving oracles
    for all fields and hence for convergence orders.

Uniaxial consolidation
    A column of soil, drained and loaded on top, fixed and sealed at
    the bottom, periodic in x.  Material constants are arranged so the
    pressure obeys the classical heat-kernel series with unit
    consolidation coefficient; the surface settlement follows the
    matching series between its undrained and drained limits.

Plane loading
    A dimensional variant of consolidation with a smooth nonuniform
    surface load (a raised-cosine bump, largest at x1 = 25 and zero at
    x1 = 75, periodic across the side walls).  No closed solution; the
    run is judged by qualitative invariants.  It is solved in a
    rescaled unit system in which pressure and stress carry the
    storage coefficient; divide by ``c0`` to recover physical values.

Sign conventions: y points upward, the load acts downward (traction
``(0, -q)`` with outward normal ``(0, 1)`` compresses), settlement is
positive downward (the negative of the mean vertical displacement of
the top cell row).

Error norms follow the discrete L2 convention: per level
``e = dx sqrt(sum |diff|^2)`` summed over cells and, for vector and
tensor fields, over components; in time the per-level norms combine as
``dt sqrt(sum_k e_k^2)`` over all levels including the initial one.
Relative errors divide by the same functional of the reference; a
vanishing reference leaves the relative entry undefined.  The fields
compared at the initial level are the rest-state initial conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .boundary import (
    BoundarySpec,
    DirichletDisplacement,
    DirichletPressure,
    NoFlow,
    Periodic,
    Traction,
)
from .lattice import Grid

__all__ = [
    "PhysicalParams",
    "AnalyticalFields",
    "ProblemDefinition",
    "manufactured_problem",
    "TerzaghiConstants",
    "terzaghi_pressure",
    "terzaghi_subsidence",
    "terzaghi_problem",
    "loading2d_problem",
    "error_norms",
    "ErrorReport",
    "ErrorAccumulator",
]


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalParams:
    """Material constants of a poroelastic medium.

    ``c0`` is the storage coefficient of the dimensional formulation;
    problems posed directly in working units keep the default 1.
    ``eps`` is populated once a grid is chosen (it equals the cell
    width) and is carried here only for reporting.
    """

    lam: float
    mu: float
    kappa: float
    alpha: float
    c0: float = 1.0
    eps: Optional[float] = None

    @property
    def nu(self) -> float:
        """Poisson ratio under the two-dimensional convention."""
        return self.lam / (self.lam + 2.0 * self.mu)

    @property
    def young(self) -> float:
        """Young modulus under the two-dimensional convention."""
        return 2.0 * self.mu * (1.0 + self.nu)


@dataclass(frozen=True)
class AnalyticalFields:
    """Closed-form reference fields, each optional.

    Field callables take ``(t, grid)`` and return cell-center arrays;
    ``subsidence`` takes ``t`` alone and returns a scalar.  At ``t = 0``
    all of them return the rest-state initial conditions.
    """

    pressure: Optional[Callable[[float, Grid], np.ndarray]] = None
    displacement: Optional[Callable[[float, Grid], tuple[np.ndarray, np.ndarray]]] = None
    stress: Optional[
        Callable[[float, Grid], tuple[np.ndarray, np.ndarray, np.ndarray]]
    ] = None
    subsidence: Optional[Callable[[float], float]] = None


@dataclass
class ProblemDefinition:
    """Everything the driver needs to run one benchmark.

    ``cells`` and ``dx_of`` map the single resolution parameter ``n``
    to the cell counts and cell width; ``make_grid`` combines them with
    the default time-step rule.  ``kernel_layout`` names the compiled
    fast path this problem can run on (``"periodic"`` or
    ``"consolidation"``), or None for the plain array path only.
    """

    name: str
    params: PhysicalParams
    flow_bcs: BoundarySpec
    elastic_bcs: BoundarySpec
    ly: float
    t_final: float
    dt_default: Callable[[float], float]
    cells: Callable[[int], tuple[int, int]]
    dx_of: Callable[[int], float]
    ne_default: Callable[[int], int]
    source: Optional[Callable] = None
    body_force: Optional[Callable] = None
    div_gravity: Optional[Callable] = None
    exact: Optional[AnalyticalFields] = None
    kernel_layout: Optional[str] = None
    track_subsidence: bool = False
    aux: dict = field(default_factory=dict)

    def make_grid(self, n: int, dt: Optional[float] = None) -> Grid:
        dx = self.dx_of(n)
        nx, ny = self.cells(n)
        return Grid(nx=nx, ny=ny, dx=dx, dt=dt if dt is not None else self.dt_default(dx))

    def steps(self, grid: Grid) -> int:
        n_t = int(round(self.t_final / grid.dt))
        if abs(n_t * grid.dt - self.t_final) > 1e-9 * self.t_final:
            raise ValueError(
                f"time step {grid.dt} does not divide the final time {self.t_final}"
            )
        return n_t


# ---------------------------------------------------------------------------
# smooth periodic benchmark
# ---------------------------------------------------------------------------

class _TrigTemplates:
    """Cache of the trigonometric cell-center patterns for one grid."""

    def __init__(self) -> None:
        self._key: Optional[tuple] = None
        self._arrays: Optional[tuple] = None

    def get(self, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        key = (grid.nx, grid.ny, grid.dx, grid.offset)
        if key != self._key:
            x, y = grid.cell_centers()
            cx, sx = np.cos(2 * np.pi * x), np.sin(2 * np.pi * x)
            cy, sy = np.cos(2 * np.pi * y), np.sin(2 * np.pi * y)
            self._arrays = (cx * sy, sx * cy, sx * sy, cx * cy)
            self._key = key
        return self._arrays


def manufactured_problem(alpha: float) -> ProblemDefinition:
    """Fully periodic benchmark with closed-form fields.

    With ``E(t) = exp(-8 pi^2 kappa t)`` the solution is

        eta   = (1 - E)/2 * (9 cos sin, 7 sin cos)
        p     = -(16 lam + 30 mu) pi / alpha * (1 - E) * sin sin

    driven by the body force ``(8 pi^2 mu (1 - E) cos sin, 0)`` and a
    matching fluid source.  All fields vanish at t = 0, so the solver's
    rest start is exact.
    """
    if alpha <= 0:
        raise ValueError("the manufactured fields need a positive coupling coefficient")
    lam = 11.0 / 45.0
    mu = 11.0 / 360.0
    kappa = 0.1
    params = PhysicalParams(lam=lam, mu=mu, kappa=kappa, alpha=alpha)
    trig = _TrigTemplates()
    decay = 8.0 * np.pi**2 * kappa
    p_coef = -(16.0 * lam + 30.0 * mu) * np.pi / alpha

    def envelope(t: float) -> float:
        return 1.0 - math.exp(-decay * t)

    def source(t: float, grid: Grid) -> np.ndarray:
        _, _, ss, _ = trig.get(grid)
        e = math.exp(-decay * t)
        coef = -8.0 * np.pi**3 * kappa * (16.0 * alpha * e + (16.0 * lam + 30.0 * mu) / alpha)
        return coef * ss

    def body_force(t: float, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        cs, _, _, _ = trig.get(grid)
        fx = 8.0 * np.pi**2 * mu * envelope(t) * cs
        return fx, np.zeros(grid.shape)

    def pressure(t: float, grid: Grid) -> np.ndarray:
        _, _, ss, _ = trig.get(grid)
        return p_coef * envelope(t) * ss

    def displacement(t: float, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        cs, sc, _, _ = trig.get(grid)
        a = envelope(t)
        return 4.5 * a * cs, 3.5 * a * sc

    def stress(t: float, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        _, _, ss, cc = trig.get(grid)
        a = envelope(t)
        s11 = -(16.0 * lam + 18.0 * mu) * np.pi * a * ss
        s22 = -(16.0 * lam + 14.0 * mu) * np.pi * a * ss
        s12 = 16.0 * np.pi * mu * a * cc
        return s11, s12, s22

    periodic = BoundarySpec(Periodic(), Periodic(), Periodic(), Periodic())
    return ProblemDefinition(
        name="manufactured",
        params=params,
        flow_bcs=periodic,
        elastic_bcs=periodic,
        ly=1.0,
        t_final=1.0,
        dt_default=lambda dx: dx * dx,
        cells=lambda n: (n, n),
        dx_of=lambda n: 1.0 / n,
        ne_default=lambda n: n,
        source=source,
        body_force=body_force,
        exact=AnalyticalFields(pressure=pressure, displacement=displacement, stress=stress),
        kernel_layout="periodic",
    )


# ---------------------------------------------------------------------------
# uniaxial consolidation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TerzaghiConstants:
    """Constants of the consolidation series solutions.

    ``c_f`` is the consolidation coefficient (the conductivity is
    chosen so it equals one), ``p0`` the undrained pressure response,
    ``s0`` and ``s_inf`` the undrained and drained settlements, and
    ``load`` the magnitude of the compressive surface traction.
    """

    alpha: float
    p0: float
    c_f: float
    s0: float
    s_inf: float
    load: float


def terzaghi_pressure(
    t: float,
    x2: np.ndarray | float,
    params: TerzaghiConstants,
    tol: float = 1e-14,
) -> np.ndarray | float:
    """Series pressure of the consolidating column at height ``x2``.

        p(t, x2) = p0 sum_k 2 (-1)^k / ((k+1/2) pi)
                   exp(-(k+1/2)^2 pi^2 c_f t) cos((k+1/2) pi x2)

    Terms are added until their envelope drops below ``tol * p0``
    (capped at 10^6 terms).  For ``c_f t < 1e-12`` the series limit
    ``p0`` is returned directly.  Only positive times are admissible.
    """
    if t <= 0.0:
        raise ValueError("the consolidation series is defined for t > 0")
    x2 = np.asarray(x2, dtype=np.float64)
    td = params.c_f * t
    if td < 1e-12:
        return np.full_like(x2, params.p0) if x2.ndim else params.p0
    total = np.zeros_like(x2) if x2.ndim else 0.0
    sign = 1.0
    for k in range(1_000_000):
        kh = (k + 0.5) * np.pi
        coef = 2.0 * sign / kh * math.exp(-kh * kh * td)
        total = total + coef * np.cos(kh * x2)
        if abs(coef) < tol * abs(params.p0):
            break
        sign = -sign
    return params.p0 * total


def terzaghi_subsidence(t: float, params: TerzaghiConstants, tol: float = 1e-14) -> float:
    """Series settlement of the column surface.

        S(t) = s_inf + (s0 - s_inf) sum_k 2 / ((k+1/2)^2 pi^2)
               exp(-(k+1/2)^2 pi^2 c_f t)

    It decays monotonically in magnitude of the transient from the
    undrained value ``s0`` toward the drained value ``s_inf``.  The
    same truncation rules as for the pressure series apply.
    """
    if t <= 0.0:
        raise ValueError("the consolidation series is defined for t > 0")
    td = params.c_f * t
    if td < 1e-12:
        return params.s0
    total = 0.0
    for k in range(1_000_000):
        kh = (k + 0.5) * np.pi
        term = 2.0 / (kh * kh) * math.exp(-kh * kh * td)
        total += term
        if term < tol:
            break
    return params.s_inf + (params.s0 - params.s_inf) * total


def terzaghi_problem(alpha: float, l_cells: int = 4) -> ProblemDefinition:
    """Consolidating soil column of unit height.

    The column is ``l_cells`` cells wide and periodic across its
    vertical walls; the width shrinks with the cell size, which keeps
    the setup one-dimensional at every resolution.  The conductivity
    ``kappa = (25 + 9 alpha^2) / 25`` normalizes the consolidation
    coefficient to one, and the surface load
    ``alpha + (lam + 2 mu) / alpha`` normalizes the undrained pressure
    response to one.
    """
    if alpha <= 0:
        raise ValueError("consolidation requires a positive coupling coefficient")
    lam = 20.0 / 9.0
    mu = 5.0 / 18.0
    kappa = (25.0 + 9.0 * alpha * alpha) / 25.0
    m_p = lam + 2.0 * mu  # 25/9, the uniaxial compression modulus
    load = alpha + m_p / alpha
    constants = TerzaghiConstants(
        alpha=alpha,
        p0=1.0,
        c_f=1.0,
        s0=1.0 / alpha,
        s_inf=(9.0 * alpha * alpha + 25.0) / (25.0 * alpha),
        load=load,
    )
    params = PhysicalParams(lam=lam, mu=mu, kappa=kappa, alpha=alpha)

    flow_bcs = BoundarySpec(
        left=Periodic(),
        right=Periodic(),
        bottom=NoFlow(),
        top=DirichletPressure(lambda t, s: np.zeros_like(np.asarray(s, dtype=np.float64))),
    )
    elastic_bcs = BoundarySpec(
        left=Periodic(),
        right=Periodic(),
        bottom=DirichletDisplacement(
            lambda t, s: (np.zeros_like(np.asarray(s, dtype=np.float64)),) * 2
        ),
        top=Traction(
            lambda t, s: (
                np.zeros_like(np.asarray(s, dtype=np.float64)),
                np.full_like(np.asarray(s, dtype=np.float64), -load),
            )
        ),
    )

    def pressure(t: float, grid: Grid) -> np.ndarray:
        if t == 0.0:
            return np.zeros(grid.shape)
        profile = terzaghi_pressure(t, grid.y_centers(), constants)
        return np.broadcast_to(profile[None, :], grid.shape)

    def subsidence(t: float) -> float:
        if t == 0.0:
            return 0.0
        return terzaghi_subsidence(t, constants)

    return ProblemDefinition(
        name="terzaghi",
        params=params,
        flow_bcs=flow_bcs,
        elastic_bcs=elastic_bcs,
        ly=1.0,
        t_final=1.0,
        dt_default=lambda dx: 0.25 * dx * dx,
        cells=lambda n: (l_cells, n),
        dx_of=lambda n: 1.0 / n,
        ne_default=lambda n: 3 * n,
        exact=AnalyticalFields(pressure=pressure, subsidence=subsidence),
        kernel_layout="consolidation",
        track_subsidence=True,
        aux={"constants": constants},
    )


# ---------------------------------------------------------------------------
# plane loading
# ---------------------------------------------------------------------------

def loading2d_problem() -> ProblemDefinition:
    """Dimensional soil layer under a nonuniform surface load.

    Physical constants: Young modulus 1e5 and Poisson ratio 0.9 (so
    ``lam = 9e6/19`` and ``mu = 5e5/19``), storage coefficient 1e-6,
    conductivity 1e-9, coupling coefficient 1.  The run works in the
    rescaled unit system in which pressure, stress, and traction carry
    the storage coefficient and the conductivity is divided by it;
    divide pressure and stress outputs by ``c0`` for physical values.
    Displacement is unaffected by the rescaling.
    """
    c0 = 1e-6
    lam_hat = 9.0 / 19.0
    mu_hat = 0.5 / 19.0
    kappa_hat = 1e-3
    params = PhysicalParams(lam=lam_hat, mu=mu_hat, kappa=kappa_hat, alpha=1.0, c0=c0)

    def traction(t: float, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=np.float64)
        # 1e4 physical, times c0; smooth and 100-periodic, peak at x1 = 25
        t2 = -1e-2 * (1.0 - np.cos((s + 25.0) * np.pi / 50.0))
        return np.zeros_like(s), t2

    flow_bcs = BoundarySpec(
        left=Periodic(),
        right=Periodic(),
        bottom=NoFlow(),
        top=DirichletPressure(lambda t, s: np.zeros_like(np.asarray(s, dtype=np.float64))),
    )
    elastic_bcs = BoundarySpec(
        left=Periodic(),
        right=Periodic(),
        bottom=DirichletDisplacement(
            lambda t, s: (np.zeros_like(np.asarray(s, dtype=np.float64)),) * 2
        ),
        top=Traction(traction),
    )

    return ProblemDefinition(
        name="loading2d",
        params=params,
        flow_bcs=flow_bcs,
        elastic_bcs=elastic_bcs,
        ly=100.0,
        t_final=2e6,
        dt_default=lambda dx: 200.0 * dx * dx,
        cells=lambda n: (n, n),
        dx_of=lambda n: 100.0 / n,
        ne_default=lambda n: 2 * n,
        kernel_layout="consolidation",
        track_subsidence=True,
    )


# ---------------------------------------------------------------------------
# error norms
# ---------------------------------------------------------------------------

def error_norms(
    numeric: Mapping[str, np.ndarray | tuple],
    exact: Mapping[str, np.ndarray | tuple],
    grid: Grid,
) -> dict[str, tuple[float, float]]:
    """Discrete L2 error and reference norm per field at one level.

    Vector and tensor fields are passed as tuples of component arrays;
    their component norms combine in quadrature.  Only keys present in
    ``exact`` are evaluated.

    Returns
    -------
    dict
        ``{key: (error, reference_norm)}``.
    """
    out: dict[str, tuple[float, float]] = {}
    for key, ref in exact.items():
        num = numeric[key]
        num_parts = num if isinstance(num, tuple) else (num,)
        ref_parts = ref if isinstance(ref, tuple) else (ref,)
        err2 = 0.0
        ref2 = 0.0
        for n_c, r_c in zip(num_parts, ref_parts):
            diff = n_c - r_c
            err2 += float((diff * diff).sum())
            ref2 += float((r_c * r_c).sum())
        out[key] = (grid.dx * math.sqrt(err2), grid.dx * math.sqrt(ref2))
    return out


@dataclass
class ErrorReport:
    """Time-space error norms of a run.

    ``abs`` and ``rel`` map field names to the combined-in-time norms;
    a relative entry is None when the reference norm vanishes.
    ``per_level`` keeps the per-level absolute errors for output.
    """

    abs: dict[str, float]
    rel: dict[str, Optional[float]]
    per_level: dict[str, list[float]]
    diverged: bool = False


class ErrorAccumulator:
    """Accumulates per-level L2 errors into the time-space norm.

    Storing field histories would dwarf the solution itself at fine
    resolutions, so levels are folded in as they are produced.
    """

    def __init__(self, problem: ProblemDefinition, grid: Grid) -> None:
        if problem.exact is None:
            raise ValueError("problem has no analytic reference")
        self.problem = problem
        self.grid = grid
        self.err2: dict[str, float] = {}
        self.ref2: dict[str, float] = {}
        self.per_level: dict[str, list[float]] = {}

    def _exact_at(self, t: float) -> dict[str, np.ndarray | tuple]:
        ex = self.problem.exact
        out: dict[str, np.ndarray | tuple] = {}
        if ex.pressure is not None:
            out["p"] = ex.pressure(t, self.grid)
        if ex.displacement is not None:
            out["eta"] = ex.displacement(t, self.grid)
        if ex.stress is not None:
            out["sigma"] = ex.stress(t, self.grid)
        return out

    def add_level(self, level) -> None:
        numeric = {
            "p": level.p,
            "eta": (level.eta1, level.eta2),
            "sigma": (level.sig11, level.sig12, level.sig22),
        }
        norms = error_norms(numeric, self._exact_at(level.t), self.grid)
        for key, (err, ref) in norms.items():
            self.err2[key] = self.err2.get(key, 0.0) + err * err
            self.ref2[key] = self.ref2.get(key, 0.0) + ref * ref
            self.per_level.setdefault(key, []).append(err)

    def report(self, diverged: bool = False) -> ErrorReport:
        dt = self.grid.dt
        if diverged:
            absn = {key: math.inf for key in self.err2}
            reln = {key: math.inf for key in self.err2}
        else:
            absn = {key: dt * math.sqrt(v) for key, v in self.err2.items()}
            reln = {}
            for key, a in absn.items():
                ref = dt * math.sqrt(self.ref2[key])
                reln[key] = (a / ref) if ref > 0.0 else None
        return ErrorReport(abs=absn, rel=reln, per_level=self.per_level, diverged=diverged)
