"""Boundary conditions for the flow and elastic fields.

Walls sit on half links: the outermost cell centers are ``dx/2`` inside
the physical boundary.  All wall rules below exploit this placement.

Flow field
----------
* ``DirichletPressure``: halfway anti-bounce-back.  The incoming
  population is the negated outgoing one plus ``2 w p_D`` evaluated at
  the link midpoint on the wall, at the time level being advanced to.
* ``NoFlow``: halfway bounce-back, a plain reflection.

Elastic field
-------------
* ``DirichletDisplacement``: fullway reflection built from the
  populations at the start of the previous pseudo-time iteration,
  minus ``6 w (e_out . eta_D)`` with ``e_out`` the outgoing velocity.
  Its stationary fixed point reproduces boundary stresses exactly;
  the displacement value is imposed on the first lattice row, half a
  spacing inside the wall face, a known property of fullway rules
  that vanishes with the grid spacing.
* ``Traction``: halfway anti-bounce-back on the post-collision
  populations plus a correction proportional to the surface traction,
  see :func:`traction_corrections`.

Data callables receive ``(t, s)`` where ``s`` is the array of
coordinates along the wall (x on horizontal walls, y on vertical
walls), already shifted to the link midpoints of the direction being
reconstructed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .lattice import Grid, Q8, Q9, VelocitySet

__all__ = [
    "Periodic",
    "DirichletPressure",
    "NoFlow",
    "DirichletDisplacement",
    "Traction",
    "BoundarySpec",
    "apply_flow_bcs",
    "apply_elastic_bcs",
    "traction_corrections",
    "pad_pressure",
    "find_sentinels",
    "assert_filled",
]


# ---------------------------------------------------------------------------
# condition types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Periodic:
    """Wraps around; must be used on both walls of an axis."""


@dataclass(frozen=True)
class DirichletPressure:
    """Prescribed pressure on the wall.  ``value(t, s) -> p``."""

    value: Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class NoFlow:
    """Homogeneous normal-flux condition for the flow field."""


@dataclass(frozen=True)
class DirichletDisplacement:
    """Prescribed displacement on the wall.  ``value(t, s) -> (d1, d2)``."""

    value: Callable[[float, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class Traction:
    """Prescribed surface traction on the wall.  ``value(t, s) -> (t1, t2)``."""

    value: Callable[[float, np.ndarray], tuple[np.ndarray, np.ndarray]]


Condition = Union[Periodic, DirichletPressure, NoFlow, DirichletDisplacement, Traction]

_FLOW_KINDS = (Periodic, DirichletPressure, NoFlow)
_ELASTIC_KINDS = (Periodic, DirichletDisplacement, Traction)

# edge name -> (array axis, layer index, outward normal)
_EDGES: dict[str, tuple[int, int, tuple[int, int]]] = {
    "left": (0, 0, (-1, 0)),
    "right": (0, -1, (1, 0)),
    "bottom": (1, 0, (0, -1)),
    "top": (1, -1, (0, 1)),
}


@dataclass(frozen=True)
class BoundarySpec:
    """One condition per wall for a single field.

    Periodicity must come in facing pairs.  Whether the non-periodic
    kinds fit the field they are applied to is checked by the apply
    functions.
    """

    left: Condition
    right: Condition
    bottom: Condition
    top: Condition

    def __post_init__(self) -> None:
        if isinstance(self.left, Periodic) != isinstance(self.right, Periodic):
            raise ValueError("periodic conditions must pair left with right")
        if isinstance(self.bottom, Periodic) != isinstance(self.top, Periodic):
            raise ValueError("periodic conditions must pair bottom with top")

    @property
    def wrap(self) -> tuple[bool, bool]:
        return (isinstance(self.left, Periodic), isinstance(self.bottom, Periodic))

    def edges(self) -> dict[str, Condition]:
        return {"left": self.left, "right": self.right, "bottom": self.bottom, "top": self.top}


def _check_kinds(spec: BoundarySpec, allowed: tuple[type, ...], field_name: str) -> None:
    for edge, cond in spec.edges().items():
        if not isinstance(cond, allowed):
            raise TypeError(
                f"{type(cond).__name__} on edge '{edge}' is not a {field_name} condition"
            )


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------

def _wall_coords(edge: str, grid: Grid) -> np.ndarray:
    """Cell-center coordinates along a wall."""
    if edge in ("bottom", "top"):
        return grid.x_centers()
    return grid.y_centers()


def _layer(field_k: np.ndarray, edge: str) -> np.ndarray:
    axis, idx, _ = _EDGES[edge]
    if axis == 0:
        return field_k[idx, :]
    return field_k[:, idx]


def _set_layer(field_k: np.ndarray, edge: str, values: np.ndarray) -> None:
    axis, idx, _ = _EDGES[edge]
    if axis == 0:
        field_k[idx, :] = values
    else:
        field_k[:, idx] = values


def _incoming(vset: VelocitySet, edge: str) -> list[int]:
    """Directions pointing from the wall into the domain."""
    _, _, outward = _EDGES[edge]
    inward = (-outward[0], -outward[1])
    return [
        k
        for k in range(vset.n)
        if int(vset.velocities[k, 0]) * inward[0] + int(vset.velocities[k, 1]) * inward[1] > 0
    ]


def _tangential_component(vset: VelocitySet, k: int, edge: str) -> int:
    cx, cy = int(vset.velocities[k, 0]), int(vset.velocities[k, 1])
    return cx if edge in ("bottom", "top") else cy


# ---------------------------------------------------------------------------
# flow boundary conditions
# ---------------------------------------------------------------------------

def apply_flow_bcs(
    f: np.ndarray,
    f_star: np.ndarray,
    spec: BoundarySpec,
    t: float,
    grid: Grid,
) -> np.ndarray:
    """Fill the inflow slots of a freshly streamed flow field in place.

    Parameters
    ----------
    f : ndarray, shape (9, nx, ny)
        Streamed populations; NaN in unfilled inflow slots.
    f_star : ndarray
        The post-collision populations the stream step started from.
    t : float
        Time level the stream step advances to.  Dirichlet data is
        evaluated here.
    """
    _check_kinds(spec, _FLOW_KINDS, "flow")
    for edge, cond in spec.edges().items():
        if isinstance(cond, Periodic):
            continue
        coords = _wall_coords(edge, grid)
        for k in _incoming(Q9, edge):
            kk = int(Q9.opposite[k])
            outgoing = _layer(f_star[kk], edge)
            if isinstance(cond, NoFlow):
                _set_layer(f[k], edge, outgoing)
            else:
                # Link midpoint along the outgoing direction.
                shift = 0.5 * grid.dx * _tangential_component(Q9, kk, edge)
                p_wall = cond.value(t, coords + shift)
                _set_layer(f[k], edge, -outgoing + 2.0 * Q9.weights[k] * p_wall)
    return f


# ---------------------------------------------------------------------------
# elastic boundary conditions
# ---------------------------------------------------------------------------

def traction_corrections(
    normal: tuple[int, int],
    t_vec: tuple[np.ndarray, np.ndarray],
) -> dict[tuple[int, int], np.ndarray]:
    """Per-direction corrections for a traction wall.

    Parameters
    ----------
    normal : (int, int)
        Outward unit normal of the wall.
    t_vec : (t1, t2)
        Surface traction samples (scalars or arrays along the wall).

    Returns
    -------
    dict
        Maps each incoming velocity (as a tuple) to its correction:
        the normal incoming direction gets the normal traction
        component ``t . nu`` with ``nu`` the inward normal, and each
        diagonal ``nu + u`` gets half the tangential component
        ``(t . u) / 2``.
    """
    t1, t2 = t_vec
    nu = (-normal[0], -normal[1])
    out: dict[tuple[int, int], np.ndarray] = {}
    out[nu] = t1 * nu[0] + t2 * nu[1]
    for u in ((-nu[1], nu[0]), (nu[1], -nu[0])):
        out[(nu[0] + u[0], nu[1] + u[1])] = 0.5 * (t1 * u[0] + t2 * u[1])
    return out


def apply_elastic_bcs(
    g_new: np.ndarray,
    g_star: np.ndarray,
    g_prev: np.ndarray,
    spec: BoundarySpec,
    params,
    t: float,
    grid: Grid,
) -> np.ndarray:
    """Fill the inflow slots of a freshly streamed elastic field in place.

    Parameters
    ----------
    g_new : ndarray, shape (8, nx, ny)
        Streamed populations; NaN in unfilled inflow slots.
    g_star : ndarray
        Post-collision populations of the current pseudo-time iteration
        (consumed by traction walls).
    g_prev : ndarray
        Populations at the start of the previous pseudo-time iteration
        (consumed by displacement walls).  At the first iteration of a
        flow step this is the state the step began with.
    params : ElasticParams
        Supplies the scaling parameter for the traction correction.
    t : float
        Current flow time; boundary data sits at this level throughout
        the pseudo-time loop.
    """
    _check_kinds(spec, _ELASTIC_KINDS, "elastic")
    for edge, cond in spec.edges().items():
        if isinstance(cond, Periodic):
            continue
        coords = _wall_coords(edge, grid)
        _, _, outward = _EDGES[edge]
        for k in _incoming(Q8, edge):
            kk = int(Q8.opposite[k])
            shift = 0.5 * grid.dx * _tangential_component(Q8, kk, edge)
            if isinstance(cond, DirichletDisplacement):
                d1, d2 = cond.value(t, coords + shift)
                cx, cy = int(Q8.velocities[kk, 0]), int(Q8.velocities[kk, 1])
                corr = 6.0 * Q8.weights[k] * (cx * d1 + cy * d2)
                _set_layer(g_new[k], edge, _layer(g_prev[kk], edge) - corr)
            else:
                t_vec = cond.value(t, coords + shift)
                key = (int(Q8.velocities[k, 0]), int(Q8.velocities[k, 1]))
                corr = traction_corrections(outward, t_vec)[key]
                _set_layer(
                    g_new[k], edge, -_layer(g_star[kk], edge) + params.eps * corr
                )
    return g_new


# ---------------------------------------------------------------------------
# ghost layer for the pressure gradient
# ---------------------------------------------------------------------------

def pad_pressure(p: np.ndarray, spec: BoundarySpec, t: float, grid: Grid) -> np.ndarray:
    """Return ``p`` padded by one ghost layer per side.

    Ghost values implement the wall conditions of the flow field:
    periodic axes wrap (and wrap first, so that corner ghosts on a
    mixed grid are consistent), prescribed-pressure walls use the
    linear reflection ``2 p_wall - p_interior``, and no-flow walls
    mirror the interior value.  Boundary data is evaluated at time
    ``t``, the time level of ``p`` itself.
    """
    _check_kinds(spec, _FLOW_KINDS, "flow")
    nx, ny = p.shape
    out = np.empty((nx + 2, ny + 2), dtype=np.float64)
    out[1:-1, 1:-1] = p

    def fill_axis(edge: str, cond: Condition, coords: np.ndarray) -> None:
        axis, idx, _ = _EDGES[edge]
        ghost_row = 0 if idx == 0 else -1
        if axis == 0:
            interior = out[1 if idx == 0 else -2, :]
        else:
            interior = out[:, 1 if idx == 0 else -2]
        if isinstance(cond, NoFlow):
            ghost = interior.copy()
        else:
            ghost = 2.0 * np.asarray(cond.value(t, coords), dtype=np.float64) - interior
        if axis == 0:
            out[ghost_row, :] = ghost
        else:
            out[:, ghost_row] = ghost

    # x axis first
    if isinstance(spec.left, Periodic):
        out[0, 1:-1] = p[-1, :]
        out[-1, 1:-1] = p[0, :]
        # corner columns filled below by the y rules over the full width
    else:
        # extended coordinates cover the corner ghosts one cell outside
        y_ext = grid.dx * (np.arange(ny + 2) - 0.5)
        fill_axis("left", spec.left, y_ext)
        fill_axis("right", spec.right, y_ext)
    # y axis second, across the padded width including corners
    if isinstance(spec.bottom, Periodic):
        out[:, 0] = out[:, -2]
        out[:, -1] = out[:, 1]
    else:
        x_ext = grid.dx * (np.arange(nx + 2) - 0.5)
        fill_axis("bottom", spec.bottom, x_ext)
        fill_axis("top", spec.top, x_ext)
    return out


# ---------------------------------------------------------------------------
# sentinel scan
# ---------------------------------------------------------------------------

def find_sentinels(field: np.ndarray) -> list[tuple[int, int]]:
    """Return ``(direction, count)`` pairs for directions containing NaN."""
    out = []
    for k in range(field.shape[0]):
        n = int(np.isnan(field[k]).sum())
        if n:
            out.append((k, n))
    return out


def assert_filled(field: np.ndarray, label: str = "field") -> None:
    """Raise if any NaN sentinel survived the boundary update."""
    bad = find_sentinels(field)
    if bad:
        detail = ", ".join(f"direction {k}: {n} cells" for k, n in bad)
        raise RuntimeError(f"{label} has unfilled streaming slots ({detail})")
