"""Lattice Boltzmann scheme for the pore-pressure diffusion equation.

The flow half of the solver advances the fluid content equation

    d/dt (p + coupling terms) - div(kappa grad p) = s_eff

with a single-relaxation-time D2Q9 scheme.  Pressure plays the role of
the conserved zeroth moment.  The source ``s_eff`` bundles the actual
fluid injection with the poroelastic coupling terms; it is assembled by
:mod:`porolbm.coupling` and enters here in time-integrated form, as the
amount added over one step (source rate times ``dt``).

All functions in this module operate on the scaled populations used
internally by the scheme.  The half-source convention makes the scheme
second order in time: the pressure read off the populations includes
half of the current step's source, and the collision deposits the
complementing half weighted by ``(1 - omega / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Grid, Q9

__all__ = [
    "FlowState",
    "flow_relaxation_rate",
    "flow_pressure",
    "flow_equilibrium",
    "flow_collide",
    "flow_init",
]


@dataclass
class FlowState:
    """Populations of the pressure field together with its fixed rate.

    Attributes
    ----------
    f : ndarray, shape (9, nx, ny)
        Current populations.
    pressure : ndarray, shape (nx, ny)
        Pressure extracted at the most recent step (kept for output and
        for boundary data that reads back the field).
    omega : float
        Relaxation rate, see :func:`flow_relaxation_rate`.
    """

    f: np.ndarray
    pressure: np.ndarray
    omega: float


def flow_relaxation_rate(kappa: float, grid: Grid) -> float:
    """Relaxation rate that reproduces hydraulic conductivity ``kappa``.

    The inverse rate is ``1 / omega = 3 kappa dt / dx**2 + 1/2``, the
    standard diffusion calibration of the D2Q9 stencil with the half
    offset coming from the trapezoidal source treatment.

    Raises
    ------
    ValueError
        If ``kappa`` is not positive or the resulting rate leaves the
        stability interval (0, 2).  With the formula above the rate is
        always inside the interval for positive ``kappa``; the check
        guards against degenerate inputs such as zero or NaN.
    """
    if not np.isfinite(kappa) or kappa <= 0.0:
        raise ValueError(f"hydraulic conductivity must be positive, got {kappa}")
    omega = 1.0 / (3.0 * kappa * grid.dt / grid.dx**2 + 0.5)
    if not 0.0 < omega < 2.0:
        raise ValueError(f"flow relaxation rate {omega} outside the stable interval (0, 2)")
    return omega


def flow_pressure(f: np.ndarray, s_eff: np.ndarray | float, grid: Grid) -> np.ndarray:
    """Extract pressure from populations and the current step source.

    ``p = sum_k f_k + s_eff / 2`` where ``s_eff`` is the per-step
    integrated source field (already multiplied by ``dt``).
    """
    del grid  # shape bookkeeping only; the formula has no grid factors
    return f.sum(axis=0) + 0.5 * s_eff


def flow_equilibrium(p: np.ndarray) -> np.ndarray:
    """Equilibrium populations ``w_k p`` for a resting diffusive field."""
    p = np.asarray(p, dtype=np.float64)
    return Q9.weights.reshape(9, *([1] * p.ndim)) * p[None, ...]


def flow_collide(state: FlowState, s_eff: np.ndarray | float, grid: Grid) -> np.ndarray:
    """BGK collision with trapezoidal source deposit.

    Returns the post-collision populations

        f* = f - omega (f - w p) + (1 - omega / 2) w s_eff

    where ``p`` must already be the pressure consistent with ``f`` and
    ``s_eff`` through :func:`flow_pressure`.
    """
    del grid
    omega = state.omega
    feq = flow_equilibrium(state.pressure)
    w = Q9.weights.reshape(9, *([1] * state.pressure.ndim))
    return state.f - omega * (state.f - feq) + (1.0 - 0.5 * omega) * (w * s_eff)


def flow_init(
    s0: np.ndarray | float,
    div_g0: np.ndarray | float,
    kappa: float,
    grid: Grid,
) -> np.ndarray:
    """Populations at time zero for a field starting from rest.

    The initial state compensates the half-source term so that the
    extracted pressure at time zero is exactly zero:

        f_k(0) = -(dt / 2) w_k (s(0) - kappa div g(0))

    with ``s`` the physical source rate and ``g`` the gravity field.

    Parameters
    ----------
    s0, div_g0 : array or float
        Source rate and divergence of gravity at time zero, on cell
        centers.  Scalars broadcast over the grid.
    """
    rate = np.broadcast_to(np.asarray(s0, dtype=np.float64) - kappa * np.asarray(div_g0, dtype=np.float64), grid.shape)
    f = np.empty((9, grid.nx, grid.ny), dtype=np.float64)
    for k in range(9):
        f[k] = -0.5 * grid.dt * Q9.weights[k] * rate
    return f
