"""Velocity sets, grids, and streaming for the square lattice.

Two stencils are used throughout the package.  The flow (pressure) field
lives on the full nine-velocity set D2Q9, whose zero-velocity member
carries weight 4/9.  The elastic field lives on the eight moving
velocities only (D2Q8); it has no rest population because the moment
basis of the solid update spans exactly eight degrees of freedom.

Conventions
-----------
* Distribution arrays are direction-major: ``field[k, i, j]`` is the
  population moving along velocity ``k`` at cell ``(i, j)``, with ``i``
  indexing x and ``j`` indexing y.
* Cells are squares of width ``dx``.  Cell centers sit at
  ``(i + 1/2) dx`` by ``(j + 1/2) dx``, so walls coincide with lattice
  links cut at half spacing.  This is the placement assumed by the
  halfway bounce-back boundaries in :mod:`porolbm.boundary`.
* Streaming moves each population one whole cell per step.  On a
  periodic axis the shift wraps; on a bounded axis the vacated inflow
  slots are filled with NaN sentinels and must be overwritten by a
  boundary rule before the field is read again.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "VelocitySet",
    "Q9",
    "Q8",
    "Grid",
    "opposite_index",
    "stream",
]


# ---------------------------------------------------------------------------
# velocity sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocitySet:
    """An ordered set of lattice velocities with weights and opposites.

    Attributes
    ----------
    name : str
        Identifier, ``"D2Q9"`` or ``"D2Q8"``.
    velocities : ndarray of int, shape (n, 2)
        Integer velocity vectors, one row per direction.
    weights : ndarray of float, shape (n,)
        Quadrature weights.  They sum to 1 for D2Q9 and to 5/9 for D2Q8
        (the D2Q9 weights minus the rest weight).
    opposite : ndarray of int, shape (n,)
        ``opposite[k]`` is the index of ``-velocities[k]``.
    """

    name: str
    velocities: np.ndarray
    weights: np.ndarray
    opposite: np.ndarray

    def __post_init__(self) -> None:
        self.velocities.setflags(write=False)
        self.weights.setflags(write=False)
        self.opposite.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.weights)

    def __len__(self) -> int:
        return len(self.weights)


def _build_q9() -> VelocitySet:
    velocities = np.array(
        [
            (0, 0),
            (1, 0),
            (0, 1),
            (-1, 0),
            (0, -1),
            (1, 1),
            (-1, 1),
            (-1, -1),
            (1, -1),
        ],
        dtype=np.int64,
    )
    weights = np.array(
        [4 / 9] + [1 / 9] * 4 + [1 / 36] * 4,
        dtype=np.float64,
    )
    opposite = np.array([0, 3, 4, 1, 2, 7, 8, 5, 6], dtype=np.int64)
    return VelocitySet("D2Q9", velocities, weights, opposite)


def _build_q8() -> VelocitySet:
    q9 = _build_q9()
    velocities = q9.velocities[1:].copy()
    weights = q9.weights[1:].copy()
    # Same ring of velocities, indices shifted down by one.
    opposite = np.array([2, 3, 0, 1, 6, 7, 4, 5], dtype=np.int64)
    return VelocitySet("D2Q8", velocities, weights, opposite)


Q9: VelocitySet = _build_q9()
Q8: VelocitySet = _build_q8()


def opposite_index(k: int, vset: VelocitySet) -> int:
    """Return the index of the velocity opposite to direction ``k``.

    Raises
    ------
    IndexError
        If ``k`` is not a valid direction index for ``vset``.
    """
    if not 0 <= k < vset.n:
        raise IndexError(f"direction {k} out of range for {vset.name}")
    return int(vset.opposite[k])


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform square-cell grid with its time step.

    Parameters
    ----------
    nx, ny : int
        Number of cells along x and y.
    dx : float
        Cell width (the same in both directions).
    dt : float
        Time-step length of the flow field.
    offset : bool
        If True (the default) cell centers are offset half a cell from
        the domain edge, which places physical walls on half links.

    Notes
    -----
    ``cs2`` is the squared lattice speed of sound of the D2Q9 stencil,
    ``dx**2 / (3 dt**2)``.  It only enters diagnostics; the solver works
    with relaxation rates directly.
    """

    nx: int
    ny: int
    dx: float
    dt: float
    offset: bool = True

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per direction")
        if self.dx <= 0 or self.dt <= 0:
            raise ValueError("dx and dt must be positive")

    @property
    def cs2(self) -> float:
        return self.dx**2 / (3.0 * self.dt**2)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def lx(self) -> float:
        return self.nx * self.dx

    @property
    def ly(self) -> float:
        return self.ny * self.dx

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return meshgrid arrays ``(X, Y)`` of cell-center coordinates."""
        half = 0.5 * self.dx if self.offset else 0.0
        x = half + self.dx * np.arange(self.nx)
        y = half + self.dx * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def x_centers(self) -> np.ndarray:
        half = 0.5 * self.dx if self.offset else 0.0
        return half + self.dx * np.arange(self.nx)

    def y_centers(self) -> np.ndarray:
        half = 0.5 * self.dx if self.offset else 0.0
        return half + self.dx * np.arange(self.ny)


# ---------------------------------------------------------------------------
# streaming
# ---------------------------------------------------------------------------

def _vset_for(field: np.ndarray) -> VelocitySet:
    if field.shape[0] == 9:
        return Q9
    if field.shape[0] == 8:
        return Q8
    raise ValueError(
        f"leading axis of length {field.shape[0]} matches neither D2Q9 nor D2Q8"
    )


def stream(field: np.ndarray, grid: Grid, wrap: tuple[bool, bool]) -> np.ndarray:
    """Advect every population one cell along its own velocity.

    Parameters
    ----------
    field : ndarray, shape (9, nx, ny) or (8, nx, ny)
        Post-collision populations.  The stencil is inferred from the
        leading axis.
    grid : Grid
        Supplies the expected shape.
    wrap : (bool, bool)
        Periodicity along x and y.  A periodic axis wraps; a bounded
        axis leaves NaN in every slot that would have been fed from
        outside the domain, so that a forgotten boundary update cannot
        go unnoticed.

    Returns
    -------
    ndarray
        A new array of the same shape.  The input is not modified.
    """
    vset = _vset_for(field)
    if field.shape[1:] != grid.shape:
        raise ValueError(f"field shape {field.shape[1:]} does not match grid {grid.shape}")
    out = np.empty_like(field)
    wrap_x, wrap_y = wrap
    for k in range(vset.n):
        cx, cy = int(vset.velocities[k, 0]), int(vset.velocities[k, 1])
        shifted = np.roll(field[k], shift=(cx, cy), axis=(0, 1))
        if not wrap_x and cx != 0:
            if cx > 0:
                shifted[:cx, :] = np.nan
            else:
                shifted[cx:, :] = np.nan
        if not wrap_y and cy != 0:
            if cy > 0:
                shifted[:, :cy] = np.nan
            else:
                shifted[:, cy:] = np.nan
        out[k] = shifted
    return out
