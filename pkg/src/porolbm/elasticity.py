"""Moment-space lattice Boltzmann scheme for quasi-static linear elasticity.

The solid update runs on the eight moving velocities of the square
lattice (D2Q8) and is driven to steady state by an inner pseudo-time
loop inside every flow time step.  Populations ``g_k`` carry no direct
physical meaning; displacement and stress are read off linear moments.

Moment basis
------------
With ``c = (c_x, c_y)`` the integer velocities, the raw moments are

    m10 = sum c_x g          m01 = sum c_y g
    m11 = sum c_x c_y g      m_s = sum (c_x^2 + c_y^2) g
    m_d = sum (c_x^2 - c_y^2) g
    m12 = sum c_x c_y^2 g    m21 = sum c_x^2 c_y g

and the eighth basis member is the trace-corrected combination

    m_f = m22 + m_s / (12 (lam + mu) - 4),   m22 = sum c_x^2 c_y^2 g.

``m_f`` relaxes at unit rate toward zero, which is what makes the
second-order velocity moments consistent with plane-strain elasticity.
The combination is singular when ``lam + mu`` equals 1/3, so that
parameter point is rejected outright.

Relaxation rates
----------------
The conserved pair ``(m10, m01)`` receives the body-force kick only.
The second-order moments relax with

    omega_s = 2 / (3 (lam + mu) + 1)      (trace part m_s)
    omega_d = 2 / (6 mu + 1)              (deviatoric parts m_d, m11)

and the third-order moments ``m12, m21`` relax at unit rate toward the
equilibria ``theta * m10_bar`` with ``theta = 1/3``.  Chapman-Enskog
expansion of this collision recovers the quasi-static Navier equations
with first Lame parameter ``lam`` and shear modulus ``mu``.

Solution read-off
-----------------
Mid-collision moments ``m_bar = (m + m_star) / 2`` carry the physical
fields.  They are never formed by averaging in the hot path; the
equivalent closed forms

    m_bar_s  = 3 (lam + mu) / (3 (lam + mu) + 1) * m_s
    m_bar_d  = 6 mu / (6 mu + 1) * m_d            (same factor for m11)

are used instead, and the averaging identity is checked in the test
suite.  Displacement is ``(m_bar_10, m_bar_01)`` directly.  The stress
tensor and the divergence read off here are lattice scaled: divide the
stress by the cell width for the continuum stress, and divide
``-m_bar_s`` by ``2 (lam + mu)`` and the cell width for the continuum
divergence of the displacement.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ElasticParams",
    "MomentField",
    "moments_forward",
    "half_force",
    "half_collision",
    "collide_moments",
    "back_transform",
    "extract_solution",
    "divergence_eta",
    "elastic_init",
    "ElasticState",
]

THETA = 1.0 / 3.0


@dataclass(frozen=True)
class ElasticParams:
    """Material and scaling constants of the solid update.

    Parameters
    ----------
    lam, mu : float
        First Lame parameter and shear modulus, in the working unit
        system of the run.
    eps : float
        Scaling parameter of the elastic scheme, equal to the cell
        width.  The body force enters the moments multiplied by
        ``eps**2``.

    Raises
    ------
    ValueError
        If ``mu`` is not positive, or ``lam + mu`` sits on one of the
        two singular points ``-1/3`` (infinite trace rate) and ``1/3``
        (singular trace correction).

    Warns
    -----
    UserWarning
        If a relaxation rate falls outside the stability interval
        (0, 2), which happens for ``lam + mu <= 0``.  Such runs are
        allowed but will generally diverge.
    """

    lam: float
    mu: float
    eps: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.mu) or self.mu <= 0.0:
            raise ValueError(f"shear modulus must be positive, got {self.mu}")
        if not np.isfinite(self.lam):
            raise ValueError(f"first Lame parameter must be finite, got {self.lam}")
        if self.eps <= 0.0:
            raise ValueError(f"scaling parameter eps must be positive, got {self.eps}")
        lm = self.lam + self.mu
        if abs(3.0 * lm + 1.0) < 1e-10:
            raise ValueError("lam + mu = -1/3 makes the trace relaxation rate singular")
        if abs(12.0 * lm - 4.0) < 1e-10:
            raise ValueError(
                "lam + mu = 1/3 makes the trace-corrected moment singular; "
                "perturb the moduli away from this point"
            )
        for name, omega in (("omega_s", self.omega_s), ("omega_d", self.omega_d)):
            if not 0.0 < omega < 2.0:
                warnings.warn(
                    f"elastic relaxation rate {name} = {omega} outside (0, 2); "
                    "the pseudo-time iteration will not be stable",
                    stacklevel=3,
                )

    @property
    def omega_s(self) -> float:
        return 2.0 / (3.0 * (self.lam + self.mu) + 1.0)

    @property
    def omega_d(self) -> float:
        return 2.0 / (6.0 * self.mu + 1.0)

    @property
    def pref_s(self) -> float:
        """Closed-form factor of the mid-collision trace moment."""
        lm3 = 3.0 * (self.lam + self.mu)
        return lm3 / (lm3 + 1.0)

    @property
    def pref_d(self) -> float:
        """Closed-form factor of the mid-collision deviatoric moments."""
        mu6 = 6.0 * self.mu
        return mu6 / (mu6 + 1.0)

    @property
    def inv_trace_corr(self) -> float:
        """``1 / (12 (lam + mu) - 4)``, the trace-correction coefficient."""
        return 1.0 / (12.0 * (self.lam + self.mu) - 4.0)

    @property
    def div_scale(self) -> float:
        """``1 / (2 (lam + mu))``, from raw divergence to length-scaled."""
        return 1.0 / (2.0 * (self.lam + self.mu))

    @property
    def c2(self) -> float:
        return self.eps**2


@dataclass
class MomentField:
    """Moments of the elastic populations at one pseudo-time instant.

    ``moments_forward`` fills the raw slots.  ``half_force`` adds the
    body-force kick and fills the ``bar``/``star`` slots of the
    conserved pair, ``half_collision`` fills the remaining ``bar``
    slots, and ``collide_moments`` fills all ``star`` slots.  Fields
    are arrays over the grid (or scalars in unit tests).
    """

    m10: np.ndarray
    m01: np.ndarray
    m11: np.ndarray
    ms: np.ndarray
    md: np.ndarray
    m12: np.ndarray
    m21: np.ndarray
    mf: np.ndarray

    bar_m10: np.ndarray | None = None
    bar_m01: np.ndarray | None = None
    bar_ms: np.ndarray | None = None
    bar_md: np.ndarray | None = None
    bar_m11: np.ndarray | None = None

    star_m10: np.ndarray | None = None
    star_m01: np.ndarray | None = None
    star_m11: np.ndarray | None = None
    star_ms: np.ndarray | None = None
    star_md: np.ndarray | None = None
    star_m12: np.ndarray | None = None
    star_m21: np.ndarray | None = None
    star_m22: np.ndarray | None = None


def moments_forward(g: np.ndarray, params: ElasticParams) -> MomentField:
    """Project populations onto the moment basis.

    Parameters
    ----------
    g : ndarray, shape (8, ...)
        Elastic populations, direction-major in the D2Q8 order.
    """
    g0, g1, g2, g3, g4, g5, g6, g7 = (g[k] for k in range(8))
    diag = g4 + g5 + g6 + g7
    ms = g0 + g1 + g2 + g3 + 2.0 * diag
    m22 = diag
    return MomentField(
        m10=g0 - g2 + g4 - g5 - g6 + g7,
        m01=g1 - g3 + g4 + g5 - g6 - g7,
        m11=g4 - g5 + g6 - g7,
        ms=ms,
        md=g0 - g1 + g2 - g3,
        m12=g4 - g5 - g6 + g7,
        m21=g4 + g5 - g6 - g7,
        mf=m22 + ms * params.inv_trace_corr,
    )


def half_force(
    m: MomentField,
    f_eff: tuple[np.ndarray, np.ndarray],
    params: ElasticParams,
) -> MomentField:
    """Apply the body-force kick to the conserved moment pair.

    Records both the mid-collision values ``m_bar = m + (eps^2/2) f``
    used for the solution read-off and the post-collision values
    ``m_star = m + eps^2 f`` that feed the next streaming step.
    """
    fx, fy = f_eff
    half = 0.5 * params.c2
    m.bar_m10 = m.m10 + half * fx
    m.bar_m01 = m.m01 + half * fy
    m.star_m10 = m.m10 + params.c2 * fx
    m.star_m01 = m.m01 + params.c2 * fy
    return m


def half_collision(m: MomentField, params: ElasticParams) -> MomentField:
    """Fill the mid-collision second-order moments via closed forms."""
    m.bar_ms = params.pref_s * m.ms
    m.bar_md = params.pref_d * m.md
    m.bar_m11 = params.pref_d * m.m11
    return m


def collide_moments(m: MomentField, params: ElasticParams) -> MomentField:
    """Relax all moments and record the mid-collision fields.

    ``half_force`` should normally run first; if it has not, the
    conserved moments pass through unkicked.  The third-order moments
    relax fully to their equilibria ``theta * m_bar`` evaluated at the
    kicked conserved moments, and the trace-corrected moment relaxes
    fully to zero, which pins ``m22`` after collision to
    ``-m_star_s / (12 (lam + mu) - 4)``.
    """
    if m.star_m10 is None:
        m.bar_m10 = m.m10
        m.bar_m01 = m.m01
        m.star_m10 = m.m10
        m.star_m01 = m.m01
    half_collision(m, params)
    m.star_ms = (1.0 - params.omega_s) * m.ms
    m.star_md = (1.0 - params.omega_d) * m.md
    m.star_m11 = (1.0 - params.omega_d) * m.m11
    m.star_m12 = THETA * m.bar_m10
    m.star_m21 = THETA * m.bar_m01
    m.star_m22 = -m.star_ms * params.inv_trace_corr
    return m


def back_transform(mstar: MomentField) -> np.ndarray:
    """Reassemble populations from post-collision moments.

    The returned array has shape ``(8, ...)`` matching the moment
    fields.  The map is the exact inverse of :func:`moments_forward`
    composed with the trace substitution, written out explicitly; the
    test suite checks it against a numerically inverted moment matrix.
    """
    st10 = mstar.star_m10
    st01 = mstar.star_m01
    st11 = mstar.star_m11
    sts = mstar.star_ms
    std = mstar.star_md
    st12 = mstar.star_m12
    st21 = mstar.star_m21
    st22 = mstar.star_m22
    if any(v is None for v in (st10, st01, st11, sts, std, st12, st21, st22)):
        raise ValueError("back_transform needs a fully collided MomentField")
    quarter_s = 0.25 * sts
    quarter_d = 0.25 * std
    g = np.empty((8, *np.shape(st10)), dtype=np.float64)
    g[0] = 0.5 * st10 + quarter_s + quarter_d - 0.5 * st12 - 0.5 * st22
    g[1] = 0.5 * st01 + quarter_s - quarter_d - 0.5 * st21 - 0.5 * st22
    g[2] = -0.5 * st10 + quarter_s + quarter_d + 0.5 * st12 - 0.5 * st22
    g[3] = -0.5 * st01 + quarter_s - quarter_d + 0.5 * st21 - 0.5 * st22
    g[4] = 0.25 * (st11 + st12 + st21 + st22)
    g[5] = 0.25 * (-st11 - st12 + st21 + st22)
    g[6] = 0.25 * (st11 - st12 - st21 + st22)
    g[7] = 0.25 * (-st11 + st12 - st21 + st22)
    return g


def extract_solution(
    m: MomentField,
) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Read displacement and lattice-scaled stress off mid-collision moments.

    Returns
    -------
    (eta1, eta2), (sig11, sig12, sig22)
        Displacement components and the three independent entries of
        the symmetric stress tensor

            sigma = -1/2 [[m_bar_s + m_bar_d, 2 m_bar_11],
                          [2 m_bar_11, m_bar_s - m_bar_d]].

        The stress here carries one factor of the cell width; divide by
        ``dx`` for the continuum stress.
    """
    if m.bar_m10 is None or m.bar_ms is None:
        raise ValueError("extract_solution needs bar moments; run half_force and half_collision first")
    eta = (m.bar_m10, m.bar_m01)
    sig11 = -0.5 * (m.bar_ms + m.bar_md)
    sig22 = -0.5 * (m.bar_ms - m.bar_md)
    sig12 = -m.bar_m11
    return eta, (sig11, sig12, sig22)


def divergence_eta(m: MomentField) -> np.ndarray:
    """Lattice-scaled divergence of the displacement, ``-m_bar_s``.

    Divide by ``2 (lam + mu)`` for the length-scaled divergence used in
    the coupling source, and additionally by the cell width for the
    continuum value.
    """
    if m.bar_ms is None:
        raise ValueError("divergence_eta needs bar_ms; run half_collision first")
    return -m.bar_ms


def elastic_init(
    f_eff0: tuple[np.ndarray, np.ndarray],
    params: ElasticParams,
) -> np.ndarray:
    """Populations at pseudo-time zero for a body starting from rest.

    The conserved and third-order moments are preset so that the
    mid-collision read-off at the first iteration gives exactly zero
    displacement under the initial effective force:

        m10 = -(eps^2/2) f1,   m12 = -(eps^2/6) f1

    and likewise for the y components.  All other moments start at
    zero.
    """
    fx, fy = f_eff0
    fx = np.asarray(fx, dtype=np.float64)
    fy = np.asarray(fy, dtype=np.float64)
    zero = np.zeros_like(fx)
    m = MomentField(
        m10=-0.5 * params.c2 * fx,
        m01=-0.5 * params.c2 * fy,
        m11=zero,
        ms=zero,
        md=zero,
        m12=-params.c2 * fx / 6.0,
        m21=-params.c2 * fy / 6.0,
        mf=zero,
    )
    m.star_m10 = m.m10
    m.star_m01 = m.m01
    m.star_m11 = m.m11
    m.star_ms = m.ms
    m.star_md = m.md
    m.star_m12 = m.m12
    m.star_m21 = m.m21
    m.star_m22 = zero
    return back_transform(m)


@dataclass
class ElasticState:
    """Elastic populations plus the divergence history the coupling needs.

    Attributes
    ----------
    g : ndarray, shape (8, nx, ny)
        Current populations.
    g_prev : ndarray
        Populations at the start of the previous pseudo-time iteration,
        consumed by the fullway displacement boundary rule.
    div_eta : ndarray
        Length-scaled divergence at the last completed flow step.
    div_eta_prev_tau : ndarray
        Length-scaled divergence recorded mid pseudo-iteration, the
        most recent value available to the semi-implicit source.
    div_eta_prev_t : ndarray
        Length-scaled divergence one flow step earlier.
    params : ElasticParams
    """

    g: np.ndarray
    g_prev: np.ndarray
    div_eta: np.ndarray
    div_eta_prev_tau: np.ndarray
    div_eta_prev_t: np.ndarray
    params: ElasticParams
