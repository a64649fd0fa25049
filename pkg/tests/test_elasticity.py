"""Moment-space elastic scheme: transforms, collision algebra, steady state."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from porolbm.elasticity import (
    THETA,
    ElasticParams,
    MomentField,
    back_transform,
    collide_moments,
    divergence_eta,
    elastic_init,
    extract_solution,
    half_collision,
    half_force,
    moments_forward,
)
from porolbm.lattice import Grid, Q8, stream

from conftest import observed_order

# moduli of the trigonometric reference problem, lam + mu = 11/40
LAM = 11.0 / 45.0
MU = 11.0 / 360.0


def _params(eps=1.0, lam=LAM, mu=MU):
    return ElasticParams(lam=lam, mu=mu, eps=eps)


# ---------------------------------------------------------------------------
# parameter validation
# ---------------------------------------------------------------------------

def test_params_reject_bad_moduli():
    for bad_mu in (0.0, -1.0, math.nan):
        with pytest.raises(ValueError):
            ElasticParams(lam=1.0, mu=bad_mu, eps=1.0)
    with pytest.raises(ValueError):
        ElasticParams(lam=math.nan, mu=1.0, eps=1.0)
    with pytest.raises(ValueError):
        ElasticParams(lam=1.0, mu=1.0, eps=0.0)
    with pytest.raises(ValueError):
        ElasticParams(lam=1.0, mu=1.0, eps=-0.5)


def test_params_reject_singular_points():
    # lam + mu = -1/3 blows up the trace relaxation rate
    with pytest.raises(ValueError):
        ElasticParams(lam=-1.0 / 3.0 - 0.1, mu=0.1, eps=1.0)
    # lam + mu = 1/3 makes the trace-corrected moment undefined
    with pytest.raises(ValueError):
        ElasticParams(lam=1.0 / 3.0 - 0.1, mu=0.1, eps=1.0)


def test_params_warn_when_rates_leave_stability_interval():
    with pytest.warns(UserWarning):
        ElasticParams(lam=-0.5, mu=0.25, eps=1.0)


def test_frozen_rate_table():
    p = _params()
    assert p.lam + p.mu == pytest.approx(11.0 / 40.0, rel=1e-15)
    assert p.omega_s == pytest.approx(80.0 / 73.0, rel=1e-14)
    assert p.omega_d == pytest.approx(120.0 / 71.0, rel=1e-14)
    assert p.pref_s == pytest.approx(33.0 / 73.0, rel=1e-14)
    assert p.pref_d == pytest.approx(11.0 / 71.0, rel=1e-14)
    assert p.inv_trace_corr == pytest.approx(-10.0 / 7.0, rel=1e-14)
    assert p.div_scale == pytest.approx(20.0 / 11.0, rel=1e-14)
    assert _params(eps=0.1).c2 == pytest.approx(0.01, rel=1e-15)


@given(
    lam=st.floats(min_value=0.01, max_value=5.0),
    mu=st.floats(min_value=0.01, max_value=5.0),
)
@settings(max_examples=100, deadline=None)
def test_trace_identity_links_star_factor_to_correction(lam, mu):
    # (1 - omega_s) / (12 (lam + mu) - 4) == 1 / (12 (lam + mu) + 4),
    # the identity that pins m22 after collision
    assume(abs(12.0 * (lam + mu) - 4.0) > 1e-6)
    p = ElasticParams(lam=lam, mu=mu, eps=1.0)
    lhs = (1.0 - p.omega_s) * p.inv_trace_corr
    rhs = 1.0 / (12.0 * (lam + mu) + 4.0)
    assert lhs == pytest.approx(rhs, rel=1e-12)


# ---------------------------------------------------------------------------
# forward transform on single populations
# ---------------------------------------------------------------------------

def test_moments_of_unit_axis_population():
    g = np.zeros(8)
    g[0] = 1.0  # direction (1, 0)
    m = moments_forward(g, _params())
    assert m.m10 == 1.0 and m.m01 == 0.0
    assert m.ms == 1.0 and m.md == 1.0
    assert m.m11 == 0.0 and m.m12 == 0.0 and m.m21 == 0.0
    assert m.mf == pytest.approx(-10.0 / 7.0, rel=1e-14)


def test_moments_of_unit_diagonal_population():
    g = np.zeros(8)
    g[4] = 1.0  # direction (1, 1)
    m = moments_forward(g, _params())
    assert m.m10 == 1.0 and m.m01 == 1.0
    assert m.ms == 2.0 and m.md == 0.0
    assert m.m11 == 1.0 and m.m12 == 1.0 and m.m21 == 1.0
    assert m.mf == pytest.approx(1.0 + 2.0 * (-10.0 / 7.0), rel=1e-14)


def test_collision_of_unit_axis_population_frozen_values():
    g = np.zeros(8)
    g[0] = 1.0
    p = _params()
    m = collide_moments(moments_forward(g, p), p)
    assert m.bar_ms == pytest.approx(33.0 / 73.0, rel=1e-14)
    assert m.star_m22 == pytest.approx(-10.0 / 73.0, rel=1e-14)
    assert divergence_eta(m) == pytest.approx(-33.0 / 73.0, rel=1e-14)


def test_deviatoric_mid_collision_factor():
    g = np.zeros(8)
    g[4] = 1.0
    p = _params()
    m = half_collision(moments_forward(g, p), p)
    assert m.bar_m11 == pytest.approx(11.0 / 71.0, rel=1e-14)


# ---------------------------------------------------------------------------
# back transform against a numerically inverted moment matrix
# ---------------------------------------------------------------------------

def _raw_moment_matrix() -> np.ndarray:
    """Rows map populations to (m10, m01, m11, ms, md, m12, m21, m22)."""
    rows = []
    for poly in (
        lambda cx, cy: cx,
        lambda cx, cy: cy,
        lambda cx, cy: cx * cy,
        lambda cx, cy: cx * cx + cy * cy,
        lambda cx, cy: cx * cx - cy * cy,
        lambda cx, cy: cx * cy * cy,
        lambda cx, cy: cx * cx * cy,
        lambda cx, cy: cx * cx * cy * cy,
    ):
        rows.append([poly(Fraction(int(cx)), Fraction(int(cy))) for cx, cy in Q8.velocities])
    return np.array(rows, dtype=np.float64)


def test_back_transform_matches_inverted_moment_matrix(rng):
    mat = _raw_moment_matrix()
    assert abs(np.linalg.det(mat)) > 1e-10
    for _ in range(50):
        s = rng.normal(size=8)
        m = MomentField(*([np.nan] * 8))
        (
            m.star_m10,
            m.star_m01,
            m.star_m11,
            m.star_ms,
            m.star_md,
            m.star_m12,
            m.star_m21,
            m.star_m22,
        ) = s
        g = back_transform(m)
        np.testing.assert_allclose(g, np.linalg.solve(mat, s), atol=1e-13)


def test_transform_roundtrip(rng):
    p = _params()
    for _ in range(200):
        g = rng.normal(size=(8, 3, 2))
        m = moments_forward(g, p)
        m.star_m10 = m.m10
        m.star_m01 = m.m01
        m.star_m11 = m.m11
        m.star_ms = m.ms
        m.star_md = m.md
        m.star_m12 = m.m12
        m.star_m21 = m.m21
        m.star_m22 = m.mf - m.ms * p.inv_trace_corr
        np.testing.assert_allclose(back_transform(m), g, atol=1e-13)


def test_back_transform_requires_collided_field():
    g = np.zeros(8)
    p = _params()
    with pytest.raises(ValueError):
        back_transform(moments_forward(g, p))


# ---------------------------------------------------------------------------
# collision invariants
# ---------------------------------------------------------------------------

def test_first_moments_conserved_without_force(rng):
    p = _params()
    g = rng.normal(size=(8, 4, 4))
    m = collide_moments(moments_forward(g, p), p)
    m2 = moments_forward(back_transform(m), p)
    np.testing.assert_allclose(m2.m10, m.m10, atol=1e-13)
    np.testing.assert_allclose(m2.m01, m.m01, atol=1e-13)


def test_first_moments_pick_up_exactly_the_kick(rng):
    p = _params(eps=0.25)
    g = rng.normal(size=(8, 4, 4))
    fx = rng.normal(size=(4, 4))
    fy = rng.normal(size=(4, 4))
    m = moments_forward(g, p)
    half_force(m, (fx, fy), p)
    collide_moments(m, p)
    m2 = moments_forward(back_transform(m), p)
    np.testing.assert_allclose(m2.m10, m.m10 + p.c2 * fx, atol=1e-12)
    np.testing.assert_allclose(m2.m01, m.m01 + p.c2 * fy, atol=1e-12)


def test_mid_collision_values_are_averages(rng):
    p = _params(eps=0.5)
    g = rng.normal(size=(8, 3, 3))
    fx = rng.normal(size=(3, 3))
    fy = rng.normal(size=(3, 3))
    m = moments_forward(g, p)
    half_force(m, (fx, fy), p)
    collide_moments(m, p)
    np.testing.assert_allclose(m.bar_m10, 0.5 * (m.m10 + m.star_m10), rtol=1e-13)
    np.testing.assert_allclose(m.bar_m01, 0.5 * (m.m01 + m.star_m01), rtol=1e-13)
    np.testing.assert_allclose(m.bar_ms, 0.5 * (m.ms + m.star_ms), atol=1e-13)
    np.testing.assert_allclose(m.bar_md, 0.5 * (m.md + m.star_md), atol=1e-13)
    np.testing.assert_allclose(m.bar_m11, 0.5 * (m.m11 + m.star_m11), atol=1e-13)


@given(
    lam=st.floats(min_value=0.01, max_value=5.0),
    mu=st.floats(min_value=0.01, max_value=5.0),
)
@settings(max_examples=60, deadline=None)
def test_mid_collision_closed_forms_across_moduli(lam, mu):
    assume(abs(12.0 * (lam + mu) - 4.0) > 1e-6)
    p = ElasticParams(lam=lam, mu=mu, eps=1.0)
    m = collide_moments(moments_forward(np.arange(8.0), p), p)
    assert m.bar_ms == pytest.approx(0.5 * (m.ms + m.star_ms), rel=1e-12)
    assert m.bar_md == pytest.approx(0.5 * (m.md + m.star_md), rel=1e-12, abs=1e-14)
    assert m.bar_m11 == pytest.approx(0.5 * (m.m11 + m.star_m11), rel=1e-12, abs=1e-14)


def test_trace_corrected_moment_relaxes_to_zero(rng):
    p = _params()
    g = rng.normal(size=(8, 5, 5))
    m = collide_moments(moments_forward(g, p), p)
    m2 = moments_forward(back_transform(m), p)
    np.testing.assert_allclose(m2.mf, 0.0, atol=1e-13)


def test_third_order_moments_relax_to_equilibria(rng):
    p = _params(eps=0.3)
    g = rng.normal(size=(8, 4, 4))
    fx = rng.normal(size=(4, 4))
    fy = rng.normal(size=(4, 4))
    m = moments_forward(g, p)
    half_force(m, (fx, fy), p)
    collide_moments(m, p)
    m2 = moments_forward(back_transform(m), p)
    np.testing.assert_allclose(m2.m12, THETA * m.bar_m10, atol=1e-13)
    np.testing.assert_allclose(m2.m21, THETA * m.bar_m01, atol=1e-13)


def test_zero_state_is_stationary():
    grid = Grid(nx=5, ny=5, dx=0.2, dt=0.04)
    p = _params(eps=grid.dx)
    g = np.zeros((8, 5, 5))
    zero = np.zeros((5, 5))
    m = moments_forward(g, p)
    half_force(m, (zero, zero), p)
    collide_moments(m, p)
    g_next = stream(back_transform(m), grid, wrap=(True, True))
    np.testing.assert_array_equal(g_next, g)


# ---------------------------------------------------------------------------
# read-off and initialization
# ---------------------------------------------------------------------------

def test_extract_solution_formula():
    m = MomentField(*([0.0] * 8))
    m.bar_m10, m.bar_m01 = 2.0, 3.0
    m.bar_ms, m.bar_md, m.bar_m11 = 4.0, 1.0, 0.5
    eta, (sig11, sig12, sig22) = extract_solution(m)
    assert eta == (2.0, 3.0)
    assert sig11 == pytest.approx(-2.5)
    assert sig22 == pytest.approx(-1.5)
    assert sig12 == pytest.approx(-0.5)


def test_read_offs_require_bar_moments():
    m = moments_forward(np.ones(8), _params())
    with pytest.raises(ValueError):
        extract_solution(m)
    with pytest.raises(ValueError):
        divergence_eta(m)


def test_init_moment_presets():
    p = _params(eps=0.1)
    ones = np.ones((2, 2))
    g = elastic_init((ones, np.zeros((2, 2))), p)
    m = moments_forward(g, p)
    np.testing.assert_allclose(m.m10, -0.005, rtol=1e-14)
    np.testing.assert_allclose(m.m12, -1.0 / 600.0, rtol=1e-14)
    for quiet in (m.m01, m.m11, m.ms, m.md, m.m21, m.mf):
        np.testing.assert_allclose(quiet, 0.0, atol=1e-17)


def test_init_reads_off_zero_displacement(rng):
    p = _params(eps=0.2)
    fx = rng.normal(size=(3, 3))
    fy = rng.normal(size=(3, 3))
    g = elastic_init((fx, fy), p)
    m = moments_forward(g, p)
    half_force(m, (fx, fy), p)
    collide_moments(m, p)
    eta, _ = extract_solution(m)
    np.testing.assert_allclose(eta[0], 0.0, atol=1e-16)
    np.testing.assert_allclose(eta[1], 0.0, atol=1e-16)


def test_init_zero_force_gives_zero_populations():
    zero = np.zeros((3, 3))
    g = elastic_init((zero, zero), _params())
    np.testing.assert_array_equal(g, np.zeros((8, 3, 3)))


# ---------------------------------------------------------------------------
# steady state of the pseudo-time iteration against an analytic solution
# ---------------------------------------------------------------------------

def _stationary_error(n: int) -> tuple[float, float]:
    """Relative L2 errors (displacement, divergence) of the converged state.

    The body force is manufactured so that the plane-strain equations
    with the test moduli have the closed-form displacement
    ``eta = (4.5 cos sin, 3.5 sin cos)`` on the periodic unit square.
    """
    dx = 1.0 / n
    grid = Grid(nx=n, ny=n, dx=dx, dt=dx * dx)
    p = ElasticParams(lam=LAM, mu=MU, eps=dx)
    x, y = grid.cell_centers()
    cs = np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)
    sc = np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)
    ss = np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
    pi2 = np.pi**2
    feff = (
        2.0 * pi2 * (16.0 * LAM + 34.0 * MU) * cs,
        2.0 * pi2 * (16.0 * LAM + 30.0 * MU) * sc,
    )
    g = elastic_init(feff, p)
    prev = None
    m = None
    converged = False
    for _ in range(60000):
        m = moments_forward(g, p)
        half_force(m, feff, p)
        collide_moments(m, p)
        g = stream(back_transform(m), grid, wrap=(True, True))
        if prev is not None:
            delta = max(
                np.abs(m.bar_m10 - prev[0]).max(),
                np.abs(m.bar_m01 - prev[1]).max(),
            )
            if delta < 1e-12:
                converged = True
                break
        prev = (m.bar_m10, m.bar_m01)
    assert converged, "pseudo-time iteration did not settle"
    exact1 = 4.5 * cs
    exact2 = 3.5 * sc
    err_eta = math.sqrt(
        (((m.bar_m10 - exact1) ** 2) + ((m.bar_m01 - exact2) ** 2)).sum()
        / ((exact1**2 + exact2**2).sum())
    )
    div_num = divergence_eta(m) * p.div_scale / dx
    div_exact = -16.0 * np.pi * ss
    err_div = math.sqrt(((div_num - div_exact) ** 2).sum() / (div_exact**2).sum())
    return err_eta, err_div


def test_stationary_solution_second_order():
    eta32, div32 = _stationary_error(32)
    eta64, div64 = _stationary_error(64)
    assert observed_order(eta32, eta64) >= 1.8
    assert observed_order(div32, div64) >= 1.8
