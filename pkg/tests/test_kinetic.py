import numpy as np
import pytest
from scipy.integrate import quad

from cgks.errors import NonPhysicalStateError
from cgks.kinetic import (check_physical, cons_to_equilibrium, conserved_to_primitive, euler_flux,
                          internal_dof, is_physical, moment_table, primitive_to_conserved, psi_moments,
                          slope_moments, solve_microslope, solve_microslope_dense, solve_time_slope,
                          transport_moments)

from conftest import random_states

GAMMA = 1.4


def test_internal_dof():
    assert internal_dof(1.4) == pytest.approx(2.0, abs=1e-12)
    assert internal_dof(5.0 / 3.0) == pytest.approx(0.0, abs=1e-12)


def test_primitive_round_trip(rng):
    W = random_states(rng, 50)
    rho, U, p = conserved_to_primitive(W, GAMMA)
    np.testing.assert_allclose(primitive_to_conserved(rho, U, p, GAMMA), W, rtol=1e-14)


def test_check_physical_names_the_component():
    W = primitive_to_conserved(np.ones(3), np.zeros((3, 3)), np.ones(3), GAMMA)
    check_physical(W)
    W[1, 0] = -0.1
    with pytest.raises(NonPhysicalStateError) as err:
        check_physical(W, time=0.5)
    assert err.value.component == "density"
    assert err.value.cell == 1
    assert err.value.time == 0.5

    W = primitive_to_conserved(np.ones(3), np.zeros((3, 3)), np.ones(3), GAMMA)
    W[2, 4] = -1.0
    with pytest.raises(NonPhysicalStateError) as err:
        check_physical(W)
    assert err.value.component == "energy"
    assert err.value.cell == 2


def test_is_physical_flags_nan():
    W = np.array([[1.0, 0.0, 0.0, 0.0, 2.5], [np.nan, 0.0, 0.0, 0.0, 2.5], [1.0, 0.0, 0.0, 0.0, -1.0]])
    assert is_physical(W).tolist() == [True, False, False]


def test_equilibrium_parameters():
    eq = cons_to_equilibrium(np.array([1.0, 0.0, 0.0, 0.0, 2.5]), GAMMA)
    assert float(eq.lam) == pytest.approx(0.5)
    assert float(eq.p) == pytest.approx(1.0)
    assert eq.K == pytest.approx(2.0)


def _gaussian_moment(n, U, lam, lo=-np.inf, hi=np.inf):
    density = np.sqrt(lam / np.pi)
    value, _ = quad(lambda u: u ** n * density * np.exp(-lam * (u - U) ** 2), lo, hi,
                    epsabs=0.0, epsrel=1e-13, limit=200)
    return value


@pytest.mark.parametrize("U, lam", [(0.0, 0.5), (0.7, 2.0), (-1.3, 0.8), (1.5, 1.7), (-0.4, 3.0)])
def test_moment_table_against_quadrature(U, lam):
    eq = cons_to_equilibrium(primitive_to_conserved(1.0, np.array([U, 0.2, -0.1]), 1.0 / (2.0 * lam), GAMMA),
                             GAMMA)
    table = moment_table(eq)
    assert float(eq.lam) == pytest.approx(lam, rel=1e-13)
    for n in range(7):
        scale = max(abs(_gaussian_moment(n, U, lam)), 1.0)
        assert table.u1("full")[n] == pytest.approx(_gaussian_moment(n, U, lam), rel=1e-10, abs=1e-12 * scale)
        assert table.u1("pos")[n] == pytest.approx(_gaussian_moment(n, U, lam, 0.0, np.inf), rel=1e-10,
                                                   abs=1e-12 * scale)
        assert table.u1("neg")[n] == pytest.approx(_gaussian_moment(n, U, lam, -np.inf, 0.0), rel=1e-10,
                                                   abs=1e-12 * scale)


def test_half_moments_sum_to_full(rng):
    table = moment_table(cons_to_equilibrium(random_states(rng, 40, speed=3.0), GAMMA))
    np.testing.assert_allclose(table.u1("pos") + table.u1("neg"), table.u1("full"), rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(table.u[..., 0], 1.0)


def test_maxwellian_reproduces_conserved_state(rng):
    W = random_states(rng, 40)
    eq = cons_to_equilibrium(W, GAMMA)
    table = moment_table(eq)
    np.testing.assert_allclose(eq.rho[:, None] * psi_moments(table, "full"), W, rtol=1e-13)


def test_maxwellian_flux_is_euler_flux(rng):
    W = random_states(rng, 40)
    eq = cons_to_equilibrium(W, GAMMA)
    table = moment_table(eq)
    np.testing.assert_allclose(eq.rho[:, None] * psi_moments(table, "full", a=1), euler_flux(W, GAMMA),
                               rtol=1e-12, atol=1e-13)


def test_microslope_round_trip(rng):
    W = random_states(rng, 40)
    dW = rng.normal(size=(40, 5))
    eq = cons_to_equilibrium(W, GAMMA)
    s = solve_microslope(eq, dW)
    back = eq.rho[:, None] * slope_moments(moment_table(eq), "full", s)
    np.testing.assert_allclose(back, dW, rtol=1e-12, atol=1e-12)


def test_microslope_matches_dense_solve():
    eq = cons_to_equilibrium(np.array([1.0, 0.0, 0.0, 0.0, 2.5]), GAMMA)
    dW = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(solve_microslope(eq, dW), solve_microslope_dense(eq, dW), rtol=1e-12, atol=1e-14)


def test_microslope_matches_dense_solve_random(rng):
    W = random_states(rng, 20)
    dW = rng.normal(size=(20, 5))
    eq = cons_to_equilibrium(W, GAMMA)
    np.testing.assert_allclose(solve_microslope(eq, dW), solve_microslope_dense(eq, dW), rtol=1e-10, atol=1e-11)


def test_time_slope_satisfies_compatibility(rng):
    W = random_states(rng, 30)
    eq = cons_to_equilibrium(W, GAMMA)
    table = moment_table(eq)
    slopes = np.stack([solve_microslope(eq, rng.normal(size=(30, 5))) for _ in range(3)], axis=1)
    A = solve_time_slope(eq, slopes, table)
    total = (slope_moments(table, "full", A)
             + slope_moments(table, "full", slopes[:, 0], a=1)
             + slope_moments(table, "full", slopes[:, 1], b=1)
             + slope_moments(table, "full", slopes[:, 2], c=1))
    np.testing.assert_allclose(total, 0.0, atol=1e-11)


def test_contact_time_slope_energy_matches_dense_solve():
    # density jump at rest: ∂ρ/∂x ≠ 0, uniform pressure
    eq = cons_to_equilibrium(np.array([1.0, 0.0, 0.0, 0.0, 2.5]), GAMMA)
    table = moment_table(eq)
    a = solve_microslope(eq, np.array([0.3, 0.0, 0.0, 0.0, 0.0]))
    slopes = np.stack([a, np.zeros(5), np.zeros(5)])
    A = solve_time_slope(eq, slopes, table)
    rhs = -(slope_moments(table, "full", a, a=1))
    dense = solve_microslope_dense(eq, rhs)
    assert A[4] == pytest.approx(dense[4], rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("part", ["full", "pos", "neg"])
def test_slope_moments_expand_over_psi(rng, part):
    W = random_states(rng, 12)
    s = rng.normal(size=(12, 5))
    table = moment_table(cons_to_equilibrium(W, GAMMA))
    for a, b, c in [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 0, 1)]:
        expected = (s[:, 0:1] * psi_moments(table, part, a, b, c)
                    + s[:, 1:2] * psi_moments(table, part, a + 1, b, c)
                    + s[:, 2:3] * psi_moments(table, part, a, b + 1, c)
                    + s[:, 3:4] * psi_moments(table, part, a, b, c + 1)
                    + 0.5 * s[:, 4:5] * (psi_moments(table, part, a + 2, b, c)
                                         + psi_moments(table, part, a, b + 2, c)
                                         + psi_moments(table, part, a, b, c + 2)
                                         + psi_moments(table, part, a, b, c, 1)))
        np.testing.assert_allclose(slope_moments(table, part, s, a, b, c), expected, rtol=1e-13, atol=1e-14)


def test_slope_moments_broadcast_a_single_slope(rng):
    W = random_states(rng, 6)
    table = moment_table(cons_to_equilibrium(W, GAMMA))
    s = rng.normal(size=5)
    np.testing.assert_allclose(slope_moments(table, "pos", s, a=1),
                               slope_moments(table, "pos", np.tile(s, (6, 1)), a=1), rtol=1e-14)


@pytest.mark.parametrize("extra", [0, 1])
def test_transport_moments_sum_the_three_directions(rng, extra):
    W = random_states(rng, 8)
    slopes = rng.normal(size=(8, 3, 5))
    table = moment_table(cons_to_equilibrium(W, GAMMA))
    expected = (slope_moments(table, "neg", slopes[:, 0], a=extra + 1)
                + slope_moments(table, "neg", slopes[:, 1], a=extra, b=1)
                + slope_moments(table, "neg", slopes[:, 2], a=extra, c=1))
    np.testing.assert_allclose(transport_moments(table, "neg", slopes, extra), expected, rtol=1e-13, atol=1e-14)
