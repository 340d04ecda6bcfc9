import numpy as np
import pytest
from scipy.integrate import quad, quad_vec

from cgks.errors import NonPhysicalStateError
from cgks.flux import (CollisionTimeModel, central_state, collision_time, face_frames, flux_linear_fit,
                       gks_flux_point, interface_flux, rotate_gradient, rotate_state, time_integrals,
                       unrotate_gradient, unrotate_state)
from cgks.kinetic import conserved_to_primitive, euler_flux, primitive_to_conserved

from conftest import random_states

GAMMA = 1.4
DT = 0.01


def unit_vectors(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_frames_are_right_handed_rotations(rng):
    normals = np.concatenate([unit_vectors(rng, 50), np.eye(3), -np.eye(3)])
    frames = face_frames(normals)
    np.testing.assert_allclose(frames[:, 0], normals, atol=1e-15)
    np.testing.assert_allclose(np.einsum("fij,fkj->fik", frames, frames), np.broadcast_to(np.eye(3), frames.shape),
                               atol=1e-14)
    np.testing.assert_allclose(np.linalg.det(frames), 1.0, atol=1e-14)


def test_rotation_inverts(rng):
    frames = face_frames(unit_vectors(rng, 20))
    W = random_states(rng, 20)
    G = rng.normal(size=(20, 3, 5))
    np.testing.assert_allclose(unrotate_state(frames, rotate_state(frames, W)), W, atol=1e-14)
    np.testing.assert_allclose(unrotate_gradient(frames, rotate_gradient(frames, G)), G, atol=1e-13)


def test_collision_time():
    tau, tau_num = collision_time(1.0, 0.5, mu=0.01, dt=0.1, c1=0.05, c2=1.0)
    assert tau == pytest.approx(0.01 / 0.75)
    assert tau_num == pytest.approx(0.01 / 0.75 + 0.005 + 0.1 / 3.0)


def test_time_integrals_partition_the_interval():
    T = 0.3
    for tau, tau_num in [(0.0, 0.0), (0.0, 0.01), (0.02, 0.05)]:
        i1, _, _, i_e, i_te = time_integrals(T, np.float64(tau), np.float64(tau_num))
        assert i1 + i_e == pytest.approx(T, rel=1e-14)
        if tau_num == 0.0:
            assert i_e == 0.0 and i_te == 0.0


@pytest.mark.parametrize("c1", [0.0, 0.1, 1.0])
def test_uniform_state_gives_euler_flux(rng, c1):
    W = random_states(rng, 1000)
    G = np.zeros((1000, 3, 5))
    sample = gks_flux_point(W, G, W, G, DT, CollisionTimeModel(0.0, c1, 1.0), GAMMA)
    exact = euler_flux(W, GAMMA)
    np.testing.assert_allclose(sample.full / DT, exact, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(sample.half / (0.5 * DT), exact, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(sample.w_point, W, rtol=1e-13)
    assert sample.valid.all()


def test_uniform_state_through_a_tilted_face():
    W = primitive_to_conserved(1.2, np.array([0.3, -0.4, 0.5]), 0.9, GAMMA)
    normal = np.array([0.0, 1.0, 0.0])
    sample = interface_flux(W, np.zeros((3, 5)), W, np.zeros((3, 5)), normal, DT)
    rho, v, p = 1.2, -0.4, 0.9
    E = W[4]
    expected = [rho * v, rho * v * 0.3, rho * v * v + p, rho * v * 0.5, v * (E + p)]
    np.testing.assert_allclose(sample.full / DT, expected, rtol=1e-12, atol=1e-14)


def test_left_right_swap_reverses_flux(rng):
    n = 200
    Wl, Wr = random_states(rng, n), random_states(rng, n)
    Gl, Gr = 0.1 * rng.normal(size=(n, 3, 5)), 0.1 * rng.normal(size=(n, 3, 5))
    normals = unit_vectors(rng, n)
    model = CollisionTimeModel(0.001, 0.05, 1.0)
    forward = interface_flux(Wl, Gl, Wr, Gr, normals, DT, model)
    backward = interface_flux(Wr, Gr, Wl, Gl, -normals, DT, model)
    np.testing.assert_allclose(forward.full, -backward.full, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(forward.w_point, backward.w_point, rtol=1e-10, atol=1e-12)


def test_tangential_velocity_shift(rng):
    rho_l, rho_r = rng.uniform(0.5, 2.0, (2, 100))
    p_l, p_r = rng.uniform(0.5, 2.0, (2, 100))
    U_l, U_r = rng.uniform(-0.5, 0.5, (2, 100, 3))
    G = np.zeros((100, 3, 5))
    V = np.array([0.0, 0.7, 0.0])

    def flux(shift):
        Wl = primitive_to_conserved(rho_l, U_l + shift, p_l, GAMMA)
        Wr = primitive_to_conserved(rho_r, U_r + shift, p_r, GAMMA)
        return gks_flux_point(Wl, G, Wr, G, DT, gamma=GAMMA).full

    base = flux(np.zeros(3))
    moved = flux(V)
    np.testing.assert_allclose(moved[:, 0], base[:, 0], rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(moved[:, 2], base[:, 2] + V[1] * base[:, 0], rtol=1e-10, atol=1e-12)


def test_central_state_of_equal_sides(rng):
    W = random_states(rng, 30)
    np.testing.assert_allclose(central_state(W, W, GAMMA).rho, W[:, 0], rtol=1e-13)


def test_central_state_of_sod_data():
    Wl = primitive_to_conserved(1.0, np.zeros(3), 1.0, GAMMA)
    Wr = primitive_to_conserved(0.125, np.zeros(3), 0.1, GAMMA)
    eq = central_state(Wl, Wr, GAMMA)

    def half_momentum(rho, p, lo, hi):
        lam = rho / (2.0 * p)
        value, _ = quad(lambda u: rho * u * np.sqrt(lam / np.pi) * np.exp(-lam * u * u), lo, hi,
                        epsabs=0.0, epsrel=1e-13)
        return value

    mass = 0.5 * (1.0 + 0.125)
    momentum = half_momentum(1.0, 1.0, 0.0, np.inf) + half_momentum(0.125, 0.1, -np.inf, 0.0)
    assert float(eq.rho) == pytest.approx(mass, rel=1e-13)
    assert float(eq.U[0]) * mass == pytest.approx(momentum, rel=1e-11)


def test_flux_linear_fit_recovers_a_linear_flux(rng):
    f0 = rng.normal(size=(10, 5))
    ft = rng.normal(size=(10, 5))
    dt = 0.05
    full = f0 * dt + 0.5 * ft * dt * dt
    half = 0.5 * f0 * dt + 0.125 * ft * dt * dt
    got0, got_t = flux_linear_fit(full, half, dt)
    np.testing.assert_allclose(got0, f0, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(got_t, ft, rtol=1e-10, atol=1e-11)


def test_non_physical_input_is_rejected():
    W = primitive_to_conserved(np.ones(2), np.zeros((2, 3)), np.ones(2), GAMMA)
    bad = W.copy()
    bad[1, 0] = -1.0
    G = np.zeros((2, 3, 5))
    with pytest.raises(NonPhysicalStateError):
        gks_flux_point(W, G, bad, G, DT)


# =============================================================================
# QUADRATURE REFERENCE
# =============================================================================

HERMITE_X, HERMITE_W = np.polynomial.hermite.hermgauss(6)


def psi(u1, u2, u3, xi2):
    one = np.ones_like(u2)
    return np.stack([one, u1 * one, u2, u3, 0.5 * (u1 * u1 + u2 * u2 + u3 * u3 + xi2)])


def transport(a, u1, u2, u3, xi2):
    """Σ_d u_d (a_d·ψ) for slopes a (3, 5)."""
    p = psi(u1, u2, u3, xi2)
    return u1 * (a[0] @ p) + u2 * (a[1] @ p) + u3 * (a[2] @ p)


class QuadratureMaxwellian:
    """Maxwellian with K = 2: adaptive quadrature in u1, Gauss-Hermite in u2, u3 and both ξ."""

    def __init__(self, W):
        rho, U, p = conserved_to_primitive(np.asarray(W, dtype=float), GAMMA)
        self.rho, self.U, self.p = float(rho), np.asarray(U, dtype=float), float(p)
        self.lam = self.rho / (2.0 * self.p)
        x2, x3, xa, xb = (g.ravel() for g in np.meshgrid(*[HERMITE_X] * 4, indexing="ij"))
        self.weights = np.prod(np.meshgrid(*[HERMITE_W] * 4, indexing="ij"), axis=0).ravel() / np.pi ** 2
        scale = 1.0 / np.sqrt(self.lam)
        self.u2 = self.U[1] + scale * x2
        self.u3 = self.U[2] + scale * x3
        self.xi2 = (xa * xa + xb * xb) / self.lam

    def integrate(self, integrand, lo=-np.inf, hi=np.inf):
        """∫ integrand(u, ξ²) g over lo < u1 < hi; integrand returns (m, nodes)."""
        def along(u1):
            density = self.rho * np.sqrt(self.lam / np.pi) * np.exp(-self.lam * (u1 - self.U[0]) ** 2)
            return density * (integrand(u1, self.u2, self.u3, self.xi2) @ self.weights)

        value, _ = quad_vec(along, lo, hi, epsabs=1e-14, epsrel=1e-12)
        return value

    def slopes(self, G):
        """Microslopes a (3, 5) with ∫ψ(a_d·ψ)g = G_d, and the time slope A from compatibility."""
        gram = self.integrate(lambda *v: (psi(*v)[:, None] * psi(*v)[None]).reshape(25, -1)).reshape(5, 5)
        a = np.linalg.solve(gram, np.asarray(G, dtype=float).T).T
        A = np.linalg.solve(gram, -self.integrate(lambda *v: psi(*v) * transport(a, *v)))
        return a, A

    def moments(self, weight, lo=-np.inf, hi=np.inf):
        """(∫u1 ψ w g, ∫ψ w g) for a scalar weight w(u, ξ²)."""
        def both(u1, u2, u3, xi2):
            wp = psi(u1, u2, u3, xi2) * weight(u1, u2, u3, xi2)
            return np.concatenate([u1 * wp, wp])

        return self.integrate(both, lo, hi).reshape(2, 5)


def integral_solution(Wl, Gl, Wr, Gr, dt, mu, c1, c2, t_point):
    """Flux over Δt and Δt/2 and the interface state, all velocity and time integrals by quadrature."""
    gl, gr = QuadratureMaxwellian(Wl), QuadratureMaxwellian(Wr)
    a_l, A_l = gl.slopes(Gl)
    a_r, A_r = gr.slopes(Gr)
    gc = QuadratureMaxwellian(gl.integrate(psi, 0.0, np.inf) + gr.integrate(psi, -np.inf, 0.0))

    def directional(a):
        return lambda *v: (psi(*v)[None] * (a @ psi(*v))[:, None]).reshape(15, -1)

    grad_c = (gl.integrate(directional(a_l), 0.0, np.inf)
              + gr.integrate(directional(a_r), -np.inf, 0.0)).reshape(3, 5)
    a_c, A_c = gc.slopes(grad_c)

    tau = mu / gc.p
    tau_num = tau + c1 * dt + c2 * abs(gl.p - gr.p) / (gl.p + gr.p) * dt

    def e(t):
        return np.exp(-t / tau_num) if tau_num > 0.0 else 0.0

    def kinetic(weight_l, weight_r):
        return gl.moments(weight_l, 0.0, np.inf) + gr.moments(weight_r, -np.inf, 0.0)

    terms = [
        (lambda t: 1.0 - e(t), gc.moments(lambda *v: 1.0)),
        (lambda t: (t + tau) * e(t) - tau, gc.moments(lambda *v: transport(a_c, *v))),
        (lambda t: t - tau + tau * e(t), gc.moments(lambda *v: A_c @ psi(*v))),
        (e, kinetic(lambda *v: 1.0 - tau * (A_l @ psi(*v)), lambda *v: 1.0 - tau * (A_r @ psi(*v)))),
        (lambda t: -(tau + t) * e(t), kinetic(lambda *v: transport(a_l, *v), lambda *v: transport(a_r, *v))),
    ]

    def flux(T):
        return sum(quad(k, 0.0, T, epsabs=0.0, epsrel=1e-13)[0] * m[0] for k, m in terms)

    state = sum(k(t_point) * m[1] for k, m in terms)
    return flux(dt), flux(0.5 * dt), state


def oracle_states():
    Wl = primitive_to_conserved(1.0, np.array([0.3, 0.1, -0.2]), 1.0, GAMMA)
    Wr = primitive_to_conserved(0.8, np.array([0.1, -0.2, 0.15]), 0.7, GAMMA)
    rng = np.random.default_rng(7)
    return Wl, 0.2 * rng.normal(size=(3, 5)), Wr, 0.2 * rng.normal(size=(3, 5))


@pytest.mark.parametrize("mu, c1, c2", [(0.0, 0.0, 0.0), (0.005, 0.05, 1.0), (0.02, 0.0, 1.0)])
def test_flux_matches_quadrature_of_the_integral_solution(mu, c1, c2):
    Wl, Gl, Wr, Gr = oracle_states()
    full, half, state = integral_solution(Wl, Gl, Wr, Gr, DT, mu, c1, c2, 0.5 * DT)
    sample = gks_flux_point(Wl[None], Gl[None], Wr[None], Gr[None], DT, CollisionTimeModel(mu, c1, c2),
                            GAMMA, 0.5 * DT)
    np.testing.assert_allclose(sample.full[0], full, rtol=1e-8, atol=1e-13)
    np.testing.assert_allclose(sample.half[0], half, rtol=1e-8, atol=1e-13)
    np.testing.assert_allclose(sample.w_point[0], state, rtol=1e-8, atol=1e-12)


def test_long_relaxation_tends_to_free_transport():
    # τ_num = 10^4 Δt: the flux is the upwind transport of the two sloped half-Maxwellians
    Wl, Gl, Wr, Gr = oracle_states()
    gl, gr = QuadratureMaxwellian(Wl), QuadratureMaxwellian(Wr)
    a_l, _ = gl.slopes(Gl)
    a_r, _ = gr.slopes(Gr)
    base = gl.moments(lambda *v: 1.0, 0.0, np.inf) + gr.moments(lambda *v: 1.0, -np.inf, 0.0)
    drift = (gl.moments(lambda *v: transport(a_l, *v), 0.0, np.inf)
             + gr.moments(lambda *v: transport(a_r, *v), -np.inf, 0.0))
    sample = gks_flux_point(Wl[None], Gl[None], Wr[None], Gr[None], DT, CollisionTimeModel(0.0, 1e4, 0.0),
                            GAMMA, DT)
    np.testing.assert_allclose(sample.full[0], DT * base[0] - 0.5 * DT * DT * drift[0], rtol=1e-3, atol=2e-6)
    np.testing.assert_allclose(sample.half[0], 0.5 * DT * base[0] - 0.125 * DT * DT * drift[0],
                               rtol=1e-3, atol=1e-6)
    np.testing.assert_allclose(sample.w_point[0], base[1] - DT * drift[1], rtol=1e-3, atol=5e-4)
