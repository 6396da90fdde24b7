import math
import random

import pytest

from cornerlayer.calculus_ops import (
    OPERATORS,
    dxx_lambda,
    dy_gamma_plus,
    dy_lambda_at0,
    dyy_lambda,
    laplacian_omega,
    r_delta,
    r_delta_omega,
    r_dirichlet_omega,
    r_dyy,
    r_neumann,
)
from cornerlayer.coeff_field import Lattice, Poly, PolyTY
from cornerlayer.oracle import fd_check
from cornerlayer.sing_spaces import PiElement, evaluate, evaluate_gamma, phi, sigma_d, trace_gamma

LATTICES = [Lattice.rational(1, 2), Lattice.rational(2, 3), Lattice(2.0)]


def _rc(rng):
    return complex(rng.uniform(-1, 1), rng.uniform(-1, 1))


def _random_omega(rng, lat):
    d = lat.deg(rng.randint(-1, 2), rng.randint(0, 1))
    terms = []
    for _ in range(rng.randint(1, 3)):
        k = rng.randint(0, 2)
        terms.append(((d - k, k), Poly([_rc(rng) for _ in range(rng.randint(1, 3))])))
    return PiElement(lat, terms)


def _sigmas(e):
    return [sigma_d(e, q) for (q, k) in e.omega if k == 0 and q.in_pi_lattice(nonzero=True)]


def test_laplacian_kills_phi():
    for lat in LATTICES:
        for j in (-2, -1, 1, 3):
            assert not laplacian_omega(phi(lat.pi_multiple(j)))
    assert not laplacian_omega(PiElement.zero(LATTICES[0]))


def test_laplacian_of_a_conjugate_term():
    lat = Lattice(2.0)
    e = PiElement(lat, {(lat.integer(2), 1): Poly([1.0])})
    out = laplacian_omega(e)
    assert out.distance(PiElement(lat, {(lat.integer(1), 0): Poly([8.0])})) < 1e-15
    # r^3 sin(theta - Theta) has polar Laplacian (6r + 3r - r) sin(theta - Theta)
    for r, t in ((0.5, 0.3), (1.2, 1.5)):
        assert abs(evaluate(out, "omega", r, t) - 8 * r * math.sin(t - 2.0)) < 1e-13


def test_dxx_lambda_examples():
    lat = Lattice(2.0)
    e = PiElement(lat, (), {lat.integer(2): PolyTY({(0, 1): 1.0, (0, 0): 1.0})})
    out = dxx_lambda(e)
    assert set(out) == {lat.zero}
    assert (out[lat.zero] - PolyTY({(0, 1): 2.0, (0, 0): 2.0})).max_abs() < 1e-15
    flat = PiElement(lat, (), {lat.zero: PolyTY({(0, 1): 1.0, (0, 0): 1.0})})
    assert dxx_lambda(flat) == {}


def test_dxx_lambda_with_a_log_against_differences():
    lat = Lattice(2.0)
    e = PiElement(lat, (), {lat.integer(1): PolyTY({(1, 1): 1.0, (1, 0): 1.0})})
    out = PiElement(lat, (), dxx_lambda(e))
    h = 1e-4
    for x, y in ((0.5, -0.3), (1.3, -0.7)):
        fd = (evaluate(e, "lambda", x + h, y) - 2 * evaluate(e, "lambda", x, y)
              + evaluate(e, "lambda", x - h, y)) / h ** 2
        assert abs(evaluate(out, "lambda", x, y) - fd) < 1e-6 * max(1, abs(fd))


def test_dy_of_phi_on_the_interface():
    for lat in LATTICES:
        theta = float(lat.theta)
        d = lat.pi_multiple(1)
        g = dy_gamma_plus(phi(d))
        for x in (0.4, 1.1):
            ref = d.value * x ** (d.value - 1) * math.cos(d.value * theta)
            assert abs(evaluate_gamma(g, lat, x) - ref) < 1e-13


def test_dy_on_the_interface_against_differences():
    rng = random.Random(12)
    lat = Lattice(2.0)
    for _ in range(5):
        e = _random_omega(rng, lat)
        g = dy_gamma_plus(e)
        h = 1e-5
        for x in (0.6, 1.4):
            # d/dy = (1/r) d/dtheta on theta = 0
            fd = (evaluate(e, "omega", x, h) - evaluate(e, "omega", x, -h)) / (2 * h * x)
            assert abs(evaluate_gamma(g, lat, x) - fd) < 1e-6 * max(1, abs(fd))


@pytest.mark.parametrize("lat", LATTICES, ids=str)
def test_r_delta_inverts_the_laplacian(lat):
    rng = random.Random(13)
    for _ in range(10):
        psi = _random_omega(rng, lat)
        out = r_delta(psi)
        assert laplacian_omega(out).distance(psi) < 1e-11
        assert all(abs(complex(s)) == 0 for s in _sigmas(out))
        assert not out.lam
        assert dyy_lambda(out) == {} and dy_lambda_at0(out) == {}
        assert all(Q.max_abs() < 1e-12 for Q in trace_gamma(out).values())
        for g in out.grades():
            assert g - 2 in psi.grades()
    assert not r_delta(PiElement.zero(lat))


@pytest.mark.parametrize("lat", LATTICES, ids=str)
def test_r_delta_omega_and_dirichlet_lift(lat):
    rng = random.Random(14)
    for _ in range(10):
        psi = _random_omega(rng, lat)
        assert laplacian_omega(r_delta_omega(psi)).distance(psi) < 1e-11
    d = lat.deg(1, 1)
    g = {d: Poly([0.5 - 0.25j])}
    lift = r_dirichlet_omega(g, lat)
    assert (trace_gamma(lift)[d] - g[d]).max_abs() < 1e-14
    assert not laplacian_omega(lift)
    assert not r_dirichlet_omega({}, lat)


def test_r_dyy_worked_example():
    lat = Lattice(2.0)
    out = r_dyy({lat.zero: PolyTY({(0, 1): 1.0, (0, 0): 1.0})}, lat)
    # Q'' = Y + 1, Q'(0) = 0, Q(-1) = 0 gives (Y+1)^3/6 - (Y+1)/2
    ref = PolyTY({(0, 3): 1 / 6, (0, 2): 0.5, (0, 1): 0.0, (0, 0): -1 / 3})
    assert (out.lam[lat.zero] - ref).max_abs() < 1e-15
    theta = float(lat.theta)
    for r, t in ((0.3, 0.4), (2.0, 1.1)):
        assert abs(evaluate(out, "omega", r, t) - (t - theta) / (3 * theta)) < 1e-14
    assert not r_dyy({}, lat)


@pytest.mark.parametrize("lat", LATTICES, ids=str)
def test_r_dyy_identities(lat):
    rng = random.Random(15)
    for _ in range(10):
        d = lat.deg(rng.randint(0, 2), rng.randint(0, 1))
        src = {d: PolyTY({(i, j): _rc(rng) for i in range(2) for j in range(3)})}
        out = r_dyy(src, lat)
        assert (dyy_lambda(out)[d] - src[d]).max_abs() < 1e-11
        assert dy_lambda_at0(out) == {}
        assert not laplacian_omega(out)
        assert all(s == 0 for s in _sigmas(out))
        assert all(Q.at_Y(-1).max_abs() < 1e-14 for Q in out.lam.values())


def test_r_neumann_example():
    lat = Lattice.rational(2, 3)
    d = lat.deg(0, 1)
    c = 0.7 + 0.1j
    out = r_neumann({d - 1: Poly([c])}, lat)
    assert (out.lam[d - 1] - PolyTY({(0, 1): c, (0, 0): c})).max_abs() < 1e-15
    assert (dy_lambda_at0(out)[d - 1] - Poly([c])).max_abs() < 1e-15
    assert not laplacian_omega(out)
    assert not r_neumann({}, lat)


@pytest.mark.parametrize("lat", LATTICES, ids=str)
def test_resolvent_outputs_pass_the_derivative_oracle(lat):
    rng = random.Random(16)
    theta = float(lat.theta)
    pts = [("omega", rng.uniform(0.2, 1.5), rng.uniform(0.1, 0.9) * theta) for _ in range(5)]
    pts += [("lambda", rng.uniform(0.2, 1.5), rng.uniform(-0.9, -0.1)) for _ in range(5)]
    psi = _random_omega(rng, lat)
    assert fd_check(r_delta(psi), pts) < 1e-6


def test_operator_table_declares_degrees():
    assert OPERATORS["r_delta"].deg_A == 2
    assert OPERATORS["laplacian_omega"].deg_A == -2
    assert OPERATORS["r_neumann"].deg_A == 0
    assert OPERATORS["dy_gamma_plus"].deg_A == -1
