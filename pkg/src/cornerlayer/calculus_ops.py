"""Differential operators and particular-solution (resolvent) operators on the glued space.

Every operator has a degree: it maps grade-d content to grade d + deg.
Resolvent outputs are the particular solutions with all sigma_d equal to 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .coeff_field import Degree, Lattice, Poly, PolyTY, ode_solve_first_order, rim_solve, twisted_im, twisted_re
from .sing_spaces import GammaPart, PiElement, gamma_add

__all__ = [
    "OpDescriptor",
    "laplacian_omega",
    "dxx_lambda",
    "dxx_gamma",
    "dyy_lambda",
    "dy_lambda_at0",
    "dy_gamma_plus",
    "r_delta",
    "r_dyy",
    "r_neumann",
    "r_delta_omega",
    "r_dirichlet_omega",
    "OPERATORS",
]

LambdaPart = dict  # {Degree: PolyTY}


@dataclass(frozen=True)
class OpDescriptor:
    name: str
    domain: str
    codomain: str
    deg_A: int
    action: Callable


# ---------------------------------------------------------------- derivatives

def laplacian_omega(e: PiElement) -> PiElement:
    """Delta Im[(az)^q conj(az)^k P] = 4 Im[(az)^{q-1} conj(az)^{k-1} k (qP + P')]."""
    terms = []
    for (q, k), P in e.omega.items():
        if k == 0:
            continue
        terms.append(((q - 1, k - 1), (P.scale(q.scalar) + P.deriv()).scale(4 * k)))
    return PiElement(e.lattice, terms)


def _dxx(Q, d: Degree):
    """x^{d-2} [d(d-1) Q + (2d-1) Q' + Q''] in the T variable."""
    g = d.scalar
    if isinstance(Q, PolyTY):
        return Q.scale(g * (g - 1)) + Q.dT().scale(2 * g - 1) + Q.dT(2)
    return Q.scale(g * (g - 1)) + Q.deriv().scale(2 * g - 1) + Q.deriv(2)


def dxx_lambda(e: PiElement) -> LambdaPart:
    """d^2/dx^2 of the layer part: grade d goes to grade d - 2."""
    out: LambdaPart = {}
    for d, Q in e.lam.items():
        R = _dxx(Q, d)
        if R:
            out[d - 2] = R
    return out


def dxx_gamma(g: GammaPart) -> GammaPart:
    return gamma_add({d - 2: _dxx(Q, d) for d, Q in g.items()})


def dyy_lambda(e: PiElement) -> LambdaPart:
    return {d: Q.dY(2) for d, Q in e.lam.items() if Q.dY(2)}


def dy_lambda_at0(e: PiElement) -> GammaPart:
    """d/dY of the layer part on the interface, seen from the layer side."""
    return gamma_add({d: Q.dY().at_Y(0) for d, Q in e.lam.items()})


def dy_gamma_plus(e: PiElement) -> GammaPart:
    """d/dy of the sector part on the interface: x^{q+k-1} Re[alpha^{q-k}((q-k)P + P')(ln x - i Theta)]."""
    lat = e.lattice
    s = lat.scalars
    shift = s.cplx(-1j) * lat.theta
    out = []
    for (q, k), P in e.omega.items():
        nu = q - k
        R = P.scale(nu.scalar) + P.deriv()
        Q = twisted_re(R, lat.alpha_power(nu), shift, s)
        if Q:
            out.append({q + k - 1: Q})
    return gamma_add(*out)


# ---------------------------------------------------------------- resolvents

def _harmonic_lift(lat: Lattice, g: GammaPart) -> list:
    """Terms Im[(az)^d P(log az)] whose interface trace is g (sigma-free)."""
    return [((d, 0), rim_solve(d, Q)) for d, Q in g.items()]


def r_delta_omega(e: PiElement) -> PiElement:
    """Particular solution of Delta phi = psi on the sector with zero interface trace."""
    lat = e.lattice
    s = lat.scalars
    shift = s.cplx(-1j) * lat.theta
    terms = []
    for (q, k), P in e.omega.items():
        q1, k1 = q + 1, k + 1
        P1 = ode_solve_first_order(4 * k1, q1, P, fix_constant_at_zero=True)
        if not P1:
            continue
        terms.append(((q1, k1), P1))
        trace = twisted_im(P1, lat.alpha_power(q - k), shift, s)
        if trace:
            P2 = rim_solve(q + k + 2, trace)
            terms.append(((q + k + 2, 0), -P2))
    return PiElement(lat, terms)


def r_delta(e: PiElement) -> PiElement:
    """Particular solution of Delta phi = psi (sector), d_Y^2 phi = 0 (layer), d_Y phi = 0 on the interface."""
    return r_delta_omega(e)


def r_dirichlet_omega(g: GammaPart, lattice: Lattice) -> PiElement:
    """Harmonic function on the sector with interface trace g."""
    return PiElement(lattice, _harmonic_lift(lattice, g))


def r_dyy(source: LambdaPart, lattice: Lattice) -> PiElement:
    """Particular solution of d_Y^2 phi = psi in the layer, harmonic in the sector.

    The layer polynomial solves Q'' = Q_psi with Q'(., 0) = 0 and Q(., -1) = 0;
    the sector part is the harmonic lift of Q(., 0).
    """
    lam = {}
    for d, Qs in source.items():
        A = Qs.antideriv_Y().antideriv_Y()
        c0 = A.at_Y(-1)
        Q = A - PolyTY.from_T(c0)
        if Q:
            lam[d] = Q
    trace = {d: Q.at_Y(0) for d, Q in lam.items()}
    return PiElement(lattice, _harmonic_lift(lattice, {d: P for d, P in trace.items() if P}), lam)


def r_neumann(g: GammaPart, lattice: Lattice) -> PiElement:
    """Particular solution with d_Y phi(., 0) = psi: layer part psi(T)(Y + 1), harmonic lift above."""
    lam = {d: PolyTY.from_T(P, (1, 1)) for d, P in g.items() if P}
    return PiElement(lattice, _harmonic_lift(lattice, {d: P for d, P in g.items() if P}), lam)


OPERATORS = {
    "laplacian_omega": OpDescriptor("laplacian_omega", "omega", "omega", -2, laplacian_omega),
    "dxx_lambda": OpDescriptor("dxx_lambda", "lambda", "lambda-source", -2, dxx_lambda),
    "dy_gamma_plus": OpDescriptor("dy_gamma_plus", "pi", "gamma", -1, dy_gamma_plus),
    "r_delta": OpDescriptor("r_delta", "omega", "pi", 2, r_delta),
    "r_dyy": OpDescriptor("r_dyy", "lambda-source", "pi", 0, r_dyy),
    "r_neumann": OpDescriptor("r_neumann", "gamma", "pi", 0, r_neumann),
    "r_delta_omega": OpDescriptor("r_delta_omega", "omega", "omega", 2, r_delta_omega),
    "r_dirichlet_omega": OpDescriptor("r_dirichlet_omega", "gamma", "omega", 0, r_dirichlet_omega),
}
