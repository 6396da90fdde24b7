"""
Particular solutions
====================

Three resolvents invert the Laplacian in the sector, the second Y-derivative
in the layer and the Neumann trace on the interface.  Each output is glued
continuously across the interface and carries no phi_d component.
"""
from cornerlayer import Lattice, PiElement, Poly, PolyTY
from cornerlayer.calculus_ops import (
    dy_lambda_at0,
    dyy_lambda,
    laplacian_omega,
    r_delta,
    r_dyy,
    r_neumann,
)
from cornerlayer.sing_spaces import continuity_defect, evaluate

lat = Lattice(2.0)  # Theta in radians; pi/Theta is treated as irrational

psi = PiElement(lat, {(lat.deg(0, 1), 1): Poly([1.0, 0.5j])})
sol = r_delta(psi)
print("Delta R(psi) - psi:", laplacian_omega(sol).distance(psi))
print("terms of R(psi):", len(sol.omega))

src = {lat.zero: PolyTY({(0, 0): 1.0, (0, 1): 1.0})}  # the layer source Y + 1
sol = r_dyy(src, lat)
print("layer polynomial:", dict(sol.lam[lat.zero].items()))
print("d_Y^2 of it minus the source:", (dyy_lambda(sol)[lat.zero] - src[lat.zero]).max_abs())
print("interface flux:", dy_lambda_at0(sol))

flux = {lat.integer(1): Poly([0.3])}
sol = r_neumann(flux, lat)
print("Neumann data recovered:", dy_lambda_at0(sol))

# continuity across the interface, symbolically and at a point
print("continuity defect:", continuity_defect(sol))
x = 0.7
print("sector vs layer at x:", evaluate(sol, "omega", x, 0.0), evaluate(sol, "lambda", x, 0.0))
