"""
Singular functions of a sector with a thin layer
================================================

The building blocks are phi_d = Im[(alpha z)^d], harmonic in the sector and
zero on its far edge, for d a multiple of pi/Theta.  This walk-through
builds a few of them, reads back their sigma coefficients and evaluates
them with derivatives.
"""
import math

from cornerlayer import Lattice, PiElement, Poly, phi
from cornerlayer.sing_spaces import evaluate, evaluate_gamma, normalize, sigma_d, trace_gamma

# Theta = 2 pi/3 declared exactly, so pi/Theta = 3/2 and the lattice is rational
lat = Lattice.rational(2, 3)
d1, d2 = lat.pi_multiple(1), lat.pi_multiple(2)
print("first exponents:", d1, d2)

# sigma_d picks the coefficient of phi_d and ignores everything else
u = phi(d1).scale(2.0) + phi(d2).scale(-0.5j)
print("sigma of u:", sigma_d(u, d1), sigma_d(u, d2))

# a term with a log factor carries no sigma coefficient
log_term = PiElement(lat, {(d1, 0): Poly([0, 1.0])})
print("sigma of a log term:", sigma_d(log_term, d1))

# canonical form: Im[(az)^1 conj(az)^2] = -Im[(az)^2 conj(az)^1]
print("normal form:", normalize([((lat.integer(1), 2), Poly([1.0]))]))

# point values, with analytic derivatives in r and theta
theta = float(lat.theta)
r, t = 0.6, 0.4 * theta
print("phi at (r, t):", evaluate(phi(d1), "omega", r, t))
print("closed form  :", r ** d1.value * math.sin(d1.value * (t - theta)))
print("d/dtheta     :", evaluate(phi(d1), "omega", r, t, (0, 1)))
print("on the far edge:", evaluate(phi(d1), "omega", r, theta))

# phi_d vanishes on both edges; a log term leaves x^d times a polynomial in ln x
g = trace_gamma(log_term)
print("interface trace of the log term:", g)
print("  at x=0.5:", evaluate_gamma(g, lat, 0.5))
