"""
Layer correctors and tangent numbers
====================================

The corrector polynomials U_n(Y) come from repeated double integration.
Their values at the interface are mu0/mu1 times the Taylor coefficients of
tan, which this script confirms in exact arithmetic.
"""
from fractions import Fraction

from cornerlayer.matching_engine import layer_correctors, tangent_coeff
from cornerlayer.oracle import tangent_from_bernoulli

ratio = Fraction(1, 2)
U = layer_correctors(8, ratio)
for n, coeffs in enumerate(U):
    T = tangent_coeff(n)
    assert coeffs[0] == ratio * T == ratio * tangent_from_bernoulli(n)
    print(f"n={n}  U_n(0)={coeffs[0]!s:>14}  T_n={T!s:>12}  degree in Y={len(coeffs) - 1}")

# the same recursion in floating point
Uf = layer_correctors(8, 0.5)
print("largest float gap:", max(abs(u[0] - float(v[0])) for u, v in zip(Uf, U)))
