"""
Geometric series of operators
=============================

The far-field series is the sum of every word in four generators applied to
a phi_d seed.  The production path settles cells in order of a direction
vector; the slow path enumerates words.  On a small window they agree.
"""
import time

from cornerlayer import GradedSeries, ProblemConfig, Window, phi
from cornerlayer.formal_series import geometric_series, scale_heps
from cornerlayer.matching_engine import build_Rminus, build_Rplus
from cornerlayer.oracle import enumerate_words

config = ProblemConfig.from_mapping(dict(theta="pi*2/3", mu0=1.0, mu1=2.0, rho0=1.0, rho1=1.5,
                                         omega=[1.0, 0.5]))
lat = config.lattice
d = lat.pi_multiple(1)

for op in build_Rplus(config):
    print(f"{op.name:22s} moves (p, d) by ({op.deg_eps}, {op.deg_A})")

seed = GradedSeries(lat, {(lat.zero, d, 0): phi(d)})
window = Window(lat.integer(6), lat.integer(8), +1)

t0 = time.perf_counter()
fast = geometric_series(build_Rplus(config), seed, window)
t1 = time.perf_counter()
slow = enumerate_words(build_Rplus(config), seed, 12, window)
t2 = time.perf_counter()
print(f"cells: {len(fast)}, gap to words: {fast.distance(slow):.1e}")
print(f"fixed point {t1 - t0:.3f}s, words {t2 - t1:.3f}s")

# the corner series runs the other way in d
corner = geometric_series(build_Rminus(config), GradedSeries(lat, {(lat.zero, -d, 0): phi(-d)}),
                          Window(lat.integer(3), lat.integer(3), -1))
print("corner grades:", sorted({str(k[1]) for k in corner.cells}))

# rescaling z -> eps z turns log(az) factors into powers of ln(eps)
moved = scale_heps(fast)
print("largest ln(eps) power after rescaling:", moved.max_l())
print("round trip:", scale_heps(moved, "inverse").distance(fast))
