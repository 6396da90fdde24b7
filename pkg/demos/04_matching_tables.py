"""
Matching coefficients
=====================

c^{u<-S} reads the far-field sigma coefficients generated by a corner
singularity, c^{S<-u} the other way round.  Assembled as block matrices on
a finite index set, the two maps are inverse to each other.
"""
from cornerlayer import ProblemConfig
from cornerlayer.matching_engine import CoefficientBook, match_coeff, matching_matrices_check

config = ProblemConfig.from_mapping(dict(theta="pi*2/3", mu0=1.0, mu1=2.0, rho0=1.0, rho1=1.5,
                                         omega=[1.0, 0.5]))
lat = config.lattice
d = lat.pi_multiple(1)

print("c^{S<-u}[d, d, d, 0] =", match_coeff("Su", d, d, d, 0, config))
print("c^{u<-S}[d, d, -d, 0] =", match_coeff("uS", d, d, -d, 0, config))

book = CoefficientBook(config, 5)
seeds = lat.pi_lattice_between(-5, 5)
book.fill("Su", seeds)
rows = book.rows("Su", seeds)
print(f"{len(rows)} nonzero c^(S<-u) cells; those off the identity:")
for dd, dp, p, l, v in rows:
    if (dd, l) != (dp, 0):
        print(f"  d={dd} d'={dp} p={p} l={l} value={complex(v):.3e}")

report = matching_matrices_check(config, 5)
print(f"index set of size {report.size}, max |QP - I| = {report.qp_deviation:.1e}")
