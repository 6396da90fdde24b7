"""
From sigma ledger to expansion
==============================

Variational sigma values (here random) are ingested level by level; the
singular ones follow from the matching convolutions.  The far-field series
built from the ledger satisfies the graded Helmholtz system, and its
truncations leave a defect that decays at the predicted rate.
"""
import random

from cornerlayer import ProblemConfig, Window
from cornerlayer.matching_engine import (
    SigmaLedger,
    build_u0_series,
    graded_residual,
    sigma_recursion,
)
from cornerlayer.oracle import residual_slope

config = ProblemConfig.from_mapping(dict(theta="pi/2", mu0=1.0, mu1=2.0, rho0=1.0, rho1=1.5,
                                         omega=[1.0, 0.5]))
lat = config.lattice
rng = random.Random(0)


class RandomData:
    def far(self, p, d, l, ledger):
        return complex(rng.gauss(0, 1), rng.gauss(0, 1)) if l == 0 else 0

    def corner(self, p, d, l, ledger):
        return complex(rng.gauss(0, 1), rng.gauss(0, 1)) if l == 0 else 0


ledger = sigma_recursion(SigmaLedger(lat), 6, config, RandomData(), l_max=1)
computed = [k for k, _ in ledger.items() if ledger.provenance[k] == "computed"]
print(f"{len(ledger)} ledger cells, {len(computed)} of them from the matching sums")
print("support violations:", ledger.support_violations())
print(ledger.to_csv()[:300])

d = lat.pi_multiple(1)
impulse = SigmaLedger(lat)
impulse.set("far", lat.zero, d, 0, 1 + 0j)
series = build_u0_series(impulse, Window(lat.integer(2), d + 6, +1), config)
print("graded residual:", graded_residual(series, config))
for top in (d + 2, d + 4):
    rep = residual_slope(series, config, top)
    print(f"truncated at {top}: slope {rep.slope:.4f}, predicted {rep.expected}")
