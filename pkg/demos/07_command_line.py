"""
Command-line round trip
=======================

The same computations through the ``cornerlayer`` command, in a scratch
directory: a coefficient table, the layer correctors, an expansion from a
one-cell ledger and a verification suite.
"""
import tempfile
from pathlib import Path

from cornerlayer.cli import main

CONFIG = """\
theta = "pi*2/3"
mu0 = 1.0
mu1 = 2.0
rho0 = 1.0
rho1 = 1.5
omega = [1.0, 0.5]

[window]
p_max = 4
"""

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    cfg = tmp / "problem.toml"
    cfg.write_text(CONFIG)
    ledger = tmp / "sigma.csv"
    ledger.write_text("field,p_a,p_b,d_a,d_b,l,re,im\nfar,0,0,0,1,0,1,0\n")

    runs = [
        ["match-coeffs", "--config", str(cfg), "--kind", "Su", "--out", str(tmp / "su.csv")],
        ["layer-correctors", "--config", str(cfg), "--n-max", "4", "--out", str(tmp / "layer.csv")],
        ["expand", "--config", str(cfg), "--ledger", str(ledger), "--window", "2", "--out", str(tmp / "u.json")],
        ["check", "--config", str(cfg), "--suite", "matching"],
    ]
    for argv in runs:
        print("$ cornerlayer", " ".join(a.replace(str(tmp) + "/", "") for a in argv))
        print("exit", main(argv))
    print((tmp / "su.csv").read_text()[:400])
    print(sorted(p.name for p in tmp.iterdir()))
