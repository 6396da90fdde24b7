"""Verification suites, one function per acceptance criterion.

Each check returns a CheckResult carrying the measured deviation, the
tolerance it was held to and the wall time.  The CLI ``check`` command and
the acceptance tests both run these.
"""
from __future__ import annotations

import json
import math
import random
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

from .calculus_ops import (
    dy_lambda_at0,
    dyy_lambda,
    laplacian_omega,
    r_delta,
    r_dyy,
    r_neumann,
)
from .coeff_field import Degree, Lattice, Poly, PolyTY, rim_solve, twisted_im
from .config import ProblemConfig
from .formal_series import GradedSeries, Window, geometric_series, scale_heps
from .matching_engine import (
    CoefficientBook,
    SigmaLedger,
    build_Rminus,
    build_Rplus,
    build_u0_series,
    layer_correctors,
    matching_matrices_check,
    tangent_coeff,
)
from .oracle import enumerate_words, fd_check, residual_slope
from .sing_spaces import PiElement, continuity_defect, evaluate, evaluate_gamma, phi, sigma_d

__all__ = ["CheckResult", "CHECKS", "SUITES", "run_suite", "ACCEPTANCE_THETAS"]

ACCEPTANCE_THETAS = ("pi/2", "pi*2/3", 2.0)


@dataclass
class CheckResult:
    criterion: int
    name: str
    theta: str
    value: float
    tolerance: float
    passed: bool
    seconds: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.criterion:>2} {self.name:<22} theta={self.theta:<8} "
                f"value={self.value:.3e} tol={self.tolerance:.1e} time={self.seconds:.2f}s {self.detail}")

    def to_json(self) -> dict:
        return asdict(self)


def _result(criterion, name, config, value, tol, t0, detail="", strict=False) -> CheckResult:
    ok = value <= tol if strict else value < tol
    return CheckResult(criterion, name, config.theta, float(value), tol, bool(ok),
                       time.perf_counter() - t0, detail)


# ---------------------------------------------------------------- random inputs

def _rand_c(rng: random.Random) -> complex:
    return complex(rng.uniform(-1, 1), rng.uniform(-1, 1))


def _rand_poly(rng, deg) -> Poly:
    return Poly([_rand_c(rng) for _ in range(deg + 1)])


def _rand_grade(rng, lat: Lattice) -> Degree:
    return lat.deg(rng.randint(-2, 3), rng.randint(-2, 2))


def _rand_omega(rng, lat: Lattice, d: Degree) -> PiElement:
    terms = []
    for _ in range(rng.randint(1, 3)):
        k = rng.randint(0, 2)
        terms.append(((d - k, k), _rand_poly(rng, rng.randint(0, 2))))
    return PiElement(lat, terms)


def _rand_gamma(rng, d: Degree) -> dict:
    return {d: _rand_poly(rng, rng.randint(0, 2))}


def _rand_lambda_source(rng, d: Degree) -> dict:
    return {d: PolyTY({(i, j): _rand_c(rng) for i in range(rng.randint(1, 3))
                       for j in range(rng.randint(1, 3))})}


# ---------------------------------------------------------------- criteria

def check_sigma_duality(config: ProblemConfig) -> CheckResult:
    t0 = time.perf_counter()
    lat = config.lattice
    js = (-3, -2, -1, 1, 2, 3)
    worst = 0.0
    for jd in js:
        for jq in js:
            v = sigma_d(phi(lat.pi_multiple(jq)), lat.pi_multiple(jd))
            worst = max(worst, abs(complex(v) - (1 if jd == jq else 0)))
    return _result(1, "sigma_duality", config, worst, 0.0, t0, strict=True)


def _rim_worst(config: ProblemConfig, cases: int, seed: int) -> tuple[float, float]:
    """(worst relative error against max|Q|, worst error against the rounding scale of the expansion)."""
    rng = random.Random(seed)
    lat = config.lattice
    s = lat.scalars
    shift = s.cplx(-1j) * lat.theta
    spread = 1 + float(lat.theta)
    worst = backward = 0.0
    for i in range(cases):
        if i % 2:
            d = lat.pi_multiple(rng.choice([-3, -2, -1, 1, 2, 3]))
        else:
            d = lat.deg(rng.randint(-3, 3), rng.randint(-2, 2))
            while d.in_pi_lattice():
                d = d + 1
        Q = _rand_poly(rng, rng.randint(0, 10))
        P = rim_solve(d, Q)
        back = twisted_im(P, lat.alpha_power(d), shift, s)
        err = max(abs(complex(back[k] - Q[k])) for k in range(max(len(Q), len(back))))
        # sum_k |P_k| (1 + Theta)^k bounds the terms cancelling in each output coefficient
        scale = Q.max_abs() + sum(abs(complex(c)) * spread ** k for k, c in enumerate(P.c))
        worst = max(worst, err / Q.max_abs())
        backward = max(backward, err / scale)
    return worst, backward


def check_rim_roundtrip(config: ProblemConfig, cases: int = 100, seed: int = 2) -> CheckResult:
    """Round trip at the configured precision.

    The generic solve has no freedom, and its coefficients grow like
    k! (Theta / |sin(d Theta)|)^k, so in binary64 the reconstruction loses
    about log10 max|P| digits.  The detail reports the error relative to the
    size of the cancelling terms and the same cases rerun at 113 bits.
    """
    t0 = time.perf_counter()
    worst, backward = _rim_worst(config, cases, seed)
    detail = f"backward={backward:.1e}"
    if config.precision != "extended":
        ext, _ = _rim_worst(config.with_precision("extended"), cases, seed)
        detail += f" extended={ext:.1e}"
    return _result(2, "rim_roundtrip", config, worst, config.tolerances.rim, t0, detail)


def check_resolvents(config: ProblemConfig, cases: int = 30, seed: int = 3) -> CheckResult:
    """Inverse and annihilation identities, symbolically and at grid points."""
    t0 = time.perf_counter()
    rng = random.Random(seed)
    lat = config.lattice
    symbolic = 0.0
    grid = 0.0
    theta = float(lat.theta)

    def gmax(g: dict) -> float:
        return max((Q.max_abs() for Q in g.values()), default=0.0)

    def lam_diff(a: dict, b: dict) -> float:
        keys = set(a) | set(b)
        return max(((a.get(k, PolyTY()) - b.get(k, PolyTY())).max_abs() for k in keys), default=0.0)

    def sigma_all(e: PiElement) -> float:
        return max((abs(complex(sigma_d(e, q))) for (q, k) in e.omega
                    if k == 0 and q.in_pi_lattice(nonzero=True)), default=0.0)

    pts = [(0.3 + 0.12 * i, theta * (i + 1) / 7) for i in range(6)]
    lpts = [(0.3 + 0.12 * i, -0.15 * (i + 1)) for i in range(6)]
    for _ in range(cases):
        d = _rand_grade(rng, lat)
        # Delta o R_delta = id on the sector; no layer part, no interface flux
        psi = _rand_omega(rng, lat, d)
        out = r_delta(psi)
        symbolic = max(symbolic, laplacian_omega(out).distance(psi), gmax(continuity_defect(out)),
                       sum(Q.max_abs() for Q in dyy_lambda(out).values()), gmax(dy_lambda_at0(out)),
                       sigma_all(out))
        for r, t in pts:
            lap = (evaluate(out, "omega", r, t, (2, 0)) + evaluate(out, "omega", r, t, (1, 0)) / r
                   + evaluate(out, "omega", r, t, (0, 2)) / r ** 2)
            ref = evaluate(psi, "omega", r, t)
            grid = max(grid, abs(complex(lap - ref)) / max(1.0, abs(complex(ref))))
        # d_Y^2 o R_dyy = id in the layer, harmonic in the sector, no interface flux
        src = _rand_lambda_source(rng, d)
        out = r_dyy(src, lat)
        symbolic = max(symbolic, lam_diff(dyy_lambda(out), src), laplacian_omega(out).max_abs(),
                       gmax(dy_lambda_at0(out)), gmax(continuity_defect(out)),
                       gmax(out.lambda_at(-1)), sigma_all(out))
        src_e = PiElement(lat, (), src)
        for x, y in lpts:
            v = evaluate(out, "lambda", x, y, (0, 2))
            ref = evaluate(src_e, "lambda", x, y)
            grid = max(grid, abs(complex(v - ref)) / max(1.0, abs(complex(ref))))
        # d_Y at Y = 0 o R_N = id, harmonic, d_Y^2 = 0
        g = _rand_gamma(rng, d)
        out = r_neumann(g, lat)
        flux = dy_lambda_at0(out)
        symbolic = max(symbolic, max((((flux.get(k) or Poly()) - g[k]).max_abs() for k in g), default=0.0),
                       laplacian_omega(out).max_abs(),
                       sum(Q.max_abs() for Q in dyy_lambda(out).values()),
                       gmax(continuity_defect(out)), gmax(out.lambda_at(-1)), sigma_all(out))
        for x, _ in lpts:
            v = evaluate(out, "lambda", x, 0.0, (0, 1))
            ref = evaluate_gamma(g, lat, x)
            grid = max(grid, abs(complex(v - ref)) / max(1.0, abs(complex(ref))))
    tol = config.tolerances
    res = _result(3, "resolvent_identities", config, symbolic, tol.symbolic, t0,
                  f"grid={grid:.1e} (tol {tol.grid:.0e})")
    res.passed = symbolic < tol.symbolic and grid < tol.grid
    return res


def check_harmonic_bc(config: ProblemConfig, seed: int = 4) -> CheckResult:
    """Delta phi_d = 0 exactly; Dirichlet conditions at theta = Theta and Y = -1 pointwise."""
    t0 = time.perf_counter()
    rng = random.Random(seed)
    lat = config.lattice
    theta = float(lat.theta)
    exact = max(laplacian_omega(phi(lat.pi_multiple(j))).max_abs() for j in (-3, -2, -1, 1, 2, 3))
    elems = []
    for _ in range(6):
        d = _rand_grade(rng, lat)
        elems.append(r_delta(_rand_omega(rng, lat, d)))
        elems.append(r_dyy(_rand_lambda_source(rng, d), lat))
        elems.append(r_neumann(_rand_gamma(rng, d), lat))
    worst = 0.0
    radii = [0.1 * 1.35 ** i for i in range(10)]
    for e in elems:
        for r in radii:
            ref = max(abs(complex(evaluate(e, "omega", r, theta * f))) for f in (0.25, 0.5, 0.75))
            if e.lam:
                ref = max(ref, abs(complex(evaluate(e, "lambda", r, -0.5))))
            if ref == 0:
                continue
            worst = max(worst, abs(complex(evaluate(e, "omega", r, theta))) / ref)
            if e.lam:
                worst = max(worst, abs(complex(evaluate(e, "lambda", r, -1.0))) / ref)
    value = max(worst, exact)
    return _result(4, "harmonic_and_bc", config, value, config.tolerances.identity, t0,
                   f"laplacian(phi)={exact:.1e}")


def _word_windows(config: ProblemConfig):
    lat = config.lattice
    for j in (-2, -1, 1, 2):
        dp = lat.pi_multiple(j)
        yield "plus", build_Rplus(config), dp, Window(lat.integer(3), dp + 2, +1)
        yield "minus", build_Rminus(config), dp, Window(lat.integer(3), 2 - dp, -1)


def check_words(config: ProblemConfig) -> CheckResult:
    t0 = time.perf_counter()
    lat = config.lattice
    worst = 0.0
    cells = 0
    for _, ops, dp, window in _word_windows(config):
        seed = GradedSeries(lat, {(lat.zero, dp, 0): phi(dp)}, check=False)
        fast = geometric_series(ops, seed, window)
        slow = enumerate_words(ops, seed, 5, window)
        worst = max(worst, fast.distance(slow))
        cells += len(fast)
    return _result(5, "geometric_vs_words", config, worst, config.tolerances.words, t0, f"cells={cells}")


def check_identity_cells(config: ProblemConfig) -> CheckResult:
    t0 = time.perf_counter()
    lat = config.lattice
    worst = 0.0
    book = CoefficientBook(config, 6, 6)
    for j in (1, 2):
        d = lat.pi_multiple(j)
        worst = max(worst, abs(complex(book.coeff("Su", d, d, d, 0)) - 1),
                    abs(complex(book.coeff("uS", d, d, -d, 0)) - 1))
    # constraint sets: every stored entry must satisfy them
    bad = 0
    for j in (-3, -2, -1, 1, 2, 3):
        dp = lat.pi_multiple(j)
        for (d, p, l), v in book.table("uS", dp).items():
            bad += not ((p + d).is_natural() and (p + dp).is_natural() and l >= 0)
        for (d, p, l), v in book.table("Su", dp).items():
            bad += not ((p - d).is_natural() and (p - dp).is_natural() and l >= 0)
    res = _result(6, "identity_cells", config, worst, config.tolerances.identity, t0,
                  f"off-constraint entries={bad}")
    res.passed = res.passed and bad == 0
    return res


def check_matrices(config: ProblemConfig, workers: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    bound = 2 + math.ceil(2 * float(config.lattice.pi_over_theta) - 1e-12)
    rep = matching_matrices_check(config, bound, workers=workers)
    res = _result(7, "matrix_inverse", config, rep.qp_deviation, config.tolerances.matrix, t0,
                  f"size={rep.size} bound={bound} l_max={rep.l_max} diagQ={rep.q_diagonal_deviation:.1e}")
    res.passed = res.passed and rep.q_diagonal_deviation < config.tolerances.identity
    return res


def check_tangent(config: ProblemConfig) -> CheckResult:
    t0 = time.perf_counter()
    exact = layer_correctors(8, config.mu_ratio_exact)
    floats = layer_correctors(8, float(config.mu_ratio_exact))
    mismatch = sum(U[0] != config.mu_ratio_exact * tangent_coeff(n) for n, U in enumerate(exact))
    worst = max(abs(U[0] - float(config.mu_ratio_exact * tangent_coeff(n))) for n, U in enumerate(floats))
    res = _result(8, "layer_vs_tangent", config, worst, config.tolerances.identity, t0,
                  f"exact mismatches={mismatch}")
    res.passed = res.passed and mismatch == 0
    return res


def check_fd(config: ProblemConfig, seed: int = 9) -> CheckResult:
    t0 = time.perf_counter()
    rng = random.Random(seed)
    lat = config.lattice
    theta = float(lat.theta)
    worst = 0.0
    for i in range(20):
        d = _rand_grade(rng, lat)
        if i % 2 == 0:
            k = rng.randint(0, 2)
            e = PiElement(lat, [((d - k, k), _rand_poly(rng, rng.randint(0, 2)))])
            pts = [("omega", rng.uniform(0.3, 1.5), rng.uniform(0.1, theta - 0.1)) for _ in range(20)]
        else:
            e = PiElement(lat, (), _rand_lambda_source(rng, d))
            pts = [("lambda", rng.uniform(0.3, 1.5), rng.uniform(-0.9, -0.1)) for _ in range(20)]
        if not e:
            continue
        worst = max(worst, fd_check(e, pts, 1e-5))
    return _result(9, "finite_differences", config, worst, config.tolerances.fd, t0)


def check_residual_slope(config: ProblemConfig) -> CheckResult:
    t0 = time.perf_counter()
    lat = config.lattice
    d = lat.pi_multiple(1)
    ledger = SigmaLedger(lat)
    ledger.set("far", lat.zero, d, 0, config.scalars.cplx(1))
    series = build_u0_series(ledger, Window(lat.integer(3), d + 6, +1), config)
    worst = 0.0
    parts = []
    ok = True
    for D in (d + 2, d + 4):
        rep = residual_slope(series, config, D)
        gap = abs(rep.slope - rep.expected) if rep.expected is not None else math.inf
        worst = max(worst, gap)
        ok = ok and rep.passed
        parts.append(f"D={D.value:.3f}:slope={rep.slope:.4f}/pred={rep.expected:.4f}")
    res = _result(10, "residual_slope", config, worst, config.tolerances.slope, t0, " ".join(parts),
                  strict=True)
    res.passed = res.passed and ok
    return res


def check_scaling(config: ProblemConfig, seed: int = 11) -> CheckResult:
    t0 = time.perf_counter()
    rng = random.Random(seed)
    lat = config.lattice
    worst = 0.0
    overshoot = 0
    for _ in range(20):
        cells = {}
        for _ in range(3):
            d = _rand_grade(rng, lat)
            p = lat.deg(rng.randint(0, 3), rng.randint(0, 1))
            cells[(p, d, rng.randint(0, 2))] = _rand_omega(rng, lat, d)
        s = GradedSeries(lat, cells, check=False)
        back = scale_heps(scale_heps(s, "inverse"), "forward")
        worst = max(worst, back.distance(s))
        for key, e in s.cells.items():
            one = GradedSeries(lat, {key: e}, check=False)
            for direction in ("forward", "inverse"):
                top = scale_heps(one, direction).max_l()
                overshoot += top > key[2] + e.t_degree()
    res = _result(11, "scaling_inverse_pair", config, worst, config.tolerances.identity, t0,
                  f"log-power overshoots={overshoot}")
    res.passed = res.passed and overshoot == 0
    return res


def check_determinism(config: ProblemConfig) -> CheckResult:
    from .cli import main

    t0 = time.perf_counter()
    lat = config.lattice
    bound = 2 + math.ceil(2 * float(lat.pi_over_theta) - 1e-12)
    outputs = []
    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = Path(tmp) / "problem.toml"
        cfg_path.write_text(_toml(config))
        for i, workers in enumerate((1, 1, 4)):
            for kind in ("uS", "Su"):
                out = Path(tmp) / f"run{i}_{kind}.csv"
                code = main(["match-coeffs", "--config", str(cfg_path), "--kind", kind,
                             "--window", str(bound), "--out", str(out), "--workers", str(workers)])
                if code != 0:
                    return _result(12, "determinism", config, 1.0, 0.0, t0, f"exit code {code}", strict=True)
                outputs.append((i, kind, _data_section(out), _data_section(out.with_suffix(".json"))))
    differ = 0
    for _, kind, csv_data, json_data in outputs:
        ref = next(o for o in outputs if o[1] == kind)
        differ += (csv_data != ref[2]) + (json_data != ref[3])
    return _result(12, "determinism", config, float(differ), 0.0, t0,
                   f"files compared={2 * len(outputs)}", strict=True)


def _data_section(path: Path) -> str:
    if path.suffix == ".json":
        return json.dumps(json.loads(path.read_text())["entries"])
    return "".join(ln for ln in path.read_text().splitlines(True) if not ln.startswith("#"))


def _toml(config: ProblemConfig) -> str:
    m = config.to_mapping()
    theta = m["theta"]
    lines = [f"theta = {theta!r}" if isinstance(theta, float) else f'theta = "{theta}"']
    for key in ("mu0", "mu1", "rho0", "rho1"):
        lines.append(f"{key} = {float(m[key])!r}")
    lines.append(f"omega = [{m['omega'][0]!r}, {m['omega'][1]!r}]")
    lines.append(f'precision = "{m["precision"]}"')
    if "window" in m:
        lines.append(f"\n[window]\np_max = {m['window']['p_max']}")
    lines.append("\n[tolerances]")
    for key, value in m["tolerances"].items():
        lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"


CHECKS: dict[int, Callable[[ProblemConfig], CheckResult]] = {
    1: check_sigma_duality,
    2: check_rim_roundtrip,
    3: check_resolvents,
    4: check_harmonic_bc,
    5: check_words,
    6: check_identity_cells,
    7: check_matrices,
    8: check_tangent,
    9: check_fd,
    10: check_residual_slope,
    11: check_scaling,
    12: check_determinism,
}

SUITES: dict[str, tuple[int, ...]] = {
    "all": tuple(CHECKS),
    "basics": (1, 2, 4, 11),
    "resolvents": (3,),
    "series": (5, 10),
    "matching": (6, 7),
    "layer": (8,),
    "derivatives": (9,),
    "determinism": (12,),
}


def run_suite(config: ProblemConfig, suite: str = "all") -> list[CheckResult]:
    if suite not in SUITES:
        raise KeyError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    return [CHECKS[c](config) for c in SUITES[suite]]
