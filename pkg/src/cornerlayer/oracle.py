"""Slow, literal checks for the fast paths.

Nothing here reuses the dynamic programming, the index-set enumerations or
the matrix assembly of the engine; only the data types and point evaluation
are shared.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .coeff_field import Degree, Lattice
from .formal_series import EpsOperator, GradedSeries, ResourceError, Window
from .sing_spaces import PiElement, evaluate

__all__ = [
    "enumerate_words",
    "fd_check",
    "ResidualReport",
    "residual_slope",
    "predicted_order",
    "brute_force_singular",
    "tangent_from_bernoulli",
]


# ---------------------------------------------------------------- word enumeration

def enumerate_words(ops: Sequence[EpsOperator], seed: GradedSeries, max_len: int,
                    window: Window, max_terms: int = 2_000_000) -> GradedSeries:
    """Sum of g1 o ... o gn (seed) over every word of length n <= max_len.

    Each word is applied separately and the results are added at the end.
    Words that leave the window are dropped, which is harmless because every
    operator moves cells away from the window's interior bound.
    """
    ops = list(ops)
    total: list = [(k, e) for k, e in seed.cells.items() if window.contains(k[0], k[1])]
    frontier = list(total)
    count = len(frontier)
    for _ in range(max_len):
        nxt = []
        for (p, d, l), e in frontier:
            for op in ops:
                tp, td = p + op.deg_eps, d + op.deg_A
                if not window.contains(tp, td):
                    continue
                out = op(e)
                if out:
                    nxt.append(((tp, td, l), out))
        count += len(nxt)
        if count > max_terms:
            raise ResourceError(f"word enumeration exceeded {max_terms} terms")
        total.extend(nxt)
        frontier = nxt
    return GradedSeries(seed.lattice, total, seed.orientation, window, check=False)


# ---------------------------------------------------------------- finite differences

def fd_check(e: PiElement, points: Iterable[tuple[str, float, float]], h: float = 1e-5) -> float:
    """Largest relative gap between analytic derivatives and central differences.

    ``points`` are (region, u, v) with region "omega" (u = r, v = theta) or
    "lambda" (u = x, v = Y).  First derivatives are differenced from values;
    second derivatives from the analytic first derivatives, which keeps the
    rounding error at the level of a first difference.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError("h must lie in [1e-7, 1e-3]")
    worst = 0.0
    for region, u, v in points:
        base = abs(complex(evaluate(e, region, u, v)))
        for lower, upper in (((0, 0), (1, 0)), ((0, 0), (0, 1)), ((1, 0), (2, 0)),
                             ((0, 1), (0, 2)), ((0, 1), (1, 1))):
            step_u = upper[0] - lower[0]
            du, dv = (h, 0.0) if step_u else (0.0, h)
            f_plus = complex(evaluate(e, region, u + du, v + dv, lower))
            f_minus = complex(evaluate(e, region, u - du, v - dv, lower))
            numeric = (f_plus - f_minus) / (2 * h)
            exact = complex(evaluate(e, region, u, v, upper))
            scale = max(abs(exact), abs(complex(evaluate(e, region, u, v, lower))), base, 1e-300)
            worst = max(worst, abs(exact - numeric) / scale)
    return worst


# ---------------------------------------------------------------- residual slope

@dataclass
class ResidualReport:
    radii: list[float]
    residuals: list[float]
    slope: float
    expected: float | None
    tolerance: float
    passed: bool
    thetas: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def predicted_order(series: GradedSeries, truncation: Degree, p: Degree, l: int = 0) -> float | None:
    """Lowest grade g with truncation - 2 < g <= truncation present in the (p, l) slice.

    The Helmholtz defect of the truncated slice telescopes to omega^2 rho0
    times exactly these cells, so its size scales like r^g.
    """
    grades = [d.value for (pp, d, ll) in series.cells
              if pp == p and ll == l and truncation.value - 2 < d.value <= truncation.value + 1e-12]
    return min(grades) if grades else None


def _extended_copy(e: PiElement) -> PiElement:
    """The same element over a 113-bit lattice; point values then survive the Laplacian's cancellation."""
    lat = e.lattice
    if lat.scalars.mp is not None:
        return e
    ext = Lattice(None if lat.ratio else float(lat.theta), ratio=lat.ratio, precision="extended")
    return PiElement.from_json(ext, e.to_json())


def residual_slope(series: GradedSeries, config, truncation: Degree, radii: Sequence[float] | None = None,
                   p: Degree | None = None, l: int = 0, n_theta: int = 9,
                   tolerance: float | None = None) -> ResidualReport:
    """Fit log(defect) against log(r) for mu0 Delta T + omega^2 rho0 T, T the slice truncated at grade D.

    The polar Laplacian u_rr + u_r/r + u_tt/r^2 cancels to many digits near
    the corner, so point values are taken in extended precision.
    """
    lat: Lattice = series.lattice
    p = lat.zero if p is None else p
    radii = [2.0 ** -j for j in range(3, 10)] if radii is None else list(radii)
    if len(radii) < 5:
        raise ValueError("residual_slope needs at least five radii")
    tol = config.tolerances.slope if tolerance is None else tolerance
    trunc = PiElement.zero(lat)
    for (pp, d, ll), e in series.cells.items():
        if pp == p and ll == l and d <= truncation:
            trunc = trunc + e
    trunc = _extended_copy(trunc)
    s = trunc.lattice.scalars
    theta = float(lat.theta)
    thetas = [theta * (k + 1) / (n_theta + 1) for k in range(n_theta)]
    mu0 = s.real(config.mu0)
    mass = s.cplx(config.omega) ** 2 * s.real(config.rho0)
    residuals = []
    for r in radii:
        rr = s.real(r)
        worst = 0.0
        for t in thetas:
            u = evaluate(trunc, "omega", rr, t)
            u_r = evaluate(trunc, "omega", rr, t, (1, 0))
            u_rr = evaluate(trunc, "omega", rr, t, (2, 0))
            u_tt = evaluate(trunc, "omega", rr, t, (0, 2))
            lap = u_rr + u_r / rr + u_tt / (rr * rr)
            worst = max(worst, abs(complex(mu0 * lap + mass * u)))
        residuals.append(worst)
    expected = predicted_order(series, truncation, p, l)
    if all(x == 0 for x in residuals):
        return ResidualReport(radii, residuals, math.inf, expected, tol, expected is None, thetas)
    x = np.log(np.asarray(radii))
    y = np.log(np.asarray(residuals))
    slope = float(np.polyfit(x, y, 1)[0])
    ok = expected is not None and abs(slope - expected) <= tol
    return ResidualReport(radii, residuals, slope, expected, tol, ok, thetas)


# ---------------------------------------------------------------- convolution oracle

def brute_force_singular(lattice: Lattice, ledger_values: dict, coeff, p: Degree, d: Degree, l: int,
                         fld: str):
    """Singular sigma cell by scanning every ledger cell and testing the index sets pointwise.

    ``ledger_values`` maps (field, p, d, l) to numbers and ``coeff(kind, d, d', p, l)``
    returns matching coefficients.  For a far cell (d < 0) the sum runs over
    corner cells (p', d') with p' in [[0, p + d]] and p' - d' in [[0, p]];
    for a corner cell (d > 0) over far cells with p' in [[0, p - d]] and
    p' + d' in [[0, p]].  Membership of [[a, b]] = {c : c - a in P, b - c in N}
    is tested pointwise.
    """
    def in_bracket(c, a, b):
        return (c - a).in_P() and (b - c).is_natural()

    acc = 0
    src = "corner" if fld == "far" else "far"
    kind = "uS" if fld == "far" else "Su"
    for (f, pp, dp, lp), v in sorted(ledger_values.items(), key=lambda kv: (kv[0][0], kv[0][1].value,
                                                                               kv[0][2].value, kv[0][3])):
        if f != src or lp > l or v == 0:
            continue
        if fld == "far":
            ok = in_bracket(pp, lattice.zero, p + d) and in_bracket(pp - dp, lattice.zero, p)
        else:
            ok = in_bracket(pp, lattice.zero, p - d) and in_bracket(pp + dp, lattice.zero, p)
        if ok:
            acc += coeff(kind, d, dp, p - pp, l - lp) * v
    return acc


# ---------------------------------------------------------------- tangent numbers

def tangent_from_bernoulli(n: int):
    """T_n = (-1)^n 2^{2n+2} (2^{2n+2} - 1) B_{2n+2} / (2n+2)!, exact."""
    m = 2 * n + 2
    # Bernoulli numbers by the Akiyama-Tanigawa algorithm (B_1 = +1/2 convention, unused here)
    a = [Fraction(0)] * (m + 1)
    B = []
    for k in range(m + 1):
        a[k] = Fraction(1, k + 1)
        for j in range(k, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
        B.append(a[0])
    return Fraction((-1) ** n * 2 ** m * (2 ** m - 1)) * B[m] / math.factorial(m)

