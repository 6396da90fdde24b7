"""Matching coefficients, corner coefficients, layer correctors and the sigma recursion.

The far-and-layer series u (macroscopic variables) and the corner series S
(microscopic variables) are both determined by their singular coefficients
sigma_d.  The two families are tied together by the matching coefficients

    c^{u<-S}_{d,d',p,l} = sigma_d of the (p, l) slice of H^{-1} <R-> phi_{d'}
    c^{S<-u}_{d,d',p,l} = sigma_d of the (p, l) slice of H <R+> phi_{d'}

where <R> is the geometric series of an operator set and H the scaling
z -> eps z.  Everything below works on finite windows that are closed under
the operator degrees, so each computed number is exact (up to rounding).
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol

import numpy as np

from .calculus_ops import (
    dxx_gamma,
    dxx_lambda,
    dy_gamma_plus,
    dy_lambda_at0,
    dyy_lambda,
    laplacian_omega,
    r_delta,
    r_dyy,
    r_neumann,
)
from .coeff_field import Degree, Lattice, PolyTY
from .config import ProblemConfig
from .formal_series import (
    EpsOperator,
    GradedSeries,
    Window,
    WindowError,
    geometric_series,
    scale_heps,
)
from .sing_spaces import GammaPart, PiElement, continuity_defect, gamma_add, gamma_scale, phi

__all__ = [
    "DataGapError",
    "build_Rplus",
    "build_Rminus",
    "CoefficientBook",
    "match_coeff",
    "MatrixReport",
    "matching_matrices_check",
    "corner_coeff",
    "tangent_coeff",
    "layer_corrector",
    "layer_correctors",
    "layer_field_from_traces",
    "layer_field",
    "SigmaLedger",
    "ZeroIngest",
    "TableIngest",
    "ProfileCornerIngest",
    "sigma_recursion",
    "build_u0_series",
    "build_Sinf_series",
    "graded_residual",
    "read_profile",
    "write_table",
]

KINDS = ("uS", "Su", "uu")


class DataGapError(LookupError):
    """Ingested data needed by the computation is missing; ``cells`` lists it."""

    def __init__(self, what: str, cells: list):
        self.cells = cells
        shown = ", ".join(str(c) for c in cells[:20])
        more = f" (+{len(cells) - 20} more)" if len(cells) > 20 else ""
        super().__init__(f"missing {what}: {shown}{more}")


# ---------------------------------------------------------------- operator sets

def _actions(lat: Lattice) -> dict[str, Callable[[PiElement], PiElement]]:
    return {
        "R_delta": r_delta,
        "R_dyy.dxx": lambda e: r_dyy(dxx_lambda(e), lat),
        "R_dyy": lambda e: r_dyy(e.lam, lat),
        "R_N.dy": lambda e: r_neumann(dy_gamma_plus(e), lat),
    }


def build_Rplus(config: ProblemConfig) -> list[EpsOperator]:
    """Generators of the far-and-layer series, in macroscopic variables."""
    lat = config.lattice
    act = _actions(lat)
    s = config.scalars
    return [
        EpsOperator("-k0^2 R_delta", lat.zero, lat.integer(2), -config.k0_sq, act["R_delta"]),
        EpsOperator("-eps^2 R_dyy dxx", lat.integer(2), lat.integer(-2), s.cplx(-1), act["R_dyy.dxx"]),
        EpsOperator("-eps^2 k1^2 R_dyy", lat.integer(2), lat.zero, -config.k1_sq, act["R_dyy"]),
        EpsOperator("eps mu0/mu1 R_N dy", lat.integer(1), lat.integer(-1),
                    s.cplx(config.mu_ratio), act["R_N.dy"]),
    ]


def build_Rminus(config: ProblemConfig) -> list[EpsOperator]:
    """Generators of the corner series, in microscopic variables."""
    lat = config.lattice
    act = _actions(lat)
    s = config.scalars
    return [
        EpsOperator("-eps^2 k0^2 R_delta", lat.integer(2), lat.integer(2), -config.k0_sq, act["R_delta"]),
        EpsOperator("-R_dyy dXX", lat.zero, lat.integer(-2), s.cplx(-1), act["R_dyy.dxx"]),
        EpsOperator("-eps^2 k1^2 R_dyy", lat.integer(2), lat.zero, -config.k1_sq, act["R_dyy"]),
        EpsOperator("mu0/mu1 R_N dY", lat.zero, lat.integer(-1), s.cplx(config.mu_ratio), act["R_N.dy"]),
    ]


# ---------------------------------------------------------------- matching coefficients

def _as_degree(lat: Lattice, x) -> Degree:
    if isinstance(x, Degree):
        return x
    if isinstance(x, int):
        return lat.integer(x)
    a, b = x
    return lat.deg(a, b)


def _kernel_table(config: ProblemConfig, kind: str, seed: Degree,
                  p_max: Degree, span: Degree) -> dict:
    """{(d, p, l): sigma} for one seed phi_{seed}."""
    lat = config.lattice
    start = GradedSeries(lat, {(lat.zero, seed, 0): phi(seed)}, check=False)
    if kind == "uS":
        series = geometric_series(build_Rminus(config), start, Window(p_max, span, -1))
        moved = scale_heps(series, "inverse")
    else:
        series = geometric_series(build_Rplus(config), start, Window(p_max, span, +1))
        moved = scale_heps(series, "forward")
    out = {}
    for (p, d, l), e in moved.cells.items():
        if d.in_pi_lattice(nonzero=True):
            v = e.sigma(d)
            if v != 0:
                out[(d, p, l)] = out.get((d, p, l), 0) + v
    return out


def _table_worker(args):
    mapping, kind, seed, p_max, span = args
    config = ProblemConfig.from_mapping(mapping)
    lat = config.lattice
    s = config.scalars
    tab = _kernel_table(config, kind, lat.deg(*seed), lat.deg(*p_max), lat.deg(*span))
    return [(d.pair(), p.pair(), l, s.fmt(v.real), s.fmt(v.imag)) for (d, p, l), v in tab.items()]


class CoefficientBook:
    """Lazily filled tables c^{u<-S} and c^{S<-u} on one window.

    The window bounds the pre-scaling cells: epsilon power <= p_max and the
    micro (resp. macro) exponent <= span.  A coefficient c_{d,d',p,l} is
    available when its pre-image cell lies inside:

    * u<-S: p + d <= p_max and p <= span,
    * S<-u: p - d <= p_max and p <= span.
    """

    def __init__(self, config: ProblemConfig, p_max, span=None):
        self.config = config
        self.lattice = config.lattice
        self.p_max = _as_degree(self.lattice, p_max)
        self.span = self.p_max if span is None else _as_degree(self.lattice, span)
        self._tables: dict[tuple[str, Degree], dict] = {}

    def table(self, kind: str, seed: Degree) -> dict:
        if kind not in ("uS", "Su"):
            raise ValueError(f"unknown kind {kind!r}")
        key = (kind, seed)
        if key not in self._tables:
            self._tables[key] = _kernel_table(self.config, kind, seed, self.p_max, self.span)
        return self._tables[key]

    def fill(self, kind: str, seeds: Iterable[Degree], workers: int = 1) -> None:
        """Compute the tables of several seeds, optionally in worker processes."""
        todo = [d for d in seeds if (kind, d) not in self._tables]
        if workers <= 1 or len(todo) <= 1:
            for d in todo:
                self.table(kind, d)
            return
        mapping = self.config.to_mapping()
        jobs = [(mapping, kind, d.pair(), self.p_max.pair(), self.span.pair()) for d in todo]
        s = self.config.scalars
        lat = self.lattice
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for d, rows in zip(todo, pool.map(_table_worker, jobs)):
                tab = {}
                for dd, pp, l, re, im in rows:
                    tab[(lat.deg(*dd), lat.deg(*pp), l)] = _parse_scalar(s, re, im)
                self._tables[(kind, d)] = tab

    def covers(self, kind: str, d: Degree, p: Degree) -> bool:
        pre = p + d if kind == "uS" else p - d
        return pre <= self.p_max and p <= self.span

    def coeff(self, kind: str, d: Degree, dp: Degree, p: Degree, l: int):
        s = self.config.scalars
        if not (d.in_pi_lattice(nonzero=True) and dp.in_pi_lattice(nonzero=True)):
            raise ValueError(f"matching coefficients need d, d' in (pi/Theta)Z*, got {d}, {dp}")
        pre = p + d if kind == "uS" else p - d
        if l < 0 or not pre.in_P():
            return s.cplx(0)
        if not self.covers(kind, d, p):
            raise WindowError(f"c^{kind}[{d}, {dp}, {p}, {l}] lies outside the book window")
        return self.table(kind, dp).get((d, p, l), s.cplx(0))

    def max_l(self) -> int:
        return max((l for tab in self._tables.values() for (_, _, l) in tab), default=0)

    def rows(self, kind: str, seeds: Iterable[Degree], d_lo=None, d_hi=None) -> list:
        """Sorted rows (d, d', p, l, value) of the tables of ``seeds``."""
        out = []
        for dp in seeds:
            for (d, p, l), v in self.table(kind, dp).items():
                if (d_lo is None or d >= d_lo) and (d_hi is None or d <= d_hi):
                    out.append((d, dp, p, l, v))
        out.sort(key=lambda r: (r[1].value, r[0].value, r[2].value, r[3]))
        return out


def _parse_scalar(s, re: str, im: str):
    if s.mp is None:
        return complex(float(re), float(im))
    return s.mp.mpc(s.mp.mpf(re), s.mp.mpf(im))


def match_coeff(kind: str, d: Degree, dp: Degree, p: Degree, l: int, config: ProblemConfig):
    """A single matching coefficient, on the smallest window containing its pre-image cell."""
    lat = config.lattice
    p = _as_degree(lat, p)
    pre = p + d if kind == "uS" else p - d
    if kind not in ("uS", "Su"):
        raise ValueError(f"unknown kind {kind!r}")
    if not (d.in_pi_lattice(nonzero=True) and dp.in_pi_lattice(nonzero=True)):
        raise ValueError(f"matching coefficients need d, d' in (pi/Theta)Z*, got {d}, {dp}")
    if l < 0 or not pre.in_P():
        return config.scalars.cplx(0)
    return CoefficientBook(config, pre, p).coeff(kind, d, dp, p, l)


# ---------------------------------------------------------------- block matrices

@dataclass
class MatrixReport:
    bound: Degree
    l_max: int
    size: int
    qp_deviation: float
    pq_deviation: float
    q_diagonal_deviation: float
    p_diagonal_deviation: float
    indices: list = field(repr=False, default_factory=list)

    def passed(self, tol: float, diag_tol: float) -> bool:
        return self.qp_deviation < tol and self.q_diagonal_deviation < diag_tol

    def to_json(self) -> dict:
        return {"bound": self.bound.pair(), "l_max": self.l_max, "size": self.size,
                "qp_deviation": self.qp_deviation, "pq_deviation": self.pq_deviation,
                "q_diagonal_deviation": self.q_diagonal_deviation,
                "p_diagonal_deviation": self.p_diagonal_deviation}


def ledger_indices(lattice: Lattice, bound, l_max: int) -> list[tuple[Degree, Degree, int]]:
    """Triples (macro m, micro mu, l) with m, mu in P up to ``bound`` and mu - m in (pi/Theta)Z*.

    A far cell u(p, d) sits at (p, p + d), a corner cell S(p, d) at (p - d, p).
    """
    pts = lattice.P_upto(bound)
    out = []
    for m in pts:
        for mu in pts:
            if (mu - m).in_pi_lattice(nonzero=True):
                out.extend((m, mu, l) for l in range(l_max + 1))
    out.sort(key=lambda t: (t[0].value, t[1].value, t[2]))
    return out


def _natural(x: Degree) -> bool:
    return x.is_natural()


def matching_matrices_check(config: ProblemConfig, bound, l_max: int | None = None,
                            book: CoefficientBook | None = None, workers: int = 1) -> MatrixReport:
    """Assemble the maps S -> u (P) and u -> S (Q) on a closed window and test QP = I.

    Both maps couple an index only to indices with smaller or equal macro and
    micro exponents and smaller or equal l, so the truncated product is the
    exact restriction of the full one.
    """
    lat = config.lattice
    bound = _as_degree(lat, bound)
    book = book or CoefficientBook(config, bound, bound)
    pairs = ledger_indices(lat, bound, 0)
    seeds = sorted({mu - m for m, mu, _ in pairs}, key=lambda d: d.value)
    book.fill("uS", seeds, workers)
    book.fill("Su", seeds, workers)
    if l_max is None:
        l_max = max(1, book.max_l())
    idx = ledger_indices(lat, bound, l_max)
    pos = {key: i for i, key in enumerate(idx)}
    n = len(idx)
    P = np.zeros((n, n), dtype=complex)
    Q = np.zeros((n, n), dtype=complex)
    for i, (m, mu, l) in enumerate(idx):
        d = mu - m
        for j, (m2, mu2, l2) in enumerate(idx):
            if l2 > l or not _natural(m - m2) or not _natural(mu - mu2):
                continue
            d2 = mu2 - m2
            # u(p=m, d) <- S(p'=mu2, d2)
            P[i, j] = complex(book.coeff("uS", d, d2, m - mu2, l - l2))
            # S(p=mu, d) <- u(p'=m2, d2)
            Q[i, j] = complex(book.coeff("Su", d, d2, mu - m2, l - l2))
    eye = np.eye(n)
    qp = float(np.abs(Q @ P - eye).max()) if n else 0.0
    pq = float(np.abs(P @ Q - eye).max()) if n else 0.0
    qdiag = [abs(Q[pos[k], pos[k]] - 1) for k in idx if (k[1] - k[0]) > 0]
    pdiag = [abs(P[pos[k], pos[k]] - 1) for k in idx if (k[1] - k[0]) < 0]
    return MatrixReport(bound, l_max, n, qp, pq, float(max(qdiag, default=0.0)),
                        float(max(pdiag, default=0.0)), idx)


# ---------------------------------------------------------------- corner coefficients

def _pi_between(lat: Lattice, lo: Degree, hi: Degree) -> list[Degree]:
    return [d for d in lat.pi_lattice_between(lo.value - 1e-9, hi.value + 1e-9)
            if lo <= d <= hi]


def corner_coeff(d: Degree, dp: Degree, p: Degree, l: int, book: CoefficientBook,
                 profile: Mapping | None = None):
    """c^{u<-u}_{d,d',p,l} for d < 0.

    ``profile`` maps (d1, d2, n) with d1 < 0 < d2 to sigma_{d1} of the n-th
    corner profile attached to d2; ``None`` selects zero-profile mode.  The
    d1 > 0 part reduces to the product of the two matching tables.
    """
    lat = book.lattice
    s = book.config.scalars
    p = _as_degree(lat, p)
    if d.value >= 0 or not d.in_pi_lattice(nonzero=True):
        raise ValueError(f"corner coefficients need d in -(pi/Theta)N*, got {d}")
    if not dp.in_pi_lattice(nonzero=True):
        raise ValueError(f"d' must lie in (pi/Theta)Z*, got {dp}")
    total = s.cplx(0)
    if l < 0 or not (p - lat.pi_multiple(2)).in_P():
        return total
    missing = []
    n1 = 0
    while True:
        p1 = lat.integer(n1) - d
        if p1 > p:
            break
        rest = p - p1
        n = 0
        while lat.integer(2 * n) <= rest:
            p2 = rest - 2 * n
            if (p2 - dp).is_natural():
                if profile is not None:
                    total += _profile_line(d, dp, p1, p2, n, l, book, profile, missing)
                if n == 0:
                    total += _product_line(d, dp, p1, p2, l, book)
            n += 1
        n1 += 1
    if missing:
        raise DataGapError("corner profile cells (d1, d2, n)", sorted(set(missing)))
    return total


def _profile_line(d, dp, p1, p2, n, l, book, profile, missing):
    lat = book.lattice
    s = book.config.scalars
    acc = s.cplx(0)
    step = lat.pi_multiple(1)
    for d1 in _pi_between(lat, -p1, -step):
        if not (p1 + d1).is_natural():
            continue
        for d2 in _pi_between(lat, step, p2):
            if not (p2 - d2).is_natural():
                continue
            key = (d1, d2, n)
            if key not in profile:
                missing.append(tuple((tuple(x.pair()) if isinstance(x, Degree) else x) for x in key))
                continue
            w = profile[key]
            if w == 0:
                continue
            for l1 in range(l + 1):
                a = book.coeff("uS", d, d1, p1, l1)
                if a == 0:
                    continue
                acc += a * w * book.coeff("Su", d2, dp, p2, l - l1)
    return acc


def _product_line(d, dp, p1, p2, l, book):
    lat = book.lattice
    s = book.config.scalars
    acc = s.cplx(0)
    for d1 in _pi_between(lat, lat.pi_multiple(1), p2):
        if not ((p1 + d1).is_natural() and (p2 - d1).is_natural()):
            continue
        for l1 in range(l + 1):
            a = book.coeff("uS", d, d1, p1, l1)
            if a == 0:
                continue
            acc += a * book.coeff("Su", d1, dp, p2, l - l1)
    return acc


# ---------------------------------------------------------------- layer correctors

def tangent_coeff(n: int) -> Fraction:
    """T_n with tan t = sum T_n t^{2n+1}, from (2n+1) T_n = [n=0] + sum_{i+j=n-1} T_i T_j."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    T: list[Fraction] = []
    for k in range(n + 1):
        acc = Fraction(1 if k == 0 else 0)
        acc += sum((T[i] * T[k - 1 - i] for i in range(k)), Fraction(0))
        T.append(acc / (2 * k + 1))
    return T[n]


def _double_primitive(c: list) -> list:
    """Coefficients of the primitive of the primitive, both vanishing at 0."""
    zero = 0 * c[0] if c else 0
    return [zero, zero] + [x / ((k + 1) * (k + 2)) for k, x in enumerate(c)]


def _peval(c: list, y):
    acc = 0 * y
    for x in reversed(c):
        acc = acc * y + x
    return acc


def layer_correctors(n_max: int, mu_ratio=Fraction(1)) -> list[list]:
    """Ascending Y-coefficients of U_0, ..., U_{n_max}.

    U_0'' = 0, U_0'(0) = mu_ratio, U_0(-1) = 0 and for n >= 1
    U_n'' = -U_{n-1}, U_n'(0) = 0, U_n(-1) = 0.  The arithmetic follows the
    type of ``mu_ratio`` (Fraction gives exact polynomials, float gives floats).
    """
    one = type(mu_ratio)(1)
    V = [one, one]
    out = [[mu_ratio * x for x in V]]
    for _ in range(n_max):
        A = _double_primitive([-x for x in V])
        A[0] = A[0] - _peval(A, -one)
        V = A
        out.append([mu_ratio * x for x in V])
    return out


def layer_corrector(n: int, mu_ratio=Fraction(1)) -> list:
    return layer_correctors(n, mu_ratio)[n]


def layer_field_from_traces(traces: list[GammaPart], config: ProblemConfig) -> dict[Degree, PolyTY]:
    """Sum over n of traces[n](x) * U_n(Y), as a layer part {d: PolyTY}."""
    s = config.scalars
    if not traces:
        return {}
    U = layer_correctors(len(traces) - 1, config.mu_ratio_exact)
    out: dict[Degree, PolyTY] = {}
    for g, Un in zip(traces, U):
        yc = [s.real(c) for c in Un]
        for d, P in g.items():
            term = PolyTY.from_T(P, yc)
            out[d] = out[d] + term if d in out else term
    return {d: Q for d, Q in sorted(out.items(), key=lambda t: t[0].value) if Q}


def layer_field(dy_traces: Mapping[Degree, GammaPart], p: Degree, config: ProblemConfig) -> dict:
    """U_p from the normal derivatives dy u_{p'} on the interface.

    ``dy_traces`` maps p' to the interface data of d_y u_{p', l}; the n-th term
    uses (d_x^2 + k1^2)^n applied to the entry at p' = p - 1 - 2n.
    """
    lat = config.lattice
    traces = []
    n = 0
    while True:
        pp = p - 1 - 2 * n
        if pp < lat.zero:
            break
        g = dy_traces.get(pp, {})
        for _ in range(n):
            g = gamma_add(dxx_gamma(g), gamma_scale(g, config.k1_sq))
        traces.append(g)
        n += 1
    return layer_field_from_traces(traces, config)


# ---------------------------------------------------------------- sigma ledger

FIELDS = ("far", "corner")
PROVENANCE = ("computed", "ingested", "zero-by-lattice")
LEDGER_HEADER = ["field", "p_a", "p_b", "d_a", "d_b", "l", "re", "im", "provenance"]


class SigmaLedger:
    """Sparse table {(field, p, d, l): sigma value} with provenance per cell."""

    def __init__(self, lattice: Lattice):
        self.lattice = lattice
        self.values: dict[tuple[str, Degree, Degree, int], object] = {}
        self.provenance: dict[tuple[str, Degree, Degree, int], str] = {}

    def __len__(self) -> int:
        return len(self.values)

    def set(self, fld: str, p: Degree, d: Degree, l: int, value, provenance: str = "ingested") -> None:
        if fld not in FIELDS:
            raise ValueError(f"unknown field {fld!r}")
        if provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {provenance!r}")
        key = (fld, p, d, l)
        self.values[key] = value
        self.provenance[key] = provenance

    def get(self, fld: str, p: Degree, d: Degree, l: int, default=0):
        return self.values.get((fld, p, d, l), default)

    def __contains__(self, key) -> bool:
        return key in self.values

    def items(self):
        return sorted(self.values.items(),
                      key=lambda kv: (kv[0][0], kv[0][1].value, kv[0][2].value, kv[0][3]))

    def support_violations(self) -> list:
        """Nonzero cells off their admissible lattice."""
        bad = []
        for (fld, p, d, l), v in self.values.items():
            if v == 0:
                continue
            ok = p.in_P() and d.in_pi_lattice(nonzero=True) and l >= 0
            ok = ok and ((p + d).in_P() if fld == "far" else (p - d).in_P())
            if not ok:
                bad.append((fld, p.pair(), d.pair(), l))
        return bad

    def restrict(self, fld: str, p: Degree, l: int) -> dict[Degree, object]:
        return {d: v for (f, pp, d, ll), v in self.values.items() if f == fld and pp == p and ll == l}

    # text forms
    def to_csv(self, header_lines: Iterable[str] = ()) -> str:
        s = self.lattice.scalars
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LEDGER_HEADER)
        for (fld, p, d, l), v in self.items():
            w.writerow([fld, p.a, p.b, d.a, d.b, l, s.fmt(v.real), s.fmt(v.imag),
                        self.provenance[(fld, p, d, l)]])
        return buf.getvalue()

    def to_json(self) -> dict:
        s = self.lattice.scalars
        return {"cells": [{"field": fld, "p": p.pair(), "d": d.pair(), "l": l,
                           "value": [s.fmt(v.real), s.fmt(v.imag)],
                           "provenance": self.provenance[(fld, p, d, l)]}
                          for (fld, p, d, l), v in self.items()]}

    @classmethod
    def from_rows(cls, lattice: Lattice, rows: Iterable[Mapping]) -> "SigmaLedger":
        s = lattice.scalars
        led = cls(lattice)
        for r in rows:
            try:
                key = (r["field"], lattice.deg(int(r["p_a"]), int(r["p_b"])),
                       lattice.deg(int(r["d_a"]), int(r["d_b"])), int(r["l"]))
                v = _parse_scalar(s, r["re"], r["im"])
            except (KeyError, ValueError) as exc:
                raise ValueError(f"bad ledger row {dict(r)}: {exc}") from None
            led.set(*key, v, r.get("provenance") or "ingested")
        return led

    @classmethod
    def read(cls, lattice: Lattice, path: str | Path) -> "SigmaLedger":
        """Ledger from CSV (header field,p_a,p_b,d_a,d_b,l,re,im) or from JSON."""
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".json":
            data = json.loads(text)
            rows = [{"field": c["field"], "p_a": c["p"][0], "p_b": c["p"][1],
                     "d_a": c["d"][0], "d_b": c["d"][1], "l": c["l"],
                     "re": c["value"][0], "im": c["value"][1],
                     "provenance": c.get("provenance")} for c in data["cells"]]
            return cls.from_rows(lattice, rows)
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        return cls.from_rows(lattice, csv.DictReader(lines))


def read_profile(lattice: Lattice, path: str | Path) -> dict:
    """Corner-profile table {(d1, d2, n): value} from CSV d1_a,d1_b,d2_a,d2_b,n,re,im or JSON."""
    s = lattice.scalars
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        rows = json.loads(text)["cells"]
        rows = [{"d1_a": r["d1"][0], "d1_b": r["d1"][1], "d2_a": r["d2"][0], "d2_b": r["d2"][1],
                 "n": r["n"], "re": r["value"][0], "im": r["value"][1]} for r in rows]
    else:
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        rows = list(csv.DictReader(lines))
    out = {}
    for r in rows:
        key = (lattice.deg(int(r["d1_a"]), int(r["d1_b"])), lattice.deg(int(r["d2_a"]), int(r["d2_b"])),
               int(r["n"]))
        out[key] = _parse_scalar(s, r["re"], r["im"])
    return out


# ---------------------------------------------------------------- ingestion

class Ingest(Protocol):
    """Source of the variational cells: far d > 0 and corner d < 0.

    Each method returns the value, or None when the cell is unavailable.
    The ledger argument holds every cell settled so far.
    """

    def far(self, p: Degree, d: Degree, l: int, ledger: SigmaLedger): ...

    def corner(self, p: Degree, d: Degree, l: int, ledger: SigmaLedger): ...


class ZeroIngest:
    """Every variational cell is zero."""

    def far(self, p, d, l, ledger):
        return 0

    def corner(self, p, d, l, ledger):
        return 0


class TableIngest:
    """Variational cells read from a ledger; absent cells are gaps unless ``missing_zero``."""

    def __init__(self, table: SigmaLedger, missing_zero: bool = False):
        self.table = table
        self.missing_zero = missing_zero

    def _lookup(self, fld, p, d, l):
        v = self.table.get(fld, p, d, l, None)
        if v is None and self.missing_zero:
            return 0
        return v

    def far(self, p, d, l, ledger):
        return self._lookup("far", p, d, l)

    def corner(self, p, d, l, ledger):
        return self._lookup("corner", p, d, l)


class ProfileCornerIngest:
    """Corner cells d1 < 0 rebuilt from corner profiles:

    sigma_{d1}(S_{p,l}) = sum over n >= 0 and d2 > 0 of sigma_{d2}(S_{p-2n,l}) * profile[d1, d2, n].
    Far cells come from ``far_source``.
    """

    def __init__(self, profile: Mapping, far_source=None):
        self.profile = profile
        self.far_source = far_source or ZeroIngest()

    def far(self, p, d, l, ledger):
        return self.far_source.far(p, d, l, ledger)

    def corner(self, p, d, l, ledger):
        lat = ledger.lattice
        acc = 0
        n = 0
        while lat.integer(2 * n) <= p:
            q = p - 2 * n
            for (fld, pp, d2, ll), v in ledger.values.items():
                if fld == "corner" and pp == q and ll == l and d2.value > 0 and v != 0:
                    w = self.profile.get((d, d2, n))
                    if w is None:
                        return None
                    acc = acc + v * w
            n += 1
        return acc


# ---------------------------------------------------------------- sigma recursion

def sigma_recursion(ledger: SigmaLedger, up_to, config: ProblemConfig, ingest: Ingest,
                    l_max: int = 1, book: CoefficientBook | None = None) -> SigmaLedger:
    """Fill every cell with p <= up_to, by increasing p then l.

    Singular cells (far d < 0, corner d > 0) come from the matching
    convolutions; variational cells (far d > 0 with p + d <= up_to, corner
    d < 0 with p - d <= up_to) are requested from ``ingest``.  Missing
    variational cells are collected and reported together.
    """
    lat = config.lattice
    up_to = _as_degree(lat, up_to)
    book = book or CoefficientBook(config, up_to, up_to)
    zero = config.scalars.cplx(0)
    levels = lat.P_upto(up_to)
    step = lat.pi_multiple(1)
    gaps: list[tuple] = []
    for p in levels:
        for l in range(l_max + 1):
            # far singular cells: d in -(pi/Theta)N*, d >= -p
            for d in _pi_between(lat, -p, -step):
                val, used = zero, False
                for pp in lat.interval(lat.zero, p + d):
                    for c in lat.interval(lat.zero, p):
                        dp = pp - c
                        if not dp.in_pi_lattice(nonzero=True):
                            continue
                        for lp in range(l + 1):
                            sv = ledger.get("corner", pp, dp, lp, 0)
                            used = True
                            if sv != 0:
                                val += book.coeff("uS", d, dp, p - pp, l - lp) * sv
                ledger.set("far", p, d, l, val, "computed" if used else "zero-by-lattice")
            # corner singular cells: d in (pi/Theta)N*, d <= p
            for d in _pi_between(lat, step, p):
                val, used = zero, False
                for pp in lat.interval(lat.zero, p - d):
                    for c in lat.interval(lat.zero, p):
                        dp = c - pp
                        if not dp.in_pi_lattice(nonzero=True):
                            continue
                        for lp in range(l + 1):
                            uv = ledger.get("far", pp, dp, lp, 0)
                            used = True
                            if uv != 0:
                                val += book.coeff("Su", d, dp, p - pp, l - lp) * uv
                ledger.set("corner", p, d, l, val, "computed" if used else "zero-by-lattice")
        for l in range(l_max + 1):
            # corner variational cells: d < 0 with p - d <= up_to
            for d in _pi_between(lat, p - up_to, -step):
                if ("corner", p, d, l) in ledger and ledger.provenance[("corner", p, d, l)] == "ingested":
                    continue
                v = ingest.corner(p, d, l, ledger)
                if v is None:
                    gaps.append(("corner", p.pair(), d.pair(), l))
                    v = zero
                ledger.set("corner", p, d, l, config.scalars.cplx(v), "ingested")
            # far variational cells: d > 0 with p + d <= up_to
            for d in _pi_between(lat, step, up_to - p):
                if ("far", p, d, l) in ledger and ledger.provenance[("far", p, d, l)] == "ingested":
                    continue
                v = ingest.far(p, d, l, ledger)
                if v is None:
                    gaps.append(("far", p.pair(), d.pair(), l))
                    v = zero
                ledger.set("far", p, d, l, config.scalars.cplx(v), "ingested")
    if gaps:
        raise DataGapError("ledger cells (field, p, d, l)", gaps)
    return ledger


# ---------------------------------------------------------------- total series

def _seed(ledger: SigmaLedger, fld: str, window: Window, orientation: str) -> GradedSeries:
    cells = []
    for (f, p, d, l), v in ledger.items():
        if f == fld and v != 0 and window.contains(p, d):
            cells.append(((p, d, l), phi(d).scale(v)))
    return GradedSeries(ledger.lattice, cells, orientation, window)


def build_u0_series(ledger: SigmaLedger, window: Window, config: ProblemConfig,
                    max_cells: int = 200_000) -> GradedSeries:
    """<R+> applied to the sum of sigma_d(u_{p,l}) phi_d over the far cells of the ledger."""
    if window.sense != 1:
        raise WindowError("the far-field series needs a window with sense +1")
    seed = _seed(ledger, "far", window, "plus")
    return geometric_series(build_Rplus(config), seed, window, max_cells=max_cells)


def build_Sinf_series(ledger: SigmaLedger, window: Window, config: ProblemConfig,
                      max_cells: int = 200_000) -> GradedSeries:
    """<R-> applied to the sum of sigma_d(S_{p,l}) phi_d over the corner cells of the ledger."""
    if window.sense != -1:
        raise WindowError("the corner series needs a window with sense -1")
    seed = _seed(ledger, "corner", window, "minus")
    return geometric_series(build_Rminus(config), seed, window, max_cells=max_cells)


# ---------------------------------------------------------------- graded residuals

def _omega(e: PiElement) -> PiElement:
    return e.omega_only()


def _lam_elem(lat: Lattice, part: dict) -> PiElement:
    return PiElement(lat, (), part)


def graded_residual(series: GradedSeries, config: ProblemConfig) -> dict:
    """Largest coefficient of each graded Helmholtz equation over the window.

    Only equations whose every term lies inside the window are checked, so
    the result measures the algebra, not the truncation.
    """
    lat = series.lattice
    s = config.scalars
    mu0, mu1 = s.real(config.mu0), s.real(config.mu1)
    w2 = s.cplx(config.omega) ** 2
    mass0, mass1 = w2 * s.real(config.rho0), w2 * s.real(config.rho1)
    two, one, z = lat.integer(2), lat.integer(1), lat.zero

    def lap(e):
        return laplacian_omega(e).scale(mu0)

    def m0(e):
        return _omega(e).scale(mass0)

    def dyy(e):
        return _lam_elem(lat, dyy_lambda(e)).scale(mu1)

    def dxx(e):
        return _lam_elem(lat, dxx_lambda(e)).scale(mu1)

    def m1(e):
        return _lam_elem(lat, e.lam).scale(mass1)

    def ny(e):
        return dy_lambda_at0(e)

    def ny_plus(e):
        return dy_gamma_plus(e)

    if series.orientation == "plus":
        equations = {
            "omega": [(z, two, lap), (z, z, m0)],
            "lambda": [(z, z, dyy), (-two, two, dxx), (-two, z, m1)],
        }
        gamma = [(z, z, mu1, ny), (-one, one, -mu0, ny_plus)]
    elif series.orientation == "minus":
        equations = {
            "omega": [(z, two, lap), (-two, z, m0)],
            "lambda": [(z, z, dyy), (z, two, dxx), (-two, z, m1)],
        }
        gamma = [(z, z, mu1, ny), (z, one, -mu0, ny_plus)]
    else:
        raise ValueError("graded_residual needs an oriented series")

    window = series.window
    keys = list(series.cells)
    report = {"omega": 0.0, "lambda": 0.0, "gamma": 0.0, "continuity": 0.0, "checked": 0}

    def inside(p, d):
        return window is None or window.contains(p, d)

    def targets(terms):
        out = set()
        for p, d, l in keys:
            for dp_, dd, *_ in terms:
                out.add((p - dp_, d - dd, l))
        return sorted(out, key=lambda t: (t[0].value, t[1].value, t[2]))

    for name, terms in equations.items():
        for p, d, l in targets(terms):
            if not all(inside(p + a, d + b) for a, b, _ in terms):
                continue
            total = PiElement.zero(lat)
            for a, b, f in terms:
                total = total + f(series.get(p + a, d + b, l))
            report[name] = max(report[name], total.max_abs())
            report["checked"] += 1
    for p, d, l in targets(gamma):
        if not all(inside(p + a, d + b) for a, b, _, _ in gamma):
            continue
        g = gamma_add(*[gamma_scale(f(series.get(p + a, d + b, l)), c) for a, b, c, f in gamma])
        report["gamma"] = max([report["gamma"]] + [Q.max_abs() for Q in g.values()])
        report["checked"] += 1
    for _, e in series:
        g = continuity_defect(e)
        report["continuity"] = max([report["continuity"]] + [Q.max_abs() for Q in g.values()])
    return report


# ---------------------------------------------------------------- table export

TABLE_HEADER = ["d_a", "d_b", "dp_a", "dp_b", "p_a", "p_b", "l", "re", "im"]


def write_table(rows: list, scalars, header_lines: Iterable[str] = ()) -> tuple[str, dict]:
    """CSV text and JSON document of coefficient rows (d, d', p, l, value)."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    entries = []
    for d, dp, p, l, v in rows:
        re, im = scalars.fmt(v.real), scalars.fmt(v.imag)
        w.writerow([d.a, d.b, dp.a, dp.b, p.a, p.b, l, re, im])
        entries.append({"d": d.pair(), "dp": dp.pair(), "p": p.pair(), "l": l, "value": [re, im]})
    return buf.getvalue(), {"entries": entries}
