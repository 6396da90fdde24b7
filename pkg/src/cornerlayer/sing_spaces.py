"""Singularity functions on the sector, the layer and the interface.

An element of the glued space is stored as

* an Omega part ``{(q, k): P}`` meaning the sum of Im[(az)^q conj(az)^k P(log az)]
  with a = alpha = exp(-i Theta) and log(az) = ln r + i(theta - Theta);
* a Lambda part ``{d: Q}`` meaning the sum of x^d Q(ln x, Y).

Complex polynomials are read through complexification: the imaginary part
``Im`` acts on the real and the imaginary coefficient parts separately.
Interface data (functions of x alone on the line y = 0) are plain dicts
``{d: Poly}`` meaning x^d Q(ln x).
"""
from __future__ import annotations

from typing import Iterable, Mapping

from .coeff_field import (
    Degree,
    Lattice,
    Poly,
    PolyTY,
    falling_shift,
    shifted_power,
    twisted_im,
)

__all__ = [
    "PiElement",
    "GammaPart",
    "normalize",
    "phi",
    "sigma_d",
    "trace_gamma",
    "evaluate",
    "gamma_add",
    "gamma_scale",
    "evaluate_gamma",
    "continuity_defect",
]

OmegaKey = tuple[Degree, int]
GammaPart = dict  # {Degree: Poly}


def _accumulate(target: dict, key, value) -> None:
    if key in target:
        target[key] = target[key] + value
    else:
        target[key] = value


def normalize(terms: Iterable[tuple[OmegaKey, Poly]]) -> dict[OmegaKey, Poly]:
    """Canonical Omega part: every term satisfies "q not in N, or q > k, or P(0) = 0".

    A constant c sitting at (q, k) with q in N and q < k is moved to (k, q)
    with the opposite sign; at q = k it is dropped since Im[r^{2q} c] = 0.
    """
    raw: dict[OmegaKey, Poly] = {}
    for key, P in terms:
        if P:
            _accumulate(raw, key, P)
    out: dict[OmegaKey, Poly] = {}
    for (q, k), P in raw.items():
        if q.is_natural() and q.a <= k and P and P[0] != 0:
            c = P[0]
            P = P - Poly.const(c)
            if q.a < k:
                _accumulate(out, (q.lattice.integer(k), q.a), Poly.const(-c))
        if P:
            _accumulate(out, (q, k), P)
    return {key: P for key, P in sorted(out.items(), key=_omega_order) if P}


def _omega_order(item):
    (q, k), _ = item
    return ((q + k).value, q.value, k)


class PiElement:
    """Finite sum of canonical singularity terms on the sector and the layer.

    Instances are treated as immutable; every operation returns a new element.
    """

    __slots__ = ("lattice", "omega", "lam")

    def __init__(self, lattice: Lattice, omega: Mapping | Iterable = (),
                 lam: Mapping | Iterable = (), *, canonical: bool = False):
        self.lattice = lattice
        items = omega.items() if isinstance(omega, Mapping) else omega
        self.omega: dict[OmegaKey, Poly] = dict(items) if canonical else normalize(items)
        lam_items = lam.items() if isinstance(lam, Mapping) else lam
        acc: dict[Degree, PolyTY] = {}
        for d, Q in lam_items:
            if Q:
                _accumulate(acc, d, Q)
        self.lam = {d: Q for d, Q in sorted(acc.items(), key=lambda t: t[0].value) if Q}

    # construction helpers
    @classmethod
    def zero(cls, lattice: Lattice) -> "PiElement":
        return cls(lattice, canonical=True)

    def __bool__(self) -> bool:
        return bool(self.omega or self.lam)

    def __repr__(self) -> str:
        om = ", ".join(f"({q},{k}):{list(map(complex, P.c))}" for (q, k), P in self.omega.items())
        la = ", ".join(f"{d}:{ {k: complex(v) for k, v in Q.items()} }" for d, Q in self.lam.items())
        return f"PiElement(omega={{{om}}}, lam={{{la}}})"

    def __add__(self, other: "PiElement") -> "PiElement":
        return PiElement(self.lattice, list(self.omega.items()) + list(other.omega.items()),
                         list(self.lam.items()) + list(other.lam.items()))

    def __sub__(self, other: "PiElement") -> "PiElement":
        return self + other.scale(-1)

    def __neg__(self) -> "PiElement":
        return self.scale(-1)

    def scale(self, s) -> "PiElement":
        if s == 0:
            return PiElement.zero(self.lattice)
        return PiElement(self.lattice, {k: P.scale(s) for k, P in self.omega.items()},
                         {d: Q.scale(s) for d, Q in self.lam.items()}, canonical=True)

    def omega_only(self) -> "PiElement":
        return PiElement(self.lattice, self.omega, canonical=True)

    def map_polys(self, fP, fQ) -> "PiElement":
        """Apply fP to every Omega polynomial and fQ to every Lambda polynomial, renormalising."""
        return PiElement(self.lattice, [(k, fP(P)) for k, P in self.omega.items()],
                         [(d, fQ(Q)) for d, Q in self.lam.items()])

    # grading
    def grades(self) -> list[Degree]:
        gs = {q + k for q, k in self.omega} | set(self.lam)
        return sorted(gs)

    def grade_part(self, d: Degree) -> "PiElement":
        return PiElement(self.lattice, {key: P for key, P in self.omega.items() if key[0] + key[1] == d},
                         {g: Q for g, Q in self.lam.items() if g == d}, canonical=True)

    def is_homogeneous(self, d: Degree) -> bool:
        return all(g == d for g in self.grades())

    def max_abs(self) -> float:
        return max([P.max_abs() for P in self.omega.values()] +
                   [Q.max_abs() for Q in self.lam.values()], default=0.0)

    def t_degree(self) -> int:
        """Largest power of T appearing anywhere (-1 for the zero element)."""
        return max([P.deg for P in self.omega.values()] +
                   [Q.deg_T for Q in self.lam.values()], default=-1)

    # linear forms and traces
    def sigma(self, d: Degree):
        return sigma_d(self, d)

    def trace_gamma(self) -> GammaPart:
        return trace_gamma(self)

    def lambda_at(self, y) -> GammaPart:
        out: GammaPart = {}
        for d, Q in self.lam.items():
            P = Q.at_Y(y)
            if P:
                out[d] = P
        return out

    def eval(self, region: str, u: float, v: float, deriv: tuple[int, int] = (0, 0)):
        return evaluate(self, region, u, v, deriv)

    # comparison and serialisation
    def distance(self, other: "PiElement") -> float:
        """Largest coefficient of the difference, in absolute value."""
        return (self - other).max_abs()

    def to_json(self) -> dict:
        s = self.lattice.scalars
        return {
            "omega": [{"q": q.pair(), "k": k, "P": [_cjson(s, x) for x in P]}
                      for (q, k), P in self.omega.items()],
            "lambda": [{"d": d.pair(), "Q": [[i, j, *_cjson(s, x)] for (i, j), x in Q.items()]}
                       for d, Q in self.lam.items()],
        }

    @classmethod
    def from_json(cls, lattice: Lattice, data: dict) -> "PiElement":
        s = lattice.scalars
        omega = [((lattice.deg(*t["q"]), int(t["k"])), Poly(_cparse(s, x) for x in t["P"]))
                 for t in data.get("omega", [])]
        lam = [(lattice.deg(*t["d"]), PolyTY(((int(i), int(j)), _cparse(s, (re, im)))
                                             for i, j, re, im in t["Q"]))
               for t in data.get("lambda", [])]
        return cls(lattice, omega, lam)


def _cjson(s, x) -> list:
    if s.mp is None:
        return [float(x.real), float(x.imag)]
    return [s.fmt(x.real), s.fmt(x.imag)]


def _cparse(s, pair):
    re, im = pair
    return s.cplx(complex(float(re), float(im))) if s.mp is None \
        else s.mp.mpc(s.mp.mpf(re), s.mp.mpf(im))


def phi(d: Degree) -> PiElement:
    """Im[(az)^d] on the sector, extended by zero in the layer (d a nonzero multiple of pi/Theta)."""
    if not d.in_pi_lattice(nonzero=True):
        raise ValueError(f"phi_d needs d in (pi/Theta)Z*, got {d}")
    one = d.lattice.scalars.cplx(1)
    return PiElement(d.lattice, {(d, 0): Poly.const(one)}, canonical=True)


def sigma_d(e: PiElement, d: Degree):
    """P(0) of the (q = d, k = 0) term of the canonical form."""
    if not d.in_pi_lattice(nonzero=True):
        raise ValueError(f"sigma_d needs d in (pi/Theta)Z*, got {d}")
    P = e.omega.get((d, 0))
    return P[0] if P else e.lattice.scalars.cplx(0)


def trace_gamma(e: PiElement) -> GammaPart:
    """Omega part restricted to theta = 0: x^{q+k} Im[alpha^{q-k} P(T - i Theta)]."""
    lat = e.lattice
    s = lat.scalars
    shift = s.cplx(-1j) * lat.theta
    out: GammaPart = {}
    for (q, k), P in e.omega.items():
        Q = twisted_im(P, lat.alpha_power(q - k), shift, s)
        if Q:
            _accumulate(out, q + k, Q)
    return {d: Q for d, Q in out.items() if Q}


def gamma_add(*parts: GammaPart) -> GammaPart:
    out: GammaPart = {}
    for g in parts:
        for d, Q in g.items():
            _accumulate(out, d, Q)
    return {d: Q for d, Q in sorted(out.items(), key=lambda t: t[0].value) if Q}


def gamma_scale(g: GammaPart, s) -> GammaPart:
    return {d: Q.scale(s) for d, Q in g.items() if Q.scale(s)}


def continuity_defect(e: PiElement) -> GammaPart:
    """Omega trace minus Lambda value at Y = 0; zero for members of the glued space."""
    return gamma_add(trace_gamma(e), gamma_scale(e.lambda_at(0), -1))


# ---------------------------------------------------------------- evaluation

def _im_parts(P: Poly, f, s):
    """Complexified Im: Im f(Re P) + i Im f(Im P), f linear and real."""
    return s.cplx(f(P.real_part()).imag) + s.cplx(1j) * f(P.imag_part()).imag


def evaluate(e: PiElement, region: str, u, v, deriv: tuple[int, int] = (0, 0)):
    """Value of d_r^j d_theta^m (region "omega", point (r, theta)) or
    d_x^j d_Y^m (region "lambda", point (x, Y)) at the given point."""
    j, m = deriv
    lat = e.lattice
    s = lat.scalars
    if region == "omega":
        r, theta = s.real(u), s.real(v)
        if r <= 0:
            raise ValueError("r must be positive")
        lnr = s.log(r)
        ph = theta - lat.theta
        L = s.cplx(lnr) + s.cplx(1j) * ph
        total = s.cplx(0)
        for (q, k), P in e.omega.items():
            g = (q + k).scalar
            nu = (q - k).scalar
            front = s.exp((g - j) * lnr) * s.expi(nu * ph) * s.cplx(1j) ** m

            def f(Pp, g=g, nu=nu, front=front):
                F = falling_shift(shifted_power(Pp.cplx(s), nu, m), g, j)
                return front * F(L)

            total += _im_parts(P, f, s)
        return total
    if region == "lambda":
        x, Y = s.real(u), s.real(v)
        if x <= 0:
            raise ValueError("x must be positive")
        lnx = s.log(x)
        total = s.cplx(0)
        for d, Q in e.lam.items():
            g = d.scalar
            R = Q
            for i in range(j):
                R = R.scale(g - i) + R.dT()
            R = R.dY(m)
            total += s.exp((g - j) * lnx) * R(lnx, Y)
        return total
    raise ValueError(f"unknown region {region!r}")


def evaluate_gamma(g: GammaPart, lattice: Lattice, x, j: int = 0):
    """d_x^j of sum x^d Q(ln x) at x."""
    s = lattice.scalars
    x = s.real(x)
    if x <= 0:
        raise ValueError("x must be positive")
    lnx = s.log(x)
    total = s.cplx(0)
    for d, Q in g.items():
        gv = d.scalar
        total += s.exp((gv - j) * lnx) * falling_shift(Q, gv, j)(lnx)
    return total
