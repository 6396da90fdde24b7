"""Exact degree lattice, scalar backends and the two polynomial types.

Degrees live on the lattice Z + (pi/Theta) Z and are stored as integer pairs
(a, b) meaning a + b*pi/Theta.  When Theta is declared as pi*n/m the pair is
reduced so that 0 <= b < n, which makes equality a plain tuple comparison.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable

import mpmath

__all__ = [
    "Scalars",
    "Lattice",
    "Degree",
    "Poly",
    "PolyTY",
    "rim_solve",
    "ode_solve_first_order",
]


# ---------------------------------------------------------------- scalars

class Scalars:
    """Arithmetic backend: binary64 (``double``) or 113-bit mpmath (``extended``)."""

    def __init__(self, precision: str = "double"):
        if precision not in ("double", "extended"):
            raise ValueError(f"unknown precision {precision!r}")
        self.precision = precision
        if precision == "extended":
            self.mp = mpmath.MPContext()
            self.mp.prec = 113
        else:
            self.mp = None

    def __repr__(self) -> str:
        return f"Scalars({self.precision!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Scalars) and other.precision == self.precision

    def __hash__(self) -> int:
        return hash(self.precision)

    def __getstate__(self):
        return {"precision": self.precision}

    def __setstate__(self, state):
        self.__init__(state["precision"])

    # conversions
    def real(self, x):
        if self.mp is None:
            if isinstance(x, Fraction):
                return x.numerator / x.denominator
            return float(x)
        if isinstance(x, Fraction):
            return self.mp.mpf(x.numerator) / x.denominator
        if isinstance(x, str):
            return self.mp.mpf(x)
        return self.mp.mpf(x)

    def cplx(self, x):
        if self.mp is None:
            if isinstance(x, Fraction):
                return complex(x.numerator / x.denominator)
            return complex(x)
        if isinstance(x, Fraction):
            return self.mp.mpc(self.mp.mpf(x.numerator) / x.denominator)
        if isinstance(x, complex):
            return self.mp.mpc(x.real, x.imag)
        return self.mp.mpc(x)

    @property
    def pi(self):
        return math.pi if self.mp is None else +self.mp.pi

    def sqrt(self, z):
        return cmath.sqrt(z) if self.mp is None else self.mp.sqrt(z)

    def exp(self, z):
        return cmath.exp(z) if self.mp is None else self.mp.exp(z)

    def log(self, x):
        return math.log(x) if self.mp is None else self.mp.log(x)

    def cos(self, x):
        return math.cos(x) if self.mp is None else self.mp.cos(x)

    def sin(self, x):
        return math.sin(x) if self.mp is None else self.mp.sin(x)

    def expi(self, x):
        """e^{i x} for real x."""
        return self.cplx(complex(math.cos(x), math.sin(x))) if self.mp is None \
            else self.mp.expj(x)

    def expi_pi(self, t: Fraction):
        """e^{i pi t} for rational t, exact on quarter turns."""
        t = t % 2
        exact = {Fraction(0): 1, Fraction(1, 2): 1j, Fraction(1): -1, Fraction(3, 2): -1j}
        if t in exact:
            return self.cplx(exact[t])
        if self.mp is None:
            return complex(math.cos(math.pi * t), math.sin(math.pi * t))
        x = self.mp.pi * self.real(t)
        return self.mp.mpc(self.mp.cos(x), self.mp.sin(x))

    def to_complex(self, z) -> complex:
        return complex(z)

    def fmt(self, x) -> str:
        """Deterministic text form of a real scalar for exports."""
        if self.mp is None:
            return repr(float(x))
        return self.mp.nstr(x, 34, strip_zeros=False)


# ---------------------------------------------------------------- lattice

class Lattice:
    """Sector geometry: the opening angle Theta and the degree lattice it induces.

    ``Lattice.rational(n, m)`` declares Theta = pi*n/m exactly; ``Lattice(theta)``
    treats Theta/pi as irrational, so Z and (pi/Theta)Z meet only at 0.
    """

    def __init__(self, theta: float | None = None, *, ratio: tuple[int, int] | None = None,
                 precision: str = "double"):
        self.scalars = Scalars(precision)
        if ratio is not None:
            n, m = ratio
            g = math.gcd(n, m)
            n, m = n // g, m // g
            if n <= 0 or m <= 0 or Fraction(n, m) >= 2:
                raise ValueError("Theta must lie in (0, 2*pi)")
            self.ratio: tuple[int, int] | None = (n, m)
            self.theta = self.scalars.pi * n / m
        else:
            if theta is None or not 0 < float(theta) < 2 * math.pi:
                raise ValueError("Theta must lie in (0, 2*pi)")
            self.ratio = None
            self.theta = self.scalars.real(theta)
        if self.ratio:
            self.pi_over_theta = self.scalars.real(Fraction(self.ratio[1], self.ratio[0]))
        else:
            self.pi_over_theta = self.scalars.pi / self.theta

    @classmethod
    def rational(cls, n: int, m: int, precision: str = "double") -> "Lattice":
        return cls(ratio=(n, m), precision=precision)

    @property
    def is_rational(self) -> bool:
        return self.ratio is not None

    def key(self):
        return ("rational", self.ratio) if self.ratio else ("radians", repr(float(self.theta)))

    def __repr__(self) -> str:
        if self.ratio:
            return f"Lattice(pi*{self.ratio[0]}/{self.ratio[1]})"
        return f"Lattice({float(self.theta)!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Lattice) and self.key() == other.key() \
            and self.scalars == other.scalars

    def __hash__(self) -> int:
        return hash(self.key())

    # construction
    def deg(self, a: int = 0, b: int = 0) -> "Degree":
        return Degree(a, b, self)

    def integer(self, a: int) -> "Degree":
        return Degree(a, 0, self)

    def pi_multiple(self, j: int) -> "Degree":
        return Degree(0, j, self)

    @property
    def zero(self) -> "Degree":
        return Degree(0, 0, self)

    def _reduce(self, a: int, b: int) -> tuple[int, int]:
        if self.ratio is None:
            return a, b
        n, m = self.ratio
        q, r = divmod(b, n)
        return a + q * m, r

    # exact and approximate values
    def exact(self, a: int, b: int) -> Fraction | None:
        if self.ratio is None:
            return None if b else Fraction(a)
        n, m = self.ratio
        return Fraction(a) + Fraction(b * m, n)

    def value(self, a: int, b: int) -> float:
        return a + b * float(self.pi_over_theta)

    def scalar_value(self, a: int, b: int):
        x = self.exact(a, b)
        if x is not None:
            return self.scalars.real(x)
        return self.scalars.real(a) + b * self.pi_over_theta

    def alpha_power(self, d: "Degree"):
        """alpha^d = exp(-i d Theta), exact whenever d Theta is a multiple of pi/2."""
        s = self.scalars
        if self.ratio is None:
            sign = -1 if d.b % 2 else 1
            if d.a == 0:
                return s.cplx(sign)
            return sign * s.expi(-d.a * self.theta)
        n, m = self.ratio
        return s.expi_pi(-(Fraction(d.a * n, m) + d.b))

    # enumerations
    def P_upto(self, bound: "Degree | int") -> list["Degree"]:
        """Elements of N + (pi/Theta) N not exceeding ``bound``, ascending."""
        if isinstance(bound, int):
            bound = self.integer(bound)
        out = set()
        step = float(self.pi_over_theta)
        top = bound.value + 1e-9
        for j in range(int(top / step) + 1):
            for i in range(int(top - j * step) + 1):
                d = self.deg(i, j)
                if d <= bound:
                    out.add(d)
        return sorted(out)

    def pi_lattice_between(self, lo: float, hi: float, nonzero: bool = True) -> list["Degree"]:
        """Multiples j*pi/Theta in [lo, hi] (j != 0 when ``nonzero``)."""
        step = float(self.pi_over_theta)
        j0 = math.ceil(lo / step - 1e-9)
        j1 = math.floor(hi / step + 1e-9)
        out = []
        for j in range(j0, j1 + 1):
            if nonzero and j == 0:
                continue
            d = self.pi_multiple(j)
            if lo - 1e-9 <= d.value <= hi + 1e-9:
                out.append(d)
        return out

    def interval(self, lo: "Degree", hi: "Degree") -> list["Degree"]:
        """The set {c : c - lo in P and hi - c in N}, ascending."""
        out = []
        n = 0
        while True:
            c = hi - n
            if c < lo:
                break
            if (c - lo).in_P():
                out.append(c)
            n += 1
        return sorted(out)


@dataclass(frozen=True)
class Degree:
    """A point a + b*pi/Theta of the degree lattice."""

    a: int
    b: int
    lattice: Lattice = field(compare=False, repr=False)

    def __post_init__(self):
        a, b = self.lattice._reduce(int(self.a), int(self.b))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    # arithmetic
    def _coerce(self, other) -> "Degree":
        if isinstance(other, Degree):
            return other
        if isinstance(other, int):
            return Degree(other, 0, self.lattice)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Degree(self.a + o.a, self.b + o.b, self.lattice)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Degree(self.a - o.a, self.b - o.b, self.lattice)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o - self

    def __neg__(self):
        return Degree(-self.a, -self.b, self.lattice)

    def __mul__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        return Degree(self.a * k, self.b * k, self.lattice)

    __rmul__ = __mul__

    # order
    @property
    def exact(self) -> Fraction | None:
        return self.lattice.exact(self.a, self.b)

    @property
    def value(self) -> float:
        return self.lattice.value(self.a, self.b)

    @property
    def scalar(self):
        return self.lattice.scalar_value(self.a, self.b)

    def _cmp(self, other) -> int:
        if isinstance(other, int):
            other = Degree(other, 0, self.lattice)
        if (self.a, self.b) == (other.a, other.b):
            return 0
        x, y = self.exact, other.exact
        if x is not None and y is not None:
            return (x > y) - (x < y)
        if self.b == other.b:
            return (self.a > other.a) - (self.a < other.a)
        # distinct values in irrational mode cannot tie
        v, w = self.value, other.value
        return (v > w) - (v < w)

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __bool__(self) -> bool:
        return bool(self.a or self.b)

    # lattice membership
    def is_integer(self) -> bool:
        return self.b == 0

    def is_natural(self) -> bool:
        return self.b == 0 and self.a >= 0

    def pi_index(self) -> int | None:
        """j with self = j*pi/Theta, or None."""
        if self.lattice.ratio is None:
            return self.b if self.a == 0 else None
        n, m = self.lattice.ratio
        if (self.a * n) % m:
            return None
        return self.a * n // m + self.b

    def in_pi_lattice(self, nonzero: bool = False) -> bool:
        j = self.pi_index()
        return j is not None and (j != 0 or not nonzero)

    def in_P(self) -> bool:
        """Membership in N + (pi/Theta) N."""
        return self.a >= 0 and self.b >= 0

    def in_lattice(self, name: str, p: "Degree | None" = None) -> bool:
        if name == "Z":
            return self.is_integer()
        if name == "N":
            return self.is_natural()
        if name == "piZ":
            return self.in_pi_lattice()
        if name == "piZ*":
            return self.in_pi_lattice(nonzero=True)
        if name == "P":
            return self.in_P()
        if name == "P-p":
            if p is None:
                raise ValueError("lattice 'P-p' needs p")
            return (self + p).in_P()
        raise ValueError(f"unknown lattice {name!r}")

    def as_int(self) -> int:
        if self.b:
            raise ValueError(f"{self} is not an integer")
        return self.a

    def pair(self) -> list[int]:
        return [self.a, self.b]

    def __str__(self) -> str:
        x = self.exact
        if x is not None:
            return str(x)
        if not self.b:
            return str(self.a)
        if not self.a:
            return f"{self.b}pi/T"
        return f"{self.a}{self.b:+d}pi/T"


def degree_in_lattice(d: Degree, lattice: str, p: Degree | None = None) -> bool:
    """Exact membership of ``d`` in one of Z, N, piZ, piZ*, P, P-p."""
    return d.in_lattice(lattice, p)


__all__.append("degree_in_lattice")


# ---------------------------------------------------------------- polynomials

def _nonzero(c) -> bool:
    return c != 0


class Poly:
    """Polynomial in T with complex coefficients, ascending powers, no trailing zeros."""

    __slots__ = ("c",)

    def __init__(self, coeffs: Iterable = ()):
        c = list(coeffs)
        while c and not _nonzero(c[-1]):
            c.pop()
        self.c = tuple(c)

    @classmethod
    def const(cls, x) -> "Poly":
        return cls((x,))

    @classmethod
    def monomial(cls, k: int, x=1) -> "Poly":
        return cls([0] * k + [x])

    @property
    def deg(self) -> int:
        return len(self.c) - 1

    def __bool__(self) -> bool:
        return bool(self.c)

    def __len__(self) -> int:
        return len(self.c)

    def __getitem__(self, i: int):
        return self.c[i] if 0 <= i < len(self.c) else 0

    def __iter__(self):
        return iter(self.c)

    def __repr__(self) -> str:
        return f"Poly({list(self.c)!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.c == other.c

    def __hash__(self):
        return hash(self.c)

    def __add__(self, other: "Poly") -> "Poly":
        n = max(len(self.c), len(other.c))
        return Poly(self[i] + other[i] for i in range(n))

    def __sub__(self, other: "Poly") -> "Poly":
        n = max(len(self.c), len(other.c))
        return Poly(self[i] - other[i] for i in range(n))

    def __neg__(self) -> "Poly":
        return Poly(-x for x in self.c)

    def scale(self, s) -> "Poly":
        return Poly(s * x for x in self.c)

    def __mul__(self, other):
        if isinstance(other, Poly):
            if not self.c or not other.c:
                return Poly()
            out = [0] * (len(self.c) + len(other.c) - 1)
            for i, x in enumerate(self.c):
                for j, y in enumerate(other.c):
                    out[i + j] += x * y
            return Poly(out)
        return self.scale(other)

    __rmul__ = __mul__

    def deriv(self, times: int = 1) -> "Poly":
        p = self
        for _ in range(times):
            p = Poly(i * x for i, x in enumerate(p.c) if i)
        return p

    def antideriv(self) -> "Poly":
        """Primitive vanishing at 0."""
        return Poly([0] + [x / (i + 1) for i, x in enumerate(self.c)])

    def __call__(self, t):
        acc = 0
        for x in reversed(self.c):
            acc = acc * t + x
        return acc

    def shift(self, s) -> "Poly":
        """P(T + s)."""
        out = [0] * len(self.c)
        for m, x in enumerate(self.c):
            if not _nonzero(x):
                continue
            sp = 1
            for i in range(m, -1, -1):
                out[i] += x * comb(m, i) * sp
                sp = sp * s
        return Poly(out)

    def real_part(self) -> "Poly":
        return Poly(x.real for x in self.c)

    def imag_part(self) -> "Poly":
        return Poly(x.imag for x in self.c)

    def cplx(self, scalars: Scalars) -> "Poly":
        return Poly(scalars.cplx(x) for x in self.c)

    def max_abs(self) -> float:
        return max((abs(complex(x)) for x in self.c), default=0.0)


def twisted_im(P: Poly, beta, shift, scalars: Scalars) -> Poly:
    """Im[beta * P(T + shift)] taken separately on the real and imaginary parts of P."""
    out = Poly()
    for part, unit in ((P.real_part(), 1), (P.imag_part(), 1j)):
        if not part:
            continue
        q = part.cplx(scalars).shift(shift).scale(beta)
        out = out + q.imag_part().cplx(scalars).scale(scalars.cplx(unit))
    return out


def twisted_re(P: Poly, beta, shift, scalars: Scalars) -> Poly:
    """Re[beta * P(T + shift)] taken separately on the real and imaginary parts of P."""
    out = Poly()
    for part, unit in ((P.real_part(), 1), (P.imag_part(), 1j)):
        if not part:
            continue
        q = part.cplx(scalars).shift(shift).scale(beta)
        out = out + q.real_part().cplx(scalars).scale(scalars.cplx(unit))
    return out


__all__ += ["twisted_im", "twisted_re"]


class PolyTY:
    """Sparse polynomial in (T, Y): {(power of T, power of Y): coefficient}."""

    __slots__ = ("c",)

    def __init__(self, coeffs: dict | Iterable = ()):
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        acc: dict[tuple[int, int], object] = {}
        for k, v in items:
            acc[k] = acc.get(k, 0) + v
        self.c = {k: v for k, v in sorted(acc.items()) if _nonzero(v)}

    @classmethod
    def from_T(cls, P: Poly, ypoly: Iterable = (1,)) -> "PolyTY":
        """P(T) times a polynomial in Y given by ascending coefficients."""
        return cls(((i, j), x * y) for i, x in enumerate(P.c) for j, y in enumerate(ypoly)
                   if _nonzero(x) and _nonzero(y))

    def __bool__(self) -> bool:
        return bool(self.c)

    def __repr__(self) -> str:
        return f"PolyTY({self.c!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyTY) and self.c == other.c

    def items(self):
        return self.c.items()

    def __add__(self, other: "PolyTY") -> "PolyTY":
        return PolyTY(list(self.c.items()) + list(other.c.items()))

    def __sub__(self, other: "PolyTY") -> "PolyTY":
        return PolyTY(list(self.c.items()) + [(k, -v) for k, v in other.c.items()])

    def __neg__(self) -> "PolyTY":
        return PolyTY((k, -v) for k, v in self.c.items())

    def scale(self, s) -> "PolyTY":
        return PolyTY((k, s * v) for k, v in self.c.items())

    def __mul__(self, other):
        if isinstance(other, PolyTY):
            return PolyTY(((i1 + i2, j1 + j2), x * y)
                          for (i1, j1), x in self.c.items() for (i2, j2), y in other.c.items())
        return self.scale(other)

    __rmul__ = __mul__

    @property
    def deg_T(self) -> int:
        return max((i for i, _ in self.c), default=-1)

    @property
    def deg_Y(self) -> int:
        return max((j for _, j in self.c), default=-1)

    def dT(self, times: int = 1) -> "PolyTY":
        q = self
        for _ in range(times):
            q = PolyTY(((i - 1, j), i * v) for (i, j), v in q.c.items() if i)
        return q

    def dY(self, times: int = 1) -> "PolyTY":
        q = self
        for _ in range(times):
            q = PolyTY(((i, j - 1), j * v) for (i, j), v in q.c.items() if j)
        return q

    def antideriv_Y(self) -> "PolyTY":
        """Y-primitive vanishing at Y = 0."""
        return PolyTY(((i, j + 1), v / (j + 1)) for (i, j), v in self.c.items())

    def at_Y(self, y) -> Poly:
        """Polynomial in T obtained by substituting Y = y."""
        out: dict[int, object] = {}
        for (i, j), v in self.c.items():
            out[i] = out.get(i, 0) + v * (y ** j if j else 1)
        n = max(out, default=-1) + 1
        return Poly(out.get(i, 0) for i in range(n))

    def __call__(self, t, y):
        acc = 0
        for (i, j), v in self.c.items():
            acc += v * t ** i * y ** j
        return acc

    def max_abs(self) -> float:
        return max((abs(complex(v)) for v in self.c.values()), default=0.0)


# ---------------------------------------------------------------- solvers

def _im_shift_matrix(beta, theta, size: int, scalars: Scalars) -> list[list]:
    """M[i][m] = coefficient of T^i in Im[beta (T - i Theta)^m]."""
    s = scalars.cplx(-1j) * theta
    M = [[scalars.real(0)] * size for _ in range(size)]
    for m in range(size):
        sp = scalars.cplx(1)
        for i in range(m, -1, -1):
            M[i][m] = (beta * comb(m, i) * sp).imag
            sp = sp * s
    return M


def _rim_real(d: Degree, Q: list, scalars: Scalars) -> list:
    lat = d.lattice
    n = len(Q) - 1
    j = d.pi_index()
    if j is None:
        beta = lat.alpha_power(d)
        M = _im_shift_matrix(beta, lat.theta, n + 1, scalars)
        P = [scalars.real(0)] * (n + 1)
        for m in range(n, -1, -1):
            acc = Q[m] - sum(M[m][k] * P[k] for k in range(m + 1, n + 1))
            P[m] = acc / M[m][m]
        return P
    # alpha^d = (-1)^j is real: the diagonal vanishes, solve on the superdiagonal
    beta = scalars.cplx(-1 if j % 2 else 1)
    M = _im_shift_matrix(beta, lat.theta, n + 2, scalars)
    P = [scalars.real(0)] * (n + 2)
    for i in range(n, -1, -1):
        acc = Q[i] - sum(M[i][k] * P[k] for k in range(i + 2, n + 2))
        P[i + 1] = acc / M[i][i + 1]
    return P


def rim_solve(d: Degree, Q: Poly) -> Poly:
    """Solve Im[alpha^d P(T - i Theta)] = Q for P (real and imaginary parts separately).

    If d is a multiple of pi/Theta the solution with P(0) = 0 is returned and
    deg P = deg Q + 1; otherwise the solution is unique with deg P = deg Q.
    """
    scalars = d.lattice.scalars
    if not Q:
        return Poly()
    re = _rim_real(d, [scalars.real(x.real) for x in Q.c], scalars)
    im = _rim_real(d, [scalars.real(x.imag) for x in Q.c], scalars)
    i = scalars.cplx(1j)
    return Poly(scalars.cplx(r) + i * m for r, m in zip(re, im))


def ode_solve_first_order(c, q, R: Poly, fix_constant_at_zero: bool = True) -> Poly:
    """Polynomial solution of c*(q*P + P') = R.

    ``q`` may be a Degree (exact zero test) or a scalar.  With q = 0 the
    solution is the primitive of R/c, with constant term set to 0.
    """
    if isinstance(q, Degree):
        q_zero = not q
        qv = q.scalar
    else:
        q_zero = q == 0
        qv = q
    if q_zero:
        if not fix_constant_at_zero:
            raise ValueError("q = 0 leaves the constant term undetermined")
        return R.scale(1 / c).antideriv() if R else Poly()
    if not R:
        return Poly()
    n = R.deg
    P = [0] * (n + 1)
    P[n] = R[n] / (c * qv)
    for m in range(n - 1, -1, -1):
        P[m] = (R[m] / c - (m + 1) * P[m + 1]) / qv
    return Poly(P)


def falling_shift(P: Poly, g, j: int) -> Poly:
    """(g + D)(g + D - 1)...(g + D - j + 1) P with D = d/dT."""
    for i in range(j):
        P = P.scale(g - i) + P.deriv()
    return P


def shifted_power(P: Poly, v, m: int) -> Poly:
    """(v + D)^m P."""
    for _ in range(m):
        P = P.scale(v) + P.deriv()
    return P


__all__ += ["falling_shift", "shifted_power"]
