"""Sparse formal series graded by (epsilon power p, grade d, ln(epsilon) power l).

Windows are chosen closed under predecessors, so every cell kept inside a
window is exact: no contribution from outside the window can reach it.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from math import factorial
from typing import Callable, Iterable, Mapping

from .coeff_field import Degree, Lattice
from .sing_spaces import PiElement, phi

__all__ = [
    "Window",
    "EpsOperator",
    "GradedSeries",
    "WindowError",
    "ResourceError",
    "truncate",
    "truncate_element",
    "apply_op",
    "direction_vector",
    "geometric_series",
    "scale_heps",
    "tau_pl",
    "pi_sigma",
]

Key = tuple[Degree, Degree, int]


class WindowError(ValueError):
    """Window not closed under the operators, or a request outside the window."""


class ResourceError(RuntimeError):
    """Cell cap exceeded."""


@dataclass(frozen=True)
class Window:
    """Cells (p, d) with p <= p_max and p + sense*d <= span.

    sense = +1 suits far-field series (the micro exponent p + d is bounded),
    sense = -1 suits corner series (the macro exponent p - d is bounded).
    """

    p_max: Degree
    span: Degree
    sense: int

    def contains(self, p: Degree, d: Degree) -> bool:
        other = p + d if self.sense > 0 else p - d
        return p <= self.p_max and other <= self.span

    def closed_under(self, ops: Iterable["EpsOperator"]) -> bool:
        for op in ops:
            step = op.deg_eps + op.deg_A if self.sense > 0 else op.deg_eps - op.deg_A
            if op.deg_eps.value < 0 or step.value < 0:
                return False
        return True

    def to_json(self) -> dict:
        return {"p_max": self.p_max.pair(), "span": self.span.pair(), "sense": self.sense}


@dataclass(frozen=True)
class EpsOperator:
    """epsilon^{deg_eps} times a linear map of A-degree deg_A, times a scalar coefficient."""

    name: str
    deg_eps: Degree
    deg_A: Degree
    coefficient: complex
    action: Callable[[PiElement], PiElement]

    @property
    def degree(self) -> tuple[Degree, Degree]:
        return self.deg_eps, self.deg_A

    def __call__(self, e: PiElement) -> PiElement:
        return self.action(e).scale(self.coefficient)


class GradedSeries:
    """Finite collection of cells {(p, d, l): element of grade d}.

    ``orientation`` is "plus" (support p in P, p + d in P), "minus"
    (p in P, p - d in P) or None for unconstrained kernels such as the
    series seeded by a single phi_d.
    """

    __slots__ = ("lattice", "cells", "orientation", "window")

    def __init__(self, lattice: Lattice, cells: Mapping[Key, PiElement] | Iterable = (),
                 orientation: str | None = None, window: Window | None = None,
                 check: bool = True):
        self.lattice = lattice
        items = cells.items() if isinstance(cells, Mapping) else cells
        acc: dict[Key, PiElement] = {}
        for key, e in items:
            if key in acc:
                acc[key] = acc[key] + e
            else:
                acc[key] = e
        self.cells = {k: e for k, e in sorted(acc.items(), key=_key_order) if e}
        self.orientation = orientation
        self.window = window
        if check:
            self.check()

    def check(self) -> None:
        for (p, d, l), e in self.cells.items():
            if l < 0:
                raise ValueError(f"negative ln(eps) power at {(p, d, l)}")
            if not e.is_homogeneous(d):
                raise ValueError(f"cell {(str(p), str(d), l)} is not homogeneous of grade {d}")
            if self.orientation == "plus" and not (p.in_P() and (p + d).in_P()):
                raise WindowError(f"cell ({p}, {d}) outside the plus lattice")
            if self.orientation == "minus" and not (p.in_P() and (p - d).in_P()):
                raise WindowError(f"cell ({p}, {d}) outside the minus lattice")

    def __bool__(self) -> bool:
        return bool(self.cells)

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells.items())

    def get(self, p: Degree, d: Degree, l: int = 0) -> PiElement:
        return self.cells.get((p, d, l), PiElement.zero(self.lattice))

    def __add__(self, other: "GradedSeries") -> "GradedSeries":
        return GradedSeries(self.lattice, list(self.cells.items()) + list(other.cells.items()),
                            self.orientation, self.window)

    def scale(self, s) -> "GradedSeries":
        return GradedSeries(self.lattice, {k: e.scale(s) for k, e in self.cells.items()},
                            self.orientation, self.window, check=False)

    def __sub__(self, other: "GradedSeries") -> "GradedSeries":
        return self + other.scale(-1)

    def restrict(self, pred: Callable[[Degree, Degree, int], bool]) -> "GradedSeries":
        return GradedSeries(self.lattice, {k: e for k, e in self.cells.items() if pred(*k)},
                            self.orientation, self.window, check=False)

    def distance(self, other: "GradedSeries") -> float:
        keys = set(self.cells) | set(other.cells)
        return max((self.get(*k).distance(other.get(*k)) for k in keys), default=0.0)

    def max_abs(self) -> float:
        return max((e.max_abs() for e in self.cells.values()), default=0.0)

    def max_l(self) -> int:
        return max((l for _, _, l in self.cells), default=-1)

    def to_json(self) -> list:
        return [{"p": p.pair(), "d": d.pair(), "l": l, "element": e.to_json()}
                for (p, d, l), e in self.cells.items()]

    @classmethod
    def from_json(cls, lattice: Lattice, data: list, orientation: str | None = None) -> "GradedSeries":
        return cls(lattice, [((lattice.deg(*c["p"]), lattice.deg(*c["d"]), int(c["l"])),
                              PiElement.from_json(lattice, c["element"])) for c in data],
                   orientation)


def _key_order(item):
    (p, d, l), _ = item
    return (p.value, d.value, l, p.a, p.b, d.a, d.b)


# ---------------------------------------------------------------- truncations

def truncate_element(e: PiElement, mode: str, cutoff: Degree) -> PiElement:
    keep = (lambda g: g <= cutoff) if mode == "le" else (lambda g: g >= cutoff)
    out = PiElement.zero(e.lattice)
    for g in e.grades():
        if keep(g):
            out = out + e.grade_part(g)
    return out


def truncate(s: GradedSeries, mode: str, cutoff: Degree) -> GradedSeries:
    """Keep cells with d <= cutoff ("le"), d < cutoff ("lt"), d >= cutoff ("ge") or d > cutoff ("gt").

    Keeping the unbounded side of a plus (or minus) series is refused unless
    the series carries a window, which makes its content finite.
    """
    if mode not in ("le", "ge", "gt", "lt"):
        raise ValueError(f"unknown truncation mode {mode!r}")
    if s.window is None and ((s.orientation == "plus" and mode in ("ge", "gt")) or
                             (s.orientation == "minus" and mode in ("le", "lt"))):
        raise WindowError(f"truncation {mode} is unbounded on a {s.orientation} series")
    tests = {"le": lambda d: d <= cutoff, "lt": lambda d: d < cutoff,
             "ge": lambda d: d >= cutoff, "gt": lambda d: d > cutoff}
    t = tests[mode]
    return s.restrict(lambda p, d, l: t(d))


# ---------------------------------------------------------------- operators

def apply_op(f: EpsOperator, s: GradedSeries) -> GradedSeries:
    cells = []
    for (p, d, l), e in s.cells.items():
        out = f(e)
        if out:
            cells.append(((p + f.deg_eps, d + f.deg_A, l), out))
    return GradedSeries(s.lattice, cells, s.orientation, None)


_CANDIDATES = [(vd, vp) for vd in (1, -1, 2, -2, 0) for vp in (2, 1, 3)]


def direction_vector(ops: Iterable[EpsOperator], v: tuple[int, int] | None = None) -> tuple[int, int]:
    """A vector (v_d, v_p) with v_d*deg_A + v_p*deg_eps > 0 for every operator."""
    ops = list(ops)
    candidates = [v] if v is not None else _CANDIDATES
    for vd, vp in candidates:
        if all(vd * op.deg_A.value + vp * op.deg_eps.value > 0 for op in ops):
            return vd, vp
    raise WindowError("no direction vector makes every operator degree positive")


def geometric_series(ops: Iterable[EpsOperator], seed: GradedSeries, window: Window,
                     v: tuple[int, int] | None = None, max_cells: int = 200_000) -> GradedSeries:
    """Sum over all words g1 o ... o gn (n >= 0) applied to seed, on a closed window.

    Cells are settled in increasing order of <(d, p), v>; each operator raises
    that level, so a cell is final once it is popped.
    """
    ops = list(ops)
    if not ops:
        return GradedSeries(seed.lattice, seed.restrict(lambda p, d, l: window.contains(p, d)).cells,
                            seed.orientation, window)
    vd, vp = direction_vector(ops, v)
    if not window.closed_under(ops):
        raise WindowError("window is not closed under the operator degrees")

    def level(p: Degree, d: Degree) -> float:
        return vd * d.value + vp * p.value

    cells: dict[Key, PiElement] = {}
    heap: list = []
    counter = itertools.count()
    for (p, d, l), e in seed.cells.items():
        if window.contains(p, d):
            cells[(p, d, l)] = cells[(p, d, l)] + e if (p, d, l) in cells else e
            heapq.heappush(heap, (level(p, d), next(counter), (p, d, l)))
    done = set()
    while heap:
        _, _, key = heapq.heappop(heap)
        if key in done:
            continue
        done.add(key)
        e = cells[key]
        if not e:
            continue
        p, d, l = key
        for op in ops:
            tp, td = p + op.deg_eps, d + op.deg_A
            if not window.contains(tp, td):
                continue
            out = op(e)
            if not out:
                continue
            tkey = (tp, td, l)
            if tkey in done:
                raise WindowError("operator did not raise the level")  # cannot happen with v valid
            cells[tkey] = cells[tkey] + out if tkey in cells else out
            heapq.heappush(heap, (level(tp, td), next(counter), tkey))
            if len(cells) > max_cells:
                raise ResourceError(f"geometric series exceeded {max_cells} cells")
    return GradedSeries(seed.lattice, cells, seed.orientation, window)


# ---------------------------------------------------------------- scaling

def _derivative_pieces(e: PiElement):
    """Yield (j, j-th T-derivative of every polynomial) for j = 0..t_degree."""
    for j in range(e.t_degree() + 1):
        yield j, e.map_polys(lambda P: P.deriv(j), lambda Q: Q.dT(j))


def scale_heps(s: GradedSeries | PiElement, direction: str = "forward",
               p: Degree | None = None, l: int = 0) -> GradedSeries:
    """The scaling z -> eps z (forward) or z -> z/eps (inverse) on graded content.

    A grade-d cell at (p, l) with T-degree m goes to (p + d, l + j), j <= m,
    with weight 1/j! (forward) or (-1)^j/j! (inverse), acting on the j-th
    T-derivative of its polynomials.
    """
    if isinstance(s, PiElement):
        lat = s.lattice
        p = lat.zero if p is None else p
        s = GradedSeries(lat, [((p, g, l), s.grade_part(g)) for g in s.grades()])
    if direction not in ("forward", "inverse"):
        raise ValueError(f"unknown direction {direction!r}")
    sign = 1 if direction == "forward" else -1
    cells = []
    for (pp, d, ll), e in s.cells.items():
        target_p = pp + d if sign > 0 else pp - d
        for j, ej in _derivative_pieces(e):
            w = sign ** j / factorial(j)
            if ej:
                cells.append(((target_p, d, ll + j), ej.scale(w)))
    orient = {"plus": "minus", "minus": "plus"}.get(s.orientation)
    return GradedSeries(s.lattice, cells, orient, None, check=False)


# ---------------------------------------------------------------- projections

def tau_pl(s: GradedSeries, p: Degree, l: int) -> PiElement:
    """The (p, l) slice, summed over grades."""
    out = PiElement.zero(s.lattice)
    for (pp, d, ll), e in s.cells.items():
        if pp == p and ll == l:
            out = out + e
    return out


def pi_sigma(s: GradedSeries) -> GradedSeries:
    """Replace every cell by sigma_d(cell) phi_d (cells off the pi/Theta lattice vanish)."""
    cells = []
    for (p, d, l), e in s.cells.items():
        if d.in_pi_lattice(nonzero=True):
            c = e.sigma(d)
            if c != 0:
                cells.append(((p, d, l), phi(d).scale(c)))
    return GradedSeries(s.lattice, cells, s.orientation, s.window, check=False)
