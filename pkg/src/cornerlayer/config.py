"""Problem configuration: geometry, material constants, frequency and tolerances.

Theta is declared either in radians (``theta = 2.0``) or as an exact token
``"pi*a/b"``, which switches the degree lattice to exact rational arithmetic.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .coeff_field import Lattice

__all__ = ["ConfigError", "Tolerances", "ProblemConfig", "load_config", "parse_theta"]

_THETA_TOKEN = re.compile(r"^\s*pi\s*(?:\*\s*(\d+))?\s*(?:/\s*(\d+))?\s*$")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Tolerances:
    symbolic: float = 1e-11
    grid: float = 1e-9
    rim: float = 1e-12
    identity: float = 1e-12
    matrix: float = 1e-9
    words: float = 1e-10
    fd: float = 1e-6
    residual: float = 1e-10
    slope: float = 0.1

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "Tolerances":
        known = {f.name for f in fields(cls)}
        kw = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"tolerances.{key}", "unknown tolerance")
            try:
                v = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"tolerances.{key}", f"not a number: {value!r}") from None
            if not v > 0 or math.isinf(v):
                raise ConfigError(f"tolerances.{key}", f"must be positive and finite, got {value!r}")
            kw[key] = v
        return cls(**kw)


def parse_theta(value) -> tuple[float | None, tuple[int, int] | None]:
    """(radians, None) for a number, (None, (n, m)) for a "pi*n/m" token."""
    if isinstance(value, bool):
        raise ConfigError("theta", "expected a number or a 'pi*a/b' token")
    if isinstance(value, (int, float)):
        return float(value), None
    if isinstance(value, str):
        m = _THETA_TOKEN.match(value)
        if m:
            n = int(m.group(1) or 1)
            d = int(m.group(2) or 1)
            if n == 0 or d == 0:
                raise ConfigError("theta", f"degenerate token {value!r}")
            return None, (n, d)
        try:
            return float(value), None
        except ValueError:
            pass
    raise ConfigError("theta", f"expected a number or a 'pi*a/b' token, got {value!r}")


def _parse_complex(name: str, value) -> complex:
    try:
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ValueError
            return complex(float(value[0]), float(value[1]))
        if isinstance(value, str):
            return complex(value.replace(" ", "").replace("i", "j"))
        return complex(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a complex number, got {value!r}") from None


def _positive(name: str, value) -> float:
    if isinstance(value, bool):
        raise ConfigError(name, "expected a positive number")
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a positive number, got {value!r}") from None
    if not v > 0 or math.isinf(v):
        raise ConfigError(name, f"must be positive and finite, got {value!r}")
    return v


@dataclass(frozen=True)
class ProblemConfig:
    theta: str
    mu0: float
    mu1: float
    rho0: float
    rho1: float
    omega: complex
    precision: str = "double"
    p_max: int | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    lattice: Lattice = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        radians, ratio = parse_theta(self.theta)
        if self.precision not in ("double", "extended"):
            raise ConfigError("precision", f"expected 'double' or 'extended', got {self.precision!r}")
        try:
            lat = Lattice(radians, ratio=ratio, precision=self.precision)
        except ValueError as exc:
            raise ConfigError("theta", str(exc)) from None
        for name in ("mu0", "mu1", "rho0", "rho1"):
            _positive(name, getattr(self, name))
        if self.omega.imag == 0:
            raise ConfigError("omega", "the imaginary part must be nonzero")
        object.__setattr__(self, "lattice", lat)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ProblemConfig":
        known = {"theta", "mu0", "mu1", "rho0", "rho1", "omega", "precision", "window", "tolerances"}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        for key in ("theta", "mu0", "mu1", "rho0", "rho1", "omega"):
            if key not in data:
                raise ConfigError(key, "missing")
        theta = data["theta"]
        parse_theta(theta)
        window = data.get("window", {})
        if not isinstance(window, Mapping):
            raise ConfigError("window", "expected a table")
        p_max = window.get("p_max")
        if p_max is not None and (isinstance(p_max, bool) or not isinstance(p_max, int) or p_max < 0):
            raise ConfigError("window.p_max", f"expected a nonnegative integer, got {p_max!r}")
        tol = data.get("tolerances", {})
        if not isinstance(tol, Mapping):
            raise ConfigError("tolerances", "expected a table")
        return cls(
            theta=str(theta) if isinstance(theta, str) else repr(float(theta)),
            mu0=_positive("mu0", data["mu0"]),
            mu1=_positive("mu1", data["mu1"]),
            rho0=_positive("rho0", data["rho0"]),
            rho1=_positive("rho1", data["rho1"]),
            omega=_parse_complex("omega", data["omega"]),
            precision=str(data.get("precision", "double")),
            p_max=p_max,
            tolerances=Tolerances.from_mapping(tol),
        )

    def with_precision(self, precision: str) -> "ProblemConfig":
        return replace(self, precision=precision)

    # derived constants, in the working precision
    @property
    def scalars(self):
        return self.lattice.scalars

    @property
    def k0_sq(self):
        s = self.scalars
        w = s.cplx(self.omega)
        return w * w * s.real(self.rho0) / s.real(self.mu0)

    @property
    def k1_sq(self):
        s = self.scalars
        w = s.cplx(self.omega)
        return w * w * s.real(self.rho1) / s.real(self.mu1)

    @property
    def k0(self):
        return self.scalars.sqrt(self.k0_sq)

    @property
    def k1(self):
        return self.scalars.sqrt(self.k1_sq)

    @property
    def mu_ratio(self):
        s = self.scalars
        return s.real(self.mu0) / s.real(self.mu1)

    @property
    def mu_ratio_exact(self) -> Fraction:
        return Fraction(self.mu0) / Fraction(self.mu1)

    @property
    def alpha(self):
        return self.scalars.expi(-self.lattice.theta)

    def physical(self) -> dict:
        """The quantities coefficient tables depend on."""
        return {
            "theta": self.theta,
            "mu0": repr(self.mu0),
            "mu1": repr(self.mu1),
            "rho0": repr(self.rho0),
            "rho1": repr(self.rho1),
            "omega": [repr(self.omega.real), repr(self.omega.imag)],
            "precision": self.precision,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.physical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_json(self) -> dict:
        out = self.physical()
        out["p_max"] = self.p_max
        out["tolerances"] = {f.name: getattr(self.tolerances, f.name) for f in fields(Tolerances)}
        return out

    def to_mapping(self) -> dict:
        """A mapping that ``from_mapping`` turns back into an equal config."""
        theta: Any = self.theta
        radians, _ = parse_theta(theta)
        if radians is not None:
            theta = radians
        out = {
            "theta": theta, "mu0": self.mu0, "mu1": self.mu1, "rho0": self.rho0,
            "rho1": self.rho1, "omega": [self.omega.real, self.omega.imag],
            "precision": self.precision,
            "tolerances": {f.name: getattr(self.tolerances, f.name) for f in fields(Tolerances)},
        }
        if self.p_max is not None:
            out["window"] = {"p_max": self.p_max}
        return out


def load_config(path: str | Path) -> ProblemConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    return ProblemConfig.from_mapping(data)
