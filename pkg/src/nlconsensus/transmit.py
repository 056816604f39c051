"""Bounded transmit maps h(x) with analytic derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("tanh", "arctan", "gudermannian", "algebraic_sigmoid", "linear")


def db_to_linear(rho_db: float) -> float:
    return 10.0 ** (rho_db / 10.0)


def linear_to_db(rho: float) -> float:
    return 10.0 * math.log10(rho)


def _sech(u):
    e = np.exp(-np.abs(u))
    return 2.0 * e / (1.0 + e * e)


@dataclass(frozen=True)
class TransmitFunction:
    """A transmit nonlinearity ``h``.

    ``rho`` is the peak power on a linear scale, so bounded kinds satisfy
    ``|h(x)| <= sqrt(rho)``. The literal ``arctan`` kind is the exception: its
    supremum is ``sqrt(rho) * pi / 2`` unless ``normalized`` is set, which
    rescales it by ``2 / pi``.
    """

    kind: str
    omega: float = 1.0
    rho: float = 1.0
    normalized: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transmit kind {self.kind!r}; expected one of {KINDS}")
        if self.kind != "linear":
            if not self.omega > 0:
                raise ValueError(f"omega must be > 0, got {self.omega}")
            if not self.rho > 0:
                raise ValueError(f"rho must be > 0, got {self.rho}")
        if self.normalized and self.kind != "arctan":
            raise ValueError("only the arctan kind has a normalized variant")

    @property
    def bounded(self) -> bool:
        return self.kind != "linear"

    @property
    def rho_db(self) -> float:
        return linear_to_db(self.rho)

    @property
    def amplitude(self) -> float:
        """sup |h(x)|."""
        if self.kind == "linear":
            return math.inf
        a = math.sqrt(self.rho)
        if self.kind == "arctan" and not self.normalized:
            a *= math.pi / 2.0
        return a

    @property
    def power_cap(self) -> float:
        """sup h(x)^2."""
        if self.kind == "linear":
            return math.inf
        if self.kind == "arctan" and not self.normalized:
            half_pi = float(np.arctan(np.inf))
            return self.rho * (half_pi * half_pi)
        return self.rho

    @property
    def c(self) -> float:
        """sup h'(x), attained at the origin."""
        return float(self.derivative(0.0))

    def __call__(self, x):
        return self.evaluate(x)

    def _unit(self, u):
        """Shape before the sqrt(rho) factor; within [-1, 1] except literal arctan."""
        if self.kind == "tanh":
            return np.tanh(u)
        if self.kind == "arctan":
            y = np.arctan(u)
            return np.clip((2.0 / math.pi) * y, -1.0, 1.0) if self.normalized else y
        if self.kind == "gudermannian":
            # (2/pi) atan(sinh(v)) == (4/pi) atan(tanh(v/2)), without overflow
            return np.clip((4.0 / math.pi) * np.arctan(np.tanh(math.pi * u / 4.0)), -1.0, 1.0)
        return u / np.sqrt(1.0 + u * u)

    def evaluate(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "linear":
            return x.copy() if x.ndim else float(x)
        y = math.sqrt(self.rho) * self._unit(self.omega * x)
        return y if y.ndim else float(y)

    def derivative(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "linear":
            d = np.ones_like(x)
            return d if d.ndim else 1.0
        u = self.omega * x
        if self.kind == "tanh":
            d = _sech(u) ** 2
        elif self.kind == "arctan":
            d = 1.0 / (1.0 + u * u)
        elif self.kind == "gudermannian":
            d = _sech(math.pi * u / 2.0)
        else:
            d = (1.0 + u * u) ** -1.5
        if self.normalized:
            d = (2.0 / math.pi) * d
        d = math.sqrt(self.rho) * self.omega * d
        return d if d.ndim else float(d)

    def transmit_power(self, x):
        """h(x)^2, computed as rho * shape^2 so the cap holds without rounding slack."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "linear":
            p = x * x
        else:
            y = self._unit(self.omega * x)
            p = self.rho * (y * y)
        return p if p.ndim else float(p)

    def designator(self) -> str:
        if self.kind == "linear":
            return "linear"
        s = f"{self.kind}:{self.omega!r}:{self.rho_db!r}"
        return s + ":normalized" if self.normalized else s


def evaluate(f: TransmitFunction, x):
    return f.evaluate(x)


def derivative(f: TransmitFunction, x):
    return f.derivative(x)


def transmit_power(f: TransmitFunction, x):
    return f.transmit_power(x)


def derivative_check(f: TransmitFunction, grid, h_step=1e-5) -> float:
    """Max relative gap between central differences and the analytic derivative."""
    if not h_step > 0:
        raise ValueError("h_step must be positive")
    x = np.asarray(grid, dtype=np.float64)
    hi, lo = x + h_step, x - h_step
    # divide by the step actually realized in floating point
    fd = (np.asarray(f.evaluate(hi)) - np.asarray(f.evaluate(lo))) / (hi - lo)
    d = np.asarray(f.derivative(x))
    return float(np.max(np.abs(fd - d) / np.maximum(1.0, np.abs(d))))


def parse_designator(text: str) -> TransmitFunction:
    """Parse ``kind:omega:rho_db[:normalized]`` (or bare ``linear``)."""
    parts = [p.strip() for p in text.strip().split(":")]
    kind = parts[0]
    if kind == "linear":
        if len(parts) != 1:
            raise ValueError(f"'linear' takes no parameters, got {text!r}")
        return TransmitFunction("linear")
    if kind not in KINDS:
        raise ValueError(f"unknown transmit kind {kind!r}")
    if len(parts) not in (3, 4):
        raise ValueError(f"expected kind:omega:rho_db[:normalized], got {text!r}")
    normalized = False
    if len(parts) == 4:
        if parts[3] != "normalized":
            raise ValueError(f"unknown transmit flag {parts[3]!r}")
        normalized = True
    try:
        omega, rho_db = float(parts[1]), float(parts[2])
    except ValueError:
        raise ValueError(f"non-numeric omega or rho in {text!r}") from None
    return TransmitFunction(kind, omega, db_to_linear(rho_db), normalized)
