"""External potentials and their Taylor data along a trajectory."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import PotentialEvaluationError

KINDS = ("free", "linear", "harmonic", "polynomial", "custom")

TaylorFn = Callable[[float, float], tuple]
FieldFn = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class PotentialModel:
    """Potential V(x, t) with exact derivatives at the packet center.

    All built-in kinds are stored as polynomial coefficients ``c[k]`` of
    ``x**k``; ``custom`` wraps a user callable returning ``(V, V', V'')``.
    """

    kind: str
    coeffs: tuple = ()
    params: dict = field(default_factory=dict, compare=False)
    taylor_fn: Optional[TaylorFn] = field(default=None, compare=False, repr=False)
    field_fn: Optional[FieldFn] = field(default=None, compare=False, repr=False)
    quadratic: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "custom":
            if self.taylor_fn is None:
                raise ValueError("custom potential needs a taylor callable")
        else:
            c = tuple(float(v) for v in self.coeffs)
            if not all(math.isfinite(v) for v in c):
                raise ValueError("potential coefficients must be finite")
            object.__setattr__(self, "coeffs", c)

    @classmethod
    def free(cls) -> "PotentialModel":
        return cls("free", ())

    @classmethod
    def linear(cls, force: float) -> "PotentialModel":
        """Uniform force ``force``; V = -force * x."""
        return cls("linear", (0.0, -float(force)), {"force": float(force)})

    @classmethod
    def harmonic(cls, omega: float, mass: float = 1.0, center: float = 0.0) -> "PotentialModel":
        k = 0.5 * mass * omega * omega
        return cls("harmonic", (k * center * center, -2.0 * k * center, k),
                   {"omega": float(omega), "mass": float(mass), "center": float(center)})

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "PotentialModel":
        return cls("polynomial", tuple(coeffs), {"coeffs": [float(c) for c in coeffs]})

    @classmethod
    def custom(cls, taylor: TaylorFn, field: Optional[FieldFn] = None,
               quadratic: bool = False) -> "PotentialModel":
        return cls("custom", (), {}, taylor, field, quadratic)

    @property
    def is_polynomial(self) -> bool:
        return self.kind != "custom"

    @property
    def is_quadratic(self) -> bool:
        """True when V'' does not depend on the expansion point."""
        if self.kind == "custom":
            return self.quadratic
        return len(self.coeffs) <= 3

    def coefficient_array(self) -> np.ndarray:
        if not self.is_polynomial:
            raise ValueError("custom potentials have no coefficient array")
        c = np.zeros(max(len(self.coeffs), 1))
        c[:len(self.coeffs)] = self.coeffs
        return c

    def taylor(self, q: float, t: float = 0.0) -> tuple:
        """Return ``(V, V', V'')`` at position ``q`` and time ``t``."""
        if self.kind == "custom":
            try:
                out = tuple(float(v) for v in self.taylor_fn(q, t))
            except (ArithmeticError, ValueError) as exc:
                raise PotentialEvaluationError(f"potential evaluation failed at q={q}: {exc}") from exc
        else:
            out = _poly_taylor(self.coeffs, q)
        if len(out) != 3 or not all(math.isfinite(v) for v in out):
            raise PotentialEvaluationError(f"potential evaluation gave non-finite value at q={q}, t={t}")
        return out

    def value(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Full potential on an array of points."""
        x = np.asarray(x, dtype=float)
        if self.kind == "custom":
            if self.field_fn is None:
                raise ValueError("custom potential has no field callable")
            v = np.broadcast_to(np.asarray(self.field_fn(x, t), dtype=float), x.shape)
        else:
            v = np.polynomial.polynomial.polyval(x, self.coeffs) if self.coeffs else np.zeros_like(x)
        if not np.all(np.isfinite(v)):
            raise PotentialEvaluationError("potential evaluation gave non-finite values")
        return v

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom potentials cannot be serialized")
        out = {"kind": self.kind}
        out.update(self.params)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "PotentialModel":
        raw = dict(raw)
        kind = raw.pop("kind", None)
        allowed = {"free": set(), "linear": {"force"}, "harmonic": {"omega", "mass", "center"},
                   "polynomial": {"coeffs"}}
        if kind not in allowed:
            raise ValueError(f"potential.kind: unsupported kind {kind!r}")
        extra = set(raw) - allowed[kind]
        if extra:
            raise ValueError(f"potential: unknown key(s) {sorted(extra)} for kind {kind!r}")
        if kind == "free":
            return cls.free()
        if kind == "linear":
            return cls.linear(raw.get("force", 0.0))
        if kind == "harmonic":
            if "omega" not in raw:
                raise ValueError("potential.omega is required for kind 'harmonic'")
            return cls.harmonic(raw["omega"], raw.get("mass", 1.0), raw.get("center", 0.0))
        if "coeffs" not in raw:
            raise ValueError("potential.coeffs is required for kind 'polynomial'")
        return cls.polynomial(raw["coeffs"])


def _poly_taylor(coeffs: Sequence[float], q: float) -> tuple:
    # Horner for value, first and second derivative in one sweep
    v = d1 = d2 = 0.0
    for c in reversed(coeffs):
        d2 = d2 * q + 2.0 * d1
        d1 = d1 * q + v
        v = v * q + c
    return v, d1, d2
