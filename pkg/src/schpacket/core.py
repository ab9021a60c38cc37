"""Shared value types, grids and quadrature helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

Variant = Literal["paper", "corrected"]
VARIANTS = ("paper", "corrected")

# Tail density (relative to the peak) below which a grid is considered wide enough.
TRUNCATION_RATIO = 1e-12


@dataclass(frozen=True)
class PhysicsParams:
    """Mass, Planck constant and friction rate.

    ``mean_action_variant`` selects the weight of the friction term in the
    phase-offset equation: ``"paper"`` uses the coefficient as printed,
    ``"corrected"`` multiplies it by the Gaussian second moment ``a**2``.
    """

    mass: float = 1.0
    hbar: float = 1.0
    nu: float = 0.0
    mean_action_variant: Variant = "paper"

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError(f"mass must be positive and finite, got {self.mass}")
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise ValueError(f"hbar must be positive and finite, got {self.hbar}")
        if not (self.nu >= 0 and math.isfinite(self.nu)):
            raise ValueError(f"nu must be non-negative and finite, got {self.nu}")
        if self.mean_action_variant not in VARIANTS:
            raise ValueError(f"unknown mean_action_variant {self.mean_action_variant!r}")

    def with_variant(self, variant: Variant) -> "PhysicsParams":
        return PhysicsParams(self.mass, self.hbar, self.nu, variant)


@dataclass(frozen=True)
class InitialConditions:
    """Packet center, center velocity, width and width velocity at t = 0."""

    x0: float = 0.0
    v0: float = 0.0
    a0: float = 1.0
    b0: float = 0.0

    def __post_init__(self):
        if not (self.a0 > 0 and math.isfinite(self.a0)):
            raise ValueError(f"initial width a0 must be positive, got {self.a0}")
        for name in ("x0", "v0", "b0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def replace(self, **changes) -> "InitialConditions":
        values = dict(x0=self.x0, v0=self.v0, a0=self.a0, b0=self.b0)
        values.update(changes)
        return InitialConditions(**values)


@dataclass(frozen=True)
class Grid:
    """Uniform 1-D grid.

    Bounded grids include both end points. Periodic grids omit ``x_max``
    (it is identified with ``x_min``).
    """

    x_min: float
    x_max: float
    n: int
    periodic: bool = False

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 16:
            raise ValueError(f"grid needs at least 16 points, got {self.n}")
        if not self.x_max > self.x_min:
            raise ValueError("grid requires x_max > x_min")

    @property
    def dx(self) -> float:
        span = self.x_max - self.x_min
        return span / self.n if self.periodic else span / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        if self.periodic:
            return self.x_min + self.dx * np.arange(self.n)
        return np.linspace(self.x_min, self.x_max, self.n)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights (uniform for periodic grids)."""
        w = np.full(self.n, self.dx)
        if not self.periodic:
            w[0] = w[-1] = 0.5 * self.dx
        return w

    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)


def _checked_values(grid: Grid, values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if arr.shape != (grid.n,):
        raise ValueError(f"field has shape {arr.shape}, grid has {grid.n} points")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite field")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RealField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _checked_values(self.grid, self.values, float))

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    @classmethod
    def from_function(cls, grid: Grid, f: Callable[[np.ndarray], np.ndarray]) -> "RealField":
        return cls(grid, np.broadcast_to(f(grid.points), (grid.n,)))


@dataclass(frozen=True)
class ComplexField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _checked_values(self.grid, self.values, complex))

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    def density(self) -> RealField:
        return RealField(self.grid, np.abs(self.values) ** 2)

    def scaled(self, factor: complex) -> "ComplexField":
        return ComplexField(self.grid, factor * self.values)


def trapezoid_integral(f: RealField) -> float:
    """Composite trapezoid rule over the field's grid."""
    values = np.asarray(f.values)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite field")
    return float(np.dot(f.grid.weights, values))


def expectation(rho: RealField, f: RealField, tol: float = 1e-300) -> float:
    """Density-weighted mean of ``f``, normalized by the integral of ``rho``."""
    if rho.grid != f.grid:
        raise ValueError("rho and f must share a grid")
    if np.any(rho.values < 0):
        raise ValueError("density must be non-negative")
    w = rho.grid.weights * rho.values
    norm = w.sum()
    if not norm > tol:
        raise ValueError("vanishing density")
    return float(np.dot(w, f.values) / norm)


def packet_grid(q_min: float, q_max: float, a_max: float, n: int,
                margin: float = 8.0, periodic: bool = False) -> Grid:
    """Grid covering the center range padded by ``margin`` widths."""
    pad = margin * a_max
    return Grid(q_min - pad, q_max + pad, n, periodic=periodic)


def boundary_ratio(rho: np.ndarray) -> float:
    """Largest end-point density relative to the peak."""
    rho = np.asarray(rho)
    peak = rho.max()
    if peak <= 0:
        return math.inf
    return float(max(rho[0], rho[-1]) / peak)


def check_truncation(rho: np.ndarray, ratio: float = TRUNCATION_RATIO) -> None:
    r = boundary_ratio(rho)
    if not r < ratio:
        raise ValueError(f"domain too small: boundary density ratio {r:.3e} >= {ratio:.0e}")


_SECOND_DERIV = {
    2: [1.0, -2.0, 1.0],
    4: [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12],
    6: [1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90],
    8: [-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560],
}


def first_derivative(f: np.ndarray, dx: float) -> np.ndarray:
    """Second-order central first derivative, one-sided at the ends."""
    return np.gradient(f, dx, edge_order=2)


def second_derivative(f: np.ndarray, dx: float, order: int = 2) -> np.ndarray:
    """Central second derivative of the given even ``order``.

    End points use second-order one-sided closures; points closer to the
    ends than the stencil half-width fall back to the three-point stencil.
    """
    f = np.asarray(f)
    if order not in _SECOND_DERIV:
        raise ValueError(f"unsupported stencil order {order}")
    out = np.empty_like(f)
    inv = 1.0 / (dx * dx)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) * inv
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * inv
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) * inv
    if order > 2:
        coeffs = _SECOND_DERIV[order]
        p = order // 2
        n = f.size
        acc = np.zeros(n - 2 * p, dtype=f.dtype)
        for j, c in enumerate(coeffs):
            acc += c * f[j:n - 2 * p + j]
        out[p:n - p] = acc * inv
    return out
