"""Leading-order sharp-interface profile and reference chemical potential.

The inner layer is the standing wave theta(z) = tanh(z / sqrt(2)), which solves
theta'' = theta^3 - theta exactly. With d the signed distance to the interface
(positive in the outer phase) the approximate solution is u_A = theta(d / eps).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .spectral_core import SpectralField, grid_points, to_coeffs


class ClearanceError(ValueError):
    """Interface too close to the boundary of the unit square for the given eps."""


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float] = (0.5, 0.5)
    radius: float = 0.25

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"interface.radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def curvature(self) -> float:
        return 1.0 / self.radius

    def clearance(self) -> float:
        cx, cy = self.center
        return min(cx, cy, 1.0 - cx, 1.0 - cy) - self.radius


@dataclass(frozen=True)
class FlatStrip:
    """Straight interface ``x_axis = position``; the outer phase lies at larger coordinate."""

    position: float = 0.5
    axis: int = 1

    def __post_init__(self):
        if self.axis not in (1, 2):
            raise ValueError(f"strip axis must be 1 or 2, got {self.axis}")

    @property
    def curvature(self) -> float:
        return 0.0

    def clearance(self) -> float:
        return min(self.position, 1.0 - self.position)


InterfaceGeometry = Circle | FlatStrip


def double_well(u):
    """F, f = F', f', f'' for F(u) = (u^2 - 1)^2 / 4."""
    u = np.asarray(u, dtype=float) if not np.isscalar(u) else float(u)
    return 0.25 * (u * u - 1.0) ** 2, u**3 - u, 3.0 * u * u - 1.0, 6.0 * u


@lru_cache(maxsize=None)
def surface_tension(formula: str = "paper") -> float:
    """Gibbs-Thomson constant by quadrature of the double well.

    ``paper``     (1/sqrt 2) int_{-1}^{1} F(s) ds      = 2 sqrt(2)/15
    ``classical`` int_{-1}^{1} sqrt(2 F(s)) ds          = 2 sqrt(2)/3
    ``matched``   -(1/2) int_{-1}^{1} sqrt(2 F(s)) ds   = -sqrt(2)/3, the value
                  reached by the chemical potential on a circle with u = -1 inside
    """
    F = lambda s: 0.25 * (s * s - 1.0) ** 2
    if formula == "paper":
        val, _ = integrate.quad(F, -1.0, 1.0)
        return val / math.sqrt(2.0)
    if formula == "classical":
        val, _ = integrate.quad(lambda s: math.sqrt(2.0 * F(s)), -1.0, 1.0)
        return val
    if formula == "matched":
        val, _ = integrate.quad(lambda s: math.sqrt(2.0 * F(s)), -1.0, 1.0)
        return -0.5 * val
    raise ValueError(f"profile.lambda_formula must be paper|classical|matched, got {formula!r}")


@dataclass(frozen=True)
class ProfileParams:
    eps: float
    lambda_formula: str = "paper"

    @property
    def lambda_const(self) -> float:
        return surface_tension(self.lambda_formula)


def signed_distance(geom: InterfaceGeometry, x) -> np.ndarray | float:
    """Signed distance, positive outside the circle / above the strip."""
    x = np.asarray(x, dtype=float)
    if isinstance(geom, Circle):
        cx, cy = geom.center
        d = np.hypot(x[..., 0] - cx, x[..., 1] - cy) - geom.radius
    else:
        d = x[..., geom.axis - 1] - geom.position
    return float(d) if np.ndim(d) == 0 else d


def profile_shape(z):
    return np.tanh(np.asarray(z) / math.sqrt(2.0))


def check_clearance(geom: InterfaceGeometry, eps: float) -> None:
    if geom.clearance() < 4.0 * eps:
        raise ClearanceError(
            f"interface clearance {geom.clearance():.4g} from the boundary is below 4*eps = {4 * eps:.4g}"
        )


def _grid_xy(m: int) -> np.ndarray:
    x = grid_points(m)
    return np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)


def profile_grid(geom: InterfaceGeometry, params: ProfileParams, m: int) -> np.ndarray:
    check_clearance(geom, params.eps)
    return profile_shape(signed_distance(geom, _grid_xy(m)) / params.eps)


def profile_field(geom: InterfaceGeometry, params: ProfileParams, cutoff: int, m: int | None = None) -> SpectralField:
    """u_A sampled on an ``m`` grid (default 2 * cutoff) and projected to modes."""
    m = 2 * cutoff if m is None else m
    return to_coeffs(profile_grid(geom, params, m), cutoff)


def potential_field(geom: InterfaceGeometry, params: ProfileParams, cutoff: int) -> SpectralField:
    """w_A: the constant lambda * H for a circle, zero for a flat strip."""
    check_clearance(geom, params.eps)
    return SpectralField.constant(cutoff, params.lambda_const * geom.curvature)


def limit_indicator(geom: InterfaceGeometry, m: int) -> np.ndarray:
    """1 - 2 chi(interior) on the grid; points exactly on the interface count as outside."""
    d = signed_distance(geom, _grid_xy(m))
    return np.where(d >= 0.0, 1.0, -1.0)


def hele_shaw_circle_check(geom: InterfaceGeometry, lam: float) -> tuple[float, float]:
    """Stationary Hele-Shaw datum for a circle: v = lam / R everywhere and zero normal velocity.

    A constant is harmonic, has zero normal derivative on the box boundary and
    equals lam * H on the circle, so both one-sided normal derivatives vanish.
    """
    if not isinstance(geom, Circle):
        raise TypeError(f"Hele-Shaw reference solution is only available for circles, got {type(geom).__name__}")
    return lam * geom.curvature, 0.0
