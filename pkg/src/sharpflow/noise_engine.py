"""Singular noises, exact stochastic convolutions and Wick renormalisation.

Both noise families are diagonal in the cosine basis. Mode ``k`` of the noise
is an independent Brownian motion with per-unit-time variance

    a_k = 1                      (white, mass conserving)
    a_k = lambda_k * q_h(k)^2    (divergence of a mollified vector white noise)

and a_0 = 0 in both cases. The linear equation dZ = -eps Lap^2 Z dt + eps^sigma dW
is then a family of independent Ornstein-Uhlenbeck processes which we advance
with their exact transition law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .spectral_core import SpectralField, basis_1d, eigenvalues, grid_points, to_grid

SMALL_EXPONENT = 1e-8


class NoiseFamily(str, Enum):
    WHITE = "white"
    DIVERGENCE = "divergence"


@dataclass(frozen=True)
class NoiseSpec:
    family: NoiseFamily = NoiseFamily.WHITE
    sigma: float = 1.0
    h: float = 0.125
    cutoff: int = 64

    def __post_init__(self):
        object.__setattr__(self, "family", NoiseFamily(self.family))
        if self.sigma < 0:
            raise ValueError(f"noise.sigma must be >= 0, got {self.sigma}")
        if self.family is NoiseFamily.DIVERGENCE and not 0 < self.h <= 1:
            raise ValueError(f"noise.h must lie in (0, 1], got {self.h}")
        if self.cutoff < 1:
            raise ValueError(f"noise.cutoff must be positive, got {self.cutoff}")


def amplitude(sigma: float, eps: float) -> float:
    """eps^(2 sigma); ``sigma = inf`` switches the noise off."""
    if math.isinf(sigma):
        return 0.0
    return eps ** (2.0 * sigma)


def mollifier_symbol(k, h: float) -> float:
    """Gaussian mollifier acting on mode ``k``: exp(-h^2 lambda_k / 2)."""
    if h <= 0:
        raise ValueError(f"mollifier width must be positive, got {h}")
    k1, k2 = k
    return math.exp(-0.5 * h * h * math.pi**2 * (k1 * k1 + k2 * k2))


def mode_rates(spec: NoiseSpec) -> np.ndarray:
    """Per-unit-time variance a_k of each noise mode (a_0 = 0)."""
    lam = eigenvalues(spec.cutoff)
    if spec.family is NoiseFamily.WHITE:
        a = np.ones_like(lam)
    else:
        a = lam * np.exp(-(spec.h**2) * lam)
    a[0, 0] = 0.0
    return a


def relaxation_factor(x: np.ndarray) -> np.ndarray:
    """(1 - exp(-x)) / x, with a second-order Taylor branch for tiny x."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < SMALL_EXPONENT
    xs = x[small]
    out[small] = 1.0 - xs / 2.0 + xs * xs / 6.0
    xl = x[~small]
    out[~small] = -np.expm1(-xl) / xl
    return out


def convolution_variance(spec: NoiseSpec, eps: float, t: float) -> np.ndarray:
    """Variance of each mode of Z at time ``t`` started from zero.

    eps^(2 sigma) a_k (1 - exp(-2 eps lambda_k^2 t)) / (2 eps lambda_k^2)
    """
    lam = eigenvalues(spec.cutoff)
    return amplitude(spec.sigma, eps) * mode_rates(spec) * t * relaxation_factor(2.0 * eps * lam**2 * t)


class NoiseStream:
    """Counter-based Gaussian source keyed by (seed, replica, step).

    Draws for a given step never depend on which other steps or replicas were
    generated before, so Monte Carlo runs are reproducible under any schedule.
    The mode index is the position in the returned ``(N, N)`` array.
    """

    def __init__(self, seed: int = 0, replica: int = 0):
        self.seed = int(seed)
        self.replica = int(replica)

    def generator(self, step: int) -> np.random.Generator:
        key = np.array([self.seed, self.replica], dtype=np.uint64)
        counter = np.array([0, 0, int(step), 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=counter))

    def normals(self, step: int, n: int) -> np.ndarray:
        return self.generator(step).standard_normal((n, n))

    def __repr__(self):
        return f"NoiseStream(seed={self.seed}, replica={self.replica})"


def sample_increment(spec: NoiseSpec, eps: float, dt: float, stream: NoiseStream, step: int = 0) -> SpectralField:
    """Noise increment eps^sigma dW over ``dt`` in coefficient form."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    sd = np.sqrt(amplitude(spec.sigma, eps) * mode_rates(spec) * dt)
    c = sd * stream.normals(step, spec.cutoff)
    c[0, 0] = 0.0
    return SpectralField(c)


@dataclass(frozen=True)
class StochasticConvolutionState:
    """Mode coefficients of Z at time ``t``; ``step`` counts exact updates taken."""

    coeffs: np.ndarray
    t: float
    spec: NoiseSpec
    eps: float
    stream: NoiseStream = field(default_factory=NoiseStream)
    step: int = 0

    @classmethod
    def zero(cls, spec: NoiseSpec, eps: float, stream: NoiseStream | None = None) -> "StochasticConvolutionState":
        return cls(np.zeros((spec.cutoff, spec.cutoff)), 0.0, spec, eps, stream or NoiseStream())

    @property
    def field(self) -> SpectralField:
        return SpectralField(self.coeffs)

    def grid(self, m: int | None = None) -> np.ndarray:
        return to_grid(self.field, m)


def ou_exact_step(state: StochasticConvolutionState, dt: float, normals: np.ndarray | None = None) -> StochasticConvolutionState:
    """Advance Z by ``dt`` using the exact Ornstein-Uhlenbeck transition.

    z_k <- exp(-eps lambda_k^2 dt) z_k + xi_k with Var(xi_k) equal to the
    stochastic-convolution variance accumulated over ``dt``. ``normals`` can be
    supplied to drive several processes with the same Gaussians; otherwise they
    are drawn from the state's stream at the current step counter.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    spec, eps = state.spec, state.eps
    lam = eigenvalues(spec.cutoff)
    if normals is None:
        normals = state.stream.normals(state.step, spec.cutoff)
    sd = np.sqrt(convolution_variance(spec, eps, dt))
    z = np.exp(-eps * lam**2 * dt) * state.coeffs + sd * normals
    z[0, 0] = 0.0
    return replace(state, coeffs=z, t=state.t + dt, step=state.step + 1)


@dataclass(frozen=True)
class RenormConstant:
    """c(x) = E[Z(t,x)^2] on the midpoint grid, plus its spatial average."""

    pointwise: np.ndarray
    average: float
    t: float
    spec: NoiseSpec
    eps: float


def renorm_at(spec: NoiseSpec, eps: float, t: float, points) -> np.ndarray:
    """Closed-form c(x) at arbitrary points ``(P, 2)``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    var = convolution_variance(spec, eps, t)
    b1 = basis_1d(pts[:, 0], spec.cutoff) ** 2
    b2 = basis_1d(pts[:, 1], spec.cutoff) ** 2
    return np.einsum("pi,ij,pj->p", b1, var, b2)


def renorm_constant(spec: NoiseSpec, eps: float, t: float, m: int | None = None) -> RenormConstant:
    """Renormalisation constant via the Ito isometry on the mode expansion.

    c(x) = sum_k Var(z_k(t)) e_k(x)^2; the spatial mean of e_k^2 is one, so the
    average is the plain sum of the mode variances.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    m = spec.cutoff if m is None else int(m)
    var = convolution_variance(spec, eps, t)
    b = basis_1d(grid_points(m), spec.cutoff) ** 2
    c = b @ var @ b.T
    return RenormConstant(c, float(var.sum()), float(t), spec, float(eps))


def wick_powers(z, c: RenormConstant, t: float | None = None):
    """Return (Z, :Z^2:, :Z^3:) on the grid of ``c``.

    ``z`` is a grid array or a :class:`StochasticConvolutionState`; for the
    latter (or when ``t`` is given) the time stamps must agree with ``c.t``.
    """
    if isinstance(z, StochasticConvolutionState):
        t = z.t
        z = z.grid(c.pointwise.shape[0])
    if t is not None and not math.isclose(t, c.t, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError(f"time stamp mismatch: Z at t={t}, renormalisation constant at t={c.t}")
    z = np.asarray(z, dtype=float)
    cc = c.pointwise
    return z, z * z - cc, z**3 - 3.0 * cc * z


def shifted_convolution(z, mean_init: float, eps: float) -> np.ndarray:
    """Z plus the semigroup applied to the initial mean, which is the mean itself."""
    if isinstance(z, StochasticConvolutionState):
        z = z.grid()
    elif isinstance(z, SpectralField):
        z = to_grid(z)
    return np.asarray(z, dtype=float) + mean_init
