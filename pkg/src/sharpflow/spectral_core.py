"""Neumann-Laplacian eigenbasis on the unit square.

Fields are stored as coefficients against the L2-orthonormal cosine family

    e_(0,0) = 1,  e_(k1,0) = sqrt(2) cos(pi k1 x1),  e_(0,k2) = sqrt(2) cos(pi k2 x2),
    e_(k1,k2) = 2 cos(pi k1 x1) cos(pi k2 x2),

with eigenvalues lambda_k = pi^2 (k1^2 + k2^2) of -Laplacian. Grid samples live on
the midpoint grid x_i = (i + 1/2)/M, on which the orthonormal type-II DCT is an
exact change of basis, so transforms are invertible on the first M x M modes.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import fft

PI2 = np.pi**2
SNAPSHOT_MAGIC = b"SPF1"


def eigenvalue(k) -> float:
    """Eigenvalue of -Laplacian for mode ``k = (k1, k2)``."""
    k1, k2 = k
    return PI2 * float(k1 * k1 + k2 * k2)


def eigenvalues(n: int) -> np.ndarray:
    """All eigenvalues below the cutoff as an ``(n, n)`` array indexed by mode."""
    k = np.arange(n, dtype=float)
    return PI2 * (k[:, None] ** 2 + k[None, :] ** 2)


def grid_points(m: int) -> np.ndarray:
    """Midpoint grid coordinates in one direction."""
    return (np.arange(m) + 0.5) / m


def basis_1d(x, n: int) -> np.ndarray:
    """One-dimensional factors ``b_j(x)`` for ``j < n``; shape ``x.shape + (n,)``."""
    x = np.asarray(x, dtype=float)
    b = np.sqrt(2.0) * np.cos(np.pi * np.multiply.outer(x, np.arange(n)))
    b[..., 0] = 1.0
    return b


def eval_basis(k, x) -> float | np.ndarray:
    """Evaluate the basis function ``e_k`` at point(s) ``x = (x1, x2)``."""
    k1, k2 = k
    x1, x2 = x
    f1 = 1.0 if k1 == 0 else np.sqrt(2.0) * np.cos(np.pi * k1 * np.asarray(x1, dtype=float))
    f2 = 1.0 if k2 == 0 else np.sqrt(2.0) * np.cos(np.pi * k2 * np.asarray(x2, dtype=float))
    return f1 * f2


@dataclass(frozen=True)
class SpectralField:
    """Real scalar field on [0,1]^2 held as cosine-basis coefficients.

    ``coeffs[k1, k2]`` is the inner product of the field with ``e_(k1,k2)``;
    the array is copied on construction and made read-only.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"coefficients must be a square 2D array, got shape {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def cutoff(self) -> int:
        return self.coeffs.shape[0]

    @property
    def mean(self) -> float:
        return float(self.coeffs[0, 0])

    @classmethod
    def zeros(cls, n: int) -> "SpectralField":
        return cls(np.zeros((n, n)))

    @classmethod
    def constant(cls, n: int, value: float) -> "SpectralField":
        c = np.zeros((n, n))
        c[0, 0] = value
        return cls(c)

    @classmethod
    def mode(cls, n: int, k, amplitude: float = 1.0) -> "SpectralField":
        c = np.zeros((n, n))
        c[k[0], k[1]] = amplitude
        return cls(c)

    def grid(self, m: int | None = None) -> np.ndarray:
        return to_grid(self, m)

    def resized(self, n: int) -> "SpectralField":
        """Truncate or zero-pad to cutoff ``n``."""
        c = np.zeros((n, n))
        p = min(n, self.cutoff)
        c[:p, :p] = self.coeffs[:p, :p]
        return SpectralField(c)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_cutoff(self, other)
        return SpectralField(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_cutoff(self, other)
        return SpectralField(self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(-self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.coeffs * float(scalar))

    __rmul__ = __mul__


def _check_same_cutoff(a: SpectralField, b: SpectralField):
    if a.cutoff != b.cutoff:
        raise ValueError(f"cutoff mismatch: {a.cutoff} vs {b.cutoff}")


def to_coeffs(samples, cutoff: int | None = None) -> SpectralField:
    """Project midpoint-grid samples onto the first ``cutoff`` x ``cutoff`` modes."""
    g = np.asarray(samples, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"grid must be square M x M, got shape {g.shape}")
    m = g.shape[0]
    n = m if cutoff is None else int(cutoff)
    if n > m:
        raise ValueError(f"cutoff {n} exceeds grid size {m}")
    c = fft.dctn(g, type=2, norm="ortho") / m
    return SpectralField(c[:n, :n])


def to_grid(field: SpectralField, m: int | None = None) -> np.ndarray:
    """Evaluate a field on the ``m`` x ``m`` midpoint grid (default ``m = cutoff``)."""
    n = field.cutoff
    m = n if m is None else int(m)
    if m < n:
        raise ValueError(f"grid size {m} smaller than cutoff {n}")
    c = np.zeros((m, m))
    c[:n, :n] = field.coeffs
    return fft.idctn(c, type=2, norm="ortho") * m


def evaluate(field: SpectralField, points) -> np.ndarray:
    """Evaluate the truncated expansion at arbitrary points, shape ``(P, 2)``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    b1 = basis_1d(pts[:, 0], field.cutoff)
    b2 = basis_1d(pts[:, 1], field.cutoff)
    return np.einsum("pi,ij,pj->p", b1, field.coeffs, b2)


def sobolev_norm(g: SpectralField, alpha: float) -> float:
    """Norm sqrt(m(g)^2 + sum_{k != 0} lambda_k^alpha <g, e_k>^2).

    The mean term is always included, also for negative ``alpha``.
    """
    lam = eigenvalues(g.cutoff)
    w = np.zeros_like(lam)
    w[lam > 0] = lam[lam > 0] ** alpha
    total = g.coeffs[0, 0] ** 2 + np.sum(w * g.coeffs**2)
    return float(np.sqrt(total))


def frac_laplacian(g: SpectralField, s: float) -> SpectralField:
    """(-Laplacian)^s; the constant mode is annihilated for every ``s``."""
    lam = eigenvalues(g.cutoff)
    mult = np.zeros_like(lam)
    mult[lam > 0] = lam[lam > 0] ** s
    return SpectralField(mult * g.coeffs)


def laplacian(g: SpectralField) -> SpectralField:
    return SpectralField(-eigenvalues(g.cutoff) * g.coeffs)


def semigroup_apply(g: SpectralField, t: float, eps: float) -> SpectralField:
    """Apply exp(-eps t Laplacian^2) mode-wise."""
    if t < 0:
        raise ValueError(f"semigroup time must be non-negative, got {t}")
    lam = eigenvalues(g.cutoff)
    return SpectralField(np.exp(-eps * t * lam**2) * g.coeffs)


def write_field(path, field: SpectralField, m: int | None = None) -> None:
    """Binary snapshot: b'SPF1', N and M as little-endian int32, then N*N float64."""
    n = field.cutoff
    m = n if m is None else int(m)
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<ii", n, m))
        fh.write(np.ascontiguousarray(field.coeffs, dtype="<f8").tobytes())


def read_field(path) -> tuple[SpectralField, int]:
    data = Path(path).read_bytes()
    if data[:4] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a field snapshot (bad magic {data[:4]!r})")
    n, m = struct.unpack("<ii", data[4:12])
    body = data[12:]
    if len(body) != 8 * n * n:
        raise ValueError(f"{path}: expected {n * n} coefficients, found {len(body) // 8}")
    c = np.frombuffer(body, dtype="<f8").reshape(n, n)
    return SpectralField(c), m


def write_field_csv(path, field: SpectralField) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k1", "k2", "coeff"])
        for k1 in range(field.cutoff):
            for k2 in range(field.cutoff):
                w.writerow([k1, k2, repr(float(field.coeffs[k1, k2]))])
