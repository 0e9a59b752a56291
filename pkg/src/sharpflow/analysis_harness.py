"""Residual norms, rate fits, Monte Carlo aggregation and the spectral estimate."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy import integrate, optimize, stats

from .sch_solver import BlowUpError, TrajectoryRecord, stopping_monitor
from .spectral_core import SpectralField, basis_1d, evaluate, grid_points, sobolev_norm, to_grid

log = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "run_id", "eps", "sigma", "h", "seed", "L3_spacetime", "Linf_Hm1",
    "wres_L1_Hm2", "stopping_triggered", "mass_drift", "energy_final",
]
SWEEP_COLUMNS = ["axis", "value", "mean", "std", "count", "slope", "r2"]


def _series(times, fields):
    times = np.asarray(times, dtype=float)
    if len(fields) != len(times):
        raise ValueError(f"{len(times)} times but {len(fields)} snapshots")
    return times, fields


def norm_L3_spacetime(times, fields: Sequence[SpectralField], m: int | None = None) -> float:
    """(int_0^T int_D |R|^3 dx dt)^(1/3), trapezoid in time, midpoint rule in space."""
    times, fields = _series(times, fields)
    if len(times) < 2:
        raise ValueError("at least two snapshots are needed for a time integral")
    vals = [float(np.mean(np.abs(to_grid(f, m or 2 * f.cutoff)) ** 3)) for f in fields]
    return float(integrate.trapezoid(vals, times)) ** (1.0 / 3.0)


def norm_Linf_Hm1(times, fields: Sequence[SpectralField]) -> float:
    """max over snapshots of the H^-1 norm (mean term included)."""
    times, fields = _series(times, fields)
    if len(times) < 1:
        raise ValueError("no snapshots")
    return max(sobolev_norm(f, -1.0) for f in fields)


def norm_L1_Hm2(times, fields: Sequence[SpectralField]) -> float:
    times, fields = _series(times, fields)
    if len(times) < 2:
        raise ValueError("at least two snapshots are needed for a time integral")
    return float(integrate.trapezoid([sobolev_norm(f, -2.0) for f in fields], times))


@dataclass
class ResidualReport:
    L3_spacetime: float
    Linf_Hm1: float
    wres_L1_Hm2: float
    stopping_triggered: bool
    eps: float
    sigma: float
    h: float
    seed: int
    run_id: str = ""
    mass_drift: float = 0.0
    energy_final: float = float("nan")
    cadence: int = 1

    def row(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_COLUMNS}


def residual_report(rec: TrajectoryRecord, w_A: SpectralField, gamma: float = 1.0, run_id: str = "") -> ResidualReport:
    """The three residual norms of a trajectory tracked against its reference profile."""
    R = rec.residuals()
    wres = [w - w_A.resized(w.cutoff) for w in rec.w_snapshots]
    meta = rec.meta
    triggered, _ = stopping_monitor(rec, gamma, meta["eps"])
    mass = np.asarray(rec.mass_series)
    return ResidualReport(
        L3_spacetime=norm_L3_spacetime(rec.times, R, meta.get("grid")),
        Linf_Hm1=norm_Linf_Hm1(rec.times, R),
        wres_L1_Hm2=norm_L1_Hm2(rec.times, wres),
        stopping_triggered=triggered,
        eps=meta["eps"],
        sigma=meta["sigma"],
        h=meta["h"],
        seed=meta["seed"],
        run_id=run_id,
        mass_drift=float(np.max(np.abs(mass - mass[0]))),
        energy_final=rec.energy_series[-1],
        cadence=meta["cadence"],
    )


def write_report_csv(path, reports: Sequence[ResidualReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        for r in reports:
            w.writerow({k: _fmt(v) for k, v in r.row().items()})


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return v


# --- interface tracking ------------------------------------------------------------

def zero_level_set(u: SpectralField, center, r_lo: float, r_hi: float, n_rays: int = 64) -> np.ndarray:
    """Points where ``u`` vanishes along ``n_rays`` rays from ``center``.

    Each ray is bracketed on [r_lo, r_hi] and solved with Brent's method on the
    spectral interpolant. Returns an ``(n_rays, 2)`` array.
    """
    cx, cy = center
    pts = []
    for th in np.linspace(0.0, 2.0 * np.pi, n_rays, endpoint=False):
        d = np.array([np.cos(th), np.sin(th)])
        fun = lambda r: float(evaluate(u, [[cx + r * d[0], cy + r * d[1]]])[0])
        r = optimize.brentq(fun, r_lo, r_hi, xtol=1e-12)
        pts.append((cx + r * d[0], cy + r * d[1]))
    return np.array(pts)


# --- spectral estimate -------------------------------------------------------

def _mirror_symmetric(g: np.ndarray, axis: int, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(g - np.flip(g, axis=axis))) <= tol * max(1.0, np.max(np.abs(g))))


def spectral_estimate_check(u_A: SpectralField, eps: float, n_test: int = 16, m: int | None = None) -> float:
    """Smallest generalized Rayleigh quotient of the linearized Cahn-Hilliard form.

    min over mean-free w in span{e_k : 0 <= k1, k2 <= n_test, k != 0} of

        [eps ||w||_{H1}^2 + (1/eps) <f'(u_A) w, w>] / ||w||_{H-1}^2,

    solved as a dense symmetric generalized eigenproblem. The potential term is
    assembled by midpoint quadrature on an ``m`` x ``m`` grid. When f'(u_A) is
    mirror symmetric in a coordinate, modes of opposite parity in that
    coordinate decouple and the problem is split into independent blocks.
    """
    if n_test + 1 > u_A.cutoff:
        raise ValueError(f"n_test={n_test} exceeds the field cutoff {u_A.cutoff}")
    m = max(256, 4 * (n_test + 1)) if m is None else m
    ua = to_grid(u_A, m)
    g = 3.0 * ua * ua - 1.0
    b = basis_1d(grid_points(m), n_test + 1)
    ks = np.arange(n_test + 1)
    split1 = _mirror_symmetric(g, 0)
    split2 = _mirror_symmetric(g, 1)
    groups1 = [ks[ks % 2 == p] for p in (0, 1)] if split1 else [ks]
    groups2 = [ks[ks % 2 == p] for p in (0, 1)] if split2 else [ks]
    best = math.inf
    for k1 in groups1:
        half = np.einsum("ai,ak,ab->ikb", b[:, k1], b[:, k1], g) / m
        for k2 in groups2:
            a = np.einsum("ikb,bj,bl->ijkl", half, b[:, k2], b[:, k2]) / m
            p = len(k1) * len(k2)
            a = a.reshape(p, p)
            lam = (np.pi**2 * (k1[:, None] ** 2 + k2[None, :] ** 2)).ravel()
            keep = lam > 0
            if not keep.any():
                continue
            a = a[np.ix_(keep, keep)]
            lam = lam[keep]
            q = eps * np.diag(lam) + a / eps
            mu = scipy.linalg.eigh(q, np.diag(1.0 / lam), eigvals_only=True, subset_by_index=[0, 0])
            best = min(best, float(mu[0]))
    return best


def diagonal_quotient(eps: float, fprime: float, n_test: int) -> float:
    """Closed form of the quotient when f'(u_A) is a constant: min_k lambda_k (eps lambda_k + f'/eps)."""
    k = np.arange(n_test + 1)
    lam = (np.pi**2 * (k[:, None] ** 2 + k[None, :] ** 2)).ravel()
    lam = lam[lam > 0]
    return float(np.min(lam * (eps * lam + fprime / eps)))


# --- fitting and Monte Carlo -----------------------------------------------------

def rate_fit(points) -> tuple[float, float, float]:
    """Least squares line through (log x, log y); returns (slope, intercept, r2)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("rate fit needs at least three (x, y) points")
    if np.any(pts <= 0):
        raise ValueError("rate fit needs strictly positive x and y")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    z = stats.norm.ppf(0.5 + confidence / 2)
    p = successes / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class MonteCarloPoint:
    value: float
    mean: float
    std: float
    count: int
    std_defined: bool
    values: np.ndarray
    exceed_freq: float | None = None
    exceed_ci: tuple[float, float] | None = None
    failures: dict = field(default_factory=dict)

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(self.count) if self.count else math.nan


def monte_carlo(
    measurement: Callable[[int, int], float],
    n_replicas: int,
    base_seed: int = 0,
    threshold: float | None = None,
    value: float = math.nan,
    threads: int = 1,
    order: Sequence[int] | None = None,
) -> MonteCarloPoint:
    """Run ``measurement(seed, replica_id)`` for every replica and aggregate.

    Results are stored by replica id and reduced in id order, so the aggregate
    does not depend on ``order`` or on the number of threads. Replicas that blow
    up are reported in ``failures`` and excluded from the statistics.
    """
    if n_replicas < 1:
        raise ValueError("n_replicas must be >= 1")
    ids = list(range(n_replicas)) if order is None else list(order)
    if sorted(ids) != list(range(n_replicas)):
        raise ValueError("order must be a permutation of the replica ids")
    results: dict[int, float] = {}
    failures: dict[int, str] = {}

    def one(rid):
        try:
            return rid, float(measurement(base_seed, rid)), None
        except BlowUpError as exc:
            return rid, math.nan, str(exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, ids))
    else:
        out = [one(r) for r in ids]
    for rid, val, err in out:
        if err is None:
            results[rid] = val
        else:
            failures[rid] = err
            log.warning("replica %d failed: %s", rid, err)

    vals = np.array([results[r] for r in sorted(results)])
    count = len(vals)
    mean = float(np.mean(vals)) if count else math.nan
    std_defined = count > 1
    std = float(np.std(vals, ddof=1)) if std_defined else 0.0
    point = MonteCarloPoint(value, mean, std, count, std_defined, vals, failures=failures)
    if threshold is not None and count:
        k = int(np.sum(vals > threshold))
        point.exceed_freq = k / count
        point.exceed_ci = wilson_interval(k, count)
    return point


@dataclass
class SweepResult:
    axis: str
    points: list
    fitted_slope: float = math.nan
    fit_r2: float = math.nan

    def fit(self) -> "SweepResult":
        if len(self.points) >= 3:
            self.fitted_slope, _, self.fit_r2 = rate_fit([(p.value, p.mean) for p in self.points])
        return self

    def rows(self):
        for p in self.points:
            yield {
                "axis": self.axis, "value": repr(float(p.value)), "mean": repr(p.mean),
                "std": repr(p.std), "count": p.count,
                "slope": repr(self.fitted_slope), "r2": repr(self.fit_r2),
            }


def write_sweep(path, sweep: SweepResult, title: str = "") -> None:
    """Sweep CSV plus a gnuplot script next to it."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for row in sweep.rows():
            w.writerow(row)
    plt = path.with_suffix(".plt")
    plt.write_text(
        "set datafile separator ','\n"
        "set logscale xy\n"
        f"set xlabel '{sweep.axis}'\n"
        "set ylabel 'mean'\n"
        f"set title '{title or path.stem}'\n"
        f"set terminal pngcairo size 800,600\nset output '{path.stem}.png'\n"
        f"plot '{path.name}' every ::1 using 2:3:4 with yerrorlines title 'mean +/- std'\n"
    )
