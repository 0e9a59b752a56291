"""Trajectory directories: field snapshots plus run.csv and meta.json."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .sch_solver import TrajectoryRecord
from .spectral_core import SpectralField, read_field, write_field


def write_trajectory(path, rec: TrajectoryRecord, w_A: SpectralField | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    m = rec.meta.get("grid")
    for i, (u, w, z) in enumerate(zip(rec.u_snapshots, rec.w_snapshots, rec.z_snapshots)):
        write_field(path / f"u_{i:05d}.spf", u, m)
        write_field(path / f"w_{i:05d}.spf", w, m)
        write_field(path / f"z_{i:05d}.spf", z, m)
    if rec.reference is not None:
        write_field(path / "ref_u.spf", rec.reference, m)
    if w_A is not None:
        write_field(path / "ref_w.spf", w_A, m)
    with open(path / "snapshots.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "t"])
        for i, t in enumerate(rec.times):
            wr.writerow([i, repr(float(t))])
    with open(path / "run.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "t", "mass", "energy", "Y_L3_accum"])
        for n, row in enumerate(zip(rec.step_times, rec.mass_series, rec.energy_series, rec.y_l3_series)):
            wr.writerow([n, *(repr(float(x)) for x in row)])
    meta = {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in rec.meta.items()}
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_trajectory(path) -> tuple[TrajectoryRecord, SpectralField | None]:
    """Inverse of :func:`write_trajectory`; returns the record and w_A if stored."""
    path = Path(path)
    if not (path / "snapshots.csv").exists():
        raise FileNotFoundError(f"{path} is not a trajectory directory (no snapshots.csv)")
    meta = json.loads((path / "meta.json").read_text())
    if meta.get("sigma") is None:
        meta["sigma"] = math.inf
    rec = TrajectoryRecord(meta=meta)
    with open(path / "snapshots.csv") as fh:
        for row in csv.DictReader(fh):
            i = int(row["index"])
            rec.times.append(float(row["t"]))
            rec.u_snapshots.append(read_field(path / f"u_{i:05d}.spf")[0])
            rec.w_snapshots.append(read_field(path / f"w_{i:05d}.spf")[0])
            rec.z_snapshots.append(read_field(path / f"z_{i:05d}.spf")[0])
    with open(path / "run.csv") as fh:
        for row in csv.DictReader(fh):
            rec.step_times.append(float(row["t"]))
            rec.mass_series.append(float(row["mass"]))
            rec.energy_series.append(float(row["energy"]))
            rec.y_l3_series.append(float(row["Y_L3_accum"]))
    if (path / "ref_u.spf").exists():
        rec.reference = read_field(path / "ref_u.spf")[0]
    w_A = read_field(path / "ref_w.spf")[0] if (path / "ref_w.spf").exists() else None
    return rec, w_A
