"""CSV, JSON and npz persistence of trajectories."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from ..diagnostics import DiagnosticRecord
from ..model import LagState
from ..solver import Trajectory

TIMESERIES_HEADER = DiagnosticRecord.columns()
SNAPSHOT_HEADER = ("x", "r", "rho", "u")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_timeseries(traj: Trajectory, sink: str | Path) -> Path:
    if not traj.records:
        raise ValueError("trajectory has no records")
    path = Path(sink)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMESERIES_HEADER)
        for rec in traj.records:
            w.writerow([_fmt(v) for v in rec.values()])
    return path


def read_timeseries(source: str | Path) -> list[DiagnosticRecord]:
    path = Path(source)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TIMESERIES_HEADER:
        raise ValueError(f"{path}: unexpected time-series header")
    return [DiagnosticRecord(*(float(v) for v in row)) for row in rows[1:]]


def face_density(state: LagState) -> np.ndarray:
    """Face densities: harmonic mean of neighbouring cells, one-sided at the ends."""
    rho = state.rho
    out = np.empty(rho.shape[0] + 1)
    out[0], out[-1] = rho[0], rho[-1]
    out[1:-1] = 2.0 / (1.0 / rho[1:] + 1.0 / rho[:-1])
    return out


def write_snapshot(state: LagState, sink: str | Path) -> Path:
    path = Path(sink)
    x = np.arange(state.r.shape[0]) * state.dx
    rho = face_density(state)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNAPSHOT_HEADER)
        for row in zip(x, state.r, rho, state.u):
            w.writerow([_fmt(v) for v in row])
    return path


def read_snapshot(source: str | Path) -> dict[str, np.ndarray]:
    data = np.loadtxt(source, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(SNAPSHOT_HEADER)}


def snapshot_name(tau: float) -> str:
    return f"snapshot_t{tau:012.6f}.csv"


def write_snapshots(traj: Trajectory, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    return [write_snapshot(s, out_dir / snapshot_name(t)) for t, s in sorted(traj.snapshots.items())]


def write_npz(traj: Trajectory, sink: str | Path) -> Path:
    """Stored states stacked by sample time (all states share the grid)."""
    path = Path(sink)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        path,
        tau=np.array([s.tau for s in traj.states]),
        rho=np.array([s.rho for s in traj.states]),
        u=np.array([s.u for s in traj.states]),
        r=np.array([s.r for s in traj.states]),
    )
    return path


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_summary(sink: str | Path, *, config: dict, final_record: DiagnosticRecord | None,
                  report: dict | None, timing: dict) -> Path:
    path = Path(sink)
    body = {
        "config": config,
        "final_record": None if final_record is None else dict(zip(TIMESERIES_HEADER, final_record.values())),
        "report": report,
        "timing": timing,
    }
    with _open_for_write(path) as fh:
        json.dump(_jsonable(body), fh, indent=2, sort_keys=False)
        fh.write("\n")
    return path


def merge_summaries(paths: Iterable[str | Path], sink: str | Path) -> Path:
    """Concatenate per-run summaries in the given order."""
    merged = [json.loads(Path(p).read_text()) for p in paths]
    path = Path(sink)
    with _open_for_write(path) as fh:
        json.dump(merged, fh, indent=2)
        fh.write("\n")
    return path
