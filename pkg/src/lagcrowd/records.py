"""Snapshot and trajectory rows, CSV sinks and readers."""

from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

SNAPSHOT_HEADER = ("time", "epoch", "cell_id", "cx", "cy", "area", "n_peds", "density")
TRAJECTORY_HEADER = ("time", "epoch", "cell_id", "cx", "cy", "n_peds")
MESH_HEADER = ("epoch", "cell_id", "x1", "y1", "x2", "y2", "x3", "y3")
TRAJECTORY_MIN_PEDS = 1.0


class SnapshotRecord(NamedTuple):
    time: float
    epoch: int
    cell_id: int
    cx: float
    cy: float
    area: float
    n_peds: float
    density: float


class TrajectoryRecord(NamedTuple):
    time: float
    epoch: int
    cell_id: int
    cx: float
    cy: float
    n_peds: float


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9g}"


def snapshot_records(state) -> list[SnapshotRecord]:
    c = state.mesh.triangles().mean(axis=1)
    cells = state.cells
    return [SnapshotRecord(float(state.time), int(state.epoch), i, float(c[i, 0]), float(c[i, 1]),
                           float(cells.area[i]), float(cells.n_peds[i]), float(cells.density[i]))
            for i in range(state.mesh.n_cells)]


def trajectory_records(state) -> list[TrajectoryRecord]:
    cells = state.cells
    keep = np.flatnonzero(cells.n_peds >= TRAJECTORY_MIN_PEDS)
    if not len(keep):
        return []
    c = state.mesh.triangles()[keep].mean(axis=1)
    return [TrajectoryRecord(float(state.time), int(state.epoch), int(i), float(x), float(y), float(cells.n_peds[i]))
            for i, (x, y) in zip(keep, c)]


def _write_rows(path, header, rows) -> None:
    path = Path(path)
    try:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_snapshot(records: Iterable[SnapshotRecord], path) -> None:
    rows = sorted(records, key=lambda r: (r.time, r.cell_id))
    _write_rows(path, SNAPSHOT_HEADER, rows)


def write_trajectories(records: Iterable[TrajectoryRecord], path) -> None:
    rows = sorted(records, key=lambda r: (r.time, r.epoch, r.cell_id))
    _write_rows(path, TRAJECTORY_HEADER, rows)


def write_mesh(triangles: np.ndarray, epoch: int, path) -> None:
    rows = [(int(epoch), i, *t.ravel().tolist()) for i, t in enumerate(triangles)]
    _write_rows(path, MESH_HEADER, rows)


def _read_rows(path, header):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        got = next(reader, None)
        if tuple(got or ()) != header:
            raise ValueError(f"{path}: unexpected header {got}")
        return list(reader)


def read_snapshot(path) -> list[SnapshotRecord]:
    return [SnapshotRecord(float(r[0]), int(r[1]), int(r[2]), *map(float, r[3:]))
            for r in _read_rows(path, SNAPSHOT_HEADER)]


def read_trajectories(path) -> list[TrajectoryRecord]:
    return [TrajectoryRecord(float(r[0]), int(r[1]), int(r[2]), *map(float, r[3:]))
            for r in _read_rows(path, TRAJECTORY_HEADER)]


def read_mesh(path) -> np.ndarray:
    rows = _read_rows(path, MESH_HEADER)
    return np.array([[float(v) for v in r[2:]] for r in rows]).reshape(-1, 3, 2)


def time_label(t: float) -> str:
    return f"{t:g}"


def snapshot_path(out_dir, t: float) -> Path:
    return Path(out_dir) / f"snapshot_{time_label(t)}.csv"


def mesh_path(out_dir, t: float) -> Path:
    return Path(out_dir) / f"mesh_{time_label(t)}.csv"


class MemorySink:
    """Collects rows in memory; mostly for tests."""

    def __init__(self):
        self.snapshots: dict[float, list[SnapshotRecord]] = {}
        self.trajectories: list[TrajectoryRecord] = []

    def on_snapshot(self, time: float, state) -> None:
        self.snapshots[time] = snapshot_records(state)

    def on_step(self, state) -> None:
        self.trajectories.extend(trajectory_records(state))

    def close(self) -> None:
        pass


class CsvSink:
    """Writes ``snapshot_<t>.csv``/``mesh_<t>.csv`` as they come and
    ``trajectories.csv`` on close."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        os.makedirs(self.out_dir, exist_ok=True)
        self.trajectories: list[TrajectoryRecord] = []
        self.written: list[Path] = []

    def on_snapshot(self, time: float, state) -> None:
        path = snapshot_path(self.out_dir, time)
        write_snapshot(snapshot_records(state), path)
        mpath = mesh_path(self.out_dir, time)
        write_mesh(state.mesh.triangles(), state.epoch, mpath)
        self.written += [path, mpath]

    def on_step(self, state) -> None:
        self.trajectories.extend(trajectory_records(state))

    def close(self) -> None:
        path = self.out_dir / "trajectories.csv"
        write_trajectories(self.trajectories, path)
        self.written.append(path)
