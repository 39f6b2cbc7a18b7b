"""Time loop: vertex motion with the crowd, remesh triggers and conservative remap."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from . import records
from .flowmodel import ModelParams, StaticField, compose_velocity
from .geometry import clip_triangle_triangle, point_in_triangle, polygon_area
from .mesh import (
    EPSILON_AXIS,
    GRADIENT_SCHEMES,
    CellState,
    Lattice,
    Mesh,
    build_lattice_mesh,
    cell_density_update,
    centroids,
    side_for_area,
    vertex_fields,
)

if TYPE_CHECKING:
    from .scenarios import ScenarioSpec

log = logging.getLogger(__name__)

CONSERVATION_RTOL = 1e-6
COVERAGE_RTOL = 1e-6


class SimulationError(RuntimeError):
    """A step could not be completed."""


class RemeshError(SimulationError):
    """The new mesh does not cover the old one."""


@dataclass(frozen=True)
class NumericalParams:
    dt: float = 1.0
    remesh_alpha: float = 0.01
    cell_area: float = 56.9
    domain_x: tuple[float, float] = (0.0, 120.0)
    domain_y: tuple[float, float] = (0.0, 120.0)
    remesh_margin: float | None = None
    gradient_scheme: str = "line"
    epsilon: float = 1e-9
    epsilon_axis: float = EPSILON_AXIS

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.remesh_alpha < 1:
            raise ValueError(f"remesh_alpha must be in (0, 1), got {self.remesh_alpha}")
        if not self.cell_area > 0:
            raise ValueError(f"cell_area must be positive, got {self.cell_area}")
        if self.remesh_margin is not None and self.remesh_margin < 0:
            raise ValueError(f"remesh_margin must be nonnegative, got {self.remesh_margin}")
        if self.gradient_scheme not in GRADIENT_SCHEMES:
            raise ValueError(f"gradient_scheme must be one of {GRADIENT_SCHEMES}")

    @property
    def lattice(self) -> Lattice:
        return Lattice((self.domain_x[0], self.domain_y[0]), side_for_area(self.cell_area))

    @property
    def margin(self) -> float:
        """Remesh margin; defaults to the circumcircle diameter of a cell."""
        if self.remesh_margin is not None:
            return self.remesh_margin
        return 2.0 * side_for_area(self.cell_area) / math.sqrt(3.0)


@dataclass
class VertexState:
    density: np.ndarray
    gradient: np.ndarray
    speed: np.ndarray
    velocity: np.ndarray


@dataclass
class RemeshReport:
    jam_cells: np.ndarray
    flipped_cells: np.ndarray
    stretched_cells: np.ndarray

    @property
    def needed(self) -> bool:
        return bool(len(self.jam_cells) or len(self.flipped_cells) or len(self.stretched_cells))

    @property
    def conditions(self) -> list[str]:
        out = []
        if len(self.jam_cells):
            out.append("jam")
        if len(self.flipped_cells):
            out.append("flip")
        if len(self.stretched_cells):
            out.append("stretch")
        return out

    def __str__(self) -> str:
        if not self.needed:
            return "no remesh"
        return (f"remesh ({', '.join(self.conditions)}): jam={self.jam_cells.tolist()} "
                f"flipped={self.flipped_cells.tolist()} stretched={self.stretched_cells.tolist()}")


@dataclass
class SimulationState:
    mesh: Mesh
    cells: CellState
    vertices: VertexState | None = None
    time: float = 0.0
    step_index: int = 0
    remesh_count: int = 0
    last_report: RemeshReport | None = None

    @property
    def epoch(self) -> int:
        return self.mesh.epoch

    @property
    def total(self) -> float:
        return self.cells.total


def initial_state(mesh: Mesh, n_peds, eps: float = 1e-9) -> SimulationState:
    cells = CellState.from_counts(mesh, n_peds, eps)
    if np.any(cells.signed_area <= 0):
        raise ValueError("initial mesh must have counter-clockwise cells of positive area")
    return SimulationState(mesh, cells)


def evaluate_vertices(mesh: Mesh, cells: CellState, static_field: StaticField, model: ModelParams,
                      numerics: NumericalParams) -> VertexState:
    rho_v, grad = vertex_fields(mesh, cells.density, numerics.gradient_scheme, numerics.epsilon,
                                numerics.epsilon_axis)
    e_stat = static_field(mesh.vertices)
    velocity = compose_velocity(e_stat, grad, rho_v, model)
    speed = np.hypot(velocity[:, 0], velocity[:, 1])
    return VertexState(rho_v, grad, speed, velocity)


def remesh_needed(state: SimulationState, model: ModelParams, numerics: NumericalParams) -> RemeshReport:
    """Check the jam, flip and stretch conditions on current cell areas."""
    c = state.cells
    with np.errstate(invalid="ignore"):
        jam = np.flatnonzero(c.density > model.rho_jam)
    flipped = np.flatnonzero(c.signed_area < 0)
    stretched = np.flatnonzero(c.area / c.initial_area < numerics.remesh_alpha)
    return RemeshReport(jam, flipped, stretched)


def _locate(mesh: Mesh, pt, eps: float) -> int | None:
    lat = mesh.lattice
    j = math.floor((pt[1] - lat.origin[1]) / lat.height)
    u = math.floor(2.0 * (pt[0] - lat.origin[0]) / lat.side)
    tris = mesh.triangles()
    for jj in (j, j - 1, j + 1):
        for m in range(u - 2, u + 2):
            cid = mesh.lattice_cell_id(jj, m)
            if cid is not None and point_in_triangle(pt, tris[cid], eps):
                return cid
    return None


def remap_counts(old_mesh: Mesh, old_cells: CellState, new_mesh: Mesh, eps: float = 1e-9) -> np.ndarray:
    """Transfer cell counts onto a lattice mesh by intersection areas.

    Each old cell with positive area hands ``N_i * A*_ij / A_i`` to every new
    cell ``j`` it overlaps.  Old cells with nonpositive signed area give their
    whole count to the new cell containing their centroid.
    """
    lat = new_mesh.lattice
    if lat is None:
        raise ValueError("remap target must be a lattice mesh")
    new_tris = new_mesh.triangles()
    old_tris = old_mesh.triangles()
    out = np.zeros(new_mesh.n_cells)
    h, half = lat.height, 0.5 * lat.side
    for i in np.flatnonzero(old_cells.n_peds > 0):
        n_i = old_cells.n_peds[i]
        tri = old_tris[i]
        if old_cells.signed_area[i] <= eps * eps:
            cid = _locate(new_mesh, tri.mean(axis=0), eps)
            if cid is None:
                raise RemeshError(f"collapsed cell {i} lies outside the new mesh")
            out[cid] += n_i
            continue
        a_i = old_cells.signed_area[i]
        (xa, ya), (xb, yb) = tri.min(axis=0), tri.max(axis=0)
        j_lo = math.floor((ya - lat.origin[1]) / h)
        j_hi = math.floor((yb - lat.origin[1]) / h)
        m_lo = math.floor((xa - lat.origin[0]) / half) - 2
        m_hi = math.floor((xb - lat.origin[0]) / half)
        covered = 0.0
        for j in range(j_lo, j_hi + 1):
            for m in range(m_lo, m_hi + 1):
                cid = new_mesh.lattice_cell_id(j, m)
                if cid is None:
                    continue
                a_star = polygon_area(clip_triangle_triangle(tri, new_tris[cid], eps))
                if a_star > 0.0:
                    out[cid] += n_i * a_star / a_i
                    covered += a_star
        if abs(covered - a_i) > COVERAGE_RTOL * a_i + eps:
            raise RemeshError(f"old cell {i} only {covered / a_i:.6%} covered by the new mesh")
    return out


def remesh(state: SimulationState, numerics: NumericalParams) -> SimulationState:
    """Replace the mesh by a fresh lattice mesh and remap pedestrian counts.

    The new mesh covers the bounding box of all occupied cells plus
    ``numerics.margin`` and is aligned to the original lattice.
    """
    mesh, cells = state.mesh, state.cells
    occupied = np.flatnonzero(cells.n_peds > 0)
    pts = mesh.vertices[mesh.cells[occupied]].reshape(-1, 2) if len(occupied) else mesh.vertices
    lo, hi = pts.min(axis=0) - numerics.margin, pts.max(axis=0) + numerics.margin
    lattice = numerics.lattice
    x_range, y_range = (float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1]))
    rng = lattice.covering_range(x_range, y_range)
    new_mesh = build_lattice_mesh(lattice, rng, epoch=mesh.epoch + 1, bounds=(x_range, y_range))
    counts = remap_counts(mesh, cells, new_mesh, numerics.epsilon)
    new_cells = CellState.from_counts(new_mesh, counts, numerics.epsilon)
    return SimulationState(new_mesh, new_cells, None, state.time, state.step_index,
                           state.remesh_count + 1, state.last_report)


def step(state: SimulationState, model: ModelParams, numerics: NumericalParams,
         static_field: StaticField) -> SimulationState:
    """Advance one explicit Euler step of vertex motion.

    Order: densities, vertex fields from that snapshot, motion, remesh check
    on the moved mesh, time advance.
    """
    cells = cell_density_update(state.mesh, state.cells, numerics.epsilon)
    state = SimulationState(state.mesh, cells, state.vertices, state.time, state.step_index,
                            state.remesh_count, state.last_report)
    if np.any(cells.degenerate):
        log.debug("step %d: degenerate cells, forced remesh", state.step_index)
        state = remesh(state, numerics)
        cells = state.cells

    vs = evaluate_vertices(state.mesh, cells, static_field, model, numerics)
    moved = state.mesh.moved(state.mesh.vertices + numerics.dt * vs.velocity)
    cells = cell_density_update(moved, cells, numerics.epsilon)
    idx = state.step_index + 1
    new = SimulationState(moved, cells, vs, idx * numerics.dt, idx, state.remesh_count, None)
    report = remesh_needed(new, model, numerics)
    new.last_report = report
    if report.needed:
        log.debug("step %d: %s", idx, report)
        try:
            new = remesh(new, numerics)
        except RemeshError as exc:
            raise RemeshError(f"step {idx}: {exc}; {report}") from exc
        new.last_report = report
        if np.any(new.cells.signed_area <= 0):
            raise SimulationError(f"step {idx}: remesh left nonpositive cell areas")
    return new


def advect_tracers(points, static_field: StaticField, model: ModelParams, dt: float, n_steps: int) -> np.ndarray:
    """Move zero-density passive points with the same velocity rule as mesh vertices.

    Returns the positions after every step, shape ``(n_steps + 1, n_points, 2)``.
    """
    p = np.array(points, dtype=float).reshape(-1, 2)
    out = np.empty((n_steps + 1,) + p.shape)
    out[0] = p
    zero_rho = np.zeros(len(p))
    zero_grad = np.zeros_like(p)
    for k in range(n_steps):
        p = p + dt * compose_velocity(static_field(p), zero_grad, zero_rho, model)
        out[k + 1] = p
    return out


@dataclass
class RunResult:
    state: SimulationState
    initial_total: float
    snapshots: dict[float, list[records.SnapshotRecord]] = field(default_factory=dict)
    meshes: dict[float, np.ndarray] = field(default_factory=dict)
    trajectories: list[records.TrajectoryRecord] = field(default_factory=list)
    totals: list[float] = field(default_factory=list)
    remesh_steps: list[int] = field(default_factory=list)


def _steps_for(t: float, dt: float) -> int:
    k = round(t / dt)
    if abs(k * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not a multiple of dt={dt}")
    return k


def run(scenario: "ScenarioSpec", duration: float, snapshot_times: Sequence[float] = (),
        sinks: Iterable = ()) -> RunResult:
    """Simulate ``duration`` seconds, emitting snapshots and trajectory rows.

    Sinks receive ``on_snapshot(time, state)`` at each requested time and
    ``on_step(state)`` after every step (including the initial state).
    """
    if duration < 0:
        raise ValueError(f"duration must be nonnegative, got {duration}")
    numerics, model = scenario.numerics, scenario.model
    n_steps = _steps_for(duration, numerics.dt)
    snap_steps: dict[int, float] = {}
    for t in snapshot_times:
        if not 0 <= t <= duration:
            raise ValueError(f"snapshot time {t} outside [0, {duration}]")
        snap_steps[_steps_for(t, numerics.dt)] = float(t)
    sinks = list(sinks)
    field_ = scenario.static_field()
    state = scenario.initial_state()
    total0 = state.total
    result = RunResult(state, total0)

    def emit(st: SimulationState) -> None:
        result.totals.append(st.total)
        result.trajectories.extend(records.trajectory_records(st))
        t_snap = snap_steps.get(st.step_index)
        if t_snap is not None:
            result.snapshots[t_snap] = records.snapshot_records(st)
            result.meshes[t_snap] = st.mesh.triangles().copy()
        for sink in sinks:
            sink.on_step(st)
            if t_snap is not None:
                sink.on_snapshot(t_snap, st)

    emit(state)
    for _ in range(n_steps):
        try:
            state = step(state, model, numerics, field_)
        except (FloatingPointError, ValueError) as exc:
            raise SimulationError(f"step {state.step_index + 1}: {exc}") from exc
        if state.last_report is not None and state.last_report.needed:
            result.remesh_steps.append(state.step_index)
        drift = abs(state.total - total0) / total0 if total0 > 0 else abs(state.total)
        if drift > CONSERVATION_RTOL:
            raise SimulationError(f"step {state.step_index}: pedestrian total drifted by {drift:.3e}")
        emit(state)
    result.state = state
    return result
