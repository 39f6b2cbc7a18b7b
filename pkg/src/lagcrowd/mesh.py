"""Staggered triangular mesh: densities live on cells, velocities on vertices.

Regular meshes are cut from an equilateral lattice.  Lattice vertices are
addressed by ``(k, j)`` with ``k`` counted in half side lengths and ``j`` the
row; a vertex exists where ``k - j`` is even.  Triangle ``m`` of row ``j``
spans ``k`` in ``[m, m + 2]``; it points up when ``m - j`` is even.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import EPSILON

GRADIENT_SCHEMES = ("line", "paper-literal")
EPSILON_AXIS = 1e-6
# directions closer than ~11 degrees are treated as one line in the gradient fit
_LINE_RCOND = 1e-2


def side_for_area(cell_area: float) -> float:
    """Side length of the equilateral triangle with the given area."""
    return math.sqrt(4.0 * cell_area / math.sqrt(3.0))


@dataclass(frozen=True)
class Lattice:
    origin: tuple[float, float]
    side: float

    @property
    def height(self) -> float:
        return self.side * math.sqrt(3.0) / 2.0

    def point(self, k: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + 0.5 * k * self.side, self.origin[1] + j * self.height)

    @staticmethod
    def triangle_nodes(m: int, j: int) -> tuple[tuple[int, int], ...]:
        if (m - j) % 2 == 0:
            return ((m, j), (m + 2, j), (m + 1, j + 1))
        return ((m + 1, j), (m + 2, j + 1), (m, j + 1))

    def covering_range(self, x_range, y_range) -> tuple[int, int, int, int]:
        """Row and triangle index ranges ``(j0, j1, m0, m1)`` covering a rectangle."""
        (xa, xb), (ya, yb) = x_range, y_range
        h = self.height
        j0 = math.floor((ya - self.origin[1]) / h)
        j1 = max(j0, math.ceil((yb - self.origin[1]) / h) - 1)
        ua = 2.0 * (xa - self.origin[0]) / self.side
        ub = 2.0 * (xb - self.origin[0]) / self.side
        m0 = math.floor(ua) - 1
        m1 = max(m0, math.ceil(ub) - 1)
        return j0, j1, m0, m1


@dataclass
class Mesh:
    """Vertex coordinates plus CCW vertex-index triples.

    ``lattice``/``index_range`` are set for regular meshes and allow constant
    time lookup of the cell covering a lattice position.
    """

    vertices: np.ndarray
    cells: np.ndarray
    epoch: int = 0
    lattice: Lattice | None = None
    index_range: tuple[int, int, int, int] | None = None
    bounds: tuple[tuple[float, float], tuple[float, float]] | None = None
    vertex_to_cells: list[np.ndarray] = field(init=False, repr=False)
    inc_vertex: np.ndarray = field(init=False, repr=False)
    inc_cell: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.cells = np.asarray(self.cells, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (n, 2)")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise ValueError("cells must have shape (n, 3)")
        nv = len(self.vertices)
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= nv):
            raise ValueError("cell references an invalid vertex index")
        c = self.cells
        if np.any((c[:, 0] == c[:, 1]) | (c[:, 1] == c[:, 2]) | (c[:, 0] == c[:, 2])):
            raise ValueError("cell references a vertex twice")
        self.inc_vertex = c.ravel()
        self.inc_cell = np.repeat(np.arange(len(c)), 3)
        order = np.argsort(self.inc_vertex, kind="stable")
        counts = np.bincount(self.inc_vertex, minlength=nv)
        self.vertex_to_cells = np.split(self.inc_cell[order], np.cumsum(counts)[:-1])

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def triangles(self) -> np.ndarray:
        """Vertex coordinates per cell, shape ``(n_cells, 3, 2)``."""
        return self.vertices[self.cells]

    def moved(self, vertices: np.ndarray) -> "Mesh":
        """Same topology, new vertex positions."""
        new = replace(self, vertices=np.asarray(vertices, dtype=float))
        return new

    def lattice_cell_id(self, j: int, m: int) -> int | None:
        if self.index_range is None:
            return None
        j0, j1, m0, m1 = self.index_range
        if not (j0 <= j <= j1 and m0 <= m <= m1):
            return None
        return (j - j0) * (m1 - m0 + 1) + (m - m0)


def signed_areas(mesh: Mesh) -> np.ndarray:
    t = mesh.triangles()
    return 0.5 * ((t[:, 1, 0] - t[:, 0, 0]) * (t[:, 2, 1] - t[:, 0, 1])
                  - (t[:, 2, 0] - t[:, 0, 0]) * (t[:, 1, 1] - t[:, 0, 1]))


def centroids(mesh: Mesh) -> np.ndarray:
    return mesh.triangles().mean(axis=1)


def build_lattice_mesh(lattice: Lattice, index_range: tuple[int, int, int, int], epoch: int = 0,
                       bounds=None) -> Mesh:
    j0, j1, m0, m1 = index_range
    index: dict[tuple[int, int], int] = {}
    verts: list[tuple[float, float]] = []
    cells: list[tuple[int, int, int]] = []
    for j in range(j0, j1 + 1):
        for m in range(m0, m1 + 1):
            tri = []
            for node in Lattice.triangle_nodes(m, j):
                vid = index.get(node)
                if vid is None:
                    vid = index[node] = len(verts)
                    verts.append(lattice.point(*node))
                tri.append(vid)
            cells.append(tuple(tri))
    return Mesh(np.array(verts), np.array(cells, dtype=np.int64), epoch=epoch, lattice=lattice,
                index_range=index_range, bounds=bounds)


def build_regular_mesh(x_range, y_range, cell_area: float, origin=None, epoch: int = 0) -> Mesh:
    """Equilateral mesh covering the rectangle ``x_range`` x ``y_range``.

    The lattice is anchored at ``origin`` (default: the lower-left corner), so
    two meshes built with the same origin and area share their cells.
    """
    if not cell_area > 0:
        raise ValueError(f"cell_area must be positive, got {cell_area}")
    (xa, xb), (ya, yb) = x_range, y_range
    if not (xb > xa and yb > ya):
        raise ValueError(f"empty domain {x_range} x {y_range}")
    if origin is None:
        origin = (xa, ya)
    lattice = Lattice((float(origin[0]), float(origin[1])), side_for_area(cell_area))
    rng = lattice.covering_range(x_range, y_range)
    return build_lattice_mesh(lattice, rng, epoch=epoch, bounds=((xa, xb), (ya, yb)))


@dataclass
class CellState:
    """Per-cell arrays.  Counts are real valued and only change on remesh."""

    n_peds: np.ndarray
    area: np.ndarray
    density: np.ndarray
    initial_area: np.ndarray
    signed_area: np.ndarray
    degenerate: np.ndarray

    @classmethod
    def from_counts(cls, mesh: Mesh, n_peds, eps: float = EPSILON) -> "CellState":
        n = np.asarray(n_peds, dtype=float).copy()
        if n.shape != (mesh.n_cells,):
            raise ValueError(f"expected {mesh.n_cells} counts, got shape {n.shape}")
        if np.any(n < 0):
            raise ValueError("pedestrian counts must be nonnegative")
        sa = signed_areas(mesh)
        empty = np.zeros(mesh.n_cells)
        state = cls(n, np.abs(sa), empty, np.abs(sa), sa, np.zeros(mesh.n_cells, dtype=bool))
        return cell_density_update(mesh, state, eps)

    @property
    def total(self) -> float:
        return float(self.n_peds.sum())


def cell_density_update(mesh: Mesh, cells: CellState, eps: float = EPSILON) -> CellState:
    """Recompute areas from vertex positions and densities as count / area.

    Cells with area at most ``eps**2`` are flagged ``degenerate``; their
    density is 0 when empty and ``inf`` otherwise.
    """
    sa = signed_areas(mesh)
    area = np.abs(sa)
    degenerate = area <= eps * eps
    with np.errstate(divide="ignore", invalid="ignore"):
        density = np.where(degenerate, np.where(cells.n_peds > 0, np.inf, 0.0),
                           cells.n_peds / np.where(degenerate, 1.0, area))
    return CellState(cells.n_peds, area, density, cells.initial_area, sa, degenerate)


def vertex_weights(mesh: Mesh, vertex_id: int, eps: float = EPSILON):
    """Inverse-distance weights of the cells around one vertex.

    Returns ``(cell_ids, weights)``.  A centroid within ``eps`` of the vertex
    takes all the weight (shared equally if several do).
    """
    ids = mesh.vertex_to_cells[vertex_id]
    if len(ids) == 0:
        raise ValueError(f"vertex {vertex_id} has no incident cells")
    vx, vy = mesh.vertices[vertex_id]
    tris = mesh.vertices[mesh.cells[ids]]
    dists = [math.hypot(t[:, 0].mean() - vx, t[:, 1].mean() - vy) for t in tris]
    close = [d < eps for d in dists]
    if any(close):
        raw = [1.0 if c else 0.0 for c in close]
    else:
        raw = [1.0 / d for d in dists]
    total = sum(raw)
    return ids, np.array([r / total for r in raw])


def vertex_density(mesh: Mesh, density, vertex_id: int, eps: float = EPSILON) -> float:
    ids, w = vertex_weights(mesh, vertex_id, eps)
    return float(sum(wi * density[i] for i, wi in zip(ids, w)))


def vertex_density_gradient(mesh: Mesh, density, vertex_id: int, scheme: str = "line",
                            eps: float = EPSILON, eps_axis: float = EPSILON_AXIS,
                            vertex_rho: float | None = None) -> np.ndarray:
    """Density gradient at a vertex from differences to the surrounding centroids.

    ``paper-literal`` weights ``(rho_i - rho_v)`` by the componentwise
    reciprocal offsets ``(1/dx, 1/dy)``, each clamped to ``+-1/eps_axis``.
    ``line`` combines the directional differences ``(rho_i - rho_v) / d_i``
    along the unit offsets ``n_i`` and corrects for the spread of directions:
    ``g = pinv(sum a_i n_i n_i^T) @ sum a_i (rho_i - rho_v) / d_i n_i``, which is
    exact for linear fields and reduces to the one-line difference when all
    offsets are collinear.  ``vertex_rho`` overrides the interpolated vertex
    density.
    """
    if scheme not in GRADIENT_SCHEMES:
        raise ValueError(f"unknown gradient scheme {scheme!r}")
    ids, w = vertex_weights(mesh, vertex_id, eps)
    rho_v = sum(wi * density[i] for i, wi in zip(ids, w)) if vertex_rho is None else vertex_rho
    vx, vy = mesh.vertices[vertex_id]
    vec = np.zeros(2)
    cov = np.zeros((2, 2))
    for i, wi in zip(ids, w):
        t = mesh.vertices[mesh.cells[i]]
        dx, dy = t[:, 0].mean() - vx, t[:, 1].mean() - vy
        drho = density[i] - rho_v
        if scheme == "paper-literal":
            rx = 1.0 / dx if abs(dx) >= eps_axis else math.copysign(1.0 / eps_axis, dx)
            ry = 1.0 / dy if abs(dy) >= eps_axis else math.copysign(1.0 / eps_axis, dy)
            vec += wi * drho * np.array([rx, ry])
        else:
            d2 = dx * dx + dy * dy
            if d2 < eps * eps:
                continue
            vec += wi * drho * np.array([dx, dy]) / d2
            cov += wi * np.outer([dx, dy], [dx, dy]) / d2
    if scheme == "paper-literal":
        return vec
    return np.linalg.pinv(cov, rcond=_LINE_RCOND) @ vec


def vertex_fields(mesh: Mesh, density: np.ndarray, scheme: str = "line", eps: float = EPSILON,
                  eps_axis: float = EPSILON_AXIS) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised vertex densities and gradients for every vertex at once."""
    if scheme not in GRADIENT_SCHEMES:
        raise ValueError(f"unknown gradient scheme {scheme!r}")
    nv = mesh.n_vertices
    iv, ic = mesh.inc_vertex, mesh.inc_cell
    off = centroids(mesh)[ic] - mesh.vertices[iv]
    dist = np.hypot(off[:, 0], off[:, 1])
    close = dist < eps
    any_close = np.bincount(iv, weights=close, minlength=nv) > 0
    raw = np.where(any_close[iv], close.astype(float), 1.0 / np.where(close, 1.0, dist))
    wsum = np.bincount(iv, weights=raw, minlength=nv)
    alpha = raw / np.where(wsum[iv] > 0, wsum[iv], 1.0)

    rho_c = density[ic]
    rho_v = np.bincount(iv, weights=alpha * rho_c, minlength=nv)
    drho = rho_c - rho_v[iv]

    grad = np.zeros((nv, 2))
    if scheme == "paper-literal":
        big = 1.0 / eps_axis
        with np.errstate(divide="ignore"):
            recip = np.where(np.abs(off) >= eps_axis, 1.0 / off, np.copysign(big, off))
        for k in range(2):
            grad[:, k] = np.bincount(iv, weights=alpha * drho * recip[:, k], minlength=nv)
        return rho_v, grad

    d2 = np.where(close, 1.0, dist * dist)
    a = np.where(close, 0.0, alpha) / d2
    vec = np.stack([np.bincount(iv, weights=a * drho * off[:, k], minlength=nv) for k in range(2)], axis=1)
    cov = np.empty((nv, 2, 2))
    cov[:, 0, 0] = np.bincount(iv, weights=a * off[:, 0] ** 2, minlength=nv)
    cov[:, 1, 1] = np.bincount(iv, weights=a * off[:, 1] ** 2, minlength=nv)
    cov[:, 0, 1] = cov[:, 1, 0] = np.bincount(iv, weights=a * off[:, 0] * off[:, 1], minlength=nv)
    grad = np.einsum("vij,vj->vi", np.linalg.pinv(cov, rcond=_LINE_RCOND), vec)
    return rho_v, grad
