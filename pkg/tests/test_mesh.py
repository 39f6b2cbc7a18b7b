import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagcrowd.mesh import (
    CellState,
    Mesh,
    build_regular_mesh,
    cell_density_update,
    centroids,
    side_for_area,
    signed_areas,
    vertex_density,
    vertex_density_gradient,
    vertex_fields,
    vertex_weights,
)

from .oracles import inside_triangle

AREA = 56.9


@pytest.fixture(scope="module")
def table_mesh():
    return build_regular_mesh((0.0, 120.0), (0.0, 120.0), AREA)


def interior_vertices(mesh):
    return [v for v, ids in enumerate(mesh.vertex_to_cells) if len(ids) == 6]


def deformed(mesh, rng, amount=0.2):
    s = side_for_area(AREA)
    while True:
        v = mesh.vertices + rng.uniform(-amount * s, amount * s, mesh.vertices.shape)
        m = mesh.moved(v)
        if np.all(signed_areas(m) > 0):
            return m


def test_regular_mesh_cells(table_mesh):
    areas = signed_areas(table_mesh)
    assert np.all(areas > 0)
    np.testing.assert_allclose(areas, AREA, rtol=1e-9)
    assert table_mesh.n_cells == 13 * 22
    assert areas.sum() >= 120.0 * 120.0


def test_regular_mesh_side_length(table_mesh):
    s = side_for_area(AREA)
    assert math.sqrt(3) * s**2 / 4 == pytest.approx(AREA, rel=1e-12)
    assert s == pytest.approx(11.46, abs=0.01)
    t = table_mesh.triangles()
    for a, b in ((0, 1), (1, 2), (2, 0)):
        np.testing.assert_allclose(np.linalg.norm(t[:, a] - t[:, b], axis=1), s, rtol=1e-12)


def test_regular_mesh_covers_rectangle(table_mesh):
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 120, (5000, 2))
    hit = np.zeros(len(pts), bool)
    for tri in table_mesh.triangles():
        hit |= inside_triangle(pts[:, 0], pts[:, 1], tri)
    assert hit.all()


@pytest.mark.parametrize("area", [0.0, -1.0])
def test_regular_mesh_rejects_bad_area(area):
    with pytest.raises(ValueError):
        build_regular_mesh((0, 10), (0, 10), area)


def test_vertex_to_cells_is_inverse(table_mesh):
    pairs = {(v, c) for v, ids in enumerate(table_mesh.vertex_to_cells) for c in ids}
    expected = {(int(v), c) for c, tri in enumerate(table_mesh.cells) for v in tri}
    assert pairs == expected


def test_mesh_rejects_repeated_vertex():
    with pytest.raises(ValueError):
        Mesh(np.zeros((3, 2)), np.array([[0, 0, 1]]))


def test_cell_density_examples(table_mesh):
    n = np.zeros(table_mesh.n_cells)
    n[5] = AREA * 2.7
    cells = CellState.from_counts(table_mesh, n)
    assert cells.density[5] == pytest.approx(2.7, rel=1e-12)
    assert cells.density[6] == 0.0
    shifted = table_mesh.moved(table_mesh.vertices + (13.7, -4.1))
    again = cell_density_update(shifted, cells)
    np.testing.assert_allclose(again.density, cells.density, rtol=1e-12)


def test_degenerate_cell_flagged():
    mesh = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]), np.array([[0, 1, 2], [1, 3, 2]]))
    cells = CellState.from_counts(mesh, [1.0, 2.0])
    squashed = mesh.moved(np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.0], [1.0, 1.0]]))
    out = cell_density_update(squashed, cells)
    assert out.degenerate.tolist() == [True, False]
    assert np.isinf(out.density[0])


def test_weights_interior_vertex_symmetric(table_mesh):
    v = interior_vertices(table_mesh)[0]
    ids, w = vertex_weights(table_mesh, v)
    assert len(ids) == 6
    np.testing.assert_allclose(w, 1 / 6, rtol=1e-12)


def test_weights_single_cell_vertex(table_mesh):
    corner = next(v for v, ids in enumerate(table_mesh.vertex_to_cells) if len(ids) == 1)
    _, w = vertex_weights(table_mesh, corner)
    assert w.tolist() == [1.0]


def two_cell_mesh():
    # vertex 0 at the origin; centroids at (2, 0) and (-4, 0)
    verts = np.array([[0.0, 0.0], [3.0, -1.0], [3.0, 1.0], [-6.0, 2.0], [-6.0, -2.0]])
    return Mesh(verts, np.array([[0, 1, 2], [0, 3, 4]]))


def test_weights_inverse_distance():
    ids, w = vertex_weights(two_cell_mesh(), 0)
    assert ids.tolist() == [0, 1]
    np.testing.assert_allclose(w, [2 / 3, 1 / 3], rtol=1e-12)


def test_weights_coincident_centroid_takes_all():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [3.0, 3.0], [0.0, 3.0]])
    mesh = Mesh(verts, np.array([[0, 1, 2], [0, 3, 4]]))
    _, w = vertex_weights(mesh, 0)
    assert w.tolist() == [1.0, 0.0]


def test_weights_permutation_equivariant(table_mesh):
    rng = np.random.default_rng(4)
    mesh = deformed(table_mesh, rng)
    perm = rng.permutation(mesh.n_cells)
    shuffled = Mesh(mesh.vertices, mesh.cells[perm])
    v = interior_vertices(mesh)[10]
    ids, w = vertex_weights(mesh, v)
    ids2, w2 = vertex_weights(shuffled, v)
    assert sum(w) == pytest.approx(1.0, abs=1e-12)
    by_cell = dict(zip(ids.tolist(), w))
    for i2, wi in zip(ids2, w2):
        assert by_cell[int(perm[i2])] == pytest.approx(wi, rel=1e-12)


def test_vertex_density_examples(table_mesh):
    v = interior_vertices(table_mesh)[0]
    rho = np.full(table_mesh.n_cells, 3.3)
    assert vertex_density(table_mesh, rho, v) == pytest.approx(3.3, rel=1e-12)
    # two cells equidistant from their shared vertex: a pair of mirrored triangles
    verts = np.array([[0.0, 0.0], [2.0, -1.0], [2.0, 1.0], [-2.0, 1.0], [-2.0, -1.0]])
    mesh = Mesh(verts, np.array([[0, 1, 2], [0, 3, 4]]))
    assert vertex_density(mesh, np.array([0.0, 5.4]), 0) == pytest.approx(2.7, rel=1e-12)


def test_vertex_fields_match_scalar_path(table_mesh):
    rng = np.random.default_rng(5)
    mesh = deformed(table_mesh, rng)
    rho = rng.uniform(0, 5.4, mesh.n_cells)
    for scheme in ("line", "paper-literal"):
        rho_v, grad = vertex_fields(mesh, rho, scheme)
        for v in range(0, mesh.n_vertices, 7):
            ids, w = vertex_weights(mesh, v)
            assert rho_v[v] == pytest.approx(float(np.dot(w, rho[ids])), rel=1e-12)
            g = vertex_density_gradient(mesh, rho, v, scheme)
            np.testing.assert_allclose(grad[v], g, rtol=1e-9, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 3.0))
def test_vertex_density_monotone(seed, bump):
    mesh = two_cell_mesh()
    rng = np.random.default_rng(seed)
    rho = rng.uniform(0, 5.4, 2)
    before = vertex_density(mesh, rho, 0)
    rho[rng.integers(2)] += bump
    assert vertex_density(mesh, rho, 0) >= before
    lo, hi = rho.min(), rho.max()
    assert lo - 1e-12 <= vertex_density(mesh, rho, 0) <= hi + 1e-12


def test_gradient_uniform_field_is_zero(table_mesh):
    rho = np.full(table_mesh.n_cells, 2.0)
    # the axis clamp multiplies interpolation roundoff by 1/eps_axis
    for scheme, tol in (("line", 1e-12), ("paper-literal", 1e-8)):
        _, grad = vertex_fields(table_mesh, rho, scheme)
        assert np.abs(grad).max() <= tol


def test_line_gradient_linear_field(table_mesh):
    c = 0.05
    rho = c * centroids(table_mesh)[:, 0]
    for v in interior_vertices(table_mesh)[:20]:
        g = vertex_density_gradient(table_mesh, rho, v, "line")
        assert g[0] == pytest.approx(c, rel=0.1)
        assert abs(g[1]) <= 0.1 * c


def test_line_gradient_single_cell():
    d, delta, rho_cell = 2.0, 0.3, 1.0
    mesh = Mesh(np.array([[0.0, 0.0], [1.5 * d, -1.0], [1.5 * d, 1.0]]), np.array([[0, 1, 2]]))
    g = vertex_density_gradient(mesh, np.array([rho_cell]), 0, "line", vertex_rho=rho_cell - delta)
    np.testing.assert_allclose(g, [delta / d, 0.0], rtol=1e-12, atol=1e-15)


def test_line_gradient_collinear_pair_is_central_difference():
    verts = np.array([[0.0, 0.0], [3.0, -1.0], [3.0, 1.0], [-3.0, 1.0], [-3.0, -1.0]])
    mesh = Mesh(verts, np.array([[0, 1, 2], [0, 3, 4]]))
    g = vertex_density_gradient(mesh, np.array([3.0, 1.0]), 0, "line")
    np.testing.assert_allclose(g, [(3.0 - 1.0) / 4.0, 0.0], atol=1e-12)


def test_paper_literal_hits_axis_clamp(table_mesh):
    v = interior_vertices(table_mesh)[0]
    offsets = centroids(table_mesh)[table_mesh.vertex_to_cells[v]] - table_mesh.vertices[v]
    assert np.any(np.abs(offsets) < 1e-6)
    ids = table_mesh.vertex_to_cells[v]
    above = ids[np.argmin(np.abs(offsets[:, 0]) - offsets[:, 1])]
    rho = np.full(table_mesh.n_cells, 1.0)
    rho[above] += 0.01
    g = vertex_density_gradient(table_mesh, rho, v, "paper-literal", eps_axis=1e-6)
    assert np.all(np.isfinite(g))
    # the clamped reciprocal turns a small density bump into a huge x component
    assert abs(g[0]) > 1e3
    line = vertex_density_gradient(table_mesh, rho, v, "line")
    assert abs(line[0]) < 1e-12


def test_unknown_scheme_rejected(table_mesh):
    with pytest.raises(ValueError):
        vertex_fields(table_mesh, np.zeros(table_mesh.n_cells), "upwind")
