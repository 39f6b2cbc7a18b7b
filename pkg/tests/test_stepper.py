import math

import numpy as np
import pytest

from lagcrowd.flowmodel import ModelParams, StaticField
from lagcrowd.geometry import point_in_triangle
from lagcrowd.mesh import CellState, Mesh, build_regular_mesh, centroids, side_for_area
from lagcrowd.scenarios import preset
from lagcrowd.stepper import (
    NumericalParams,
    RemeshError,
    SimulationState,
    initial_state,
    remap_counts,
    remesh,
    remesh_needed,
    run,
    step,
)

AREA = 56.9
S = side_for_area(AREA)
NUM = NumericalParams(domain_x=(0.0, 60.0), domain_y=(0.0, 60.0))


def small_mesh():
    return build_regular_mesh(NUM.domain_x, NUM.domain_y, AREA)


def uniform_state(rho):
    mesh = small_mesh()
    cells = CellState.from_counts(mesh, np.zeros(mesh.n_cells))
    return initial_state(mesh, rho * cells.area)


def test_empty_crowd_translates_at_free_speed():
    state = uniform_state(0.0)
    new = step(state, ModelParams(), NUM, StaticField("straight"))
    np.testing.assert_allclose(new.mesh.vertices - state.mesh.vertices, np.tile([1.3, 0.0], (state.mesh.n_vertices, 1)),
                               rtol=0, atol=1e-12)
    assert np.all(new.cells.density == 0)
    assert not new.last_report.needed


def test_uniform_crowd_rigid_translation():
    model = ModelParams(beta_dyn=0.0)
    state = uniform_state(2.7)
    new = step(state, model, NUM, StaticField("straight", model))
    np.testing.assert_allclose(new.mesh.vertices[:, 0] - state.mesh.vertices[:, 0], 0.65, rtol=0, atol=1e-12)
    np.testing.assert_allclose(new.cells.area, state.cells.area, rtol=1e-12)


def test_one_step_keeps_counts_bit_exact():
    spec = preset("straight")
    state = spec.initial_state()
    new = step(state, spec.model, spec.numerics, spec.static_field())
    assert new.last_report is not None and not new.last_report.needed
    assert new.cells.n_peds.tolist() == state.cells.n_peds.tolist()
    assert new.total == state.total


def test_time_tracks_step_index():
    state = uniform_state(1.0)
    num = NumericalParams(dt=0.5, domain_x=NUM.domain_x, domain_y=NUM.domain_y)
    for _ in range(3):
        state = step(state, ModelParams(), num, StaticField("straight"))
    assert (state.step_index, state.time) == (3, 1.5)


def test_remesh_not_needed_on_fresh_mesh():
    state = uniform_state(2.0)
    report = remesh_needed(state, ModelParams(), NUM)
    assert not report.needed and str(report) == "no remesh"


def test_remesh_needed_on_flip():
    mesh = small_mesh()
    cells = mesh.cells.copy()
    cells[3] = cells[3][[0, 2, 1]]
    flipped = Mesh(mesh.vertices, cells)
    state = SimulationState(flipped, CellState.from_counts(flipped, np.ones(mesh.n_cells)))
    report = remesh_needed(state, ModelParams(), NUM)
    assert report.needed and report.conditions == ["flip"]
    assert report.flipped_cells.tolist() == [3]


def test_remesh_needed_on_stretch():
    mesh = small_mesh()
    cells = CellState.from_counts(mesh, np.zeros(mesh.n_cells))
    cells.area[7] = 0.5
    assert 0.5 / AREA == pytest.approx(0.0088, abs=1e-4)
    report = remesh_needed(SimulationState(mesh, cells), ModelParams(), NUM)
    assert report.conditions == ["stretch"] and report.stretched_cells.tolist() == [7]


def test_remesh_needed_on_jam():
    state = uniform_state(0.0)
    state.cells.density[2] = 5.5
    report = remesh_needed(state, ModelParams(), NUM)
    assert report.conditions == ["jam"] and report.jam_cells.tolist() == [2]


def test_identity_remap():
    mesh = small_mesh()
    n = np.random.default_rng(0).uniform(0, 50, mesh.n_cells)
    out = remap_counts(mesh, CellState.from_counts(mesh, n), mesh)
    np.testing.assert_allclose(out, n, rtol=1e-9)


def test_half_split_by_lattice_edge():
    # a small triangle whose median lies on the lattice edge from (0, 0) to (s/2, h)
    along = np.array([0.5, math.sqrt(3) / 2])
    normal = np.array([math.sqrt(3) / 2, -0.5])
    apex = np.zeros(2)
    mid = 0.5 * S * along
    p, q = mid + 0.2 * S * normal, mid - 0.2 * S * normal
    old = Mesh(np.array([apex, p, q]), np.array([[0, 1, 2]]))
    new = build_regular_mesh((-20.0, 20.0), (-20.0, 20.0), AREA, origin=(0.0, 0.0))
    out = remap_counts(old, CellState.from_counts(old, [10.0]), new)
    assert sorted(out[out > 0].tolist()) == pytest.approx([5.0, 5.0], rel=1e-12)


def test_flipped_donor_goes_to_containing_cell():
    old = Mesh(np.array([[10.0, 10.0], [12.0, 11.0], [13.0, 10.0]]), np.array([[0, 1, 2]]))
    cells = CellState.from_counts(old, [7.0])
    assert cells.signed_area[0] < 0
    new = small_mesh()
    out = remap_counts(old, cells, new)
    assert out.sum() == 7.0
    cid = int(np.flatnonzero(out)[0])
    c = old.vertices.mean(axis=0)
    assert point_in_triangle(c, new.triangles()[cid])


def test_remap_fails_without_coverage():
    old = Mesh(np.array([[100.0, 100.0], [110.0, 100.0], [105.0, 108.0]]), np.array([[0, 1, 2]]))
    with pytest.raises(RemeshError):
        remap_counts(old, CellState.from_counts(old, [3.0]), small_mesh())


def test_stationary_crowd_remeshes_onto_same_cells():
    mesh = small_mesh()
    rng = np.random.default_rng(1)
    c = centroids(mesh)
    inner = (np.abs(c[:, 0] - 30) < 12) & (np.abs(c[:, 1] - 30) < 12)
    n = np.where(inner, rng.uniform(1, 20, mesh.n_cells), 0.0)
    state = initial_state(mesh, n)
    new = remesh(state, NUM)
    assert new.epoch == 1 and new.remesh_count == 1
    assert new.total == pytest.approx(state.total, rel=1e-12)
    old_by_centroid = {tuple(np.round(p, 6)): k for p, k in zip(c, n)}
    for p, k in zip(centroids(new.mesh), new.cells.n_peds):
        assert k == pytest.approx(old_by_centroid.get(tuple(np.round(p, 6)), 0.0), rel=1e-9, abs=1e-12)
    np.testing.assert_allclose(new.cells.initial_area, AREA, rtol=1e-9)


def test_run_duration_zero():
    res = run(preset("straight"), 0.0, [0.0])
    assert res.state.step_index == 0
    assert list(res.snapshots) == [0.0]
    assert len(res.totals) == 1


@pytest.mark.parametrize("duration, snaps", [(10.0, [11.0]), (10.0, [-1.0]), (10.5, []), (-1.0, [])])
def test_run_rejects_bad_times(duration, snaps):
    with pytest.raises(ValueError):
        run(preset("straight"), duration, snaps)


def test_run_short_case_conserves():
    res = run(preset("zigzag"), 10.0, [5.0, 10.0])
    assert res.state.step_index == 10 and res.state.time == 10.0
    assert sorted(res.snapshots) == [5.0, 10.0]
    assert max(abs(t - res.initial_total) for t in res.totals) <= 1e-6 * res.initial_total
    assert all(r.n_peds >= 1 for r in res.trajectories)


def test_run_notifies_sinks():
    seen = []

    class Sink:
        def on_step(self, st):
            seen.append(("step", st.step_index))

        def on_snapshot(self, t, st):
            seen.append(("snap", t))

    run(preset("straight"), 2.0, [2.0], sinks=[Sink()])
    assert seen == [("step", 0), ("step", 1), ("step", 2), ("snap", 2.0)]


@pytest.mark.parametrize("kw", [{"dt": 0.0}, {"remesh_alpha": 1.0}, {"remesh_alpha": 0.0}, {"cell_area": -2.0},
                                {"gradient_scheme": "spline"}, {"remesh_margin": -1.0}])
def test_numerical_params_validated(kw):
    with pytest.raises(ValueError):
        NumericalParams(**kw)
