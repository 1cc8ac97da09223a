"""
Tests for the boundary conditions, the edge energy, the average-then-project iteration and the
singularity indicator.
"""

import csv
import math

import numpy as np
import pytest

from crossfield.config import SmootherConfig
from crossfield.field_smoother import (STALL_WINDOW, ConvergenceLog, CrossField, DegenerateNormal, NotConverged,
                                       _stalled, boundary_conditions, energy, frames_from_normals, singularity_indicator,
                                       smooth, smooth_step)
from crossfield.mesh_files import FileError, TetMesh, VertexGraph, cube_mesh, load_mesh, sphere_mesh
from crossfield.rotation_core import random_rotations
from crossfield.tensor_rep import (CrossTensor9, evaluate_polynomial, format_tensor, frobenius_distance,
                                   reference_tensor, rotate_tensor)
from tests.crosses import data_file, z_cross

PATH = VertexGraph(3, [(0, 1), (1, 2)])


def path_field(angle):
    """Free middle vertex between the fixed crosses turned by 0 and "angle" about x3."""
    return CrossField([z_cross(0.0).a, reference_tensor().a, z_cross(angle).a], fixed=[True, False, True])


def vertex_at(mesh, point):
    return int(np.flatnonzero(np.all(np.isclose(mesh.vertices, point), axis=1))[0])


def rotated(field, rotation):
    tensors = [rotate_tensor(CrossTensor9(a), rotation).a for a in field.tensors]
    return CrossField(tensors, fixed=field.fixed)


class TestCrossField:
    def test_uniform(self):
        field = CrossField.uniform(4)

        np.testing.assert_array_equal(field.tensors, np.tile(reference_tensor().a, (4, 1)))
        assert not field.fixed.any()
        assert len(field) == 4

    def test_copy_is_independent(self):
        field = CrossField.uniform(2)
        copy = field.copy()
        copy.tensors[0, 0] = 5.0

        assert field.tensors[0, 0] == 1.0

    def test_validate_rejects_fixed_non_cross(self):
        field = CrossField([[0.6, 0.6, 0.6, 0, 0, 0, 0, 0, 0]], fixed=[True])
        with pytest.raises(ValueError):
            field.validate()

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            CrossField(np.zeros((2, 9)), fixed=[True])


class TestEnergy:
    def test_uniform_field(self):
        assert energy(cube_mesh(2), CrossField.uniform(27)) == 0.0

    def test_single_edge(self):
        graph = VertexGraph(2, [(0, 1)])
        field = CrossField([z_cross(0.0).a, z_cross(0.3).a])

        assert energy(graph, field) == pytest.approx(0.5 * frobenius_distance(z_cross(0.0), z_cross(0.3)) ** 2)

    def test_sum_over_edges(self):
        tensors = [z_cross(0.0).a, z_cross(0.3).a, z_cross(0.1).a, z_cross(0.5).a]
        first = energy(VertexGraph(4, [(0, 1)]), CrossField(tensors))
        second = energy(VertexGraph(4, [(2, 3)]), CrossField(tensors))

        assert energy(VertexGraph(4, [(0, 1), (2, 3)]), CrossField(tensors)) == pytest.approx(first + second)

    def test_no_edges(self):
        assert energy(VertexGraph(2, []), CrossField.uniform(2)) == 0.0


class TestSmoothStep:
    def test_middle_of_a_path(self):
        field = smooth_step(PATH, path_field(0.1))
        np.testing.assert_allclose(field.tensors[1], z_cross(0.05).a, atol=1e-6)

    def test_middle_of_a_path_with_exact_projection(self):
        field = smooth_step(PATH, path_field(0.1), SmootherConfig(projection_method="exact"))
        np.testing.assert_allclose(field.tensors[1], z_cross(0.05).a, atol=1e-6)

    def test_uniform_field_is_a_fixed_point(self):
        mesh = cube_mesh(2)
        field = CrossField.uniform(27, z_cross(0.4), fixed=np.isin(np.arange(27), mesh.boundary_vertices))

        np.testing.assert_allclose(smooth_step(mesh, field).tensors, field.tensors, atol=1e-12)

    def test_center_of_a_star_takes_the_common_tensor(self):
        graph = VertexGraph(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
        common = z_cross(0.7).a
        field = CrossField([reference_tensor().a] + [common] * 4, fixed=[False, True, True, True, True])

        np.testing.assert_allclose(smooth_step(graph, field).tensors[0], common, atol=1e-12)

    def test_fixed_vertices_are_untouched(self):
        mesh = cube_mesh(3)
        field = boundary_conditions(mesh)
        updated = field
        for _ in range(5):
            updated = smooth_step(mesh, updated)

        np.testing.assert_array_equal(updated.tensors[field.fixed], field.tensors[field.fixed])
        assert not np.array_equal(updated.tensors[~field.fixed], field.tensors[~field.fixed])

    def test_equivariant(self, rng):
        mesh = cube_mesh(3)
        field = boundary_conditions(mesh)
        rotation = random_rotations(rng, 1)[0]

        first, second = field, rotated(field, rotation)
        for _ in range(3):
            first, second = smooth_step(mesh, first), smooth_step(mesh, second)

        np.testing.assert_allclose(rotated(first, rotation).tensors, second.tensors, atol=1e-6)

    def test_relaxed_step_keeps_a_uniform_field(self):
        mesh = cube_mesh(2)
        field = CrossField.uniform(27, z_cross(0.4), fixed=np.isin(np.arange(27), mesh.boundary_vertices))

        updated = smooth_step(mesh, field, SmootherConfig(relaxation=0.5))
        np.testing.assert_allclose(updated.tensors, field.tensors, atol=1e-12)

    def test_relaxed_step_stops_halfway(self):
        # About half of the way from the reference cross to the midpoint cross
        field = smooth_step(PATH, path_field(0.1), SmootherConfig(relaxation=0.5))

        assert 0.0 < frobenius_distance(CrossTensor9(field.tensors[1]), reference_tensor())
        assert frobenius_distance(CrossTensor9(field.tensors[1]), z_cross(0.05)) > 1e-3


class TestSmooth:
    def test_without_fixed_vertices(self):
        field, log = smooth(cube_mesh(2), CrossField([z_cross(0.1 * i).a for i in range(27)]))

        np.testing.assert_array_equal(field.tensors, CrossField.uniform(27).tensors)
        assert log.converged
        assert log.iterations == 0

    def test_zero_initial_energy_stops_after_one_iteration(self):
        mesh = cube_mesh(2)
        field = CrossField.uniform(27, fixed=np.isin(np.arange(27), mesh.boundary_vertices))
        _, log = smooth(mesh, field)

        assert log.converged
        assert log.iterations == 1

    def test_iteration_cap(self):
        mesh = cube_mesh(3)
        with pytest.raises(NotConverged) as info:
            smooth(mesh, boundary_conditions(mesh), SmootherConfig(max_iterations=1))

        assert info.value.log.iterations == 1
        assert not info.value.log.converged
        assert len(info.value.field) == mesh.vertex_count

    def test_residual_rule_on_a_path(self):
        field, log = smooth(PATH, path_field(0.1), SmootherConfig(stopping_rule="residual"))

        assert log.converged
        assert log.iterations == 2
        np.testing.assert_allclose(field.tensors[1], z_cross(0.05).a, atol=1e-6)
        assert log.energies[-1] < log.energies[0]
        assert math.isnan(log.residuals[0])


    def test_stall_rule_on_a_path(self):
        # The first sweep lands on the midpoint, the energy is flat from there on
        field, log = smooth(PATH, path_field(0.1), SmootherConfig(stopping_rule="stall"))

        assert log.converged
        assert log.iterations == STALL_WINDOW + 1
        np.testing.assert_allclose(field.tensors[1], z_cross(0.05).a, atol=1e-6)

    def test_stall_ignores_a_two_cycle(self):
        log = ConvergenceLog()
        log.record(0, 10.0, 0.0)
        for iteration in range(1, 2 * STALL_WINDOW):
            log.record(iteration, 4.0 + iteration % 2, 0.0)

        assert _stalled(log.rows, 10.0, 1e-4)
        assert not _stalled(log.rows[:STALL_WINDOW + 1], 10.0, 1e-4)

    def test_relaxed_smoothing_on_a_path(self):
        config = SmootherConfig(stopping_rule="residual", energy_reduction_target=1e-8, relaxation=0.5)
        field, log = smooth(PATH, path_field(0.1), config)

        assert log.converged
        assert log.iterations > 2
        np.testing.assert_allclose(field.tensors[1], z_cross(0.05).a, atol=1e-6)

    def test_equivariant_run(self, rng):
        mesh = cube_mesh(3)
        field = boundary_conditions(mesh)
        rotation = random_rotations(rng, 1)[0]
        config = SmootherConfig(max_iterations=30)

        # Edges between fixed vertices keep the energy ratio up: both runs stop at the cap
        with pytest.raises(NotConverged) as first:
            smooth(mesh, field, config)
        with pytest.raises(NotConverged) as second:
            smooth(mesh, rotated(field, rotation), config)

        np.testing.assert_allclose(first.value.log.energies, second.value.log.energies, rtol=1e-9)
        np.testing.assert_allclose(rotated(first.value.field, rotation).tensors, second.value.field.tensors,
                                   atol=1e-6)


class TestBoundaryConditions:
    def test_cube(self):
        mesh = cube_mesh(2)
        field = boundary_conditions(mesh)

        face_center = vertex_at(mesh, [0.5, 0.5, 1.0])
        center = vertex_at(mesh, [0.5, 0.5, 0.5])

        assert field.fixed[face_center]
        np.testing.assert_allclose(field.tensors[face_center], reference_tensor().a, atol=1e-12)
        assert not field.fixed[center]
        assert field.fixed.sum() == 26

    def test_sphere_crosses_follow_the_normals(self):
        mesh = sphere_mesh(0.3)
        field = boundary_conditions(mesh)
        normals = mesh.vertex_normals()

        for vertex in mesh.boundary_vertices:
            normal = normals[vertex] / np.linalg.norm(normals[vertex])
            assert evaluate_polynomial(CrossTensor9(field.tensors[vertex]), normal) == pytest.approx(1.0, abs=1e-12)

    def test_frames_from_normals(self, rng):
        normals = rng.normal(size=(50, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        frames = frames_from_normals(normals)

        np.testing.assert_allclose(frames[:, :, 2], normals)
        np.testing.assert_allclose(np.linalg.det(frames), 1.0)
        np.testing.assert_allclose(frames @ np.transpose(frames, (0, 2, 1)), np.tile(np.eye(3), (50, 1, 1)),
                                   atol=1e-14)

    def test_degenerate_normal(self):
        # Two tets touching only at the origin, the averaged normal there cancels
        vertices = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [-1, 0, 0], [0, -1, 0], [0, 0, -1]]
        mesh = TetMesh(vertices, [[0, 1, 2, 3], [0, 4, 5, 6]])

        with pytest.raises(DegenerateNormal) as info:
            boundary_conditions(mesh)
        assert info.value.vertex == 0

    def test_from_file(self, tmp_path):
        mesh = load_mesh(data_file("two_tets.tet"))
        path = tmp_path / "bc.txt"
        path.write_text("# vertex a1..a9 fixed\n"
                        "0 1 1 1 0 0 0 0 0 0 1\n"
                        "\n"
                        "4 %s true\n"
                        "2 1.01 1 1 0 0 0 0 0 0 0\n" % format_tensor(z_cross(0.3)))

        field = boundary_conditions(mesh, "from-file", str(path))

        np.testing.assert_array_equal(field.fixed, [True, False, False, False, True])
        np.testing.assert_allclose(field.tensors[4], z_cross(0.3).a, atol=1e-12)

        # Tensors off the crosses are projected
        np.testing.assert_allclose(field.tensors[2], reference_tensor().a, atol=1e-9)

    @pytest.mark.parametrize("line", ["0 1 1 1 0 0 0 0 0 0", "0 1 1 1 0 0 0 0 0 0 maybe",
                                      "9 1 1 1 0 0 0 0 0 0 1", "0 1 1 1 0 0 0 0 0 inf 1"])
    def test_from_file_errors(self, tmp_path, line):
        path = tmp_path / "bc.txt"
        path.write_text(line + "\n")
        with pytest.raises(FileError):
            boundary_conditions(load_mesh(data_file("two_tets.tet")), "from-file", str(path))

    def test_from_file_missing(self, tmp_path):
        with pytest.raises(FileError):
            boundary_conditions(cube_mesh(1), "from-file", str(tmp_path / "missing.txt"))

    def test_fixed_vertices_must_hold_crosses(self, monkeypatch):
        mesh = load_mesh(data_file("two_tets.tet"))
        tensors = np.tile(reference_tensor().a, (5, 1))
        tensors[4] = [1.01, 1, 1, 0, 0, 0, 0, 0, 0]
        monkeypatch.setattr("crossfield.field_smoother._from_file",
                            lambda mesh, path: CrossField(tensors, fixed=[False, False, False, False, True]))

        with pytest.raises(ValueError, match="cross tensors"):
            boundary_conditions(mesh, "from-file", "bc.txt")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            boundary_conditions(cube_mesh(1), "tangent")


class TestSingularityIndicator:
    def test_uniform_field(self):
        mesh = cube_mesh(2)
        field = CrossField.uniform(27, fixed=np.isin(np.arange(27), mesh.boundary_vertices))
        report = singularity_indicator(mesh, field)

        assert report.maximum < 1e-12
        assert len(report.flagged) == 0
        assert report.histogram[0].sum() == 27

    def test_between_distant_crosses(self):
        report = singularity_indicator(PATH, path_field(math.pi / 4), band=(0.1, 2.0))

        assert report.eta[0] == 0.0 and report.eta[2] == 0.0
        assert report.eta[1] > 0.1
        np.testing.assert_array_equal(report.flagged, [1])
        assert "1 of 3 vertices" in report.summary()


class TestConvergenceLog:
    def test_to_csv(self, tmp_path):
        log = ConvergenceLog()
        log.record(0, 2.5, 0.0)
        log.record(1, 1.25, 0.01, 0.5)
        path = str(tmp_path / "log.csv")
        log.to_csv(path)

        with open(path, newline='') as file:
            rows = list(csv.reader(file))

        assert rows[0] == ["iteration", "energy", "elapsed_seconds", "residual"]
        assert len(rows) == 3
        assert float(rows[2][1]) == 1.25
        assert float(rows[2][3]) == 0.5
        assert log.iterations == 1


@pytest.mark.slow
class TestSphere:
    def test_smoothing_reveals_singular_vertices(self):
        mesh = sphere_mesh(0.08)
        assert len(mesh.tets) > 40000

        field = boundary_conditions(mesh)
        config = SmootherConfig(stopping_rule="stall", relaxation=0.5, max_iterations=5000)
        field, log = smooth(mesh, field, config)

        report = singularity_indicator(mesh, field)
        assert log.converged
        assert log.energies[-1] < log.energies[0]
        assert len(report.flagged) > 0
        assert report.maximum > 0.3
