"""
Tests for the tetrahedral mesh, its MSH / simple-tet readers, the VTK export and the fixture meshes.
"""

import logging

import numpy as np
import pytest

from crossfield.field_smoother import CrossField, SingularityReport
from crossfield.mesh_files import (FileError, ParseError, TetMesh, TopologyError, VertexGraph, cube_mesh,
                                   export_vtk, load_mesh, read_vtk_point_data, save_mesh, sphere_mesh)
from crossfield.tensor_rep import reference_tensor
from tests.crosses import data_file, z_cross

UNIT_TET = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestVertexGraph:
    def test_duplicate_edges_are_merged(self):
        graph = VertexGraph(3, [(0, 1), (1, 0), (1, 2)])

        assert len(graph.edges) == 2
        np.testing.assert_array_equal(graph.degrees, [1, 2, 1])
        np.testing.assert_array_equal(graph.neighbors(1), [0, 2])

    def test_averaging_rows(self):
        graph = VertexGraph(4, [(0, 1), (1, 2), (1, 3)])
        values = np.array([0.0, 3.0, 6.0, 9.0])

        np.testing.assert_allclose(graph.averaging @ values, [3.0, 5.0, 3.0, 3.0])

    def test_isolated_vertex_has_an_empty_row(self):
        graph = VertexGraph(3, [(0, 1)])

        assert graph.degrees[2] == 0
        assert (graph.averaging @ np.ones(3))[2] == 0.0
        assert len(graph.vertex_adjacency[2]) == 0

    def test_rejects_self_loop(self):
        with pytest.raises(TopologyError):
            VertexGraph(2, [(1, 1)])


class TestTetMesh:
    def test_single_tet(self):
        mesh = TetMesh(UNIT_TET, [[0, 1, 2, 3]])

        assert len(mesh.edges) == 6
        assert len(mesh.boundary_triangles) == 4
        np.testing.assert_allclose(np.linalg.norm(mesh.boundary_normals, axis=1), 1.0)

        # Outward: pointing away from the centroid
        centers = mesh.vertices[mesh.boundary_triangles].mean(axis=1)
        assert np.all(np.einsum('ij,ij->i', mesh.boundary_normals, centers - 0.25) > 0.0)

    def test_triangles_wind_with_their_normals(self):
        mesh = TetMesh(UNIT_TET, [[0, 2, 1, 3]])
        corners = mesh.vertices[mesh.boundary_triangles]
        doubled = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])

        np.testing.assert_allclose(doubled / np.linalg.norm(doubled, axis=1, keepdims=True), mesh.boundary_normals)

    def test_two_tets_sharing_a_face(self):
        mesh = load_mesh(data_file("two_tets.tet"))

        assert mesh.vertex_count == 5
        assert len(mesh.boundary_triangles) == 6
        assert len(mesh.edges) == 9

    def test_dangling_index(self):
        with pytest.raises(TopologyError):
            TetMesh(UNIT_TET, [[0, 1, 2, 4]])

    def test_repeated_vertex(self):
        with pytest.raises(TopologyError):
            TetMesh(UNIT_TET, [[0, 1, 2, 2]])

    def test_face_shared_by_three_tets(self):
        vertices = UNIT_TET + [[1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]]
        with pytest.raises(TopologyError):
            TetMesh(vertices, [[0, 1, 2, 3], [1, 2, 3, 4], [1, 2, 3, 5]])

    def test_vertex_normals_of_a_corner(self):
        mesh = TetMesh(UNIT_TET, [[0, 1, 2, 3]])
        normal = mesh.vertex_normals()[0]

        # The three coordinate faces at the origin, each of area 1/2
        np.testing.assert_allclose(normal, [-0.5, -0.5, -0.5])
        assert mesh.vertex_boundary_areas()[0] == pytest.approx(1.5)


class TestReadMsh:
    def test_single_tet(self, caplog):
        with caplog.at_level(logging.WARNING):
            mesh = load_mesh(data_file("single_tet.msh"))

        assert mesh.vertex_count == 4
        assert len(mesh.tets) == 1
        np.testing.assert_array_equal(mesh.tets[0], [0, 1, 2, 3])
        assert len(mesh.boundary_triangles) == 4

        skipped = [record.getMessage() for record in caplog.records
                   if record.name == "crossfield.mesh_files" and record.levelno == logging.WARNING]
        assert len(skipped) == 2
        assert any("1 vertex cells" in message for message in skipped)
        assert any("2 triangle cells" in message for message in skipped)

    def test_bad_coordinate_reports_line_and_column(self, tmp_path):
        path = write(tmp_path, "bad.msh", "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n1\n1 0 x 0\n$EndNodes\n")
        with pytest.raises(ParseError) as info:
            load_mesh(path)

        assert info.value.line == 6
        assert info.value.column == 5

    def test_binary_header_without_data(self, tmp_path):
        path = write(tmp_path, "binary.msh", "$MeshFormat\n2.2 1 8\n$EndMeshFormat\n")
        with pytest.raises(ParseError):
            load_mesh(path)

    def test_unknown_node(self, tmp_path):
        text = ("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n"
                "$EndNodes\n$Elements\n1\n1 4 0 1 2 3 9\n$EndElements\n")
        with pytest.raises((ParseError, TopologyError)):
            load_mesh(write(tmp_path, "unknown.msh", text))

    def test_truncated_file(self, tmp_path):
        path = write(tmp_path, "short.msh", "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n3\n1 0 0 0\n")
        with pytest.raises(ParseError):
            load_mesh(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileError):
            load_mesh(str(tmp_path / "missing.msh"))


class TestSaveMesh:
    @pytest.mark.parametrize("name", ["cube.msh", "cube.tet"])
    def test_round_trip(self, tmp_path, name):
        mesh = cube_mesh(2)
        path = str(tmp_path / name)
        save_mesh(mesh, path)
        loaded = load_mesh(path)

        np.testing.assert_array_equal(loaded.vertices, mesh.vertices)
        np.testing.assert_array_equal(loaded.tets, mesh.tets)


class TestExportVtk:
    def test_point_data(self, tmp_path):
        mesh = TetMesh(UNIT_TET, [[0, 1, 2, 3]])
        tensors = np.array([reference_tensor().a, z_cross(0.3).a, reference_tensor().a, z_cross(-0.2).a])
        eta = np.array([0.0, 0.1, 0.2, 0.3])
        report = SingularityReport(eta, np.flatnonzero(eta >= 0.3), (0.3, 0.5), np.histogram(eta))

        path = str(tmp_path / "field.vtk")
        export_vtk(mesh, CrossField(tensors), report, path)

        with open(path) as file:
            text = file.read()
        assert text.startswith("# vtk DataFile Version")
        assert "ASCII" in text
        assert "DATASET UNSTRUCTURED_GRID" in text

        arrays = read_vtk_point_data(path)
        np.testing.assert_allclose(arrays["eta"], eta, atol=1e-12)
        np.testing.assert_allclose(arrays["tensor"], tensors, rtol=1e-12, atol=1e-12)
        for name in ("direction1", "direction2", "direction3"):
            assert arrays[name].shape == (4, 3)
            np.testing.assert_allclose(np.linalg.norm(arrays[name], axis=1), 1.0, atol=1e-12)

        # Directions of the reference cross are the coordinate axes, up to sign and order
        frame = np.abs(np.array([arrays["direction%d" % q][0] for q in (1, 2, 3)]))
        np.testing.assert_allclose(np.sort(frame, axis=0), [[0, 0, 0], [0, 0, 0], [1, 1, 1]], atol=1e-12)


class TestFixtureMeshes:
    def test_cube(self):
        mesh = cube_mesh(2)

        assert mesh.vertex_count == 27
        assert len(mesh.tets) == 48
        assert len(mesh.boundary_triangles) == 48

        # Face normals are the coordinate axes
        np.testing.assert_allclose(np.sort(np.abs(mesh.boundary_normals), axis=1), np.tile([0.0, 0.0, 1.0], (48, 1)),
                                   atol=1e-15)

    def test_cube_tets_are_positively_oriented(self):
        mesh = cube_mesh(2)
        corners = mesh.vertices[mesh.tets]
        volumes = np.einsum('ij,ij->i', np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]),
                            corners[:, 3] - corners[:, 0])
        np.testing.assert_allclose(volumes, 1.0 / 8.0)

    def test_sphere(self):
        mesh = sphere_mesh(0.3)
        boundary = mesh.boundary_vertices

        np.testing.assert_allclose(np.linalg.norm(mesh.vertices[boundary], axis=1), 1.0, atol=1e-12)

        centers = mesh.vertices[mesh.boundary_triangles].mean(axis=1)
        assert np.all(np.einsum('ij,ij->i', mesh.boundary_normals, centers) > 0.0)

    def test_sphere_rejects_large_size(self):
        with pytest.raises(ValueError):
            sphere_mesh(2.0)
