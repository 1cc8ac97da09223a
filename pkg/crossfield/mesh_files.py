"""
    mesh_files.py
    -------------
    Implements the tetrahedral mesh used by the smoother and its file formats, read and written with meshio:
    - Gmsh MSH 2.2 ASCII (only tetrahedra are kept) and a plain "nv nt" format for fixtures
    - legacy ASCII VTK export of a cross field, and a reader for its point data
    - generators for a structured cube mesh and a Delaunay sphere mesh
"""

import itertools
import logging
import math
import os
import re

import meshio
import numpy as np
import scipy.sparse
from scipy.spatial import Delaunay

from crossfield.helper import CrossFieldError
from crossfield.recovery_projection import recover_rotations
from crossfield.tensor_rep import mandel_matrices

logger = logging.getLogger(__name__)

FORMATS = ("msh-ascii", "simple-tet")
MESHIO_READERS = {"msh-ascii": "gmsh", "simple-tet": "simple-tet"}

# Boundary faces with a smaller doubled area are rejected
DEGENERATE_FACE_TOLERANCE = 1e-14


class ParseError(CrossFieldError):
    """Raised for a malformed mesh file; carries the 1-based line and column."""

    def __init__(self, message, line, column=1):
        super().__init__("line %d, column %d: %s" % (line, column, message))
        self.line = line
        self.column = column


class TopologyError(CrossFieldError):
    """Raised for dangling vertex indices, repeated vertices in a tet or non-manifold faces."""


class FileError(CrossFieldError):
    """Raised when an input file cannot be read."""


class IoError(CrossFieldError):
    """Raised when an output file cannot be written."""


class VertexGraph:
    """Vertices connected by undirected edges. This is all the smoother needs from a mesh."""

    def __init__(self, vertex_count, edges):
        self.vertex_count = int(vertex_count)

        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= self.vertex_count):
            raise TopologyError("edge references a vertex outside [0, %d)" % self.vertex_count)
        if np.any(edges[:, 0] == edges[:, 1]):
            raise TopologyError("edge connects a vertex to itself")

        self.edges = np.unique(np.sort(edges, axis=1), axis=0)
        self.edges.setflags(write=False)

        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        columns = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        self.adjacency = scipy.sparse.csr_matrix((np.ones(len(rows)), (rows, columns)),
                                                 shape=(self.vertex_count, self.vertex_count))

        self.degrees = np.asarray(self.adjacency.sum(axis=1)).reshape(-1)

        # Row-normalized adjacency: (averaging @ values)[i] is the mean over the neighbors of i
        inverse_degrees = np.divide(1.0, self.degrees, out=np.zeros(self.vertex_count), where=self.degrees > 0)
        self.averaging = scipy.sparse.diags(inverse_degrees) @ self.adjacency

    @property
    def vertex_adjacency(self):
        return [self.adjacency.indices[self.adjacency.indptr[i]:self.adjacency.indptr[i + 1]]
                for i in range(self.vertex_count)]

    def neighbors(self, vertex):
        return self.adjacency.indices[self.adjacency.indptr[vertex]:self.adjacency.indptr[vertex + 1]]


class TetMesh(VertexGraph):
    """Tetrahedral mesh with its derived edges, boundary triangles and outward unit normals."""

    def __init__(self, vertices, tets):
        vertices = np.array(vertices, dtype=float).reshape(-1, 3)
        tets = np.array(tets, dtype=np.int64).reshape(-1, 4)

        if not np.all(np.isfinite(vertices)):
            raise TopologyError("vertex coordinates must be finite")

        dangling = np.argwhere((tets < 0) | (tets >= len(vertices)))
        if len(dangling):
            t, k = dangling[0]
            raise TopologyError("tet %d references vertex %d of %d" % (t, tets[t, k], len(vertices)))

        ordered = np.sort(tets, axis=1)
        repeated = np.flatnonzero(np.any(ordered[:, 1:] == ordered[:, :-1], axis=1))
        if len(repeated):
            raise TopologyError("tet %d repeats a vertex: %s" % (repeated[0], tets[repeated[0]].tolist()))

        edges = tets[:, list(itertools.combinations(range(4), 2))].reshape(-1, 2)
        super().__init__(len(vertices), edges)

        self.vertices = vertices
        self.tets = tets
        self.vertices.setflags(write=False)
        self.tets.setflags(write=False)

        self._find_boundary()

    def _find_boundary(self):
        # Face k of a tet is the one opposite to its vertex k
        opposite = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]
        faces = self.tets[:, opposite].reshape(-1, 3)
        owners = np.repeat(np.arange(len(self.tets)), 4)

        _, first, counts = np.unique(np.sort(faces, axis=1), axis=0, return_index=True, return_counts=True)

        if np.any(counts > 2):
            face = np.sort(faces[first[np.argmax(counts)]])
            raise TopologyError("face %s is shared by %d tets" % (face.tolist(), counts.max()))

        boundary = first[counts == 1]
        triangles = faces[boundary].copy()
        corners = self.vertices[triangles]
        doubled = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])

        # Orient away from the centroid of the owning tet
        tet_centroids = self.vertices[self.tets[owners[boundary]]].mean(axis=1)
        inward = np.einsum('ij,ij->i', doubled, corners.mean(axis=1) - tet_centroids) < 0.0
        doubled[inward] *= -1.0
        triangles[inward] = triangles[inward][:, [0, 2, 1]]

        norms = np.linalg.norm(doubled, axis=1)
        if np.any(norms < DEGENERATE_FACE_TOLERANCE):
            raise TopologyError("boundary face %s has zero area" % triangles[np.argmin(norms)].tolist())

        self.boundary_triangles = triangles
        self.boundary_normals = doubled / norms[:, np.newaxis]
        self.boundary_areas = 0.5 * norms
        for array in (self.boundary_triangles, self.boundary_normals, self.boundary_areas):
            array.setflags(write=False)

    @property
    def boundary_vertices(self):
        return np.unique(self.boundary_triangles)

    def vertex_normals(self):
        """Area-weighted sums of the adjacent boundary face normals, not normalized (zero off the boundary)."""

        sums = np.zeros((self.vertex_count, 3))
        weighted = self.boundary_areas[:, np.newaxis] * self.boundary_normals
        for corner in range(3):
            np.add.at(sums, self.boundary_triangles[:, corner], weighted)
        return sums

    def vertex_boundary_areas(self):
        areas = np.zeros(self.vertex_count)
        for corner in range(3):
            np.add.at(areas, self.boundary_triangles[:, corner], self.boundary_areas)
        return areas


#
# Reading
# ------------------------

def _read_simple(path):
    header = np.loadtxt(path, max_rows=1, dtype=np.int64, ndmin=1)
    if header.shape != (2,):
        raise ValueError("the first line must hold the vertex and tetrahedron counts")

    vertex_count, tet_count = header
    vertices = np.loadtxt(path, skiprows=1, max_rows=vertex_count, ndmin=2)
    tets = np.loadtxt(path, skiprows=1 + vertex_count, max_rows=tet_count, dtype=np.int64, ndmin=2)

    if vertices.shape != (vertex_count, 3) or tets.shape != (tet_count, 4):
        raise ValueError("expected %d vertices and %d tetrahedra" % (vertex_count, tet_count))

    return meshio.Mesh(vertices, [("tetra", tets)])


def _write_simple(path, mesh, **kwargs):
    tets = mesh.get_cells_type("tetra")
    with open(path, 'w') as file:
        file.write("%d %d\n" % (len(mesh.points), len(tets)))
        np.savetxt(file, mesh.points, fmt="%.17g")
        np.savetxt(file, tets, fmt="%d")


meshio.register_format("simple-tet", [".tet"], _read_simple, {"simple-tet": _write_simple})


def _locate_error(path, format):
    """Line and column of the first token of a numeric block that is not a number, else the end of the file."""

    with open(path, 'r') as file:
        lines = file.read().splitlines()

    block = "data"
    for number, text in enumerate(lines, 1):
        if format == "msh-ascii" and text.startswith("$"):
            block = text[1:].strip()
            continue
        if block not in ("data", "Nodes", "Elements"):
            continue
        for match in re.finditer(r'\S+', text):
            try:
                float(match.group())
            except ValueError:
                return number, match.start() + 1

    return len(lines) + 1, 1


def mesh_format(path):
    """Format implied by the file extension."""

    return "msh-ascii" if os.path.splitext(str(path))[1].lower() == ".msh" else "simple-tet"


def load_mesh(path, format=None):
    """Read a tetrahedral mesh. The format defaults to the one implied by the file extension;
    cells other than tetrahedra are skipped with a warning."""

    format = format or mesh_format(path)
    if format not in FORMATS:
        raise ValueError("unknown mesh format " + repr(format))
    if not os.path.isfile(path):
        raise FileError("Could not read mesh file " + str(path) + ": no such file")

    try:
        data = meshio.read(path, file_format=MESHIO_READERS[format])
    except OSError as e:
        raise FileError("Could not read mesh file " + str(path) + ": " + str(e)) from e
    except Exception as e:
        line, column = _locate_error(path, format)
        raise ParseError("%s: %s" % (type(e).__name__, e), line, column) from e

    tets = []
    skipped = {}
    for block in data.cells:
        if block.type == "tetra":
            tets.append(block.data)
        else:
            skipped[block.type] = skipped.get(block.type, 0) + len(block.data)

    for cell_type, count in skipped.items():
        logger.warning("Skipping %d %s cells (only tetrahedra are read)", count, cell_type)

    tets = np.concatenate(tets) if tets else np.empty((0, 4), dtype=np.int64)
    mesh = TetMesh(data.points[:, :3], tets)

    logger.info("Loaded %s: %d vertices, %d tets, %d boundary triangles",
                path, mesh.vertex_count, len(mesh.tets), len(mesh.boundary_triangles))
    return mesh


#
# Writing
# ------------------------

def _write(path, data, file_format, **kwargs):
    try:
        meshio.write(path, data, file_format=file_format, **kwargs)
    except OSError as e:
        raise IoError("Could not write " + str(path) + ": " + str(e)) from e


def save_mesh(mesh, path, format=None):
    """Write the mesh as MSH 2.2 ASCII or in the plain "nv nt" format.
    The format defaults to the one implied by the file extension."""

    format = format or mesh_format(path)
    if format not in FORMATS:
        raise ValueError("unknown mesh format " + repr(format))

    tags = np.ones(len(mesh.tets), dtype=np.int32)
    data = meshio.Mesh(mesh.vertices, [("tetra", mesh.tets)],
                       cell_data={"gmsh:physical": [tags], "gmsh:geometrical": [tags]})

    if format == "msh-ascii":
        _write(path, data, "gmsh22", binary=False)
    else:
        _write(path, data, "simple-tet")


def field_directions(tensors):
    """The three cross directions per vertex, shape (n, 3, 3) with direction q in [:, q];
    zero where the rotation cannot be recovered."""

    frames, degenerate = recover_rotations(mandel_matrices(tensors))
    directions = np.transpose(frames, (0, 2, 1)).copy()
    directions[degenerate] = 0.0
    return directions


def export_vtk(mesh, field, report, path):
    """Write mesh and field as a legacy ASCII VTK unstructured grid: eta, the 9 tensor
    parameters and the three recovered cross directions as point data."""

    tensors = np.asarray(field.tensors, dtype=float)
    directions = field_directions(tensors)

    point_data = {"eta": np.asarray(report.eta, dtype=float), "tensor": tensors}
    for q in range(3):
        point_data["direction%d" % (q + 1)] = directions[:, q]

    _write(path, meshio.Mesh(mesh.vertices, [("tetra", mesh.tets)], point_data=point_data), "vtk", binary=False)
    logger.info("Wrote %s", path)


def read_vtk_point_data(path):
    """Point data arrays of a VTK file by name: shape (n,) for scalars, (n, components) otherwise."""

    try:
        data = meshio.read(path, file_format="vtk")
    except Exception as e:
        raise FileError("Could not read " + str(path) + ": " + str(e)) from e

    count = len(data.points)
    arrays = {}
    for name, values in data.point_data.items():
        values = np.asarray(values, dtype=float).reshape(count, -1)
        arrays[name] = values[:, 0] if values.shape[1] == 1 else values
    return arrays



#
# Fixture meshes
# ------------------------

def _positively_oriented(vertices, tets):
    corners = vertices[tets]
    volumes = np.einsum('ij,ij->i', np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]),
                        corners[:, 3] - corners[:, 0])
    tets = tets.copy()
    tets[volumes < 0.0] = tets[volumes < 0.0][:, [0, 1, 3, 2]]
    return tets


def cube_mesh(n, size=1.0):
    """Tetrahedralize [0, size]^3 with n cells per side, six tets per cell along the main diagonal."""

    if n < 1:
        raise ValueError("cube_mesh needs at least one cell per side")

    ticks = np.linspace(0.0, size, n + 1)
    x, y, z = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    vertices = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)

    def index(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    steps = np.eye(3, dtype=np.int64)
    tets = []
    for cell in itertools.product(range(n), repeat=3):
        for permutation in itertools.permutations(range(3)):
            corner = np.array(cell)
            path = [index(*corner)]
            for axis in permutation:
                corner = corner + steps[axis]
                path.append(index(*corner))
            tets.append(path)

    return TetMesh(vertices, _positively_oriented(vertices, np.array(tets, dtype=np.int64)))


def fibonacci_sphere(count, radius=1.0):
    """Nearly uniform points on the sphere along a golden-angle spiral."""

    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    azimuth = math.pi * (1.0 + math.sqrt(5.0)) * k
    ring = np.sqrt(1.0 - z * z)
    return radius * np.stack([ring * np.cos(azimuth), ring * np.sin(azimuth), z], axis=1)


def sphere_mesh(h, radius=1.0):
    """Delaunay tetrahedralization of a cubic lattice of spacing h inside the ball plus a
    Fibonacci point set on its surface."""

    if not 0.0 < h < radius:
        raise ValueError("sphere_mesh needs 0 < h < radius")

    ticks = np.arange(-radius, radius + 0.5 * h, h)
    x, y, z = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    lattice = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    lattice = lattice[np.linalg.norm(lattice, axis=1) < radius - 0.5 * h]

    surface = fibonacci_sphere(int(math.ceil(4.0 * math.pi * radius * radius / (h * h))), radius)
    points = np.vstack([lattice, surface])

    tets = Delaunay(points).simplices

    # Drop points qhull left out of the triangulation
    used, tets = np.unique(tets, return_inverse=True)
    tets = tets.reshape(-1, 4)
    vertices = points[used]

    return TetMesh(vertices, _positively_oriented(vertices, tets))
