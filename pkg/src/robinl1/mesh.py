"""Triangular P1 meshes of the unit square and the unit disk.

Meshes are immutable: arrays are flagged read-only and refinement builds a
new object. Boundary edges are oriented so the domain lies on their left,
which makes (dy, -dx)/L the outward unit normal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

# 7-point degree-5 rule on the reference triangle (barycentric coords, weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
TRI_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
TRI_W = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_triangle: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray
    kind: str = "polygon"

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_boundary_edges(self) -> int:
        return len(self.boundary_edges)

    @cached_property
    def boundary_vertex(self) -> np.ndarray:
        flags = np.zeros(self.n_vertices, dtype=bool)
        flags[self.boundary_edges.ravel()] = True
        flags.setflags(write=False)
        return flags

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_vertex)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Constant gradients of the three hat functions per triangle, shape (T, 3, 2)."""
        p = self.vertices[self.triangles]
        a2 = 2.0 * self.signed_areas
        g = np.empty((self.n_triangles, 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            g[:, i, 0] = (p[:, j, 1] - p[:, k, 1]) / a2
            g[:, i, 1] = (p[:, k, 0] - p[:, j, 0]) / a2
        return g

    @cached_property
    def edges(self) -> np.ndarray:
        """All undirected edges, sorted vertex pairs."""
        e = self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        return np.unique(np.sort(e, axis=1), axis=0)

    @cached_property
    def interior_mass(self) -> np.ndarray:
        """Lumped interior measure: integral of each hat function over the domain."""
        m = np.zeros(self.n_vertices)
        np.add.at(m, self.triangles.ravel(), np.repeat(self.areas / 3.0, 3))
        return m

    @cached_property
    def boundary_mass(self) -> np.ndarray:
        """Lumped boundary measure: boundary integral of each hat function."""
        m = np.zeros(self.n_vertices)
        np.add.at(m, self.boundary_edges.ravel(), np.repeat(self.lengths / 2.0, 2))
        return m

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def perimeter(self) -> float:
        return float(self.lengths.sum())

    @cached_property
    def max_edge_length(self) -> float:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return float(np.sqrt((d**2).sum(axis=1)).max())

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges) + self.n_triangles

    def angles(self) -> np.ndarray:
        """Interior angle at each local vertex, shape (T, 3)."""
        p = self.vertices[self.triangles]
        out = np.empty((self.n_triangles, 3))
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            cosang = (u * v).sum(1) / np.sqrt((u**2).sum(1) * (v**2).sum(1))
            out[:, i] = np.arccos(np.clip(cosang, -1.0, 1.0))
        return out

    def is_delaunay(self, tol: float = 1e-10) -> bool:
        """Opposite angles of every interior edge sum to at most pi, and every
        boundary edge faces an angle of at most pi/2.

        This is the condition under which the P1 Laplacian is an M-matrix.
        """
        ang = self.angles()
        opp = {}
        for i in range(3):
            a = self.triangles[:, (i + 1) % 3]
            b = self.triangles[:, (i + 2) % 3]
            for t, (x, y) in enumerate(zip(a, b)):
                key = (min(x, y), max(x, y))
                opp[key] = opp.get(key, 0.0) + ang[t, i]
        bset = {(min(a, b), max(a, b)) for a, b in self.boundary_edges}
        for key, s in opp.items():
            limit = math.pi / 2 if key in bset else math.pi
            if s > limit + tol:
                return False
        return True

    def interpolate(self, func) -> "DiscreteField":
        return DiscreteField(self, func(self.vertices[:, 0], self.vertices[:, 1]))

    def boundary_quadrature(self, order: int = 4):
        """Gauss-Legendre rule on every boundary edge.

        Returns (points (B,q,2), weights (B,q), t (q,)) where t is the
        parameter along each edge so the hat functions of the edge's start and
        end vertex are 1-t and t.
        """
        t, w = gauss_legendre(order)
        a = self.vertices[self.boundary_edges[:, 0]]
        b = self.vertices[self.boundary_edges[:, 1]]
        pts = a[:, None, :] * (1.0 - t)[None, :, None] + b[:, None, :] * t[None, :, None]
        wts = self.lengths[:, None] * w[None, :]
        return pts, wts, t

    def interior_quadrature(self):
        """Points (T,7,2), weights (T,7), barycentric coordinates (7,3)."""
        p = self.vertices[self.triangles]
        pts = np.einsum("qk,tkd->tqd", TRI_BARY, p)
        wts = self.areas[:, None] * TRI_W[None, :]
        return pts, wts, TRI_BARY


@dataclass(frozen=True, eq=False)
class DiscreteField:
    """Nodal values of a P1 function."""

    mesh: Mesh2D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.mesh.n_vertices,):
            raise ValueError(f"expected {self.mesh.n_vertices} nodal values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def boundary_values(self) -> np.ndarray:
        return self.values[self.mesh.boundary_vertices]


def gauss_legendre(order: int):
    """Nodes on (0,1) and weights summing to 1."""
    if not 1 <= order <= 8:
        raise ValueError("quadrature order must be in 1..8")
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def boundary_quadrature(mesh: Mesh2D, edge: int, order: int = 4):
    """(points, weights) of the Gauss rule on one boundary edge."""
    t, w = gauss_legendre(order)
    a, b = mesh.vertices[mesh.boundary_edges[edge]]
    pts = a[None, :] * (1.0 - t)[:, None] + b[None, :] * t[:, None]
    return pts, w * mesh.lengths[edge]


def build_mesh(vertices, triangles, kind: str = "polygon") -> Mesh2D:
    """Assemble boundary structure from a vertex/triangle list.

    Triangles with negative orientation are flipped; degenerate ones rejected.
    """
    vertices = np.asarray(vertices, dtype=float)
    tri = np.array(triangles, dtype=np.int64)
    p = vertices[tri]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    scale = max(1.0, float(np.abs(vertices).max()))
    if np.any(np.abs(area2) <= 1e-14 * scale**2):
        raise ValueError("degenerate triangle in mesh")
    neg = area2 < 0
    tri[neg] = tri[neg][:, [0, 2, 1]]

    directed = tri[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    owner = np.repeat(np.arange(len(tri)), 3)
    keys = np.sort(directed, axis=1)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if np.any(counts > 2):
        raise ValueError("non-manifold edge (shared by more than two triangles)")
    on_boundary = counts[inv] == 1
    bedges = directed[on_boundary]
    btri = owner[on_boundary]

    d = vertices[bedges[:, 1]] - vertices[bedges[:, 0]]
    lengths = np.sqrt((d**2).sum(axis=1))
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]
    return Mesh2D(
        vertices=_frozen(vertices, float),
        triangles=_frozen(tri, np.int64),
        boundary_edges=_frozen(bedges, np.int64),
        boundary_triangle=_frozen(btri, np.int64),
        normals=_frozen(normals, float),
        lengths=_frozen(lengths, float),
        kind=kind,
    )


def generate_unit_square(m: int) -> Mesh2D:
    """Structured right-triangle mesh of [0,1]^2 with m cells per side."""
    if m < 2:
        raise ValueError("m must be >= 2")
    xs = np.linspace(0.0, 1.0, m + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(m):
        for i in range(m):
            v00 = j * (m + 1) + i
            v10, v01, v11 = v00 + 1, v00 + m + 1, v00 + m + 2
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return build_mesh(verts, tris, kind="square")


def disk_boundary_segments(m: int) -> int:
    """Number of boundary segments used by ``generate_unit_disk(m)``."""
    return 2 * m + 1


def generate_unit_disk(m: int) -> Mesh2D:
    """Ring-structured Delaunay triangulation of the unit disk.

    The boundary polygon has 2m+1 segments with a vertex at theta = pi; the
    odd count keeps every vertex away from theta = 0 (nearest one at
    angular distance pi/(2m+1)). Interior rings are equispaced in radius,
    with a point count proportional to the radius, and staggered by half a
    step on alternating rings.
    """
    if m < 4:
        raise ValueError("m must be >= 4")
    nb = disk_boundary_segments(m)
    rings = max(2, int(round(nb / (2.0 * math.pi))))
    pts = [(0.0, 0.0)]
    for k in range(1, rings + 1):
        r = k / rings
        nk = nb if k == rings else max(6, int(round(nb * k / rings)))
        shift = 0.0 if (rings - k) % 2 == 0 else 0.5
        th = math.pi + 2.0 * math.pi * (np.arange(nk) + shift) / nk
        th = np.mod(th + math.pi, 2.0 * math.pi) - math.pi  # to [-pi, pi)
        ring = np.column_stack([r * np.cos(th), r * np.sin(th)])
        if k == rings:
            ring[0] = (-1.0, 0.0)  # exact vertex at theta = pi
        pts.extend(map(tuple, ring))
    verts = np.array(pts)
    tri = Delaunay(verts).simplices
    p = verts[tri]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    keep = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) > 1e-13
    return build_mesh(verts, tri[keep], kind="disk")


def refine_uniform(mesh: Mesh2D) -> Mesh2D:
    """Split every triangle into four through its edge midpoints.

    On disk meshes new boundary vertices are pushed onto the unit circle.
    """
    tri = mesh.triangles
    e = np.sort(tri[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    inv = inv.ravel().reshape(-1, 3)
    nv = mesh.n_vertices
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    if mesh.kind == "disk":
        bkeys = {tuple(k) for k in np.sort(mesh.boundary_edges, axis=1)}
        is_b = np.array([tuple(k) in bkeys for k in uniq])
        mids[is_b] /= np.linalg.norm(mids[is_b], axis=1)[:, None]
    verts = np.vstack([mesh.vertices, mids])
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    mab, mbc, mca = inv[:, 0] + nv, inv[:, 1] + nv, inv[:, 2] + nv
    new = np.concatenate(
        [
            np.column_stack([a, mab, mca]),
            np.column_stack([mab, b, mbc]),
            np.column_stack([mca, mbc, c]),
            np.column_stack([mab, mbc, mca]),
        ]
    )
    return build_mesh(verts, new, kind=mesh.kind)


# ---------------------------------------------------------------- text I/O


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_mesh(mesh: Mesh2D, path, header: list[str] | None = None) -> None:
    lines = [f"# {h}" for h in (header or [])]
    lines.append(f"# kind {mesh.kind}")
    lines.append(
        f"{mesh.n_vertices} vertices {mesh.n_triangles} triangles {mesh.n_boundary_edges} boundary_edges"
    )
    lines += [f"{_fmt(x)} {_fmt(y)}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    for (a, b), t, (nx, ny), L in zip(
        mesh.boundary_edges, mesh.boundary_triangle, mesh.normals, mesh.lengths
    ):
        lines.append(f"{a} {b} {t} {_fmt(nx)} {_fmt(ny)} {_fmt(L)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh2D:
    kind = "polygon"
    rows = []
    for line in Path(path).read_text().splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            parts = s[1:].split()
            if len(parts) == 2 and parts[0] == "kind":
                kind = parts[1]
            continue
        rows.append(s.split())
    head = rows[0]
    if len(head) != 6 or head[1] != "vertices" or head[3] != "triangles" or head[5] != "boundary_edges":
        raise ValueError("malformed mesh header")
    nv, nt, nb = int(head[0]), int(head[2]), int(head[4])
    body = rows[1:]
    if len(body) != nv + nt + nb:
        raise ValueError("row count does not match header")
    verts = np.array(body[:nv], dtype=float)
    tris = np.array(body[nv : nv + nt], dtype=np.int64)
    mesh = build_mesh(verts, tris, kind=kind)
    if mesh.n_boundary_edges != nb:
        raise ValueError("boundary edge count does not match triangles")
    return mesh


def write_field_csv(field: DiscreteField, path, header: list[str] | None = None) -> None:
    lines = [f"# {h}" for h in (header or [])]
    lines.append("vertex_id,x,y,value")
    for i, ((x, y), v) in enumerate(zip(field.mesh.vertices, field.values)):
        lines.append(f"{i},{_fmt(x)},{_fmt(y)},{_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_vtk(field: DiscreteField, path, name: str = "u", title: str = "robinl1 field") -> None:
    """Legacy ASCII VTK unstructured grid with one point scalar."""
    mesh = field.mesh
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {mesh.n_vertices} double")
    out += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices]
    out.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    out.append(f"CELL_TYPES {mesh.n_triangles}")
    out += ["5"] * mesh.n_triangles
    out.append(f"POINT_DATA {mesh.n_vertices}")
    out.append(f"SCALARS {name} double 1")
    out.append("LOOKUP_TABLE default")
    out += [_fmt(v) for v in field.values]
    Path(path).write_text("\n".join(out) + "\n")
