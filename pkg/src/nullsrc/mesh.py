"""Structured triangular meshes of the unit square and an L-shaped domain.

Meshes are built deterministically: nodes in row-major order, every cell
split along its lower-left to upper-right diagonal, counterclockwise
triangles. The L-shaped domain is the unit square minus the open
upper-right quadrant [1/2,1] x [1/2,1].
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidSpec


class Shape(Enum):
    UNIT_SQUARE = "unit_square"
    L_SHAPE = "l_shape"


@dataclass(frozen=True)
class DomainSpec:
    """Structured-grid description of the computational domain."""

    shape: Shape
    nx: int
    ny: int


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with explicit boundary structure.

    Attributes
    ----------
    nodes : (n_nodes, 2) float array
        Vertex coordinates.
    triangles : (n_tri, 3) int array
        Vertex indices, counterclockwise (positive signed area).
    boundary_edges : (n_bedges, 2) int array
        Edges lying on the domain boundary, oriented as traversed by
        their owning triangle.
    boundary_nodes : (n_bnodes,) int array
        Indices of boundary vertices, ascending.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_nodes: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


def _boundary_structure(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Boundary edges (appearing in exactly one triangle) and their nodes."""
    counts: dict[tuple[int, int], int] = {}
    oriented: dict[tuple[int, int], tuple[int, int]] = {}
    for a, b, c in triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            counts[key] = counts.get(key, 0) + 1
            oriented[key] = (u, v)
    bedges = [oriented[k] for k, n in counts.items() if n == 1]
    if any(n > 2 for n in counts.values()):
        raise InvalidSpec("non-manifold edge: more than two incident triangles")
    bedges_arr = np.array(sorted(bedges), dtype=np.int64).reshape(-1, 2)
    bnodes = np.unique(bedges_arr)
    return bedges_arr, bnodes


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Signed areas of all triangles (positive for CCW orientation)."""
    p = mesh.nodes[mesh.triangles]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def build_mesh(spec: DomainSpec) -> Mesh:
    """Triangulate the requested domain with nx-by-ny structured cells.

    The unit square gets (nx+1)(ny+1) nodes and 2*nx*ny triangles; the
    L-shape drops the cells and interior nodes of the removed quadrant.
    Raises InvalidSpec for non-positive cell counts or odd L-shape counts.
    """
    nx, ny = spec.nx, spec.ny
    if nx < 1 or ny < 1:
        raise InvalidSpec(f"cell counts must be positive, got {nx}x{ny}")
    if spec.shape is Shape.L_SHAPE and (nx % 2 or ny % 2):
        raise InvalidSpec(
            f"L-shape needs even cell counts so the removed quadrant "
            f"aligns with cells, got {nx}x{ny}"
        )

    hx, hy = 1.0 / nx, 1.0 / ny
    if spec.shape is Shape.UNIT_SQUARE:
        keep_node = np.ones((ny + 1, nx + 1), dtype=bool)
        keep_cell = np.ones((ny, nx), dtype=bool)
    else:
        ix = np.arange(nx + 1)
        iy = np.arange(ny + 1)
        keep_node = (iy[:, None] <= ny // 2) | (ix[None, :] <= nx // 2)
        cx = np.arange(nx)
        cy = np.arange(ny)
        keep_cell = (cy[:, None] < ny // 2) | (cx[None, :] < nx // 2)

    index = -np.ones((ny + 1, nx + 1), dtype=np.int64)
    nodes = []
    k = 0
    for j in range(ny + 1):
        for i in range(nx + 1):
            if keep_node[j, i]:
                index[j, i] = k
                nodes.append((i * hx, j * hy))
                k += 1

    triangles = []
    for j in range(ny):
        for i in range(nx):
            if not keep_cell[j, i]:
                continue
            n00 = index[j, i]
            n10 = index[j, i + 1]
            n01 = index[j + 1, i]
            n11 = index[j + 1, i + 1]
            # diagonal from lower-left to upper-right
            triangles.append((n00, n10, n11))
            triangles.append((n00, n11, n01))

    tri_arr = np.array(triangles, dtype=np.int64)
    bedges, bnodes = _boundary_structure(tri_arr)
    return Mesh(
        nodes=np.array(nodes, dtype=np.float64),
        triangles=tri_arr,
        boundary_edges=bedges,
        boundary_nodes=bnodes,
    )


def refine_uniform(mesh: Mesh) -> tuple[Mesh, np.ndarray]:
    """Split every triangle into four via edge midpoints.

    Coarse nodes keep their indices and coordinates in the fine mesh.
    Returns the refined mesh and the coarse-to-fine node injection map
    (here simply arange(n_coarse), kept explicit for callers).
    """
    n_coarse = mesh.n_nodes
    edges = set()
    for a, b, c in mesh.triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            edges.add((min(u, v), max(u, v)))
    edge_list = sorted(edges)
    midpoint = {e: n_coarse + i for i, e in enumerate(edge_list)}

    fine_nodes = np.vstack(
        [mesh.nodes]
        + [0.5 * (mesh.nodes[[u]] + mesh.nodes[[v]]) for u, v in edge_list]
    )

    fine_tris = []
    for a, b, c in mesh.triangles:
        mab = midpoint[(min(a, b), max(a, b))]
        mbc = midpoint[(min(b, c), max(b, c))]
        mca = midpoint[(min(c, a), max(c, a))]
        fine_tris.extend(
            [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
        )

    tri_arr = np.array(fine_tris, dtype=np.int64)
    bedges, bnodes = _boundary_structure(tri_arr)
    fine = Mesh(
        nodes=fine_nodes,
        triangles=tri_arr,
        boundary_edges=bedges,
        boundary_nodes=bnodes,
    )
    return fine, np.arange(n_coarse, dtype=np.int64)


def export_text(mesh: Mesh) -> str:
    """Plain-text dump: nodes, blank line, triangles, blank line, boundary edges."""
    lines = [f"{float(x)!r} {float(y)!r}" for x, y in mesh.nodes]
    lines.append("")
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles)
    lines.append("")
    lines.extend(f"{i} {j}" for i, j in mesh.boundary_edges)
    return "\n".join(lines) + "\n"
