"""P1 finite elements for -div(sigma grad u) + eps*u = f with zero Neumann data.

All element integrals are exact for the piecewise-linear ansatz: the
element mass matrix is area/12 * [[2,1,1],[1,2,1],[1,1,2]], gradients are
constant per triangle, and boundary edges carry length/6 * [[2,1],[1,2]].
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import NonPositiveCoefficient, SingularState
from .mesh import Mesh, triangle_areas

PIVOT_TOL = 1e-12


class CoefficientKind(Enum):
    IDENTITY = "identity"
    DIAGONAL = "diagonal"


@dataclass(frozen=True)
class CoefficientField:
    """Diffusivity sigma = diag(kappa1, kappa2), constant per triangle."""

    kind: CoefficientKind
    kappa1: np.ndarray
    kappa2: np.ndarray

    @classmethod
    def identity(cls, mesh: Mesh) -> "CoefficientField":
        ones = np.ones(mesh.n_triangles)
        return cls(CoefficientKind.IDENTITY, ones, ones.copy())

    @classmethod
    def diagonal(cls, kappa1: np.ndarray, kappa2: np.ndarray) -> "CoefficientField":
        return cls(
            CoefficientKind.DIAGONAL,
            np.asarray(kappa1, dtype=np.float64),
            np.asarray(kappa2, dtype=np.float64),
        )

    @classmethod
    def from_functions(cls, mesh: Mesh, f1, f2) -> "CoefficientField":
        """Sample two callables (x, y) -> kappa at triangle centroids."""
        cent = mesh.nodes[mesh.triangles].mean(axis=1)
        return cls.diagonal(f1(cent[:, 0], cent[:, 1]), f2(cent[:, 0], cent[:, 1]))


@dataclass(frozen=True)
class FemSystem:
    """Assembled matrices for one mesh, epsilon and coefficient field.

    K_sigma and M are n_nodes x n_nodes sparse; B is the dense boundary
    mass matrix in boundary-node order; S = K_sigma + epsilon*M is the
    state matrix; trace_map selects boundary values from nodal vectors.
    """

    K_sigma: scipy.sparse.csr_matrix
    M: scipy.sparse.csr_matrix
    B: np.ndarray
    S: scipy.sparse.csr_matrix
    epsilon: float
    trace_map: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.M.shape[0]


def assemble(mesh: Mesh, epsilon: float, sigma: CoefficientField | None = None) -> FemSystem:
    """Assemble stiffness, mass, boundary-mass and state matrices.

    Parameters
    ----------
    mesh : Mesh
    epsilon : float
        Reaction coefficient; may be negative (Helmholtz regime).
    sigma : CoefficientField, optional
        Defaults to the identity diffusivity.

    Raises
    ------
    NonPositiveCoefficient
        If any per-triangle kappa is not strictly positive.
    """
    if sigma is None:
        sigma = CoefficientField.identity(mesh)
    k1 = np.asarray(sigma.kappa1, dtype=np.float64)
    k2 = np.asarray(sigma.kappa2, dtype=np.float64)
    if k1.shape != (mesh.n_triangles,) or k2.shape != (mesh.n_triangles,):
        raise NonPositiveCoefficient(
            f"coefficient arrays must have one value per triangle "
            f"({mesh.n_triangles}), got {k1.shape} and {k2.shape}"
        )
    if np.any(k1 <= 0) or np.any(k2 <= 0):
        raise NonPositiveCoefficient("kappa1 and kappa2 must be positive on every triangle")

    p = mesh.nodes[mesh.triangles]  # (n_tri, 3, 2)
    x, y = p[..., 0], p[..., 1]
    area = triangle_areas(mesh)
    # P1 gradient coefficients: grad(lambda_i) = (b_i, c_i) / (2*area)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)

    ke = (
        k1[:, None, None] * b[:, :, None] * b[:, None, :]
        + k2[:, None, None] * c[:, :, None] * c[:, None, :]
    ) / (4.0 * area)[:, None, None]
    me_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    me = area[:, None, None] * me_ref[None, :, :]

    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_nodes
    K = scipy.sparse.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = scipy.sparse.coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    bnodes = mesh.boundary_nodes
    pos = {int(v): i for i, v in enumerate(bnodes)}
    nb = len(bnodes)
    B = np.zeros((nb, nb))
    for u, v in mesh.boundary_edges:
        length = float(np.linalg.norm(mesh.nodes[u] - mesh.nodes[v]))
        i, j = pos[int(u)], pos[int(v)]
        B[i, i] += length / 3.0
        B[j, j] += length / 3.0
        B[i, j] += length / 6.0
        B[j, i] += length / 6.0

    S = (K + epsilon * M).tocsr()
    return FemSystem(K_sigma=K, M=M, B=B, S=S, epsilon=epsilon, trace_map=bnodes.copy())


class StateSolver:
    """Factorization of the state matrix, reusable across many loads.

    Uses a Cholesky factorization when epsilon > 0 (S is then symmetric
    positive definite) and LU with a relative pivot check otherwise.
    Immutable after construction; safe to share between threads.
    """

    def __init__(self, sys: FemSystem):
        S = sys.S.toarray()
        self._spd = sys.epsilon > 0
        if self._spd:
            try:
                self._factor = scipy.linalg.cho_factor(S, check_finite=False)
            except scipy.linalg.LinAlgError as exc:
                raise SingularState(f"Cholesky failed on the state matrix: {exc}") from exc
            diag = np.abs(np.diag(self._factor[0]))
            if diag.min() < np.sqrt(PIVOT_TOL) * diag.max():
                raise SingularState("state matrix numerically singular (tiny Cholesky pivot)")
        else:
            lu, piv = scipy.linalg.lu_factor(S, check_finite=False)
            diag = np.abs(np.diag(lu))
            if diag.min() < PIVOT_TOL * diag.max():
                raise SingularState(
                    f"state matrix numerically singular at epsilon={sys.epsilon!r} "
                    f"(pure Neumann or near a resonance)"
                )
            self._factor = (lu, piv)

    def solve(self, load: np.ndarray) -> np.ndarray:
        """Solve S*u = load for one vector or a matrix of stacked columns."""
        if self._spd:
            return scipy.linalg.cho_solve(self._factor, load, check_finite=False)
        return scipy.linalg.lu_solve(self._factor, load, check_finite=False)


def solve_state(sys: FemSystem, load: np.ndarray) -> np.ndarray:
    """One-shot state solve; factorizes and discards the factorization."""
    load = np.asarray(load, dtype=np.float64)
    if load.shape[0] != sys.n_nodes:
        raise ValueError(f"load has length {load.shape[0]}, expected {sys.n_nodes}")
    return StateSolver(sys).solve(load)


def trace(sys: FemSystem, u: np.ndarray) -> np.ndarray:
    """Restrict a nodal vector to the boundary nodes, in boundary order."""
    return np.asarray(u)[sys.trace_map]
