"""Whitened forward matrix, nullspace projector norms and the weight operator.

The forward matrix A maps control coefficients to boundary nodal values.
Left-multiplying by the Cholesky factor R of the boundary mass matrix
(B = R^T R) makes Euclidean norms on data equal L2 norms on the boundary,
so a plain SVD of A_hat = R A yields the orthogonal projector P onto the
complement of the nullspace and the per-basis projection norms w_i that
define the diagonal weight operator.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .control_space import ControlBasis, control_load_matrix
from .errors import DegenerateBasis
from .fem import FemSystem, StateSolver
from .mesh import Mesh

RANK_TOL_REL = 1e-12
DEGENERATE_TOL = 1e-8


@dataclass(frozen=True)
class ForwardModel:
    """Discrete forward map and its whitened version.

    A has one column per basis function (the boundary trace of the state
    it drives); R is the upper-triangular Cholesky factor of the boundary
    mass matrix; A_hat = R A.
    """

    A: np.ndarray
    R: np.ndarray
    A_hat: np.ndarray


@dataclass(frozen=True)
class SpectralData:
    """Thin SVD of the whitened forward matrix and derived quantities.

    p_norms[i] is the norm of the projection of basis function i onto the
    orthogonal complement of the nullspace; these are the diagonal entries
    of the weight operator W.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray  # right singular vectors as columns, (n, k)
    rank: int
    p_norms: np.ndarray
    rank_tol: float

    @property
    def V_r(self) -> np.ndarray:
        return self.V[:, : self.rank]

    def projector(self) -> np.ndarray:
        """Dense orthogonal projector P = V_r V_r^T onto range(A_hat^T)."""
        return self.V_r @ self.V_r.T

    def project(self, x: np.ndarray) -> np.ndarray:
        """Apply P without forming it."""
        return self.V_r @ (self.V_r.T @ np.asarray(x, dtype=np.float64))


def build_forward_model(
    sys: FemSystem, basis: ControlBasis, mesh: Mesh, n_threads: int = 1
) -> ForwardModel:
    """Assemble A column by column with one shared state factorization.

    Columns are independent solves; with n_threads > 1 they are computed
    in disjoint column blocks, which leaves the result identical.
    """
    M_cf = control_load_matrix(basis, sys, mesh)
    solver = StateSolver(sys)
    tmap = sys.trace_map
    if n_threads <= 1 or basis.n == 1:
        A = solver.solve(M_cf)[tmap, :]
    else:
        A = np.empty((len(tmap), basis.n))
        blocks = np.array_split(np.arange(basis.n), min(n_threads, basis.n))

        def run(cols: np.ndarray) -> None:
            A[:, cols] = solver.solve(M_cf[:, cols])[tmap, :]

        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            list(pool.map(run, blocks))

    R = scipy.linalg.cholesky(sys.B, lower=False, check_finite=False)
    return ForwardModel(A=A, R=R, A_hat=R @ A)


def spectral_data_from_matrix(A_hat: np.ndarray, rank_tol_rel: float = RANK_TOL_REL) -> SpectralData:
    """SVD analysis of an arbitrary whitened matrix.

    Numerical rank counts singular values above rank_tol_rel times the
    largest one. Raises DegenerateBasis if some basis function projects
    onto the nullspace complement with norm below the invertibility
    threshold (the weight operator would not be invertible).
    """
    A_hat = np.asarray(A_hat, dtype=np.float64)
    if not np.all(np.isfinite(A_hat)):
        raise ValueError("forward matrix contains non-finite entries")
    U, s, Vt = np.linalg.svd(A_hat, full_matrices=False)
    rank = int(np.sum(s > rank_tol_rel * s[0])) if s.size and s[0] > 0 else 0
    p_norms = np.linalg.norm(Vt[:rank, :], axis=0)
    bad = np.flatnonzero(p_norms < DEGENERATE_TOL)
    if bad.size:
        i = int(bad[0])
        raise DegenerateBasis(i, float(p_norms[i]))
    return SpectralData(
        U=U, s=s, V=Vt.T, rank=rank, p_norms=p_norms, rank_tol=rank_tol_rel
    )


def analyze(fm: ForwardModel, rank_tol_rel: float = RANK_TOL_REL) -> SpectralData:
    """Spectral analysis of a forward model's whitened matrix."""
    return spectral_data_from_matrix(fm.A_hat, rank_tol_rel)


def apply_W(sd: SpectralData, coeffs: np.ndarray) -> np.ndarray:
    """Multiply coefficients by the diagonal weight operator."""
    return np.asarray(coeffs, dtype=np.float64) * sd.p_norms


def apply_W_inv(sd: SpectralData, coeffs: np.ndarray) -> np.ndarray:
    """Divide coefficients by the diagonal weights (invertible by analyze)."""
    return np.asarray(coeffs, dtype=np.float64) / sd.p_norms


def optimal_scalar_weight(sd: SpectralData, i: int) -> float:
    """Best scalar c making c*phi_i closest to the normalized projection.

    Closed-form least squares in one scalar: c = (phi_i, P phi_i)/|P phi_i|,
    which collapses to p_norms[i]; computed here from the inner product so
    it can serve as an independent consistency check.
    """
    p_ei = sd.V_r @ sd.V_r[i, :]
    return float(p_ei[i] / sd.p_norms[i])
