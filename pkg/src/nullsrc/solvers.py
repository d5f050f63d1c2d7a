"""Regularized inversion: standard Tikhonov, the three weighted methods,
minimum-norm least squares, and discrepancy-principle parameter selection.

Every method reduces to a quadratic problem, solved in stacked
least-squares form; the alpha -> 0 limits are realized exactly by
truncated-SVD pseudo-inverse solves. The stored residual is the data-fit
term of each method's own optimization problem, which is monotone in
alpha and can be recomputed from the returned coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import GammaTooLarge, GammaTooSmall, IllConditioned
from .spectral import RANK_TOL_REL, ForwardModel, SpectralData

ARGMAX_TIE_TOL = 1e-8


class Method(Enum):
    STANDARD_TIKHONOV = "standard_tikhonov"
    METHOD_I = "method_i"
    METHOD_II = "method_ii"
    METHOD_III = "method_iii"
    MIN_NORM = "min_norm"


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one regularized solve, in control-basis coefficients.

    argmax_cell is the smallest index attaining the maximum coefficient;
    argmax_tieset lists all indices within the tie tolerance of it. On
    uniform control grids coefficient order equals cell-value order.
    """

    coeffs: np.ndarray
    alpha: float
    residual: float
    method: Method
    argmax_cell: int
    argmax_tieset: tuple[int, ...]


def _argmax_tieset(coeffs: np.ndarray, tol: float = ARGMAX_TIE_TOL) -> tuple[int, tuple[int, ...]]:
    top = float(np.max(coeffs))
    ties = tuple(int(i) for i in np.flatnonzero(coeffs >= top - tol))
    return ties[0], ties


def tikhonov(
    A_hat: np.ndarray,
    b_hat: np.ndarray,
    alpha: float,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Solve min |A_hat z - b_hat|^2 + alpha |W z|^2, unique for alpha > 0.

    weights holds the diagonal of W (identity when absent). Solved through
    QR of the stacked matrix [A_hat; sqrt(alpha) W], which computes the
    same minimizer as the normal equations (A^T A + alpha W^2) z = A^T b
    but stays backward stable when alpha is far below |A_hat|^2 (squaring
    A_hat would drown alpha in round-off there).
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    A_hat = np.atleast_2d(np.asarray(A_hat, dtype=np.float64))
    b_hat = np.asarray(b_hat, dtype=np.float64)
    m, n = A_hat.shape
    root = math.sqrt(alpha)
    if weights is None:
        penalty = np.full(n, root)
    else:
        penalty = root * np.asarray(weights, dtype=np.float64)
    stacked = np.vstack([A_hat, np.diag(penalty)])
    rhs = np.concatenate([b_hat, np.zeros(n)])
    try:
        Q, R = scipy.linalg.qr(stacked, mode="economic", check_finite=False)
        diag = np.abs(np.diag(R))
        if diag.min() == 0.0 or diag.min() < 1e-15 * diag.max():
            raise IllConditioned("regularized least-squares matrix numerically singular")
        return scipy.linalg.solve_triangular(R, Q.T @ rhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise IllConditioned(f"regularized least-squares solve failed: {exc}") from exc


def min_norm_lsq(
    A_hat: np.ndarray, b_hat: np.ndarray, rank_tol_rel: float = RANK_TOL_REL
) -> np.ndarray:
    """Minimum-norm least-squares solution via the truncated-SVD pseudo-inverse."""
    A_hat = np.asarray(A_hat, dtype=np.float64)
    b_hat = np.asarray(b_hat, dtype=np.float64)
    U, s, Vt = np.linalg.svd(A_hat, full_matrices=False)
    r = int(np.sum(s > rank_tol_rel * s[0])) if s.size and s[0] > 0 else 0
    if r == 0:
        return np.zeros(A_hat.shape[1])
    return Vt[:r].T @ ((U[:, :r].T @ b_hat) / s[:r])


def residual_from_coeffs(
    A_hat: np.ndarray,
    sd: SpectralData,
    method: Method,
    coeffs: np.ndarray,
    b_hat: np.ndarray,
) -> float:
    """Data-fit residual of a method's optimization problem, from its coeffs."""
    w = sd.p_norms
    if method is Method.METHOD_I:
        fit = A_hat @ (coeffs * w)  # optimization variable is W * coeffs
    elif method is Method.METHOD_II:
        fit = A_hat @ (coeffs / w)  # operator acts through W^{-1}
    elif method is Method.METHOD_III:
        fit = A_hat @ coeffs  # same optimum as Method II, z = W^{-1} y
    else:
        fit = A_hat @ coeffs
    return float(np.linalg.norm(fit - b_hat))


def standard_tikhonov(
    model: ForwardModel, sd: SpectralData, b_hat: np.ndarray, alpha: float
) -> SolveResult:
    """Unweighted Tikhonov solution."""
    x = tikhonov(model.A_hat, b_hat, alpha)
    res = float(np.linalg.norm(model.A_hat @ x - b_hat))
    cell, ties = _argmax_tieset(x)
    return SolveResult(x, alpha, res, Method.STANDARD_TIKHONOV, cell, ties)


def method_I(
    model: ForwardModel, sd: SpectralData, b_hat: np.ndarray, alpha: float
) -> SolveResult:
    """Standard Tikhonov followed by the inverse weight scaling."""
    x = tikhonov(model.A_hat, b_hat, alpha)
    res = float(np.linalg.norm(model.A_hat @ x - b_hat))
    coeffs = x / sd.p_norms
    cell, ties = _argmax_tieset(coeffs)
    return SolveResult(coeffs, alpha, res, Method.METHOD_I, cell, ties)


def method_II(
    model: ForwardModel, sd: SpectralData, b_hat: np.ndarray, alpha: float
) -> SolveResult:
    """Tikhonov for the rescaled operator A_hat W^{-1}."""
    Aw = model.A_hat / sd.p_norms[None, :]
    y = tikhonov(Aw, b_hat, alpha)
    res = float(np.linalg.norm(Aw @ y - b_hat))
    cell, ties = _argmax_tieset(y)
    return SolveResult(y, alpha, res, Method.METHOD_II, cell, ties)


def method_III(
    model: ForwardModel, sd: SpectralData, b_hat: np.ndarray, alpha: float
) -> SolveResult:
    """Tikhonov with the weighted penalty |W z|; equals W^{-1} of method II."""
    z = tikhonov(model.A_hat, b_hat, alpha, weights=sd.p_norms)
    res = float(np.linalg.norm(model.A_hat @ z - b_hat))
    cell, ties = _argmax_tieset(z)
    return SolveResult(z, alpha, res, Method.METHOD_III, cell, ties)


def min_norm_solve(model: ForwardModel, sd: SpectralData, b_hat: np.ndarray) -> SolveResult:
    """Pseudo-inverse solution computed from the stored SVD."""
    b_hat = np.asarray(b_hat, dtype=np.float64)
    r = sd.rank
    x = sd.V_r @ ((sd.U[:, :r].T @ b_hat) / sd.s[:r]) if r else np.zeros(sd.V.shape[0])
    res = float(np.linalg.norm(model.A_hat @ x - b_hat))
    cell, ties = _argmax_tieset(x)
    return SolveResult(x, 0.0, res, Method.MIN_NORM, cell, ties)


_SOLVERS = {
    Method.STANDARD_TIKHONOV: standard_tikhonov,
    Method.METHOD_I: method_I,
    Method.METHOD_II: method_II,
    Method.METHOD_III: method_III,
}


def solve_method(
    model: ForwardModel, sd: SpectralData, b_hat: np.ndarray, alpha: float, method: Method
) -> SolveResult:
    """Dispatch one of the alpha-regularized methods."""
    if method is Method.MIN_NORM:
        return min_norm_solve(model, sd, b_hat)
    return _SOLVERS[method](model, sd, b_hat, alpha)


def morozov(
    model: ForwardModel,
    sd: SpectralData,
    b_hat: np.ndarray,
    gamma: float,
    method: Method = Method.METHOD_II,
    alpha_range: tuple[float, float] = (1e-14, 1e6),
    rel_tol: float = 1e-3,
) -> tuple[float, SolveResult]:
    """Pick alpha so the method's residual matches the noise norm gamma.

    Bisects on log(alpha) using the monotonicity of the residual. Raises
    GammaTooSmall / GammaTooLarge when gamma falls outside the residual
    range attainable on alpha_range.
    """
    if gamma <= 0:
        raise GammaTooSmall(f"discrepancy target must be positive, got {gamma!r}")
    if method is Method.MIN_NORM:
        raise ValueError("discrepancy principle needs an alpha-dependent method")
    lo, hi = alpha_range
    if not (0 < lo < hi):
        raise ValueError(f"invalid alpha range {alpha_range!r}")

    def res_at(alpha: float) -> SolveResult:
        return solve_method(model, sd, b_hat, alpha, method)

    r_lo = res_at(lo)
    if abs(r_lo.residual - gamma) <= rel_tol * gamma:
        return lo, r_lo
    if r_lo.residual > gamma:
        raise GammaTooSmall(
            f"gamma={gamma!r} below the minimal attainable residual {r_lo.residual!r}"
        )
    r_hi = res_at(hi)
    if abs(r_hi.residual - gamma) <= rel_tol * gamma:
        return hi, r_hi
    if r_hi.residual < gamma:
        raise GammaTooLarge(
            f"gamma={gamma!r} above the largest attainable residual {r_hi.residual!r}"
        )

    llo, lhi = math.log(lo), math.log(hi)
    best = None
    for _ in range(200):
        mid = math.exp(0.5 * (llo + lhi))
        r_mid = res_at(mid)
        if abs(r_mid.residual - gamma) <= rel_tol * gamma:
            best = (mid, r_mid)
            break
        if r_mid.residual < gamma:
            llo = math.log(mid)
        else:
            lhi = math.log(mid)
    if best is None:
        raise IllConditioned("discrepancy bisection failed to converge")
    return best
