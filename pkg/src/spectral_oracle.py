"""Spectral Oracle Module

Truncated Hamiltonian matrix in the orthonormal basis phi_m = z^m / sqrt(m!)
and its lowest eigenvalues. Matrix elements are derived from the exact Weyl
operators, so the matrix is symmetric with half-bandwidth 4 by construction.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, eig_banded, eigh

from src.weyl_algebra import MonomialVector, WeylPoly, build_hamiltonian, weyl_apply


logger = logging.getLogger(__name__)

HALF_BANDWIDTH = 4
MIN_DIM = 8


class SpectralError(Exception):
    """Base class for spectral oracle errors"""
    pass


class PreconditionError(SpectralError):
    """Raised when a request violates an operation's precondition"""
    pass


class ConvergenceFailure(SpectralError):
    """Raised when an eigenpair misses the residual contract"""
    pass


def basis_factor(m: int, n: int) -> float:
    """sqrt(m!/n!), converting monomial coefficients to orthonormal elements"""
    if m >= n:
        return math.sqrt(math.perm(m, m - n))
    return 1.0 / math.sqrt(math.perm(n, n - m))


def orthonormal_element(op: WeylPoly, m: int, n: int) -> float:
    """<phi_m | op phi_n> = [z^m coefficient of op z^n] * sqrt(m!/n!)"""
    coefficient = weyl_apply(op, MonomialVector.monomial(n)).coefficient(m)
    return float(coefficient) * basis_factor(m, n) if coefficient else 0.0


@dataclass
class OperatorMatrix:
    """Symmetric banded matrix in lower band storage: band[i - j, j] = H[i, j]"""

    g: float
    dim: int
    band: np.ndarray
    bandwidth: int = HALF_BANDWIDTH

    def element(self, m: int, n: int) -> float:
        if m < n:
            m, n = n, m
        if m - n > self.bandwidth or m >= self.dim:
            return 0.0
        return float(self.band[m - n, n])

    def dense(self) -> np.ndarray:
        full = np.zeros((self.dim, self.dim))
        for offset in range(self.bandwidth + 1):
            diagonal = self.band[offset, :self.dim - offset]
            idx = np.arange(self.dim - offset)
            full[idx + offset, idx] = diagonal
            full[idx, idx + offset] = diagonal
        return full

    def inf_norm(self) -> float:
        return float(np.max(np.sum(np.abs(self.dense()), axis=1)))


@dataclass
class EigenResult:
    g: float
    N: int
    eigenvalues: np.ndarray
    residuals: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "g": self.g,
            "N": self.N,
            "level": np.arange(len(self.eigenvalues)),
            "eigenvalue": self.eigenvalues,
            "residual": self.residuals,
        })


def _exact_columns(op: WeylPoly, dim: int) -> List[MonomialVector]:
    return [weyl_apply(op, MonomialVector.monomial(n)) for n in range(dim)]


def build_matrix(g: float, N: int) -> OperatorMatrix:
    """Truncated H0 + g V in the orthonormal basis

    Args:
        g: Coupling, g >= 0
        N: Dimension, at least 8

    Returns:
        OperatorMatrix with rows and columns >= N dropped
    """
    if N < MIN_DIM:
        raise PreconditionError(f"matrix dimension must be at least {MIN_DIM}, got {N}")
    if g < 0:
        raise PreconditionError(f"coupling must be non-negative, got g={g}")

    h0, v = build_hamiltonian()
    h0_columns = _exact_columns(h0, N)
    v_columns = _exact_columns(v, N)

    band = np.zeros((HALF_BANDWIDTH + 1, N))
    for n in range(N):
        for offset in range(HALF_BANDWIDTH + 1):
            m = n + offset
            if m >= N:
                break
            value = float(h0_columns[n].coefficient(m)) + g * float(v_columns[n].coefficient(m))
            band[offset, n] = value * basis_factor(m, n)

    logger.debug(f"Built banded matrix g={g}, N={N}")
    return OperatorMatrix(g=g, dim=N, band=band)


def _residual_norms(dense: np.ndarray, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    return np.linalg.norm(dense @ vectors - vectors * values, axis=0)


def _check_count(matrix: OperatorMatrix, count: int) -> None:
    if count < 1 or count > matrix.dim // 4:
        raise PreconditionError(
            f"requested {count} eigenvalues from N={matrix.dim}; need 1 <= L <= N/4"
        )


def _check_residuals(matrix: OperatorMatrix, residuals: np.ndarray,
                     residual_factor: float) -> None:
    bound = residual_factor * matrix.inf_norm()
    worst = float(np.max(residuals))
    if worst > bound:
        raise ConvergenceFailure(
            f"residual {worst:.3e} exceeds {bound:.3e} (g={matrix.g}, N={matrix.dim})"
        )


def eigenvalues(matrix: OperatorMatrix, count: int,
                residual_factor: float = 1e-10) -> EigenResult:
    """Lowest eigenvalues with residual check

    Args:
        matrix: Banded operator matrix
        count: Number L of eigenvalues, L <= N/4
        residual_factor: Residual bound relative to the infinity norm

    Returns:
        EigenResult with ascending eigenvalues
    """
    _check_count(matrix, count)
    try:
        values, vectors = eig_banded(matrix.band, lower=True, select="i",
                                     select_range=(0, count - 1))
    except LinAlgError as e:
        raise ConvergenceFailure(f"banded eigensolve failed (g={matrix.g}, N={matrix.dim}): {e}")

    residuals = _residual_norms(matrix.dense(), values, vectors)
    _check_residuals(matrix, residuals, residual_factor)
    logger.debug(f"Eigensolve g={matrix.g}, N={matrix.dim}: lowest {values[0]:.17g}")
    return EigenResult(matrix.g, matrix.dim, values, residuals)


def eigenvalues_by_parity(matrix: OperatorMatrix, count: int,
                          residual_factor: float = 1e-10) -> EigenResult:
    """Solve the even and odd blocks separately and merge

    The Hamiltonian only couples m and n of equal parity, so the two blocks
    give the same spectrum as the full matrix.
    """
    _check_count(matrix, count)
    dense = matrix.dense()
    values: List[float] = []
    vectors: List[np.ndarray] = []
    for parity in (0, 1):
        idx = np.arange(parity, matrix.dim, 2)
        block = dense[np.ix_(idx, idx)]
        take = min(count, len(idx))
        block_values, block_vectors = eigh(block, subset_by_index=[0, take - 1])
        for j in range(take):
            embedded = np.zeros(matrix.dim)
            embedded[idx] = block_vectors[:, j]
            values.append(float(block_values[j]))
            vectors.append(embedded)

    order = np.argsort(values, kind="stable")[:count]
    merged_values = np.array(values)[order]
    merged_vectors = np.column_stack([vectors[i] for i in order])
    residuals = _residual_norms(dense, merged_values, merged_vectors)
    _check_residuals(matrix, residuals, residual_factor)
    return EigenResult(matrix.g, matrix.dim, merged_values, residuals)


def convergence_study(g: float, levels: int, dims: Sequence[int],
                      tol: float = 1e-8, residual_factor: float = 1e-10) -> pd.DataFrame:
    """Eigenvalues of the lowest levels across an ascending ladder of dimensions

    Args:
        g: Coupling
        levels: Number of levels L
        dims: Ascending matrix dimensions
        tol: Relative change at the largest N below which a level counts as converged

    Returns:
        DataFrame with columns g, N, level, eigenvalue, delta, converged;
        delta is the change from the previous dimension (NaN for the first)
    """
    dims = list(dims)
    if not dims:
        raise PreconditionError("convergence study needs at least one dimension")
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise PreconditionError(f"dimensions must be strictly ascending, got {dims}")

    rows = []
    previous = None
    for N in dims:
        result = eigenvalues(build_matrix(g, N), levels, residual_factor)
        for level, value in enumerate(result.eigenvalues):
            delta = abs(value - previous[level]) if previous is not None else float("nan")
            rows.append({"g": g, "N": N, "level": level, "eigenvalue": float(value),
                         "delta": delta})
        previous = result.eigenvalues

    table = pd.DataFrame(rows)
    last = table["N"] == dims[-1]
    table["converged"] = False
    table.loc[last, "converged"] = table.loc[last, "delta"] <= tol * table.loc[last, "eigenvalue"].abs()
    unconverged = table.loc[last & ~table["converged"], "level"].tolist()
    if unconverged:
        logger.warning(f"g={g}: levels {unconverged} not converged at N={dims[-1]}")
    return table
