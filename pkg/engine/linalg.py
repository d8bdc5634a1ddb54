"""
Sparse linear solvers: BiCGStab(l) with right preconditioning (none,
diagonal or ILU(0)) and a direct sparse LU for small systems.

Matrices are scipy.sparse CSR matrices with sorted indices and summed
duplicates.
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import io, sparse
from scipy.sparse.linalg import splu, spsolve_triangular

logger = logging.getLogger(__name__)

# --- Configuration ---
METHODS = ("bicgstab_ell", "direct_lu")
PRECONDITIONERS = ("none", "diagonal", "ilu0")
DEFAULT_ELL = 2
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10000
PIVOT_SHIFT = 1e-8


class SolverError(RuntimeError):
    """A linear solve failed."""


class SolverBreakdown(SolverError):
    """BiCGStab(l) broke down; ``history`` holds the residual norms so far."""

    def __init__(self, message, history):
        self.history = list(history)
        super().__init__(f"{message} after {len(self.history) - 1} iterations "
                         f"(last residual {self.history[-1]:.3e})")


class ZeroPivotWarning(UserWarning):
    """ILU(0) met a zero pivot and shifted it."""


@dataclass
class SolverConfig:
    method: str = "bicgstab_ell"
    ell: int = DEFAULT_ELL
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    preconditioner: str = "diagonal"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"Unknown solver method {self.method!r}; expected one of {METHODS}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"Unknown preconditioner {self.preconditioner!r}; expected one of {PRECONDITIONERS}")
        if self.ell < 1:
            raise ValueError(f"ell must be >= 1, got {self.ell}")
        if self.tol <= 0:
            raise ValueError(f"Solver tolerance must be positive, got {self.tol}")


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool
    history: list = field(default_factory=list)


def as_csr(A):
    A = sparse.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


# --- Preconditioners ---

class IdentityPreconditioner:
    def apply(self, r):
        return r


class DiagonalPreconditioner:
    def __init__(self, A):
        diag = A.diagonal()
        if np.any(diag == 0.0):
            raise SolverError(f"Diagonal preconditioner: {int(np.sum(diag == 0.0))} zero diagonal entries")
        self.inverse = 1.0 / diag

    def apply(self, r):
        return self.inverse * r


class ILU0Preconditioner:
    """Incomplete LU without fill: L and U live on the sparsity pattern of A."""

    def __init__(self, lower, upper, shifted=0):
        self.lower = lower
        self.upper = upper
        self.shifted = shifted

    def apply(self, r):
        y = spsolve_triangular(self.lower, r, lower=True, unit_diagonal=True)
        return spsolve_triangular(self.upper, y, lower=False)


def build_ilu0(A):
    """
    ILU(0) factorization (IKJ variant) on the pattern of A plus its diagonal.

    Zero pivots are replaced by a small shift and reported with a warning.

    :param A: Square sparse matrix.
    :return: ILU0Preconditioner.
    """
    A = as_csr(A)
    n = A.shape[0]
    coo = A.tocoo()
    pattern = sparse.coo_matrix(
        (np.concatenate([coo.data, np.zeros(n)]),
         (np.concatenate([coo.row, np.arange(n)]), np.concatenate([coo.col, np.arange(n)]))),
        shape=A.shape).tocsr()
    pattern.sort_indices()
    indptr, indices, data = pattern.indptr, pattern.indices, pattern.data.copy()
    diag_ptr = np.array([indptr[i] + np.searchsorted(indices[indptr[i]:indptr[i + 1]], i) for i in range(n)])

    scale = max(float(np.abs(data).max()) if len(data) else 1.0, 1.0)
    shifted = 0
    for i in range(n):
        start, end = indptr[i], indptr[i + 1]
        position = {int(indices[k]): k for k in range(start, end)}
        for kk in range(start, diag_ptr[i]):
            k = indices[kk]
            data[kk] /= data[diag_ptr[k]]
            factor = data[kk]
            for jj in range(diag_ptr[k] + 1, indptr[k + 1]):
                p = position.get(int(indices[jj]))
                if p is not None:
                    data[p] -= factor * data[jj]
        if data[diag_ptr[i]] == 0.0:
            data[diag_ptr[i]] = PIVOT_SHIFT * scale
            shifted += 1
    if shifted:
        warnings.warn(f"ILU(0): shifted {shifted} zero pivots", ZeroPivotWarning)
        logger.warning("ILU(0): shifted %d zero pivots", shifted)

    factors = sparse.csr_matrix((data, indices.copy(), indptr.copy()), shape=A.shape)
    lower = sparse.tril(factors, k=-1, format="csr") + sparse.identity(n, format="csr")
    upper = sparse.triu(factors, k=0, format="csr")
    return ILU0Preconditioner(lower.tocsr(), upper.tocsr(), shifted)


def apply_precond(P, r):
    return P.apply(r)


def make_preconditioner(A, kind):
    if kind == "diagonal":
        return DiagonalPreconditioner(A)
    if kind == "ilu0":
        return build_ilu0(A)
    return IdentityPreconditioner()


# --- Solvers ---

def bicgstab_ell(A, b, x0=None, ell=DEFAULT_ELL, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                 preconditioner=None):
    """
    BiCGStab(l) for A x = b, right preconditioned, with the minimal-residual
    polynomial step computed by least squares.

    Convergence is checked after every BiCG step on the updated residual
    ||r|| / ||b||; the returned residual is recomputed from b - A x.

    :return: SolveResult.
    :raises SolverBreakdown: If a BiCG coefficient vanishes.
    """
    P = preconditioner or IdentityPreconditioner()
    n = A.shape[0]
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return SolveResult(np.zeros(n), 0, 0.0, True, [0.0])

    def operator(v):
        return A @ P.apply(v)

    r = [b - A @ x0] + [np.zeros(n) for _ in range(ell)]
    u = [np.zeros(n) for _ in range(ell + 1)]
    y = np.zeros(n)
    shadow = r[0].copy()
    history = [np.linalg.norm(r[0]) / b_norm]
    if history[-1] <= tol:
        return SolveResult(x0.copy(), 0, history[-1], True, history)

    rho0, alpha, omega = 1.0, 0.0, 1.0
    iterations = 0
    while iterations < max_iter:
        rho0 = -omega * rho0
        for j in range(ell):
            rho1 = float(shadow @ r[j])
            if rho0 == 0.0:
                raise SolverBreakdown("BiCGStab(l) breakdown (rho = 0)", history)
            beta = alpha * rho1 / rho0
            rho0 = rho1
            for i in range(j + 1):
                u[i] = r[i] - beta * u[i]
            u[j + 1] = operator(u[j])
            gamma = float(shadow @ u[j + 1])
            if gamma == 0.0:
                raise SolverBreakdown("BiCGStab(l) breakdown (gamma = 0)", history)
            alpha = rho0 / gamma
            for i in range(j + 1):
                r[i] = r[i] - alpha * u[i + 1]
            r[j + 1] = operator(r[j])
            y = y + alpha * u[0]
            iterations += 1
            history.append(np.linalg.norm(r[0]) / b_norm)
            if history[-1] <= tol or iterations >= max_iter:
                break
        if history[-1] <= tol or iterations >= max_iter:
            break

        R = np.column_stack(r[1:])
        coeffs, *_ = np.linalg.lstsq(R, r[0], rcond=None)
        omega = coeffs[-1]
        if omega == 0.0:
            raise SolverBreakdown("BiCGStab(l) breakdown (omega = 0)", history)
        for j in range(1, ell + 1):
            y = y + coeffs[j - 1] * r[j - 1]
            u[0] = u[0] - coeffs[j - 1] * u[j]
        r[0] = r[0] - R @ coeffs
        history[-1] = np.linalg.norm(r[0]) / b_norm
        if history[-1] <= tol:
            break

    x = x0 + P.apply(y)
    residual = np.linalg.norm(b - A @ x) / b_norm
    converged = history[-1] <= tol
    if not converged:
        logger.warning("BiCGStab(%d) stopped after %d iterations at residual %.3e", ell, iterations, residual)
    return SolveResult(x, iterations, float(residual), bool(converged), history)


def direct_lu(A, b):
    """Sparse LU solve."""
    try:
        x = splu(sparse.csc_matrix(A)).solve(np.asarray(b, dtype=float))
    except RuntimeError as e:
        raise SolverError(f"Direct LU failed: {e}") from e
    b_norm = np.linalg.norm(b) or 1.0
    residual = float(np.linalg.norm(b - A @ x) / b_norm)
    return SolveResult(x, 1, residual, bool(np.all(np.isfinite(x))), [residual])


def solve(A, b, x0=None, config=None):
    """
    Solves A x = b with the configured method.

    :param A: Square sparse matrix.
    :param b: Right-hand side.
    :param x0: Optional initial guess.
    :param config: SolverConfig (defaults when None).
    :return: SolveResult(x, iterations, residual, converged, history).
    """
    config = config or SolverConfig()
    A = as_csr(A)
    if A.shape[0] != A.shape[1] or A.shape[0] != len(b):
        raise SolverError(f"Shape mismatch: A is {A.shape}, b has {len(b)} entries")
    if config.method == "direct_lu":
        result = direct_lu(A, b)
    else:
        P = make_preconditioner(A, config.preconditioner)
        result = bicgstab_ell(A, np.asarray(b, dtype=float), x0, config.ell, config.tol,
                              config.max_iter, P)
    logger.debug("%s: %d iterations, residual %.3e", config.method, result.iterations, result.residual)
    return result


def export_matrix(A, path):
    """Writes A in Matrix Market coordinate format."""
    io.mmwrite(str(path), sparse.coo_matrix(A))
