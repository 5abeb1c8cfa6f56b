"""Symmetric-definite linear algebra: Cholesky, generalized eigensolver, banded solves.

The generalized solver reduces A v = gamma B v (B SPD) to a standard
symmetric problem through an in-house Cholesky factorization.  The reduced
problem is handed to LAPACK by default; a cyclic Jacobi iteration is kept as
an alternative backend and as a cross-check for small orders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LinAlgError(ArithmeticError):
    pass


class NotPositiveDefinite(LinAlgError):
    def __init__(self, pivot_index: int, pivot_value: float):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        super().__init__(
            f"matrix not positive definite: pivot {pivot_index} is {pivot_value:.6g}")


@dataclass
class EigenPairs:
    """Eigenvalues sorted descending with B-orthonormal column eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray


def cholesky(B: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = B; fails on a non-positive pivot."""
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    L = np.zeros_like(B)
    for j in range(n):
        d = B[j, j] - np.dot(L[j, :j], L[j, :j])
        if d <= 0.0 or not np.isfinite(d):
            raise NotPositiveDefinite(j, float(d))
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (B[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_lower(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Forward substitution L X = B (B may be a matrix)."""
    B = np.array(B, dtype=float)
    one_d = B.ndim == 1
    X = B.reshape(len(B), -1)
    for i in range(L.shape[0]):
        if i:
            X[i] -= L[i, :i] @ X[:i]
        X[i] /= L[i, i]
    return X.ravel() if one_d else X


def solve_upper(U: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Back substitution U X = B."""
    B = np.array(B, dtype=float)
    one_d = B.ndim == 1
    X = B.reshape(len(B), -1)
    n = U.shape[0]
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            X[i] -= U[i, i + 1:] @ X[i + 1:]
        X[i] /= U[i, i]
    return X.ravel() if one_d else X


def cholesky_solve(L: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return solve_upper(L.T, solve_lower(L, rhs))


def jacobi_eigh(A: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi iteration for a dense symmetric matrix.

    Terminates when the off-diagonal Frobenius norm drops below
    1e-13 * ||A||_F; raises if `max_sweeps` full sweeps do not get there.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    norm_a = np.linalg.norm(A)
    if norm_a == 0.0:
        return np.zeros(n), V
    threshold = 1e-13 * norm_a

    def offdiag() -> float:
        off = A - np.diag(np.diag(A))
        return float(np.linalg.norm(off))

    for _ in range(max_sweeps):
        if offdiag() <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= threshold / n:
                    continue
                theta = 0.5 * (A[q, q] - A[p, p]) / apq
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    if offdiag() > threshold:
        raise LinAlgError(
            f"Jacobi iteration did not converge in {max_sweeps} sweeps: "
            f"off-diagonal residual {offdiag():.3e} (threshold {threshold:.3e})")
    return np.diag(A).copy(), V


def sym_generalized_eig(A: np.ndarray, B: np.ndarray, count: int | None = None,
                        method: str = "lapack", max_sweeps: int = 100) -> EigenPairs:
    """Top eigenpairs of A v = gamma B v with symmetric A and SPD B.

    Never forms B^{-1/2} explicitly: a Cholesky congruence maps the problem
    to a standard symmetric one with the identical spectrum.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    if count is None:
        count = n
    if count > n:
        raise LinAlgError(f"requested {count} eigenpairs from an order-{n} problem")
    L = cholesky(B)
    C = solve_lower(L, solve_lower(L, A).T)
    C = 0.5 * (C + C.T)
    if method == "lapack":
        vals, vecs = np.linalg.eigh(C)
    elif method == "jacobi":
        vals, vecs = jacobi_eigh(C, max_sweeps=max_sweeps)
    else:
        raise LinAlgError(f"unknown eigensolver method {method!r}")
    order = np.argsort(vals)[::-1][:count]
    vals = vals[order]
    vecs = solve_upper(L.T, vecs[:, order])
    return EigenPairs(values=vals, vectors=vecs)


def solve_banded(M: np.ndarray, rhs: np.ndarray, bandwidth: int | None = None) -> np.ndarray:
    """Solve M x = rhs for a banded matrix by in-band LU without pivoting.

    Suitable for the diagonally-dominant/definite systems assembled here;
    a vanishing pivot is reported as singularity.
    """
    M = np.array(M, dtype=float)
    n = M.shape[0]
    if bandwidth is None:
        nz = np.nonzero(M)
        bandwidth = int(np.max(np.abs(nz[0] - nz[1]))) if nz[0].size else 0
    p = bandwidth
    x = np.array(rhs, dtype=float)
    scale = np.max(np.abs(M)) or 1.0
    for i in range(n - 1):
        piv = M[i, i]
        if abs(piv) < 1e-300 * scale:
            raise LinAlgError(f"singular banded matrix: zero pivot at row {i}")
        hi = min(n, i + p + 1)
        f = M[i + 1:hi, i] / piv
        M[i + 1:hi, i:hi] -= np.outer(f, M[i, i:hi])
        x[i + 1:hi] -= f * x[i]
    for i in range(n - 1, -1, -1):
        piv = M[i, i]
        if abs(piv) < 1e-300 * scale:
            raise LinAlgError(f"singular banded matrix: zero pivot at row {i}")
        hi = min(n, i + p + 1)
        x[i] = (x[i] - np.dot(M[i, i + 1:hi], x[i + 1:hi])) / piv
    return x


def solve_tridiagonal(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
                      rhs: np.ndarray) -> np.ndarray:
    """Thomas algorithm for a general tridiagonal system."""
    n = len(diag)
    c = np.zeros(n - 1)
    d = np.zeros(n)
    piv = diag[0]
    if piv == 0.0:
        raise LinAlgError("singular tridiagonal matrix: zero pivot at row 0")
    c[0] = upper[0] / piv
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i - 1] * c[i - 1]
        if piv == 0.0:
            raise LinAlgError(f"singular tridiagonal matrix: zero pivot at row {i}")
        if i < n - 1:
            c[i] = upper[i] / piv
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / piv
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x
