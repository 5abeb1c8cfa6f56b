import numpy as np
import pytest

from nskstab.linalg import (LinAlgError, NotPositiveDefinite, cholesky,
                            cholesky_solve, jacobi_eigh, solve_banded,
                            solve_tridiagonal, sym_generalized_eig)


def random_spd(rng, n, shift=1.0):
    X = rng.standard_normal((n, n))
    return X @ X.T + shift * np.eye(n)


def random_sym(rng, n):
    X = rng.standard_normal((n, n))
    return 0.5 * (X + X.T)


# --- independent oracle: inertia-count bisection -------------------------
# The number of generalized eigenvalues of (A, B) below x equals the number
# of negative pivots of the symmetric Gaussian elimination of A - x B
# (Sylvester's law of inertia under the Cholesky congruence of B).

def _negative_pivots(M):
    M = M.copy()
    n = M.shape[0]
    scale = np.max(np.abs(M)) or 1.0
    neg = 0
    for i in range(n):
        piv = M[i, i]
        if abs(piv) < 1e-13 * scale:
            return None  # x hit (numerically) an eigenvalue; caller nudges x
        if piv < 0:
            neg += 1
        if i + 1 < n:
            M[i + 1:, i + 1:] -= np.outer(M[i + 1:, i], M[i, i + 1:]) / piv
    return neg


def count_below(A, B, x):
    for nudge in (0.0, 1e-11, -1e-11, 1e-9, -1e-9):
        neg = _negative_pivots(A - (x + nudge) * B)
        if neg is not None:
            return neg
    raise AssertionError("could not evaluate inertia near x")


def oracle_generalized_eigs(A, B):
    """All eigenvalues of A v = gamma B v by pure inertia bisection."""
    n = A.shape[0]
    lo, hi = -1.0, 1.0
    while count_below(A, B, lo) > 0:
        lo *= 2.0
    while count_below(A, B, hi) < n:
        hi *= 2.0
    eigs = []
    for m in range(1, n + 1):
        a, b = lo, hi
        for _ in range(100):
            mid = 0.5 * (a + b)
            if count_below(A, B, mid) >= m:
                b = mid
            else:
                a = mid
        eigs.append(0.5 * (a + b))
    return np.array(eigs)[::-1]  # descending


# --- cholesky -------------------------------------------------------------

def test_cholesky_identity():
    L = cholesky(np.eye(4))
    assert np.allclose(L, np.eye(4))


def test_cholesky_hand_factorization():
    B = np.array([[4.0, 2.0], [2.0, 3.0]])
    L = cholesky(B)
    assert np.allclose(L, [[2.0, 0.0], [1.0, np.sqrt(2.0)]])
    assert np.allclose(L @ L.T, B, atol=1e-12)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite, match="pivot"):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))  # eigenvalues 3, -1


def test_cholesky_roundtrip_random():
    rng = np.random.default_rng(0)
    B = random_spd(rng, 40)
    L = cholesky(B)
    assert np.max(np.abs(L @ L.T - B)) <= 1e-12 * np.max(np.abs(B))
    x = rng.standard_normal(40)
    assert np.max(np.abs(B @ cholesky_solve(L, x) - x)) <= 1e-10 * np.max(np.abs(x))


# --- generalized eigensolver ----------------------------------------------

def test_diagonal_problem():
    eig = sym_generalized_eig(np.diag([2.0, 1.0]), np.eye(2))
    assert np.allclose(eig.values, [2.0, 1.0])


def test_negative_identity():
    eig = sym_generalized_eig(-np.eye(3), np.eye(3))
    assert np.allclose(eig.values, [-1.0, -1.0, -1.0])


def test_against_inertia_oracle_8x8():
    rng = np.random.default_rng(5)
    A = random_sym(rng, 8)
    B = random_spd(rng, 8)
    got = sym_generalized_eig(A, B).values
    want = oracle_generalized_eigs(A, B)
    assert np.max(np.abs(got - want)) <= 1e-10 * max(1.0, np.max(np.abs(want)))


@pytest.mark.parametrize("n", [8, 64, 512])
def test_residual_and_b_orthonormality(n):
    rng = np.random.default_rng(n)
    A = random_sym(rng, n)
    B = random_spd(rng, n)
    eig = sym_generalized_eig(A, B, count=min(n, 12))
    na, nb = np.linalg.norm(A, 2), np.linalg.norm(B, 2)
    for i, gam in enumerate(eig.values):
        v = eig.vectors[:, i]
        res = np.linalg.norm(A @ v - gam * B @ v)
        assert res <= 1e-11 * (na + abs(gam) * nb) * np.linalg.norm(v)
    V = eig.vectors
    G = V.T @ B @ V
    assert np.max(np.abs(G - np.eye(G.shape[0]))) <= 1e-10


def test_eigenvalue_scaling_exact():
    rng = np.random.default_rng(2)
    A = random_sym(rng, 16)
    B = random_spd(rng, 16)
    v1 = sym_generalized_eig(A, B).values
    v3 = sym_generalized_eig(3.0 * A, B).values
    assert np.max(np.abs(v3 - 3.0 * v1)) <= 1e-12 * max(1.0, np.max(np.abs(v3)))


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(9)
    A = random_sym(rng, 24)
    B = random_spd(rng, 24)
    lap = sym_generalized_eig(A, B, method="lapack").values
    jac = sym_generalized_eig(A, B, method="jacobi").values
    assert np.max(np.abs(lap - jac)) <= 1e-10 * max(1.0, np.max(np.abs(lap)))


def test_jacobi_standard_spectrum():
    rng = np.random.default_rng(12)
    A = random_sym(rng, 20)
    vals, vecs = jacobi_eigh(A)
    order = np.argsort(vals)[::-1]
    ref = np.sort(np.linalg.eigvalsh(A))[::-1]
    assert np.max(np.abs(vals[order] - ref)) <= 1e-11 * max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(vecs @ vecs.T - np.eye(20))) <= 1e-12


def test_identity_B_reduces_to_standard_spectrum():
    rng = np.random.default_rng(33)
    A = random_sym(rng, 18)
    gen = sym_generalized_eig(A, np.eye(18)).values
    vals, _ = jacobi_eigh(A)
    assert np.max(np.abs(gen - np.sort(vals)[::-1])) <= \
        1e-11 * max(1.0, np.max(np.abs(gen)))


def test_jacobi_nonconvergence_reports_residual():
    rng = np.random.default_rng(1)
    A = random_sym(rng, 30)
    with pytest.raises(LinAlgError, match="residual"):
        jacobi_eigh(A, max_sweeps=1)


def test_count_exceeds_order_rejected():
    with pytest.raises(LinAlgError):
        sym_generalized_eig(np.eye(3), np.eye(3), count=4)


# --- banded / tridiagonal solvers ------------------------------------------

def test_solve_banded_identity_and_diagonal():
    rhs = np.array([4.0, 6.0, 8.0])
    assert np.allclose(solve_banded(np.eye(3), rhs), rhs)
    assert np.allclose(solve_banded(np.diag([2.0, 2.0, 2.0]), rhs), rhs / 2.0)


def test_solve_banded_poisson_closed_form():
    # tridiag(-1, 2, -1) u = 1 has the discrete parabola u_i = i(n+1-i)/2
    n = 39
    M = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    x = solve_banded(M, np.ones(n))
    i = np.arange(1, n + 1)
    ref = i * (n + 1 - i) / 2.0
    assert np.max(np.abs(x - ref)) <= 1e-10 * np.max(ref)


def test_solve_banded_wider_band_residual():
    rng = np.random.default_rng(8)
    n, p = 60, 3
    M = np.zeros((n, n))
    for d in range(-p, p + 1):
        M += np.diag(rng.standard_normal(n - abs(d)), k=d)
    M = M @ M.T + 10.0 * np.eye(n)  # SPD, bandwidth 2p
    rhs = rng.standard_normal(n)
    x = solve_banded(M, rhs)
    assert np.linalg.norm(M @ x - rhs) <= 1e-11 * np.linalg.norm(rhs)


def test_solve_banded_detects_singular():
    M = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(LinAlgError, match="singular"):
        solve_banded(M, np.array([1.0, 2.0]))


def test_tridiagonal_thomas():
    n = 25
    lower = -np.ones(n - 1)
    diag = 2.0 * np.ones(n)
    upper = -np.ones(n - 1)
    x = solve_tridiagonal(lower, diag, upper, np.ones(n))
    i = np.arange(1, n + 1)
    assert np.max(np.abs(x - i * (n + 1 - i) / 2.0)) <= 1e-10 * n * n
