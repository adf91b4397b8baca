"""Independent reference computations used by the tests.

Nothing here calls into the classification code under test: verdicts come
from Gram matrices of the pairing on basis vectors, and random symplectic
matrices are assembled from graphs of symmetric matrices.
"""

import numpy as np

from lagrangebc.symplin import standard_form, symplectic_dual_basis


def pairing_gram(omega, basis):
    """``G[i, j] = w(b_i, b_j) = (Omega b_i) . b_j`` evaluated entry by entry."""
    k = basis.shape[1]
    g = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            g[i, j] = (omega @ basis[:, i]) @ basis[:, j]
    return g


def brute_force_kind(omega, basis, tol=1e-9):
    """Classify ``span(basis)`` from the rank of its pairing Gram matrix.

    With ``r = rank G`` the radical ``L cap L^w`` has dimension ``k - r`` and
    ``dim L^w = 2m - k``; isotropic iff ``r = 0``, coisotropic iff the
    complement equals the radical.
    """
    n = omega.shape[0]
    k = basis.shape[1]
    if k == 0:
        return "isotropic_only"
    g = pairing_gram(omega, basis)
    scale = np.linalg.norm(omega, 2) * np.linalg.norm(basis, 2) ** 2
    s = np.linalg.svd(g, compute_uv=False)
    r = int(np.sum(s > tol * scale))
    iso = r == 0
    coiso = n - k == k - r
    if iso and coiso:
        return "lagrangian"
    if iso:
        return "isotropic_only"
    if coiso:
        return "coisotropic_only"
    return "neither"


def same_span(a, b, tol=1e-9):
    def proj(x):
        if x.shape[1] == 0:
            return np.zeros((x.shape[0], x.shape[0]))
        q, _ = np.linalg.qr(x)
        return q @ q.T

    return a.shape[1] == b.shape[1] and np.linalg.norm(proj(a) - proj(b), 2) <= tol


def random_symmetric(rng, m, scale=1.0):
    a = rng.standard_normal((m, m)) * scale
    return 0.5 * (a + a.T)


def random_symplectic(rng, m):
    """``S`` with ``S^T Omega_can S = Omega_can``, from two transversal Lagrangian graphs."""
    form = standard_form(m)
    e = np.vstack([np.eye(m), random_symmetric(rng, m)])
    f0 = np.vstack([random_symmetric(rng, m, 0.3), np.eye(m)])
    f = symplectic_dual_basis(form, e, f0)
    return np.hstack([e, f])


def random_subspace(rng, m, kind):
    """Random subspace of ``(R^2m, Omega_can)`` built to have the requested kind."""
    s = random_symplectic(rng, m)
    if kind == "lagrangian":
        cols = s[:, :m]
    elif kind == "isotropic":
        k = rng.integers(0, m)
        cols = s[:, :k]
    elif kind == "coisotropic":
        k = rng.integers(1, m)
        cols = np.hstack([s[:, :m], s[:, m : m + k]])
    else:
        k = rng.integers(0, 2 * m + 1)
        cols = rng.standard_normal((2 * m, k))
    mix = rng.standard_normal((cols.shape[1], cols.shape[1])) + 3 * np.eye(cols.shape[1])
    return cols @ mix
