"""Finite-dimensional symplectic linear algebra.

Pairing convention used throughout the package: for a skew invertible
matrix ``omega`` the form is ``w(u, v) = (omega @ u) . v``.  Subspaces are
column spans; equality of subspaces is measured with orthogonal projectors,
never with bases.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, NotNestedError, OddGapError, TransversalityError

RANK_TOL = 1e-10
COISO_TOL = 1e-10
SUBSPACE_TOL = 1e-10


def numerical_rank(a, rtol=RANK_TOL):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def range_basis(a, rtol=RANK_TOL):
    """Orthonormal basis of the column space of ``a`` (SVD, relative cutoff)."""
    a = np.asarray(a, dtype=float)
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[0], 0))
    r = int(np.sum(s > rtol * s[0]))
    return u[:, :r]


def null_basis(a, rtol=RANK_TOL):
    """Orthonormal basis of ``ker(a)``."""
    a = np.asarray(a, dtype=float)
    n = a.shape[1]
    if a.shape[0] == 0 or not np.any(a):
        return np.eye(n)
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    r = int(np.sum(s > rtol * s[0]))
    return vt[r:].T.copy()


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SymplecticForm:
    """Skew invertible matrix defining ``w(u, v) = (omega u, v)``."""

    omega: np.ndarray

    def __post_init__(self):
        om = _readonly(self.omega)
        if om.ndim != 2 or om.shape[0] != om.shape[1]:
            raise InvalidArgument(f"form matrix must be square, got shape {om.shape}")
        if om.shape[0] == 0 or om.shape[0] % 2:
            raise InvalidArgument(f"form dimension must be even and positive, got {om.shape[0]}")
        if not np.all(np.isfinite(om)):
            raise InvalidArgument("form matrix has non-finite entries")
        if np.any(om + om.T != 0.0):
            raise InvalidArgument("form matrix is not skew")
        s = np.linalg.svd(om, compute_uv=False)
        if s[-1] <= RANK_TOL * s[0]:
            raise InvalidArgument("form matrix is singular")
        object.__setattr__(self, "omega", om)

    @property
    def dim(self):
        return self.omega.shape[0]

    @property
    def m(self):
        return self.dim // 2

    @property
    def inverse(self):
        return np.linalg.inv(self.omega)

    def pair(self, u, v):
        """``w(u, v)``; with matrix arguments returns the matrix of all column pairs."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return (self.omega @ u).T @ v

    @classmethod
    def skew_part(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(0.5 * (a - a.T))


def standard_form(m):
    """Canonical form ``[[0, I], [-I, 0]]`` on ``R^{2m}``."""
    if int(m) != m or m < 1:
        raise InvalidArgument(f"m must be a positive integer, got {m!r}")
    m = int(m)
    z = np.zeros((m, m))
    i = np.eye(m)
    return SymplecticForm(np.block([[z, i], [-i, z]]))


@dataclass(frozen=True, eq=False)
class Subspace:
    """Column span of a full-column-rank ``basis``.  A ``(n, 0)`` basis is the zero subspace."""

    basis: np.ndarray
    _q: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if b.ndim != 2:
            raise InvalidArgument("subspace basis must be a matrix")
        if not np.all(np.isfinite(b)):
            raise InvalidArgument("subspace basis has non-finite entries")
        if b.shape[1] > b.shape[0]:
            raise InvalidArgument("more basis vectors than ambient dimension")
        if numerical_rank(b) != b.shape[1]:
            raise InvalidArgument("subspace basis is not of full column rank")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        q = np.linalg.qr(b)[0] if b.shape[1] else np.zeros((b.shape[0], 0))
        q.setflags(write=False)
        object.__setattr__(self, "_q", q)

    @classmethod
    def span(cls, vectors, rtol=RANK_TOL):
        """Subspace spanned by the columns of ``vectors`` (dependent columns allowed)."""
        return cls(range_basis(np.atleast_2d(np.asarray(vectors, dtype=float)), rtol))

    @classmethod
    def zero(cls, ambient_dim):
        return cls(np.zeros((ambient_dim, 0)))

    @property
    def dim(self):
        return self.basis.shape[1]

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def orthonormal(self):
        return self._q

    def projector(self):
        return self._q @ self._q.T

    def distance(self, other):
        """Spectral norm of the difference of orthogonal projectors."""
        other = as_subspace(other)
        if other.ambient_dim != self.ambient_dim:
            raise InvalidArgument("subspaces live in different ambient spaces")
        return float(np.linalg.norm(self.projector() - other.projector(), 2))

    def inclusion_residual(self, other):
        """How far ``self`` is from lying inside ``other``: ``||(I - P_other) Q_self||``."""
        other = as_subspace(other)
        if self.dim == 0:
            return 0.0
        r = self._q - other.orthonormal @ (other.orthonormal.T @ self._q)
        return float(np.linalg.norm(r, 2))

    def __contains__(self, vector):
        v = np.asarray(vector, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return True
        r = v - self._q @ (self._q.T @ v)
        return np.linalg.norm(r) <= SUBSPACE_TOL * nv


def as_subspace(L):
    return L if isinstance(L, Subspace) else Subspace(L)


@dataclass(frozen=True, eq=False)
class KernelPresentation:
    """Matrix ``theta`` presenting the subspace ``ker(theta)``."""

    theta: np.ndarray

    def __post_init__(self):
        th = np.atleast_2d(np.array(self.theta, dtype=float))
        if th.ndim != 2:
            raise InvalidArgument("theta must be a matrix")
        if th.shape[0] > th.shape[1]:
            raise InvalidArgument(f"theta has more rows than columns: {th.shape}")
        if not np.all(np.isfinite(th)):
            raise InvalidArgument("theta has non-finite entries")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    def kernel(self):
        return Subspace(null_basis(self.theta))


class Kind(str, enum.Enum):
    ISOTROPIC_ONLY = "isotropic_only"
    COISOTROPIC_ONLY = "coisotropic_only"
    LAGRANGIAN = "lagrangian"
    NEITHER = "neither"


@dataclass(frozen=True)
class SubspaceClass:
    kind: Kind
    dim: int
    isotropy_residual: float
    coisotropy_residual: float

    @property
    def isotropic(self):
        return self.kind in (Kind.ISOTROPIC_ONLY, Kind.LAGRANGIAN)

    @property
    def coisotropic(self):
        return self.kind in (Kind.COISOTROPIC_ONLY, Kind.LAGRANGIAN)

    @property
    def lagrangian(self):
        return self.kind is Kind.LAGRANGIAN


def _kind(iso, coiso):
    if iso and coiso:
        return Kind.LAGRANGIAN
    if iso:
        return Kind.ISOTROPIC_ONLY
    if coiso:
        return Kind.COISOTROPIC_ONLY
    return Kind.NEITHER


def _check_ambient(form, L):
    L = as_subspace(L)
    if L.ambient_dim != form.dim:
        raise InvalidArgument(f"subspace lives in R^{L.ambient_dim}, form acts on R^{form.dim}")
    return L


def omega_complement(form, L):
    """``L^{perp w} = (omega L)^perp``, the w-orthogonal complement."""
    L = _check_ambient(form, L)
    if L.dim == 0:
        return Subspace(np.eye(form.dim))
    return Subspace(null_basis((form.omega @ L.orthonormal).T))


def classify_subspace(form, L, tol=SUBSPACE_TOL):
    """Isotropic / coisotropic / Lagrangian verdict for ``L``.

    Isotropy is measured by ``||Q^T omega Q||`` for an orthonormal basis
    ``Q``, coisotropy by how far ``L^{perp w}`` is from lying in ``L``;
    both are relative to ``||omega||``.
    """
    L = _check_ambient(form, L)
    norm = np.linalg.norm(form.omega, 2)
    q = L.orthonormal
    iso_res = float(np.linalg.norm(q.T @ form.omega @ q, 2)) / norm if L.dim else 0.0
    comp = omega_complement(form, L)
    coiso_res = comp.inclusion_residual(L)
    iso = iso_res <= tol
    # the complement has dimension 2m - k, so inclusion forces k >= m
    coiso = comp.dim <= L.dim and coiso_res <= tol
    return SubspaceClass(_kind(iso, coiso), L.dim, iso_res, coiso_res)


@dataclass(frozen=True)
class KernelVerdict(SubspaceClass):
    rank: int = 0
    pairing_residual: float = 0.0
    pairing_scale: float = 0.0


def lagrangian_kernel_test(form, theta, tol=COISO_TOL):
    """Decide whether ``ker(theta)`` is Lagrangian from ``theta`` alone.

    Lagrangian iff ``theta`` is onto ``R^m`` and ``theta omega^{-1} theta^T = 0``.
    The second identity alone is equivalent to ``ker(theta)`` being
    coisotropic, which fixes the verdict for every ``theta`` with at most
    ``m`` rows.
    """
    th = theta.theta if isinstance(theta, KernelPresentation) else KernelPresentation(theta).theta
    if th.shape[1] != form.dim:
        raise InvalidArgument(f"theta has {th.shape[1]} columns, form acts on R^{form.dim}")
    m = form.m
    if th.shape[0] > m:
        raise InvalidArgument(
            f"a Lagrangian kernel needs exactly {m} conditions, theta has {th.shape[0]} rows"
        )
    omega_inv = form.inverse
    prod = th @ omega_inv @ th.T
    nt = np.linalg.norm(th, 2)
    scale = nt * np.linalg.norm(omega_inv, 2) * nt
    res = float(np.linalg.norm(prod, 2))
    rank = numerical_rank(th)
    coiso = res <= tol * scale if scale > 0 else True
    onto = rank == m and th.shape[0] == m
    kind = Kind.LAGRANGIAN if (coiso and onto) else (Kind.COISOTROPIC_ONLY if coiso else Kind.NEITHER)
    q = null_basis(th)
    iso_res = np.linalg.norm(q.T @ form.omega @ q, 2) / np.linalg.norm(form.omega, 2) if q.shape[1] else 0.0
    return KernelVerdict(
        kind=kind,
        dim=form.dim - rank,
        isotropy_residual=float(iso_res),
        coisotropy_residual=res / scale if scale > 0 else 0.0,
        rank=rank,
        pairing_residual=res,
        pairing_scale=float(scale),
    )


def _columns(vectors, dim):
    a = np.asarray(vectors, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[0] != dim and a.shape[1] == dim:
        a = a.T
    if a.shape[0] != dim:
        raise InvalidArgument(f"vectors must live in R^{dim}, got shape {a.shape}")
    return a


def symplectic_dual_basis(form, e, f0, tol=SUBSPACE_TOL):
    """Rescale ``f0`` into the basis dual to ``e``: ``w(f_i, e_s) = delta_is``.

    ``e`` and ``f0`` are ``2m x m`` matrices (columns are vectors) spanning
    transversal Lagrangian subspaces.  Returns the ``2m x m`` matrix of the
    dual vectors, each a combination of the columns of ``f0``; together with
    ``e`` they form a symplectic basis.
    """
    m = form.m
    e = _columns(e, form.dim)
    f0 = _columns(f0, form.dim)
    if e.shape[1] != m or f0.shape[1] != m:
        raise InvalidArgument(f"need {m} vectors in each family")
    for name, vecs in (("e", e), ("f0", f0)):
        if numerical_rank(vecs) != m:
            raise InvalidArgument(f"{name} vectors are linearly dependent")
        if not classify_subspace(form, Subspace(vecs), tol).lagrangian:
            raise InvalidArgument(f"{name} does not span a Lagrangian subspace")
    gram = form.pair(f0, e)  # gram[k, s] = w(f0_k, e_s)
    scale = np.linalg.norm(form.omega, 2) * np.linalg.norm(f0, 2) * np.linalg.norm(e, 2)
    s = np.linalg.svd(gram, compute_uv=False)
    if s[-1] <= RANK_TOL * scale:
        raise TransversalityError("pairing matrix w(f0, e) is singular; subspaces are not transversal")
    a = np.linalg.inv(gram)  # sum_k a_ik gram_ks = delta_is
    return f0 @ a.T


def symplectic_basis_residual(form, e, f):
    """Max deviation of ``(e, f)`` from ``w(e,e) = w(f,f) = 0``, ``w(f_i, e_s) = delta``."""
    e = _columns(e, form.dim)
    f = _columns(f, form.dim)
    return float(
        max(
            np.abs(form.pair(e, e)).max(initial=0.0),
            np.abs(form.pair(f, f)).max(initial=0.0),
            np.abs(form.pair(f, e) - np.eye(e.shape[1])).max(initial=0.0),
        )
    )


def graph_defect(min_graph, max_graph, tol=SUBSPACE_TOL):
    """Half the dimension gap between nested operator graphs."""
    lo = as_subspace(min_graph)
    hi = as_subspace(max_graph)
    if lo.ambient_dim != hi.ambient_dim:
        raise InvalidArgument("graphs live in different ambient spaces")
    res = lo.inclusion_residual(hi)
    if res > tol:
        raise NotNestedError(f"minimal graph is not contained in maximal graph (residual {res:.3e})")
    gap = hi.dim - lo.dim
    if gap % 2:
        raise OddGapError(f"dimension gap {gap} is odd")
    return gap // 2


def graph_subspace(matrix, domain=None):
    """Graph ``{(u, A u)}`` of ``matrix`` as a subspace; ``domain`` restricts ``u`` to a column span."""
    a = np.asarray(matrix, dtype=float)
    d = np.eye(a.shape[1]) if domain is None else as_subspace(domain).orthonormal
    return Subspace.span(np.vstack([d, a @ d]))
