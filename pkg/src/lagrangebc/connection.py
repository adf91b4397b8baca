"""Symplectic connection of a variable form ``Omega(x)`` on a chart domain.

The connection is

    Gamma(x)(h, xi) = -Omega(x)^{-1} grad_x[ w(x)(xi, h) ],   w(x)(u, v) = (Omega(x) u, v),

i.e. ``w(x)(Gamma(h, xi), z) = -d_z w(x)(xi, h)``.  For a closed form the
transport equation ``dxi/dt = Gamma(x(t))(x'(t), xi)`` preserves
``w(x(t))(xi_1, xi_2)``; integration is classical RK4 on uniform steps with
compensated summation of the state, so the reported drift is the
truncation error rather than accumulated rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateFormError,
    InvalidArgument,
    InvarianceError,
    NotClosedError,
    RankJumpError,
)
from .symplin import (
    RANK_TOL,
    Subspace,
    SymplecticForm,
    classify_subspace,
    numerical_rank,
    standard_form,
    symplectic_basis_residual,
    symplectic_dual_basis,
)

FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)
SKEW_TOL = 1e-12
CLOSED_TOL = 1e-6
CLOSED_SAMPLES = 20
KATO_TOL = 1e-6
RAY_TOL = 1e-6
PROJ_TOL = 1e-10


def _fd_step(x):
    return FD_STEP * (1.0 + float(np.linalg.norm(x)))


@dataclass(frozen=True, eq=False)
class FormField:
    """Field of skew invertible matrices ``Omega(x)`` on ``R^{2m}``.

    ``d_omega_at(x)`` returns the array ``B[k] = dOmega/dx_k``; central
    differences are used when it is omitted.  ``domain`` is the half-width
    of the cube ``[-domain, domain]^{2m}`` on which the chart is declared
    (``None`` for all of ``R^{2m}``).  Closedness is sampled on construction.
    """

    dim: int
    omega_at: Callable
    d_omega_at: Optional[Callable] = None
    domain: Optional[float] = None
    check_closed: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2 or self.dim % 2:
            raise InvalidArgument(f"form fields need even dimension, got {self.dim}")
        if self.check_closed:
            res = self.closedness_residual()
            if res > CLOSED_TOL:
                raise NotClosedError(f"sampled d(omega) does not vanish (residual {res:.3e})")

    def contains(self, x):
        return self.domain is None or bool(np.all(np.abs(np.asarray(x)) <= self.domain * (1 + 1e-12)))

    def omega(self, x, t=None):
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise InvalidArgument(f"point {x} lies outside the chart domain")
        om = np.asarray(self.omega_at(x), dtype=float)
        if om.shape != (self.dim, self.dim):
            raise InvalidArgument(f"omega_at returned shape {om.shape}")
        if not np.all(np.isfinite(om)):
            raise DegenerateFormError(f"non-finite form at x={x}", t)
        norm = np.abs(om).max()
        if norm == 0.0 or np.abs(om + om.T).max() > SKEW_TOL * norm:
            raise DegenerateFormError(f"form is zero or not skew at x={x}", t)
        om = 0.5 * (om - om.T)
        s = np.linalg.svd(om, compute_uv=False)
        if s[-1] <= RANK_TOL * s[0]:
            raise DegenerateFormError(f"form is singular at x={x}", t)
        return om

    def form(self, x):
        return SymplecticForm(self.omega(x))

    def omega_tilde(self, x):
        """Matrix of ``u -> w(x)(., u)``: ``(Omega~ u, v) = w(x)(v, u)``."""
        return self.omega(x).T

    def d_omega(self, x):
        x = np.asarray(x, dtype=float)
        if self.d_omega_at is not None:
            return np.asarray(self.d_omega_at(x), dtype=float)
        h = _fd_step(x)
        out = np.empty((self.dim, self.dim, self.dim))
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = h
            out[k] = (np.asarray(self.omega_at(x + e)) - np.asarray(self.omega_at(x - e))) / (2 * h)
        return out

    def closedness_residual(self, samples=CLOSED_SAMPLES):
        """Max of ``|B_kab + B_abk + B_bka| / (1 + |B|)`` at random points of the domain."""
        rng = np.random.default_rng(self.seed)
        half = 1.0 if self.domain is None else min(1.0, self.domain)
        worst = 0.0
        for _ in range(samples):
            x = rng.uniform(-half, half, self.dim)
            b = self.d_omega(x)
            cyc = b + np.transpose(b, (1, 2, 0)) + np.transpose(b, (2, 0, 1))
            worst = max(worst, float(np.abs(cyc).max() / (1.0 + np.abs(b).max())))
        return worst

    def generator(self, x, h, t=None):
        """Matrix ``A`` with ``A xi = Gamma(x)(h, xi)``."""
        om = self.omega(x, t)
        b = self.d_omega(x)
        m = np.einsum("a,kab->kb", np.asarray(h, dtype=float), b)
        return -np.linalg.solve(om, m)


def canonical_field(m, domain=None):
    om = standard_form(m).omega
    zero = np.zeros((2 * m, 2 * m, 2 * m))
    return FormField(2 * m, lambda x: om, lambda x: zero, domain=domain)


def _monomial_terms(terms, dim):
    out = []
    for coeff, exps in terms:
        exps = np.asarray(exps, dtype=int)
        if exps.shape != (dim,) or np.any(exps < 0):
            raise InvalidArgument(f"exponents {exps.tolist()} do not match dimension {dim}")
        out.append((float(coeff), exps))
    if not out:
        raise InvalidArgument("scalar-scaled field needs at least one term")
    return out


def scalar_scaled_field(m, terms, domain=None, check_closed=True):
    """``alpha(x) * Omega_can`` with ``alpha(x) = sum c * prod x_i^e_i``.

    ``terms`` is a list of ``(c, exponents)``.  Closed only when ``m = 1`` or
    ``alpha`` is constant; other choices are rejected by the closedness check.
    """
    dim = 2 * m
    om = standard_form(m).omega
    terms = _monomial_terms(terms, dim)

    def alpha(x):
        return sum(c * np.prod(x**e) for c, e in terms)

    def grad_alpha(x):
        g = np.zeros(dim)
        for c, e in terms:
            for k in range(dim):
                if e[k]:
                    e2 = e.copy()
                    e2[k] -= 1
                    g[k] += c * e[k] * np.prod(x**e2)
        return g

    return FormField(
        dim,
        lambda x: alpha(x) * om,
        lambda x: grad_alpha(x)[:, None, None] * om[None],
        domain=domain,
        check_closed=check_closed,
    )


def christoffel(field, x, h, xi):
    """``Gamma(x)(h, xi)``; antisymmetric in ``(h, xi)``."""
    return field.generator(x, h) @ np.asarray(xi, dtype=float)


@dataclass(frozen=True, eq=False)
class Curve:
    x_at: Callable
    dx_at: Callable
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not self.b > self.a:
            raise InvalidArgument("curve interval must have b > a")

    @classmethod
    def segment(cls, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        d = q - p
        return cls(lambda t: p + t * d, lambda t: d, 0.0, 1.0)

    @classmethod
    def ray(cls, direction):
        return cls.segment(np.zeros_like(np.asarray(direction, dtype=float)), direction)


@dataclass(frozen=True, eq=False)
class Frame:
    point: np.ndarray
    vectors: np.ndarray  # columns

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float).ravel()
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != p.shape[0]:
            raise InvalidArgument(f"frame vectors have length {v.shape[0]}, point has {p.shape[0]}")
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "vectors", v)


@dataclass(frozen=True, eq=False)
class TransportReport:
    steps: int
    max_drift: float
    pairing_start: np.ndarray
    pairing_end: np.ndarray


def _rk4(rhs, y0, a, b, steps):
    """Classical RK4 for ``y' = rhs(t, y)`` with Kahan-compensated state updates."""
    y = np.array(y0, dtype=float)
    comp = np.zeros_like(y)
    dt = (b - a) / steps
    for i in range(steps):
        t = a + i * dt
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        inc = dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4) - comp
        new = y + inc
        comp = (new - y) - inc
        y = new
    return y


def _pairing(om, vecs):
    # P[i, j] = w(xi_i, xi_j) = (Omega xi_i) . xi_j
    return (om @ vecs).T @ vecs


def parallel_transport(field, curve, frame, steps):
    """Transport ``frame`` from ``x(a)`` to ``x(b)`` along ``curve``."""
    steps = int(steps)
    if steps < 1:
        raise InvalidArgument("steps must be positive")
    x0 = np.asarray(curve.x_at(curve.a), dtype=float)
    if frame.point.shape != x0.shape or np.linalg.norm(frame.point - x0) > 1e-12 * (1 + np.linalg.norm(x0)):
        raise InvalidArgument("frame is not based at the start of the curve")

    def rhs(t, y):
        return field.generator(curve.x_at(t), curve.dx_at(t), t) @ y

    end = _rk4(rhs, frame.vectors, curve.a, curve.b, steps)
    x1 = np.asarray(curve.x_at(curve.b), dtype=float)
    p0 = _pairing(field.omega(x0, curve.a), frame.vectors)
    p1 = _pairing(field.omega(x1, curve.b), end)
    drift = float(np.abs(p1 - p0).max(initial=0.0))
    return Frame(x1, end), TransportReport(steps, drift, p0, p1)


def holonomy(field, vertices, steps_per_side):
    """Transport map around the closed polygon through ``vertices``."""
    verts = [np.asarray(v, dtype=float) for v in vertices]
    vecs = np.eye(field.dim)
    for p, q in zip(verts, verts[1:] + verts[:1]):
        fr, _ = parallel_transport(field, Curve.segment(p, q), Frame(p, vecs), steps_per_side)
        vecs = fr.vectors
    return vecs


@dataclass(frozen=True, eq=False)
class ProjectorPath:
    """Smooth family ``t -> P(t)`` of orthogonal projectors on ``[0, 1]``."""

    p_at: Callable
    dp_at: Optional[Callable] = None

    def projector(self, t):
        p = np.asarray(self.p_at(t), dtype=float)
        scale = max(1.0, np.abs(p).max())
        if np.abs(p - p.T).max() > PROJ_TOL * scale or np.abs(p @ p - p).max() > PROJ_TOL * scale:
            raise InvalidArgument(f"P({t}) is not an orthogonal projector")
        return p

    def derivative(self, t):
        if self.dp_at is not None:
            return np.asarray(self.dp_at(t), dtype=float)
        h = _fd_step(t)
        return (np.asarray(self.p_at(t + h)) - np.asarray(self.p_at(t - h))) / (2 * h)


@dataclass(frozen=True, eq=False)
class KatoResult:
    u: np.ndarray
    orthogonality_residual: float
    intertwining_residual: float


def kato_transport(path, steps):
    """Evolve ``U' = [P', P] U``, ``U(0) = I`` and return ``U(1)``.

    ``U(1)`` is orthogonal and carries ``range P(0)`` onto ``range P(1)``.
    """
    steps = int(steps)
    if steps < 1:
        raise InvalidArgument("steps must be positive")
    p0 = path.projector(0.0)
    rank0 = int(round(np.trace(p0)))
    n = p0.shape[0]
    for t in np.linspace(0.0, 1.0, min(steps, 64) + 1):
        r = numerical_rank(path.projector(t)) if np.any(path.p_at(t)) else 0
        if r != rank0:
            raise RankJumpError(f"projector rank changes from {rank0} to {r} at t={t:.6g}")

    def rhs(t, y):
        p = np.asarray(path.p_at(t), dtype=float)
        dp = path.derivative(t)
        return (dp @ p - p @ dp) @ y

    u = _rk4(rhs, np.eye(n), 0.0, 1.0, steps)
    p1 = path.projector(1.0)
    orth = float(np.linalg.norm(u.T @ u - np.eye(n), 2))
    inter = float(np.linalg.norm(p1 @ u - u @ p0, 2))
    return KatoResult(u, orth, inter)


@dataclass(frozen=True, eq=False)
class SymplecticFrame:
    """Symplectic basis ``(e, f)`` at ``point``: ``w(e,e) = w(f,f) = 0``, ``w(f_i, e_j) = delta_ij``."""

    point: np.ndarray
    e: np.ndarray
    f: np.ndarray
    tangency_residual: float
    basis_residual: float
    drift: float


def _ray_isotropy(field, l, q, samples=9):
    worst = 0.0
    for t in np.linspace(0.0, 1.0, samples):
        om = field.omega(t * l)
        worst = max(worst, float(np.abs(q.T @ om @ q).max() / np.abs(om).max()))
    return worst


def lagrangian_frame_field(field, L_hat, f0, points: Sequence, steps=200, ray_tol=RAY_TOL):
    """Symplectic frames at points ``l`` of a Lagrangian subspace ``L_hat``.

    Each basis vector of ``L_hat`` and of the complement ``f0`` is carried
    along the ray ``t -> t l``.  The transported ``L_hat`` vectors must stay
    in ``L_hat``; the frame at ``l`` keeps the original ``L_hat`` basis and
    completes it with the dual basis drawn from the transported complement.
    """
    L_hat = L_hat if isinstance(L_hat, Subspace) else Subspace(L_hat)
    m = field.dim // 2
    if L_hat.ambient_dim != field.dim or L_hat.dim != m:
        raise InvalidArgument(f"L_hat must be an {m}-dimensional subspace of R^{field.dim}")
    e0 = np.array(L_hat.basis)
    f0 = np.asarray(f0, dtype=float)
    if f0.shape != (field.dim, m):
        raise InvalidArgument(f"f0 must be a {field.dim} x {m} matrix")
    origin = np.zeros(field.dim)
    if not classify_subspace(field.form(origin), L_hat).lagrangian:
        raise InvalidArgument("L_hat is not Lagrangian for the form at the origin")
    f0 = symplectic_dual_basis(field.form(origin), e0, f0)
    q = L_hat.orthonormal
    frames = []
    for l in points:
        l = np.asarray(l, dtype=float)
        if not field.contains(l):
            raise InvalidArgument(f"point {l} lies outside the chart domain")
        if l not in L_hat:
            raise InvalidArgument(f"point {l} is not in L_hat")
        iso = _ray_isotropy(field, l, q)
        if iso > ray_tol:
            raise InvarianceError(f"L_hat is not isotropic along the ray to {l} (residual {iso:.3e})")
        start = Frame(origin, np.hstack([e0, f0]))
        moved, report = parallel_transport(field, Curve.ray(l), start, steps)
        e_t = moved.vectors[:, :m]
        f_t = moved.vectors[:, m:]
        tangency = float(np.linalg.norm(e_t - q @ (q.T @ e_t), 2) / max(1.0, np.linalg.norm(e_t, 2)))
        if tangency > ray_tol:
            raise InvarianceError(f"transported L_hat vectors leave L_hat at {l} (residual {tangency:.3e})")
        form_l = field.form(l)
        f_l = symplectic_dual_basis(form_l, e0, f_t)
        frames.append(
            SymplecticFrame(
                point=l,
                e=e0.copy(),
                f=f_l,
                tangency_residual=tangency,
                basis_residual=symplectic_basis_residual(form_l, e0, f_l),
                drift=report.max_drift,
            )
        )
    return frames
