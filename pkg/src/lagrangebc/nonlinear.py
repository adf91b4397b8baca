"""Grid model of the nonlinear operator ``F(u) = -u'' + g(u)`` on ``[0, 1]``.

Grid functions live on ``t_i = i h``, ``h = 1/(n-1)``.  Interior rows of
``F`` use the 3-point stencil; the two end rows use the 4-point one-sided
second difference, so that the discrete Green identity

    (D v, w)_h - (v, D w)_h = j_hat(trace v, trace w) + O(h^2)

holds with the trapezoidal inner product and 3-point one-sided trace
derivatives.  Grid functions with vanishing trace quadruple play the role of
the zero-trace space: translations by them move along a leaf, and leaves are
the fibres of the trace map.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .boundary import (
    BOUNDARY_FORM,
    FD_CHECK_TOL,
    TestFunction,
    TraceVector,
)
from .errors import InvalidArgument, NoConvergenceError, NotLocallySelfAdjointError
from .quadrature import gauss_legendre
from .symplin import graph_subspace, lagrangian_kernel_test, null_basis

log = logging.getLogger(__name__)

ZERO_TRACE_TOL = 1e-10
LEAF_TOL = 1e-10
LSA_TOL = 1e-9
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
DAMPING_FLOOR = 2.0**-20
CERT_TOL = 1e-6
CONTOUR_NODES = 32
PATH_NODES = 16
MIN_GRID = 8


class CheckResult(tuple):
    """``(value, scale)`` pair returned by the certificate checks."""

    __slots__ = ()

    def __new__(cls, value, scale):
        return tuple.__new__(cls, (float(value), float(scale)))

    @property
    def value(self):
        return self[0]

    @property
    def scale(self):
        return self[1]

    @property
    def relative(self):
        return self[0] / self[1] if self[1] > 0 else self[0]


NONLINEARITIES = {
    "linear": (lambda u: np.zeros_like(u), lambda u: np.zeros_like(u)),
    "cubic": (lambda u: u**3, lambda u: 3.0 * u**2),
    "sine": (np.sin, np.cos),
}


def nonlinearity(name):
    try:
        return NONLINEARITIES[name]
    except KeyError:
        raise InvalidArgument(f"unknown nonlinearity {name!r}") from None


@dataclass(frozen=True)
class GraphPoint:
    """Point ``{x, y}`` of the discrete graph, ``y = F(x)``."""

    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class LeafId:
    trace: TraceVector


@dataclass(frozen=True, eq=False)
class ModelOperator:
    n: int
    g: Callable = NONLINEARITIES["linear"][0]
    dg: Callable = NONLINEARITIES["linear"][1]
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        n = int(self.n)
        if n < MIN_GRID:
            raise InvalidArgument(f"grid needs at least {MIN_GRID} nodes, got {n}")
        object.__setattr__(self, "n", n)
        x0 = np.zeros(n) if self.x0 is None else np.asarray(self.x0, dtype=float)
        if x0.shape != (n,):
            raise InvalidArgument(f"base point must have {n} values")
        object.__setattr__(self, "x0", x0)
        h = 1.0 / (n - 1)
        lap = np.zeros((n, n))
        i = np.arange(1, n - 1)
        lap[i, i - 1] = lap[i, i + 1] = -1.0
        lap[i, i] = 2.0
        lap[0, :4] = [-2.0, 5.0, -4.0, 1.0]
        lap[-1, -4:] = [1.0, -4.0, 5.0, -2.0]
        lap /= h * h
        tr = np.zeros((4, n))
        tr[0, 0] = 1.0
        tr[1, :3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
        tr[2, -1] = 1.0
        tr[3, -3:] = np.array([1.0, -4.0, 3.0]) / (2 * h)
        wts = np.full(n, h)
        wts[[0, -1]] = 0.5 * h
        for name, a in (("lap", lap), ("trace_matrix", tr), ("weights", wts)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not np.all(np.isfinite(self.F(x0))):
            raise InvalidArgument("F is not finite at the base point")

    @classmethod
    def named(cls, n, name="linear", x0=None):
        g, dg = nonlinearity(name)
        return cls(n, g, dg, x0)

    @property
    def h(self):
        return 1.0 / (self.n - 1)

    @property
    def t(self):
        return np.linspace(0.0, 1.0, self.n)

    def grid(self, u):
        """Sample a callable or :class:`TestFunction` on the grid; arrays pass through."""
        if isinstance(u, TestFunction):
            u = u.u
        if callable(u):
            u = u(self.t)
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise InvalidArgument(f"grid functions have {self.n} values, got shape {u.shape}")
        return u

    def F(self, x):
        x = self.grid(x)
        return self.lap @ x + self.g(x)

    def D(self, x):
        """Matrix of the derivative ``F'(x) = -d^2 + dg(x)``."""
        x = self.grid(x)
        return self.lap + np.diag(self.dg(x))

    def inner(self, v, w):
        return float(self.weights @ (np.asarray(v) * np.asarray(w)))

    def trace(self, x):
        return TraceVector.from_array(self.trace_matrix @ self.grid(x))

    def leaf(self, zeta):
        return LeafId(self.trace(zeta.x))

    def zero_trace_defect(self, v):
        """Size of the trace of ``v`` relative to ``max|v| / h``."""
        v = self.grid(v)
        scale = max(np.abs(v).max(initial=0.0) / self.h, np.finfo(float).tiny)
        return float(np.abs(self.trace_matrix @ v).max() / scale)

    def require_zero_trace(self, v, name="v"):
        v = self.grid(v)
        d = self.zero_trace_defect(v)
        if d > ZERO_TRACE_TOL:
            raise InvalidArgument(f"{name} does not have zero trace (relative trace {d:.3e})")
        return v

    def project_zero_trace(self, v):
        """Orthogonal projection of ``v`` onto the zero-trace grid functions."""
        v = self.grid(v)
        t = self.trace_matrix
        return v - t.T @ np.linalg.solve(t @ t.T, t @ v)

    def graph_point(self, x):
        x = self.grid(x)
        return GraphPoint(x, self.F(x))

    def tangent(self, x, w):
        """Tangent vector ``{w, D(x) w}`` of the graph at ``x``."""
        w = self.grid(w)
        return GraphPoint(w, self.D(x) @ w)


def ambient_pairing(op, h1, h2):
    """``(J h1, h2)_2 = (x1, y2)_h - (y1, x2)_h`` with ``J{x, y} = {-y, x}``."""
    return op.inner(h1.x, h2.y) - op.inner(h1.y, h2.x)


def gateaux_symmetry_check(op, x, pairs):
    """Max of ``|(D(x)v, w)_h - (v, D(x)w)_h|`` over zero-trace pairs."""
    d = op.D(x)
    worst = 0.0
    scale = 0.0
    for v, w in pairs:
        v = op.require_zero_trace(v, "v")
        w = op.require_zero_trace(w, "w")
        dv, dw = d @ v, d @ w
        worst = max(worst, abs(op.inner(dv, w) - op.inner(v, dw)))
        scale = max(scale, op.inner(np.abs(dv), np.abs(w)) + op.inner(np.abs(v), np.abs(dw)))
    return CheckResult(worst, scale)


def group_action(op, zeta, v):
    """Translate ``zeta`` along its leaf: ``{x + v, F(x + v)}``."""
    v = op.require_zero_trace(v)
    return op.graph_point(zeta.x + v)


def same_leaf(op, z1, z2, tol=LEAF_TOL):
    a = op.trace(z1.x).as_array()
    b = op.trace(z2.x).as_array()
    scale = 1.0 + max(np.abs(a).max(), np.abs(b).max())
    return bool(np.abs(a - b).max() <= tol * scale)


def _vertex(op, z):
    return z if isinstance(z, GraphPoint) else op.graph_point(z)


def contour_sides(op, v, triangle, nodes=CONTOUR_NODES):
    """Per-side values and magnitudes of the line integral of ``(eta_v, dzeta)_2``.

    ``eta_v(zeta) = J{v, D(x)v} = {-D(x)v, v}``; each side is the straight
    segment between consecutive vertices in the ambient ``(x, y)`` space.
    """
    v = op.require_zero_trace(v)
    verts = [_vertex(op, z) for z in triangle]
    if len(verts) != 3:
        raise InvalidArgument("a triangle has three vertices")
    s, w = gauss_legendre(nodes)
    values, mags = [], []
    for a, b in zip(verts, verts[1:] + verts[:1]):
        dx = b.x - a.x
        dy = b.y - a.y
        ydy = op.inner(v, dy)
        acc = 0.0
        mag = abs(ydy)
        for sk, wk in zip(s, w):
            term = op.inner(op.D(a.x + sk * dx) @ v, dx)
            acc += wk * term
            mag += wk * abs(term)
        values.append(ydy - acc)
        mags.append(mag)
    return values, mags


def contour_integrability_check(op, v, triangle, nodes=CONTOUR_NODES):
    """``|loop integral of (eta_v, dzeta)_2|`` around ``triangle``."""
    values, mags = contour_sides(op, v, triangle, nodes)
    return CheckResult(abs(sum(values)), sum(mags))


def flow_symplectomorphism_check(op, zeta, v, w1, w2, eps):
    """Symplecticity defect of ``zeta -> G(zeta, v)`` along tangents ``{w_i, D(x)w_i}``.

    The derivative of the translation is approximated by central differences
    with step ``eps``.
    """
    v = op.require_zero_trace(v)
    x = zeta.x
    h1, h2 = op.tangent(x, w1), op.tangent(x, w2)

    def push(hv):
        plus = group_action(op, GraphPoint(x + eps * hv.x, zeta.y + eps * hv.y), v)
        minus = group_action(op, GraphPoint(x - eps * hv.x, zeta.y - eps * hv.y), v)
        return GraphPoint((plus.x - minus.x) / (2 * eps), (plus.y - minus.y) / (2 * eps))

    g1, g2 = push(h1), push(h2)
    before = ambient_pairing(op, h1, h2)
    after = ambient_pairing(op, g1, g2)
    # rounding in the difference quotients is carried by the stencil entries, so
    # the natural magnitude uses |D(x)| rather than |D(x) w|
    ad = np.abs(op.D(x))
    scale = op.inner(np.abs(h1.x), ad @ np.abs(h2.x)) + op.inner(ad @ np.abs(h1.x), np.abs(h2.x))
    return CheckResult(abs(after - before), scale)


@dataclass(frozen=True, eq=False)
class NonlinearBC:
    """Boundary map ``theta_hat: R^4 -> R^2`` on trace vectors with its Jacobian."""

    theta_hat: Callable
    jac: Callable
    name: str = "custom"
    check: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.check:
            res = self.jacobian_mismatch()
            if res > FD_CHECK_TOL:
                raise InvalidArgument(f"Jacobian disagrees with finite differences (residual {res:.3e})")

    def __call__(self, eta):
        eta = eta.as_array() if isinstance(eta, TraceVector) else np.asarray(eta, dtype=float)
        return np.asarray(self.theta_hat(eta), dtype=float).reshape(2)

    def jacobian(self, eta):
        eta = eta.as_array() if isinstance(eta, TraceVector) else np.asarray(eta, dtype=float)
        return np.asarray(self.jac(eta), dtype=float).reshape(2, 4)

    def jacobian_mismatch(self, samples=8, step=1e-6):
        rng = np.random.default_rng(self.seed)
        worst = 0.0
        for _ in range(samples):
            eta = rng.uniform(-1.0, 1.0, 4)
            fd = np.empty((2, 4))
            for k in range(4):
                e = np.zeros(4)
                e[k] = step
                fd[:, k] = (self(eta + e) - self(eta - e)) / (2 * step)
            j = self.jacobian(eta)
            worst = max(worst, float(np.abs(fd - j).max() / (1.0 + np.abs(j).max())))
        return worst

    @classmethod
    def linear(cls, theta, name="linear"):
        th = np.array(theta, dtype=float)
        if th.shape != (2, 4):
            raise InvalidArgument(f"linear boundary conditions need a 2x4 matrix, got {th.shape}")
        th.setflags(write=False)
        return cls(lambda eta: th @ eta, lambda eta: th, name=name)

    @classmethod
    def separated(cls, c0=0.0, c1=0.0):
        """``(u0' - sin u0 - c0, u1' - u1^3 - c1)``."""

        def th(eta):
            return np.array([eta[1] - np.sin(eta[0]) - c0, eta[3] - eta[2] ** 3 - c1])

        def jac(eta):
            return np.array([[-np.cos(eta[0]), 1.0, 0.0, 0.0], [0.0, 0.0, -3.0 * eta[2] ** 2, 1.0]])

        return cls(th, jac, name="separated")

    @classmethod
    def coupled(cls):
        """``(u0 - u1, u0')``: not locally self-adjoint."""
        th = np.array([[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
        return cls.linear(th, name="coupled")


def lift_bc(op, bc):
    """``zeta -> theta_hat(trace(pr_1 zeta))``; constant on leaves."""

    def lifted(zeta):
        return bc(op.trace(zeta.x))

    return lifted


@dataclass(frozen=True)
class LSAVerdict:
    passed: bool
    points: tuple  # one kernel verdict per sample
    max_pairing_residual: float
    min_rank: int


def check_lsa_conditions(bc, sample_traces, tol=LSA_TOL):
    """At each trace: ``theta_hat'`` onto ``R^2`` and ``theta_hat' omega^{-1} theta_hat'^T = 0``."""
    form = BOUNDARY_FORM.symplectic_form()
    verdicts = tuple(lagrangian_kernel_test(form, bc.jacobian(eta), tol) for eta in sample_traces)
    if not verdicts:
        raise InvalidArgument("need at least one sample trace")
    return LSAVerdict(
        passed=all(v.lagrangian for v in verdicts),
        points=verdicts,
        max_pairing_residual=max(v.coisotropy_residual for v in verdicts),
        min_rank=min(v.rank for v in verdicts),
    )


@dataclass(frozen=True)
class BVPCertificate:
    converged: bool
    iterations: int
    residual_history: tuple
    lsa: LSAVerdict
    lsa_pairing_residual: float
    green_residual: float
    kernel_pairing: float
    passed: bool
    note: str = "conditions certified at sampled traces only; global hypotheses are not verified"


@dataclass(frozen=True)
class BVPSolution:
    t: np.ndarray
    u: np.ndarray
    trace: TraceVector
    certificate: BVPCertificate


def _newton_scale(op, u, f):
    return 1.0 + np.abs(f).max() + 4.0 * np.abs(u).max() / op.h**2


def _bvp_residual(op, bc, u, f):
    r = op.F(u) - f
    r[0] = 0.0
    r[-1] = 0.0
    out = r[1:-1]
    return np.concatenate([out, bc(op.trace_matrix @ u)])


def _bvp_jacobian(op, bc, u):
    d = op.D(u)[1:-1]
    return np.vstack([d, bc.jacobian(op.trace_matrix @ u) @ op.trace_matrix])


def _newton(op, bc, f, u, tol, max_iter):
    hist = []
    res = _bvp_residual(op, bc, u, f)
    for it in range(max_iter + 1):
        rel = np.abs(res).max() / _newton_scale(op, u, f)
        hist.append(float(rel))
        if not np.isfinite(rel):
            break
        if rel <= tol:
            return u, it, hist
        if it == max_iter:
            break
        try:
            step = np.linalg.solve(_bvp_jacobian(op, bc, u), -res)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        norm0 = np.linalg.norm(res)
        while True:
            trial = u + lam * step
            tres = _bvp_residual(op, bc, trial, f)
            if np.linalg.norm(tres) < norm0 or lam <= DAMPING_FLOOR:
                break
            lam *= 0.5
        log.debug("newton %d: residual %.3e, damping %g", it, rel, lam)
        u, res = trial, tres
    raise NoConvergenceError(f"Newton did not reach {tol:g} in {max_iter} iterations", hist)


def _green_certificate(op, dg, u, kernel, nodes=64):
    """Green residual and boundary pairing for Hermite cubics with traces in ``kernel``."""
    tq, wq = gauss_legendre(nodes)
    pot = dg(np.interp(tq, op.t, u))
    funcs = [TestFunction.hermite(k) for k in kernel.T]
    green = 0.0
    pair = 0.0
    for i, a in enumerate(funcs):
        for b in funcs[i:]:
            la = -a.ddu(tq) + pot * a.u(tq)
            lb = -b.ddu(tq) + pot * b.u(tq)
            bracket = float(wq @ (la * b.u(tq) - a.u(tq) * lb))
            jh = BOUNDARY_FORM(
                [a.u(0.0), a.du(0.0), a.u(1.0), a.du(1.0)],
                [b.u(0.0), b.du(0.0), b.u(1.0), b.du(1.0)],
            )
            green = max(green, abs(bracket - jh))
            pair = max(pair, abs(jh))
    return green, pair


def solve_bvp_lsa(
    op,
    bc,
    f,
    u_init=None,
    tol=NEWTON_TOL,
    max_iter=NEWTON_MAX_ITER,
    cert_tol=CERT_TOL,
    lsa_tol=LSA_TOL,
    samples=4,
    seed=0,
):
    """Solve ``-u'' + g(u) = f`` with ``theta_hat(trace u) = 0`` and certify the result.

    Raises :class:`NoConvergenceError` if Newton fails and
    :class:`NotLocallySelfAdjointError` if the boundary map fails the
    Lagrangian conditions at or near the computed trace.
    """
    f = op.grid(f)
    u = np.zeros(op.n) if u_init is None else op.grid(u_init).copy()
    u, iters, hist = _newton(op, bc, f, u, tol, max_iter)
    eta = op.trace_matrix @ u
    rng = np.random.default_rng(seed)
    traces = [eta] + [eta + 1e-3 * (1.0 + np.abs(eta)) * rng.standard_normal(4) for _ in range(samples)]
    lsa = check_lsa_conditions(bc, traces, lsa_tol)
    if not lsa.passed:
        raise NotLocallySelfAdjointError(
            f"boundary map is not locally self-adjoint near trace {eta.tolist()}", lsa
        )
    kernel = null_basis(bc.jacobian(eta))
    green, pair = _green_certificate(op, op.dg, u, kernel)
    cert = BVPCertificate(
        converged=True,
        iterations=iters,
        residual_history=tuple(hist),
        lsa=lsa,
        lsa_pairing_residual=lsa.max_pairing_residual,
        green_residual=green,
        kernel_pairing=pair,
        passed=lsa.max_pairing_residual <= cert_tol and green <= cert_tol and pair <= cert_tol,
    )
    return BVPSolution(op.t, u, TraceVector.from_array(eta), cert)


def _as_path(op, path):
    pts = [op.grid(p) for p in path]
    if len(pts) < 2:
        raise InvalidArgument("a path needs at least two points")
    return pts


def antiderivative_value(op, path, v, nodes=PATH_NODES):
    """``Phi(x)(v) = (v, F(x0)) + integral along path of (D(u)v, du)_h``."""
    pts = _as_path(op, path)
    if np.abs(pts[0] - op.x0).max() > 0.0:
        raise InvalidArgument("paths must start at the base point x0")
    s, w = gauss_legendre(nodes)
    total = op.inner(v, op.F(op.x0))
    mag = abs(total)
    for a, b in zip(pts, pts[1:]):
        d = b - a
        for sk, wk in zip(s, w):
            term = op.inner(op.D(a + sk * d) @ v, d)
            total += wk * term
            mag += wk * abs(term)
    return total, mag


def antiderivative_consistency(op, x, v, paths, nodes=PATH_NODES):
    """Path independence and graph identity for the antiderivative of ``D``.

    Returns ``(path_difference, graph_residual)`` as :class:`CheckResult`.
    """
    x = op.grid(x)
    v = op.require_zero_trace(v)
    if len(paths) != 2:
        raise InvalidArgument("need exactly two paths")
    vals = []
    mags = []
    for p in paths:
        pts = _as_path(op, p)
        if np.abs(pts[-1] - x).max() > 0.0:
            raise InvalidArgument("paths must end at x")
        val, mag = antiderivative_value(op, pts, v, nodes)
        vals.append(val)
        mags.append(mag)
    target = op.inner(v, op.F(x))
    scale = max(mags) + abs(target)
    return CheckResult(abs(vals[0] - vals[1]), scale), CheckResult(abs(vals[0] - target), scale)


def discrete_graphs(n):
    """Minimal and maximal graphs of the grid operator ``-u''``.

    Both live in ``R^n x R^(n-2)``: the maximal graph is ``{(u, -u''_interior)}``
    for all grid ``u``; the minimal one restricts ``u`` to zero traces.
    """
    op = ModelOperator(n)
    lap_int = op.lap[1:-1]
    zero_trace = null_basis(op.trace_matrix)
    return graph_subspace(lap_int, zero_trace), graph_subspace(lap_int)
