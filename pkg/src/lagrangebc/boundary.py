"""Boundary calculus for ``l u = -u''`` on ``[0, 1]``.

Traces are the quadruples ``(u(0), u'(0), u(1), u'(1))``.  The boundary form
is fixed by integration by parts,

    (l u, v) - (u, l v) = (u v' - u' v)(1) - (u v' - u' v)(0) = eta_u^T OMEGA_HAT eta_v,

which is the sign every check in this module is tested against.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgument, TooManyVectorsError, TraceError
from .quadrature import gauss_legendre
from .symplin import (
    KernelPresentation,
    Kind,
    SymplecticForm,
    classify_subspace,
    lagrangian_kernel_test,
    null_basis,
    numerical_rank,
)

VERDICT_TOL = 1e-9
FD_CHECK_TOL = 1e-6
DEFAULT_QUAD_NODES = 64
DEFECT = 2

OMEGA_HAT = np.array(
    [
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)
OMEGA_HAT.setflags(write=False)


@dataclass(frozen=True)
class TraceVector:
    u0: float
    du0: float
    u1: float
    du1: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise TraceError(f"non-finite trace components {self.as_array()}")

    def as_array(self):
        return np.array([self.u0, self.du0, self.u1, self.du1], dtype=float)

    @classmethod
    def from_array(cls, eta):
        eta = np.asarray(eta, dtype=float).ravel()
        if eta.shape != (4,):
            raise InvalidArgument(f"trace vectors have 4 components, got {eta.shape}")
        return cls(*map(float, eta))


def _as_eta(eta):
    return eta.as_array() if isinstance(eta, TraceVector) else np.asarray(eta, dtype=float)


@dataclass(frozen=True)
class TestFunction:
    """Smooth function on ``[0, 1]`` given with its first two derivatives."""

    __test__ = False  # not a pytest class

    u: Callable
    du: Callable
    ddu: Callable

    def __call__(self, t):
        return self.u(t)

    def derivative_mismatch(self, samples=17, step=1e-5):
        """Largest gap between central differences and the supplied derivatives."""
        t = np.linspace(0.1, 0.9, samples)
        e1 = np.abs((self.u(t + step) - self.u(t - step)) / (2 * step) - self.du(t))
        e2 = np.abs((self.du(t + step) - self.du(t - step)) / (2 * step) - self.ddu(t))
        scale = 1.0 + np.abs(self.u(t)).max() + np.abs(self.du(t)).max() + np.abs(self.ddu(t)).max()
        return float(max(e1.max(), e2.max()) / scale)

    def check(self, tol=FD_CHECK_TOL):
        gap = self.derivative_mismatch()
        if gap > tol:
            raise InvalidArgument(f"supplied derivatives disagree with finite differences ({gap:.2e})")
        return self

    def __add__(self, other):
        return TestFunction(
            lambda t: self.u(t) + other.u(t),
            lambda t: self.du(t) + other.du(t),
            lambda t: self.ddu(t) + other.ddu(t),
        )

    def __rmul__(self, c):
        c = float(c)
        return TestFunction(lambda t: c * self.u(t), lambda t: c * self.du(t), lambda t: c * self.ddu(t))

    @classmethod
    def polynomial(cls, coeffs):
        """Polynomial with ascending ``coeffs``."""
        p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
        dp = p.deriv()
        ddp = dp.deriv()
        return cls(p, dp, ddp)

    @classmethod
    def trig(cls, kind, freq):
        """``sin(freq t)`` or ``cos(freq t)``."""
        w = float(freq)
        if kind == "sin":
            return cls(lambda t: np.sin(w * t), lambda t: w * np.cos(w * t), lambda t: -w * w * np.sin(w * t))
        if kind == "cos":
            return cls(lambda t: np.cos(w * t), lambda t: -w * np.sin(w * t), lambda t: -w * w * np.cos(w * t))
        raise InvalidArgument(f"unknown trig kind {kind!r}")

    @classmethod
    def bump(cls, a=0.25, b=0.75):
        """``C^inf`` bump ``exp(-1 / (1 - s^2))`` supported in ``(a, b)``."""
        if not 0.0 <= a < b <= 1.0:
            raise InvalidArgument("bump support must be a subinterval of [0, 1]")
        c = 0.5 * (a + b)
        r = 0.5 * (b - a)
        k = 1.0 / r

        def parts(t):
            t = np.asarray(t, dtype=float)
            s = (t - c) * k
            inside = np.abs(s) < 1.0
            si = np.where(inside, s, 0.0)
            d = 1.0 - si * si
            psi = np.where(inside, np.exp(-1.0 / d), 0.0)
            q = -2.0 * si / d**2
            dq = -2.0 / d**2 - 8.0 * si * si / d**3
            return psi, q, dq

        def u(t):
            return parts(t)[0]

        def du(t):
            psi, q, _ = parts(t)
            return psi * q * k

        def ddu(t):
            psi, q, dq = parts(t)
            return psi * (q * q + dq) * k * k

        return cls(u, du, ddu)

    @classmethod
    def poly_bump(cls, a=0.25, b=0.75, power=4, tilt=0.0):
        """``(t-a)^p (b-t)^p (1 + tilt (t - mid))`` on ``[a, b]``, zero outside; ``C^{p-1}``."""
        if not 0.0 <= a < b <= 1.0:
            raise InvalidArgument("bump support must be a subinterval of [0, 1]")
        P = np.polynomial.Polynomial
        p = P([-a, 1.0]) ** power * P([b, -1.0]) ** power * P([1.0 - tilt * 0.5 * (a + b), tilt])
        derivs = [p, p.deriv(), p.deriv(2)]

        def piece(q):
            return lambda t: np.where((np.asarray(t) > a) & (np.asarray(t) < b), q(t), 0.0)

        return cls(*(piece(q) for q in derivs))

    @classmethod
    def hermite(cls, eta):
        """Cubic with the prescribed trace quadruple."""
        e = _as_eta(eta)
        # cubic Hermite basis on [0, 1] in ascending coefficients
        h00 = [1.0, 0.0, -3.0, 2.0]
        h10 = [0.0, 1.0, -2.0, 1.0]
        h01 = [0.0, 0.0, 3.0, -2.0]
        h11 = [0.0, 0.0, -1.0, 1.0]
        coeffs = e[0] * np.array(h00) + e[1] * np.array(h10) + e[2] * np.array(h01) + e[3] * np.array(h11)
        return cls.polynomial(coeffs)


@dataclass(frozen=True, eq=False)
class BoundaryForm:
    """Boundary form ``j_hat(eta, xi) = eta^T omega_hat xi`` on trace space."""

    omega_hat: np.ndarray = OMEGA_HAT

    def __post_init__(self):
        om = np.array(self.omega_hat, dtype=float)
        if om.shape != (4, 4):
            raise InvalidArgument("boundary form acts on R^4")
        if np.any(om + om.T != 0.0) or not np.allclose(om @ om, -np.eye(4), atol=1e-14):
            raise InvalidArgument("boundary form must be skew with square -I")
        om.setflags(write=False)
        object.__setattr__(self, "omega_hat", om)

    def __call__(self, eta, xi):
        return float(_as_eta(eta) @ self.omega_hat @ _as_eta(xi))

    def symplectic_form(self):
        """The same form in the ``w(u, v) = (omega u, v)`` convention of :mod:`symplin`."""
        return SymplecticForm(self.omega_hat.T)


BOUNDARY_FORM = BoundaryForm()


def trace(u):
    """Trace quadruple of ``u``: values and first derivatives at 0 and 1."""
    try:
        vals = [u.u(0.0), u.du(0.0), u.u(1.0), u.du(1.0)]
        eta = np.array([float(np.asarray(v).reshape(())) for v in vals])
    except (TypeError, ValueError, ArithmeticError) as exc:
        raise TraceError(f"cannot evaluate endpoint values: {exc}") from exc
    return TraceVector.from_array(eta)


def boundary_form(eta, xi, form=BOUNDARY_FORM):
    return form(eta, xi)


def _quad(nodes):
    if int(nodes) < 2:
        raise InvalidArgument(f"quad_nodes must be at least 2, got {nodes}")
    return gauss_legendre(int(nodes))


def lagrange_bracket(u, v, quad_nodes=DEFAULT_QUAD_NODES):
    """``(l u, v) - (u, l v)`` by Gauss-Legendre quadrature, ``l = -d^2/dt^2``."""
    t, w = _quad(quad_nodes)
    return float(w @ (-u.ddu(t) * v.u(t) + u.u(t) * v.ddu(t)))


def green_residual(u, v, quad_nodes=DEFAULT_QUAD_NODES):
    """``|(l u, v) - (u, l v) - j_hat(trace u, trace v)|``."""
    return abs(lagrange_bracket(u, v, quad_nodes) - boundary_form(trace(u), trace(v)))


@dataclass(frozen=True)
class CalkinSystem:
    vs: Sequence[TestFunction]

    def __post_init__(self):
        object.__setattr__(self, "vs", tuple(self.vs))
        for v in self.vs:
            trace(v)


@dataclass(frozen=True, eq=False)
class CalkinVerdict:
    passed: bool
    failed: tuple  # clauses among "a", "b", "agreement"
    traces: np.ndarray
    trace_rank: int
    pairing_quadrature: np.ndarray
    pairing_traces: np.ndarray
    pairing_residual: float
    agreement_residual: float
    theta: np.ndarray  # induced condition f -> <v_i, f>, rows omega_hat^T eta_i


def calkin_check(sys, form=BOUNDARY_FORM, quad_nodes=DEFAULT_QUAD_NODES, tol=VERDICT_TOL):
    """Check the Calkin conditions (a), (b) for ``sys`` and return the induced condition.

    (a) is decided on trace vectors: functions with zero trace quadruple are
    exactly the closure domain, so independence modulo that domain is
    independence of traces.  (b) is evaluated twice, by quadrature and from
    traces, and the two must agree.
    """
    vs = sys.vs if isinstance(sys, CalkinSystem) else CalkinSystem(sys).vs
    k = len(vs)
    if k == 0:
        raise InvalidArgument("empty Calkin system")
    if k > DEFECT:
        raise TooManyVectorsError(f"{k} vectors exceed the defect {DEFECT} of -u''")
    etas = np.array([trace(v).as_array() for v in vs])
    rank = numerical_rank(etas.T)
    quad = np.array([[lagrange_bracket(a, b, quad_nodes) for b in vs] for a in vs])
    bnd = etas @ form.omega_hat @ etas.T
    scale = max(1.0, float(np.abs(etas).max()) ** 2)
    pair_res = float(np.abs(bnd).max()) / scale
    agree = float(np.abs(quad - bnd).max()) / scale
    failed = []
    if rank < k:
        failed.append("a")
    if pair_res > tol or float(np.abs(quad).max()) / scale > tol:
        failed.append("b")
    if agree > tol:
        failed.append("agreement")
    theta = etas @ form.omega_hat  # row i: omega_hat^T eta_i
    return CalkinVerdict(
        passed=not failed,
        failed=tuple(failed),
        traces=etas,
        trace_rank=rank,
        pairing_quadrature=quad,
        pairing_traces=bnd,
        pairing_residual=pair_res,
        agreement_residual=agree,
        theta=theta,
    )


class BCVerdict(str, enum.Enum):
    SELF_ADJOINT = "self_adjoint"
    SYMMETRIC_ONLY = "symmetric_only"
    NOT_SYMMETRIC = "not_symmetric"


@dataclass(frozen=True)
class BCClass:
    verdict: BCVerdict
    rank: int
    kernel_dim: int
    pairing_residual: float
    isotropy_residual: float
    kernel_kind: Kind


def classify_bc(theta, form=BOUNDARY_FORM, tol=VERDICT_TOL):
    """Classify the linear condition ``theta @ trace(u) = 0``.

    ``theta`` has one row per condition.  With at most two rows the verdict
    comes from the kernel test on ``theta``; over-determined presentations
    are classified through their kernel directly.
    """
    th = KernelPresentation(theta).theta
    if th.shape[1] != 4:
        raise InvalidArgument(f"boundary conditions act on R^4, theta has shape {th.shape}")
    sf = form.symplectic_form()
    kernel = null_basis(th)
    kclass = classify_subspace(sf, kernel, tol)
    if th.shape[0] <= sf.m:
        kv = lagrangian_kernel_test(sf, th, tol)
        lagrangian = kv.lagrangian
        pair_res = kv.coisotropy_residual
        rank = kv.rank
    else:
        lagrangian = kclass.lagrangian
        pair_res = kclass.coisotropy_residual
        rank = numerical_rank(th)
    if lagrangian:
        verdict = BCVerdict.SELF_ADJOINT
    elif kclass.isotropic:
        verdict = BCVerdict.SYMMETRIC_ONLY
    else:
        verdict = BCVerdict.NOT_SYMMETRIC
    return BCClass(verdict, rank, kernel.shape[1], float(pair_res), kclass.isotropy_residual, kclass.kind)


def _robin(alpha, beta):
    return np.array([[alpha, -1.0, 0.0, 0.0], [0.0, 0.0, beta, -1.0]])


BC_PRESETS = {
    "dirichlet": lambda: np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]]),
    "neumann": lambda: np.array([[0, 1.0, 0, 0], [0, 0, 0, 1.0]]),
    "periodic": lambda: np.array([[1.0, 0, -1.0, 0], [0, 1.0, 0, -1.0]]),
    "antiperiodic": lambda: np.array([[1.0, 0, 1.0, 0], [0, 1.0, 0, 1.0]]),
    "robin": _robin,
    "initial": lambda: np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]]),
}

BC_PRESET_PARAMS = {"robin": ("alpha", "beta")}


def bc_preset(name, **params):
    try:
        make = BC_PRESETS[name]
    except KeyError:
        raise InvalidArgument(f"unknown boundary condition preset {name!r}") from None
    wanted = BC_PRESET_PARAMS.get(name, ())
    if set(params) != set(wanted):
        raise InvalidArgument(f"preset {name!r} takes parameters {list(wanted)}, got {sorted(params)}")
    return make(*(float(params[p]) for p in wanted))
