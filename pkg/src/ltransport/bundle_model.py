"""Data model: chart, paths, parameter families, sections, providers and frames.

Everything here is immutable.  Base points are length-``m`` coordinate
vectors in a single chart and fibre vectors are length-``n`` coordinate
vectors in the working frame.  Velocities and partials are always supplied
analytically; finite differences appear only in the consistency checks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ArgumentError, DomainError, NumericError
from .numerics import fd_derivative

# Slack for parameters that land on an interval end after float arithmetic.
_EDGE_SLACK = 1e-12


def _as_vec(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def _in_interval(x, interval):
    lo, hi = interval
    slack = _EDGE_SLACK * max(1.0, hi - lo)
    return lo - slack <= x <= hi + slack


@dataclass(frozen=True)
class BundleChart:
    base_dim: int
    fibre_dim: int

    def __post_init__(self):
        if self.base_dim < 1 or self.fibre_dim < 1:
            raise ArgumentError(f"chart dimensions must be positive, got {self.base_dim}, {self.fibre_dim}")

    @property
    def is_tangent(self):
        return self.base_dim == self.fibre_dim


@dataclass(frozen=True)
class Path:
    """A parametrized curve ``s -> point(s)`` on the interval ``domain``.

    ``breaks`` lists interior parameters where the path is only piecewise
    smooth (corners of concatenated routes); the integrator restarts there.
    """

    domain: tuple
    point: Callable[[float], np.ndarray]
    velocity: Callable[[float], np.ndarray]
    acceleration: Optional[Callable[[float], np.ndarray]] = None
    smoothness: str = "C2"
    breaks: tuple = ()
    name: str = "path"

    def __post_init__(self):
        a, b = self.domain
        if not a < b:
            raise ArgumentError(f"path domain must satisfy a < b, got {self.domain}")
        if self.smoothness not in ("C1", "C2"):
            raise ArgumentError(f"unknown smoothness tag {self.smoothness!r}")

    def contains(self, s):
        return _in_interval(s, self.domain)

    def require(self, *params):
        for s in params:
            if not self.contains(s):
                raise DomainError(f"parameter {s} outside domain {self.domain} of {self.name}")

    @property
    def start(self):
        return _as_vec(self.point(self.domain[0]))

    @property
    def end(self):
        return _as_vec(self.point(self.domain[1]))


@dataclass(frozen=True)
class Family:
    """A two-parameter map ``(s, t) -> point(s, t)`` with its two partials.

    ``hessian`` (optional) returns the ``(m, 2, 2)`` array of second
    partials; it enables the analytic curvature route.
    """

    domain: tuple
    point: Callable[[float, float], np.ndarray]
    d_s: Callable[[float, float], np.ndarray]
    d_t: Callable[[float, float], np.ndarray]
    hessian: Optional[Callable[[float, float], np.ndarray]] = None
    name: str = "family"

    def contains(self, s, t):
        return _in_interval(s, self.domain[0]) and _in_interval(t, self.domain[1])

    def require(self, s, t):
        if not self.contains(s, t):
            raise DomainError(f"({s}, {t}) outside domain {self.domain} of {self.name}")

    def row(self, t):
        """The path ``s -> point(s, t)``."""
        if not _in_interval(t, self.domain[1]):
            raise DomainError(f"t={t} outside {self.domain[1]} of {self.name}")
        accel = None
        if self.hessian is not None:
            accel = lambda s: np.asarray(self.hessian(s, t))[:, 0, 0]
        return Path(
            domain=self.domain[0],
            point=lambda s: self.point(s, t),
            velocity=lambda s: self.d_s(s, t),
            acceleration=accel,
            name=f"{self.name}(.,{t:.17g})",
        )

    def col(self, s):
        """The path ``t -> point(s, t)``."""
        if not _in_interval(s, self.domain[0]):
            raise DomainError(f"s={s} outside {self.domain[0]} of {self.name}")
        accel = None
        if self.hessian is not None:
            accel = lambda t: np.asarray(self.hessian(s, t))[:, 1, 1]
        return Path(
            domain=self.domain[1],
            point=lambda t: self.point(s, t),
            velocity=lambda t: self.d_t(s, t),
            acceleration=accel,
            name=f"{self.name}({s:.17g},.)",
        )

    def swapped(self):
        """The family ``(t, s) -> point(s, t)``."""
        hess = None
        if self.hessian is not None:
            hess = lambda t, s: np.asarray(self.hessian(s, t))[:, ::-1, ::-1]
        return Family(
            domain=(self.domain[1], self.domain[0]),
            point=lambda t, s: self.point(s, t),
            d_s=lambda t, s: self.d_t(s, t),
            d_t=lambda t, s: self.d_s(s, t),
            hessian=hess,
            name=f"{self.name}^T",
        )


def extract_row_path(family, t):
    return family.row(t)


def extract_col_path(family, s):
    return family.col(s)


@dataclass(frozen=True)
class MultiFamily:
    """A k-parameter map with a fixed basepoint.

    ``jacobian(s)`` returns the ``(m, k)`` matrix of partials; indices ``a``
    passed to :meth:`path_a` and :meth:`family_ab` are 1-based.
    """

    domain: tuple
    point: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    basepoint: tuple
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "multifamily"

    def __post_init__(self):
        if len(self.domain) < 2:
            raise ArgumentError("a multi-parameter family needs k >= 2")
        if len(self.basepoint) != len(self.domain):
            raise ArgumentError("basepoint length must equal k")
        for x, interval in zip(self.basepoint, self.domain):
            if not _in_interval(x, interval):
                raise DomainError(f"basepoint {self.basepoint} outside {self.domain}")

    @property
    def k(self):
        return len(self.domain)

    def with_basepoint(self, basepoint):
        return replace(self, basepoint=tuple(float(x) for x in basepoint))

    def _index(self, a):
        if not isinstance(a, (int, np.integer)) or not 1 <= a <= self.k:
            raise ArgumentError(f"parameter index {a} outside 1..{self.k}")
        return int(a) - 1

    def path_a(self, a):
        i = self._index(a)

        def at(x):
            s = np.array(self.basepoint, dtype=float)
            s[i] = x
            return s

        accel = None
        if self.hessian is not None:
            accel = lambda x: np.asarray(self.hessian(at(x)))[:, i, i]
        return Path(
            domain=self.domain[i],
            point=lambda x: self.point(at(x)),
            velocity=lambda x: np.asarray(self.jacobian(at(x)))[:, i],
            acceleration=accel,
            name=f"{self.name}_{a}",
        )

    def family_ab(self, a, b):
        i, j = self._index(a), self._index(b)
        if i == j:
            raise ArgumentError(f"family_ab needs distinct indices, got {a} twice")

        def at(x, y):
            s = np.array(self.basepoint, dtype=float)
            s[i] = x
            s[j] = y
            return s

        hess = None
        if self.hessian is not None:
            hess = lambda x, y: np.asarray(self.hessian(at(x, y)))[:, [i, j]][:, :, [i, j]]
        return Family(
            domain=(self.domain[i], self.domain[j]),
            point=lambda x, y: self.point(at(x, y)),
            d_s=lambda x, y: np.asarray(self.jacobian(at(x, y)))[:, i],
            d_t=lambda x, y: np.asarray(self.jacobian(at(x, y)))[:, j],
            hessian=hess,
            name=f"{self.name}_{a}{b}",
        )

    def tangent(self, a, s=None):
        """The vector field ``s -> d tau / d s^a`` evaluated at ``s``."""
        i = self._index(a)
        s = self.basepoint if s is None else s
        return _as_vec(np.asarray(self.jacobian(np.asarray(s, dtype=float)))[:, i])


def extract_pair_family(mf, a, b):
    return mf.family_ab(a, b)


def chart_curve_bundle(family, offset, matrix, basepoint, domain):
    """k-parameter family ``s -> family(c(s))`` with affine ``c(s) = offset + matrix @ s``.

    ``matrix`` is ``2 x k``.  Partials follow from the chain rule, so they stay
    analytic whenever the family's are.
    """
    offset = _as_vec(offset)
    C = np.asarray(matrix, dtype=float)
    if C.ndim != 2 or C.shape[0] != 2 or offset.shape != (2,):
        raise ArgumentError("chart-curve bundle needs a 2 x k matrix and a length-2 offset")
    if C.shape[1] != len(domain):
        raise ArgumentError("matrix columns must match the number of parameter intervals")

    def params(s):
        return offset + C @ np.asarray(s, dtype=float)

    def point(s):
        st = params(s)
        return _as_vec(family.point(st[0], st[1]))

    def jacobian(s):
        st = params(s)
        J2 = np.column_stack([family.d_s(st[0], st[1]), family.d_t(st[0], st[1])])
        return J2 @ C

    hessian = None
    if family.hessian is not None:
        def hessian(s):
            st = params(s)
            H2 = np.asarray(family.hessian(st[0], st[1]), dtype=float)
            return np.einsum("mpq,pa,qb->mab", H2, C, C)

    return MultiFamily(
        domain=tuple(tuple(float(v) for v in iv) for iv in domain),
        point=point,
        jacobian=jacobian,
        basepoint=tuple(float(x) for x in basepoint),
        hessian=hessian,
        name=f"bundle[{family.name}]",
    )


@dataclass(frozen=True)
class Section:
    """Fibre-vector components along a path, family or multi-family.

    ``components`` takes as many parameters as the carrier has.  ``partials``
    (optional) returns one derivative array per parameter; without it the
    derivative is a fourth-order central difference with step ``fd_step``.
    """

    components: Callable[..., np.ndarray]
    partials: Optional[Callable[..., Sequence[np.ndarray]]] = None
    along: object = None
    fd_step: float = 1e-4

    def __call__(self, *params):
        return _as_vec(self.components(*params))

    def _bounds(self, i):
        if isinstance(self.along, Path):
            return self.along.domain
        if isinstance(self.along, (Family, MultiFamily)):
            return self.along.domain[i]
        return (None, None)

    def partial(self, i, *params):
        """Derivative of the components in parameter ``i`` (0-based)."""
        if self.partials is not None:
            return _as_vec(self.partials(*params)[i])
        params = list(params)

        def along_i(x):
            p = list(params)
            p[i] = x
            return self(*p)

        return fd_derivative(along_i, params[i], self.fd_step, order=4, bounds=self._bounds(i))


class ProviderKind(enum.Enum):
    CONNECTION = "connection-induced"
    PATH_FUNCTIONAL = "path-functional"


def _fd_step_for(s):
    return max(1e-6, 1e-6 * abs(s))


@dataclass(frozen=True)
class CoefficientProvider:
    """The map from a path to its coefficient matrix ``Gamma_gamma(s)``.

    Connection-induced providers carry ``gamma3(x)``, an ``(n, n, m)`` array
    contracted with the path velocity on its last index.  Path-functional
    providers carry ``coeff_fn(path, s)`` directly.
    """

    kind: ProviderKind
    fibre_dim: int
    base_dim: int
    name: str = "provider"
    gamma3: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d_gamma3: Optional[Callable[[np.ndarray], np.ndarray]] = None
    coeff_fn: Optional[Callable[[Path, float], np.ndarray]] = None
    d_coeff_fn: Optional[Callable[[Path, float], np.ndarray]] = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind is ProviderKind.CONNECTION and self.gamma3 is None:
            raise ArgumentError("a connection-induced provider needs gamma3")
        if self.kind is ProviderKind.PATH_FUNCTIONAL and self.coeff_fn is None:
            raise ArgumentError("a path-functional provider needs coeff_fn")

    @property
    def chart(self):
        return BundleChart(self.base_dim, self.fibre_dim)

    def coeff(self, path, s):
        if self.kind is ProviderKind.CONNECTION:
            g = np.asarray(self.gamma3(_as_vec(path.point(s))), dtype=float)
            value = g @ _as_vec(path.velocity(s))
        else:
            value = np.asarray(self.coeff_fn(path, s), dtype=float)
        value = value.reshape(self.fibre_dim, self.fibre_dim)
        if not np.all(np.isfinite(value)):
            raise NumericError(f"non-finite coefficient matrix at s={s} on {path.name}")
        return value

    def has_analytic_d_coeff(self, path):
        if self.kind is ProviderKind.CONNECTION:
            return self.d_gamma3 is not None and path.acceleration is not None
        return self.d_coeff_fn is not None

    def d_coeff(self, path, s):
        """``d Gamma_gamma(s) / ds``; analytic when available, else a central difference."""
        if self.has_analytic_d_coeff(path):
            if self.kind is ProviderKind.CONNECTION:
                x = _as_vec(path.point(s))
                v = _as_vec(path.velocity(s))
                dg = np.asarray(self.d_gamma3(x), dtype=float)
                g = np.asarray(self.gamma3(x), dtype=float)
                return dg @ v @ v + g @ _as_vec(path.acceleration(s))
            return np.asarray(self.d_coeff_fn(path, s), dtype=float)
        return fd_derivative(lambda u: self.coeff(path, u), s, _fd_step_for(s), order=2, bounds=path.domain)


@dataclass(frozen=True)
class FrameMap:
    """``frame(path, s)`` is the invertible matrix of ``F(s; path)``."""

    frame: Callable[[Path, float], np.ndarray]
    d_frame: Optional[Callable[[Path, float], np.ndarray]] = None
    name: str = "frame"

    def __call__(self, path, s):
        return np.asarray(self.frame(path, s), dtype=float)

    def condition(self, path, s):
        return float(np.linalg.cond(self(path, s)))


@dataclass(frozen=True)
class FrameField:
    """A field of bases; columns of ``basis_at(x)`` are the basis vectors at ``x``."""

    basis_at: Callable[[np.ndarray], np.ndarray]
    name: str = "frame-field"

    def __call__(self, x):
        E = np.asarray(self.basis_at(_as_vec(x)), dtype=float)
        if np.linalg.cond(E) > 1e12:
            raise NumericError(f"frame field is singular at {x}")
        return E


# ---------------------------------------------------------------------------
# Path constructors
# ---------------------------------------------------------------------------


def segment_path(x, y, domain=(0.0, 1.0), name="segment"):
    """Straight chart segment from ``x`` to ``y`` traversed at constant speed."""
    x, y = _as_vec(x), _as_vec(y)
    a, b = domain
    d = (y - x) / (b - a)
    zero = np.zeros_like(x)
    return Path(
        domain=(float(a), float(b)),
        point=lambda s: x + (s - a) * d,
        velocity=lambda s: d.copy(),
        acceleration=lambda s: zero.copy(),
        name=name,
    )


def quadratic_arc_path(x, control, y, domain=(0.0, 1.0), name="arc"):
    """Quadratic Bezier arc; stays inside any box containing its three points."""
    x, c, y = _as_vec(x), _as_vec(control), _as_vec(y)
    a, b = domain
    L = b - a

    def point(s):
        u = (s - a) / L
        return (1 - u) ** 2 * x + 2 * u * (1 - u) * c + u**2 * y

    def velocity(s):
        u = (s - a) / L
        return (2 * (1 - u) * (c - x) + 2 * u * (y - c)) / L

    accel = 2 * (x - 2 * c + y) / L**2
    return Path(domain=(float(a), float(b)), point=point, velocity=velocity,
                acceleration=lambda s: accel.copy(), name=name)


def polyline_path(points, domain=None, name="polyline"):
    """Piecewise-linear route through ``points``, parametrized by chart length.

    The corners are recorded as ``breaks``.
    """
    pts = [_as_vec(p) for p in points]
    if len(pts) < 2:
        raise ArgumentError("a polyline needs at least two points")
    lengths = [float(np.linalg.norm(q - p)) for p, q in zip(pts, pts[1:])]
    if any(l == 0.0 for l in lengths):
        raise ArgumentError("polyline has a repeated vertex")
    knots = np.concatenate([[0.0], np.cumsum(lengths)])
    if domain is not None:
        a, b = domain
        knots = a + (knots / knots[-1]) * (b - a)
    a, b = float(knots[0]), float(knots[-1])

    def piece(s):
        k = int(np.searchsorted(knots, s, side="right") - 1)
        return min(max(k, 0), len(pts) - 2)

    def point(s):
        k = piece(s)
        u = (s - knots[k]) / (knots[k + 1] - knots[k])
        return pts[k] + u * (pts[k + 1] - pts[k])

    def velocity(s):
        k = piece(s)
        return (pts[k + 1] - pts[k]) / (knots[k + 1] - knots[k])

    zero = np.zeros_like(pts[0])
    return Path(domain=(a, b), point=point, velocity=velocity,
                acceleration=lambda s: zero.copy(), smoothness="C1",
                breaks=tuple(float(k) for k in knots[1:-1]), name=name)


def reparametrize(path, phi, dphi, domain, d2phi=None, name=None):
    """The path ``u -> path(phi(u))`` on ``domain``; ``phi`` must be monotone."""
    accel = None
    if path.acceleration is not None and d2phi is not None:
        accel = lambda u: (_as_vec(path.acceleration(phi(u))) * dphi(u) ** 2
                           + _as_vec(path.velocity(phi(u))) * d2phi(u))
    return Path(
        domain=tuple(float(v) for v in domain),
        point=lambda u: path.point(phi(u)),
        velocity=lambda u: _as_vec(path.velocity(phi(u))) * dphi(u),
        acceleration=accel,
        smoothness=path.smoothness,
        name=name or f"{path.name}~",
    )


# ---------------------------------------------------------------------------
# Consistency checks
# ---------------------------------------------------------------------------


def velocity_defect(point, velocity, s, domain):
    """Relative gap between a declared velocity and a central difference of ``point``.

    Uses ``h = 1e-4 * (b - a)``; one-sided near the interval ends.
    """
    a, b = domain
    h = 1e-4 * (b - a)
    v = _as_vec(velocity(s))
    fd = fd_derivative(lambda u: _as_vec(point(u)), s, h, order=2, bounds=domain)
    return float(np.linalg.norm(v - fd) / (1.0 + np.linalg.norm(v)))


def check_path(path, samples=7, tol=1e-6):
    """True when the declared velocity passes the difference check at ``samples`` points per smooth piece.

    Samples next to a break are pulled slightly into their piece.
    """
    knots = [path.domain[0], *path.breaks, path.domain[1]]
    for lo, hi in zip(knots, knots[1:]):
        u = np.linspace(lo, hi, samples)
        if lo in path.breaks:
            u[0] = lo + 0.01 * (hi - lo)
        if hi in path.breaks:
            u[-1] = hi - 0.01 * (hi - lo)
        if any(velocity_defect(path.point, path.velocity, s, (lo, hi)) > tol for s in u):
            return False
    return True


def check_family(family, samples=5, tol=1e-6):
    (a, b), (c, d) = family.domain
    for s in np.linspace(a, b, samples):
        for t in np.linspace(c, d, samples):
            if velocity_defect(lambda u: family.point(u, t), lambda u: family.d_s(u, t), s, (a, b)) > tol:
                return False
            if velocity_defect(lambda u: family.point(s, u), lambda u: family.d_t(s, u), t, (c, d)) > tol:
                return False
    return True


def coefficient_continuity(provider, path, s, steps=(1e-2, 5e-3, 2.5e-3, 1.25e-3)):
    """(h, |coeff(s+h) - coeff(s)|) samples for a continuity order fit."""
    base = provider.coeff(path, s)
    out = []
    for h in steps:
        u = s + h if path.contains(s + h) else s - h
        out.append((h, float(np.linalg.norm(provider.coeff(path, u) - base))))
    return out
