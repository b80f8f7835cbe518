"""Transport matrices ``H(t, s; path)`` and the checks on their axioms.

The transport along a path is realized as the solution of the matrix
initial-value problem

    dH(u, s)/du = -Gamma(u) H(u, s),     H(s, s) = I.

Where it comes from: the composition law gives ``H(u + e, s) = H(u + e, u) H(u, s)``,
and the first-order expansion ``H(u + e, u) = I - e Gamma(u) + O(e^2)``
(the coefficient matrix is ``dH(u, v)/dv`` at ``v = u``, and ``H(u, v)`` is the
inverse of ``H(v, u)``).  Subtracting ``H(u, s)`` and letting ``e -> 0`` gives the
equation above.  Its second derivative at ``u = s`` is ``Gamma^2 - Gamma'``,
which reproduces the second-order term of the expansion, so the sign
convention is pinned by :func:`expansion_check`.

The ODE is integrated with fixed-step classical RK4, by default 1000 steps
per unit of parameter length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError

STEPS_PER_UNIT = 1000
COND_LIMIT = 1e12


@dataclass(frozen=True)
class TransportMatrix:
    value: np.ndarray
    path_id: str
    s: float
    t: float
    integrator_steps: int

    def __array__(self, dtype=None, copy=None):
        return self.value if dtype is None else self.value.astype(dtype)

    def apply(self, u):
        return self.value @ np.asarray(u, dtype=float)


def default_steps(s, t, per_unit=STEPS_PER_UNIT):
    return max(1, math.ceil(per_unit * abs(t - s) - 1e-9))


def _rk4(provider, path, s, t, steps):
    n = provider.fibre_dim
    H = np.eye(n)
    h = (t - s) / steps

    # At a corner the velocity is one-sided; sample endpoints just inside the piece.
    nudge = 1e-12 * (t - s) if path.breaks else 0.0

    def gamma(u):
        u = min(max(u, s + nudge), t - nudge) if t > s else min(max(u, t - nudge), s + nudge)
        try:
            return provider.coeff(path, u)
        except NumericError as exc:
            raise NumericError(f"non-finite coefficient sample at u={u!r}") from exc

    g0 = gamma(s)
    for k in range(steps):
        u = s + k * h
        gm = gamma(u + 0.5 * h)
        g1 = gamma(t if k == steps - 1 else u + h)
        k1 = -g0 @ H
        k2 = -gm @ (H + 0.5 * h * k1)
        k3 = -gm @ (H + 0.5 * h * k2)
        k4 = -g1 @ (H + h * k3)
        H = H + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        g0 = g1
    return H


def _pieces(path, s, t, steps):
    """Split ``[s, t]`` at the path's breaks and share ``steps`` proportionally."""
    lo, hi = min(s, t), max(s, t)
    inner = sorted(b for b in path.breaks if lo < b < hi)
    if t < s:
        inner.reverse()
    knots = [s, *inner, t]
    total = abs(t - s)
    out = []
    for a, b in zip(knots, knots[1:]):
        out.append((a, b, max(1, round(steps * abs(b - a) / total))))
    return out


def propagate(provider, path, s, t, steps=None):
    """Raw ``n x n`` array of ``H(t, s; path)``."""
    path.require(s, t)
    if s == t:
        return np.eye(provider.fibre_dim)
    if steps is None:
        steps = default_steps(s, t)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    H = np.eye(provider.fibre_dim)
    for a, b, k in _pieces(path, s, t, steps):
        H = _rk4(provider, path, a, b, k) @ H
    return H


def transport_matrix(provider, path, s, t, steps=None):
    """Transport matrix from parameter ``s`` to ``t`` along ``path``.

    ``steps`` is the total RK4 step count (default: 1000 per unit length).
    """
    value = propagate(provider, path, s, t, steps)
    used = 0 if s == t else (steps or default_steps(s, t))
    return TransportMatrix(value, path.name, float(s), float(t), used)


def transport_vector(provider, path, s, t, u, steps=None):
    u = np.asarray(u, dtype=float)
    if s == t:
        path.require(s)
        return u.copy()
    return propagate(provider, path, s, t, steps) @ u


def _solve_checked(F, rhs, where):
    cond = np.linalg.cond(F)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericError(f"frame at {where} is singular (condition number {cond:.3e})")
    return np.linalg.solve(F, rhs)


def transport_from_frame_map(fm, path, s, t):
    """``H = F(t)^{-1} F(s)`` for a frame map ``F``."""
    path.require(s, t)
    Fs = fm(path, s)
    if s == t:
        _solve_checked(Fs, Fs, f"s={s}")
        return TransportMatrix(np.eye(Fs.shape[0]), path.name, float(s), float(t), 0)
    value = _solve_checked(fm(path, t), Fs, f"t={t}")
    return TransportMatrix(value, path.name, float(s), float(t), 0)


def coefficients_from_transport(provider, path, s, h=1e-4, steps=None):
    """Central-difference estimate of ``dH(s, t)/dt`` at ``t = s``."""
    path.require(s - h, s + h)
    plus = propagate(provider, path, s + h, s, steps)
    minus = propagate(provider, path, s - h, s, steps)
    return (plus - minus) / (2.0 * h)


def expansion_matrix(provider, path, s, eps):
    """Second-order Taylor polynomial of ``H(s + eps, s)``."""
    G = provider.coeff(path, s)
    dG = provider.d_coeff(path, s)
    n = G.shape[0]
    return np.eye(n) - eps * G + 0.5 * eps**2 * (G @ G - dG)


def expansion_check(provider, path, s, eps, steps=None):
    """Norm of ``H(s + eps, s)`` minus its second-order expansion; O(eps^3)."""
    path.require(s, s + eps)
    H = propagate(provider, path, s, s + eps, steps)
    return float(np.linalg.norm(H - expansion_matrix(provider, path, s, eps)))


def axiom_residuals(provider, path, r, s, t, steps_per_unit=STEPS_PER_UNIT):
    """Cocycle, inverse and identity residuals at one ``(r, s, t)`` triple."""

    def H(b, a):
        return propagate(provider, path, a, b, default_steps(a, b, steps_per_unit))

    n = provider.fibre_dim
    return {
        "cocycle": float(np.linalg.norm(H(r, t) @ H(t, s) - H(r, s))),
        "inverse": float(np.linalg.norm(H(s, t) @ H(t, s) - np.eye(n))),
        "identity": float(np.linalg.norm(H(s, s) - np.eye(n))),
    }

