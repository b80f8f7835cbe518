"""Pentagon closure and small-loop holonomy, with convergence-order fits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .convergence import FLOOR, ConvergenceFit, convergence_order  # noqa: F401
from .curvature import curvature_matrix, require_tangent, torsion_components
from .errors import ArgumentError
from .transport import STEPS_PER_UNIT, default_steps, propagate


def _leg_steps(s, t, delta, eps, steps, per_unit=STEPS_PER_UNIT):
    if steps is not None:
        return steps
    return max(default_steps(s, s + delta, per_unit), default_steps(t, t + eps, per_unit))


def pentagon_defect(provider, family, s, t, delta, eps, steps=None):
    """Gap between transporting the two displacement vectors along each other and ``B - A``.

    ``A = delta * eta_s`` and ``B = eps * eta_t``; the result is
    ``-delta eps T + O(h^3)``.
    """
    require_tangent(provider)
    family.require(s, t)
    family.require(s + delta, t + eps)
    k = _leg_steps(s, t, delta, eps, steps)
    A = delta * np.asarray(family.d_s(s, t), dtype=float)
    B = eps * np.asarray(family.d_t(s, t), dtype=float)
    LB = propagate(provider, family.row(t), s, s + delta, k) @ B
    LA = propagate(provider, family.col(s), t, t + eps, k) @ A
    return (LB - LA) - (B - A)


@dataclass(frozen=True)
class DoubleTransport:
    lhs: np.ndarray
    bracket: np.ndarray
    torsion_term: np.ndarray
    displacement: np.ndarray

    @property
    def remainder(self):
        return self.lhs - self.bracket - self.torsion_term


def double_transport_terms(provider, family, s, t, delta, eps, steps=None):
    """The pieces of the two-leg comparison: composite transports, the single-leg bracket
    and ``-delta eps T``; ``displacement`` is ``B - A``."""
    require_tangent(provider)
    family.require(s, t)
    family.require(s + delta, t + eps)
    k = _leg_steps(s, t, delta, eps, steps)
    A = delta * np.asarray(family.d_s(s, t), dtype=float)
    B = eps * np.asarray(family.d_t(s, t), dtype=float)
    row_t, col_s = family.row(t), family.col(s)
    row_up, col_right = family.row(t + eps), family.col(s + delta)
    along_row = propagate(provider, row_t, s, s + delta, k)
    along_col = propagate(provider, col_s, t, t + eps, k)
    lhs = (propagate(provider, col_right, t, t + eps, k) @ (along_row @ B)
           - propagate(provider, row_up, s, s + delta, k) @ (along_col @ A))
    bracket = along_col @ B - along_row @ A
    T = torsion_components(provider, family, s, t).value
    return DoubleTransport(lhs, bracket, -delta * eps * T, B - A)


def double_transport_defect(provider, family, s, t, delta, eps, steps=None):
    return double_transport_terms(provider, family, s, t, delta, eps, steps).remainder


def loop_holonomy(provider, family, s, t, delta, eps, steps=None, reverse=False):
    """Transport around the boundary of the parameter rectangle ``[s, s+delta] x [t, t+eps]``.

    Legs in order: along ``eta(., t)``, up ``eta(s+delta, .)``, back along
    ``eta(., t+eps)``, down ``eta(s, .)``.  Every leg uses ``steps`` RK4 steps.
    With ``reverse`` the same rectangle is traversed the other way round.
    """
    family.require(s, t)
    family.require(s + delta, t + eps)
    k = _leg_steps(s, t, delta, eps, steps)
    if not reverse:
        legs = [
            (family.row(t), s, s + delta),
            (family.col(s + delta), t, t + eps),
            (family.row(t + eps), s + delta, s),
            (family.col(s), t + eps, t),
        ]
    else:
        legs = [
            (family.col(s), t, t + eps),
            (family.row(t + eps), s, s + delta),
            (family.col(s + delta), t + eps, t),
            (family.row(t), s + delta, s),
        ]
    hol = np.eye(provider.fibre_dim)
    for path, a, b in legs:
        hol = propagate(provider, path, a, b, k) @ hol
    return hol


def loop_holonomy_vector(provider, family, s, t, delta, eps, A, steps=None):
    return loop_holonomy(provider, family, s, t, delta, eps, steps) @ np.asarray(A, dtype=float)


@dataclass(frozen=True)
class HolonomyEstimate:
    """Curvature recovered from shrinking loops.

    ``matrix`` is the Richardson-extrapolated limit; ``reference`` the
    component-formula curvature.  ``scaled_fit`` fits the scaled defect
    against the reference and ``remainder_fit`` the unscaled remainder.
    """

    matrix: np.ndarray
    reference: np.ndarray
    levels: tuple
    scaled_fit: ConvergenceFit
    remainder_fit: ConvergenceFit
    holonomies: tuple = field(repr=False, default=())
    richardson_order: int = 1

    @property
    def error(self):
        return float(np.linalg.norm(self.matrix - self.reference))


def richardson_order(hs, values, max_order=4):
    """Leading error order observed on three levels, rounded to an integer in 1..max_order.

    Symmetric loop placements cancel the first-order term; extrapolating with
    the observed order keeps the Richardson step exact for either case.
    Assumes a geometric sequence of sizes.  Falls back to 1 when the
    differences sit at roundoff.
    """
    d1 = float(np.linalg.norm(values[0] - values[1]))
    d2 = float(np.linalg.norm(values[1] - values[2]))
    if d1 <= FLOOR or d2 <= FLOOR:
        return 1
    r = hs[1] / hs[2]
    observed = np.log(d1 / d2) / np.log(r)
    return int(min(max(round(observed), 1), max_order))


def romberg(hs, values, order):
    """Repeated Richardson elimination of the error terms ``h^order, h^(order+1), ...``.

    Each sweep combines neighbouring levels; the last one acts on the two
    finest levels.
    """
    column = list(values)
    p = order
    while len(column) > 1:
        column = [
            ((coarse_h / fine_h) ** p * fine - coarse) / ((coarse_h / fine_h) ** p - 1.0)
            for coarse_h, fine_h, coarse, fine in zip(hs, hs[1:], column, column[1:])
        ]
        hs = hs[1:]
        p += 1
    return column[0]


def holonomy_curvature_estimate(provider, family, s, t, h_sequence, steps=None, fd_step=1e-4,
                                steps_per_unit=None):
    """Curvature from loops of side ``h`` for each ``h`` in ``h_sequence``.

    ``steps`` fixes the RK4 step count of every leg; otherwise each leg gets
    ``steps_per_unit`` (default 1000) steps per unit of parameter length.
    """
    hs = [float(h) for h in h_sequence]
    if len(hs) < 3:
        raise ArgumentError(f"need at least 3 loop sizes, got {len(hs)}")
    if any(h <= 0 for h in hs) or any(b >= a for a, b in zip(hs, hs[1:])):
        raise ArgumentError(f"loop sizes must be positive and strictly decreasing: {hs}")
    n = provider.fibre_dim
    reference = curvature_matrix(provider, family, s, t, fd_step).value
    hols, scaled = [], []
    for h in hs:
        k = steps if steps_per_unit is None else _leg_steps(s, t, h, h, steps, steps_per_unit)
        hol = loop_holonomy(provider, family, s, t, h, h, k)
        hols.append(hol)
        scaled.append(-(hol - np.eye(n)) / h**2)
    order = richardson_order(hs[-3:], scaled[-3:])
    limit = romberg(hs, scaled, order)
    scaled_fit = convergence_order(
        [(h, float(np.linalg.norm(E - reference))) for h, E in zip(hs, scaled)])
    remainder_fit = convergence_order(
        [(h, float(np.linalg.norm(H - (np.eye(n) - h**2 * reference)))) for h, H in zip(hs, hols)])
    return HolonomyEstimate(limit, reference, tuple(hs), scaled_fit, remainder_fit,
                            tuple(hols), order)
