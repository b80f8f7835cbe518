"""Bracket combinators over indexed tables and the cyclic curvature/torsion identities.

Index tuples are 1-based, matching the parameter numbering of
:class:`~ltransport.bundle_model.MultiFamily`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .convergence import convergence_order, fd_roundoff_floor
from .curvature import curvature_matrix, require_tangent, torsion_components
from .errors import ArgumentError
from .numerics import fd_derivative


class IndexedValues:
    """A table ``A[a, b, ...]`` of equally shaped values (vectors, matrices, ints)."""

    def __init__(self, arity, table):
        if arity not in (2, 3, 4):
            raise ArgumentError(f"arity must be 2, 3 or 4, got {arity}")
        shapes = {np.shape(v) for v in table.values()}
        if len(shapes) > 1:
            raise ArgumentError(f"table values have mixed shapes {sorted(shapes)}")
        for key in table:
            if len(key) != arity:
                raise ArgumentError(f"key {key} does not have arity {arity}")
        self.arity = arity
        self.table = dict(table)

    @classmethod
    def from_function(cls, arity, k, fn):
        """Populate every index tuple over ``1..k`` from ``fn(*indices)``."""
        keys = itertools.product(range(1, k + 1), repeat=arity)
        return cls(arity, {key: fn(*key) for key in keys})

    def __getitem__(self, key):
        try:
            return self.table[tuple(key)]
        except KeyError:
            raise ArgumentError(f"table has no entry for index tuple {tuple(key)}") from None


def antisym2(A, a, b):
    return A[a, b] - A[b, a]


def sym2(A, a, b):
    return A[a, b] + A[b, a]


cyclic2 = sym2


def cyclic3(A, a, b, c):
    return A[a, b, c] + A[b, c, a] + A[c, a, b]


def cyclic4(A, a, b, c, d):
    return A[a, b, c, d] + A[b, c, d, a] + A[c, d, a, b] + A[d, a, b, c]


def bracket3(A, a, b, c):
    """``(A_abc)_[a,[b,c]] = (A_abc - A_bca)`` antisymmetrized in ``b, c``."""
    return (A[a, b, c] - A[b, c, a]) - (A[a, c, b] - A[c, b, a])


def bracket4(A, a, b, c, d):
    """``(A_abcd)_[a,[b,[c,d]]] = (A_abcd - A_bcda)_[b,[c,d]]``."""

    def inner(b, c, d):
        return A[a, b, c, d] - A[b, c, d, a]

    return inner(b, c, d) - inner(c, d, b) - inner(b, d, c) + inner(d, c, b)


def antisym3(A, a, b, c):
    """``(A_abc + A_bca + A_cab)`` antisymmetrized in ``b, c``."""
    return (A[a, b, c] + A[b, c, a] + A[c, a, b]) - (A[a, c, b] + A[c, b, a] + A[b, a, c])


def cyclic_sum(fn, indices):
    """Sum of ``fn`` over the cyclic rotations of ``indices``."""
    indices = tuple(indices)
    total = None
    for r in range(len(indices)):
        term = fn(*(indices[r:] + indices[:r]))
        total = term if total is None else total + term
    return total


def jacobi2(A, a, b):
    return cyclic_sum(lambda x, y: antisym2(A, x, y), (a, b))


def jacobi3(A, a, b, c):
    return cyclic_sum(lambda x, y, z: bracket3(A, x, y, z), (a, b, c))


def jacobi4(A, a, b, c, d):
    return cyclic_sum(lambda x, y, z, w: bracket4(A, x, y, z, w) + bracket4(A, x, w, z, y),
                      (a, b, c, d))


def four_point_commutator_sum(R, a, b, c, d):
    """Cyclic sum over ``(a, b, c, d)`` of the commutators ``[R_ab, R_cd]``."""
    return cyclic_sum(lambda x, y, z, w: R[x, y] @ R[z, w] - R[z, w] @ R[x, y], (a, b, c, d))


# ---------------------------------------------------------------------------
# Geometric checks over a multi-parameter family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IdentityResidual:
    residual: float
    tolerance: float | None = None
    lhs_norm: float | None = None
    rhs_norm: float | None = None
    cross_check: float | None = None

    @property
    def passed(self):
        return self.tolerance is None or self.residual <= self.tolerance


def _pair_curvature(provider, mf, a, b, basepoint=None, fd_step=1e-4):
    if basepoint is not None:
        mf = mf.with_basepoint(basepoint)
    s = mf.basepoint
    return curvature_matrix(provider, mf.family_ab(a, b), s[a - 1], s[b - 1], fd_step).value


def _pair_torsion(provider, mf, a, b, basepoint=None):
    if basepoint is not None:
        mf = mf.with_basepoint(basepoint)
    s = mf.basepoint
    return torsion_components(provider, mf.family_ab(a, b), s[a - 1], s[b - 1]).value


def _path_coeff(provider, mf, a):
    return provider.coeff(mf.path_a(a), mf.basepoint[a - 1])


def _along(mf, a, fn, fd_step):
    """Central difference of ``fn(basepoint)`` in parameter ``a``."""
    base = np.array(mf.basepoint, dtype=float)

    def shifted(x):
        s = base.copy()
        s[a - 1] = x
        return fn(s)

    return fd_derivative(shifted, base[a - 1], fd_step, order=2, bounds=mf.domain[a - 1])


def check_antisymmetry(provider, mf, a, b, fd_step=1e-4):
    """Curvature and torsion residuals of swapping the two parameters of a pair family.

    Returns ``(residual_R, residual_T)``; ``residual_T`` is None off the tangent bundle.
    """
    s = mf.basepoint
    fab, fba = mf.family_ab(a, b), mf.family_ab(b, a)
    R = (curvature_matrix(provider, fab, s[a - 1], s[b - 1], fd_step).value
         + curvature_matrix(provider, fba, s[b - 1], s[a - 1], fd_step).value)
    residual_T = None
    if provider.fibre_dim == provider.base_dim:
        T = (torsion_components(provider, fab, s[a - 1], s[b - 1]).value
             + torsion_components(provider, fba, s[b - 1], s[a - 1]).value)
        residual_T = float(np.linalg.norm(T))
    return float(np.linalg.norm(R)), residual_T


def _require_k(mf, k):
    if mf.k < k:
        raise ArgumentError(f"this identity needs at least {k} parameters, family has {mf.k}")


def _test_section_values(test_sec, s):
    return np.asarray(test_sec(np.asarray(s, dtype=float)), dtype=float)


def covariant_curvature_terms(provider, mf, test_sec, a, b, c, fd_step=1e-3):
    """``(D_a o R_bc - R_bc o D_a) sigma`` at the basepoint, in two discretizations.

    Returns ``(applied, matrix_form)``: the first differentiates the section
    ``R_bc sigma`` and subtracts ``R_bc D_a sigma``; the second
    differentiates the curvature matrix field and adds the commutator with
    the coefficient matrix of the ``a``-path.
    """
    sigma = _test_section_values(test_sec, mf.basepoint)
    G = _path_coeff(provider, mf, a)
    R = _pair_curvature(provider, mf, b, c, fd_step=fd_step)

    d_R_sigma = _along(mf, a, lambda s: _pair_curvature(provider, mf, b, c, s, fd_step)
                       @ _test_section_values(test_sec, s), fd_step)
    d_sigma = _along(mf, a, lambda s: _test_section_values(test_sec, s), fd_step)
    applied = (d_R_sigma + G @ (R @ sigma)) - R @ (d_sigma + G @ sigma)

    dR = _along(mf, a, lambda s: _pair_curvature(provider, mf, b, c, s, fd_step), fd_step)
    matrix_form = (dR + G @ R - R @ G) @ sigma
    return applied, matrix_form


def check_bianchi_second(provider, mf, test_sec, tolerance=None, fd_step=1e-3, indices=(1, 2, 3)):
    """Norm of the cyclic sum of ``D_a o R_bc - R_bc o D_a`` applied to ``test_sec``.

    ``test_sec`` maps a k-parameter tuple to a fibre vector.  ``cross_check``
    holds the gap between the two discretizations.
    """
    _require_k(mf, 3)
    applied = matrix_form = 0.0
    for a, b, c in _rotations(indices):
        x, y = covariant_curvature_terms(provider, mf, test_sec, a, b, c, fd_step)
        applied = applied + x
        matrix_form = matrix_form + y
    return IdentityResidual(
        residual=float(np.linalg.norm(applied)),
        tolerance=tolerance,
        cross_check=float(np.linalg.norm(applied - matrix_form)),
    )


def check_bianchi_first(provider, mf, tolerance=None, fd_step=1e-3, indices=(1, 2, 3)):
    """Cyclic sum of ``R_ab(tau_c)`` against the cyclic sum of ``D_a T_bc``."""
    require_tangent(provider)
    _require_k(mf, 3)
    lhs = rhs = 0.0
    for a, b, c in _rotations(indices):
        lhs = lhs + _pair_curvature(provider, mf, a, b, fd_step=fd_step) @ mf.tangent(c)
        T = _pair_torsion(provider, mf, b, c)
        dT = _along(mf, a, lambda s: _pair_torsion(provider, mf, b, c, s), fd_step)
        rhs = rhs + dT + _path_coeff(provider, mf, a) @ T
    return IdentityResidual(
        residual=float(np.linalg.norm(lhs - rhs)),
        tolerance=tolerance,
        lhs_norm=float(np.linalg.norm(lhs)),
        rhs_norm=float(np.linalg.norm(rhs)),
    )


def pair_curvature_table(provider, mf, fd_step=1e-4):
    """Curvature matrices of every pair family at the basepoint, as an IndexedValues table."""
    n = provider.fibre_dim
    table = {}
    for a, b in itertools.product(range(1, mf.k + 1), repeat=2):
        table[a, b] = np.zeros((n, n)) if a == b else _pair_curvature(provider, mf, a, b, fd_step=fd_step)
    return IndexedValues(2, table)


def check_four_point(provider, mf, test_vec, tolerance=None, fd_step=1e-4, indices=None):
    """Largest norm, over orderings of ``indices``, of the cyclic commutator sum applied to ``test_vec``."""
    _require_k(mf, 4)
    R = pair_curvature_table(provider, mf, fd_step)
    v = np.asarray(test_vec, dtype=float)
    pool = tuple(indices) if indices is not None else tuple(range(1, mf.k + 1))
    worst = 0.0
    for quad in itertools.permutations(pool, 4):
        worst = max(worst, float(np.linalg.norm(four_point_commutator_sum(R, *quad) @ v)))
    return IdentityResidual(residual=worst, tolerance=tolerance)


def fd_order_sweep(check, fd_steps):
    """Order fit of ``check(fd_step).residual`` over a halving sequence of steps.

    Residuals below the difference-quotient roundoff level of the smallest
    step count as converged (``at_floor``).
    """
    samples = [(h, check(h).residual) for h in fd_steps]
    return convergence_order(samples, floor=fd_roundoff_floor(min(fd_steps)))


def _rotations(indices):
    a, b, c = indices
    return ((a, b, c), (b, c, a), (c, a, b))
