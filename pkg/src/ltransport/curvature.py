"""Torsion and curvature of a transport over a two-parameter family.

Notation used throughout: for a family ``eta(s, t)``

* ``A(s, t)`` is the coefficient matrix of the row path ``eta(., t)`` at ``s``;
* ``B(s, t)`` is the coefficient matrix of the column path ``eta(s, .)`` at ``t``.

Curvature is ``dB/ds - dA/dt + A B - B A`` and torsion (tangent bundles only)
is ``A eta_t - B eta_s``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle_model import ProviderKind, Section
from .derivation import derive_section
from .errors import ArgumentError, ConfigurationError
from .numerics import fd_derivative


@dataclass(frozen=True)
class TorsionValue:
    value: np.ndarray
    at: tuple

    def __array__(self, dtype=None, copy=None):
        return self.value if dtype is None else self.value.astype(dtype)


@dataclass(frozen=True)
class CurvatureValue:
    value: np.ndarray
    at: tuple

    def __array__(self, dtype=None, copy=None):
        return self.value if dtype is None else self.value.astype(dtype)


@dataclass(frozen=True)
class FieldSample:
    params: tuple
    point: tuple
    value: np.ndarray


def row_coeff(provider, family, s, t):
    return provider.coeff(family.row(t), s)


def col_coeff(provider, family, s, t):
    return provider.coeff(family.col(s), t)


def require_tangent(provider):
    if provider.fibre_dim != provider.base_dim:
        raise ConfigurationError("torsion requires tangent bundle")


def torsion_components(provider, family, s, t):
    require_tangent(provider)
    family.require(s, t)
    es = np.asarray(family.d_s(s, t), dtype=float)
    et = np.asarray(family.d_t(s, t), dtype=float)
    value = row_coeff(provider, family, s, t) @ et - col_coeff(provider, family, s, t) @ es
    return TorsionValue(value, (float(s), float(t)))


def torsion_operator(provider, family, s, t):
    """Torsion as the difference of two derivations of the family's tangent fields."""
    require_tangent(provider)
    family.require(s, t)
    hess = family.hessian
    row, col = family.row(t), family.col(s)
    along_row = Section(
        components=lambda u: family.d_t(u, t),
        partials=None if hess is None else (lambda u: (np.asarray(hess(u, t))[:, 1, 0],)),
        along=row,
    )
    along_col = Section(
        components=lambda u: family.d_s(s, u),
        partials=None if hess is None else (lambda u: (np.asarray(hess(s, u))[:, 0, 1],)),
        along=col,
    )
    value = derive_section(provider, row, along_row, s) - derive_section(provider, col, along_col, t)
    return TorsionValue(value, (float(s), float(t)))


def _analytic_parameter_derivatives(provider, family, s, t):
    if provider.kind is not ProviderKind.CONNECTION or provider.d_gamma3 is None:
        raise ArgumentError(f"{provider.name} has no analytic coefficient derivatives")
    if family.hessian is None:
        raise ArgumentError(f"{family.name} has no analytic second partials")
    x = np.asarray(family.point(s, t), dtype=float)
    es = np.asarray(family.d_s(s, t), dtype=float)
    et = np.asarray(family.d_t(s, t), dtype=float)
    mixed = np.asarray(family.hessian(s, t), dtype=float)[:, 0, 1]
    g = np.asarray(provider.gamma3(x), dtype=float)
    dg = np.asarray(provider.d_gamma3(x), dtype=float)
    dB_ds = dg @ es @ et + g @ mixed
    dA_dt = dg @ et @ es + g @ mixed
    return dB_ds, dA_dt


def curvature_matrix(provider, family, s, t, fd_step=1e-4):
    """Curvature matrix at ``(s, t)``.

    The two parameter derivatives are central differences with ``fd_step``
    taken across the family (re-extracting row and column paths).  Pass
    ``fd_step=None`` to use analytic derivatives instead; that needs a
    connection-induced provider with ``d_gamma3`` and a family with a hessian.
    """
    family.require(s, t)
    A = row_coeff(provider, family, s, t)
    B = col_coeff(provider, family, s, t)
    if fd_step is None:
        dB_ds, dA_dt = _analytic_parameter_derivatives(provider, family, s, t)
    else:
        dB_ds = fd_derivative(lambda u: col_coeff(provider, family, u, t), s, fd_step,
                              order=2, bounds=family.domain[0])
        dA_dt = fd_derivative(lambda v: row_coeff(provider, family, s, v), t, fd_step,
                              order=2, bounds=family.domain[1])
    return CurvatureValue(dB_ds - dA_dt + A @ B - B @ A, (float(s), float(t)))


def curvature_commutator(provider, family, sec2d, s, t, fd_step=1e-3):
    """Commutator of the derivations along the row and column paths, applied to ``sec2d``.

    The outer derivative is a fourth-order difference with ``fd_step``; the
    inner one uses the section's own partials.
    """
    family.require(s, t)
    if not isinstance(sec2d, Section):
        sec2d = Section(components=sec2d, along=family)

    def d_col(u, v):
        return sec2d.partial(1, u, v) + col_coeff(provider, family, u, v) @ sec2d(u, v)

    def d_row(u, v):
        return sec2d.partial(0, u, v) + row_coeff(provider, family, u, v) @ sec2d(u, v)

    row, col = family.row(t), family.col(s)
    outer_row = Section(components=lambda u: d_col(u, t), along=row, fd_step=fd_step)
    outer_col = Section(components=lambda v: d_row(s, v), along=col, fd_step=fd_step)
    return derive_section(provider, row, outer_row, s) - derive_section(provider, col, outer_col, t)


def _grid(grid):
    s_values, t_values = grid
    return [(float(s), float(t)) for s in s_values for t in t_values]


def curvature_field(provider, family, grid, fd_step=1e-4):
    """Curvature samples keyed by parameters; self-intersections keep every sample."""
    return [
        FieldSample((s, t), tuple(np.asarray(family.point(s, t), dtype=float)),
                    curvature_matrix(provider, family, s, t, fd_step).value)
        for s, t in _grid(grid)
    ]


def torsion_field(provider, family, grid):
    return [
        FieldSample((s, t), tuple(np.asarray(family.point(s, t), dtype=float)),
                    torsion_components(provider, family, s, t).value)
        for s, t in _grid(grid)
    ]
