"""Experiment runners behind the ``geo`` command.

Each runner takes a :class:`Setup` and appends check records, fits and
verdicts to a :class:`~ltransport.reports.GeometryReport`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle_model import chart_curve_bundle, segment_path
from .convergence import convergence_order
from .curvature import curvature_commutator, curvature_matrix, torsion_components, torsion_operator
from .errors import NotFlatError
from .flatness import construct_flat_frame, flat_frame_residual, flatness_verdict, grid_nodes
from .holonomy import holonomy_curvature_estimate, pentagon_defect, romberg
from .identities import (
    check_antisymmetry,
    check_bianchi_first,
    check_bianchi_second,
    check_four_point,
    fd_order_sweep,
)
from .models import affine_family, frame_map_for
from .numerics import ordered_map
from .reports import CheckRecord, fit_record
from .transport import (
    STEPS_PER_UNIT,
    axiom_residuals,
    default_steps,
    expansion_check,
    propagate,
    transport_from_frame_map,
)

EXPERIMENTS = ("axioms", "expansion", "torsion", "curvature", "pentagon", "holonomy", "bianchi", "flatness")
TANGENT_ONLY = {"torsion", "pentagon"}

DEFAULT_TOLERANCES = {
    "axioms": 1e-8,
    "linearity": 1e-12,
    "frame_map": 1e-9,
    "expansion_order_band": 0.3,
    "torsion": 1e-6,
    "curvature": 1e-5,
    "min_order": 2.7,
    "pentagon_limit": 1e-4,
    "holonomy": 1e-5,
    "flat_loop": 1e-8,
    "antisymmetry": 1e-10,
    "bianchi": 1e-4,
    "bianchi_order_band": 0.3,
    "four_point": 1e-8,
    "flat_curvature": 1e-8,
    "flat_paths": 1e-7,
    "flat_frame": 1e-7,
}

DEFAULT_H = {
    "expansion": (0.08, 0.04, 0.02, 0.01),
    "pentagon": (0.008, 0.004, 0.002, 0.001),
    "holonomy": (0.04, 0.02, 0.01),
}
DEFAULT_FD = {"bianchi": 1e-3}

# Parameter-to-chart maps for the multi-parameter bundles (rows: s, t).
BUNDLE3 = np.array([[1.0, 0.3, -0.5], [0.2, 1.0, 0.7]])
BUNDLE4 = np.array([[1.0, 0.3, -0.5, 0.4], [0.2, 1.0, 0.7, -0.6]])
BUNDLE_HALF_WIDTH = 0.5


@dataclass
class Setup:
    provider: object
    model_id: str
    region: tuple
    point: tuple
    resolution: int = 3
    steps_per_unit: int | None = None
    fd_step: float | None = None
    h_sequence: tuple | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = 0
    workers: int | None = None

    def tol(self, name):
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def hs(self, experiment):
        return tuple(self.h_sequence) if self.h_sequence else DEFAULT_H[experiment]

    def fd(self, experiment):
        if self.fd_step is not None:
            return self.fd_step
        return DEFAULT_FD.get(experiment, 1e-4)

    def steps_for(self, length):
        return default_steps(0.0, length, self.steps_per_unit or STEPS_PER_UNIT)

    @property
    def tangent(self):
        return self.provider.fibre_dim == self.provider.base_dim


def applicable(setup, experiment):
    """None if ``experiment`` can run on this setup, else the reason it cannot."""
    if experiment in TANGENT_ONLY and not setup.tangent:
        return "torsion requires tangent bundle"
    return None


def _point(x):
    return tuple(float(v) for v in np.atleast_1d(x))


def parameter_family(setup):
    """Two-parameter family over the region and the parameters of ``setup.point``.

    In two or more dimensions it moves the first two coordinates; on a line it
    is ``(s, t) -> (s + t) / 2``.
    """
    region, x = setup.region, np.asarray(setup.point, dtype=float)
    if len(region) == 1:
        fam = affine_family([0.0], [0.5], [0.5], (region[0], region[0]), name="line")
        return fam, float(x[0]), float(x[0])
    origin = x.copy()
    origin[0] = origin[1] = 0.0
    e = np.eye(len(region))
    fam = affine_family(origin, e[0], e[1], (region[0], region[1]), name="coords")
    return fam, float(x[0]), float(x[1])


def _family_at(setup, node):
    node = np.asarray(node, dtype=float)
    if len(setup.region) == 1:
        return float(node[0]), float(node[0])
    return float(node[0]), float(node[1])


def _nodes(setup):
    """Grid nodes sharing the trailing coordinates of ``setup.point``."""
    nodes = grid_nodes(setup.region[:2], setup.resolution)
    tail = np.asarray(setup.point, dtype=float)[2:]
    return [np.concatenate([n, tail]) for n in nodes]


def _diagonal_path(setup, scale=0.25):
    """Segment through ``setup.point`` along the box diagonal, parameter 0.5 at the point."""
    lo = np.array([a for a, _ in setup.region])
    hi = np.array([b for _, b in setup.region])
    x = np.asarray(setup.point, dtype=float)
    d = scale * (hi - lo)
    return segment_path(x - d, x + d, (0.0, 1.0), name="diagonal")


def _order_check(report, setup, experiment, name, fit, *, target=None, band=None, minimum=None, inputs=None):
    report.fits.append(dict(fit_record(name, fit), experiment=experiment))
    inputs = dict(inputs or {}, points=[list(p) for p in fit.points])
    if fit.at_floor:
        report.checks.append(CheckRecord(experiment, name, 0.0, 0.0, "<=", inputs=dict(inputs, at_floor=True),
                                         passed_override=True))
    elif minimum is not None:
        report.checks.append(CheckRecord(experiment, name, fit.slope, minimum, ">=", inputs=inputs))
    else:
        report.checks.append(CheckRecord(experiment, name, fit.slope, band, "within", target=target, inputs=inputs))


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


def run_axioms(setup, report):
    p = setup.provider
    path = _diagonal_path(setup)
    rng = np.random.default_rng(setup.seed)
    per_unit = setup.steps_per_unit or STEPS_PER_UNIT
    triples = [tuple(float(v) for v in rng.uniform(0.0, 1.0, 3)) for _ in range(3)]
    tol = setup.tol("axioms")
    for r, s, t in triples:
        res = axiom_residuals(p, path, r, s, t, per_unit)
        for name in ("cocycle", "inverse", "identity"):
            report.checks.append(CheckRecord("axioms", name, res[name], tol,
                                             inputs={"op": "axiom_residuals", "path": path.name,
                                                     "r": r, "s": s, "t": t, "steps_per_unit": per_unit}))

    n = p.fibre_dim
    u, v = rng.normal(size=n), rng.normal(size=n)
    a, b = rng.normal(size=2)
    s, t = 0.0, 1.0
    H = propagate(p, path, s, t, setup.steps_for(1.0))
    lhs = H @ (a * u + b * v)
    gap = float(np.linalg.norm(lhs - (a * (H @ u) + b * (H @ v))) / (1.0 + np.linalg.norm(lhs)))
    report.checks.append(CheckRecord("axioms", "linearity", gap, setup.tol("linearity"),
                                     inputs={"op": "transport_matrix", "path": path.name, "s": s, "t": t}))

    fm = frame_map_for(p)
    if fm is not None:
        for _, s, t in triples:
            ode = propagate(p, path, s, t, setup.steps_for(abs(t - s)))
            closed = transport_from_frame_map(fm, path, s, t).value
            report.checks.append(CheckRecord("axioms", "frame_map", float(np.linalg.norm(ode - closed)),
                                             setup.tol("frame_map"),
                                             inputs={"op": "transport_from_frame_map", "frame": fm.name,
                                                     "s": s, "t": t}))


def run_expansion(setup, report):
    p = setup.provider
    path = _diagonal_path(setup)
    s = 0.5
    samples = []
    for eps in setup.hs("expansion"):
        r = expansion_check(p, path, s, eps, setup.steps_for(eps))
        samples.append((eps, r))
    fit = convergence_order(samples)
    # Third order is the generic rate; symmetric points can do better.
    _order_check(report, setup, "expansion", "expansion_order", fit,
                 minimum=3.0 - setup.tol("expansion_order_band"),
                 inputs={"op": "expansion_check", "path": path.name, "s": s})


def run_torsion(setup, report):
    p = setup.provider
    fam, _, _ = parameter_family(setup)
    tol = setup.tol("torsion")

    def one(node):
        s, t = _family_at(setup, node)
        gap = torsion_operator(p, fam, s, t).value - torsion_components(p, fam, s, t).value
        return s, t, float(np.linalg.norm(gap))

    for s, t, gap in ordered_map(one, _nodes(setup), setup.workers):
        report.checks.append(CheckRecord("torsion", "operator_vs_components", gap, tol, param_point=(s, t),
                                         inputs={"op": "torsion_operator", "family": fam.name}))


def curvature_test_section(n):
    """Smooth section of the family used by the curvature checks."""
    return lambda s, t: np.array([np.cos(s + (i + 1) * t) + 0.5 * i for i in range(n)])


def run_curvature(setup, report):
    p = setup.provider
    fam, _, _ = parameter_family(setup)
    sec = curvature_test_section(p.fibre_dim)
    tol, fd = setup.tol("curvature"), setup.fd("curvature")

    def one(node):
        s, t = _family_at(setup, node)
        R = curvature_matrix(p, fam, s, t, fd).value
        comm = curvature_commutator(p, fam, sec, s, t)
        return s, t, float(np.linalg.norm(comm - R @ sec(s, t))), float(np.linalg.norm(R))

    for s, t, gap, norm in ordered_map(one, _nodes(setup), setup.workers):
        report.checks.append(CheckRecord("curvature", "commutator_vs_matrix", gap, tol, param_point=(s, t),
                                         inputs={"op": "curvature_commutator", "family": fam.name,
                                                 "fd_step": fd, "curvature_norm": norm}))


def run_pentagon(setup, report):
    p = setup.provider
    fam, s, t = parameter_family(setup)
    hs = setup.hs("pentagon")
    T = torsion_components(p, fam, s, t).value
    scaled, remainders = [], []
    for h in hs:
        d = pentagon_defect(p, fam, s, t, h, h, setup.steps_for(h))
        scaled.append(d / h**2)
        remainders.append((h, float(np.linalg.norm(d + h**2 * T))))
    fit = convergence_order(remainders)
    _order_check(report, setup, "pentagon", "remainder_order", fit, minimum=setup.tol("min_order"),
                 inputs={"op": "pentagon_defect", "s": s, "t": t})
    limit = romberg(list(hs), scaled, 1)
    report.checks.append(CheckRecord("pentagon", "closure_limit", float(np.linalg.norm(limit + T)),
                                     setup.tol("pentagon_limit"), param_point=(s, t),
                                     inputs={"op": "pentagon_defect", "limit": limit, "torsion": T}))


def run_holonomy(setup, report):
    p = setup.provider
    fam, s, t = parameter_family(setup)
    hs = setup.hs("holonomy")
    est = holonomy_curvature_estimate(p, fam, s, t, hs, fd_step=setup.fd("holonomy"),
                                      steps_per_unit=setup.steps_per_unit)
    report.fits.append(dict(fit_record("scaled_defect", est.scaled_fit), experiment="holonomy"))
    inputs = {"op": "holonomy_curvature_estimate", "s": s, "t": t, "h_sequence": list(hs)}
    if float(np.linalg.norm(est.reference)) <= setup.tol("flat_curvature"):
        for h, hol in zip(hs, est.holonomies):
            gap = float(np.linalg.norm(hol - np.eye(p.fibre_dim)))
            report.checks.append(CheckRecord("holonomy", "flat_loop", gap, setup.tol("flat_loop"),
                                             param_point=(s, t), h=h, inputs=dict(inputs, op="loop_holonomy")))
    else:
        report.checks.append(CheckRecord("holonomy", "curvature_estimate", est.error, setup.tol("holonomy"),
                                         param_point=(s, t),
                                         inputs=dict(inputs, estimate=est.matrix, reference=est.reference,
                                                     richardson_order=est.richardson_order)))
    _order_check(report, setup, "holonomy", "remainder_order", est.remainder_fit,
                 minimum=setup.tol("min_order"), inputs=inputs)


def _bundle(setup, matrix):
    fam, s, t = parameter_family(setup)
    (s_lo, s_hi), (t_lo, t_hi) = fam.domain
    room = min(s - s_lo, s_hi - s, t - t_lo, t_hi - t)
    reach = BUNDLE_HALF_WIDTH * np.abs(matrix).sum(axis=1).max()
    scaled = matrix * min(1.0, 0.9 * room / reach)
    k = matrix.shape[1]
    domain = tuple((-BUNDLE_HALF_WIDTH, BUNDLE_HALF_WIDTH) for _ in range(k))
    return chart_curve_bundle(fam, (s, t), scaled, np.zeros(k), domain)


def bianchi_test_section(n):
    return lambda u: np.array([np.cos(u.sum() + 0.3 * i) + 0.5 * i * u[0] * u[1] + 1.0 for i in range(n)])


def run_bianchi(setup, report):
    p = setup.provider
    mf3 = _bundle(setup, BUNDLE3)
    rng = np.random.default_rng(setup.seed)
    tol_anti = setup.tol("antisymmetry")
    for base in rng.uniform(-0.3, 0.3, size=(3, mf3.k)):
        mf = mf3.with_basepoint(base)
        for a, b in ((1, 2), (1, 3), (2, 3)):
            res_R, res_T = check_antisymmetry(p, mf, a, b, setup.fd("curvature"))
            where = {"op": "check_antisymmetry", "basepoint": base, "pair": [a, b]}
            report.checks.append(CheckRecord("bianchi", "curvature_antisymmetry", res_R, tol_anti,
                                             param_point=_point(base), inputs=where))
            if res_T is not None:
                report.checks.append(CheckRecord("bianchi", "torsion_antisymmetry", res_T, tol_anti,
                                                 param_point=_point(base), inputs=where))

    fd = setup.fd("bianchi")
    fds = (fd, fd / 2, fd / 4)
    sec = bianchi_test_section(p.fibre_dim)
    checks = [("second_bianchi", lambda h: check_bianchi_second(p, mf3, sec, fd_step=h))]
    if setup.tangent:
        checks.append(("first_bianchi", lambda h: check_bianchi_first(p, mf3, fd_step=h)))
    for name, check in checks:
        res = check(fd)
        report.checks.append(CheckRecord("bianchi", name, res.residual, setup.tol("bianchi"),
                                         param_point=_point(mf3.basepoint),
                                         inputs={"op": f"check_{name}", "fd_step": fd,
                                                 "lhs_norm": res.lhs_norm, "rhs_norm": res.rhs_norm,
                                                 "cross_check": res.cross_check}))
        fit = fd_order_sweep(check, fds)
        _order_check(report, setup, "bianchi", f"{name}_order", fit, target=2.0,
                     band=setup.tol("bianchi_order_band"), inputs={"op": f"check_{name}"})

    mf4 = _bundle(setup, BUNDLE4)
    res = check_four_point(p, mf4, np.ones(p.fibre_dim), fd_step=setup.fd("curvature"))
    report.checks.append(CheckRecord("bianchi", "four_point", res.residual, setup.tol("four_point"),
                                     param_point=_point(mf4.basepoint), inputs={"op": "check_four_point"}))


def run_flatness(setup, report):
    p = setup.provider
    verdict = flatness_verdict(
        p, setup.region,
        tolerances={"curvature": setup.tol("flat_curvature"), "paths": setup.tol("flat_paths")},
        resolution=setup.resolution, seed=setup.seed, steps_per_unit=setup.steps_per_unit,
        fd_step=setup.fd("flatness"), workers=setup.workers,
    )
    summary = verdict.as_dict()
    summary["discrepancy_flag"] = verdict.discrepancy_flag
    if verdict.equivalence_expected:
        report.checks.append(CheckRecord("flatness", "criteria_agree", float(verdict.consistent), 1.0, ">=",
                                         inputs={"op": "flatness_verdict",
                                                 "curvature_sup": verdict.curvature_sup,
                                                 "path_defect": verdict.path_defect}))
    if verdict.flat_by_paths:
        lo = tuple(a for a, _ in setup.region)
        try:
            frame = construct_flat_frame(p, setup.region, lo, np.eye(p.fibre_dim), seed=setup.seed,
                                         tolerance=setup.tol("flat_paths"))
        except NotFlatError as exc:
            summary["flat_frame"] = {"built": False, "defect": exc.defect, "routes": list(exc.routes)}
        else:
            pts = grid_nodes(setup.region, 2) + [np.asarray(setup.point, dtype=float)]
            res = flat_frame_residual(p, frame, pts)
            summary["flat_frame"] = {"built": True, "residual": res}
            report.checks.append(CheckRecord("flatness", "flat_frame_identity", res, setup.tol("flat_frame"),
                                             inputs={"op": "construct_flat_frame", "basepoint": list(lo)}))
    report.verdicts["flatness"] = summary


RUNNERS = {
    "axioms": run_axioms,
    "expansion": run_expansion,
    "torsion": run_torsion,
    "curvature": run_curvature,
    "pentagon": run_pentagon,
    "holonomy": run_holonomy,
    "bianchi": run_bianchi,
    "flatness": run_flatness,
}
