"""Flatness as vanishing curvature and as path independence, and the flat-frame builder."""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .bundle_model import (
    FrameField,
    ProviderKind,
    polyline_path,
    quadratic_arc_path,
    reparametrize,
    segment_path,
)
from .curvature import curvature_matrix
from .errors import ArgumentError, NotFlatError
from .models import affine_family
from .numerics import ordered_map
from .transport import default_steps, propagate

ENDPOINT_TOL = 1e-10
DEFAULT_TOLERANCES = {"curvature": 1e-8, "paths": 1e-7}


def _full_transport(provider, path, steps=None):
    a, b = path.domain
    return propagate(provider, path, a, b, steps)


def path_independence_defect(provider, path1, path2, steps=None):
    """``||H(path1) - H(path2)||`` with each path traversed over its whole domain."""
    ends1 = (np.asarray(path1.start, dtype=float), np.asarray(path1.end, dtype=float))
    ends2 = (np.asarray(path2.start, dtype=float), np.asarray(path2.end, dtype=float))
    if any(np.max(np.abs(p - q)) > ENDPOINT_TOL for p, q in zip(ends1, ends2)):
        raise ArgumentError(
            f"paths do not share endpoints: {path1.name} runs {[e.tolist() for e in ends1]}, "
            f"{path2.name} runs {[e.tolist() for e in ends2]}")
    H1 = _full_transport(provider, path1, steps)
    H2 = _full_transport(provider, path2, steps)
    return float(np.linalg.norm(H1 - H2))


def reparametrization_defect(provider, path, phi, dphi, domain, steps=None):
    """Gap between the transport along ``path`` and along ``path o phi``."""
    return path_independence_defect(provider, path, reparametrize(path, phi, dphi, domain), steps)


# ---------------------------------------------------------------------------
# Routes
# ---------------------------------------------------------------------------


def route_catalogue(x, y):
    """Straight segment, single-bend polyline and quadratic arc from ``x`` to ``y``.

    Each route is parametrized by a chart-length-like parameter, so the three
    have different parameter lengths.  The bend moves coordinate 0 first; the
    arc bulges towards the opposite corner.  Routes that would degenerate
    (``x`` and ``y`` sharing a coordinate) are left out; in one dimension the
    second route is the segment at half speed.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    chord = float(np.linalg.norm(y - x))
    if chord == 0.0:
        raise ArgumentError(f"route endpoints coincide at {tuple(x.tolist())}")
    routes = [segment_path(x, y, (0.0, chord), name="segment")]
    if x.size == 1:
        routes.append(segment_path(x, y, (0.0, 2.0 * chord), name="slow-segment"))
        return routes
    bend = x.copy()
    bend[0] = y[0]
    if np.linalg.norm(bend - x) > 0 and np.linalg.norm(y - bend) > 0:
        routes.append(polyline_path([x, bend, y], name="bend"))
        control = y.copy()
        control[0] = x[0]
        polygon = np.linalg.norm(control - x) + np.linalg.norm(y - control)
        routes.append(quadratic_arc_path(x, control, y, (0.0, 0.5 * (chord + polygon)), name="arc"))
    return routes


def canonical_route(x0, x):
    """Axis-aligned polyline from ``x0`` to ``x`` changing one coordinate at a time, in order.

    Returns None when the two points coincide.
    """
    x0, x = np.asarray(x0, dtype=float), np.asarray(x, dtype=float)
    points = [x0.copy()]
    for i in range(x0.size):
        if x[i] != points[-1][i]:
            nxt = points[-1].copy()
            nxt[i] = x[i]
            points.append(nxt)
    if len(points) == 1:
        return None
    return polyline_path(points, name="canonical")


def _canonical_transport(provider, x0, x, steps=None):
    route = canonical_route(x0, x)
    if route is None:
        return np.eye(provider.fibre_dim)
    return _full_transport(provider, route, steps)


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


def _check_region(region):
    region = tuple((float(lo), float(hi)) for lo, hi in region)
    for lo, hi in region:
        if not hi > lo:
            raise ArgumentError(f"region interval ({lo}, {hi}) is empty")
    return region


def grid_nodes(region, resolution):
    if resolution < 2:
        raise ArgumentError(f"grid resolution must be at least 2, got {resolution}")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in _check_region(region)]
    return [np.array(p) for p in itertools.product(*axes)]


def _endpoint_pairs(region, resolution, extra_pairs, seed):
    """Box diagonals plus seeded grid-node pairs that differ in every coordinate."""
    region = _check_region(region)
    lo = np.array([a for a, _ in region])
    hi = np.array([b for _, b in region])
    pairs = [(lo, hi)]
    if lo.size > 1:
        flipped_lo, flipped_hi = lo.copy(), hi.copy()
        flipped_lo[1], flipped_hi[1] = hi[1], lo[1]
        pairs.append((flipped_lo, flipped_hi))
    nodes = grid_nodes(region, resolution)
    candidates = [(p, q) for p, q in itertools.combinations(nodes, 2) if np.all(p != q)]
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(candidates), size=min(extra_pairs, len(candidates)), replace=False)
    pairs.extend(candidates[i] for i in sorted(picks))
    return pairs


# ---------------------------------------------------------------------------
# Flat frame
# ---------------------------------------------------------------------------


def construct_flat_frame(provider, region, basepoint, seed_basis, resolution=3, tolerance=1e-7,
                         spot_checks=4, seed=0, steps=None):
    """Frame field obtained by transporting ``seed_basis`` from ``basepoint`` along canonical routes.

    Before building, the canonical route to a few seeded grid nodes is
    compared against the straight segment; a gap above ``tolerance`` raises
    :class:`NotFlatError` with that gap and the two route names.
    """
    region = _check_region(region)
    x0 = np.asarray(basepoint, dtype=float)
    E0 = np.asarray(seed_basis, dtype=float)
    n = provider.fibre_dim
    if E0.shape != (n, n) or np.linalg.cond(E0) > 1e12:
        raise ArgumentError(f"seed basis must be an invertible {n}x{n} matrix")
    if any(not lo <= v <= hi for v, (lo, hi) in zip(x0, region)):
        raise ArgumentError(f"basepoint {tuple(x0.tolist())} lies outside the region")

    nodes = [p for p in grid_nodes(region, resolution) if np.count_nonzero(p != x0) >= 2]
    rng = np.random.default_rng(seed)
    for i in sorted(rng.choice(len(nodes), size=min(spot_checks, len(nodes)), replace=False)):
        target = nodes[i]
        route = canonical_route(x0, target)
        straight = segment_path(x0, target, (0.0, float(np.linalg.norm(target - x0))), name="segment")
        defect = path_independence_defect(provider, route, straight, steps)
        if defect > tolerance:
            raise NotFlatError(
                f"not flat: canonical route and straight segment to {tuple(target.tolist())} "
                f"differ by {defect:.3e}", defect, (route.name, straight.name))

    @functools.lru_cache(maxsize=None)
    def basis(key):
        return _canonical_transport(provider, x0, np.array(key), steps) @ E0

    return FrameField(basis_at=lambda x: basis(tuple(float(v) for v in x)), name=f"flat:{provider.name}")


def frame_transport(provider, frame, path, steps=None):
    """Transport along ``path`` expressed in ``frame``: ``E(end)^{-1} H E(start)``."""
    H = _full_transport(provider, path, steps)
    return np.linalg.solve(frame(path.end), H @ frame(path.start))


def flat_frame_residual(provider, frame, points, steps=None):
    """Largest ``||E(y)^{-1} H(y, x) E(x) - I||`` over ordered pairs, along canonical routes."""
    worst = 0.0
    for x, y in itertools.permutations(points, 2):
        route = canonical_route(x, y)
        if route is None:
            continue
        gap = frame_transport(provider, frame, route, steps) - np.eye(provider.fibre_dim)
        worst = max(worst, float(np.linalg.norm(gap)))
    return worst


# ---------------------------------------------------------------------------
# Verdict
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlatnessReport:
    """Both flatness criteria over a box.

    ``equivalence_expected`` is set for connection-induced providers, where
    the two verdicts must agree; for path-functional ones a disagreement is
    recorded but not treated as a failure.
    """

    provider: str
    curvature_sup: float
    curvature_at: tuple
    path_defect: float
    path_defect_at: tuple
    flat_by_curvature: bool
    flat_by_paths: bool
    equivalence_expected: bool
    tolerances: dict

    @property
    def consistent(self):
        return self.flat_by_curvature == self.flat_by_paths

    @property
    def discrepancy_flag(self):
        return not self.consistent

    def as_dict(self):
        return {
            "provider": self.provider,
            "curvature_sup": self.curvature_sup,
            "curvature_at": list(self.curvature_at),
            "path_defect": self.path_defect,
            "path_defect_at": [list(v) if isinstance(v, tuple) else v for v in self.path_defect_at],
            "flat_by_curvature": self.flat_by_curvature,
            "flat_by_paths": self.flat_by_paths,
            "consistent": self.consistent,
            "equivalence_expected": self.equivalence_expected,
            "tolerances": dict(self.tolerances),
        }


def _curvature_at_node(provider, region, x, fd_step):
    worst, where = 0.0, None
    for i, j in itertools.combinations(range(len(region)), 2):
        ei, ej = np.eye(len(region))[i], np.eye(len(region))[j]
        origin = x.copy()
        origin[i] = origin[j] = 0.0
        family = affine_family(origin, ei, ej, (region[i], region[j]), name=f"coords{i}{j}")
        norm = float(np.linalg.norm(curvature_matrix(provider, family, x[i], x[j], fd_step).value))
        if norm > worst or where is None:
            worst, where = norm, (tuple(float(v) for v in x), (i, j))
    return worst, where


def _route_steps(path, per_unit):
    if per_unit is None:
        return None
    a, b = path.domain
    return default_steps(a, b, per_unit)


def _pair_defect(provider, pair, steps_per_unit):
    x, y = pair
    routes = route_catalogue(x, y)
    worst, names = 0.0, None
    for r1, r2 in itertools.combinations(routes, 2):
        H1 = _full_transport(provider, r1, _route_steps(r1, steps_per_unit))
        H2 = _full_transport(provider, r2, _route_steps(r2, steps_per_unit))
        d = float(np.linalg.norm(H1 - H2))
        if d > worst or names is None:
            worst, names = d, (r1.name, r2.name)
    return worst, (tuple(float(v) for v in x), tuple(float(v) for v in y), names)


def flatness_verdict(provider, region, tolerances=None, resolution=3, extra_pairs=2, seed=0,
                     steps_per_unit=None, fd_step=1e-4, workers=None):
    """Curvature supremum over grid nodes and coordinate planes, and the largest
    path-independence defect over the route catalogue for a fixed set of endpoint pairs.

    Endpoint pairs are the box diagonals plus ``extra_pairs`` grid-node pairs
    drawn with ``seed``.
    """
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    region = _check_region(region)

    nodes = grid_nodes(region, resolution)
    if len(region) < 2:
        curv_sup, curv_at = 0.0, ()
    else:
        samples = ordered_map(lambda x: _curvature_at_node(provider, region, x, fd_step), nodes, workers)
        curv_sup, curv_at = max(samples, key=lambda r: r[0])

    pairs = _endpoint_pairs(region, resolution, extra_pairs, seed)
    defects = ordered_map(lambda p: _pair_defect(provider, p, steps_per_unit), pairs, workers)
    path_sup, path_at = max(defects, key=lambda r: r[0])

    return FlatnessReport(
        provider=provider.name,
        curvature_sup=curv_sup,
        curvature_at=curv_at,
        path_defect=path_sup,
        path_defect_at=path_at,
        flat_by_curvature=curv_sup <= tol["curvature"],
        flat_by_paths=path_sup <= tol["paths"],
        equivalence_expected=provider.kind is ProviderKind.CONNECTION,
        tolerances=tol,
    )
