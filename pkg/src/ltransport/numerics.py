"""Finite-difference helpers shared by the geometry modules."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import DomainError

# Stencils (offsets, weights) for first derivatives.
_CENTRAL = {
    2: ((-1, 1), (-0.5, 0.5)),
    4: ((-2, -1, 1, 2), (1 / 12, -8 / 12, 8 / 12, -1 / 12)),
}
_FORWARD = {
    2: ((0, 1, 2), (-1.5, 2.0, -0.5)),
    4: ((0, 1, 2, 3, 4), (-25 / 12, 48 / 12, -36 / 12, 16 / 12, -3 / 12)),
}


def _inside(x, lo, hi):
    return (lo is None or x >= lo) and (hi is None or x <= hi)


def fd_derivative(f, x, h, order=2, bounds=(None, None)):
    """Derivative of ``f`` at ``x`` by a central stencil of the given order.

    When the central stencil leaves ``bounds`` a one-sided stencil of the
    same order is used instead.  ``f`` may return scalars or arrays.
    """
    lo, hi = bounds
    offsets, weights = _CENTRAL[order]
    reach = max(abs(o) for o in offsets) * h
    if _inside(x - reach, lo, hi) and _inside(x + reach, lo, hi):
        direction = 1.0
    else:
        offsets, weights = _FORWARD[order]
        reach = offsets[-1] * h
        if _inside(x + reach, lo, hi):
            direction = 1.0
        elif _inside(x - reach, lo, hi):
            direction = -1.0
        else:
            raise DomainError(f"no room for a finite-difference stencil at {x} with step {h}")
    total = None
    for o, w in zip(offsets, weights):
        term = w * np.asarray(f(x + direction * o * h), dtype=float)
        total = term if total is None else total + term
    return direction * total / h


def frobenius(a):
    return float(np.linalg.norm(np.asarray(a, dtype=float)))


def ordered_map(fn, items, workers=None):
    """``[fn(x) for x in items]``, optionally on a thread pool; results keep input order."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
