"""Least-squares order fits on log-log data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError

FLOOR = 10 * np.finfo(float).eps


@dataclass(frozen=True)
class ConvergenceFit:
    """Least-squares line through ``(log h, log residual)``.

    ``slope`` and ``intercept`` are None when the residuals sit at the
    roundoff floor.
    """

    slope: float | None
    intercept: float | None
    points: tuple
    at_floor: bool = False

    def order_at_least(self, minimum):
        return self.at_floor or (self.slope is not None and self.slope >= minimum)

    def order_within(self, target, tol):
        return self.at_floor or (self.slope is not None and abs(self.slope - target) <= tol)


def convergence_order(samples, floor=FLOOR):
    samples = [(float(h), float(r)) for h, r in samples]
    if len(samples) < 3:
        raise ArgumentError(f"need at least 3 samples for an order fit, got {len(samples)}")
    for h, r in samples:
        if not h > 0 or not np.isfinite(h):
            raise ArgumentError(f"step sizes must be positive, got {h}")
        if r < 0 or not np.isfinite(r):
            raise ArgumentError(f"residuals must be finite and non-negative, got {r}")
    if any(r <= floor for _, r in samples):
        return ConvergenceFit(None, None, tuple(samples), at_floor=True)
    logh = np.log([h for h, _ in samples])
    logr = np.log([r for _, r in samples])
    slope, intercept = np.polyfit(logh, logr, 1)
    return ConvergenceFit(float(slope), float(intercept), tuple(samples))


def fd_roundoff_floor(fd_step, scale=1.0):
    """Roundoff level of a difference quotient with step ``fd_step`` on values of size ``scale``."""
    return 64 * np.finfo(float).eps * max(scale, 1.0) / fd_step
