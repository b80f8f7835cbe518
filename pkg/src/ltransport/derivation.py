"""Derivation of sections along a path induced by a transport."""

import numpy as np

from .bundle_model import Section
from .transport import propagate


def _as_section(sec, path):
    if isinstance(sec, Section):
        return sec
    return Section(components=sec, along=path)


def derive_section(provider, path, sec, s):
    """Component form ``sigma'(s) + Gamma(s) sigma(s)``.

    ``sec`` is a :class:`Section` over the path or a bare callable of ``s``.
    """
    sec = _as_section(sec, path)
    path.require(s)
    value = sec(s)
    return sec.partial(0, s) + provider.coeff(path, s) @ value


def derive_section_limit(provider, path, sec, s, eps, steps=None):
    """Symmetric-difference version of the defining limit.

    Pulls ``sigma(s +- eps)`` back to ``s`` with the transport and takes the
    central difference; converges to :func:`derive_section` as O(eps^2).
    """
    sec = _as_section(sec, path)
    path.require(s - eps, s + eps)
    ahead = propagate(provider, path, s + eps, s, steps) @ sec(s + eps)
    behind = propagate(provider, path, s - eps, s, steps) @ sec(s - eps)
    return (ahead - behind) / (2.0 * eps)


def transported_section(provider, path, s0, u, steps_per_unit=None):
    """The section ``s -> H(s, s0) u``; annihilated by the derivation."""
    u = np.asarray(u, dtype=float)

    def components(s):
        if steps_per_unit is None:
            return propagate(provider, path, s0, s) @ u
        steps = max(1, int(np.ceil(steps_per_unit * abs(s - s0))))
        return propagate(provider, path, s0, s, steps) @ u

    return Section(components=components, along=path)
