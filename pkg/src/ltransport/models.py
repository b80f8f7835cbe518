"""Built-in coefficient providers, frame maps and families with known behavior."""

from __future__ import annotations

import json
import re

import numpy as np
from scipy.linalg import expm

from .bundle_model import CoefficientProvider, Family, FrameMap, ProviderKind, segment_path
from .errors import ArgumentError, ConfigurationError, DomainError
from .numerics import fd_derivative

ROTATION_GENERATOR = np.array([[0.0, -1.0], [1.0, 0.0]])
SPHERE_POLE_BAND = 0.2
DEFAULT_TORSION = 0.25


def make_flat(n=2, m=2):
    zeros = np.zeros((n, n, m))
    dzeros = np.zeros((n, n, m, m))
    return CoefficientProvider(
        kind=ProviderKind.CONNECTION, fibre_dim=n, base_dim=m, name="flat",
        gamma3=lambda x: zeros, d_gamma3=lambda x: dzeros, params={"n": n, "m": m},
    )


def make_constant_coefficient(G=ROTATION_GENERATOR, base_dim=None):
    """Path-functional provider with the same coefficient matrix on every path."""
    G = np.array(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ArgumentError(f"constant coefficient must be square, got shape {G.shape}")
    if not np.all(np.isfinite(G)):
        raise ArgumentError("constant coefficient must be finite")
    n = G.shape[0]
    zero = np.zeros_like(G)
    return CoefficientProvider(
        kind=ProviderKind.PATH_FUNCTIONAL, fibre_dim=n, base_dim=base_dim or n, name="constant",
        coeff_fn=lambda path, s: G, d_coeff_fn=lambda path, s: zero,
        params={"G": G.tolist()},
    )


def make_scalar_ramp(rate=1.0):
    """One-dimensional path-functional provider with ``Gamma(s) = [rate * s]``."""
    return CoefficientProvider(
        kind=ProviderKind.PATH_FUNCTIONAL, fibre_dim=1, base_dim=1, name="ramp",
        coeff_fn=lambda path, s: np.array([[rate * s]]),
        d_coeff_fn=lambda path, s: np.array([[rate]]),
        params={"rate": rate},
    )


def _sphere_theta(x):
    theta = float(x[0])
    if not SPHERE_POLE_BAND <= theta <= np.pi - SPHERE_POLE_BAND:
        raise DomainError(f"theta={theta} outside the sphere chart "
                          f"[{SPHERE_POLE_BAND}, pi - {SPHERE_POLE_BAND}]")
    return theta


def make_sphere_levi_civita():
    """Levi-Civita connection of the unit sphere in (theta, phi) coordinates."""

    def gamma3(x):
        th = _sphere_theta(x)
        g = np.zeros((2, 2, 2))
        g[0, 1, 1] = -np.sin(th) * np.cos(th)
        g[1, 0, 1] = g[1, 1, 0] = np.cos(th) / np.sin(th)
        return g

    def d_gamma3(x):
        th = _sphere_theta(x)
        d = np.zeros((2, 2, 2, 2))
        d[0, 1, 1, 0] = -np.cos(2 * th)
        d[1, 0, 1, 0] = d[1, 1, 0, 0] = -1.0 / np.sin(th) ** 2
        return d

    return CoefficientProvider(
        kind=ProviderKind.CONNECTION, fibre_dim=2, base_dim=2, name="sphere",
        gamma3=gamma3, d_gamma3=d_gamma3,
    )


def make_constant_torsion_plane(c=DEFAULT_TORSION):
    """Plane connection whose only nonzero symbol is the (1; 1, 2) entry ``c``."""
    c = float(c)
    if not np.isfinite(c):
        raise ArgumentError("torsion constant must be finite")
    g = np.zeros((2, 2, 2))
    g[0, 0, 1] = c
    dzeros = np.zeros((2, 2, 2, 2))
    return CoefficientProvider(
        kind=ProviderKind.CONNECTION, fibre_dim=2, base_dim=2, name="torsion_plane",
        gamma3=lambda x: g, d_gamma3=lambda x: dzeros, params={"c": c},
    )


# ---------------------------------------------------------------------------
# Frame maps
# ---------------------------------------------------------------------------


def identity_frame(n=2):
    eye, zero = np.eye(n), np.zeros((n, n))
    return FrameMap(lambda path, s: eye, lambda path, s: zero, name="identity")


def rotation_frame(G=ROTATION_GENERATOR):
    G = np.array(G, dtype=float)
    return FrameMap(lambda path, s: expm(s * G), lambda path, s: G @ expm(s * G), name="rotation")


def diag_exp_frame(rates=(1.0, 2.0)):
    r = np.array(rates, dtype=float)
    return FrameMap(lambda path, s: np.diag(np.exp(r * s)),
                    lambda path, s: np.diag(r * np.exp(r * s)), name="diag_exp")


def shear_frame():
    """Frame depending on the base point only: ``[[1, x0], [0, 1]]``."""

    def frame(path, s):
        x = np.asarray(path.point(s), dtype=float)
        return np.array([[1.0, x[0]], [0.0, 1.0]])

    def d_frame(path, s):
        v = np.asarray(path.velocity(s), dtype=float)
        return np.array([[0.0, v[0]], [0.0, 0.0]])

    return FrameMap(frame, d_frame, name="shear")


FRAMES = {
    "identity": identity_frame,
    "rotation": rotation_frame,
    "diag_exp": diag_exp_frame,
    "shear": shear_frame,
}


def make_frame_map_transport(fm, base_dim=None):
    """Provider whose coefficient matrix is ``F^{-1} dF/ds``.

    Its transport reproduces ``F(t)^{-1} F(s)``.
    """

    def dF(path, s):
        if fm.d_frame is not None:
            return np.asarray(fm.d_frame(path, s), dtype=float)
        return fd_derivative(lambda u: fm(path, u), s, max(1e-6, 1e-6 * abs(s)), bounds=path.domain)

    def coeff(path, s):
        return np.linalg.solve(fm(path, s), dF(path, s))

    probe = segment_path(np.zeros(base_dim or 2), np.ones(base_dim or 2))
    n = fm(probe, 0.0).shape[0]
    return CoefficientProvider(
        kind=ProviderKind.PATH_FUNCTIONAL, fibre_dim=n, base_dim=base_dim or n,
        name=f"frame:{fm.name}", coeff_fn=coeff, params={"frame": fm.name},
    )


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


def coordinate_family(domain=((0.0, 1.0), (0.0, 1.0)), name="coords"):
    """The chart itself: ``(s, t) -> (s, t)``."""
    e0, e1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    hess = np.zeros((2, 2, 2))
    return Family(
        domain=tuple(tuple(float(v) for v in iv) for iv in domain),
        point=lambda s, t: np.array([s, t], dtype=float),
        d_s=lambda s, t: e0.copy(), d_t=lambda s, t: e1.copy(),
        hessian=lambda s, t: hess, name=name,
    )


def affine_family(origin, u, v, domain=((0.0, 1.0), (0.0, 1.0)), name="affine"):
    """``(s, t) -> origin + s u + t v``."""
    o, u, v = (np.asarray(w, dtype=float) for w in (origin, u, v))
    hess = np.zeros((o.size, 2, 2))
    return Family(
        domain=tuple(tuple(float(x) for x in iv) for iv in domain),
        point=lambda s, t: o + s * u + t * v,
        d_s=lambda s, t: u.copy(), d_t=lambda s, t: v.copy(),
        hessian=lambda s, t: hess, name=name,
    )


def _phi1(X):
    """``(exp(X) - I) X^{-1}`` without inverting ``X`` (augmented exponential)."""
    n = X.shape[0]
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = X
    big[:n, n:] = np.eye(n)
    return expm(big)[:n, n:]


def constant_l_path_family(G, a, b, origin=(0.0, 0.0), center=(0.0, 0.0),
                           domain=((-1.0, 1.0), (-1.0, 1.0))):
    """Family of paths of a constant-coefficient transport that carry their own tangents.

    Row tangents are ``exp(-(s - s0) G) a`` and column tangents
    ``exp(-(t - t0) G) b``, so transporting a tangent along its own path
    returns the tangent there.
    """
    G = np.asarray(G, dtype=float)
    a, b, x0 = (np.asarray(w, dtype=float) for w in (a, b, origin))
    s0, t0 = center

    def point(s, t):
        ds, dt = s - s0, t - t0
        return x0 + ds * _phi1(-ds * G) @ a + dt * _phi1(-dt * G) @ b

    return Family(
        domain=tuple(tuple(float(x) for x in iv) for iv in domain),
        point=point,
        d_s=lambda s, t: expm(-(s - s0) * G) @ a,
        d_t=lambda s, t: expm(-(t - t0) * G) @ b,
        name="l-paths",
    )


# ---------------------------------------------------------------------------
# Name lookup for configs and the command line
# ---------------------------------------------------------------------------

_MODEL_RE = re.compile(r"^\s*(?P<name>[a-z_]+)\s*(\{(?P<body>.*)\})?\s*$", re.S)


def _parse_body(body):
    body = body.strip()
    if not body:
        return {}
    if "=" not in body:
        try:
            return {"_": json.loads(body)}
        except json.JSONDecodeError:
            return {"_": body}
    params = {}
    for item in body.split(";"):
        key, _, value = item.partition("=")
        try:
            params[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            params[key.strip()] = value.strip()
    return params


def parse_model_name(text):
    """``"torsion_plane{c=0.5}"`` -> ``("torsion_plane", {"c": 0.5})``."""
    m = _MODEL_RE.match(text)
    if not m:
        raise ConfigurationError(f"cannot parse model name {text!r}")
    return m.group("name"), _parse_body(m.group("body") or "")


POSITIONAL_PARAM = {"constant": "G", "torsion_plane": "c", "ramp": "rate", "frame": "frame"}


def canonical_params(name, params):
    """Replace a bare ``{value}`` parameter by its named form."""
    params = dict(params or {})
    if "_" in params and name in POSITIONAL_PARAM:
        params[POSITIONAL_PARAM[name]] = params.pop("_")
    return params


def build_model(name, params=None):
    """Provider for a zoo name plus numeric parameters."""
    params = dict(params or {})
    positional = params.pop("_", None)
    if name == "flat":
        return make_flat(int(params.get("n", 2)), int(params.get("m", params.get("n", 2))))
    if name == "constant":
        G = params.get("G", positional if positional is not None else ROTATION_GENERATOR)
        return make_constant_coefficient(G)
    if name == "sphere":
        return make_sphere_levi_civita()
    if name == "torsion_plane":
        return make_constant_torsion_plane(params.get("c", positional if positional is not None else DEFAULT_TORSION))
    if name == "ramp":
        return make_scalar_ramp(params.get("rate", positional if positional is not None else 1.0))
    if name == "frame":
        frame_name = params.get("frame", positional or "rotation")
        if frame_name not in FRAMES:
            raise ConfigurationError(f"unknown frame {frame_name!r}; choose from {sorted(FRAMES)}")
        return make_frame_map_transport(FRAMES[frame_name]())
    raise ConfigurationError(f"unknown model {name!r}")


def frame_map_for(provider):
    """The frame map behind a ``frame:*`` provider, or None."""
    name = provider.params.get("frame")
    return FRAMES[name]() if name else None


def default_region(provider):
    """Parameter box used when a config gives none."""
    if provider.name == "sphere":
        return ((np.pi / 2 - 0.5, np.pi / 2 + 0.5), (0.5, 1.5))
    return tuple((0.0, 1.0) for _ in range(provider.base_dim))


def zoo():
    """Default instance of every built-in model, keyed by display name."""
    return {
        "flat": make_flat(),
        "constant": make_constant_coefficient(),
        "sphere": make_sphere_levi_civita(),
        "torsion_plane": make_constant_torsion_plane(),
        "ramp": make_scalar_ramp(),
        "frame:rotation": build_model("frame", {"frame": "rotation"}),
        "frame:diag_exp": build_model("frame", {"frame": "diag_exp"}),
        "frame:shear": build_model("frame", {"frame": "shear"}),
    }
