"""Analytic flow-patch models and synthetic point-cloud samplers.

The flow torus is the image of

    f(alpha, theta) = cos(theta) (cos(alpha) e1u + sin(alpha) e2u)
                    + sin(theta) (cos(alpha) e1v + sin(alpha) e2v)

where alpha is the orientation of a step edge in a range patch and theta the
direction of camera translation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import cdist

from .patches import FlowBasis, dct_flow_basis

TWO_PI = 2 * math.pi
SHAPES = ("circle", "horizontal_circle", "flow_torus", "klein_control")


def _basis(basis):
    return dct_flow_basis() if basis is None else basis


def range_primary_circle(alpha, basis: FlowBasis | None = None) -> np.ndarray:
    """Range patch ``cos(alpha) e1 + sin(alpha) e2`` (vectorized over alpha)."""
    b = _basis(basis)
    alpha = np.asarray(alpha, dtype=float)
    return np.cos(alpha)[..., None] * b.scalar[0] + np.sin(alpha)[..., None] * b.scalar[1]


def flow_from_range(range_patch, theta, gain=1.0, drift=(0.0, 0.0)) -> np.ndarray:
    """Flow of a camera translating in direction ``theta`` over a range patch.

    Every pixel moves parallel to ``(cos theta, sin theta)`` with magnitude
    ``gain * range`` plus a constant ``drift`` vector.
    """
    gain = np.asarray(gain, dtype=float)
    if np.any(gain <= 0):
        raise ValueError("gain must be positive")
    r = np.asarray(range_patch, dtype=float)
    theta = np.asarray(theta, dtype=float)
    drift = np.asarray(drift, dtype=float)
    mag = gain[..., None] * r
    u = mag * np.cos(theta)[..., None] + drift[..., 0:1]
    v = mag * np.sin(theta)[..., None] + drift[..., 1:2]
    return np.concatenate([u, v], axis=-1)


def flow_torus_map(alpha, theta, basis: FlowBasis | None = None) -> np.ndarray:
    """f(alpha, theta) in R^18; broadcasts over array arguments."""
    b = _basis(basis)
    alpha, theta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(theta, float))
    edge = range_primary_circle(alpha, b)
    return np.concatenate(
        [np.cos(theta)[..., None] * edge, np.sin(theta)[..., None] * edge], axis=-1
    )


def klein_embedding(u, v) -> np.ndarray:
    """Tube embedding of the Klein bottle in R^4."""
    u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
    return np.stack(
        [
            (2 + np.cos(v)) * np.cos(u),
            (2 + np.cos(v)) * np.sin(u),
            np.sin(v) * np.cos(u / 2),
            np.sin(v) * np.sin(u / 2),
        ],
        axis=-1,
    )


def _klein_area_element(v):
    # |dK/du| and |dK/dv| are orthogonal; |dK/dv| = 1
    return np.sqrt((2 + np.cos(v)) ** 2 + np.sin(v) ** 2 / 4)


def _klein_params(n, rng):
    """Parameters whose image is uniform in surface area (rejection sampling)."""
    u_out, v_out = [], []
    top = _klein_area_element(0.0)
    need = n
    while need > 0:
        v = rng.uniform(0, TWO_PI, 2 * need + 16)
        u = rng.uniform(0, TWO_PI, len(v))
        keep = rng.uniform(0, top, len(v)) < _klein_area_element(v)
        u_out.append(u[keep][:need])
        v_out.append(v[keep][:need])
        need -= len(u_out[-1])
    return np.concatenate(u_out), np.concatenate(v_out)


def shear_coordinates(alpha, theta):
    """(alpha, theta - alpha mod 2 pi)."""
    return np.mod(alpha, TWO_PI), np.mod(np.asarray(theta) - alpha, TWO_PI)


def unshear_coordinates(alpha, s):
    return np.mod(alpha, TWO_PI), np.mod(np.asarray(s) + alpha, TWO_PI)


def _params(n, layout, rng):
    """n angle pairs on [0, 2pi)^2, either uniform random or a square-ish grid."""
    if layout == "random":
        return rng.uniform(0, TWO_PI, n), rng.uniform(0, TWO_PI, n)
    if layout == "grid":
        side = max(1, int(math.isqrt(n)))
        while n % side:
            side -= 1
        a, b = np.meshgrid(
            np.arange(n // side) * TWO_PI / (n // side), np.arange(side) * TWO_PI / side, indexing="ij"
        )
        return a.ravel(), b.ravel()
    raise ValueError(f"unknown layout {layout!r}")


def sample_cloud(
    shape: str,
    n: int,
    noise_sigma: float = 0.05,
    seed: int = 0,
    layout: str | None = None,
    basis: FlowBasis | None = None,
) -> np.ndarray:
    """Sample ``n`` points from one of the model shapes.

    ``circle`` lives in R^2, ``klein_control`` in R^4, the flow shapes in
    R^18. Gaussian noise of standard deviation ``noise_sigma`` is added to
    every ambient coordinate. Circles default to an evenly spaced layout,
    surfaces to uniform random sampling by area (for the flow torus that is
    uniform in the parameters, since the map is a flat isometric embedding).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    if shape in ("circle", "horizontal_circle"):
        layout = layout or "grid"
        if layout == "grid":
            t = np.arange(n) * TWO_PI / n
        elif layout == "random":
            t = rng.uniform(0, TWO_PI, n)
        else:
            raise ValueError(f"unknown layout {layout!r}")
        if shape == "circle":
            pts = np.stack([np.cos(t), np.sin(t)], axis=1)
        else:
            pts = flow_torus_map(t, 0.0, basis)
    elif shape == "flow_torus":
        a, th = _params(n, layout or "random", rng)
        pts = flow_torus_map(a, th, basis)
    elif shape == "klein_control":
        if (layout or "random") == "random":
            u, v = _klein_params(n, rng)
        else:
            u, v = _params(n, layout, rng)
        pts = klein_embedding(u, v)
    else:
        raise ValueError(f"unknown shape {shape!r}; choose from {SHAPES}")
    if noise_sigma > 0:
        pts = pts + rng.normal(0.0, noise_sigma, pts.shape)
    return pts


def quotient_identification_check(grid_resolution: int = 36, basis: FlowBasis | None = None) -> dict:
    """Check which parameter pairs the torus map glues together.

    On an ``N x N`` grid of (alpha, theta), measures

    * ``max_violation``: max |f(a, t) - f(a + pi, t + pi)|, expected ~0;
    * ``literal_negation_max``: max |f(a, t) - f(-a, -t)|, the identification
      as sometimes written, which does not hold for this map;
    * ``min_separation``: smallest distance between grid points not related
      by the (a + pi, t + pi) shift.

    Distances are Euclidean in R^18; the basis is orthonormal there too, so
    they agree with the contrast norm.
    """
    if grid_resolution < 2:
        raise ValueError("grid resolution must be at least 2")
    b = _basis(basis)
    N = grid_resolution
    g = np.arange(N) * TWO_PI / N
    A, T = np.meshgrid(g, g, indexing="ij")
    F = flow_torus_map(A, T, b)
    shifted = flow_torus_map(A + np.pi, T + np.pi, b)
    negated = flow_torus_map(-A, -T, b)
    violation = np.linalg.norm(F - shifted, axis=-1).max()
    literal = np.linalg.norm(F - negated, axis=-1).max()

    pts = F.reshape(-1, 18)
    ia, it = np.divmod(np.arange(N * N), N)
    min_sep = np.inf
    chunk = 512
    for s in range(0, len(pts), chunk):
        d = cdist(pts[s:s + chunk], pts)
        da = np.mod(ia[s:s + chunk, None] - ia[None, :], N)
        dt = np.mod(it[s:s + chunk, None] - it[None, :], N)
        same = (da == 0) & (dt == 0)
        related = same
        if N % 2 == 0:
            related = related | ((da == N // 2) & (dt == N // 2))
        d[related] = np.inf
        min_sep = min(min_sep, float(d.min()))
    return {
        "grid_resolution": N,
        "identification": "(alpha, theta) ~ (alpha + pi, theta + pi)",
        "max_violation": float(violation),
        "literal_negation_identification": "(alpha, theta) ~ (-alpha, -theta)",
        "literal_negation_max": float(literal),
        "min_separation": float(min_sep),
        "holds": bool(violation <= 1e-12 and min_sep > 0),
    }
