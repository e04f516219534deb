"""From raw patches to dense core subsets X(k, p) and X_theta(k, p).

The stages are: contrast norms, top-contrast selection, contrast and mean
normalization, predominant direction and angle binning, random subsampling,
and the k-nearest-neighbour density core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .models import flow_from_range, range_primary_circle
from .patches import (
    ZERO_CONTRAST_EPS,
    FlowBasis,
    angle_bin_mask,
    contrast_norm,
    dct_flow_basis,
    grid_laplacian,
    normalize,
    predominant_directions,
    project,
    select_top_contrast,
)


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def bin_centers(n_bins: int) -> np.ndarray:
    return np.arange(n_bins) * np.pi / n_bins


@dataclass
class PipelineResult:
    """Normalized high-contrast patches and the core subsets built from them.

    Index arrays (``core``, each entry of ``bin_cores``) point into
    ``normalized``; ``selected`` points into the raw input.
    """

    selected: np.ndarray
    normalized: np.ndarray
    coefficients: np.ndarray
    angles: np.ndarray
    core: np.ndarray | None = None
    thetas: np.ndarray | None = None
    bin_members: list = field(default_factory=list)
    bin_cores: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def core_points(self):
        return self.normalized[self.core]

    def bin_points(self, b):
        return self.normalized[self.bin_cores[b]]


def _core(points, idx, k, p, cap, seed, stage):
    if len(idx) == 0:
        raise StageError(stage, "no patches left")
    sub = idx[geometry.random_subsample(len(idx), cap, seed)]
    if k > len(sub) - 1:
        raise StageError(stage, f"k={k} needs more than {len(sub)} patches")
    return sub[geometry.densest_core_points(points[sub], k, p)]


def run_pipeline(patches, q=0.2, k=300, p=50.0, n_bins=12, halfwidth=math.pi / 12,
                 subsample=50_000, seed=0, binned=True, global_core=True,
                 basis: FlowBasis | None = None) -> PipelineResult:
    """Run every stage on an ``(n, 18)`` array of raw patches."""
    patches = np.atleast_2d(np.asarray(patches, dtype=float))
    D = grid_laplacian()
    basis = basis or dct_flow_basis(D)
    if len(patches) == 0:
        raise StageError("contrast", "no input patches")

    top = select_top_contrast(patches, q, D)
    top = top[contrast_norm(patches[top], D) > ZERO_CONTRAST_EPS]
    if len(top) == 0:
        raise StageError("contrast", "every selected patch has zero contrast")
    top = np.sort(top)
    normed = normalize(patches[top], D)
    coeffs = project(normed, basis)
    angles = predominant_directions(normed)

    result = PipelineResult(top, normed, coeffs, angles, params=dict(
        q=q, k=k, p=p, n_bins=n_bins, halfwidth=halfwidth, subsample=subsample, seed=seed))
    everything = np.arange(len(normed))
    if global_core:
        result.core = _core(normed, everything, k, p, subsample, seed, "core")
    if binned:
        result.thetas = bin_centers(n_bins)
        for b, theta in enumerate(result.thetas):
            members = everything[angle_bin_mask(angles, theta, halfwidth)]
            result.bin_members.append(members)
            result.bin_cores.append(
                _core(normed, members, k, p, subsample, seed + 1 + b, f"bin {b} core"))
    return result


def synthetic_flow_patches(n: int, directions="all", model_fraction=0.2, gain=(0.5, 2.0),
                           drift_sigma=1.0, noise_sigma=0.02, background_sigma=0.02,
                           seed=0, basis: FlowBasis | None = None):
    """Flow patches from camera translation over primary-circle range patches.

    A ``model_fraction`` share of patches come from translating in direction
    theta over the step-edge range patch at angle alpha, with random gain,
    constant drift and Gaussian noise; the rest are low-contrast background
    (drift plus noise). ``directions`` is ``"all"`` for theta uniform on the
    circle, ``"horizontal"`` for theta in {0, pi}, or an explicit sequence.

    Returns ``(patches, params)``; ``params`` is ``(n, 2)`` holding
    (alpha, theta) for model patches and NaN for background.
    """
    rng = np.random.default_rng(seed)
    n_model = int(round(model_fraction * n))
    alpha = rng.uniform(0, 2 * np.pi, n_model)
    if isinstance(directions, str) and directions == "all":
        theta = rng.uniform(0, 2 * np.pi, n_model)
    elif isinstance(directions, str) and directions == "horizontal":
        theta = rng.choice([0.0, np.pi], n_model)
    else:
        theta = rng.choice(np.asarray(directions, dtype=float), n_model)
    g = rng.uniform(gain[0], gain[1], n_model)
    drift = rng.normal(0.0, drift_sigma, (n_model, 2))
    model = flow_from_range(range_primary_circle(alpha, basis), theta, g, drift)
    model += rng.normal(0.0, noise_sigma, model.shape)

    n_bg = n - n_model
    bg = np.repeat(rng.normal(0.0, drift_sigma, (n_bg, 2)), 9, axis=1)
    bg += rng.normal(0.0, background_sigma, bg.shape)

    patches = np.vstack([model, bg])
    params = np.vstack([np.stack([alpha, theta], axis=1), np.full((n_bg, 2), np.nan)])
    order = rng.permutation(n)
    return patches[order], params[order]
