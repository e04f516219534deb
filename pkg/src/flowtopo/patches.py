"""Contrast normalization, DCT flow coordinates and predominant direction.

All patch arrays use the 18-vector layout ``(u1..u9, v1..v9)``, pixels
numbered down each column of the 3x3 patch. Functions accept a single
patch of shape ``(18,)`` or a batch of shape ``(n, 18)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

ZERO_CONTRAST_EPS = 1e-8
ISOTROPY_GAP = 1e-6


class ZeroContrast(ValueError):
    pass


class ZeroMatrix(ValueError):
    pass


class EmptyInput(ValueError):
    pass


def grid_edges() -> list[tuple[int, int]]:
    """The 12 pairs of 4-adjacent pixels of a 3x3 patch (0-based indices)."""
    edges = []
    for col in range(3):
        for row in range(3):
            i = 3 * col + row
            if row < 2:
                edges.append((i, i + 1))
            if col < 2:
                edges.append((i, i + 3))
    return sorted(edges)


def grid_laplacian() -> np.ndarray:
    """Graph Laplacian of the 3x3 grid, so that ``w @ D @ w`` sums squared
    differences over adjacent pixels."""
    D = np.zeros((9, 9))
    for i, j in grid_edges():
        D[i, i] += 1
        D[j, j] += 1
        D[i, j] -= 1
        D[j, i] -= 1
    return D


def _split(x):
    x = np.asarray(x, dtype=float)
    return x[..., :9], x[..., 9:]


def contrast_norm(x, D=None):
    """sqrt(u'Du + v'Dv) for one patch or each row of a batch."""
    D = grid_laplacian() if D is None else D
    u, v = _split(x)
    sq = np.einsum("...i,ij,...j->...", u, D, u) + np.einsum("...i,ij,...j->...", v, D, v)
    return np.sqrt(np.maximum(sq, 0.0))


def select_top_contrast(patches, q: float, D=None) -> np.ndarray:
    """Indices of the ``ceil(q * N)`` highest-contrast patches.

    Ties keep input order. The returned indices are in descending order of
    contrast.
    """
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    patches = np.atleast_2d(np.asarray(patches, dtype=float))
    if patches.size == 0:
        raise EmptyInput("no patches to select from")
    norms = contrast_norm(patches, D)
    keep = math.ceil(q * len(patches) - 1e-9)
    order = np.argsort(-norms, kind="stable")
    return order[:keep]


def normalize(x, D=None, eps: float = ZERO_CONTRAST_EPS) -> np.ndarray:
    """Divide by the contrast norm, then subtract the mean u and mean v.

    Raises ZeroContrast if any input has contrast norm ``<= eps``.
    """
    x = np.asarray(x, dtype=float)
    norms = contrast_norm(x, D)
    if np.any(norms <= eps):
        raise ZeroContrast("patch contrast norm is (numerically) zero")
    y = x / norms[..., None]
    u, v = _split(y)
    return np.concatenate(
        [u - u.mean(axis=-1, keepdims=True), v - v.mean(axis=-1, keepdims=True)], axis=-1
    )


@dataclass(frozen=True)
class FlowBasis:
    """D-orthonormal DCT basis of mean-zero 3x3 scalar patches and its flow lifts.

    ``scalar[i]`` is e_{i+1}; ``u[i]`` and ``v[i]`` are the horizontal and
    vertical flow versions in R^18. ``freqs[i]`` is the (m, n) DCT frequency
    pair, m along the columns of the patch and n along the rows.
    """

    scalar: np.ndarray
    u: np.ndarray
    v: np.ndarray
    eigenvalues: np.ndarray
    freqs: tuple
    laplacian: np.ndarray

    @property
    def flow(self) -> np.ndarray:
        """All 16 flow vectors, ``e1u..e8u, e1v..e8v``, as rows."""
        return np.vstack([self.u, self.v])


def _dct_function(m: int, n: int) -> np.ndarray:
    out = np.empty(9)
    for col in range(3):
        for row in range(3):
            out[3 * col + row] = math.cos(m * math.pi * (2 * col + 1) / 6) * math.cos(
                n * math.pi * (2 * row + 1) / 6
            )
    return out


def dct_flow_basis(D=None) -> FlowBasis:
    """Build e_1..e_8 and the lifted flow vectors e_i^u, e_i^v.

    e_1 is the horizontal gradient and e_2 the vertical one; both are signed
    to increase with column (resp. row) index. The rest follow by
    increasing Laplacian eigenvalue, then lexicographic frequency.
    """
    D = grid_laplacian() if D is None else D
    freqs = [(m, n) for m in range(3) for n in range(3) if (m, n) != (0, 0)]
    eig = {mn: (2 - 2 * math.cos(mn[0] * math.pi / 3)) + (2 - 2 * math.cos(mn[1] * math.pi / 3)) for mn in freqs}
    rest = sorted((mn for mn in freqs if mn not in ((1, 0), (0, 1))), key=lambda mn: (round(eig[mn], 9), mn))
    order = [(1, 0), (0, 1)] + rest

    scalar = []
    for mn in order:
        b = _dct_function(*mn)
        b = b - b.mean()
        b = b / math.sqrt(b @ D @ b)
        scalar.append(b)
    scalar = np.array(scalar)
    # cos(pi(2x+1)/6) decreases in x; flip the two gradients to increase
    scalar[:2] *= -1
    zeros = np.zeros_like(scalar)
    return FlowBasis(
        scalar=scalar,
        u=np.hstack([scalar, zeros]),
        v=np.hstack([zeros, scalar]),
        eigenvalues=np.array([eig[mn] for mn in order]),
        freqs=tuple(order),
        laplacian=D,
    )


def project(x, basis: FlowBasis) -> np.ndarray:
    """D-inner-product coordinates ``(c1u..c8u, c1v..c8v)``."""
    u, v = _split(x)
    cu = u @ basis.laplacian @ basis.scalar.T
    cv = v @ basis.laplacian @ basis.scalar.T
    return np.concatenate([cu, cv], axis=-1)


def reconstruct(coeffs, basis: FlowBasis) -> np.ndarray:
    return np.asarray(coeffs) @ basis.flow


def predominant_directions(x) -> np.ndarray:
    """Angle in [0, pi) of the top principal direction of each patch's nine
    flow vectors; NaN where the two singular values are too close to call.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    M = np.stack([x[:, :9], x[:, 9:]], axis=2)  # (n, 9, 2), rows (u_i, v_i)
    _, s, vt = np.linalg.svd(M, full_matrices=False)
    if np.any(s[:, 0] < 1e-12):
        raise ZeroMatrix("patch has no flow to take a direction from")
    angles = np.mod(np.arctan2(vt[:, 0, 1], vt[:, 0, 0]), np.pi)
    angles[angles >= np.pi] = 0.0
    gap = (s[:, 0] - s[:, 1]) / s[:, 0]
    angles[gap < ISOTROPY_GAP] = np.nan
    return angles


def predominant_direction(x):
    """Predominant flow angle of a single patch, or None when isotropic."""
    a = predominant_directions(np.asarray(x)[None, :])[0]
    return None if np.isnan(a) else float(a)


def projective_distance(phi, theta):
    """Distance between angles on the projective line RP^1 (period pi)."""
    d = np.mod(np.abs(np.asarray(phi) - theta), np.pi)
    return np.minimum(d, np.pi - d)


def angle_bin_mask(angles, theta: float, halfwidth: float) -> np.ndarray:
    """Mask of angles within ``halfwidth`` of ``theta`` mod pi. NaN never matches."""
    if not 0 < halfwidth <= np.pi / 2:
        raise ValueError("halfwidth must lie in (0, pi/2]")
    angles = np.asarray(angles, dtype=float)
    with np.errstate(invalid="ignore"):
        return projective_distance(angles, theta) <= halfwidth + 1e-12


def angle_bin_filter(patches, theta: float, halfwidth: float):
    """Patches whose predominant direction lies in the bin around ``theta``."""
    patches = np.atleast_2d(np.asarray(patches, dtype=float))
    return patches[angle_bin_mask(predominant_directions(patches), theta, halfwidth)]


# --- serialization ------------------------------------------------------

PATCH_COLUMNS = [f"u{i}" for i in range(1, 10)] + [f"v{i}" for i in range(1, 10)]
COEFF_COLUMNS = [f"e{i}u" for i in range(1, 9)] + [f"e{i}v" for i in range(1, 9)]


def write_rows_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in np.atleast_2d(rows):
            w.writerow([repr(float(v)) for v in row])


def read_rows_csv(path, width=None) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    out = np.array([[float(v) for v in r] for r in rows if r], dtype=float)
    if out.size == 0:
        out = out.reshape(0, width or 0)
    if width is not None and out.shape[1] != width:
        raise ValueError(f"expected {width} columns, found {out.shape[1]}")
    return out


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def save_patches_csv(path, patches):
    write_rows_csv(path, patches, PATCH_COLUMNS)


def load_patches_csv(path) -> np.ndarray:
    return read_rows_csv(path, 18)


def save_patches_json(path, patches):
    with open(path, "w") as fh:
        json.dump(np.atleast_2d(patches).tolist(), fh)


def load_patches_json(path) -> np.ndarray:
    with open(path) as fh:
        data = json.load(fh)
    arr = np.array(data, dtype=float).reshape(-1, 18)
    return arr


def save_coefficients_csv(path, coeffs):
    write_rows_csv(path, coeffs, COEFF_COLUMNS)
