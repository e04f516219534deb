"""Filtered clique complexes and persistent homology over Z/p.

Two filtrations are provided, Vietoris-Rips and the lazy witness complex.
Both are flag complexes: a simplex enters at the largest scale of its edges.

Barcodes are computed by boundary-matrix reduction. ``method="plain"`` is
the textbook left-to-right column reduction of the boundary matrix and
serves as the reference; ``method="clearing"`` reduces the coboundary
matrix dimension by dimension and skips every column already known to
reduce to zero. Both yield the same intervals.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import modp
from .modp import InvalidPrime, check_prime

DEFAULT_MAX_SIMPLICES = 3_000_000


class SizeExplosion(RuntimeError):
    """The complex would exceed the configured simplex budget."""


class NoWitnesses(ValueError):
    pass


@dataclass
class Filtration:
    """Simplices sorted by (scale, dimension, vertex tuple).

    ``simplices[i]`` is a sorted vertex tuple entering at ``scales[i]``.
    """

    simplices: list
    scales: np.ndarray
    max_dim: int
    r_max: float

    def __post_init__(self):
        self.scales = np.asarray(self.scales, dtype=float)
        self.dims = np.array([len(s) - 1 for s in self.simplices], dtype=np.int64)

    def __len__(self):
        return len(self.simplices)

    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.simplices)}

    def at_scale(self, r: float) -> list:
        """Simplices present at scale ``r``."""
        return [s for s, t in zip(self.simplices, self.scales) if t <= r]

    def critical_scales(self) -> np.ndarray:
        return np.unique(self.scales)

    def count_by_dim(self) -> list[int]:
        return np.bincount(self.dims, minlength=self.max_dim + 1).tolist()

    def check(self):
        """Raise if a face enters after one of its cofaces."""
        idx = self.index()
        for i, s in enumerate(self.simplices):
            if len(s) < 2:
                continue
            for j in range(len(s)):
                f = idx.get(s[:j] + s[j + 1:])
                if f is None or f > i or self.scales[f] > self.scales[i]:
                    raise ValueError(f"face of {s} missing or out of order")

    @classmethod
    def from_simplices(cls, items, r_max=math.inf):
        """Sort ``(vertex_tuple, scale)`` pairs into a filtration."""
        items = [(tuple(sorted(s)), float(t)) for s, t in items]
        items.sort(key=lambda st: (st[1], len(st[0]), st[0]))
        max_dim = max((len(s) - 1 for s, _ in items), default=0)
        return cls([s for s, _ in items], [t for _, t in items], max_dim, r_max)


def clique_filtration(edge_scales, vertex_scales=None, r_max=math.inf, max_dim=2,
                      max_simplices=DEFAULT_MAX_SIMPLICES) -> Filtration:
    """Flag filtration from a symmetric matrix of edge entry scales.

    Edges with scale above ``r_max`` are dropped; every higher simplex up to
    ``max_dim`` whose edges are all present enters at its largest edge scale.
    """
    E = np.asarray(edge_scales, dtype=float)
    n = len(E)
    if max_dim < 0:
        raise ValueError("max_dim must be nonnegative")
    vs = np.zeros(n) if vertex_scales is None else np.asarray(vertex_scales, dtype=float)

    by_dim = [[(v,) for v in range(n) if vs[v] <= r_max]]
    scales = [[float(vs[v]) for v in range(n) if vs[v] <= r_max]]
    alive = set(v for (v,) in by_dim[0])
    up = []
    for v in range(n):
        nb = np.flatnonzero(E[v, v + 1:] <= r_max) + v + 1
        up.append(frozenset(int(w) for w in nb if v in alive and w in alive))
    total = len(by_dim[0])

    if max_dim >= 1:
        cur = [((v,), float(vs[v]), up[v]) for (v,) in by_dim[0]]
        for d in range(1, max_dim + 1):
            nxt = []
            simp_d, scale_d = [], []
            for s, t, cand in cur:
                row = E[:, list(s)]
                for w in sorted(cand):
                    ns = s + (w,)
                    nt = max(t, float(row[w].max()))
                    simp_d.append(ns)
                    scale_d.append(nt)
                    if d < max_dim:
                        nxt.append((ns, nt, cand & up[w]))
                if total + len(simp_d) > max_simplices:
                    raise SizeExplosion(
                        f"more than {max_simplices} simplices by dimension {d}; "
                        "reduce the number of points or r_max"
                    )
            by_dim.append(simp_d)
            scales.append(scale_d)
            total += len(simp_d)
            cur = nxt
            if not cur and d < max_dim:
                by_dim.extend([] for _ in range(max_dim - d))
                scales.extend([] for _ in range(max_dim - d))
                break

    simplices = [s for group in by_dim for s in group]
    flat_scales = np.array([t for group in scales for t in group], dtype=float)
    if not simplices:
        return Filtration([], flat_scales, max_dim, r_max)
    dims = np.array([len(s) - 1 for s in simplices])
    width = max_dim + 1
    verts = np.full((len(simplices), width), -1, dtype=np.int64)
    for i, s in enumerate(simplices):
        verts[i, : len(s)] = s
    keys = tuple(verts[:, c] for c in reversed(range(width))) + (dims, flat_scales)
    order = np.lexsort(keys)
    return Filtration([simplices[i] for i in order], flat_scales[order], max_dim, r_max)


def vr_filtration(dm, r_max=math.inf, max_dim=2, max_simplices=DEFAULT_MAX_SIMPLICES) -> Filtration:
    """Vietoris-Rips filtration: a simplex enters at its diameter."""
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    dm = np.asarray(dm, dtype=float)
    return clique_filtration(dm, None, r_max, max_dim, max_simplices)


def witness_relaxation(witness_dists, nu: int) -> np.ndarray:
    """Distance from each witness to its nu-th nearest landmark (0 if nu == 0)."""
    W = np.asarray(witness_dists, dtype=float)
    if nu == 0:
        return np.zeros(len(W))
    nu = min(nu, W.shape[1])
    return np.partition(W, nu - 1, axis=1)[:, nu - 1]


def lazy_witness_filtration(landmark_dm, witness_dists, nu: int = 1, r_max=math.inf, max_dim=2,
                            max_simplices=DEFAULT_MAX_SIMPLICES) -> Filtration:
    """Lazy witness filtration on the landmarks.

    ``witness_dists[z, l]`` is the distance from witness z to landmark l.
    Edge [l, l'] enters at the least r >= 0 for which some witness z has
    max(d(z, l), d(z, l')) <= r + m(z), with m(z) the distance from z to its
    nu-th nearest landmark. Higher simplices follow the flag rule.
    ``landmark_dm`` only fixes the number of landmarks.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    W = np.asarray(witness_dists, dtype=float)
    if W.ndim != 2 or len(W) == 0:
        raise NoWitnesses("at least one witness is required")
    L = W.shape[1]
    if L < 2 or np.shape(landmark_dm)[0] != L:
        raise ValueError("need at least 2 landmarks matching the witness distances")
    m = witness_relaxation(W, nu)
    shifted = W - m[:, None]
    E = np.empty((L, L))
    for l in range(L):
        E[l] = np.min(np.maximum(shifted[:, l:l + 1], shifted), axis=0)
    E = np.maximum(E, 0.0)
    vertex = np.maximum(shifted.min(axis=0), 0.0)
    np.fill_diagonal(E, vertex)
    return clique_filtration(E, vertex, r_max, max_dim, max_simplices)


# --- reduction ----------------------------------------------------------


def _facets(s):
    return [s[:i] + s[i + 1:] for i in range(len(s))]


def _add_into(col, other, c, p):
    """col += c * other, in place, mod p."""
    for k, v in other.items():
        x = (col.get(k, 0) + c * v) % p
        if x:
            col[k] = x
        else:
            del col[k]


def _reduce_plain(filt, p):
    idx = filt.index()
    low_of = {}  # pivot row -> reduced column (normalized so that entry is 1)
    pairs = []
    for j, s in enumerate(filt.simplices):
        if len(s) == 1:
            continue
        col = {}
        for i, f in enumerate(_facets(s)):
            col[idx[f]] = 1 if i % 2 == 0 else p - 1
        while col:
            low = max(col)
            other = low_of.get(low)
            if other is None:
                break
            _add_into(col, other, (-col[low]) % p, p)
        if col:
            low = max(col)
            inv = pow(col[low], p - 2, p)
            low_of[low] = {k: (v * inv) % p for k, v in col.items()}
            pairs.append((low, j))
    paired = set()
    for a, b in pairs:
        paired.add(a)
        paired.add(b)
    essential = [i for i in range(len(filt)) if i not in paired]
    return pairs, essential


def _cofaces(filt):
    idx = filt.index()
    cof = [[] for _ in range(len(filt))]
    for j, s in enumerate(filt.simplices):
        if len(s) == 1:
            continue
        for i, f in enumerate(_facets(s)):
            cof[idx[f]].append((j, i % 2))
    return cof


def _reduce_clearing(filt, p):
    cof = _cofaces(filt)
    pairs = []
    essential = []
    cleared = set()
    by_dim = [[] for _ in range(filt.max_dim + 1)]
    for i, d in enumerate(filt.dims):
        by_dim[d].append(i)
    minus_one = p - 1
    for d in range(filt.max_dim + 1):
        pivots = {}
        next_cleared = set()
        for sigma in reversed(by_dim[d]):
            if sigma in cleared:
                continue
            col = {t: (1 if odd == 0 else minus_one) for t, odd in cof[sigma]}
            while col:
                piv = min(col)
                other = pivots.get(piv)
                if other is None:
                    break
                _add_into(col, other, (-col[piv]) % p, p)
            if col:
                piv = min(col)
                inv = pow(col[piv], p - 2, p)
                pivots[piv] = {k: (v * inv) % p for k, v in col.items()}
                pairs.append((sigma, piv))
                next_cleared.add(piv)
            else:
                essential.append(sigma)
        cleared = next_cleared
    return pairs, essential


@dataclass(frozen=True, order=True)
class Interval:
    dim: int
    birth: float
    death: float = math.inf

    @property
    def length(self):
        return self.death - self.birth

    def capped_length(self, r_max):
        death = min(self.death, r_max) if math.isfinite(r_max) else self.death
        return death - self.birth

    def contains(self, r):
        return self.birth <= r < self.death


@dataclass
class Barcode:
    intervals: list
    prime: int
    r_max: float = math.inf
    pairs: list = field(default_factory=list, repr=False)
    essential: list = field(default_factory=list, repr=False)

    def of_dim(self, k):
        return [iv for iv in self.intervals if iv.dim == k]

    def restrict(self, max_dim):
        """Intervals of dimension at most ``max_dim``.

        A filtration truncated at dimension d has spurious essential classes
        in dimension d, so reports drop that top dimension.
        """
        return Barcode([iv for iv in self.intervals if iv.dim <= max_dim], self.prime, self.r_max)

    def betti_at(self, r, max_dim=None):
        top = max_dim if max_dim is not None else max((iv.dim for iv in self.intervals), default=0)
        out = [0] * (top + 1)
        for iv in self.intervals:
            if iv.dim <= top and iv.contains(r):
                out[iv.dim] += 1
        return out

    def to_records(self):
        return [
            {"dim": iv.dim, "birth": iv.birth, "death": None if math.isinf(iv.death) else iv.death,
             "prime": self.prime}
            for iv in self.intervals
        ]

    def to_json(self, **kw):
        return json.dumps(self.to_records(), **kw)

    @classmethod
    def from_records(cls, records, r_max=math.inf):
        records = list(records)
        primes = {r["prime"] for r in records}
        if len(primes) > 1:
            raise ValueError("records mix coefficient primes")
        prime = primes.pop() if primes else 2
        ivs = [Interval(int(r["dim"]), float(r["birth"]),
                        math.inf if r["death"] is None else float(r["death"])) for r in records]
        return cls(sorted(ivs), prime, r_max)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dim", "birth", "death"])
            for iv in self.intervals:
                w.writerow([iv.dim, repr(iv.birth), "inf" if math.isinf(iv.death) else repr(iv.death)])


def persistent_homology(filt: Filtration, p: int = 2, method: str = "clearing") -> Barcode:
    """Barcode of ``filt`` with coefficients in Z/p.

    Intervals of zero length are left out of ``intervals`` but the full
    pairing is kept on the result (``pairs`` and ``essential``, as filtration
    indices) for bookkeeping.
    """
    p = check_prime(p)
    if method == "plain":
        pairs, essential = _reduce_plain(filt, p)
    elif method == "clearing":
        pairs, essential = _reduce_clearing(filt, p)
    else:
        raise ValueError(f"unknown reduction method {method!r}")
    ivs = []
    for b, d in pairs:
        if filt.scales[d] > filt.scales[b]:
            ivs.append(Interval(int(filt.dims[b]), float(filt.scales[b]), float(filt.scales[d])))
    for e in essential:
        ivs.append(Interval(int(filt.dims[e]), float(filt.scales[e])))
    return Barcode(sorted(ivs), p, filt.r_max, sorted(pairs), sorted(essential))


# --- independent oracle ----------------------------------------------------


def boundary_matrix(simplices_k, simplices_km1, p) -> np.ndarray:
    """Dense matrix of the k-th boundary map mod p (rows: (k-1)-faces)."""
    row = {s: i for i, s in enumerate(simplices_km1)}
    B = np.zeros((len(simplices_km1), len(simplices_k)), dtype=np.int64)
    for j, s in enumerate(simplices_k):
        for i in range(len(s)):
            B[row[s[:i] + s[i + 1:]], j] = 1 if i % 2 == 0 else p - 1
    return B


def betti_numbers(simplices, max_dim, p) -> list[int]:
    """Betti numbers of a finite simplicial complex by dense elimination mod p."""
    p = check_prime(p)
    groups = [[] for _ in range(max_dim + 2)]
    for s in simplices:
        s = tuple(sorted(s))
        if len(s) - 1 <= max_dim + 1:
            groups[len(s) - 1].append(s)
    ranks = [0] * (max_dim + 3)
    for k in range(1, max_dim + 2):
        if groups[k] and groups[k - 1]:
            ranks[k] = modp.rank(boundary_matrix(groups[k], groups[k - 1], p), p)
    return [len(groups[k]) - ranks[k] - ranks[k + 1] for k in range(max_dim + 1)]


def oracle_betti(filt: Filtration, r: float, p: int) -> list[int]:
    """Betti numbers of the subcomplex at scale ``r``, computed from scratch."""
    return betti_numbers(filt.at_scale(r), filt.max_dim, p)


# --- long-bar signature ----------------------------------------------------


def betti_signature(barcode: Barcode, persistence_ratio: float = 3.0, r_max=None, max_dim=None):
    """Count the long bars in each dimension.

    Infinite bars are capped at ``r_max``. Within a dimension, sorted
    lengths L1 >= L2 >= ... are cut at the first gap where
    ``L_t >= persistence_ratio * L_{t+1}``, keeping the top t bars (a
    dimension with no such gap keeps all of them). In positive dimensions
    kept bars must also be at least ``1 / persistence_ratio`` of the longest
    bar in any positive dimension, so a dimension with only noise counts
    zero.

    Returns ``(counts, support)`` where ``support[k]`` lists the bars counted
    in dimension k.
    """
    if persistence_ratio <= 1:
        raise ValueError("persistence_ratio must exceed 1")
    r_cap = barcode.r_max if r_max is None else r_max
    top = max_dim if max_dim is not None else max((iv.dim for iv in barcode.intervals), default=0)
    lengths = {k: [] for k in range(top + 1)}
    for iv in barcode.intervals:
        if iv.dim <= top:
            lengths[iv.dim].append((iv.capped_length(r_cap), iv))
    if not all(math.isfinite(l) for group in lengths.values() for l, _ in group):
        raise ValueError("infinite bars need a finite r_max to be compared")
    positive = [l for k in range(1, top + 1) for l, _ in lengths[k]]
    floor = (max(positive) / persistence_ratio) if positive else 0.0

    counts, support = [], []
    for k in range(top + 1):
        group = sorted(lengths[k], key=lambda li: (-li[0], li[1]))
        ls = [l for l, _ in group] + [0.0]
        t = 0
        for i in range(len(group)):
            if ls[i] >= persistence_ratio * ls[i + 1]:
                t = i + 1
                break
        kept = [iv for l, iv in group[:t] if k == 0 or l >= floor]
        counts.append(len(kept))
        support.append(kept)
    return tuple(counts), support


# --- persistence diagram SVG -------------------------------------------------


def diagram_svg(barcode: Barcode, size: int = 320, r_max=None) -> str:
    """Minimal SVG scatter of (birth, death) with the diagonal drawn.

    Infinite deaths are drawn on a dashed line at the top of the plot.
    """
    finite = [iv.death for iv in barcode.intervals if math.isfinite(iv.death)]
    top = r_max if r_max is not None and math.isfinite(r_max) else None
    if top is None:
        top = max(finite + [iv.birth for iv in barcode.intervals] + [1e-9]) * 1.05
    pad = 30
    scale = (size - 2 * pad) / top
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]

    def xy(b, d):
        return pad + b * scale, size - pad - d * scale

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
        '<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="black"/>'.format(*xy(0, 0), *xy(top, top)),
        '<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="gray" stroke-dasharray="4 3"/>'.format(
            *xy(0, top), *xy(top, top)),
        f'<text x="{size / 2:.0f}" y="{size - 6}" font-size="11" text-anchor="middle">birth</text>',
        f'<text x="10" y="{size / 2:.0f}" font-size="11" transform="rotate(-90 10 {size / 2:.0f})" '
        'text-anchor="middle">death</text>',
    ]
    for iv in barcode.intervals:
        d = min(iv.death, top)
        x, y = xy(iv.birth, d)
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{colors[iv.dim % len(colors)]}">'
                     f'<title>H{iv.dim} [{iv.birth:.4g}, {iv.death:.4g})</title></circle>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


__all__ = [
    "Barcode", "Filtration", "Interval", "InvalidPrime", "NoWitnesses", "SizeExplosion",
    "betti_numbers", "betti_signature", "clique_filtration", "diagram_svg", "lazy_witness_filtration",
    "oracle_betti", "persistent_homology", "vr_filtration", "witness_relaxation",
]
