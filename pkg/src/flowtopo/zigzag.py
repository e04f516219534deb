"""Zigzag persistence of angle-bin unions at a fixed scale.

A zigzag module is a path of vector spaces V_0 - V_1 - ... - V_{n-1} whose
arrows point either way. Its barcode is recovered from generalized ranks:
for an interval [i, j], r(i, j) is the rank of the canonical map from the
limit to the colimit of the restriction to i..j, which counts the bars that
contain [i, j]. Inclusion-exclusion then gives each bar's multiplicity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import modp
from .geometry import distance_matrix
from .modp import check_prime
from .persistence import vr_filtration


class EmptyBin(ValueError):
    pass


class NotASubcomplex(ValueError):
    pass


@dataclass
class ZigzagDiagram:
    """Simplicial complexes on a shared vertex set joined by inclusions.

    ``forward[a]`` is True when arrow ``a`` is ``nodes[a] -> nodes[a + 1]``
    and False for ``nodes[a] <- nodes[a + 1]``.
    """

    nodes: list
    forward: list
    scale: float = math.nan
    max_dim: int = 2
    points: np.ndarray | None = None
    node_vertices: list = field(default_factory=list)
    labels: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.forward) != len(self.nodes) - 1:
            raise ValueError("need exactly one arrow between consecutive nodes")
        self.nodes = [sorted(set(tuple(sorted(s)) for s in K), key=lambda s: (len(s), s))
                      for K in self.nodes]

    def __len__(self):
        return len(self.nodes)

    def validate(self):
        """Raise NotASubcomplex unless every arrow is an inclusion."""
        sets = [set(K) for K in self.nodes]
        for a, fwd in enumerate(self.forward):
            src, dst = (a, a + 1) if fwd else (a + 1, a)
            missing = sets[src] - sets[dst]
            if missing:
                raise NotASubcomplex(f"node {src} is not contained in node {dst}: {sorted(missing)[:3]}")


def build_angle_zigzag(bins, r: float, max_dim: int = 2) -> ZigzagDiagram:
    """X_1 -> X_1 u X_2 <- X_2 -> ... <- X_m -> X_m u X_1 at scale ``r``.

    Each node is the Vietoris-Rips complex at scale ``r`` of its point set.
    Points shared by several bins become one vertex.
    """
    bins = [np.atleast_2d(np.asarray(b, dtype=float)) for b in bins]
    if len(bins) < 2:
        raise ValueError("need at least two bins")
    if any(b.size == 0 for b in bins):
        raise EmptyBin("every angle bin needs at least one point")
    if len({b.shape[1] for b in bins}) != 1:
        raise ValueError("bins live in different ambient dimensions")

    index, points, members = {}, [], []
    for b in bins:
        ids = []
        for row in b:
            key = row.tobytes()
            if key not in index:
                index[key] = len(points)
                points.append(row)
            ids.append(index[key])
        members.append(np.array(sorted(set(ids)), dtype=np.int64))
    points = np.array(points)

    m = len(bins)
    vertex_sets, labels = [], []
    for i in range(m):
        j = (i + 1) % m
        vertex_sets.append(members[i])
        labels.append(f"X{i}")
        vertex_sets.append(np.union1d(members[i], members[j]))
        labels.append(f"X{i}+X{j}")
    nodes = [_vr_complex(points, vs, r, max_dim) for vs in vertex_sets]
    forward = [a % 2 == 0 for a in range(2 * m - 1)]
    diagram = ZigzagDiagram(nodes, forward, r, max_dim, points, vertex_sets, labels)
    diagram.validate()
    return diagram


def _vr_complex(points, vertices, r, max_dim):
    dm = distance_matrix(points[vertices])
    filt = vr_filtration(dm, r_max=r, max_dim=max_dim)
    return [tuple(int(vertices[v]) for v in s) for s in filt.simplices]


# --- homology with representatives ---------------------------------------


def _reduce(columns, p, track=False):
    """Left-to-right reduction of sparse columns ({row: coeff} dicts).

    Returns the reduced columns, the V columns if ``track``, and a map from
    pivot row to column index.
    """
    R = [dict(c) for c in columns]
    V = [{j: 1} for j in range(len(columns))] if track else None
    low_of = {}
    for j, col in enumerate(R):
        while col:
            low = max(col)
            k = low_of.get(low)
            if k is None:
                break
            c = (-col[low] * pow(R[k][low], p - 2, p)) % p
            for row, v in R[k].items():
                x = (col.get(row, 0) + c * v) % p
                if x:
                    col[row] = x
                else:
                    del col[row]
            if track:
                for row, v in V[k].items():
                    x = (V[j].get(row, 0) + c * v) % p
                    if x:
                        V[j][row] = x
                    else:
                        del V[j][row]
        if col:
            low_of[max(col)] = j
    return R, V, low_of


def _boundary_columns(simplices, face_index, p):
    cols = []
    for s in simplices:
        col = {}
        for i in range(len(s)):
            col[face_index[s[:i] + s[i + 1:]]] = 1 if i % 2 == 0 else p - 1
        cols.append(col)
    return cols


@dataclass
class HomologyBasis:
    """Basis of H_k over Z/p with explicit cycle representatives.

    ``representatives`` are chains, ``{k-simplex: coefficient}``. The
    remaining fields hold the elimination data used to express any cycle in
    this basis.
    """

    dim: int
    prime: int
    representatives: list
    simplices: list
    _index: dict = field(repr=False)
    _reducers: dict = field(repr=False)  # pivot -> (column, rep position or None)

    @property
    def rank(self):
        return len(self.representatives)

    def coordinates(self, chain) -> np.ndarray:
        """Coordinates of the class of the cycle ``chain`` in this basis."""
        p = self.prime
        col = {}
        for s, c in chain.items():
            j = self._index.get(tuple(s))
            if j is None:
                raise NotASubcomplex(f"simplex {s} is not in the target complex")
            col[j] = (col.get(j, 0) + c) % p
            if not col[j]:
                del col[j]
        out = np.zeros(self.rank, dtype=np.int64)
        while col:
            low = max(col)
            entry = self._reducers.get(low)
            if entry is None:
                raise ValueError("chain is not a cycle of this complex")
            vec, pos = entry
            c = (col[low] * pow(vec[low], p - 2, p)) % p
            if pos is not None:
                out[pos] = (out[pos] + c) % p
            for row, v in vec.items():
                x = (col.get(row, 0) - c * v) % p
                if x:
                    col[row] = x
                else:
                    del col[row]
        return out


def homology_basis(simplices, k: int, p: int) -> HomologyBasis:
    """Basis of H_k(K; Z/p) with cycle representatives, by sparse elimination."""
    p = check_prime(p)
    if k < 0:
        raise ValueError("k must be nonnegative")
    groups = {}
    for s in simplices:
        s = tuple(sorted(s))
        groups.setdefault(len(s) - 1, []).append(s)
    cells = sorted(groups.get(k, []))
    below = sorted(groups.get(k - 1, []))
    above = sorted(groups.get(k + 1, []))
    index = {s: i for i, s in enumerate(cells)}

    if k == 0:
        cycles = {j: {j: 1} for j in range(len(cells))}
    else:
        below_index = {s: i for i, s in enumerate(below)}
        R, V, _ = _reduce(_boundary_columns(cells, below_index, p), p, track=True)
        cycles = {j: V[j] for j in range(len(cells)) if not R[j]}
    Rb, _, low_of = _reduce(_boundary_columns(above, index, p), p)

    reducers = {low: (Rb[j], None) for low, j in low_of.items()}
    reps = []
    for j in sorted(cycles):
        if j in reducers:
            continue
        reducers[j] = (cycles[j], len(reps))
        reps.append({cells[i]: c for i, c in sorted(cycles[j].items())})
    return HomologyBasis(k, p, reps, cells, index, reducers)


def induced_map(source: HomologyBasis, target: HomologyBasis) -> np.ndarray:
    """Matrix (target rank x source rank) of the map induced by inclusion."""
    if source.prime != target.prime or source.dim != target.dim:
        raise ValueError("bases differ in prime or dimension")
    M = np.zeros((target.rank, source.rank), dtype=np.int64)
    for j, rep in enumerate(source.representatives):
        M[:, j] = target.coordinates(rep)
    return M


# --- interval decomposition ----------------------------------------------


def generalized_rank(dims, maps, forward, i, j, p) -> int:
    """Rank of limit -> colimit for the module restricted to nodes i..j.

    ``maps[a]`` is the matrix of arrow ``a``: from node a to a+1 when
    ``forward[a]``, otherwise from node a+1 to a.
    """
    sizes = dims[i:j + 1]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    total = int(offsets[-1])
    if sizes[0] == 0:
        return 0
    if total == 0:
        return 0

    def block(node):
        return slice(offsets[node - i], offsets[node - i + 1])

    constraints, relations = [], []
    for a in range(i, j):
        M = np.asarray(maps[a], dtype=np.int64) % p
        src, dst = (a, a + 1) if forward[a] else (a + 1, a)
        C = np.zeros((dims[dst], total), dtype=np.int64)
        C[:, block(src)] = M
        C[:, block(dst)] -= np.eye(dims[dst], dtype=np.int64)
        constraints.append(C % p)
        Rl = np.zeros((total, dims[src]), dtype=np.int64)
        Rl[block(dst), :] = M
        Rl[block(src), :] -= np.eye(dims[src], dtype=np.int64)
        relations.append(Rl % p)

    if constraints:
        limit = modp.nullspace(np.vstack(constraints), p)
    else:
        limit = np.eye(total, dtype=np.int64)
    image = np.zeros((total, limit.shape[1]), dtype=np.int64)
    image[block(i), :] = limit[block(i), :]
    if not relations:
        return modp.rank(image, p)
    rel = np.hstack(relations)
    return modp.rank(np.hstack([rel, image]), p) - modp.rank(rel, p)


def module_intervals(dims, maps, forward, p: int) -> list[tuple[int, int, int]]:
    """Barcode ``[(start, end, multiplicity)]`` of a zigzag module (0-based, inclusive)."""
    p = check_prime(p)
    n = len(dims)
    r = np.zeros((n + 1, n + 1), dtype=np.int64)  # r[i + 1, j] with zero padding

    def R(i, j):
        if i < 0 or j >= n:
            return 0
        return int(r[i + 1, j])

    for i in range(n):
        for j in range(i, n):
            r[i + 1, j] = generalized_rank(dims, maps, forward, i, j, p)
    out = []
    for i in range(n):
        for j in range(i, n):
            mu = R(i, j) - R(i - 1, j) - R(i, j + 1) + R(i - 1, j + 1)
            if mu < 0:
                raise AssertionError(f"negative multiplicity {mu} for interval [{i}, {j}]")
            if mu:
                out.append((i, j, mu))
    for node in range(n):
        covered = sum(mu for a, b, mu in out if a <= node <= b)
        if covered != dims[node]:
            raise AssertionError(f"node {node}: intervals cover {covered}, homology rank {dims[node]}")
    return out


@dataclass
class ZigzagBarcode:
    dim: int
    prime: int
    n_nodes: int
    intervals: list  # (start, end, multiplicity)
    ranks: list
    loop_closure_rank: int | None = None

    def full_length(self):
        return [iv for iv in self.intervals if iv[0] == 0 and iv[1] == self.n_nodes - 1]

    def to_records(self):
        return [{"dim": self.dim, "start_node": a, "end_node": b, "multiplicity": mu}
                for a, b, mu in self.intervals]

    def to_json(self, **kw):
        return json.dumps(self.to_records(), **kw)

    def render(self, labels=None) -> str:
        """One text row per bar, one column per node."""
        lines = [f"H{self.dim} zigzag barcode over Z/{self.prime}, {self.n_nodes} nodes"]
        lines.append("ranks  " + " ".join(f"{r:d}" for r in self.ranks))
        for a, b, mu in sorted(self.intervals, key=lambda t: (t[0] - t[1], t[0])):
            bar = "".join("#" if a <= i <= b else "." for i in range(self.n_nodes))
            lines.append(f"x{mu:<4d} {bar}  [{a}, {b}]")
        return "\n".join(lines) + "\n"


def zigzag_intervals(diagram: ZigzagDiagram, k: int = 1, p: int = 2) -> ZigzagBarcode:
    """Interval decomposition of H_k along ``diagram`` over Z/p."""
    p = check_prime(p)
    diagram.validate()
    bases = [homology_basis(K, k, p) for K in diagram.nodes]
    maps = []
    for a, fwd in enumerate(diagram.forward):
        src, dst = (a, a + 1) if fwd else (a + 1, a)
        maps.append(induced_map(bases[src], bases[dst]))
    dims = [b.rank for b in bases]
    intervals = module_intervals(dims, maps, diagram.forward, p)

    closure = None
    last = set(diagram.nodes[-1])
    if len(diagram) > 2 and set(diagram.nodes[0]) <= last:
        closure = modp.rank(induced_map(bases[0], bases[-1]), p) if dims[0] and dims[-1] else 0
    return ZigzagBarcode(k, p, len(diagram), intervals, dims, closure)
