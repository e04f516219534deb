import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flowtopo import geometry as geo, persistence as ph, zigzag as zz
from flowtopo.zigzag import ZigzagDiagram

HOLLOW = [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]
FILLED = HOLLOW + [(0, 1, 2)]


def test_circle_point_circle():
    # hollow -> filled <- hollow: the loop dies and a new one is born
    d = ZigzagDiagram([HOLLOW, FILLED, HOLLOW], [True, False])
    zb = zz.zigzag_intervals(d, 1, 2)
    assert zb.ranks == [1, 0, 1]
    assert zb.intervals == [(0, 0, 1), (2, 2, 1)]


def test_identity_chain_is_one_full_bar():
    d = ZigzagDiagram([HOLLOW] * 4, [True, False, True])
    for p in (2, 3):
        zb = zz.zigzag_intervals(d, 1, p)
        assert zb.intervals == [(0, 3, 1)]
        assert zb.full_length() == [(0, 3, 1)]


def test_pendant_vertex_keeps_the_loop():
    square = [(0,), (1,), (2,), (3,), (0, 1), (1, 2), (2, 3), (0, 3)]
    d = ZigzagDiagram([square, square + [(4,), (0, 4)], square], [True, False])
    zb = zz.zigzag_intervals(d, 1, 3)
    assert zb.intervals == [(0, 2, 1)]
    b0 = zz.homology_basis(square, 1, 3)
    b1 = zz.homology_basis(d.nodes[1], 1, 3)
    M = zz.induced_map(b0, b1)
    assert M.shape == (1, 1) and M[0, 0] != 0


def test_two_loops_one_survives():
    # a figure eight in the middle: one loop from each side, neither spans
    left = [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]
    right = [(0,), (3,), (4,), (0, 3), (0, 4), (3, 4)]
    d = ZigzagDiagram([left, left + right, right], [True, False])
    zb = zz.zigzag_intervals(d, 1, 2)
    assert zb.ranks == [1, 2, 1]
    assert sorted(zb.intervals) == [(0, 1, 1), (1, 2, 1)]


def test_dimension_zero():
    d = ZigzagDiagram([[(0,)], [(0,), (1,)], [(1,)]], [True, False])
    zb = zz.zigzag_intervals(d, 0, 2)
    assert sorted(zb.intervals) == [(0, 1, 1), (1, 2, 1)]


def test_not_a_subcomplex():
    d = ZigzagDiagram([FILLED, HOLLOW], [True])
    with pytest.raises(zz.NotASubcomplex):
        d.validate()
    with pytest.raises(ValueError):
        ZigzagDiagram([HOLLOW, HOLLOW], [True, False])


def test_rp2_torsion_in_homology_basis():
    from test_persistence import RP2, closure

    cx = closure(RP2)
    assert zz.homology_basis(cx, 1, 2).rank == 1
    assert zz.homology_basis(cx, 1, 3).rank == 0
    assert zz.homology_basis(cx, 2, 2).rank == 1


def test_coordinates_of_a_homologous_cycle():
    # square with a diagonal: the outer loop equals the sum of the two triangles
    cx = [(0,), (1,), (2,), (3,), (0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]
    b = zz.homology_basis(cx, 1, 5)
    assert b.rank == 2
    outer = {(0, 1): 1, (1, 2): 1, (2, 3): 1, (0, 3): -1}
    c = b.coordinates(outer)
    assert np.count_nonzero(c) >= 1
    with pytest.raises(ValueError):
        b.coordinates({(0, 1): 1})  # not a cycle


def rips_sequence(seed, n_nodes):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(int(rng.integers(5, 10)), 2))
    filt = ph.vr_filtration(geo.distance_matrix(X), max_dim=2)
    scales = np.sort(rng.choice(filt.critical_scales(), size=min(n_nodes, len(filt.critical_scales())),
                                replace=False))
    return filt, scales


@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.sampled_from([2, 3]), st.integers(0, 1))
def test_forward_zigzag_matches_standard_persistence(seed, n_nodes, p, k):
    filt, scales = rips_sequence(seed, n_nodes)
    nodes = [filt.at_scale(r) for r in scales]
    zb = zz.zigzag_intervals(ZigzagDiagram(nodes, [True] * (len(nodes) - 1)), k, p)
    bc = ph.persistent_homology(filt, p)
    expected = {}
    for iv in bc.of_dim(k):
        alive = [i for i, r in enumerate(scales) if iv.contains(r)]
        if alive:
            key = (alive[0], alive[-1])
            expected[key] = expected.get(key, 0) + 1
    assert sorted(zb.intervals) == sorted((a, b, mu) for (a, b), mu in expected.items())


@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.integers(0, 1))
def test_reversed_arrows_mirror_the_barcode(seed, n_nodes, k):
    filt, scales = rips_sequence(seed, n_nodes)
    nodes = [filt.at_scale(r) for r in scales]
    n = len(nodes)
    fwd = zz.zigzag_intervals(ZigzagDiagram(nodes, [True] * (n - 1)), k, 2)
    bwd = zz.zigzag_intervals(ZigzagDiagram(nodes[::-1], [False] * (n - 1)), k, 2)
    assert sorted(bwd.intervals) == sorted((n - 1 - b, n - 1 - a, mu) for a, b, mu in fwd.intervals)


@given(st.integers(0, 10 ** 6), st.sampled_from([2, 3]))
def test_multiplicities_cover_every_node(seed, p):
    # random zigzag of subcomplexes of one Rips complex: unions and intersections
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(8, 2))
    K = ph.vr_filtration(geo.distance_matrix(X), r_max=1.5, max_dim=2).simplices
    sub = []
    for _ in range(3):
        keep = set(int(v) for v in np.flatnonzero(rng.random(8) < 0.7))
        sub.append([s for s in K if set(s) <= keep])
    nodes = [sub[0], sorted(set(sub[0]) | set(sub[1])), sub[1], sorted(set(sub[1]) | set(sub[2])), sub[2]]
    zb = zz.zigzag_intervals(ZigzagDiagram(nodes, [True, False, True, False]), 1, p)
    for node in range(5):
        assert sum(mu for a, b, mu in zb.intervals if a <= node <= b) == zb.ranks[node]


def circle_bins(m=4, per_bin=12):
    t = np.linspace(0, 2 * np.pi, per_bin, endpoint=False)
    return [np.stack([np.cos(t), np.sin(t), np.full_like(t, 0.01 * b)], axis=1) for b in range(m)]


def test_angle_zigzag_on_stacked_circles():
    bins = circle_bins()
    d = zz.build_angle_zigzag(bins, 0.6)
    assert len(d) == 8
    assert d.labels == ["X0", "X0+X1", "X1", "X1+X2", "X2", "X2+X3", "X3", "X3+X0"]
    assert d.forward == [True, False, True, False, True, False, True]
    zb = zz.zigzag_intervals(d, 1, 2)
    assert zb.intervals == [(0, 7, 1)]
    assert zb.loop_closure_rank == 1
    text = zb.render(d.labels)
    assert "[0, 7]" in text and "#" * 8 in text


def test_shared_points_become_one_vertex():
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    b = np.array([[1.0, 0.0], [2.0, 0.0]])
    d = zz.build_angle_zigzag([a, b], 1.0, max_dim=1)
    assert len(d.points) == 3
    np.testing.assert_array_equal(d.node_vertices[1], [0, 1, 2])


def test_empty_bin():
    with pytest.raises(zz.EmptyBin):
        zz.build_angle_zigzag([np.zeros((2, 2)), np.zeros((0, 2))], 1.0)


def test_records():
    d = ZigzagDiagram([HOLLOW, FILLED, HOLLOW], [True, False])
    zb = zz.zigzag_intervals(d, 1, 3)
    assert zb.to_records()[0] == {"dim": 1, "start_node": 0, "end_node": 0, "multiplicity": 1}
