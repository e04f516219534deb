import itertools
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from flowtopo import geometry as geo, persistence as ph
from flowtopo.persistence import Barcode, Filtration, Interval

small_clouds = hnp.arrays(float, st.tuples(st.integers(2, 8), st.integers(2, 5)),
                          elements=st.floats(-3, 3, allow_nan=False), unique=True)

# six-vertex triangulation of the real projective plane
RP2 = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 1, 5),
       (1, 2, 4), (2, 3, 5), (1, 3, 4), (2, 4, 5), (1, 3, 5)]


def closure(facets):
    out = set()
    for f in facets:
        for k in range(1, len(f) + 1):
            out.update(itertools.combinations(sorted(f), k))
    return sorted(out, key=lambda s: (len(s), s))


def square():
    return np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)


def test_square_barcode():
    filt = ph.vr_filtration(geo.distance_matrix(square()), max_dim=3)
    for p in (2, 3):
        bc = ph.persistent_homology(filt, p).restrict(1)
        assert bc.of_dim(0) == [Interval(0, 0.0, 1.0)] * 3 + [Interval(0, 0.0)]
        (h1,) = bc.of_dim(1)
        assert h1.birth == 1.0 and math.isclose(h1.death, math.sqrt(2))


def test_filtration_order_and_faces():
    filt = ph.vr_filtration(geo.distance_matrix(square()), max_dim=2)
    filt.check()
    assert filt.count_by_dim() == [4, 6, 4]
    keys = [(t, len(s), s) for s, t in zip(filt.simplices, filt.scales)]
    assert keys == sorted(keys)
    assert len(filt.at_scale(1.0)) == 8
    np.testing.assert_allclose(filt.critical_scales(), [0, 1, math.sqrt(2)])


def test_filtration_check_catches_bad_order():
    filt = Filtration([(0,), (0, 1), (1,)], [0, 0, 0], 1, math.inf)
    with pytest.raises(ValueError):
        filt.check()


def test_r_max_truncates():
    filt = ph.vr_filtration(geo.distance_matrix(square()), r_max=1.0, max_dim=2)
    assert filt.count_by_dim() == [4, 4, 0]
    bc = ph.persistent_homology(filt, 2)
    assert bc.of_dim(1) == [Interval(1, 1.0)]
    with pytest.raises(ValueError):
        ph.vr_filtration(geo.distance_matrix(square()), r_max=0)


def test_size_explosion():
    X = np.random.default_rng(0).normal(size=(30, 3))
    with pytest.raises(ph.SizeExplosion):
        ph.vr_filtration(geo.distance_matrix(X), max_dim=3, max_simplices=1000)


def test_projective_plane_torsion():
    cx = closure(RP2)
    assert sum((-1) ** (len(s) - 1) for s in cx) == 1  # Euler characteristic
    assert ph.betti_numbers(cx, 2, 2) == [1, 1, 1]
    assert ph.betti_numbers(cx, 2, 3) == [1, 0, 0]
    filt = Filtration.from_simplices([(s, 0.0) for s in cx])
    for p, expected in ((2, [1, 1, 1]), (3, [1, 0, 0])):
        for method in ("plain", "clearing"):
            assert ph.persistent_homology(filt, p, method).betti_at(0.0, 2) == expected


def test_invalid_prime():
    filt = ph.vr_filtration(geo.distance_matrix(square()))
    for p in (1, 4, 9, 2 ** 31 + 11):
        with pytest.raises(ph.InvalidPrime):
            ph.persistent_homology(filt, p)
    with pytest.raises(ValueError):
        ph.persistent_homology(filt, 2, "fast")


@given(small_clouds, st.sampled_from([2, 3, 5]))
def test_oracle_equivalence(X, p):
    filt = ph.vr_filtration(geo.distance_matrix(X), max_dim=min(len(X) - 1, 3))
    bc = ph.persistent_homology(filt, p)
    for r in filt.critical_scales():
        assert bc.betti_at(r, filt.max_dim) == ph.oracle_betti(filt, r, p)


@given(st.integers(0, 10 ** 6), st.sampled_from([2, 3, 7]))
def test_plain_and_clearing_agree(seed, p):
    from flowtopo.experiments import random_filtration

    filt = random_filtration(np.random.default_rng(seed))
    a = ph.persistent_homology(filt, p, "plain")
    b = ph.persistent_homology(filt, p, "clearing")
    assert a.intervals == b.intervals


@given(small_clouds)
def test_every_simplex_is_paired_once(X):
    filt = ph.vr_filtration(geo.distance_matrix(X), max_dim=2)
    bc = ph.persistent_homology(filt, 2)
    used = [i for pair in bc.pairs for i in pair] + list(bc.essential)
    assert sorted(used) == list(range(len(filt)))
    # one essential class in dimension 0 for a connected complex
    assert sum(1 for iv in bc.of_dim(0) if math.isinf(iv.death)) == 1


def test_witness_relaxation():
    W = np.array([[1.0, 3.0, 2.0], [5.0, 4.0, 6.0]])
    np.testing.assert_array_equal(ph.witness_relaxation(W, 0), [0, 0])
    np.testing.assert_array_equal(ph.witness_relaxation(W, 1), [1, 4])
    np.testing.assert_array_equal(ph.witness_relaxation(W, 2), [2, 5])


def brute_witness_edge(W, nu, a, b):
    m = ph.witness_relaxation(W, nu)
    return max(0.0, min(max(W[z, a], W[z, b]) - m[z] for z in range(len(W))))


@given(st.integers(0, 10 ** 6), st.integers(0, 3))
def test_witness_edges_match_definition(seed, nu):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 2))
    L = X[:5]
    W = geo.cross_distances(X, L)
    filt = ph.lazy_witness_filtration(geo.distance_matrix(L), W, nu, max_dim=1)
    idx = filt.index()
    for a, b in itertools.combinations(range(5), 2):
        assert math.isclose(filt.scales[idx[(a, b)]], brute_witness_edge(W, nu, a, b), abs_tol=1e-12)


@given(small_clouds)
def test_witness_with_nu_zero_is_sandwiched_by_rips(X):
    # landmarks = witnesses, nu = 0: d/2 <= edge scale <= d, so VR(r) in W(r) in VR(2r)
    dm = geo.distance_matrix(X)
    filt = ph.lazy_witness_filtration(dm, dm, 0, max_dim=1)
    idx = filt.index()
    for a, b in itertools.combinations(range(len(X)), 2):
        t = filt.scales[idx[(a, b)]]
        assert dm[a, b] / 2 - 1e-12 <= t <= dm[a, b] + 1e-12


def test_witness_with_nu_zero_equals_rips_on_equilateral_triangle():
    X = np.array([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
    dm = geo.distance_matrix(X)
    wit = ph.lazy_witness_filtration(dm, dm, 0, max_dim=2)
    vr = ph.vr_filtration(dm, max_dim=2)
    w = dict(zip(wit.simplices, wit.scales))
    v = dict(zip(vr.simplices, vr.scales))
    assert w.keys() == v.keys()
    for s in v:
        assert math.isclose(w[s], v[s], abs_tol=1e-12)


def test_witness_errors():
    with pytest.raises(ph.NoWitnesses):
        ph.lazy_witness_filtration(np.zeros((2, 2)), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        ph.lazy_witness_filtration(np.zeros((2, 2)), np.zeros((3, 2)), nu=-1)


def bars(*lengths, dim=1):
    return [Interval(dim, 0.0, L) for L in lengths]


def test_signature_gap_rule():
    bc = Barcode([Interval(0, 0.0)] + bars(1.0, 0.9, 0.1) + bars(0.95, 0.02, dim=2), 2, 2.0)
    counts, support = ph.betti_signature(bc, 3.0, max_dim=2)
    assert counts == (1, 2, 1)
    assert [iv.death for iv in support[1]] == [1.0, 0.9]


def test_signature_noise_floor_across_dimensions():
    # dimension 2 has one bar ten times longer than the next, but it is noise
    # next to the dimension-1 bar
    bc = Barcode([Interval(0, 0.0)] + bars(1.0) + bars(0.1, 0.01, dim=2), 2, 2.0)
    assert ph.betti_signature(bc, 3.0, max_dim=2)[0] == (1, 1, 0)


def test_signature_without_gap_keeps_every_bar():
    # no bar stands out from the others, so none can be called noise
    bc = Barcode([Interval(0, 0.0)] + bars(0.5, 0.45, 0.4, 0.35), 2, 2.0)
    assert ph.betti_signature(bc, 3.0, max_dim=1)[0] == (1, 4)


def test_signature_dimension_zero_is_exempt_from_the_floor():
    # dim-0 lengths 2 (capped), 1, 0.5, 0.25 | 0.05: the first gap keeps four,
    # two of which are shorter than a third of the dimension-1 bar
    bc = Barcode([Interval(0, 0.0)] + bars(1.0, 0.5, 0.25, 0.05, dim=0) + bars(2.0), 2, 2.0)
    assert ph.betti_signature(bc, 3.0, max_dim=1)[0] == (4, 1)


def test_signature_needs_finite_cap():
    bc = Barcode([Interval(0, 0.0)], 2)
    with pytest.raises(ValueError):
        ph.betti_signature(bc)
    with pytest.raises(ValueError):
        ph.betti_signature(Barcode([], 2, 1.0), 1.0)


def test_records_roundtrip(tmp_path):
    filt = ph.vr_filtration(geo.distance_matrix(square()), max_dim=2)
    bc = ph.persistent_homology(filt, 3)
    records = json.loads(bc.to_json())
    assert {r["prime"] for r in records} == {3}
    back = Barcode.from_records(records)
    assert back.intervals == bc.intervals and back.prime == 3
    bc.write_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "dim,birth,death" and lines[-1].endswith(",inf")
    with pytest.raises(ValueError):
        Barcode.from_records([{"dim": 0, "birth": 0, "death": None, "prime": 2},
                              {"dim": 0, "birth": 0, "death": 1, "prime": 3}])


def test_betti_at_is_half_open():
    bc = Barcode([Interval(1, 1.0, 2.0)], 2)
    assert bc.betti_at(0.5, 1) == [0, 0]
    assert bc.betti_at(1.0, 1) == [0, 1]
    assert bc.betti_at(2.0, 1) == [0, 0]


def test_diagram_svg():
    bc = Barcode([Interval(0, 0.0), Interval(0, 0.0, 1.0), Interval(1, 1.0, 1.5)], 2)
    svg = ph.diagram_svg(bc, r_max=2.0)
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f"{ns}circle")) == 3
    assert len(root.findall(f"{ns}line")) == 2
    assert svg == ph.diagram_svg(bc, r_max=2.0)
