import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disklift import (
    LIFTABLE,
    OBSTRUCTED,
    UNESTABLISHED,
    CycleError,
    DiskClass,
    SurfaceBoundary,
    classify_cycle,
    cubic_boundary,
    f2_boundary,
    gram_matrix,
    liftable,
    maslov,
    minus_two_chains,
    pairing,
)


def row_keys(table):
    return {(r.anchor, r.spheres, r.status, r.maslov, r.certificate) for r in table.singular + table.obstructed}


def cubic_anchor(cid):
    return {c: (1 if c == cid else 0) for c in cubic_boundary().ids}


# ---- F_2 ----------------------------------------------------------------------------

@pytest.mark.parametrize("k, status, detail, certificate", [
    (0, LIFTABLE, "smooth-domain", None),
    (1, LIFTABLE, "must-smooth-node", None),
    (2, OBSTRUCTED, None, -1),
    (3, OBSTRUCTED, None, -2),
])
def test_f2_verdicts(k, status, detail, certificate):
    S, anchor = f2_boundary()
    v = liftable(DiskClass.make(anchor, 1, {"D": k}), S)
    assert (v.status, v.detail, v.certificate) == (status, detail, certificate)


def test_f2_smooth_disk_moduli():
    S, anchor = f2_boundary()
    assert liftable(DiskClass.make(anchor), S).moduli == "S^1"


@pytest.mark.parametrize("k", range(6))
def test_f2_maslov_index_is_two(k):
    S, anchor = f2_boundary()
    assert maslov(DiskClass.make(anchor, 1, {"D": k}), S) == 2


def test_doubled_disk_has_maslov_four():
    S, anchor = f2_boundary()
    assert maslov(DiskClass.make(anchor, 2), S) == 4


def test_obstruction_certificate_decreases_with_multiplicity():
    S, anchor = f2_boundary()
    certs = [liftable(DiskClass.make(anchor, 1, {"D": k}), S, max_multiplicity=6).certificate
             for k in range(2, 7)]
    assert certs == [1 - k for k in range(2, 7)]


def test_gram_matrix_of_f2():
    S, anchor = f2_boundary()
    labels, G = gram_matrix(S, anchor)
    assert labels == ["beta", "D", "F1", "Dinf", "F2"]
    assert np.array_equal(G, G.T)
    assert list(np.diag(G)) == [0, -2, 0, 2, 0]
    assert G[1, 2] == G[1, 4] == 1 and G[1, 3] == 0


# ---- cubic cycle ----------------------------------------------------------------

@pytest.fixture(scope="module")
def cubic_table():
    return classify_cycle(cubic_boundary())


def test_cubic_chains():
    assert minus_two_chains(cubic_boundary()) == [["D1'", "D1''"], ["D2'", "D2''"], ["D3'", "D3''"]]


def test_cubic_has_twelve_singular_configurations(cubic_table):
    assert len(cubic_table.singular) == 12
    for j in (1, 2, 3):
        rows = [r for r in cubic_table.singular if r.anchor in (f"D{j}'", f"D{j}''")]
        assert len(rows) == 4


def test_cubic_chain_rows(cubic_table):
    rows = {(r.anchor, r.spheres) for r in cubic_table.singular}
    assert ("D1'", (("D1'", 1),)) in rows
    assert ("D1''", (("D1''", 1),)) in rows
    assert ("D1'", (("D1'", 1), ("D1''", 1))) in rows
    assert ("D1''", (("D1'", 1), ("D1''", 1))) in rows


def test_cubic_rows_all_have_maslov_two(cubic_table):
    assert all(r.maslov == 2 for r in cubic_table.rows())
    assert cubic_table.smooth.anchor == "E1"
    assert cubic_table.smooth.label == "D^2"


def test_cubic_doubled_spheres_are_obstructed(cubic_table):
    assert len(cubic_table.obstructed) == 12
    for row in cubic_table.obstructed:
        (cid, k), = row.spheres
        assert row.anchor == cid
        assert row.status == OBSTRUCTED
        assert row.certificate == 1 - k


def test_cubic_liftable_lookups():
    S = cubic_boundary()
    anchor = cubic_anchor("D1'")
    assert liftable(DiskClass.make(anchor), S).status == LIFTABLE
    assert liftable(DiskClass.make(anchor, 1, {"D1'": 1}), S).detail == "must-smooth-node"
    assert liftable(DiskClass.make(anchor, 1, {"D1'": 1, "D1''": 1}), S).detail == "must-smooth-nodes"
    v = liftable(DiskClass.make(anchor, 1, {"D1'": 2}), S)
    assert (v.status, v.certificate) == (OBSTRUCTED, -1)
    assert liftable(DiskClass.make(anchor, 1, {"E1": 1}), S).status == UNESTABLISHED


@pytest.mark.parametrize("shift", range(9))
def test_classification_is_rotation_invariant(cubic_table, shift):
    rotated = classify_cycle(cubic_boundary().rotated(shift))
    assert row_keys(rotated) == row_keys(cubic_table)


def test_classification_is_reflection_invariant(cubic_table):
    assert row_keys(classify_cycle(cubic_boundary().reflected())) == row_keys(cubic_table)


def test_anchor_filter():
    table = classify_cycle(cubic_boundary(), anchors=["D2'"])
    assert {r.anchor for r in table.singular + table.obstructed} == {"D2'"}
    assert len(table.singular) == 2


def test_cycle_without_minus_two_curves():
    S = SurfaceBoundary.of([("A", -1), ("B", -1), ("C", -1)])
    table = classify_cycle(S)
    assert table.singular == [] and table.obstructed == []
    assert table.smooth.status == LIFTABLE


# ---- pairing ------------------------------------------------------------------------

multiplicities = st.lists(st.integers(0, 4), min_size=9, max_size=9)


def cubic_class(anchor, base, ks):
    return DiskClass.make(anchor, base, dict(zip(cubic_boundary().ids, ks)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=9, max_size=9), st.integers(0, 3), multiplicities,
       st.integers(0, 3), multiplicities)
def test_pairing_is_symmetric(pairs, m1, k1, m2, k2):
    anchor = dict(zip(cubic_boundary().ids, pairs))
    S = cubic_boundary()
    a, b = cubic_class(anchor, m1, k1), cubic_class(anchor, m2, k2)
    assert pairing(a, b, S) == pairing(b, a, S)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=9, max_size=9), multiplicities, multiplicities, multiplicities)
def test_pairing_is_bilinear(pairs, k1, k2, k3):
    anchor = dict(zip(cubic_boundary().ids, pairs))
    S = cubic_boundary()
    a, b, c = cubic_class(anchor, 1, k1), cubic_class(anchor, 2, k2), cubic_class(anchor, 1, k3)
    total = cubic_class(anchor, 3, [x + y for x, y in zip(k1, k2)])
    assert pairing(total, c, S) == pairing(a, c, S) + pairing(b, c, S)


# ---- malformed input ----------------------------------------------------------------

def test_too_few_curves():
    with pytest.raises(CycleError):
        SurfaceBoundary.of([("A", -1), ("B", -1)])


def test_duplicate_ids():
    with pytest.raises(CycleError):
        SurfaceBoundary.of([("A", -1), ("A", -2), ("B", -1)])


def test_non_integer_self_intersection():
    with pytest.raises(CycleError):
        SurfaceBoundary((("A", -1), ("B", -1.5), ("C", -1)))


def test_classification_needs_minus_one_or_two_curves():
    S, _ = f2_boundary()
    with pytest.raises(CycleError):
        classify_cycle(S)


def test_all_minus_two_cycle_is_not_classified():
    with pytest.raises(CycleError):
        minus_two_chains(SurfaceBoundary.of([("A", -2), ("B", -2), ("C", -2)]))


def test_missing_pairing_datum():
    S, _ = f2_boundary()
    a = DiskClass.make({"D": 1}, 1)
    b = DiskClass.make({"D": 1}, 0, {"F1": 1})
    with pytest.raises(CycleError, match="beta.F1"):
        pairing(a, b, S)
    with pytest.raises(CycleError):
        gram_matrix(S, {"D": 1})


def test_negative_multiplicity_is_rejected():
    with pytest.raises(CycleError):
        DiskClass.make({"D": 1}, 1, {"D": -1})


def test_unknown_sphere_curve():
    S, anchor = f2_boundary()
    with pytest.raises(CycleError):
        maslov(DiskClass.make(anchor, 1, {"X": 1}), S)
