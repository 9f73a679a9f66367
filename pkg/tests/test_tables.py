import itertools

import numpy as np
import pytest

from sigma2lab.errors import CapExceeded, TooFewCoatoms
from sigma2lab.order import chain, coatoms, diamond, enumerate_usl_top
from sigma2lab.tables import (
    CodingApparatus,
    RepPrefix,
    UslTable,
    build_rep_prefix,
    build_table,
    check_homogeneity_interpolants,
    check_meet_interpolants,
    coding_domain,
    verify_coding_ready,
    verify_rep_prefix,
    verify_table,
)

UP_TO_FIVE = list(enumerate_usl_top(5))


@pytest.fixture(scope="module")
def diamond_rep():
    return build_rep_prefix(diamond(), 1, with_coding=True)


def test_two_chain_with_two_maps_passes():
    t = UslTable(chain(2), np.array([[0, 0], [0, 1]]))
    assert verify_table(t).ok


def test_two_chain_without_second_map_fails_differentiation():
    report = verify_table(UslTable(chain(2), np.array([[0, 0]])))
    assert not report.ok
    assert [c.name for c in report.failures()] == ["differentiation"]


def test_order_failure_reports_a_triple():
    # rows agree at the top but not below it
    C = chain(3)
    report = verify_table(UslTable(C, np.array([[0, 0, 0], [0, 1, 0]])))
    check = report.get("order")
    assert not check.passed and check.counterexample[:2] == ("a", "1")


@pytest.mark.parametrize("L", UP_TO_FIVE, ids=lambda L: L.name)
def test_built_tables_verify(L):
    t = build_table(L)
    assert verify_table(t).ok
    M = t.maps
    # rows that agree at the top are equal
    same_top = M[:, None, L.top] == M[None, :, L.top]
    assert np.array_equal(same_top, np.eye(len(M), dtype=bool))


def test_small_tables():
    assert build_table(next(iter(enumerate_usl_top(1)))).size == 1
    t = build_table(chain(2))
    assert t.maps.tolist() == [[0, 0], [0, 1]]
    assert build_table(diamond()).size >= 3


def test_agreement_is_an_equivalence():
    t = build_table(diamond())
    M = t.maps
    for x in range(4):
        E = M[:, None, x] == M[None, :, x]
        assert E.diagonal().all() and np.array_equal(E, E.T)
        assert np.array_equal((E.astype(int) @ E.astype(int) > 0), E)


def test_meet_interpolants_examples():
    t = build_table(chain(2))
    assert check_meet_interpolants(t, t).ok
    D = diamond()
    poor = UslTable(D, np.array([[0, 0, 0, 0], [0, 1, 1, 1]]))
    report = check_meet_interpolants(poor, poor)
    assert report.get("meet interpolants").counterexample[2:] == (0, 1)


def test_homogeneity_on_degenerate_inner():
    t = UslTable(chain(2), np.array([[0, 0], [0, 1]]))
    assert check_homogeneity_interpolants(t, t).ok


def _brute_force_has_witness(M, quad):
    """Search every triple of self-maps of the rows for homogeneity witnesses."""
    n = len(M)
    agree = lambda p, q: {x for x in range(M.shape[1]) if M[p, x] == M[q, x]}
    homs = [
        f
        for f in itertools.product(range(n), repeat=n)
        if all(agree(p, q) <= agree(f[p], f[q]) for p in range(n) for q in range(n))
    ]
    a0, a1, b0, b1 = quad
    for g0, g1 in itertools.product(range(n), repeat=2):
        f = any(h[a0] == b0 and h[a1] == g1 for h in homs)
        g = any(h[a0] == g0 and h[a1] == g1 for h in homs)
        h_ = any(h[a0] == g0 and h[a1] == b1 for h in homs)
        if f and g and h_:
            return True
    return False


def test_homogeneity_failure_on_impoverished_outer():
    M = np.array([[0, 0, 0], [0, 2, 1], [0, 1, 1], [0, 2, 2]])
    t = UslTable(chain(3), M)
    report = check_homogeneity_interpolants(t, t)
    quad = report.get("homogeneity interpolants").counterexample
    assert quad is not None
    assert not _brute_force_has_witness(M, quad)


def test_homogeneity_agrees_with_brute_force_on_built_tables():
    for L in [chain(3), diamond()]:
        t = build_table(L)
        assert check_homogeneity_interpolants(t, t).ok
        n = t.size
        for quad in itertools.product(range(n), repeat=4):
            a0, a1, b0, b1 = quad
            agree_a = t.maps[a0] == t.maps[a1]
            agree_b = t.maps[b0] == t.maps[b1]
            if (agree_a & ~agree_b).any():
                continue
            assert _brute_force_has_witness(t.maps, quad)


def test_coding_needs_two_coatoms():
    with pytest.raises(TooFewCoatoms):
        build_rep_prefix(chain(2), 1, with_coding=True)


def test_non_distributive_lattices_are_capped():
    M3 = next(L for L in UP_TO_FIVE if L.size == 5 and len(coatoms(L)) == 3)
    with pytest.raises(CapExceeded):
        build_rep_prefix(M3, 1)


def test_diamond_rep_without_coding():
    r = build_rep_prefix(diamond(), 1)
    assert r.stage_size(0) < r.stage_size(1)
    assert verify_rep_prefix(r).ok


def test_diamond_rep_is_coding_ready(diamond_rep):
    r = diamond_rep
    assert verify_coding_ready(r).ok
    pairs = {(x, y) for x, y, _ in coding_domain(r.lattice)}
    assert len(r.coding.members) == 2 * len(pairs) == 4


@pytest.mark.parametrize("L", [L for L in UP_TO_FIVE if L.is_distributive() and len(coatoms(L)) >= 2], ids=lambda L: L.name)
def test_coding_ready_for_small_distributive_lattices(L):
    r = build_rep_prefix(L, 1, with_coding=True)
    assert verify_coding_ready(r).ok
    assert len(r.coding.members) == len(coding_domain(L))


def test_missing_escape_is_reported(diamond_rep):
    r = diamond_rep
    L = r.lattice
    c = min(r.coding.members)
    x = L.index("a")
    assert r.escape(c, x) is not None
    M = r.maps.copy()
    # give the coding row a private value modulo x, so nothing outside C matches it
    M[c, x] = M.max() + 1
    broken = RepPrefix(L, M, r.chain, r.coding, None, r.basis)
    check = verify_coding_ready(broken).get("every coding row has escapes (4)")
    assert not check.passed and check.counterexample == (c, "a")


def test_empty_coding_set_fails(diamond_rep):
    r = diamond_rep
    broken = RepPrefix(r.lattice, r.maps, r.chain, CodingApparatus({}), r.coords, r.basis)
    report = verify_coding_ready(broken)
    assert not report.get("coding map defined on the whole domain").passed


def test_escapes_preserve_agreement(diamond_rep):
    r = diamond_rep
    L = r.lattice
    for c in r.coding.members:
        for x in range(L.size):
            if x == L.top:
                continue
            e = r.escape(c, x)
            assert e not in r.coding.members
            assert r.maps[e, x] == r.maps[c, x]


def test_tables_over_built_reps_have_equal_top_classes(diamond_rep):
    M = diamond_rep.maps
    top = diamond_rep.lattice.top
    assert len(set(M[:, top].tolist())) == len(M)
