import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from sigma2lab.decide import (
    Caps,
    decide,
    decide_pi2,
    decide_question1,
    decide_sigma2,
    enumerate_aee_extensions,
    enumerate_witness_structures,
)
from sigma2lab.errors import CapExceeded, NotSigma2
from sigma2lab.order import (
    chain,
    diamond,
    enumerate_usl_top,
    from_covers,
    generated_substructure,
    is_almost_end_extension,
    make_witness,
    substructures,
)
from sigma2lab.sentences import negate, parse, prenex_pi2, prenex_sigma2

SIGMA2_CASES = [
    ("exists x . x = x", True),
    ("exists x y . x + y = 1 & !(x = 1) & !(y = 1)", True),
    ("exists x . !(x = 0) & forall y . (y <= x -> (y = 0 \\/ y = x))", True),
    ("exists x . !(x = 1) & forall y . y <= x", False),
]
PI2_CASES = [
    ("forall x . x <= 1", True),
    ("forall x . exists y . !(y <= x) & !(x <= y)", False),
    ("forall x . exists y . (x <= y & !(x = y)) \\/ x = 1", True),
]


@pytest.mark.parametrize("text,verdict", SIGMA2_CASES)
def test_curated_sigma2(text, verdict):
    cert = decide_sigma2(prenex_sigma2(parse(text)))
    assert cert.verdict is verdict
    matrix = cert.sentence.matrix
    assert all(i.recheck(matrix) for i in cert.instances())


@pytest.mark.parametrize("text,verdict", PI2_CASES)
def test_curated_pi2(text, verdict):
    cert = decide_pi2(prenex_pi2(parse(text)))
    assert cert.verdict is verdict
    matrix = cert.sentence.matrix
    assert all(i.recheck(matrix) for i in cert.instances())


def test_sigma2_witness_details():
    cert = decide_sigma2(prenex_sigma2(parse("exists x . x = x")))
    assert cert.witness.size == 2 and cert.assignment == {"x": cert.witness.bot}
    cert = decide_sigma2(prenex_sigma2(parse(SIGMA2_CASES[1][0])))
    assert cert.witness.size == 4 and len(cert.witness.join_irreducibles) == 2
    cert = decide_sigma2(prenex_sigma2(parse(SIGMA2_CASES[2][0])))
    assert cert.witness.size == 3


def test_pi2_refutations():
    cert = decide_pi2(prenex_pi2(parse(PI2_CASES[1][0])))
    U = cert.refuted_base
    assert cert.refuted_assignment["x"] in (U.bot, U.top)
    # x at the top admits no incomparable y in any extension either
    two = chain(2)
    for V, inc, (y,) in enumerate_aee_extensions(two, 1):
        top = inc[two.top]
        assert V.leq[y, top]


def test_decide_routes_by_prefix():
    assert decide(parse("forall x . x <= 1")).verdict
    with pytest.raises(NotSigma2):
        decide(parse("exists x . forall y . exists z . z = z"))


@pytest.mark.parametrize("m,expected", [(0, 2), (1, 4), (2, 14), (3, 122)])
def test_witness_counts_match_closure_oracle(m, expected):
    found = list(enumerate_witness_structures(m))
    assert len(found) == oracles.witness_class_count(m) == expected
    without = list(enumerate_witness_structures(m, degenerate_too=False))
    assert len(without) == expected - 1


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_witnesses_are_generated_and_small(m):
    for U, assign in enumerate_witness_structures(m):
        assert U.size <= 2**m + 1
        assert generated_substructure(U, set(assign)).small.size == U.size


@pytest.mark.parametrize(
    "U,k,max_size",
    [(chain(2), 0, 2), (chain(2), 1, 4), (chain(3), 1, 6), (chain(2), 2, 6)],
    ids=["two-k0", "two-k1", "three-k1", "two-k2-upto6"],
)
def test_extension_counts_match_brute_force(U, k, max_size):
    U_leq = {(a, b) for a in range(U.size) for b in range(U.size) if U.leq[a, b]}
    expected = len(oracles.aee_classes(U_leq, U.size, k, max_size))
    found = [e for e in enumerate_aee_extensions(U, k) if e[0].size <= max_size]
    assert len(found) == expected


def test_extension_examples():
    assert len(list(enumerate_aee_extensions(chain(2), 0))) == 1
    assert len(list(enumerate_aee_extensions(chain(2), 1))) == 3
    C = chain(3)
    for V, inc, (y,) in enumerate_aee_extensions(C, 1):
        a = inc[1]
        assert not (V.leq[y, a] and y not in inc)


@pytest.mark.parametrize("U", [chain(2), chain(3), diamond()], ids=["two", "three", "diamond"])
@pytest.mark.parametrize("k", [1, 2])
def test_extensions_are_aee_and_generated(U, k):
    for V, inc, ys in enumerate_aee_extensions(U, k):
        w = make_witness(U, V, inc)
        assert is_almost_end_extension(w)
        assert generated_substructure(V, set(inc) | set(ys)).small.size == V.size
        assert V.size <= U.size * 2**k


def test_question1_examples():
    two, three = chain(2), chain(3)
    up = make_witness(two, three, (0, 2))
    assert decide_question1(two, [up])
    below = make_witness(three, from_covers(["0", "m", "a", "1"], [("0", "m"), ("m", "a"), ("a", "1")]), (0, 2, 3))
    side = make_witness(
        three, from_covers(["0", "a", "m", "1"], [("0", "a"), ("0", "m"), ("a", "1"), ("m", "1")]), (0, 1, 3)
    )
    assert not decide_question1(three, [below])
    assert decide_question1(three, [below, side])


def test_question1_matches_literal_disjunction():
    pairs = [w for V in enumerate_usl_top(6) for w in substructures(V)]
    for i, w in enumerate(pairs):
        group = [w, pairs[(i * 7 + 3) % len(pairs)]]
        group = [g for g in group if g.small == w.small] or [w]
        expected = any(oracles.aee_literal(g.small, g.big, g.inclusion) for g in group)
        assert decide_question1(w.small, group) == expected


def test_caps_are_enforced():
    with pytest.raises(CapExceeded):
        decide_sigma2(prenex_sigma2(parse("exists a b c d . a = b")))
    with pytest.raises(CapExceeded):
        decide_pi2(prenex_pi2(parse("forall a . exists b c d . a = b")))


def test_time_budget_stops_the_search():
    hard = "exists x1 x2 x3 . forall y1 y2 . !(y1 + y2 = x1 + x2 + x3) \\/ y1 = y1"
    with pytest.raises(CapExceeded):
        decide(parse(hard), Caps(time_budget=1e-4))


def test_degenerate_structure_is_opt_in():
    s = prenex_sigma2(parse("exists x . 0 = 1"))
    assert not decide_sigma2(s).verdict
    assert decide_sigma2(s, Caps(allow_degenerate=True)).verdict


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.integers(0, 3))
def test_sigma1_matches_closure_oracle(seed, m):
    text, xs, _, matrix = oracles.random_sentence(seed, m, 0)
    assert decide(parse(text)).verdict == oracles.satisfiable(xs, matrix)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 3))
def test_pi1_matches_closure_oracle(seed, k):
    _, _, ys, matrix = oracles.random_sentence(seed, 0, k)
    text = f"forall {' '.join(ys)} . {oracles.render(matrix)}"
    assert decide_pi2(prenex_pi2(parse(text))).verdict == oracles.valid(ys, matrix)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 3), st.integers(1, 2))
def test_duality(seed, m, k):
    text, *_ = oracles.random_sentence(seed, m, k)
    f = parse(text)
    a = decide_sigma2(prenex_sigma2(f)).verdict
    b = decide_pi2(prenex_pi2(negate(f))).verdict
    assert a == (not b)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**9))
def test_larger_caps_keep_verdicts(seed):
    text, *_ = oracles.random_sentence(seed, 1, 1)
    s = prenex_sigma2(parse(text))
    small = decide_sigma2(s, Caps(max_exists=1, max_forall=1)).verdict
    large = decide_sigma2(s, Caps(max_exists=3, max_forall=2, max_extension_size=64)).verdict
    assert small == large


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_certificates_recheck(seed):
    text, *_ = oracles.random_sentence(seed, 1, 1)
    s = prenex_sigma2(parse(text))
    cert = decide_sigma2(s)
    assert all(i.recheck(s.matrix) for i in cert.instances())
    p = prenex_pi2(negate(parse(text)))
    cert = decide_pi2(p)
    assert all(i.recheck(p.matrix) for i in cert.instances())
