import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from sigma2lab.errors import NotPi2, NotSigma2, ParseError, UnboundVariable
from sigma2lab.order import chain, diamond, enumerate_usl_top
from sigma2lab.sentences import (
    Eq,
    Exists,
    Forall,
    Leq,
    One,
    Var,
    compile_matrix,
    eval_qf,
    eval_sentence,
    negate,
    parse,
    prenex_pi2,
    prenex_prefix,
    prenex_sigma2,
    to_text,
    variables,
)

STRUCTURES = [U for U in enumerate_usl_top(5) if U.size >= 2]


def test_parse_examples():
    assert parse("exists x . x = x") == Exists(("x",), Eq(Var("x"), Var("x")))
    assert parse("forall y . y <= 1") == Forall(("y",), Leq(Var("y"), One()))


def test_dangling_join_reports_position():
    with pytest.raises(ParseError) as info:
        parse("exists x . x + ")
    assert info.value.line == 1
    assert info.value.column >= 14


def test_unbound_variable():
    with pytest.raises(UnboundVariable) as info:
        parse("exists x . x <= y")
    assert info.value.name == "y"


def test_prenex_examples():
    s = prenex_sigma2(parse("exists x . forall y . y <= x"))
    assert (s.existential_vars, s.universal_vars) == (("x",), ("y",))
    assert s.matrix == Leq(Var("y"), Var("x"))
    with pytest.raises(NotSigma2):
        prenex_sigma2(parse("forall y . exists x . y <= x"))
    s = prenex_sigma2(parse("!(forall x . exists y . !(x <= y))"))
    assert (s.existential_vars, s.universal_vars) == (("x",), ("y",))
    assert s.matrix == Leq(Var("x"), Var("y"))


def test_three_blocks_fit_neither_form():
    f = parse("exists x . forall y . exists z . z = z")
    with pytest.raises(NotSigma2):
        prenex_sigma2(f)
    with pytest.raises(NotPi2):
        prenex_pi2(f)
    assert len(prenex_prefix(f)) == 3


def test_clashing_names_are_renamed_apart():
    s = prenex_sigma2(parse("(exists x . x = 0) & (exists x . x = 1)"))
    assert len(set(s.existential_vars)) == 2


def test_eval_qf_examples():
    D = diamond()
    env = {"x": D.index("a"), "y": D.index("b")}
    assert eval_qf(D, env, parse("exists x y . x + y = 1").body)
    assert eval_qf(chain(4), {}, parse("exists x . 0 <= 1").body)
    C = chain(3)
    assert not eval_qf(C, {"x": 1}, Eq(Var("x"), One()))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9), st.integers(0, 2), st.integers(0, 2))
def test_text_round_trip(seed, m, k):
    text, *_ = oracles.random_sentence(seed, m, k, depth=3)
    f = parse(text)
    assert parse(to_text(f)) == f


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9), st.sampled_from(STRUCTURES))
def test_prenex_forms_preserve_truth_in_every_structure(seed, U):
    # nest quantifiers inside connectives so the prenex step has work to do
    a, *_ = oracles.random_sentence(seed, 1, 1)
    b, *_ = oracles.random_sentence(seed + 1, 0, 1)
    f = parse(f"({a}) & !({b})")
    truth = eval_sentence(U, f)
    for build in (prenex_sigma2, prenex_pi2):
        try:
            p = build(f)
        except (NotSigma2, NotPi2):
            continue
        assert eval_sentence(U, p.to_formula()) == truth


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9), st.sampled_from(STRUCTURES), st.randoms(use_true_random=False))
def test_compiled_matrix_matches_interpreter(seed, U, rnd):
    text, *_ = oracles.random_sentence(seed, 2, 1)
    s = prenex_sigma2(parse(text))
    names = list(s.existential_vars + s.universal_vars)
    run = compile_matrix(s.matrix, names)
    values = [rnd.randrange(U.size) for _ in names]
    expected = eval_qf(U, dict(zip(names, values)), s.matrix)
    assert run(U.join_table, U.leq, U.bot, U.top, values) == expected


def test_negation_flips_prenex_kind():
    f = parse("exists x . forall y . y <= x")
    p = prenex_pi2(negate(f))
    assert p.universal_vars == ("x",) and p.existential_vars == ("y",)


def test_variables_lists_bound_names():
    assert set(variables(parse("exists x . forall y . x <= y"))) == {"x", "y"}


def test_eval_sentence_on_chain():
    assert eval_sentence(chain(3), parse("exists x . !(x = 0) & !(x = 1)"))
    assert not eval_sentence(chain(2), parse("exists x . !(x = 0) & !(x = 1)"))
