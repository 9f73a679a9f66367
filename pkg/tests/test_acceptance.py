"""Acceptance gate: ten criteria, one PASS/FAIL line each.

Run under pytest, or directly with ``python3 tests/test_acceptance.py``.
"""

import itertools
import os
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

import oracles  # noqa: E402
from sigma2lab.decide import decide_pi2, decide_question1, decide_sigma2  # noqa: E402
from sigma2lab.extensions import decompose, free_extend, verify_decomposition  # noqa: E402
from sigma2lab.order import (  # noqa: E402
    coatoms,
    diamond,
    enumerate_usl_top,
    is_almost_end_extension,
    make_witness,
    substructures,
)
from sigma2lab.sentences import negate, parse, prenex_pi2, prenex_sigma2  # noqa: E402
from sigma2lab.tables import build_rep_prefix, build_table, verify_coding_ready, verify_table  # noqa: E402
from sigma2lab.trees import (  # noqa: E402
    all_strings,
    apply,
    check_condition,
    check_tree,
    decode,
    encode_bits,
    identity_tree,
    projection,
    restrict,
    safe_version,
    sample_tree,
    strings,
    x_safe,
)

SIGMA2_CURATED = [
    ("exists x . x = x", True),
    ("exists x y . x + y = 1 & !(x = 1) & !(y = 1)", True),
    ("exists x . !(x = 0) & forall y . (y <= x -> (y = 0 \\/ y = x))", True),
    ("exists x . !(x = 1) & forall y . y <= x", False),
]
PI2_CURATED = [
    ("forall x . x <= 1", True),
    ("forall x . exists y . !(y <= x) & !(x <= y)", False),
    ("forall x . exists y . (x <= y & !(x = y)) \\/ x = 1", True),
]

_DIAMOND_REP = {}


def diamond_rep():
    if "rep" not in _DIAMOND_REP:
        _DIAMOND_REP["rep"] = build_rep_prefix(diamond(), 1, with_coding=True)
    return _DIAMOND_REP["rep"]


def criterion_1():
    worst = 0.0
    wrong = []
    cases = [(t, v, True) for t, v in SIGMA2_CURATED] + [(t, v, False) for t, v in PI2_CURATED]
    for text, verdict, is_sigma in cases:
        start = time.monotonic()
        f = parse(text)
        if is_sigma:
            got = decide_sigma2(prenex_sigma2(f)).verdict
        else:
            got = decide_pi2(prenex_pi2(f)).verdict
        worst = max(worst, time.monotonic() - start)
        if got is not verdict:
            wrong.append(text)
    ok = not wrong and worst < 60
    return ok, f"{len(cases)} curated sentences, {len(wrong)} wrong, slowest {worst:.2f}s (limit 60s)"


def criterion_2():
    mismatches = 0
    total = 0
    for seed in range(120):
        count = 1 + seed % 3
        if seed % 2 == 0:
            text, xs, _, matrix = oracles.random_sentence(seed, count, 0)
            got = decide_sigma2(prenex_sigma2(parse(text))).verdict
            want = oracles.satisfiable(xs, matrix)
        else:
            _, _, ys, matrix = oracles.random_sentence(seed, 0, count)
            text = f"forall {' '.join(ys)} . {oracles.render(matrix)}"
            got = decide_pi2(prenex_pi2(parse(text))).verdict
            want = oracles.valid(ys, matrix)
        total += 1
        mismatches += got != want
    return mismatches == 0, f"{total} one-block sentences, {mismatches} mismatches"


def criterion_3():
    failures = 0
    total = 0
    for m, k in itertools.product((1, 2, 3), (1, 2)):
        for seed in range(20):
            text, *_ = oracles.random_sentence(10_000 * m + 1_000 * k + seed, m, k)
            f = parse(text)
            a = decide_sigma2(prenex_sigma2(f)).verdict
            b = decide_pi2(prenex_pi2(negate(f))).verdict
            total += 1
            failures += a == b
    return failures == 0, f"{total} sentences with m <= 3, k <= 2, {failures} failures"


def criterion_4():
    pairs = [w for V in enumerate_usl_top(6) for w in substructures(V)]
    bad = 0
    for w in pairs:
        expected = oracles.aee_literal(w.small, w.big, w.inclusion)
        bad += decide_question1(w.small, [w]) != expected
    # disjunctions over several candidates for the same base
    by_base = {}
    for w in pairs:
        by_base.setdefault(w.small.leq.tobytes(), []).append(w)
    groups = 0
    for group in by_base.values():
        for size in (2, 3):
            for combo in itertools.islice(itertools.combinations(group, size), 50):
                same = [c for c in combo if c.small == combo[0].small]
                expected = any(oracles.aee_literal(c.small, c.big, c.inclusion) for c in same)
                bad += decide_question1(combo[0].small, same) != expected
                groups += 1
    return bad == 0, f"{len(pairs)} pairs and {groups} candidate groups with |V| <= 6, {bad} mismatches"


def criterion_5():
    counts = [0] * 6
    for U in enumerate_usl_top(6):
        counts[U.size - 1] += 1
    oracle = [len(oracles.usl_top_classes(n)) for n in range(1, 7)]
    golden = [1, 1, 1, 2, 5, 15]
    ok = counts == oracle == golden
    return ok, f"counts {counts}, oracle {oracle}, golden {golden}"


def criterion_6():
    bad = 0
    checked = 0
    for U in enumerate_usl_top(6):
        if U.size < 2:
            continue
        for k in range(4):
            F = free_extend(U, [f"g{i}" for i in range(k)])
            size_ok = F.result.size == (U.size - 1) * 2**k + 1
            bad += not (size_ok and is_almost_end_extension(make_witness(U, F.result, F.embedding)))
            checked += 1
    return bad == 0, f"{checked} (U, X) combinations, {bad} failures"


def criterion_7():
    start = time.monotonic()
    done = bad = 0
    for V in enumerate_usl_top(6):
        for w in substructures(V):
            if not is_almost_end_extension(w):
                continue
            try:
                ok = verify_decomposition(decompose(w)).ok
            except Exception:  # noqa: BLE001
                ok = False
            done += 1
            bad += not ok
    elapsed = time.monotonic() - start
    return bad == 0 and elapsed < 600, f"{done} pairs decomposed, {bad} failures, {elapsed:.1f}s (limit 600s)"


def criterion_8():
    bad = [U.name for U in enumerate_usl_top(5) if not verify_table(build_table(U)).ok]
    r = diamond_rep()
    report = verify_coding_ready(r)
    prop5 = report.get("stage 0: property (5) for coatoms").passed
    two = len(coatoms(r.lattice)) == 2
    ok = not bad and report.ok and prop5 and two
    return ok, f"tables for all lattices <= 5 ({len(bad)} failing); diamond coding-ready {report.ok}, property (5) {prop5}"


def criterion_9():
    r = diamond_rep()
    L = r.lattice
    a, b = L.index("a"), L.index("b")
    T = identity_tree(r, 32)
    rng = np.random.default_rng(20261016)
    bad = 0
    for _ in range(1000):
        bits = rng.integers(0, 2, size=int(rng.integers(0, 33))).tolist()
        pair = (a, b) if rng.random() < 0.5 else (b, a)
        bad += decode(r, encode_bits(T, pair, bits), pair) != tuple(bits)
    unsafe = 0
    swept = 0
    for x in range(L.size):
        if x == L.top:
            continue
        for n in range(4):
            for sigma in itertools.product(range(r.stage_size(0)), repeat=n):
                safe = x_safe(r, sigma, x)
                swept += 1
                if set(safe) & r.coding.members or projection(r, safe, x) != projection(r, sigma, x):
                    unsafe += 1
    ok = bad == 0 and unsafe == 0
    return ok, f"1000 round trips, {bad} failures; {swept} x-safe strings, {unsafe} failures"


def criterion_10():
    r = diamond_rep()
    bad = 0
    trees = 0
    for seed in range(4):
        T = sample_tree(r, 3, np.random.default_rng(seed), root_length=2)
        trees += 1
        bad += not check_tree(T).ok
        for sigma in all_strings(T):
            Ts = restrict(T, sigma)
            for tau in all_strings(Ts):
                if apply(Ts, tau) != apply(T, sigma + tau):
                    bad += 1
            if len(sigma) <= 1:
                for tau in all_strings(Ts):
                    bad += not restrict(Ts, tau).same_as(restrict(T, sigma + tau))
            if len(sigma) <= 2:
                bad += not check_condition(Ts).ok
                for x in (r.lattice.index("a"), r.lattice.index("b")):
                    bad += not check_condition(safe_version(T, sigma, x)).ok
    T = identity_tree(r, 3)
    bad += not check_condition(T).ok
    bad += any(apply(T, s) != s for s in strings(T, 3))
    return bad == 0, f"{trees} generated trees and the identity tree at depth 3, {bad} failures"


CRITERIA = [
    ("curated sentence suite", criterion_1),
    ("one-block oracle agreement", criterion_2),
    ("duality", criterion_3),
    ("question-1 kernel", criterion_4),
    ("enumeration regression", criterion_5),
    ("free-extension law", criterion_6),
    ("decomposition theorem", criterion_7),
    ("table machinery", criterion_8),
    ("coding round-trip", criterion_9),
    ("uniform-tree laws", criterion_10),
]


def _line(number, title, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}"


@pytest.mark.parametrize("number", range(1, len(CRITERIA) + 1))
def test_criterion(number, capsys):
    title, run = CRITERIA[number - 1]
    ok, detail = run()
    with capsys.disabled():
        print("\n" + _line(number, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for number, (title, run) in enumerate(CRITERIA, start=1):
        ok, detail = run()
        failed += not ok
        print(_line(number, title, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
