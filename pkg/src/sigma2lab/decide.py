"""Deciding exists*forall* and forall*exists* sentences over the degrees below O.

A sentence  exists x . forall y . phi  is true iff some finite structure U
generated by values for x has the property that every almost-end-extension
V of U generated over U by values for y satisfies phi. The dual form asks
that every such U admit some almost-end-extension satisfying phi.

Both sides are enumerated through one-element ("simple") extensions. A
simple extension of W by an element y below top is determined by a pair
(K, F) of subsets of W: K is closed under meets and contains top, F is an
up-set contained in K that contains top. The extension has the elements of
W together with a copy k+y of every k in K - F; y itself is min(K) + y, which
is already in W exactly when min(K) lies in F. Distinct pairs give
extensions that are not isomorphic over W, so no deduplication is needed.
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceeded
from .order import FiniteUslTop, _trusted, is_almost_end_extension
from .sentences import PrenexPi2, PrenexSigma2, compile_matrix, eval_qf


@dataclass(frozen=True)
class Caps:
    """Resource bounds.

    ``max_exists`` bounds the outer block and ``max_forall`` the inner block,
    named after the exists-forall reading. A forall-exists sentence is held to
    the same bounds as its negation, so duality never crosses a cap.
    """

    max_exists: int = 3
    max_forall: int = 2
    max_witness_size: int = 9
    max_extension_size: int = 36
    time_budget: float = None
    allow_degenerate: bool = False


# ---------------------------------------------------------------- simple extensions


def _up_sets_with_top(W):
    """Up-sets of W containing top, as boolean masks."""
    order = list(reversed(W.linear_extension))
    strict_above = [np.flatnonzero(W.less[e]) for e in range(W.size)]
    chosen = np.zeros(W.size, dtype=bool)
    out = []

    def rec(k):
        if k == len(order):
            out.append(chosen.copy())
            return
        e = order[k]
        if e == W.top:
            chosen[e] = True
            rec(k + 1)
            chosen[e] = False
            return
        if chosen[strict_above[e]].all():
            chosen[e] = True
            rec(k + 1)
            chosen[e] = False
        rec(k + 1)

    rec(0)
    return out


def _meet_closure(meet, members):
    closed = set(members)
    frontier = list(closed)
    while frontier:
        a = frontier.pop()
        for b in list(closed):
            c = int(meet[a, b])
            if c not in closed:
                closed.add(c)
                frontier.append(c)
    return closed


def simple_extension_pairs(W, protected=()):
    """Yield (K, F) as sorted tuples for every simple extension of W by an element below top.

    No new element may lie below a member of ``protected`` (used for the
    almost-end-extension constraint).
    """
    meet = W.meet_table
    leq = W.leq
    ascending = W.linear_extension
    protected = [p for p in protected if p != W.top]
    for F_mask in _up_sets_with_top(W):
        F = set(int(i) for i in np.flatnonzero(F_mask))
        guarded = [p for p in protected if p in F]
        if guarded:
            allowed_mask = ~leq[:, guarded].any(axis=1)
        else:
            allowed_mask = np.ones(W.size, dtype=bool)
        forced = _meet_closure(meet, F) - F
        if any(not allowed_mask[k] for k in forced):
            continue
        candidates = [w for w in ascending if w not in F and w not in forced and allowed_mask[w]]
        K = set(F) | forced

        def rec(k):
            if k == len(candidates):
                yield tuple(sorted(K)), tuple(sorted(F))
                return
            yield from rec(k + 1)
            w = candidates[k]
            if all(int(meet[w, other]) in K or int(meet[w, other]) == w for other in K):
                K.add(w)
                yield from rec(k + 1)
                K.discard(w)

        yield from rec(0)


def build_simple_extension(W, K, F, label):
    """Materialize the extension for (K, F); returns (V, embedding, y)."""
    F = set(F)
    new = [k for k in K if k not in F]
    n = W.size
    base = np.array(list(range(n)) + new)
    flag = np.array([1 if w in F else 0 for w in range(n)] + [1] * len(new))
    leq = W.leq[np.ix_(base, base)] & (flag[:, None] <= flag[None, :])
    names = list(W.names) + [f"{W.names[k]}+{label}" for k in new]
    low = _minimum(W, K)
    y = low if low in F else n + new.index(low)
    V = _trusted(leq, W.bot, W.top, names, W.name)
    # joins involving y-elements land on the least member of K above the base join
    K_arr = np.array(sorted(K))
    above = W.leq[:, K_arr]
    up_size = W.leq.sum(axis=1)[K_arr]
    closure = K_arr[np.where(above, up_size[None, :], -1).argmax(axis=1)]
    place = np.arange(n)
    place[new] = n + np.arange(len(new))
    JW = W.join_table[np.ix_(base, base)]
    has_y = (base >= 0) & (np.arange(len(base)) >= n)
    lifted = has_y[:, None] | has_y[None, :]
    J = np.where(lifted, place[closure[JW]], JW).astype(np.int64)
    J.setflags(write=False)
    V.__dict__["join_table"] = J
    return V, tuple(range(n)), y


def _minimum(W, members):
    members = list(members)
    for m in members:
        if all(W.leq[m, k] for k in members):
            return m
    raise ValueError("no minimum")


def simple_extensions(W, label="y", protected=()):
    for K, F in simple_extension_pairs(W, protected):
        yield build_simple_extension(W, K, F, label)


# ---------------------------------------------------------------- enumerations


def two_element():
    return _trusted(np.array([[True, True], [False, True]]), 0, 1, ("0", "1"), "U")


def degenerate():
    return _trusted(np.ones((1, 1), dtype=bool), 0, 0, ("0",), "U")


class _Clock:
    def __init__(self, budget):
        self.budget = budget
        self.start = time.monotonic()

    def check(self, partial=None):
        if self.budget is not None and time.monotonic() - self.start > self.budget:
            raise CapExceeded("time budget exhausted", partial)

    def elapsed(self):
        return time.monotonic() - self.start


def enumerate_witness_structures(m, degenerate_too=True, labels=None, max_size=None):
    """Yield (U, assignment) for every structure generated by m named elements.

    One pair per isomorphism class respecting the assignment; the collapsed
    one-element structure comes last when ``degenerate_too`` is set.
    """
    labels = labels or [f"x{i + 1}" for i in range(m)]
    level = [(two_element(), ())]
    for i in range(m):
        nxt = []
        for W, assign in level:
            for V, emb, y in simple_extensions(W, labels[i]):
                if max_size is not None and V.size > max_size:
                    raise CapExceeded(f"witness structure of size {V.size} exceeds cap {max_size}")
                nxt.append((V, tuple(emb[a] for a in assign) + (y,)))
        level = nxt
    yield from level
    if degenerate_too:
        yield degenerate(), (0,) * m


def enumerate_aee_extensions(U, k, labels=None, max_size=None):
    """Yield (V, inclusion, assignment) for the almost-end-extensions of U generated by k elements.

    Generation is depth-first, which gives the same order as extending level
    by level while yielding each extension as soon as it is built.
    """
    labels = labels or [f"y{i + 1}" for i in range(k)]
    protected_base = [u for u in range(U.size) if u != U.top]

    def grow(W, inc, assign, i):
        if i == k:
            yield W, inc, assign
            return
        protected = [inc[u] for u in protected_base]
        for V, emb, y in simple_extensions(W, labels[i], protected):
            if max_size is not None and V.size > max_size:
                raise CapExceeded(f"extension of size {V.size} exceeds cap {max_size}")
            yield from grow(V, tuple(emb[j] for j in inc), tuple(emb[a] for a in assign) + (y,), i + 1)

    yield from grow(U, tuple(range(U.size)), (), 0)


class _ExtensionCache:
    """Extensions per base structure, produced lazily and kept for reuse."""

    def __init__(self, k, max_size):
        self.k = k
        self.max_size = max_size
        self.store = {}

    def get(self, U):
        key = (U.size, U.bot, U.top, U.leq.tobytes())
        if key not in self.store:
            source = enumerate_aee_extensions(U, self.k, max_size=self.max_size)
            self.store[key] = ([], source)
        items, source = self.store[key]
        i = 0
        while True:
            if i == len(items):
                nxt = next(source, None)
                if nxt is None:
                    return
                V, inc, assign = nxt
                items.append((V, inc, assign, V.join_table.tolist(), V.leq.tolist()))
            yield items[i]
            i += 1


def decide_question1(U, candidates):
    """True iff some candidate extension of U is an almost-end-extension."""
    return any(is_almost_end_extension(w) for w in candidates)


# ---------------------------------------------------------------- certificates


@dataclass
class Instance:
    """One evaluated matrix instance: base structure, extension, assignments, truth value."""

    base: FiniteUslTop
    base_assignment: dict
    extension: FiniteUslTop
    inclusion: tuple
    extension_assignment: dict
    value: bool

    def env(self):
        env = {v: self.inclusion[e] for v, e in self.base_assignment.items()}
        env.update(self.extension_assignment)
        return env

    def recheck(self, matrix):
        return eval_qf(self.extension, self.env(), matrix) == self.value

    def as_dict(self):
        from .textio import dump_structure

        return {
            "base": dump_structure(self.base),
            "base_assignment": {v: self.base.names[e] for v, e in self.base_assignment.items()},
            "extension": dump_structure(self.extension),
            "inclusion": [self.extension.names[i] for i in self.inclusion],
            "extension_assignment": {
                v: self.extension.names[e] for v, e in self.extension_assignment.items()
            },
            "value": self.value,
        }


@dataclass
class Sigma2Certificate:
    sentence: PrenexSigma2
    verdict: bool = None
    witness: FiniteUslTop = None
    assignment: dict = None
    countermodels: list = field(default_factory=list)
    extensions_checked: int = 0
    witnesses_checked: int = 0

    def instances(self):
        return list(self.countermodels)

    def as_dict(self):
        from .textio import dump_structure

        out = {
            "kind": "sigma2",
            "sentence": str(self.sentence),
            "verdict": self.verdict,
            "witnesses_checked": self.witnesses_checked,
            "extensions_checked": self.extensions_checked,
        }
        if self.witness is not None:
            out["witness"] = dump_structure(self.witness)
            out["assignment"] = {v: self.witness.names[e] for v, e in self.assignment.items()}
        out["countermodels"] = [c.as_dict() for c in self.countermodels]
        return out

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)


@dataclass
class Pi2Certificate:
    sentence: PrenexPi2
    verdict: bool = None
    supports: list = field(default_factory=list)
    refuted_base: FiniteUslTop = None
    refuted_assignment: dict = None
    extensions_checked: int = 0
    witnesses_checked: int = 0

    def instances(self):
        return list(self.supports)

    def as_dict(self):
        from .textio import dump_structure

        out = {
            "kind": "pi2",
            "sentence": str(self.sentence),
            "verdict": self.verdict,
            "witnesses_checked": self.witnesses_checked,
            "extensions_checked": self.extensions_checked,
            "supports": [s.as_dict() for s in self.supports],
        }
        if self.refuted_base is not None:
            out["refuted_base"] = dump_structure(self.refuted_base)
            out["refuted_assignment"] = {
                v: self.refuted_base.names[e] for v, e in self.refuted_assignment.items()
            }
        return out

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)


# ---------------------------------------------------------------- deciders


def _check_caps(m, k, caps):
    if m > caps.max_exists:
        raise CapExceeded(f"{m} outer-block variables exceed cap {caps.max_exists}")
    if k > caps.max_forall:
        raise CapExceeded(f"{k} inner-block variables exceed cap {caps.max_forall}")


def _witnesses(m, caps):
    return enumerate_witness_structures(
        m, degenerate_too=caps.allow_degenerate, max_size=caps.max_witness_size
    )


def decide_sigma2(s, caps=None):
    """Decide exists x . forall y . matrix; returns a Sigma2Certificate."""
    caps = caps or Caps()
    xs, ys = tuple(s.existential_vars), tuple(s.universal_vars)
    _check_caps(len(xs), len(ys), caps)
    clock = _Clock(caps.time_budget)
    cert = Sigma2Certificate(s)
    run = compile_matrix(s.matrix, xs + ys)
    cache = _ExtensionCache(len(ys), caps.max_extension_size)
    for U, x_assign in _witnesses(len(xs), caps):
        cert.witnesses_checked += 1
        counter = None
        for V, inc, y_assign, J, L in cache.get(U):
            clock.check(cert)
            cert.extensions_checked += 1
            values = [inc[a] for a in x_assign] + list(y_assign)
            if not run(J, L, V.bot, V.top, values):
                counter = Instance(
                    U, dict(zip(xs, x_assign)), V, inc, dict(zip(ys, y_assign)), False
                )
                break
        if counter is None:
            cert.verdict = True
            cert.witness = U
            cert.assignment = dict(zip(xs, x_assign))
            return cert
        cert.countermodels.append(counter)
    cert.verdict = False
    return cert


def decide_pi2(s, caps=None):
    """Decide forall x . exists y . matrix; returns a Pi2Certificate."""
    caps = caps or Caps()
    xs, ys = tuple(s.universal_vars), tuple(s.existential_vars)
    _check_caps(len(xs), len(ys), caps)
    clock = _Clock(caps.time_budget)
    cert = Pi2Certificate(s)
    run = compile_matrix(s.matrix, xs + ys)
    cache = _ExtensionCache(len(ys), caps.max_extension_size)
    for U, x_assign in _witnesses(len(xs), caps):
        cert.witnesses_checked += 1
        support = None
        for V, inc, y_assign, J, L in cache.get(U):
            clock.check(cert)
            cert.extensions_checked += 1
            values = [inc[a] for a in x_assign] + list(y_assign)
            if run(J, L, V.bot, V.top, values):
                support = Instance(
                    U, dict(zip(xs, x_assign)), V, inc, dict(zip(ys, y_assign)), True
                )
                break
        if support is None:
            cert.verdict = False
            cert.refuted_base = U
            cert.refuted_assignment = dict(zip(xs, x_assign))
            return cert
        cert.supports.append(support)
    cert.verdict = True
    return cert


def decide(sentence, caps=None):
    """Route a parsed sentence to the matching decider by its prenex prefix."""
    from .errors import NotPi2, NotSigma2
    from .sentences import prenex_pi2, prenex_sigma2

    try:
        s = prenex_sigma2(sentence)
    except NotSigma2 as first:
        try:
            p = prenex_pi2(sentence)
        except NotPi2:
            raise first from None
        return decide_pi2(p, caps)
    return decide_sigma2(s, caps)


__all__ = [
    "Caps",
    "Instance",
    "Pi2Certificate",
    "Sigma2Certificate",
    "build_simple_extension",
    "decide",
    "decide_pi2",
    "decide_question1",
    "decide_sigma2",
    "enumerate_aee_extensions",
    "enumerate_witness_structures",
    "simple_extension_pairs",
    "simple_extensions",
]
