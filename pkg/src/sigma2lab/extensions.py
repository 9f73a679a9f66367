"""Free extensions and the decomposition of almost-end-extensions.

An almost-end-extension U <= V factors as U <= U[A] <= U2 where U[A] is the
top-preserving free extension of U by one fresh name per element of V - U,
and U2 is a simple almost-end-extension of U[A]. V then embeds into U2 over U.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DecompositionFailed, NotAlmostEndExtension, ValidationError
from .order import (
    SubstructureWitness,
    _trusted,
    generated_substructure,
    is_almost_end_extension,
    make_witness,
    validate,
)
from .report import Report


@dataclass(frozen=True, eq=False)
class FreeExtension:
    base: object
    generators: tuple
    result: object
    embedding: tuple
    # parts[i] = (base element, frozenset of generator names), or None for top
    parts: tuple

    def element(self, u, names=()):
        """Index of (u; names), or of top when u is the base top."""
        if u == self.base.top:
            return self.result.top
        return self.parts.index((u, frozenset(names)))


def _subset_label(names, order):
    return "{" + ",".join(n for n in order if n in names) + "}"


def free_extend(U, X, name=None):
    """Top-preserving free extension U[X].

    Elements are pairs (u; S) with u a non-top element of U and S a subset of
    X, ordered componentwise, plus a new top.
    """
    X = tuple(X)
    clash = set(X) & set(U.names)
    if clash:
        raise ValueError(f"generator names clash with elements: {sorted(clash)}")
    if len(set(X)) != len(X):
        raise ValueError("generator names must be distinct")
    body = [u for u in range(U.size) if u != U.top]
    parts = []
    for mask in range(1 << len(X)):
        subset = frozenset(X[i] for i in range(len(X)) if mask >> i & 1)
        for u in body:
            parts.append((u, subset))
    n = len(parts) + 1
    leq = np.zeros((n, n), dtype=bool)
    for i, (u1, s1) in enumerate(parts):
        for j, (u2, s2) in enumerate(parts):
            leq[i, j] = bool(U.leq[u1, u2]) and s1 <= s2
        leq[i, n - 1] = True
    leq[n - 1, n - 1] = True
    names = [f"({U.names[u]};{_subset_label(s, X)})" for u, s in parts] + [U.names[U.top]]
    if U.size == 1:
        # the collapsed structure has no non-top part; the extension is itself
        bot = 0
    else:
        bot = parts.index((U.bot, frozenset()))
    result = _trusted(leq, bot, n - 1, names, name or f"{U.name}[{','.join(X)}]")
    embedding = tuple(
        result.top if u == U.top else parts.index((u, frozenset())) for u in range(U.size)
    )
    return FreeExtension(U, X, result, embedding, tuple(parts) + (None,))


def is_simple_extension(w):
    """A generator g with big generated by the image of small plus g, or None."""
    image = set(w.inclusion)
    for g in range(w.big.size):
        if generated_substructure(w.big, image | {g}).small.size == w.big.size:
            return g
    return None


def verify_embedding(f, source, target):
    """Check that f is an injective, join-, bot- and top-preserving, order-reflecting map."""
    f = np.asarray(f, dtype=np.int64)
    report = Report()
    report.add("total", len(f) == source.size, None if len(f) == source.size else len(f))
    if len(f) != source.size:
        return report
    dup = len(set(f.tolist())) != len(f)
    report.add("injective", not dup)
    joined = f[source.join_table]
    images = target.join_table[np.ix_(f, f)]
    bad = np.argwhere(joined != images)
    report.add("preserves join", len(bad) == 0, tuple(map(int, bad[0])) if len(bad) else None)
    report.add("bot to bot", int(f[source.bot]) == target.bot)
    report.add("top to top", int(f[source.top]) == target.top)
    order_bad = np.argwhere(source.leq != target.leq[np.ix_(f, f)])
    report.add(
        "order both ways",
        len(order_bad) == 0,
        tuple(map(int, order_bad[0])) if len(order_bad) else None,
    )
    return report


@dataclass(frozen=True, eq=False)
class DecompositionWitness:
    pair: SubstructureWitness
    free: FreeExtension
    h: tuple  # U1 -> V
    g: dict  # new element of V -> U1 element (bot; {a_v})
    doubled: FreeExtension  # U1[{b}]
    classes: tuple  # class index for each element of U1[{b}]
    u2: object
    u1_in_u2: tuple
    generator: int
    f: tuple  # V -> U2
    fresh_names: tuple
    b_name: str


def _fresh(prefix, taken, count=None):
    out = []
    k = 1
    need = 1 if count is None else count
    while len(out) < need:
        cand = prefix if (count is None and k == 1 and prefix not in taken) else f"{prefix}{k}"
        if cand not in taken:
            out.append(cand)
            taken.add(cand)
        k += 1
    return out[0] if count is None else out


def decompose(w):
    """Factor an almost-end-extension through a free extension and a simple extension."""
    if not is_almost_end_extension(w):
        raise NotAlmostEndExtension("the pair is not an almost-end-extension")
    U, V, inc = w.small, w.big, w.inclusion
    new = [v for v in range(V.size) if v not in set(inc)]
    taken = set(U.names) | set(V.names)
    fresh = tuple(_fresh("a", taken, len(new)))
    owner = dict(zip(fresh, new))
    free = free_extend(U, fresh, name="U1")
    U1 = free.result

    # h: U1 -> V, (x; A) |-> x join the elements named by A
    join_v = V.join_table
    h = []
    for part in free.parts:
        if part is None:
            h.append(V.top)
            continue
        x, names = part
        acc = inc[x]
        for a in names:
            acc = int(join_v[acc, owner[a]])
        h.append(acc)
    h = tuple(h)
    g = {owner[a]: free.element(U.bot, {a}) for a in fresh}

    b_name = _fresh("b", taken | set(U1.names))
    doubled = free_extend(U1, (b_name,), name="U1[b]")
    W = doubled.result

    def key(i):
        # class key of an element of U1[{b}]
        part = doubled.parts[i]
        if part is None:
            return ("top",)
        y, names = part
        if not names:
            return ("plain", y)
        if h[y] == V.top:
            return ("top",)
        return ("b", h[y])

    keys = [key(i) for i in range(W.size)]
    order = {}
    classes = []
    for k in keys:
        if k not in order:
            order[k] = len(order)
        classes.append(order[k])
    classes = tuple(classes)
    count = len(order)
    reps = [classes.index(c) for c in range(count)]
    join_w = W.join_table
    cls = np.array(classes)
    qjoin = cls[join_w[np.ix_(reps, reps)]]
    leq2 = qjoin == np.arange(count)[None, :]
    names2 = [W.names[r] for r in reps]
    U2 = _trusted(leq2, int(cls[W.bot]), int(cls[W.top]), names2, "U2")
    u1_in_u2 = tuple(int(cls[doubled.embedding[x]]) for x in range(U1.size))
    generator = int(cls[doubled.element(U1.bot, {b_name})])
    f = []
    for v in range(V.size):
        if v == V.top:
            f.append(U2.top)
        elif v in set(inc):
            u = inc.index(v)
            f.append(u1_in_u2[free.embedding[u]])
        else:
            f.append(int(cls[doubled.element(g[v], {b_name})]))
    witness = DecompositionWitness(
        pair=w,
        free=free,
        h=h,
        g=g,
        doubled=doubled,
        classes=classes,
        u2=U2,
        u1_in_u2=u1_in_u2,
        generator=generator,
        f=tuple(f),
        fresh_names=fresh,
        b_name=b_name,
    )
    report = verify_decomposition(witness)
    if not report.ok:
        raise DecompositionFailed(str(report))
    return witness


def verify_decomposition(d):
    """Re-check every invariant of a decomposition from its raw data."""
    report = Report()
    U, V, inc = d.pair.small, d.pair.big, d.pair.inclusion
    U1 = d.free.result
    W = d.doubled.result
    h = np.array(d.h)

    # h is a homomorphism U1 -> V fixing U and inverting g
    joins_ok = np.array_equal(h[U1.join_table], V.join_table[np.ix_(h, h)])
    report.add("h preserves join", joins_ok)
    report.add("h preserves bot and top", h[U1.bot] == V.bot and h[U1.top] == V.top)
    fixes = all(h[d.free.embedding[u]] == inc[u] for u in range(U.size))
    report.add("h fixes U", fixes)
    report.add("h inverts g", all(h[x] == v for v, x in d.g.items()))

    # the relation is a join congruence on U1[{b}]
    cls = np.array(d.classes)
    jw = W.join_table
    congruent = True
    for c in range(cls.max() + 1):
        members = np.flatnonzero(cls == c)
        # a ~ a' implies a + z ~ a' + z for every z
        rows = cls[jw[members]]
        if not (rows == rows[0]).all():
            congruent = False
            break
    report.add("join congruence", congruent)
    U2 = d.u2
    onto = sorted(set(d.classes)) == list(range(U2.size))
    quotient_join = np.array_equal(cls[jw], U2.join_table[np.ix_(cls, cls)]) if onto else False
    report.add("U2 is the quotient", onto and quotient_join)
    # only the top of U1 may have a class with more than one element among the plain copies
    plain = [d.doubled.embedding[x] for x in range(U1.size) if x != U1.top]
    singletons = all(int((cls == cls[p]).sum()) == 1 for p in plain)
    report.add("plain elements stay separate", singletons)

    try:
        validate(U2.leq, U2.bot, U2.top)
        report.add("U2 is a valid structure", True)
    except ValidationError as exc:
        report.add("U2 is a valid structure", False, str(exc))
    try:
        w12 = make_witness(U1, U2, d.u1_in_u2)
        embeds = True
    except Exception:  # noqa: BLE001
        embeds = False
    report.add("U1 embeds in U2", embeds)
    report.add("U1 almost-initial in U2", embeds and is_almost_end_extension(w12))
    gen = generated_substructure(U2, set(d.u1_in_u2) | {d.generator})
    report.add("U2 simple over U1", gen.small.size == U2.size)
    report.extend(verify_embedding(d.f, V, U2), "f ")
    natural = all(d.f[inc[u]] == d.u1_in_u2[d.free.embedding[u]] for u in range(U.size))
    report.add("f extends the natural map", natural)
    return report
