"""Uniform trees over a finite representation prefix.

A tree is given by its level data: a root string, and for each level l a
shared stem ``pis[l]`` and one tail ``rhos[l][a]`` per alphabet value a. The
image of a string s is

    root + pis[0] + rhos[0][s[0]] + pis[1] + rhos[1][s[1]] + ...

so the order and nonorder properties hold by construction once every tail
starts with its own value. Strings are tuples of row indices into the rep's
maps. Level l of a tree reads values from stage ``offset + l``, and position
j of an image string must hold a row of stage j.
"""

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadTransferLength, DepthExceeded, InvalidTree, PairDoesNotJoinToTop, PrefixTooShort
from .report import Report
from .tables import coding_domain


@dataclass(frozen=True, eq=False)
class UniformTreeSpec:
    rep: object
    root: tuple
    pis: tuple
    rhos: tuple  # rhos[l][a] is the tail for value a at level l
    offset: int = 0
    name: str = "T"

    @property
    def depth(self):
        return len(self.pis)

    def alphabet(self, level):
        """Number of values a string may take at this level."""
        return self.rep.stage_size(self.offset + level)

    def tail_length(self, level):
        return len(self.rhos[level][0])

    def height(self, level):
        """Position in every image where level ``level`` forks."""
        h = len(self.root)
        for k in range(level):
            h += len(self.pis[k]) + self.tail_length(k)
        return h + len(self.pis[level])

    def same_as(self, other):
        return (
            self.rep is other.rep
            and self.root == other.root
            and self.pis == other.pis
            and self.rhos == other.rhos
            and self.offset == other.offset
        )

    def __call__(self, sigma):
        return apply(self, sigma)


def _as_tuple(values):
    return tuple(int(v) for v in values)


def make_tree(rep, root, pis, rhos, offset=0, name="T"):
    """Build a tree from level data and reject anything that is not uniform."""
    pis = tuple(_as_tuple(p) for p in pis)
    rhos = tuple(tuple(_as_tuple(r) for r in level) for level in rhos)
    tree = UniformTreeSpec(rep, _as_tuple(root), pis, rhos, offset, name)
    report = check_shape(tree)
    if not report.ok:
        raise InvalidTree(str(report))
    return tree


def check_shape(T):
    """Levels line up, tails are uniform and start with their value, positions respect stages."""
    report = Report()
    same = len(T.rhos) == len(T.pis)
    report.add("one tail family per level", same, None if same else (len(T.pis), len(T.rhos)))
    if len(T.rhos) != len(T.pis):
        return report
    bad_count = bad_len = bad_head = None
    for l, level in enumerate(T.rhos):
        if len(level) != T.alphabet(l) and bad_count is None:
            bad_count = (l, len(level), T.alphabet(l))
        lengths = {len(r) for r in level}
        if (len(lengths) != 1 or 0 in lengths) and bad_len is None:
            bad_len = (l, sorted(lengths))
        for a, r in enumerate(level):
            if r and r[0] != a and bad_head is None:
                bad_head = (l, a)
    report.add("tails cover the level alphabet", bad_count is None, bad_count)
    report.add("tail length independent of value", bad_len is None, bad_len)
    report.add("tail starts with its value", bad_head is None, bad_head)
    if not report.ok:
        return report
    bad_pos = None
    pos = 0
    for j, v in enumerate(T.root):
        if not 0 <= v < T.rep.stage_size(j):
            bad_pos = ("root", j, v)
            break
    pos = len(T.root)
    for l in range(T.depth):
        if bad_pos is not None:
            break
        for j, v in enumerate(T.pis[l]):
            if not 0 <= v < T.rep.stage_size(pos + j):
                bad_pos = ("pi", l, j, v)
                break
        pos += len(T.pis[l])
        for a, r in enumerate(T.rhos[l]):
            if bad_pos is not None:
                break
            for j, v in enumerate(r):
                if not 0 <= v < T.rep.stage_size(pos + j):
                    bad_pos = ("rho", l, a, j, v)
                    break
        pos += T.tail_length(l)
    report.add("position j holds a row of stage j", bad_pos is None, bad_pos)
    return report


def identity_tree(rep, depth, offset=0, name="id"):
    """The tree sending every string to itself."""
    rhos = [tuple((a,) for a in range(rep.stage_size(offset + l))) for l in range(depth)]
    return make_tree(rep, (), [()] * depth, rhos, offset, name)


def _check_string(T, sigma):
    if len(sigma) > T.depth:
        raise DepthExceeded(f"string of length {len(sigma)} exceeds tree depth {T.depth}")
    for l, a in enumerate(sigma):
        if not 0 <= a < T.alphabet(l):
            raise ValueError(f"value {a} at level {l} is outside stage {T.offset + l}")


def apply(T, sigma):
    sigma = _as_tuple(sigma)
    _check_string(T, sigma)
    out = list(T.root)
    for l, a in enumerate(sigma):
        out.extend(T.pis[l])
        out.extend(T.rhos[l][a])
    return tuple(out)


def restrict(T, sigma):
    """The tree tau |-> T(sigma + tau)."""
    sigma = _as_tuple(sigma)
    _check_string(T, sigma)
    k = len(sigma)
    return replace(
        T,
        root=apply(T, sigma),
        pis=T.pis[k:],
        rhos=T.rhos[k:],
        offset=T.offset + k,
        name=f"{T.name}_{''.join(map(str, sigma))}" if sigma else T.name,
    )


def transfer(T, mu):
    """Replace the initial segment of the root of length |mu| by mu."""
    mu = _as_tuple(mu)
    if len(mu) > len(T.root):
        raise BadTransferLength(f"|mu| = {len(mu)} exceeds root length {len(T.root)}")
    for j, v in enumerate(mu):
        if not 0 <= v < T.rep.stage_size(j):
            raise BadTransferLength(f"value {v} at position {j} is outside stage {j}")
    return replace(T, root=mu + T.root[len(mu):], name=f"{T.name}^mu")


def strings(T, length, prefix=()):
    """Every argument string of the given length extending prefix, in lexicographic order."""
    prefix = _as_tuple(prefix)
    ranges = [range(T.alphabet(l)) for l in range(len(prefix), length)]
    for rest in itertools.product(*ranges):
        yield prefix + rest


def all_strings(T, depth=None):
    depth = T.depth if depth is None else depth
    for n in range(depth + 1):
        yield from strings(T, n)


# ---------------------------------------------------------------- checkers


def check_tree(T, depth=None):
    """Order and nonorder on every string up to depth.

    Order is checked against each string's parent and nonorder on each pair of
    siblings; together with transitivity of the prefix relation this covers
    every comparable and every incomparable pair.
    """
    report = check_shape(T)
    if not report.ok:
        return report
    depth = T.depth if depth is None else min(depth, T.depth)
    order_bad = nonorder_bad = None
    for n in range(depth):
        h = T.height(n)
        for sigma in strings(T, n):
            parent = apply(T, sigma)
            kids = [apply(T, sigma + (a,)) for a in range(T.alphabet(n))]
            for a, kid in enumerate(kids):
                if kid[: len(parent)] != parent and order_bad is None:
                    order_bad = (sigma, a)
                if (len(kid) <= h or kid[h] != a) and nonorder_bad is None:
                    nonorder_bad = (sigma, a)
            firsts = {kid[:h] for kid in kids}
            if len(firsts) > 1 and nonorder_bad is None:
                nonorder_bad = (sigma, "siblings disagree before the fork")
    report.add("order", order_bad is None, order_bad)
    report.add("nonorder", nonorder_bad is None, nonorder_bad)
    return report


def _coding_members(rep):
    return rep.coding.members if rep.coding is not None else frozenset()


def check_branch_coding_free(T):
    """Coding values may appear in a level's new segment only at the fork itself."""
    report = Report()
    members = _coding_members(T.rep)
    bad = None
    for l in range(T.depth):
        fork = len(T.pis[l])
        for a, tail in enumerate(T.rhos[l]):
            segment = T.pis[l] + tail
            for j, v in enumerate(segment):
                if v in members and j != fork:
                    bad = (l, a, j, v)
                    break
            if bad:
                break
        if bad:
            break
    report.add("branch-coding-free", bad is None, bad)
    return report


def check_congruence_respecting(T):
    """a and b agreeing modulo x forces their tails to agree modulo x everywhere."""
    report = Report()
    M = T.rep.maps
    bad = None
    for l in range(T.depth):
        tails = np.array(T.rhos[l], dtype=np.int64)
        alpha = np.arange(len(tails))
        for x in range(M.shape[1]):
            key = M[alpha, x]
            vals = M[tails, x]
            for k in np.unique(key):
                block = vals[key == k]
                if not (block == block[0]).all():
                    bad = (l, T.rep.lattice.names[x], int(alpha[key == k][0]))
                    break
            if bad:
                break
        if bad:
            break
    report.add("congruence-respecting", bad is None, bad)
    return report


def check_condition(T, depth=None):
    """Every finite property a forcing condition needs."""
    report = check_tree(T, depth)
    if T.rep.coding is not None:
        report.extend(check_branch_coding_free(T))
    report.extend(check_congruence_respecting(T))
    return report


# ---------------------------------------------------------------- coding


def _check_pair(L, x, y):
    if x == L.top or y == L.top or L.join_table[x, y] != L.top:
        raise PairDoesNotJoinToTop(
            f"({L.names[x]}, {L.names[y]}) does not join nontrivially to the top"
        )


def coding_rows(rep, x, y):
    _check_pair(rep.lattice, x, y)
    g = rep.coding.g
    return g[(x, y, 0)], g[(x, y, 1)]


def root_coding_count(T, x, y):
    zero, one = coding_rows(T.rep, x, y)
    return sum(1 for v in T.root if v == zero or v == one)


def no_more_root_coding(S, T):
    L = T.rep.lattice
    pairs = {(x, y) for x, y, _ in coding_domain(L)}
    return all(root_coding_count(S, x, y) == root_coding_count(T, x, y) for x, y in pairs)


def escape(rep, value, x):
    """Fixed non-coding stage-0 row agreeing with value modulo x."""
    if value not in _coding_members(rep):
        return value
    beta = rep.escape(value, x)
    if beta is None:
        raise ValueError(f"row {value} has no escape modulo {rep.lattice.names[x]}")
    return beta


def x_safe(rep, sigma, x):
    """Replace every coding value by its escape modulo x."""
    if x == rep.lattice.top:
        raise ValueError("x must differ from the top")
    return tuple(escape(rep, int(v), x) for v in sigma)


def safe_version(T, sigma, x):
    """The x-safe version of T restricted to sigma: T_sigma re-rooted at T(sigma_x)."""
    return transfer(restrict(T, sigma), apply(T, x_safe(T.rep, sigma, x)))


def encode_bits(T, pair, bits, length=None, filler=0):
    """Argument string writing bits at the first forks where a coding value is allowed.

    Remaining levels up to ``length`` take the filler value, which must not
    be a coding row.
    """
    x, y = pair
    zero, one = coding_rows(T.rep, x, y)
    bits = [int(b) for b in bits]
    if filler in _coding_members(T.rep):
        raise ValueError("filler must not be a coding row")
    sigma = []
    pending = list(bits)
    l = 0
    while pending:
        if l >= T.depth:
            raise PrefixTooShort(f"tree depth {T.depth} cannot hold {len(bits)} bits")
        value = one if pending[0] else zero
        if value < T.alphabet(l):
            sigma.append(value)
            pending.pop(0)
        else:
            sigma.append(filler)
        l += 1
    length = len(sigma) if length is None else length
    if length < len(sigma):
        raise PrefixTooShort(f"length {length} cannot hold {len(bits)} bits")
    if length > T.depth:
        raise DepthExceeded(f"length {length} exceeds tree depth {T.depth}")
    sigma.extend([filler] * (length - len(sigma)))
    return apply(T, sigma)


def decode_projections(rep, column_x, column_y, pair, count=None):
    """Decode from the values modulo x and modulo y alone."""
    x, y = pair
    zero, one = coding_rows(rep, x, y)
    M = rep.maps
    bits = []
    for vx, vy in zip(column_x, column_y):
        if vx != M[zero, x]:
            continue
        if vy == M[zero, y]:
            bits.append(0)
        elif vy == M[one, y]:
            bits.append(1)
        if count is not None and len(bits) == count:
            return tuple(bits)
    if count is not None:
        raise PrefixTooShort(f"found {len(bits)} coding sites, needed {count}")
    return tuple(bits)


def decode(rep, prefix, pair, count=None):
    """Read the bits coded for pair along a path prefix."""
    x, y = pair
    M = rep.maps
    prefix = np.asarray(prefix, dtype=np.int64)
    return decode_projections(rep, M[prefix, x], M[prefix, y], pair, count)


def projection(rep, path, x):
    """The column of a path modulo x."""
    return tuple(int(v) for v in rep.maps[np.asarray(path, dtype=np.int64), x])


# ---------------------------------------------------------------- splits


@dataclass
class DecisionTable:
    """Finite stand-in for a tree deciding a functional: (n, string of length n) -> bit."""

    values: dict = field(default_factory=dict)

    def __call__(self, n, prefix):
        return self.values[(n, _as_tuple(prefix))]

    @classmethod
    def from_function(cls, T, depth, fn):
        values = {}
        for sigma in all_strings(T, depth):
            values[(len(sigma), sigma)] = int(fn(len(sigma), sigma))
        return cls(values)

    @classmethod
    def constant(cls, T, depth, bit=0):
        return cls.from_function(T, depth, lambda n, s: bit)


def _agreement_key(rep, sigma, y):
    return tuple(int(v) for v in rep.maps[np.asarray(sigma, dtype=np.int64), y]) if sigma else ()


def _signature(q, sigma):
    return tuple(q(n, sigma[:n]) for n in range(len(sigma) + 1))


def find_splits(T, q, x, y, depth, prefix=(), limit=None):
    """Same-length strings congruent modulo y on which q disagrees somewhere.

    Strings range over arguments of T of length at most depth that extend
    prefix. Each split is (sigma, tau, n) with sigma < tau and n the least
    position where q differs. ``x`` names the column q is read from and is
    carried for reporting only.
    """
    if x == T.rep.lattice.top:
        raise ValueError("x must differ from the top")
    depth = min(depth, T.depth)
    prefix = _as_tuple(prefix)
    out = []
    for n in range(len(prefix), depth + 1):
        groups = {}
        for sigma in strings(T, n, prefix):
            groups.setdefault(_agreement_key(T.rep, sigma, y), []).append(
                (sigma, _signature(q, sigma))
            )
        for members in groups.values():
            for i, (s, sig_s) in enumerate(members):
                for t, sig_t in members[i + 1:]:
                    if sig_s != sig_t:
                        first = next(k for k in range(len(sig_s)) if sig_s[k] != sig_t[k])
                        out.append((s, t, first))
                        if limit is not None and len(out) >= limit:
                            return out
    return out


def has_split(T, q, y, depth, prefix=()):
    depth = min(depth, T.depth)
    prefix = _as_tuple(prefix)
    for n in range(len(prefix), depth + 1):
        seen = {}
        for sigma in strings(T, n, prefix):
            key = _agreement_key(T.rep, sigma, y)
            sig = _signature(q, sigma)
            if seen.setdefault(key, sig) != sig:
                return True
    return False


def sp_set(T, q, rho, depth):
    """Elements y with no split modulo y among strings extending rho, up to depth.

    A finite-depth approximation: deeper scans can only remove elements.
    """
    L = T.rep.lattice
    return frozenset(y for y in range(L.size) if not has_split(T, q, y, depth, rho))


def check_meet_closure(T, sp):
    """Whether a set of lattice elements is closed under meets."""
    L = T.rep.lattice
    report = Report()
    meets = L.meet_table
    bad = next(
        ((L.names[a], L.names[b]) for a in sp for b in sp if int(meets[a, b]) not in sp),
        None,
    )
    report.add("closed under meet", bad is None, bad)
    return report


# ---------------------------------------------------------------- sampling


def sample_tree(rep, depth, rng, max_pi=2, max_tail=2, root_length=None, offset=0, name="S"):
    """A random branch-coding-free, congruence-respecting tree.

    Stems and the root use non-coding values; each tail continues with images
    of its value under homomorphisms of the level's stage that avoid the
    coding set, or with constant non-coding rows.
    """
    from .tables import find_homomorphism

    members = _coding_members(rep)
    M = rep.maps

    def plain_value(pos):
        choices = [v for v in range(rep.stage_size(pos)) if v not in members]
        return int(rng.choice(choices))

    n_root = int(rng.integers(0, 3)) if root_length is None else root_length
    root = tuple(plain_value(j) for j in range(n_root))
    pos = n_root
    pis, rhos = [], []
    for l in range(depth):
        pi = tuple(plain_value(pos + j) for j in range(int(rng.integers(0, max_pi + 1))))
        pos += len(pi)
        alphabet = rep.stage_size(offset + l)
        extra = int(rng.integers(0, max_tail + 1))
        columns = [np.arange(alphabet)]
        for j in range(extra):
            stage = rep.stage_size(pos + 1 + j)
            image = None
            if rng.random() < 0.6:
                forbidden = np.zeros(stage, dtype=bool)
                forbidden[list(m for m in members if m < stage)] = True
                start = int(rng.integers(0, alphabet))
                target = plain_value(pos + 1 + j)
                image = find_homomorphism(M[:alphabet], M[:stage], {start: target}, forbidden)
            if image is None:
                image = [plain_value(pos + 1 + j)] * alphabet
            columns.append(np.asarray(image))
        tails = np.stack(columns, axis=1)
        rhos.append(tuple(tuple(int(v) for v in row) for row in tails))
        pis.append(pi)
        pos += 1 + extra
    return make_tree(rep, root, pis, rhos, offset, name)
