"""Finite upper semilattices with a greatest element (finite lattices, in fact).

A structure is stored by its full order relation ``leq[i, j] == (i <= j)``.
Joins and meets are derived on demand and cached.
"""

import itertools
import time
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    BotNotLeast,
    CapExceeded,
    InvalidWitness,
    NoJoin,
    NotPartialOrder,
    TopNotGreatest,
)


@dataclass(frozen=True, eq=False)
class FiniteUslTop:
    leq: np.ndarray
    bot: int
    top: int
    names: tuple
    name: str = "U"

    @property
    def size(self):
        return self.leq.shape[0]

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"FiniteUslTop({self.name!r}, size={self.size})"

    def __eq__(self, other):
        return (
            isinstance(other, FiniteUslTop)
            and self.bot == other.bot
            and self.top == other.top
            and self.leq.shape == other.leq.shape
            and bool(np.array_equal(self.leq, other.leq))
        )

    def __hash__(self):
        return hash((self.bot, self.top, self.leq.shape[0], self.leq.tobytes()))

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no element named {name!r} in {self.name}") from None

    @cached_property
    def join_table(self):
        table = _least_upper_bounds(self.leq)
        table.setflags(write=False)
        return table

    @cached_property
    def meet_table(self):
        # join of all common lower bounds; the set always contains bot
        n = self.size
        lower = self.leq.T[:, None, :] & self.leq.T[None, :, :]
        out = np.empty((n, n), dtype=np.int64)
        join = self.join_table
        for x in range(n):
            for y in range(x, n):
                acc = self.bot
                for z in np.flatnonzero(lower[x, y]):
                    acc = join[acc, z]
                out[x, y] = out[y, x] = acc
        out.setflags(write=False)
        return out

    @cached_property
    def less(self):
        """Strict order."""
        return self.leq & ~np.eye(self.size, dtype=bool)

    @cached_property
    def covers(self):
        """covers[i, j] is true when j covers i."""
        lt = self.less
        between = (lt.astype(np.int64) @ lt.astype(np.int64)) > 0
        return lt & ~between

    @cached_property
    def linear_extension(self):
        """Elements sorted so that every element follows everything below it."""
        below = self.leq.sum(axis=0)
        return tuple(int(i) for i in np.lexsort((np.arange(self.size), below)))

    @cached_property
    def join_irreducibles(self):
        lower_covers = self.covers.sum(axis=0)
        return tuple(int(j) for j in range(self.size) if lower_covers[j] == 1)

    def is_distributive(self):
        j, m = self.join_table, self.meet_table
        n = self.size
        for x in range(n):
            # x ⊓ (y ⊔ z) == (x ⊓ y) ⊔ (x ⊓ z) for all y, z
            lhs = m[x][j]
            rhs = j[m[x][:, None], m[x][None, :]]
            if not np.array_equal(lhs, rhs):
                return False
        return True

    def describe(self, i):
        return self.names[i]


def _least_upper_bounds(leq):
    """Join table, or -1 where no least upper bound exists."""
    n = leq.shape[0]
    upper = leq[:, None, :] & leq[None, :, :]  # upper[x, y, z]: z is above x and y
    # z is least among the upper bounds when z <= w for every upper bound w
    not_below = ~leq  # not_below[z, w]: z not <= w
    bad = np.einsum("xyw,zw->xyz", upper.astype(np.int32), not_below.astype(np.int32)) > 0
    least = upper & ~bad
    has = least.any(axis=2)
    table = np.where(has, least.argmax(axis=2), -1).astype(np.int64)
    return table


def _minimal_upper_bounds(leq, x, y):
    ub = np.flatnonzero(leq[x] & leq[y])
    return [int(z) for z in ub if not any(leq[w, z] and w != z for w in ub)]


def _trusted(leq, bot, top, names=None, name="U"):
    leq = np.array(leq, dtype=bool)
    leq.setflags(write=False)
    n = leq.shape[0]
    if names is None:
        names = default_names(n, bot, top)
    return FiniteUslTop(leq, int(bot), int(top), tuple(names), name)


def default_names(n, bot, top):
    if n == 1:
        return ("0",)
    letters = _letters()
    names = []
    k = 0
    for i in range(n):
        if i == bot:
            names.append("0")
        elif i == top:
            names.append("1")
        else:
            names.append(next(letters) if k < 10_000 else f"e{i}")
            k += 1
    return tuple(names)


def _letters():
    for size in itertools.count(1):
        for combo in itertools.product("abcdefghijklmnopqrstuvwxyz", repeat=size):
            yield "".join(combo)


def validate(leq, bot, top, names=None, name="U"):
    """Check all axioms and return the structure, or raise the first violation."""
    leq = np.array(leq, dtype=bool)
    if leq.ndim != 2 or leq.shape[0] != leq.shape[1] or leq.shape[0] < 1:
        raise ValueError("leq must be a nonempty square matrix")
    n = leq.shape[0]
    if names is not None and len(names) != n:
        raise ValueError("names must list one name per element")
    label = (lambda i: names[i]) if names is not None else (lambda i: i)
    for i in range(n):
        if not leq[i, i]:
            raise NotPartialOrder("reflexivity", (label(i), label(i)))
    both = leq & leq.T & ~np.eye(n, dtype=bool)
    if both.any():
        i, j = map(int, np.argwhere(both)[0])
        raise NotPartialOrder("antisymmetry", (label(i), label(j)))
    composed = (leq.astype(np.int64) @ leq.astype(np.int64)) > 0
    missing = composed & ~leq
    if missing.any():
        i, j = map(int, np.argwhere(missing)[0])
        raise NotPartialOrder("transitivity", (label(i), label(j)))
    if not 0 <= bot < n or not 0 <= top < n:
        raise ValueError("bot and top must be element indices")
    for x in range(n):
        if not leq[bot, x]:
            raise BotNotLeast(label(bot), label(x))
    table = _least_upper_bounds(leq)
    if (table < 0).any():
        x, y = map(int, np.argwhere(table < 0)[0])
        raise NoJoin(label(x), label(y), [label(z) for z in _minimal_upper_bounds(leq, x, y)])
    for x in range(n):
        if not leq[x, top]:
            raise TopNotGreatest(label(top), label(x))
    return _trusted(leq, bot, top, names, name)


def from_covers(elements, covers, bot=None, top=None, name="U"):
    """Build from element names and cover pairs (lower, upper), closing reflexively and transitively."""
    elements = list(elements)
    idx = {e: i for i, e in enumerate(elements)}
    n = len(elements)
    rel = np.eye(n, dtype=bool)
    for lo, hi in covers:
        rel[idx[lo], idx[hi]] = True
    rel = transitive_closure(rel)
    bot = elements[0] if bot is None else bot
    top = elements[-1] if top is None else top
    return validate(rel, idx[bot], idx[top], elements, name)


def transitive_closure(rel):
    rel = np.array(rel, dtype=bool)
    n = rel.shape[0]
    for k in range(n):
        rel |= rel[:, k : k + 1] & rel[k : k + 1, :]
    return rel


def chain(n, name=None):
    """The n-element chain 0 < a < b < ... < 1."""
    leq = np.triu(np.ones((n, n), dtype=bool))
    return _trusted(leq, 0, n - 1, None, name or f"chain{n}")


def diamond():
    return from_covers(["0", "a", "b", "1"], [("0", "a"), ("0", "b"), ("a", "1"), ("b", "1")], name="diamond")


def join(U, x, y):
    return int(U.join_table[x, y])


def meet(U, x, y):
    return int(U.meet_table[x, y])


def coatoms(U):
    if U.size == 1:
        return frozenset()
    return frozenset(int(x) for x in np.flatnonzero(U.covers[:, U.top]))


def relabel(U, perm, names=None, name=None):
    """Structure whose element i is U's element perm[i]."""
    perm = np.asarray(perm, dtype=np.int64)
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(len(perm))
    leq = U.leq[np.ix_(perm, perm)]
    if names is None:
        names = tuple(U.names[p] for p in perm)
    return _trusted(leq, inverse[U.bot], inverse[U.top], names, name or U.name)


# ---------------------------------------------------------------- canonical form


def _refined_colors(leq, bot, top):
    """Isomorphism-invariant integer colors, refined until stable."""
    n = leq.shape[0]
    strict = leq & ~np.eye(n, dtype=bool)
    colors = [
        (0 if i == bot else 2 if i == top else 1, int(strict[:, i].sum()), int(strict[i].sum()))
        for i in range(n)
    ]
    table = {c: k for k, c in enumerate(sorted(set(colors)))}
    colors = [table[c] for c in colors]
    while True:
        sig = [
            (
                colors[i],
                tuple(sorted(colors[j] for j in np.flatnonzero(strict[:, i]))),
                tuple(sorted(colors[j] for j in np.flatnonzero(strict[i]))),
            )
            for i in range(n)
        ]
        table = {s: k for k, s in enumerate(sorted(set(sig)))}
        new = [table[s] for s in sig]
        if len(table) == len(set(colors)):
            return new
        colors = new


def canonical_form(U):
    """Return (code, perm): the minimal encoding and the relabeling achieving it.

    ``perm[i]`` is the original index placed at canonical position i; bot goes
    first and top last. Only relabelings consistent with the refined color
    partition are compared, which is enough because colors are invariant.
    """
    n = U.size
    if n == 1:
        return b"\x01", (0,)
    colors = _refined_colors(U.leq, U.bot, U.top)
    middle = [i for i in range(n) if i not in (U.bot, U.top)]
    cells = {}
    for i in middle:
        cells.setdefault(colors[i], []).append(i)
    cell_lists = [cells[c] for c in sorted(cells)]
    best = None
    best_perm = None
    for choice in itertools.product(*(itertools.permutations(c) for c in cell_lists)):
        perm = [U.bot] + [i for part in choice for i in part] + [U.top]
        code = np.packbits(U.leq[np.ix_(perm, perm)]).tobytes()
        if best is None or code < best:
            best, best_perm = code, tuple(perm)
    return bytes([n]) + best, best_perm


def canonical(U):
    _, perm = canonical_form(U)
    n = U.size
    return relabel(U, perm, default_names(n, 0, n - 1), U.name)


def find_isomorphism(U, V):
    """Lexicographically least order isomorphism U -> V as a tuple, or None."""
    if U.size != V.size:
        return None
    n = U.size
    colors_u = _refined_colors(U.leq, U.bot, U.top)
    colors_v = _refined_colors(V.leq, V.bot, V.top)
    if sorted(colors_u) != sorted(colors_v):
        return None
    image = [-1] * n
    used = [False] * n

    def extend(u):
        if u == n:
            return True
        for v in range(n):
            if used[v] or colors_u[u] != colors_v[v]:
                continue
            if (u == U.bot) != (v == V.bot) or (u == U.top) != (v == V.top):
                continue
            if all(
                U.leq[w, u] == V.leq[image[w], v] and U.leq[u, w] == V.leq[v, image[w]]
                for w in range(u)
            ):
                image[u], used[v] = v, True
                if extend(u + 1):
                    return True
                image[u], used[v] = -1, False
        return False

    return tuple(image) if extend(0) else None


def are_isomorphic(U, V):
    return find_isomorphism(U, V) is not None


# ---------------------------------------------------------------- enumeration


def _down_sets(strict_leq, elements):
    """All down-closed subsets of ``elements`` (as sorted tuples)."""
    elements = list(elements)
    out = []
    for mask in range(1 << len(elements)):
        chosen = {elements[i] for i in range(len(elements)) if mask >> i & 1}
        if all(lo in chosen for hi in chosen for lo in elements if strict_leq[lo, hi]):
            out.append(tuple(sorted(chosen)))
    return out


def _add_coatom(U, below):
    """Insert a new element just under top, above exactly the down-set ``below``."""
    n = U.size
    order = [i for i in range(n) if i != U.top] + [U.top]
    leq = np.zeros((n + 1, n + 1), dtype=bool)
    old = U.leq[np.ix_(order, order)]
    new_pos = n - 1  # new element sits before top
    keep = [i for i in range(n + 1) if i != new_pos]
    leq[np.ix_(keep, keep)] = old
    pos = {o: k for k, o in enumerate(order)}
    for b in below:
        leq[pos[b] if pos[b] < new_pos else pos[b] + 1, new_pos] = True
    leq[new_pos, new_pos] = True
    leq[new_pos, n] = True
    return leq


def enumerate_usl_top(n, max_size=10, time_budget=None):
    """Yield one structure per isomorphism class of size 1..n, in canonical order.

    Structures of size k + 1 are produced from those of size k by adding a new
    coatom over a down-set of the non-top part; removing any coatom from a
    finite lattice leaves a lattice, so this reaches every class.
    """
    if n < 1:
        return
    if n > max_size:
        raise CapExceeded(f"enumeration size {n} exceeds cap {max_size}")
    start = time.monotonic()
    level = [_trusted(np.ones((1, 1), dtype=bool), 0, 0, ("0",), "usl1_1")]
    yield level[0]
    if n == 1:
        return
    level = [_trusted(np.array([[True, True], [False, True]]), 0, 1, None, "usl2_1")]
    yield level[0]
    for size in range(3, n + 1):
        found = {}
        for U in level:
            strict = U.less
            rest = [i for i in range(U.size) if i != U.top]
            for below in _down_sets(strict, rest):
                if U.bot not in below:
                    continue
                leq = _add_coatom(U, below)
                if (_least_upper_bounds(leq) < 0).any():
                    continue
                cand = _trusted(leq, 0, size - 1)
                code, perm = canonical_form(cand)
                if code not in found:
                    found[code] = relabel(cand, perm, default_names(size, 0, size - 1))
                if time_budget is not None and time.monotonic() - start > time_budget:
                    raise CapExceeded("time budget exhausted during enumeration")
        level = []
        for k, code in enumerate(sorted(found)):
            U = found[code]
            level.append(_trusted(U.leq, U.bot, U.top, U.names, f"usl{size}_{k + 1}"))
        yield from level


# ---------------------------------------------------------------- substructures


@dataclass(frozen=True, eq=False)
class SubstructureWitness:
    small: FiniteUslTop
    big: FiniteUslTop
    inclusion: tuple

    def image(self):
        return set(self.inclusion)


def make_witness(small, big, inclusion):
    """Validate an inclusion map and wrap it."""
    inc = tuple(int(i) for i in inclusion)
    if len(inc) != small.size or len(set(inc)) != len(inc):
        raise InvalidWitness("inclusion must be injective and total")
    if any(not 0 <= i < big.size for i in inc):
        raise InvalidWitness("inclusion leaves the big structure")
    arr = np.array(inc)
    if not np.array_equal(small.leq, big.leq[np.ix_(arr, arr)]):
        raise InvalidWitness("inclusion does not preserve and reflect the order")
    if not np.array_equal(arr[small.join_table], big.join_table[np.ix_(arr, arr)]):
        raise InvalidWitness("inclusion does not preserve joins")
    if inc[small.bot] != big.bot or inc[small.top] != big.top:
        raise InvalidWitness("inclusion must send bot to bot and top to top")
    return SubstructureWitness(small, big, inc)


def generated_substructure(V, seed):
    """Smallest join-closed subset containing seed, bot and top."""
    closed = set(int(s) for s in seed) | {V.bot, V.top}
    frontier = list(closed)
    join_t = V.join_table
    while frontier:
        x = frontier.pop()
        for y in list(closed):
            z = int(join_t[x, y])
            if z not in closed:
                closed.add(z)
                frontier.append(z)
    members = sorted(closed)
    return induced_substructure(V, members)


def induced_substructure(V, members, name=None):
    members = [int(m) for m in members]
    arr = np.array(members)
    leq = V.leq[np.ix_(arr, arr)]
    small = _trusted(
        leq,
        members.index(V.bot),
        members.index(V.top),
        tuple(V.names[m] for m in members),
        name or f"{V.name}_sub",
    )
    return SubstructureWitness(small, V, tuple(members))


def substructures(V):
    """Every join-closed subset containing bot and top, as witnesses."""
    middle = [i for i in range(V.size) if i not in (V.bot, V.top)]
    join_t = V.join_table
    for mask in range(1 << len(middle)):
        members = {V.bot, V.top} | {middle[i] for i in range(len(middle)) if mask >> i & 1}
        if all(int(join_t[x, y]) in members for x in members for y in members):
            yield induced_substructure(V, sorted(members))


def is_almost_end_extension(w):
    """No new element of big sits below a non-top element of small."""
    big = w.big
    image = np.zeros(big.size, dtype=bool)
    image[list(w.inclusion)] = True
    new = np.flatnonzero(~image)
    if len(new) == 0:
        return True
    targets = [t for t in w.inclusion if t != big.top]
    if not targets:
        return True
    return not big.leq[np.ix_(new, targets)].any()
