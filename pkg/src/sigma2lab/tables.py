"""Lattice tables and coding-ready sequential representations.

A table over a finite lattice L is a finite set of maps L -> N, stored as an
integer array with one row per map and one column per element of L. Two maps
agree modulo x when their values in column x coincide.

Representations built here for distributive lattices use coordinates: a map
is a vector v indexed by the join-irreducibles J of L, and its value at x is
a code for v restricted to the join-irreducibles below x. Stages of the
representation enlarge the coordinate alphabet one value at a time, which
makes every interpolant explicit. The coordinates travel with the table as
hints; every verifier re-checks candidate witnesses against the maps alone.
"""

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceeded, TooFewCoatoms
from .order import coatoms
from .report import Report

# ---------------------------------------------------------------- data types


@dataclass(frozen=True, eq=False)
class UslTable:
    lattice: object
    maps: np.ndarray
    name: str = "table"
    coords: np.ndarray = None  # optional coordinate hints, one row per map
    basis: tuple = None  # lattice elements indexing the coordinate columns

    @property
    def size(self):
        return self.maps.shape[0]

    def __len__(self):
        return self.size

    def row_index(self):
        return {tuple(int(v) for v in row): i for i, row in enumerate(self.maps)}

    def prefix(self, count, name=None):
        coords = None if self.coords is None else self.coords[:count]
        return UslTable(self.lattice, self.maps[:count], name or self.name, coords, self.basis)


@dataclass(frozen=True)
class CodingApparatus:
    """Coding set C inside stage 0 and the bijection g onto it.

    ``g`` maps (x, y, k) to a row index of stage 0.
    """

    g: dict

    @property
    def members(self):
        return frozenset(self.g.values())


@dataclass(frozen=True, eq=False)
class RepPrefix:
    """A finite prefix of a sequential representation.

    ``maps`` holds the rows of the last stage; every stage is an initial run
    of rows. ``chain`` lists (label, size) along the nesting, with labels
    "0", "1*", "1", "2*", "2", ... when starred stages are present and
    "0", "1", "2", ... otherwise.
    """

    lattice: object
    maps: np.ndarray
    chain: tuple
    coding: CodingApparatus = None
    coords: np.ndarray = None
    basis: tuple = None
    name: str = "rep"

    @property
    def starred(self):
        return any(label.endswith("*") for label, _ in self.chain)

    @property
    def depth(self):
        return max(int(label.rstrip("*")) for label, _ in self.chain)

    def _size(self, label):
        for lab, size in self.chain:
            if lab == label:
                return size
        raise KeyError(label)

    def stage_size(self, i):
        """Number of rows of stage i (stages beyond the depth reuse the last one)."""
        return self._size(str(min(i, self.depth)))

    def star_size(self, i):
        return self._size(f"{i}*")

    def table(self, count, name):
        coords = None if self.coords is None else self.coords[:count]
        return UslTable(self.lattice, self.maps[:count], name, coords, self.basis)

    def theta(self, i):
        return self.table(self.stage_size(i), f"theta{i}")

    def theta_star(self, i):
        return self.table(self.star_size(i), f"theta{i}*")

    def escape(self, c, x):
        """Least row of stage 0 outside C that agrees with row c modulo x."""
        members = self.coding.members if self.coding else frozenset()
        size0 = self.stage_size(0)
        col = self.maps[:size0, x]
        for b in range(size0):
            if b not in members and col[b] == self.maps[c, x]:
                return b
        return None


# ---------------------------------------------------------------- agreement helpers


def agreement(maps):
    """agree[p, q, x] is true when rows p and q agree modulo x."""
    return maps[:, None, :] == maps[None, :, :]


def agreement_masks(maps):
    """Bit x of masks[p, q] is set when rows p, q agree modulo x."""
    n = maps.shape[1]
    if n > 62:
        raise ValueError("lattices above 62 elements are not supported by bitmask helpers")
    weights = (np.int64(1) << np.arange(n, dtype=np.int64))
    masks = np.zeros((maps.shape[0], maps.shape[0]), dtype=np.int64)
    for x in range(n):
        col = maps[:, x]
        masks |= np.where(col[:, None] == col[None, :], weights[x], 0)
    return masks


def _locate(inner, outer):
    """Row positions of inner's maps inside outer, or None when some row is missing."""
    idx = outer.row_index()
    out = []
    for row in inner.maps:
        key = tuple(int(v) for v in row)
        if key not in idx:
            return None
        out.append(idx[key])
    return np.array(out, dtype=np.int64)


# ---------------------------------------------------------------- table axioms


def verify_table(t):
    """Check the five table axioms; each failure carries its first counterexample."""
    L = t.lattice
    M = np.asarray(t.maps)
    report = Report()
    zero = np.flatnonzero((M == 0).all(axis=1))
    report.add("zero map present", len(zero) > 0)
    bad_bot = np.flatnonzero(M[:, L.bot] != 0)
    report.add("bot is trivial", len(bad_bot) == 0, int(bad_bot[0]) if len(bad_bot) else None)
    rows = {tuple(r) for r in M.tolist()}
    report.add("maps distinct", len(rows) == M.shape[0])
    E = agreement(M)
    n = L.size

    first = None
    for x in range(n):
        for y in range(n):
            if L.leq[x, y] and x != y:
                viol = np.argwhere(E[:, :, y] & ~E[:, :, x])
                if len(viol):
                    first = (L.names[x], L.names[y], int(viol[0][0]), int(viol[0][1]))
                    break
        if first:
            break
    report.add("order", first is None, first)

    first = None
    for x in range(n):
        for y in range(n):
            if not L.leq[x, y]:
                if not (E[:, :, y] & ~E[:, :, x]).any():
                    first = (L.names[x], L.names[y])
                    break
        if first:
            break
    report.add("differentiation", first is None, first)

    first = None
    J = L.join_table
    for x in range(n):
        for y in range(x + 1, n):
            z = J[x, y]
            viol = np.argwhere(E[:, :, x] & E[:, :, y] & ~E[:, :, z])
            if len(viol):
                first = (L.names[x], L.names[y], int(viol[0][0]), int(viol[0][1]))
                break
        if first:
            break
    report.add("join", first is None, first)
    return report


def differentiation_outside(t, excluded):
    """For each x not below y, a pair outside ``excluded`` agreeing at y but not at x."""
    L = t.lattice
    keep = np.array([i for i in range(t.size) if i not in set(excluded)], dtype=np.int64)
    M = t.maps[keep]
    E = agreement(M)
    for x in range(L.size):
        for y in range(L.size):
            if not L.leq[x, y] and not (E[:, :, y] & ~E[:, :, x]).any():
                return (L.names[x], L.names[y])
    return None


# ---------------------------------------------------------------- meet interpolants


def check_meet_interpolants(inner, outer):
    """For x meet y = z and inner rows a =z b, look for a chain a =x g0 =y g1 =x g2 =y b in outer."""
    report = Report()
    pos = _locate(inner, outer)
    report.add("inner rows lie in outer", pos is not None)
    if pos is None:
        return report
    L = inner.lattice
    M = outer.maps
    first = None
    for x in range(L.size):
        for y in range(L.size):
            if L.leq[x, y] or L.leq[y, x]:
                continue
            z = L.meet_table[x, y]
            _, xc = np.unique(M[:, x], return_inverse=True)
            _, yc = np.unique(M[:, y], return_inverse=True)
            B = np.zeros((xc.max() + 1, yc.max() + 1), dtype=np.int64)
            B[xc, yc] = 1
            reach = (B @ B.T @ B) > 0
            ia, ib = xc[pos], yc[pos]
            same_z = inner.maps[:, z][:, None] == inner.maps[:, z][None, :]
            ok = reach[ia[:, None], ib[None, :]]
            viol = np.argwhere(same_z & ~ok)
            if len(viol):
                first = (L.names[x], L.names[y], int(viol[0][0]), int(viol[0][1]))
                break
        if first:
            break
    report.add("meet interpolants", first is None, first)
    return report


# ---------------------------------------------------------------- homogeneity interpolants


@dataclass
class HomogeneityCertificate:
    """Candidate homomorphisms and per-quadruple witnesses.

    ``pool[p]`` lists outer row indices, the image of each inner row under
    homomorphism p. ``witness(a0, a1, b0, b1)`` returns
    (gamma0, gamma1, f, g, h) as outer row / pool indices.
    """

    pool: np.ndarray
    witness: object


def is_homomorphism(inner_maps, outer_maps, images):
    """images[i] is the outer row for inner row i; agreement modulo every x must be preserved."""
    inner_maps = np.asarray(inner_maps)
    target = outer_maps[images]
    for x in range(inner_maps.shape[1]):
        _, cls = np.unique(inner_maps[:, x], return_inverse=True)
        vals = target[:, x]
        first = np.full(cls.max() + 1, -1, dtype=np.int64)
        first[cls[::-1]] = vals[::-1]
        if not (first[cls] == vals).all():
            return False
    return True


def _pool_homomorphisms(inner_maps, outer_maps, pool):
    """Vectorized homomorphism check for every row of pool."""
    ok = np.ones(pool.shape[0], dtype=bool)
    for x in range(inner_maps.shape[1]):
        _, cls = np.unique(inner_maps[:, x], return_inverse=True)
        rep = np.zeros(cls.max() + 1, dtype=np.int64)
        rep[cls[::-1]] = np.arange(len(cls))[::-1]
        vals = outer_maps[pool, x]
        ok &= (vals == vals[:, rep[cls]]).all(axis=1)
    return ok


def coordinate_certificate(inner, outer, coding=None):
    """Build witnesses from coordinate hints, or return None when hints are missing.

    For an anchor row a and a target b the map A(a, b) sends a row r to the
    row whose coordinate at j is b_j when r agrees with a modulo j, and a
    fresh value e otherwise. The map B(a0, a1, b) uses b_j only where r agrees
    with both anchors. Then f = A(a0, b0), h = A(a1, b1), g = B(a0, a1, b0).
    """
    if inner.coords is None or outer.coords is None or inner.basis is None:
        return None
    L = inner.lattice
    n_in = inner.size
    basis = list(inner.basis)
    cin = np.asarray(inner.coords)
    cout = np.asarray(outer.coords)
    avoid = set()
    if coding is not None:
        pos = _locate(inner, outer)
        members = [int(m) for m in coding.members]
        if pos is not None:
            avoid = {int(v) for m in members if m < len(pos) for v in cout[pos[m]]}
    values = sorted({int(v) for v in np.unique(cout)})
    fresh = [v for v in values if v not in avoid]
    if not fresh:
        return None
    e = fresh[-1]
    base = int(cout.max()) + 1
    codes = (cout * (base ** np.arange(cout.shape[1], dtype=np.int64))).sum(axis=1)
    order = np.argsort(codes)
    sorted_codes = codes[order]

    def lookup(coord_rows):
        c = (coord_rows * (base ** np.arange(coord_rows.shape[-1], dtype=np.int64))).sum(axis=-1)
        where = np.searchsorted(sorted_codes, c)
        where = np.clip(where, 0, len(sorted_codes) - 1)
        found = sorted_codes[where] == c
        return np.where(found, order[where], -1)

    # same_down[r, s, j]: r and s agree modulo basis element j
    M = inner.maps
    same_down = np.stack([M[:, None, j] == M[None, :, j] for j in basis], axis=2)
    # A(anchor, target)(r): coordinates cin[target] where same_down[r, anchor] else e
    A_coords = np.where(
        same_down.transpose(1, 0, 2)[:, None, :, :],  # anchor, 1, r, j
        cin[None, :, None, :],  # 1, target, 1, j
        e,
    )  # anchor, target, r, j
    A = lookup(A_coords).reshape(n_in * n_in, n_in)
    both = same_down.transpose(1, 0, 2)[:, None, :, :] & same_down.transpose(1, 0, 2)[None, :, :, :]
    # both[a0, a1, r, j]
    B_coords = np.where(both[:, :, None, :, :], cin[None, None, :, None, :], e)
    B = lookup(B_coords).reshape(n_in * n_in * n_in, n_in)
    pool = np.concatenate([A, B], axis=0)
    if (pool < 0).any():
        return None
    offset = n_in * n_in

    def witness(a0, a1, b0, b1):
        f = a0 * n_in + b0
        h = a1 * n_in + b1
        g = offset + (a0 * n_in + a1) * n_in + b0
        return pool[h, a0], pool[f, a1], f, g, h

    del L
    return HomogeneityCertificate(pool, witness)


def _valid_quadruples(masks_in):
    """valid[a0, a1, b0, b1]: agreement of (a0, a1) implies agreement of (b0, b1)."""
    return (masks_in[:, :, None, None] & ~masks_in[None, None, :, :]) == 0


def check_homogeneity_interpolants(
    inner, outer, coding=None, certificate=None, search_limit=5000, time_budget=None
):
    """Homogeneity interpolants for inner in outer, with coding avoidance when C is given.

    Witnesses come from ``certificate``, else from coordinate hints, else from
    a bounded search. Every witness is re-checked against the maps.
    """
    report = Report()
    pos = _locate(inner, outer)
    report.add("inner rows lie in outer", pos is not None)
    if pos is None:
        return report
    n = inner.size
    Mi = inner.maps
    Mo = outer.maps
    in_C = np.zeros(outer.size, dtype=bool)
    if coding is not None:
        for m in coding.members:
            in_C[pos[m] if m < n else m] = True
    masks = agreement_masks(Mi)
    cert = certificate or coordinate_certificate(inner, outer, coding)
    if cert is None:
        return _homogeneity_by_search(
            report, inner, outer, pos, in_C, masks, search_limit, time_budget
        )
    pool = cert.pool
    hom_ok = _pool_homomorphisms(Mi, Mo, pool)
    c_count = in_C[pool].sum(axis=1)
    first_bad = None
    accept_bad = None
    for a0 in range(n):
        a1, b0, b1 = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        valid = (masks[a0][:, None, None] & ~masks[b0, b1]) == 0
        g0, g1, f, g, h = cert.witness(a0, a1, b0, b1)
        ok = (
            hom_ok[f]
            & hom_ok[g]
            & hom_ok[h]
            & (pool[f, a0] == pos[b0])
            & (pool[f, a1] == g1)
            & (pool[g, a0] == g0)
            & (pool[g, a1] == g1)
            & (pool[h, a0] == g0)
            & (pool[h, a1] == pos[b1])
        )
        bad = np.argwhere(valid & ~ok)
        if len(bad) and first_bad is None:
            i, j, k = bad[0]
            first_bad = (a0, int(a1[i, j, k]), int(b0[i, j, k]), int(b1[i, j, k]))
        if coding is not None:
            same = a1 == a0
            allowed = []
            for p in (f, g, h):
                extra = c_count[p] - in_C[pool[p, a0]] - np.where(same, 0, in_C[pool[p, a1]])
                allowed.append(extra == 0)
            acc = allowed[0] & allowed[1] & allowed[2]
            bad = np.argwhere(valid & ~acc)
            if len(bad) and accept_bad is None:
                i, j, k = bad[0]
                accept_bad = (a0, int(a1[i, j, k]), int(b0[i, j, k]), int(b1[i, j, k]))
    report.add("homogeneity interpolants", first_bad is None, first_bad)
    if coding is not None:
        report.add("interpolants avoid the coding set", accept_bad is None, accept_bad)
    return report


def _candidate_rows(Mi, Mo, alpha, phi):
    mask = np.ones(Mo.shape[0], dtype=bool)
    for x in range(Mi.shape[1]):
        v = phi[x].get(int(Mi[alpha, x]))
        if v is not None:
            mask &= Mo[:, x] == v
    return np.flatnonzero(mask)


def find_homomorphism(Mi, Mo, fixed, forbidden=None, allowed_forbidden=()):
    """Backtracking search for a homomorphism with prescribed images.

    ``fixed`` maps inner rows to outer rows; rows in ``forbidden`` may only be
    used as images of inner rows listed in ``allowed_forbidden``.
    """
    n = Mi.shape[0]
    order = list(fixed) + [a for a in range(n) if a not in fixed]
    phi = [dict() for _ in range(Mi.shape[1])]
    image = [-1] * n

    def assign(a, r):
        added = []
        for x in range(Mi.shape[1]):
            key = int(Mi[a, x])
            if key in phi[x]:
                if phi[x][key] != Mo[r, x]:
                    for xx, kk in added:
                        del phi[xx][kk]
                    return None
            else:
                phi[x][key] = int(Mo[r, x])
                added.append((x, key))
        return added

    def rec(k):
        if k == n:
            return True
        a = order[k]
        if a in fixed:
            cands = [fixed[a]]
        else:
            cands = _candidate_rows(Mi, Mo, a, phi)
        for r in cands:
            if forbidden is not None and forbidden[r] and a not in allowed_forbidden:
                continue
            added = assign(a, int(r))
            if added is None:
                continue
            image[a] = int(r)
            if rec(k + 1):
                return True
            for x, key in added:
                del phi[x][key]
            image[a] = -1
        return False

    return list(image) if rec(0) else None


def _homogeneity_by_search(report, inner, outer, pos, in_C, masks, limit, time_budget):
    n = inner.size
    valid = np.argwhere(_valid_quadruples(masks))
    if len(valid) > limit:
        report.add(
            "homogeneity interpolants",
            False,
            None,
            f"{len(valid)} quadruples exceed the search limit {limit}; supply a certificate",
        )
        return report
    Mi, Mo = inner.maps, outer.maps
    forbidden = in_C if in_C.any() else None
    start = time.monotonic()
    first_bad = None
    for a0, a1, b0, b1 in valid.tolist():
        if time_budget is not None and time.monotonic() - start > time_budget:
            raise CapExceeded("time budget exhausted in homogeneity search")
        if not _quadruple_has_witness(Mi, Mo, pos, forbidden, a0, a1, b0, b1):
            first_bad = (a0, a1, b0, b1)
            break
    report.add("homogeneity interpolants", first_bad is None, first_bad, "by search")
    return report


def _quadruple_has_witness(Mi, Mo, pos, forbidden, a0, a1, b0, b1):
    pair = (a0, a1)
    outer_size = Mo.shape[0]
    for g1 in range(outer_size):
        fixed_f = {a0: int(pos[b0])} if a0 == a1 else {a0: int(pos[b0]), a1: g1}
        if a0 == a1 and g1 != pos[b0]:
            continue
        if find_homomorphism(Mi, Mo, fixed_f, forbidden, pair) is None:
            continue
        for g0 in range(outer_size):
            fixed_h = {a1: int(pos[b1])} if a0 == a1 else {a0: g0, a1: int(pos[b1])}
            if a0 == a1 and g0 != pos[b1]:
                continue
            if find_homomorphism(Mi, Mo, fixed_h, forbidden, pair) is None:
                continue
            fixed_g = {a0: g0} if a0 == a1 else {a0: g0, a1: g1}
            if a0 == a1 and g0 != g1:
                continue
            if find_homomorphism(Mi, Mo, fixed_g, forbidden, pair) is not None:
                return True
    return False


# ---------------------------------------------------------------- coding-ready checks


def coding_domain(L):
    """Ordered (x, y, k) with x join y = top and x, y distinct from top."""
    out = []
    for x in range(L.size):
        for y in range(L.size):
            if x != L.top and y != L.top and L.join_table[x, y] == L.top:
                out.extend([(x, y, 0), (x, y, 1)])
    return out


def check_property5(r, i, x):
    """For coatom x: rows of stage i+1* outside stage i matching any pair of stage-i rows."""
    size_i = r.stage_size(i)
    size_s = r.star_size(i + 1)
    M = r.maps
    masks = agreement_masks(M[:size_s])
    new = np.arange(size_i, size_s)
    if len(new) == 0:
        return (0, 0)
    col = M[:, x]
    for a0 in range(size_i):
        c0 = new[col[new] == col[a0]]
        for a1 in range(size_i):
            c1 = new[col[new] == col[a1]]
            if len(c0) == 0 or len(c1) == 0:
                return (a0, a1)
            need = masks[a0, a1]
            if not ((need & ~masks[np.ix_(c0, c1)]) == 0).any():
                return (a0, a1)
    return None


def _stage_labels(r):
    return [label for label, _ in r.chain]


def verify_nesting(r):
    report = Report()
    sizes = [size for _, size in r.chain]
    labels = _stage_labels(r)
    strict_ok = True
    first = None
    for k in range(1, len(sizes)):
        prev, cur = labels[k - 1], labels[k]
        # only the step from a plain stage i >= 1 into the next starred stage may be an equality
        may_equal = cur.endswith("*") and prev != "0" or not r.starred
        if sizes[k] < sizes[k - 1] or (sizes[k] == sizes[k - 1] and not may_equal):
            strict_ok = False
            first = (prev, cur)
            break
    report.add("stages nest as displayed", strict_ok, first)
    return report


def _stage_tables(r):
    return [(label, r.table(size, f"theta{label}")) for label, size in r.chain]


def verify_rep_prefix(r, search_limit=5000):
    """Check a prefix of a sequential representation (no coding requirements)."""
    report = Report()
    for label, t in _stage_tables(r):
        report.extend(verify_table(t), f"stage {label}: ")
    report.extend(verify_nesting(r))
    for i in range(r.depth):
        report.extend(check_meet_interpolants(r.theta(i), r.theta(i + 1)), f"stage {i}->{i + 1}: ")
        report.extend(
            check_homogeneity_interpolants(r.theta(i), r.theta(i + 1), search_limit=search_limit),
            f"stage {i}->{i + 1}: ",
        )
    return report


def verify_coding_ready(r, search_limit=5000):
    """Check every coding-ready property of a representation prefix."""
    report = Report()
    L = r.lattice
    A = sorted(coatoms(L))
    report.add("at least two coatoms", len(A) >= 2, len(A))
    report.add("starred stages present", r.starred)
    report.add("coding apparatus present", r.coding is not None)
    if r.coding is None or not r.starred:
        return report
    for label, t in _stage_tables(r):
        report.extend(verify_table(t), f"stage {label}: ")
    report.extend(verify_nesting(r))

    size0 = r.stage_size(0)
    domain = coding_domain(L)
    g = r.coding.g
    C = r.coding.members
    report.add("coding map defined on the whole domain", set(g) == set(domain))
    report.add("coding map injective", len(C) == len(g))
    report.add("coding set inside stage 0", all(0 <= c < size0 for c in C))
    report.add("coding set proper", 0 < len(C) < size0)
    M = r.maps
    first = None
    for x, y, _ in domain:
        p, q = g.get((x, y, 0)), g.get((x, y, 1))
        if p is None or q is None or M[p, x] != M[q, x] or M[p, y] == M[q, y]:
            first = (L.names[x], L.names[y])
            break
    report.add("coding pairs split modulo y only (3)", first is None, first)
    first = None
    for c in sorted(C):
        for x in range(L.size):
            if x != L.top and r.escape(c, x) is None:
                first = (c, L.names[x])
                break
        if first:
            break
    report.add("every coding row has escapes (4)", first is None, first)
    bad = differentiation_outside(r.theta(0), C)
    report.add("differentiation outside the coding set", bad is None, bad)

    for i in range(r.depth):
        report.extend(
            check_meet_interpolants(r.theta(i), r.theta_star(i + 1)),
            f"stage {i}->{i + 1}*: ",
        )
        report.extend(
            check_homogeneity_interpolants(
                r.theta_star(i + 1), r.theta(i + 1), r.coding, search_limit=search_limit
            ),
            f"stage {i + 1}*->{i + 1}: ",
        )
        first = None
        for x in A:
            bad = check_property5(r, i, x)
            if bad is not None:
                first = (i, L.names[x], bad)
                break
        report.add(f"stage {i}: property (5) for coatoms", first is None, first)
    return report


# ---------------------------------------------------------------- builders


def _first_occurrence_ok(value, seen_max):
    return value <= seen_max + 1


def build_table(L, max_maps=12, node_budget=2_000_000, time_budget=None):
    """Smallest table found by iterative deepening on the number of maps.

    Maps are chosen one at a time with values renamed by first occurrence in
    each column; the top column of the k-th map is always the new value k,
    since distinct maps must differ at top.
    """
    n = L.size
    if n == 1:
        return UslTable(L, np.zeros((1, 1), dtype=np.int64), "table")
    columns = [c for c in L.linear_extension if c != L.bot]
    lower = {x: [y for y in range(n) if L.leq[y, x] and y != x and y != L.bot] for x in columns}
    joins_into = {x: [] for x in columns}
    for y in range(n):
        for z in range(y + 1, n):
            s = int(L.join_table[y, z])
            if s != y and s != z and s in joins_into:
                joins_into[s].append((y, z))
    start = time.monotonic()
    nodes = [0]

    for count in range(2, max_maps + 1):
        rows = [np.zeros(n, dtype=np.int64)]
        seen_max = np.zeros(n, dtype=np.int64)

        def agrees_below_ok(row, prev, x):
            same = row[x] == prev[x]
            if same and any(row[y] != prev[y] for y in lower[x]):
                return False
            if not same and any(row[y] == prev[y] and row[z] == prev[z] for y, z in joins_into[x]):
                return False
            return True

        def fill(row, k):
            nodes[0] += 1
            if nodes[0] > node_budget:
                raise CapExceeded("node budget exhausted in table search")
            if time_budget is not None and time.monotonic() - start > time_budget:
                raise CapExceeded("time budget exhausted in table search")
            if k == len(columns):
                yield row.copy()
                return
            x = columns[k]
            if x == L.top:
                options = [int(seen_max[x]) + 1]
            else:
                options = range(int(seen_max[x]) + 2)
            for v in options:
                row[x] = v
                if all(agrees_below_ok(row, prev, x) for prev in rows):
                    yield from fill(row, k + 1)
            row[x] = 0

        def extend():
            if len(rows) == count:
                t = UslTable(L, np.array(rows), "table")
                return t if verify_table(t).ok else None
            for row in fill(np.zeros(n, dtype=np.int64), 0):
                old = seen_max.copy()
                np.maximum(seen_max, row, out=seen_max)
                rows.append(row)
                found = extend()
                if found is not None:
                    return found
                rows.pop()
                seen_max[:] = old
            return None

        found = extend()
        if found is not None:
            return found
    raise CapExceeded(f"no table with at most {max_maps} maps found")


def _coordinate_rows(num_values, basis_size):
    """All coordinate vectors over range(num_values), sorted by (max value, lexicographic)."""
    if basis_size == 0:
        return np.zeros((1, 0), dtype=np.int64)
    rows = np.array(list(itertools.product(range(num_values), repeat=basis_size)), dtype=np.int64)
    key = np.lexsort(tuple(rows[:, k] for k in reversed(range(basis_size))) + (rows.max(axis=1),))
    return rows[key]


def _maps_from_coords(L, basis, coords, base):
    n = L.size
    M = np.zeros((coords.shape[0], n), dtype=np.int64)
    for x in range(n):
        below = [k for k, j in enumerate(basis) if L.leq[j, x]]
        code = np.zeros(coords.shape[0], dtype=np.int64)
        for k in below:
            code = code * base + coords[:, k]
        M[:, x] = code
    return M


def _search_coding(L, M0, domain, time_budget=None):
    """Assign distinct stage-0 rows to the coding domain, pair by pair."""
    size0 = M0.shape[0]
    zero = int(np.flatnonzero((M0 == 0).all(axis=1))[0])
    pairs = [(domain[k][0], domain[k][1]) for k in range(0, len(domain), 2)]
    used = set()
    chosen = {}
    start = time.monotonic()

    def rec(k):
        if time_budget is not None and time.monotonic() - start > time_budget:
            raise CapExceeded("time budget exhausted in coding search")
        if k == len(pairs):
            C = set(chosen.values())
            for c in C:
                for x in range(L.size):
                    if x == L.top:
                        continue
                    if not any(b not in C and M0[b, x] == M0[c, x] for b in range(size0)):
                        return False
            t = UslTable(L, M0, "theta0")
            return differentiation_outside(t, C) is None
        x, y = pairs[k]
        for p in range(size0):
            if p in used or p == zero:
                continue
            for q in range(size0):
                if q in used or q == zero or q == p:
                    continue
                if M0[p, x] == M0[q, x] and M0[p, y] != M0[q, y]:
                    chosen[(x, y, 0)], chosen[(x, y, 1)] = p, q
                    used.update((p, q))
                    if rec(k + 1):
                        return True
                    used.difference_update((p, q))
                    del chosen[(x, y, 0)], chosen[(x, y, 1)]
        return False

    return dict(chosen) if rec(0) else None


def build_rep_prefix(L, depth, with_coding=False, max_values=8, time_budget=None):
    """Representation prefix of the given depth for a distributive lattice.

    Non-distributive lattices raise CapExceeded: no construction is
    attempted for them here.
    """
    if with_coding and len(coatoms(L)) < 2:
        raise TooFewCoatoms("coding needs at least two coatoms")
    if not L.is_distributive():
        raise CapExceeded("representation builder handles distributive lattices only")
    basis = tuple(L.join_irreducibles)
    domain = coding_domain(L) if with_coding else []
    s0 = 2
    coding = None
    if with_coding:
        for s0 in range(2, max_values + 1):
            coords0 = _coordinate_rows(s0, len(basis))
            M0 = _maps_from_coords(L, basis, coords0, 64)
            if len(coords0) < len(domain) + 1:
                continue
            coding = _search_coding(L, M0, domain, time_budget)
            if coding is not None:
                break
        else:
            raise CapExceeded(f"no coding set with at most {max_values} coordinate values")
    if with_coding:
        stage_values = [("0", s0)]
        for i in range(1, depth + 1):
            stage_values.append((f"{i}*", s0 + 2 * i - 1))
            stage_values.append((str(i), s0 + 2 * i))
    else:
        stage_values = [(str(i), s0 + i) for i in range(depth + 1)]
    top_values = stage_values[-1][1]
    coords = _coordinate_rows(top_values, len(basis))
    if len(basis):
        width = coords.max(axis=1)
    else:
        width = np.zeros(1, dtype=np.int64)
    chain = tuple((label, int((width < values).sum())) for label, values in stage_values)
    M = _maps_from_coords(L, basis, coords, top_values)
    if coding is not None:
        # stage 0 rows keep their order; recompute row indices against the final coding
        coords0 = _coordinate_rows(s0, len(basis))
        index = {tuple(c): i for i, c in enumerate(coords.tolist())}
        g = {key: index[tuple(coords0[row].tolist())] for key, row in coding.items()}
        coding = CodingApparatus(g)
    return RepPrefix(L, M, chain, coding, coords, basis, name=f"rep_{L.name}")
