"""Line-oriented text formats for structures, maps, tables and trees.

Documents are sequences of blocks. Each block opens with a keyword line and
closes with ``end``. Blank lines and lines starting with ``#`` are ignored.
"""

import numpy as np

from .errors import FormatError, ValidationError
from .order import make_witness, transitive_closure, validate


def _lines(text):
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield number, line


def split_blocks(text):
    """Return [(keyword, header_args, header_line, [(line_no, line), ...])]."""
    blocks = []
    current = None
    for number, line in _lines(text):
        if current is None:
            words = line.split()
            current = (words[0], words[1:], number, [])
            continue
        if line == "end":
            blocks.append(current)
            current = None
        else:
            current[3].append((number, line))
    if current is not None:
        raise FormatError(f"block '{current[0]}' opened here is missing 'end'", current[2])
    return blocks


# ---------------------------------------------------------------- structures


def dump_structure(U):
    lines = [f"usl {U.name}", "elements: " + " ".join(U.names)]
    lines.append(f"bot: {U.names[U.bot]}")
    lines.append(f"top: {U.names[U.top]}")
    covers = U.covers
    for lo in range(U.size):
        for hi in np.flatnonzero(covers[lo]):
            lines.append(f"{U.names[lo]} < {U.names[hi]}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def structure_from_block(block):
    keyword, args, header_line, body = block
    if keyword != "usl":
        raise FormatError(f"expected 'usl', found '{keyword}'", header_line)
    name = args[0] if args else "U"
    elements = None
    bot = top = None
    covers = []
    for number, line in body:
        if line.startswith("elements:"):
            elements = line[len("elements:"):].split()
            if not elements:
                raise FormatError("empty element list", number)
            if len(set(elements)) != len(elements):
                raise FormatError("duplicate element name", number)
        elif line.startswith("bot:"):
            bot = (line[4:].strip(), number)
        elif line.startswith("top:"):
            top = (line[4:].strip(), number)
        else:
            parts = line.split()
            if len(parts) != 3 or parts[1] != "<":
                raise FormatError(f"cannot read cover line '{line}'", number)
            covers.append((parts[0], parts[2], number))
    if elements is None:
        raise FormatError("missing 'elements:' line", header_line)
    idx = {e: i for i, e in enumerate(elements)}
    bot = bot or (elements[0], header_line)
    top = top or (elements[-1], header_line)
    for label, line_no in (bot, top):
        if label not in idx:
            raise FormatError(f"unknown element '{label}'", line_no)
    n = len(elements)
    rel = np.eye(n, dtype=bool)
    for lo, hi, number in covers:
        if lo not in idx or hi not in idx:
            raise FormatError(f"unknown element in '{lo} < {hi}'", number)
        rel[idx[lo], idx[hi]] = True
    rel = transitive_closure(rel)
    try:
        return validate(rel, idx[bot[0]], idx[top[0]], elements, name)
    except ValidationError as exc:
        line_no = _blame_line(exc, covers, header_line)
        raise FormatError(str(exc), line_no) from exc


def _blame_line(exc, covers, default):
    pair = getattr(exc, "pair", None)
    names = set()
    if pair is not None:
        names = {str(p) for p in pair}
    else:
        names = {str(getattr(exc, "x", "")), str(getattr(exc, "y", ""))}
    for lo, hi, number in covers:
        if lo in names or hi in names:
            return number
    return default


def parse_structure(text):
    blocks = [b for b in split_blocks(text) if b[0] == "usl"]
    if len(blocks) != 1:
        raise FormatError(f"expected one structure, found {len(blocks)}")
    return structure_from_block(blocks[0])


def parse_structures(text):
    return [structure_from_block(b) for b in split_blocks(text) if b[0] == "usl"]


# ---------------------------------------------------------------- inclusions


def dump_map(name, source, target, mapping):
    lines = [f"map {name} {source.name} {target.name}"]
    for i, j in enumerate(mapping):
        lines.append(f"{source.names[i]} -> {target.names[j]}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_pair_document(text):
    """Two structures plus an optional ``map`` block; returns a SubstructureWitness.

    Without a map block elements are matched by name.
    """
    blocks = split_blocks(text)
    structures = [structure_from_block(b) for b in blocks if b[0] == "usl"]
    if len(structures) != 2:
        raise FormatError(f"expected two structures, found {len(structures)}")
    small, big = structures
    maps = [b for b in blocks if b[0] == "map"]
    if maps:
        _, _, header, body = maps[0]
        pairs = {}
        for number, line in body:
            parts = line.split()
            if len(parts) != 3 or parts[1] != "->":
                raise FormatError(f"cannot read map line '{line}'", number)
            if parts[0] not in small.names or parts[2] not in big.names:
                raise FormatError(f"unknown element in '{line}'", number)
            pairs[small.index(parts[0])] = big.index(parts[2])
        if len(pairs) != small.size:
            raise FormatError("map must cover every element of the first structure", header)
        inclusion = [pairs[i] for i in range(small.size)]
    else:
        missing = [n for n in small.names if n not in big.names]
        if missing:
            raise FormatError(f"element '{missing[0]}' has no namesake in the second structure")
        inclusion = [big.index(n) for n in small.names]
    from .errors import InvalidWitness

    try:
        return make_witness(small, big, inclusion)
    except InvalidWitness as exc:
        raise FormatError(str(exc)) from exc


def parse_map_block(block, source, target):
    """A total map from a ``map`` block, as a tuple of target indices."""
    _, _, header, body = block
    pairs = {}
    for number, line in body:
        parts = line.split()
        if len(parts) != 3 or parts[1] != "->":
            raise FormatError(f"cannot read map line '{line}'", number)
        if parts[0] not in source.names or parts[2] not in target.names:
            raise FormatError(f"unknown element in '{line}'", number)
        pairs[source.index(parts[0])] = target.index(parts[2])
    if len(pairs) != source.size:
        raise FormatError("map must cover every element of its source", header)
    return tuple(pairs[i] for i in range(source.size))


# ---------------------------------------------------------------- tables


def _int_row(text, number):
    try:
        return [int(v) for v in text.split()]
    except ValueError:
        raise FormatError(f"expected integers, found '{text.strip()}'", number) from None


def _element_pair(text, L, number):
    inner = text.strip()
    if not (inner.startswith("(") and inner.endswith(")")):
        raise FormatError(f"expected (x,y,k), found '{inner}'", number)
    parts = [p.strip() for p in inner[1:-1].split(",")]
    if len(parts) != 3 or parts[0] not in L.names or parts[1] not in L.names or parts[2] not in ("0", "1"):
        raise FormatError(f"cannot read coding key '{inner}'", number)
    return (L.index(parts[0]), L.index(parts[1]), int(parts[2]))


def _dump_rows(maps, coords=None):
    lines = [f"alpha{i}: " + " ".join(str(int(v)) for v in row) for i, row in enumerate(maps)]
    if coords is not None:
        lines += [f"coords alpha{i}: " + " ".join(str(int(v)) for v in row) for i, row in enumerate(coords)]
    return lines


def dump_table(t, with_lattice=True):
    L = t.lattice
    lines = [f"table {t.name} over {L.name}"]
    if t.basis is not None:
        lines.append("basis: " + " ".join(L.names[b] for b in t.basis))
    lines += _dump_rows(t.maps, t.coords)
    lines.append("end")
    head = dump_structure(L) if with_lattice else ""
    return head + "\n".join(lines) + "\n"


def _rows_from_body(body, L, header):
    rows, coords, coding, basis, extra = {}, {}, {}, None, []
    for number, line in body:
        key, sep, rest = line.partition(":")
        if not sep:
            raise FormatError(f"cannot read line '{line}'", number)
        key = key.strip()
        if key.startswith("alpha") and key[5:].isdigit():
            row = _int_row(rest, number)
            if len(row) != L.size:
                raise FormatError(f"row has {len(row)} values, lattice has {L.size} elements", number)
            rows[int(key[5:])] = row
        elif key.startswith("coords alpha") and key[12:].isdigit():
            coords[int(key[12:])] = _int_row(rest, number)
        elif key == "coding":
            target, arrow, source = rest.partition("<-")
            target = target.strip()
            if not arrow or not (target.startswith("alpha") and target[5:].isdigit()):
                raise FormatError(f"cannot read coding line '{line}'", number)
            coding[_element_pair(source, L, number)] = int(target[5:])
        elif key == "basis":
            names = rest.split()
            unknown = [n for n in names if n not in L.names]
            if unknown:
                raise FormatError(f"unknown element '{unknown[0]}'", number)
            basis = tuple(L.index(n) for n in names)
        else:
            extra.append((key, rest.strip(), number))
    if sorted(rows) != list(range(len(rows))):
        raise FormatError("rows must be numbered alpha0, alpha1, ... without gaps", header)
    maps = np.array([rows[i] for i in range(len(rows))], dtype=np.int64).reshape(len(rows), L.size)
    coord_arr = None
    if coords:
        if sorted(coords) != list(range(len(rows))):
            raise FormatError("coords must be given for every row or none", header)
        coord_arr = np.array([coords[i] for i in range(len(rows))], dtype=np.int64)
    for key, row in coding.items():
        if row >= len(rows):
            raise FormatError(f"coding row alpha{row} does not exist", header)
    return maps, coord_arr, coding, basis, extra


def _lattice_for(blocks, name, header):
    for b in blocks:
        if b[0] == "usl" and (b[1][:1] or ["U"])[0] == name:
            return structure_from_block(b)
    raise FormatError(f"lattice '{name}' is not defined in the document", header)


def parse_table(text):
    from .tables import UslTable

    blocks = split_blocks(text)
    found = [b for b in blocks if b[0] == "table"]
    if len(found) != 1:
        raise FormatError(f"expected one table, found {len(found)}")
    _, args, header, body = found[0]
    if len(args) != 3 or args[1] != "over":
        raise FormatError("table header must read 'table <name> over <lattice>'", header)
    L = _lattice_for(blocks, args[2], header)
    maps, coords, coding, basis, extra = _rows_from_body(body, L, header)
    if coding or extra:
        number = extra[0][2] if extra else header
        raise FormatError("unexpected line in table block", number)
    return UslTable(L, maps, args[0], coords, basis)


def dump_rep(r, with_lattice=True):
    L = r.lattice
    lines = [f"rep {r.name} over {L.name}"]
    lines.append("stages: " + " ".join(f"{label}:{size}" for label, size in r.chain))
    if r.basis is not None:
        lines.append("basis: " + " ".join(L.names[b] for b in r.basis))
    lines += _dump_rows(r.maps, r.coords)
    if r.coding is not None:
        for (x, y, k), row in r.coding.g.items():
            lines.append(f"coding: alpha{row} <- ({L.names[x]},{L.names[y]},{k})")
    lines.append("end")
    head = dump_structure(L) if with_lattice else ""
    return head + "\n".join(lines) + "\n"


def rep_from_blocks(blocks):
    from .tables import CodingApparatus, RepPrefix

    found = [b for b in blocks if b[0] == "rep"]
    if len(found) != 1:
        raise FormatError(f"expected one rep block, found {len(found)}")
    _, args, header, body = found[0]
    if len(args) != 3 or args[1] != "over":
        raise FormatError("rep header must read 'rep <name> over <lattice>'", header)
    L = _lattice_for(blocks, args[2], header)
    maps, coords, coding, basis, extra = _rows_from_body(body, L, header)
    chain = None
    for key, rest, number in extra:
        if key != "stages":
            raise FormatError(f"unexpected line '{key}: {rest}'", number)
        chain = []
        for item in rest.split():
            label, _, size = item.partition(":")
            if not size.isdigit() or not label.rstrip("*").isdigit():
                raise FormatError(f"cannot read stage '{item}'", number)
            if int(size) > len(maps):
                raise FormatError(f"stage {label} has more rows than the rep", number)
            chain.append((label, int(size)))
        chain = tuple(chain)
    if chain is None:
        raise FormatError("missing 'stages:' line", header)
    return RepPrefix(L, maps, chain, CodingApparatus(coding) if coding else None, coords, basis, args[0])


def parse_rep(text):
    return rep_from_blocks(split_blocks(text))


# ---------------------------------------------------------------- trees


def dump_tree(T, with_rep=True):
    def vals(s):
        return " ".join(str(v) for v in s)

    lines = [f"tree {T.name} over {T.rep.name}"]
    if T.offset:
        lines.append(f"offset: {T.offset}")
    lines.append(f"root: {vals(T.root)}".rstrip())
    for l in range(T.depth):
        lines.append(f"pi{l}: {vals(T.pis[l])}".rstrip())
        for a, tail in enumerate(T.rhos[l]):
            lines.append(f"rho{l},{a}: {vals(tail)}")
    lines.append("end")
    head = dump_rep(T.rep) if with_rep else ""
    return head + "\n".join(lines) + "\n"


def tree_from_blocks(blocks, rep=None):
    from .errors import InvalidTree
    from .trees import make_tree

    found = [b for b in blocks if b[0] == "tree"]
    if len(found) != 1:
        raise FormatError(f"expected one tree block, found {len(found)}")
    _, args, header, body = found[0]
    if len(args) != 3 or args[1] != "over":
        raise FormatError("tree header must read 'tree <name> over <rep>'", header)
    if rep is None:
        rep = rep_from_blocks(blocks)
    if rep.name != args[2]:
        raise FormatError(f"tree refers to rep '{args[2]}', document defines '{rep.name}'", header)
    root, offset, pis, rhos = (), 0, {}, {}
    for number, line in body:
        key, sep, rest = line.partition(":")
        if not sep:
            raise FormatError(f"cannot read line '{line}'", number)
        key = key.strip()
        values = tuple(_int_row(rest, number))
        if key == "root":
            root = values
        elif key == "offset":
            if len(values) != 1:
                raise FormatError("offset takes one integer", number)
            offset = values[0]
        elif key.startswith("pi") and key[2:].isdigit():
            pis[int(key[2:])] = values
        elif key.startswith("rho") and "," in key:
            level, _, alpha = key[3:].partition(",")
            if not (level.isdigit() and alpha.isdigit()):
                raise FormatError(f"cannot read tail label '{key}'", number)
            rhos.setdefault(int(level), {})[int(alpha)] = values
        else:
            raise FormatError(f"unexpected line '{line}'", number)
    depth = len(pis)
    if sorted(pis) != list(range(depth)) or sorted(rhos) != list(range(depth)):
        raise FormatError("levels must be numbered 0, 1, ... with a pi line and tails each", header)
    tails = []
    for l in range(depth):
        family = rhos[l]
        if sorted(family) != list(range(len(family))):
            raise FormatError(f"tails of level {l} must be numbered 0, 1, ...", header)
        tails.append([family[a] for a in range(len(family))])
    try:
        return make_tree(rep, root, [pis[l] for l in range(depth)], tails, offset, args[0])
    except InvalidTree as exc:
        raise FormatError(str(exc), header) from exc


def parse_tree(text, rep=None):
    return tree_from_blocks(split_blocks(text), rep)


def dump_decision_table(q, name="q"):
    lines = [f"decision {name}"]
    for (n, sigma), bit in sorted(q.values.items()):
        lines.append((" ".join(str(v) for v in sigma) + f" -> {bit}").strip())
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_decision_table(text):
    from .trees import DecisionTable

    found = [b for b in split_blocks(text) if b[0] == "decision"]
    if len(found) != 1:
        raise FormatError(f"expected one decision block, found {len(found)}")
    values = {}
    for number, line in found[0][3]:
        left, arrow, right = line.rpartition("->")
        if not arrow or right.strip() not in ("0", "1"):
            raise FormatError(f"cannot read decision line '{line}'", number)
        sigma = tuple(_int_row(left, number))
        values[(len(sigma), sigma)] = int(right)
    return DecisionTable(values)


# ---------------------------------------------------------------- decompositions


def dump_decomposition(d):
    """Bundle of structures and explicit maps, enough to re-verify from scratch."""
    U, V = d.pair.small, d.pair.big
    U1, U2 = d.free.result, d.u2
    W = d.doubled.result
    parts = [dump_structure(S) for S in (U, V, U1, W, U2)]
    parts.append(dump_map("inclusion", U, V, d.pair.inclusion))
    parts.append(dump_map("h", U1, V, d.h))
    parts.append(dump_map("quotient", W, U2, d.classes))
    parts.append(dump_map("f", V, U2, d.f))
    names = [f"{V.names[v]} -> {a}" for a, v in zip(d.fresh_names, sorted(d.g))]
    parts.append("\n".join(["generators", *names, f"b: {d.b_name}", "end"]) + "\n")
    return "".join(parts)


def parse_decomposition(text):
    """Rebuild a DecompositionWitness from a bundle; the caller re-verifies it."""
    from .extensions import DecompositionWitness, free_extend

    blocks = split_blocks(text)
    structs = [structure_from_block(b) for b in blocks if b[0] == "usl"]
    if len(structs) != 5:
        raise FormatError(f"expected five structures, found {len(structs)}")
    U, V, U1, W, U2 = structs
    maps = {b[1][0]: b for b in blocks if b[0] == "map" and b[1]}
    for key in ("inclusion", "h", "quotient", "f"):
        if key not in maps:
            raise FormatError(f"missing map '{key}'")
    gens = [b for b in blocks if b[0] == "generators"]
    if len(gens) != 1:
        raise FormatError("missing generators block")
    owner, b_name = {}, None
    for number, line in gens[0][3]:
        if line.startswith("b:"):
            b_name = line[2:].strip()
            continue
        parts = line.split()
        if len(parts) != 3 or parts[1] != "->" or parts[0] not in V.names:
            raise FormatError(f"cannot read generator line '{line}'", number)
        owner[parts[2]] = V.index(parts[0])
    if b_name is None:
        raise FormatError("generators block needs a 'b:' line", gens[0][2])
    fresh = tuple(owner)
    try:
        inclusion = parse_map_block(maps["inclusion"], U, V)
        w = make_witness(U, V, inclusion)
    except Exception as exc:  # noqa: BLE001
        raise FormatError(str(exc)) from exc
    free = free_extend(U, fresh, name=U1.name)
    doubled = free_extend(free.result, (b_name,), name=W.name)
    if free.result.names != U1.names or doubled.result.names != W.names:
        raise FormatError("bundle structures do not match the free extensions they name")
    if not (np.array_equal(free.result.leq, U1.leq) and np.array_equal(doubled.result.leq, W.leq)):
        raise FormatError("bundle structures do not match the free extensions they name")
    h = parse_map_block(maps["h"], U1, V)
    classes = parse_map_block(maps["quotient"], W, U2)
    f = parse_map_block(maps["f"], V, U2)
    u1_in_u2 = tuple(classes[doubled.embedding[x]] for x in range(U1.size))
    generator = classes[doubled.element(U1.bot, {b_name})]
    g = {v: free.element(U.bot, {a}) for a, v in owner.items()}
    return DecompositionWitness(w, free, h, g, doubled, classes, U2, u1_in_u2, generator, f, fresh, b_name)
