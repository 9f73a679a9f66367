"""Command-line front end.

Exit codes: 0 true or valid, 1 false or invalid, 2 parse or format error,
3 cap exceeded, 4 sentence outside the two-quantifier fragment.
"""

import argparse
import json
import sys

from . import textio
from .errors import (
    CapExceeded,
    FormatError,
    NotPi2,
    NotSigma2,
    ParseError,
    Sigma2LabError,
)

TRUE, FALSE, BAD_INPUT, CAPPED, FRAGMENT = 0, 1, 2, 3, 4


# ---------------------------------------------------------------- output


def render_text(payload):
    """key: value lines; multi-line strings become indented blocks."""
    lines = []
    for key, value in payload.items():
        if isinstance(value, str) and "\n" in value:
            lines.append(f"{key}:")
            lines.extend("  " + line for line in value.rstrip("\n").split("\n"))
        elif isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
            lines.append(f"{key}:")
            lines.extend("  - " + json.dumps(v, sort_keys=True) for v in value)
        elif isinstance(value, str):
            lines.append(f"{key}: {value}")
        else:
            lines.append(f"{key}: {json.dumps(value, sort_keys=True)}")
    return "\n".join(lines) + "\n"


def _close_block(lines):
    if lines and all(line.startswith("- ") for line in lines):
        return [json.loads(line[2:]) for line in lines]
    return "\n".join(lines) + "\n"


def parse_text(text):
    """Inverse of render_text."""
    out = {}
    key, block = None, None
    for line in text.splitlines():
        if line.startswith("  ") and block is not None:
            block.append(line[2:])
            continue
        if block is not None:
            out[key] = _close_block(block)
            block = None
        key, _, rest = line.partition(":")
        rest = rest[1:] if rest.startswith(" ") else rest
        if rest == "":
            block = []
            continue
        try:
            out[key] = json.loads(rest)
        except json.JSONDecodeError:
            out[key] = rest
    if block is not None:
        out[key] = _close_block(block)
    return out


def _emit(args, payload):
    if args.format == "doc":
        key = next((k for k in ("document", "bundle", "structures") if k in payload), None)
        if key is not None:
            sys.stdout.write(payload[key])
            return
    if args.format == "json":
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(render_text(payload))


def _read(path):
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc


def _read_all(paths):
    return "\n".join(_read(p) for p in paths)


def _element(L, name):
    if name not in L.names:
        raise FormatError(f"unknown element '{name}'")
    return L.index(name)


def _values(text):
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise FormatError(f"expected integers, found '{text}'") from None


# ---------------------------------------------------------------- commands


def cmd_decide(args):
    from .decide import Caps, decide
    from .sentences import parse

    caps = Caps(
        max_exists=args.max_exists,
        max_forall=args.max_forall,
        max_extension_size=args.max_size,
        time_budget=args.time_budget,
    )
    cert = decide(parse(args.sentence), caps)
    full = cert.as_dict()
    payload = {"result": "TRUE" if cert.verdict else "FALSE"}
    if args.cert:
        payload.update(full)
    else:
        payload.update({k: full[k] for k in ("kind", "sentence", "verdict")})
    _emit(args, payload)
    return TRUE if cert.verdict else FALSE


def cmd_check_aee(args):
    from .order import is_almost_end_extension

    w = textio.parse_pair_document(_read(args.file))
    ok = is_almost_end_extension(w)
    offending = []
    if not ok:
        image = set(w.inclusion)
        for v in range(w.big.size):
            if v in image:
                continue
            for t in w.inclusion:
                if t != w.big.top and w.big.leq[v, t]:
                    offending.append([w.big.names[v], w.big.names[t]])
    _emit(args, {"almost_end_extension": ok, "new_below_old": offending})
    return TRUE if ok else FALSE


def cmd_enum_usl(args):
    from .order import enumerate_usl_top

    found = list(enumerate_usl_top(args.n, max_size=args.max_size, time_budget=args.time_budget))
    counts = {}
    for U in found:
        counts[str(U.size)] = counts.get(str(U.size), 0) + 1
    payload = {"count": len(found), "by_size": counts}
    payload["structures"] = "".join(textio.dump_structure(U) for U in found)
    _emit(args, payload)
    return TRUE


def cmd_free_ext(args):
    from .extensions import free_extend

    U = textio.parse_structure(_read(args.file))
    names = tuple(n for n in args.generators.split(",") if n)
    ext = free_extend(U, names)
    # base, extension and embedding together form a pair document
    doc = (
        textio.dump_structure(U)
        + textio.dump_structure(ext.result)
        + textio.dump_map("embedding", U, ext.result, ext.embedding)
    )
    _emit(args, {"size": ext.result.size, "document": doc})
    return TRUE


def cmd_decompose(args):
    from .errors import NotAlmostEndExtension
    from .extensions import decompose, verify_decomposition

    w = textio.parse_pair_document(_read(args.file))
    try:
        d = decompose(w)
    except NotAlmostEndExtension as exc:
        _emit(args, {"decomposed": False, "reason": str(exc)})
        return FALSE
    report = verify_decomposition(d)
    _emit(
        args,
        {
            "decomposed": True,
            "u1_size": d.free.result.size,
            "u2_size": d.u2.size,
            "checks": report.as_dict()["checks"],
            "bundle": textio.dump_decomposition(d),
        },
    )
    return TRUE if report.ok else FALSE


def cmd_verify_bundle(args):
    from .extensions import verify_decomposition

    d = textio.parse_decomposition(_read(args.file))
    report = verify_decomposition(d)
    _emit(args, report.as_dict())
    return TRUE if report.ok else FALSE


def cmd_table(args):
    from .tables import build_table, verify_table

    if args.action == "verify":
        report = verify_table(textio.parse_table(_read(args.file)))
        _emit(args, report.as_dict())
        return TRUE if report.ok else FALSE
    L = textio.parse_structure(_read(args.file))
    t = build_table(L, max_maps=args.max_size, time_budget=args.time_budget)
    _emit(args, {"rows": t.size, "document": textio.dump_table(t)})
    return TRUE


def cmd_rep(args):
    from .tables import build_rep_prefix, verify_coding_ready, verify_rep_prefix

    if args.action == "verify":
        r = textio.parse_rep(_read(args.file))
        report = verify_coding_ready(r) if r.coding is not None else verify_rep_prefix(r)
        _emit(args, report.as_dict())
        return TRUE if report.ok else FALSE
    L = textio.parse_structure(_read(args.file))
    r = build_rep_prefix(L, args.depth, with_coding=args.coding, time_budget=args.time_budget)
    _emit(args, {"stages": {label: size for label, size in r.chain}, "document": textio.dump_rep(r)})
    return TRUE


def cmd_tree(args):
    from . import trees

    text = _read_all(args.files)
    if args.action == "identity":
        r = textio.parse_rep(text)
        T = trees.identity_tree(r, args.depth)
        _emit(args, {"document": textio.dump_tree(T)})
        return TRUE
    if args.action == "decode":
        # decoding reads the rep only
        r = textio.parse_rep(text)
        bits = trees.decode(r, _values(args.string or ""), _pair(r.lattice, args.pair))
        _emit(args, {"bits": list(bits)})
        return TRUE
    T = textio.parse_tree(text)
    L = T.rep.lattice
    if args.action == "apply":
        image = trees.apply(T, _values(args.string or ""))
        _emit(args, {"image": list(image)})
        return TRUE
    if args.action == "check":
        report = trees.check_condition(T, args.depth)
        _emit(args, report.as_dict())
        return TRUE if report.ok else FALSE
    pair = _pair(L, args.pair)
    if args.action == "encode":
        bits = [int(b) for b in (args.bits or "") if b in "01"]
        path = trees.encode_bits(T, pair, bits)
        _emit(args, {"path": list(path)})
        return TRUE
    # splits
    q = textio.parse_decision_table(text)
    x, y = pair
    depth = args.depth if args.depth is not None else T.depth
    try:
        splits = trees.find_splits(T, q, x, y, depth, limit=args.limit)
    except KeyError as exc:
        raise FormatError(f"decision table has no entry for {exc.args[0]}") from None
    _emit(args, {"splits": [[list(s), list(t), n] for s, t, n in splits], "count": len(splits)})
    return FALSE if splits else TRUE


def _pair(L, text):
    if not text or "," not in text:
        raise FormatError("--pair takes two element names separated by a comma")
    a, b = text.split(",", 1)
    return _element(L, a.strip()), _element(L, b.strip())


# ---------------------------------------------------------------- parser


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _positive_float(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--format",
        choices=("text", "json", "doc"),
        default="text",
        help="doc prints only the produced document, ready to feed back in",
    )
    common.add_argument("--time-budget", type=_positive_float, default=None, help="seconds")

    parser = argparse.ArgumentParser(prog="sigma2lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decide", parents=[common], help="decide a two-quantifier sentence")
    p.add_argument("sentence")
    p.add_argument("--max-exists", type=_positive_int, default=3)
    p.add_argument("--max-forall", type=_positive_int, default=2)
    p.add_argument("--max-size", type=_positive_int, default=36, help="largest extension")
    p.add_argument("--cert", action="store_true", help="include the full certificate")
    p.set_defaults(run=cmd_decide)

    p = sub.add_parser("check-aee", parents=[common], help="test an almost-end-extension")
    p.add_argument("file")
    p.set_defaults(run=cmd_check_aee)

    p = sub.add_parser("enum-usl", parents=[common], help="structures of size 1..N")
    p.add_argument("n", type=_positive_int)
    p.add_argument("--max-size", type=_positive_int, default=10)
    p.set_defaults(run=cmd_enum_usl)

    p = sub.add_parser("free-ext", parents=[common], help="top-preserving free extension")
    p.add_argument("file")
    p.add_argument("--generators", default="a1")
    p.set_defaults(run=cmd_free_ext)

    p = sub.add_parser("decompose", parents=[common], help="factor an almost-end-extension")
    p.add_argument("file")
    p.set_defaults(run=cmd_decompose)

    p = sub.add_parser("verify-bundle", parents=[common], help="re-check a decomposition bundle")
    p.add_argument("file")
    p.set_defaults(run=cmd_verify_bundle)

    p = sub.add_parser("table", parents=[common], help="build or verify a lattice table")
    p.add_argument("action", choices=("verify", "build"))
    p.add_argument("file")
    p.add_argument("--max-size", type=_positive_int, default=12, help="most rows")
    p.set_defaults(run=cmd_table)

    p = sub.add_parser("rep", parents=[common], help="build or verify a representation prefix")
    p.add_argument("action", choices=("build", "verify"))
    p.add_argument("file")
    p.add_argument("--depth", type=_positive_int, default=1)
    p.add_argument("--coding", action="store_true")
    p.set_defaults(run=cmd_rep)

    p = sub.add_parser("tree", parents=[common], help="uniform tree operations")
    p.add_argument("action", choices=("identity", "apply", "check", "encode", "decode", "splits"))
    p.add_argument("files", nargs="+", help="documents holding the lattice, rep, tree and decision table")
    p.add_argument("--depth", type=_positive_int, default=None)
    p.add_argument("--string", help="space-separated row indices")
    p.add_argument("--pair", help="x,y")
    p.add_argument("--bits")
    p.add_argument("--limit", type=_positive_int, default=100)
    p.set_defaults(run=cmd_tree)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return BAD_INPUT if exc.code else TRUE
    if args.command == "tree" and args.action == "identity" and args.depth is None:
        args.depth = 1
    try:
        return args.run(args)
    except (ParseError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return CAPPED
    except (NotSigma2, NotPi2) as exc:
        print(f"outside the fragment: {exc}", file=sys.stderr)
        return FRAGMENT
    except Sigma2LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FALSE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
