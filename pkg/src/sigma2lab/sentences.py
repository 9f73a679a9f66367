"""Sentences of the join/0/1 signature: syntax tree, parser, prenex forms, evaluation."""

import re
from dataclasses import dataclass, field

from .errors import NotPi2, NotSigma2, ParseError, UnboundVariable

# ---------------------------------------------------------------- syntax tree


@dataclass(frozen=True)
class Zero:
    def __str__(self):
        return "0"


@dataclass(frozen=True)
class One:
    def __str__(self):
        return "1"


@dataclass(frozen=True)
class Var:
    name: str
    position: tuple = field(default=None, compare=False, repr=False)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Join:
    left: object
    right: object

    def __str__(self):
        right = f"({self.right})" if isinstance(self.right, Join) else str(self.right)
        return f"{self.left} + {right}"


@dataclass(frozen=True)
class Leq:
    left: object
    right: object


@dataclass(frozen=True)
class Eq:
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    body: object


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Implies:
    left: object
    right: object


@dataclass(frozen=True)
class Exists:
    vars: tuple
    body: object


@dataclass(frozen=True)
class Forall:
    vars: tuple
    body: object


_PRECEDENCE = {Implies: 1, Or: 2, And: 3, Not: 4, Leq: 5, Eq: 5}


def to_text(f):
    """Render a formula in the input grammar; parse(to_text(f)) == f."""
    return _render(f, 0)


def _render(f, context):
    if isinstance(f, (Exists, Forall)):
        word = "exists" if isinstance(f, Exists) else "forall"
        text = f"{word} {' '.join(f.vars)} . {_render(f.body, 0)}"
        return f"({text})" if context > 0 else text
    if isinstance(f, Leq):
        return f"{f.left} <= {f.right}"
    if isinstance(f, Eq):
        return f"{f.left} = {f.right}"
    if isinstance(f, Not):
        if isinstance(f.body, (Leq, Eq)):
            return f"!({_render(f.body, 0)})"
        return "!" + _render(f.body, 4)
    prec = _PRECEDENCE[type(f)]
    op = {And: " & ", Or: " \\/ ", Implies: " -> "}[type(f)]
    if isinstance(f, Implies):
        text = _render(f.left, prec + 1) + op + _render(f.right, prec)
    else:
        text = _render(f.left, prec) + op + _render(f.right, prec + 1)
    return f"({text})" if context > prec else text


# ---------------------------------------------------------------- tokenizer

_TOKEN = re.compile(
    r"(?P<space>[ \t\r\n]+)|(?P<arrow>->)|(?P<le><=)|(?P<or>\\/)"
    r"|(?P<ident>[a-z][a-z0-9_]*)|(?P<sym>[.()01+=!&])"
)
_KEYWORDS = {"exists", "forall"}


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text):
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "space":
            for k, ch in enumerate(value):
                if ch == "\n":
                    line += 1
                    line_start = pos + k + 1
        else:
            if kind == "ident" and value in _KEYWORDS:
                kind = value
            elif kind != "ident":
                kind = value
            tokens.append(_Token(kind, value, line, col))
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, offset=0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def take(self, kind=None):
        tok = self.peek()
        if kind is not None and tok.kind != kind:
            what = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise ParseError(f"expected {kind!r}, found {what}", tok.line, tok.column)
        self.i += 1
        return tok

    def formula(self):
        left = self.disjunction()
        if self.peek().kind == "->":
            self.take()
            return Implies(left, self.formula())
        return left

    def disjunction(self):
        left = self.conjunction()
        while self.peek().kind == "\\/":
            self.take()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self):
        left = self.unary()
        while self.peek().kind == "&":
            self.take()
            left = And(left, self.unary())
        return left

    def unary(self):
        tok = self.peek()
        if tok.kind == "!":
            self.take()
            return Not(self.unary())
        if tok.kind in _KEYWORDS:
            self.take()
            names = [self.take("ident").text]
            while self.peek().kind == "ident":
                names.append(self.take().text)
            self.take(".")
            body = self.formula()
            cls = Exists if tok.kind == "exists" else Forall
            return cls(tuple(names), body)
        return self.atom()

    def atom(self):
        first_error = None
        if self.peek().kind == "(":
            start = self.i
            try:
                self.take("(")
                inner = self.formula()
                self.take(")")
                if self.peek().kind not in ("+", "<=", "="):
                    return inner
            except ParseError as exc:
                first_error = exc
            self.i = start
        try:
            return self._comparison()
        except ParseError as exc:
            # report whichever reading got further into the input
            if first_error is not None and (first_error.line, first_error.column) > (exc.line, exc.column):
                raise first_error from None
            raise

    def _comparison(self):
        left = self.term()
        tok = self.peek()
        if tok.kind == "<=":
            self.take()
            return Leq(left, self.term())
        if tok.kind == "=":
            self.take()
            return Eq(left, self.term())
        what = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"expected '<=' or '=', found {what}", tok.line, tok.column)

    def term(self):
        left = self.primary()
        while self.peek().kind == "+":
            self.take()
            left = Join(left, self.primary())
        return left

    def primary(self):
        tok = self.peek()
        if tok.kind == "0":
            self.take()
            return Zero()
        if tok.kind == "1":
            self.take()
            return One()
        if tok.kind == "ident":
            self.take()
            return Var(tok.text, (tok.line, tok.column))
        if tok.kind == "(":
            self.take()
            inner = self.term()
            self.take(")")
            return inner
        what = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"expected a term, found {what}", tok.line, tok.column)


def parse(text):
    """Parse a sentence; raises ParseError or UnboundVariable with a position."""
    p = _Parser(text)
    f = p.formula()
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError(f"unexpected {tok.text!r}", tok.line, tok.column)
    _check_bound(f, frozenset())
    return f


def _check_bound(f, bound):
    if isinstance(f, Var):
        if f.name not in bound:
            line, col = f.position or (0, 0)
            raise UnboundVariable(f.name, line, col)
    elif isinstance(f, (Zero, One)):
        pass
    elif isinstance(f, (Exists, Forall)):
        _check_bound(f.body, bound | set(f.vars))
    elif isinstance(f, Not):
        _check_bound(f.body, bound)
    else:
        _check_bound(f.left, bound)
        _check_bound(f.right, bound)


def variables(f):
    """Variables occurring in terms, in first-occurrence order."""
    out = []

    def walk(g):
        if isinstance(g, Var):
            if g.name not in out:
                out.append(g.name)
        elif isinstance(g, (Zero, One)):
            return
        elif isinstance(g, (Exists, Forall, Not)):
            walk(g.body)
        else:
            walk(g.left)
            walk(g.right)

    walk(f)
    return out


# ---------------------------------------------------------------- prenex forms


def rename_apart(f):
    """Give every quantified variable a distinct name; later reuses get _1, _2, ..."""
    taken = set()
    _collect_names(f, taken)
    seen = set()

    def fresh(name):
        if name not in seen:
            seen.add(name)
            return name
        k = 1
        while f"{name}_{k}" in taken or f"{name}_{k}" in seen:
            k += 1
        new = f"{name}_{k}"
        seen.add(new)
        return new

    def term(t, env):
        if isinstance(t, Var):
            return Var(env.get(t.name, t.name), t.position)
        if isinstance(t, Join):
            return Join(term(t.left, env), term(t.right, env))
        return t

    def walk(g, env):
        if isinstance(g, (Exists, Forall)):
            new_names = tuple(fresh(v) for v in g.vars)
            inner = dict(env)
            inner.update(zip(g.vars, new_names))
            return type(g)(new_names, walk(g.body, inner))
        if isinstance(g, (Leq, Eq)):
            return type(g)(term(g.left, env), term(g.right, env))
        if isinstance(g, Not):
            return Not(walk(g.body, env))
        return type(g)(walk(g.left, env), walk(g.right, env))

    return walk(f, {})


def _collect_names(f, out):
    if isinstance(f, Var):
        out.add(f.name)
    elif isinstance(f, (Exists, Forall)):
        out.update(f.vars)
        _collect_names(f.body, out)
    elif isinstance(f, Not):
        _collect_names(f.body, out)
    elif not isinstance(f, (Zero, One)):
        _collect_names(f.left, out)
        _collect_names(f.right, out)


def negate(f):
    return f.body if isinstance(f, Not) else Not(f)


def matrix_of(f):
    """Quantifier-free part of a renamed-apart formula."""
    if isinstance(f, (Exists, Forall)):
        return matrix_of(f.body)
    if isinstance(f, Not):
        return negate(matrix_of(f.body))
    if isinstance(f, (Leq, Eq)):
        return f
    return type(f)(matrix_of(f.left), matrix_of(f.right))


_FLIP = {"exists": "forall", "forall": "exists"}


def prefix_starting_with(f, kind):
    """Fewest-block quantifier prefix of f whose first block has the given kind.

    The result is a list of variable tuples alternating in kind from ``kind``;
    the first tuple may be empty. f must be renamed apart.
    """
    if isinstance(f, (Leq, Eq)):
        return []
    if isinstance(f, Not):
        return prefix_starting_with(f.body, _FLIP[kind])
    if isinstance(f, (Exists, Forall)):
        own = "exists" if isinstance(f, Exists) else "forall"
        if own != kind:
            return [()] + prefix_starting_with(f, own)
        rest = prefix_starting_with(f.body, own)
        if not rest:
            return [tuple(f.vars)]
        return [tuple(f.vars) + rest[0]] + rest[1:]
    if isinstance(f, Implies):
        # a -> b is !a \/ b
        left = prefix_starting_with(f.left, _FLIP[kind])
        return _zip_blocks(left, prefix_starting_with(f.right, kind))
    return _zip_blocks(prefix_starting_with(f.left, kind), prefix_starting_with(f.right, kind))


def _zip_blocks(a, b):
    out = []
    for k in range(max(len(a), len(b))):
        left = a[k] if k < len(a) else ()
        right = b[k] if k < len(b) else ()
        out.append(left + right)
    while out and not out[-1]:
        out.pop()
    return out


def _labeled(blocks, kind):
    labeled = []
    for k, names in enumerate(blocks):
        this = kind if k % 2 == 0 else _FLIP[kind]
        if names:
            labeled.append((this, tuple(names)))
    merged = []
    for this, names in labeled:
        if merged and merged[-1][0] == this:
            merged[-1] = (this, merged[-1][1] + names)
        else:
            merged.append((this, names))
    return merged


@dataclass(frozen=True)
class PrenexSigma2:
    existential_vars: tuple
    universal_vars: tuple
    matrix: object

    def to_formula(self):
        f = self.matrix
        if self.universal_vars:
            f = Forall(self.universal_vars, f)
        if self.existential_vars:
            f = Exists(self.existential_vars, f)
        return f

    def __str__(self):
        return to_text(self.to_formula())


@dataclass(frozen=True)
class PrenexPi2:
    universal_vars: tuple
    existential_vars: tuple
    matrix: object

    def to_formula(self):
        f = self.matrix
        if self.existential_vars:
            f = Exists(self.existential_vars, f)
        if self.universal_vars:
            f = Forall(self.universal_vars, f)
        return f

    def __str__(self):
        return to_text(self.to_formula())


def _as_formula(f):
    return parse(f) if isinstance(f, str) else f


def prenex_sigma2(f):
    """Prenex form with prefix exists* forall*, or NotSigma2 with the offending prefix."""
    g = rename_apart(_as_formula(f))
    blocks = prefix_starting_with(g, "exists")
    if len(blocks) > 2:
        raise NotSigma2(_labeled(blocks, "exists"))
    blocks = blocks + [()] * (2 - len(blocks))
    return PrenexSigma2(blocks[0], blocks[1], matrix_of(g))


def prenex_pi2(f):
    """Prenex form with prefix forall* exists*, or NotPi2."""
    g = rename_apart(_as_formula(f))
    blocks = prefix_starting_with(g, "forall")
    if len(blocks) > 2:
        raise NotPi2(_labeled(blocks, "forall"))
    blocks = blocks + [()] * (2 - len(blocks))
    return PrenexPi2(blocks[0], blocks[1], matrix_of(g))


def prenex_prefix(f):
    """The fewest-block prefix as [(kind, vars), ...], preferring exists first on ties."""
    g = rename_apart(_as_formula(f))
    e = _labeled(prefix_starting_with(g, "exists"), "exists")
    a = _labeled(prefix_starting_with(g, "forall"), "forall")
    return e if len(e) <= len(a) else a


# ---------------------------------------------------------------- evaluation


def eval_term(V, env, t):
    if isinstance(t, Zero):
        return V.bot
    if isinstance(t, One):
        return V.top
    if isinstance(t, Var):
        return env[t.name]
    return int(V.join_table[eval_term(V, env, t.left), eval_term(V, env, t.right)])


def eval_qf(V, env, matrix):
    """Truth of a quantifier-free formula in V under env (variable name -> element index)."""
    if isinstance(matrix, Leq):
        return bool(V.leq[eval_term(V, env, matrix.left), eval_term(V, env, matrix.right)])
    if isinstance(matrix, Eq):
        return eval_term(V, env, matrix.left) == eval_term(V, env, matrix.right)
    if isinstance(matrix, Not):
        return not eval_qf(V, env, matrix.body)
    if isinstance(matrix, And):
        return eval_qf(V, env, matrix.left) and eval_qf(V, env, matrix.right)
    if isinstance(matrix, Or):
        return eval_qf(V, env, matrix.left) or eval_qf(V, env, matrix.right)
    if isinstance(matrix, Implies):
        return (not eval_qf(V, env, matrix.left)) or eval_qf(V, env, matrix.right)
    raise TypeError(f"not quantifier-free: {matrix!r}")


def eval_sentence(V, f, env=None):
    """Truth in a single finite structure, quantifiers ranging over V."""
    env = dict(env or {})
    if isinstance(f, (Exists, Forall)):
        want_any = isinstance(f, Exists)

        def rec(k):
            if k == len(f.vars):
                return eval_sentence(V, f.body, env)
            for e in range(V.size):
                env[f.vars[k]] = e
                if rec(k + 1) == want_any:
                    return want_any
            return not want_any

        return rec(0)
    if isinstance(f, Not):
        return not eval_sentence(V, f.body, env)
    if isinstance(f, And):
        return eval_sentence(V, f.left, env) and eval_sentence(V, f.right, env)
    if isinstance(f, Or):
        return eval_sentence(V, f.left, env) or eval_sentence(V, f.right, env)
    if isinstance(f, Implies):
        return (not eval_sentence(V, f.left, env)) or eval_sentence(V, f.right, env)
    return eval_qf(V, env, f)


def compile_matrix(matrix, var_names):
    """Compile to a function (join, leq, bot, top, values) -> bool over Python lists.

    ``values`` is a sequence indexed like ``var_names``. Used in hot loops.
    """
    slot = {name: k for k, name in enumerate(var_names)}

    def term(t):
        if isinstance(t, Zero):
            return lambda J, b, T, v: b
        if isinstance(t, One):
            return lambda J, b, T, v: T
        if isinstance(t, Var):
            k = slot[t.name]
            return lambda J, b, T, v: v[k]
        left, right = term(t.left), term(t.right)
        return lambda J, b, T, v: J[left(J, b, T, v)][right(J, b, T, v)]

    def form(g):
        if isinstance(g, Leq):
            left, right = term(g.left), term(g.right)
            return lambda J, L, b, T, v: L[left(J, b, T, v)][right(J, b, T, v)]
        if isinstance(g, Eq):
            left, right = term(g.left), term(g.right)
            return lambda J, L, b, T, v: left(J, b, T, v) == right(J, b, T, v)
        if isinstance(g, Not):
            body = form(g.body)
            return lambda J, L, b, T, v: not body(J, L, b, T, v)
        left, right = form(g.left), form(g.right)
        if isinstance(g, And):
            return lambda J, L, b, T, v: left(J, L, b, T, v) and right(J, L, b, T, v)
        if isinstance(g, Or):
            return lambda J, L, b, T, v: left(J, L, b, T, v) or right(J, L, b, T, v)
        return lambda J, L, b, T, v: (not left(J, L, b, T, v)) or right(J, L, b, T, v)

    return form(matrix)
