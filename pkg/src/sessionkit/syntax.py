"""Concrete syntax, AST and basic algebra of session contracts.

A contract describes one side of a client/server dialogue.  ``1`` is the
completed contract; an external choice ``a.B1 + b.B2`` waits for the peer to
pick one of the offered inputs; an internal choice ``!a.B1 (+) !b.B2``
decides on its own which output to emit; ``rec x. B`` introduces a loop.

Grammar (whitespace-insensitive, ``#`` starts a line comment, one contract
per UTF-8 file)::

    expr ::= term ("+" term)* | term ("(+)" term)*
    term ::= "1"
           | "rec" IDENT "." expr
           | "!" IDENT ("." term)?
           | IDENT ("." term)?
           | "(" expr ")"

An identifier followed by "." is always an action name; a bare identifier is
a recursion variable when some enclosing ``rec`` binds it and the action
``IDENT.1`` otherwise (the trailing ``1`` of a prefix is normally omitted).
A prefix binds tighter than a choice, so ``a.b + c`` reads ``(a.b) + (c.1)``;
a ``rec`` body extends as far right as possible.  Branches of ``+`` must be
input-prefixed, branches of ``(+)`` output-prefixed, and the two operators
cannot be mixed at one level.

``validate`` turns a raw tree into a canonical contract: branches sorted by
action name and binders renamed positionally, so canonical equality is
equality up to branch reordering and renaming of recursion variables.
Validated values are immutable and safe to share between threads.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from .errors import DuplicateBranch, NotClosed, ParseError, UnguardedRec, ValidationError

__all__ = [
    "Behaviour",
    "Done",
    "DONE",
    "ExtChoice",
    "IntChoice",
    "Var",
    "Rec",
    "parse",
    "validate",
    "contract",
    "canonicalize",
    "dual",
    "substitute",
    "unfold",
    "render",
    "gen_random",
    "action_names",
]

_NAME_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*\Z")
_RESERVED = frozenset({"rec", "1"})


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Done:
    """The completed contract ``1``."""

    def __hash__(self) -> int:
        return 0x0D0E

    def __eq__(self, other: object) -> bool:
        return type(other) is Done

    def __repr__(self) -> str:
        return "Done()"

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class ExtChoice:
    """Input-prefixed branches resolved by the peer: ``a1.B1 + ... + an.Bn``."""

    branches: tuple[tuple[str, "Behaviour"], ...]
    _hash: int = field(init=False, compare=False, default=0)

    def __post_init__(self):
        if not self.branches:
            raise ValueError("external choice needs at least one branch")
        object.__setattr__(self, "_hash", hash(("+", self.branches)))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return (
            type(other) is ExtChoice
            and self._hash == other._hash
            and self.branches == other.branches
        )

    def __repr__(self) -> str:
        return f"ExtChoice({self.branches!r})"

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class IntChoice:
    """Output-prefixed branches the process picks itself: ``!a1.B1 (+) ...``.

    A single-branch internal choice is a committed output prefix.
    """

    branches: tuple[tuple[str, "Behaviour"], ...]
    _hash: int = field(init=False, compare=False, default=0)

    def __post_init__(self):
        if not self.branches:
            raise ValueError("internal choice needs at least one branch")
        object.__setattr__(self, "_hash", hash(("(+)", self.branches)))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return (
            type(other) is IntChoice
            and self._hash == other._hash
            and self.branches == other.branches
        )

    def __repr__(self) -> str:
        return f"IntChoice({self.branches!r})"

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Var:
    """An occurrence of a recursion variable."""

    name: str
    _hash: int = field(init=False, compare=False, default=0)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("var", self.name)))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        return self is other or (type(other) is Var and self.name == other.name)

    def __repr__(self) -> str:
        return f"Var({self.name!r})"

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Rec:
    """``rec var. body`` -- the body must not be a bare variable."""

    var: str
    body: "Behaviour"
    _hash: int = field(init=False, compare=False, default=0)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("rec", self.var, self.body)))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return (
            type(other) is Rec
            and self._hash == other._hash
            and self.var == other.var
            and self.body == other.body
        )

    def __repr__(self) -> str:
        return f"Rec({self.var!r}, {self.body!r})"

    def __str__(self) -> str:
        return render(self)


Behaviour = Union[Done, ExtChoice, IntChoice, Var, Rec]

DONE = Done()

# Canonical terms are interned so that equality checks on the hot paths
# short-circuit on identity.
_INTERN: dict[Behaviour, Behaviour] = {}


def _intern(term: Behaviour) -> Behaviour:
    return _INTERN.setdefault(term, term)


# ---------------------------------------------------------------------------
# Validation and canonical form
# ---------------------------------------------------------------------------

def _check(term: Behaviour, bound: frozenset[str]) -> None:
    t = type(term)
    if t is Done:
        return
    if t is Var:
        if term.name not in bound:
            raise NotClosed(term.name)
        return
    if t is Rec:
        if type(term.body) is Var:
            raise UnguardedRec(term.var)
        _check(term.body, bound | {term.var})
        return
    # external or internal choice
    seen = set()
    for name, cont in term.branches:
        if not _NAME_RE.match(name) or name in _RESERVED:
            raise ValidationError(f"invalid action name {name!r}")
        if name in seen:
            raise DuplicateBranch(name)
        seen.add(name)
        _check(cont, bound)


def canonicalize(term: Behaviour, _depth: int = 0, _env: dict | None = None) -> Behaviour:
    """Sort choice branches by action name and rename binders positionally."""
    env = _env if _env is not None else {}
    t = type(term)
    if t is Done:
        return DONE
    if t is Var:
        return _intern(Var(env.get(term.name, term.name)))
    if t is Rec:
        fresh = f"%{_depth}"
        body = canonicalize(term.body, _depth + 1, {**env, term.var: fresh})
        return _intern(Rec(fresh, body))
    branches = tuple(
        sorted((name, canonicalize(cont, _depth, env)) for name, cont in term.branches)
    )
    return _intern(ExtChoice(branches) if t is ExtChoice else IntChoice(branches))


def validate(raw: Behaviour) -> Behaviour:
    """Check the contract invariants and return the canonical form.

    Raises NotClosed, DuplicateBranch or UnguardedRec when the raw tree is
    not a session contract.
    """
    _check(raw, frozenset())
    return canonicalize(raw)


def contract(text: str) -> Behaviour:
    """Parse and validate in one step."""
    return validate(parse(text))


# ---------------------------------------------------------------------------
# Duality, substitution, unfolding
# ---------------------------------------------------------------------------

def dual(term: Behaviour) -> Behaviour:
    """Swap inputs with outputs and external with internal choices.

    An involution: ``dual(dual(t)) == t``.
    """
    t = type(term)
    if t is Done or t is Var:
        return term
    if t is Rec:
        return _intern(Rec(term.var, dual(term.body)))
    branches = tuple((name, dual(cont)) for name, cont in term.branches)
    return _intern(IntChoice(branches) if t is ExtChoice else ExtChoice(branches))


def substitute(term: Behaviour, var: str, replacement: Behaviour) -> Behaviour:
    """Replace free occurrences of ``var``; the replacement must be closed."""
    t = type(term)
    if t is Done:
        return term
    if t is Var:
        return replacement if term.name == var else term
    if t is Rec:
        if term.var == var:
            return term
        return _intern(Rec(term.var, substitute(term.body, var, replacement)))
    branches = tuple((name, substitute(cont, var, replacement)) for name, cont in term.branches)
    return _intern(ExtChoice(branches) if t is ExtChoice else IntChoice(branches))


_UNFOLD_CACHE: dict[Behaviour, Behaviour] = {}


def unfold(term: Rec) -> Behaviour:
    """One-step unfolding of a recursion, in canonical form."""
    got = _UNFOLD_CACHE.get(term)
    if got is None:
        got = canonicalize(substitute(term.body, term.var, term))
        _UNFOLD_CACHE[term] = got
    return got


def action_names(term: Behaviour) -> frozenset[str]:
    """All action names occurring in the term."""
    out: set[str] = set()
    stack = [term]
    while stack:
        t = stack.pop()
        tt = type(t)
        if tt is Rec:
            stack.append(t.body)
        elif tt is ExtChoice or tt is IntChoice:
            for name, cont in t.branches:
                out.add(name)
                stack.append(cont)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class _Token:
    kind: str
    value: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, i, n = 1, 1, 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch == "(":
            if text[i : i + 3] == "(+)":
                tokens.append(_Token("OPLUS", "(+)", line, start_col))
                i += 3
                col += 3
            else:
                tokens.append(_Token("LPAREN", "(", line, start_col))
                i += 1
                col += 1
            continue
        if ch == ")":
            tokens.append(_Token("RPAREN", ")", line, start_col))
            i += 1
            col += 1
            continue
        if ch == "+":
            tokens.append(_Token("PLUS", "+", line, start_col))
            i += 1
            col += 1
            continue
        if ch == ".":
            tokens.append(_Token("DOT", ".", line, start_col))
            i += 1
            col += 1
            continue
        if ch == "!":
            tokens.append(_Token("BANG", "!", line, start_col))
            i += 1
            col += 1
            continue
        if ch == "1":
            nxt = text[i + 1] if i + 1 < n else ""
            if nxt.isalnum() or nxt == "_":
                raise ParseError(f"unexpected character {nxt!r} after '1'", line, col + 1)
            tokens.append(_Token("ONE", "1", line, start_col))
            i += 1
            col += 1
            continue
        if ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "REC" if word == "rec" else "NAME"
            tokens.append(_Token(kind, word, line, start_col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.bound: list[str] = []

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise ParseError(f"expected {what}, found {tok.value or 'end of input'!r}", tok.line, tok.column)
        return tok

    def expr(self) -> Behaviour:
        first_tok = self.peek()
        head = self.term()
        op = self.peek().kind
        if op not in ("PLUS", "OPLUS"):
            return head
        branches = [self._branch(head, op, first_tok)]
        while self.peek().kind in ("PLUS", "OPLUS"):
            tok = self.next()
            if tok.kind != op:
                raise ParseError("cannot mix '+' and '(+)' in one choice", tok.line, tok.column)
            next_tok = self.peek()
            branches.append(self._branch(self.term(), op, next_tok))
        cls = ExtChoice if op == "PLUS" else IntChoice
        return cls(tuple(branches))

    def _branch(self, term: Behaviour, op: str, tok: _Token) -> tuple[str, Behaviour]:
        want = ExtChoice if op == "PLUS" else IntChoice
        label = "an input prefix" if op == "PLUS" else "an output prefix"
        if type(term) is not want or len(term.branches) != 1:
            raise ParseError(f"choice branch must be {label}", tok.line, tok.column)
        return term.branches[0]

    def term(self) -> Behaviour:
        tok = self.next()
        if tok.kind == "ONE":
            return DONE
        if tok.kind == "LPAREN":
            inner = self.expr()
            self.expect("RPAREN", "')'")
            return inner
        if tok.kind == "REC":
            name_tok = self.expect("NAME", "a recursion variable")
            self.expect("DOT", "'.'")
            self.bound.append(name_tok.value)
            body = self.expr()
            self.bound.pop()
            return Rec(name_tok.value, body)
        if tok.kind == "BANG":
            name_tok = self.expect("NAME", "an action name")
            cont = self._continuation()
            return IntChoice(((name_tok.value, cont),))
        if tok.kind == "NAME":
            if self.peek().kind == "DOT":
                self.next()
                return ExtChoice(((tok.value, self.term()),))
            if tok.value in self.bound:
                return Var(tok.value)
            return ExtChoice(((tok.value, DONE),))
        raise ParseError(
            f"expected a contract term, found {tok.value or 'end of input'!r}", tok.line, tok.column
        )

    def _continuation(self) -> Behaviour:
        if self.peek().kind == "DOT":
            self.next()
            return self.term()
        return DONE


def parse(text: str) -> Behaviour:
    """Parse concrete syntax into a raw tree (not yet validated)."""
    parser = _Parser(_tokenize(text))
    term = parser.expr()
    tail = parser.peek()
    if tail.kind != "EOF":
        raise ParseError(f"unexpected trailing input {tail.value!r}", tail.line, tail.column)
    return term


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def render(term: Behaviour) -> str:
    """Concrete syntax for a contract; round-trips through parse/validate."""
    used = action_names(term)
    counter = [0]

    def fresh() -> str:
        while True:
            cand = f"x{counter[0]}" if counter[0] else "x"
            counter[0] += 1
            if cand not in used:
                return cand

    def top(t: Behaviour, env: dict[str, str]) -> str:
        tt = type(t)
        if tt is Done:
            return "1"
        if tt is Var:
            return env.get(t.name, t.name)
        if tt is Rec:
            binder = fresh()
            return f"rec {binder}. {top(t.body, {**t_env(env, t.var, binder)})}"
        sep = " + " if tt is ExtChoice else " (+) "
        bang = "" if tt is ExtChoice else "!"
        return sep.join(branch(bang, name, cont, env) for name, cont in t.branches)

    def t_env(env: dict[str, str], var: str, binder: str) -> dict[str, str]:
        new = dict(env)
        new[var] = binder
        return new

    def branch(bang: str, name: str, cont: Behaviour, env: dict[str, str]) -> str:
        if type(cont) is Done:
            return bang + name
        return f"{bang}{name}.{atom(cont, env)}"

    def atom(t: Behaviour, env: dict[str, str]) -> str:
        tt = type(t)
        if tt is Done:
            return "1"
        if tt is Var:
            return env.get(t.name, t.name)
        if (tt is ExtChoice or tt is IntChoice) and len(t.branches) == 1:
            bang = "" if tt is ExtChoice else "!"
            name, cont = t.branches[0]
            return branch(bang, name, cont, env)
        return f"({top(t, env)})"

    return top(term, {})


# ---------------------------------------------------------------------------
# Random generation
# ---------------------------------------------------------------------------

def _alphabet(size: int) -> list[str]:
    base = "abcdefghijklmnopqrstuvwxyz"
    if size <= len(base):
        return list(base[:size])
    names = list(base)
    k = 0
    while len(names) < size:
        names.append(f"a{k}")
        k += 1
    return names[:size]


def gen_random(seed: int, max_depth: int, alphabet_size: int) -> Behaviour:
    """Deterministic random contract; always validates, recursion always guarded."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if alphabet_size < 1:
        raise ValueError("alphabet_size must be >= 1")
    rng = random.Random(seed)
    names = _alphabet(alphabet_size)

    def gen(depth: int, bound: tuple[str, ...]) -> Behaviour:
        if depth <= 1:
            if rng.random() < 0.25:
                return DONE
            name = rng.choice(names)
            cls = ExtChoice if rng.random() < 0.5 else IntChoice
            return cls(((name, DONE),))
        r = rng.random()
        if r < 0.08:
            return DONE
        if r < 0.16 and bound:
            return Var(rng.choice(bound))
        if r < 0.36:
            var = f"t{len(bound)}"
            body = gen(depth - 1, bound + (var,))
            while type(body) is Var:
                body = gen(depth - 1, bound + (var,))
            return Rec(var, body)
        cls = ExtChoice if r < 0.68 else IntChoice
        width = rng.randint(1, min(3, len(names)))
        chosen = sorted(rng.sample(names, width))
        return cls(tuple((name, gen(depth - 1, bound)) for name in chosen))

    return validate(gen(max_depth, ()))
