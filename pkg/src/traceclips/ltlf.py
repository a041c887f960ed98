"""Finite-trace temporal logic: syntax tree, parser, printer, and evaluator.

Formulas are immutable trees built from the node classes below.  The
evaluator implements the inductive finite-trace semantics directly and is
the correctness oracle for the automaton pipeline, so it stays deliberately
literal: quantifiers are written out, nothing is shared with the compiled
path.

Semantics notes:

* ``Next`` is strong: it fails on the last position of a trace.
  ``WeakNext`` holds there vacuously; the two are duals under negation.
* ``Until`` uses the strict bound: ``a U b`` holds when ``b`` holds at some
  position ``i`` and ``a`` holds at every position strictly before ``i``.
* The empty trace is a domain error, not "false": positions start at 1 and
  no clause is defined for a trace without a first position.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Container, Sequence


class LtlfError(Exception):
    """Base class for errors raised by this module."""


class ParseError(LtlfError):
    """Concrete-syntax error with the byte offset and the expected tokens."""

    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.expected = expected


class EmptyTraceError(LtlfError):
    """Raised when a formula is evaluated on an empty trace."""


@dataclass(frozen=True)
class Formula:
    """Base class; concrete nodes are the subclasses below."""


@dataclass(frozen=True)
class TrueFormula(Formula):
    pass


@dataclass(frozen=True)
class FalseFormula(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    """Strong next: requires a successor position."""

    operand: Formula


@dataclass(frozen=True)
class WeakNext(Formula):
    """Weak next: holds vacuously at the last position."""

    operand: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    """Dual of Until; needed so negation normal form is closed."""

    left: Formula
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    """Abbreviation: ``F a`` is ``true U a``."""

    operand: Formula


@dataclass(frozen=True)
class Always(Formula):
    """Abbreviation: ``G a`` is ``false R a``."""

    operand: Formula


TRUE = TrueFormula()
FALSE = FalseFormula()

# An abstract state is anything answering ``name in state``; traces are
# non-empty sequences of abstract states.
State = Container[str]
Trace = Sequence[State]

_UNARY = (Not, Next, WeakNext, Eventually, Always)
_BINARY = (And, Or, Until, Release)


def atoms(formula: Formula) -> frozenset[str]:
    """All predicate names occurring in the formula."""
    if isinstance(formula, Atom):
        return frozenset((formula.name,))
    if isinstance(formula, _UNARY):
        return atoms(formula.operand)
    if isinstance(formula, _BINARY):
        return atoms(formula.left) | atoms(formula.right)
    return frozenset()


def is_propositional(formula: Formula) -> bool:
    """True when the formula contains no temporal operator."""
    if isinstance(formula, (Next, WeakNext, Until, Release, Eventually, Always)):
        return False
    if isinstance(formula, Not):
        return is_propositional(formula.operand)
    if isinstance(formula, (And, Or)):
        return is_propositional(formula.left) and is_propositional(formula.right)
    return True


def conjoin(parts: Sequence[Formula]) -> Formula:
    """Left-associated conjunction; the empty conjunction is ``true``."""
    if not parts:
        return TRUE
    out = parts[0]
    for part in parts[1:]:
        out = And(out, part)
    return out


# ---------------------------------------------------------------------------
# Canonical printer
# ---------------------------------------------------------------------------

_UNARY_TEXT = {Not: "!", Next: "X", WeakNext: "N", Eventually: "F", Always: "G"}
_BINARY_TEXT = {And: "&", Or: "|", Until: "U", Release: "R"}


def canonical(formula: Formula) -> str:
    """Fully parenthesized canonical form; reparses to an equal tree.

    Binary applications carry their own parentheses, unary operands are
    parenthesized unless they are atoms or constants, and exactly one space
    separates tokens (``!`` binds directly to its operand).
    """
    if isinstance(formula, TrueFormula):
        return "true"
    if isinstance(formula, FalseFormula):
        return "false"
    if isinstance(formula, Atom):
        return formula.name
    if isinstance(formula, Not):
        return "!" + _operand_text(formula.operand)
    if isinstance(formula, _UNARY):
        return f"{_UNARY_TEXT[type(formula)]} {_operand_text(formula.operand)}"
    if isinstance(formula, _BINARY):
        op = _BINARY_TEXT[type(formula)]
        return f"({canonical(formula.left)} {op} {canonical(formula.right)})"
    raise TypeError(f"not a formula node: {formula!r}")


def _operand_text(operand: Formula) -> str:
    text = canonical(operand)
    if isinstance(operand, _UNARY):
        return f"({text})"
    return text  # atoms and constants are bare, binary forms self-parenthesize


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------
#
# Grammar (highest precedence first):
#   unary:   ! X N F G        (prefix)
#   until:   U R              (infix, right-associative)
#   and:     &                (infix, left-associative)
#   or:      |                (infix, left-associative)
# Atoms match [a-z][a-z0-9-]*; `true` and `false` are reserved words.

_ATOM_RE = re.compile(r"[a-z][a-z0-9-]*")

_SINGLE_CHAR = {
    "(": "LPAREN",
    ")": "RPAREN",
    "&": "AND",
    "|": "OR",
    "!": "NOT",
}

_UPPER_OPS = {
    "X": "NEXT",
    "N": "WEAKNEXT",
    "F": "EVENTUALLY",
    "G": "ALWAYS",
    "U": "UNTIL",
    "R": "RELEASE",
}

_PRIMARY_EXPECTED = frozenset(
    {"atom", "'true'", "'false'", "'('", "'!'", "'X'", "'N'", "'F'", "'G'"}
)
_INFIX_EXPECTED = frozenset({"'&'", "'|'", "'U'", "'R'"})


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _scan(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch in _SINGLE_CHAR:
            tokens.append(_Token(_SINGLE_CHAR[ch], ch, i))
            i += 1
            continue
        if ch in _UPPER_OPS:
            tokens.append(_Token(_UPPER_OPS[ch], ch, i))
            i += 1
            continue
        if ch.isupper():
            raise ParseError(
                f"unknown operator {ch!r}",
                i,
                frozenset(f"'{op}'" for op in _UPPER_OPS),
            )
        match = _ATOM_RE.match(text, i)
        if match:
            word = match.group()
            if word == "true":
                tokens.append(_Token("TRUE", word, i))
            elif word == "false":
                tokens.append(_Token("FALSE", word, i))
            else:
                tokens.append(_Token("ATOM", word, i))
            i = match.end()
            continue
        raise ParseError(f"unexpected character {ch!r}", i, _PRIMARY_EXPECTED)
    tokens.append(_Token("EOF", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0

    def peek(self) -> _Token:
        return self._tokens[self._pos]

    def advance(self) -> _Token:
        token = self._tokens[self._pos]
        self._pos += 1
        return token

    def parse_or(self) -> Formula:
        left = self.parse_and()
        while self.peek().kind == "OR":
            self.advance()
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> Formula:
        left = self.parse_until()
        while self.peek().kind == "AND":
            self.advance()
            left = And(left, self.parse_until())
        return left

    def parse_until(self) -> Formula:
        left = self.parse_unary()
        kind = self.peek().kind
        if kind == "UNTIL":
            self.advance()
            return Until(left, self.parse_until())
        if kind == "RELEASE":
            self.advance()
            return Release(left, self.parse_until())
        return left

    def parse_unary(self) -> Formula:
        kind = self.peek().kind
        unary = {
            "NOT": Not,
            "NEXT": Next,
            "WEAKNEXT": WeakNext,
            "EVENTUALLY": Eventually,
            "ALWAYS": Always,
        }.get(kind)
        if unary is not None:
            self.advance()
            return unary(self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> Formula:
        token = self.peek()
        if token.kind == "TRUE":
            self.advance()
            return TRUE
        if token.kind == "FALSE":
            self.advance()
            return FALSE
        if token.kind == "ATOM":
            self.advance()
            return Atom(token.text)
        if token.kind == "LPAREN":
            self.advance()
            inner = self.parse_or()
            closing = self.peek()
            if closing.kind != "RPAREN":
                raise ParseError(
                    f"expected ')', found {closing.text or 'end of input'!r}",
                    closing.offset,
                    frozenset({"')'"}) | _INFIX_EXPECTED,
                )
            self.advance()
            return inner
        raise ParseError(
            f"expected a formula, found {token.text or 'end of input'!r}",
            token.offset,
            _PRIMARY_EXPECTED,
        )


def parse(text: str) -> Formula:
    """Parse concrete syntax into a formula tree.

    Raises ParseError with the byte offset and the set of expected tokens.
    """
    parser = _Parser(_scan(text))
    formula = parser.parse_or()
    trailing = parser.peek()
    if trailing.kind != "EOF":
        raise ParseError(
            f"unexpected {trailing.text!r} after formula",
            trailing.offset,
            _INFIX_EXPECTED | frozenset({"end of input"}),
        )
    return formula


# ---------------------------------------------------------------------------
# Direct semantics
# ---------------------------------------------------------------------------


def evaluate(formula: Formula, trace: Trace) -> bool:
    """Decide whether the trace satisfies the formula.

    The trace must be non-empty; every element only needs to support
    ``name in state``.
    """
    states = list(trace)
    if not states:
        raise EmptyTraceError("satisfaction is undefined on the empty trace")
    return _holds(formula, states, 0)


def _holds(formula: Formula, states: list, i: int) -> bool:
    n = len(states)
    if isinstance(formula, TrueFormula):
        return True
    if isinstance(formula, FalseFormula):
        return False
    if isinstance(formula, Atom):
        return formula.name in states[i]
    if isinstance(formula, Not):
        return not _holds(formula.operand, states, i)
    if isinstance(formula, And):
        return _holds(formula.left, states, i) and _holds(formula.right, states, i)
    if isinstance(formula, Or):
        return _holds(formula.left, states, i) or _holds(formula.right, states, i)
    if isinstance(formula, Next):
        return i + 1 < n and _holds(formula.operand, states, i + 1)
    if isinstance(formula, WeakNext):
        return i + 1 >= n or _holds(formula.operand, states, i + 1)
    if isinstance(formula, Until):
        return any(
            _holds(formula.right, states, j)
            and all(_holds(formula.left, states, m) for m in range(i, j))
            for j in range(i, n)
        )
    if isinstance(formula, Release):
        return all(
            _holds(formula.right, states, j)
            or any(_holds(formula.left, states, m) for m in range(i, j))
            for j in range(i, n)
        )
    if isinstance(formula, Eventually):
        return any(_holds(formula.operand, states, j) for j in range(i, n))
    if isinstance(formula, Always):
        return all(_holds(formula.operand, states, j) for j in range(i, n))
    raise TypeError(f"not a formula node: {formula!r}")


# ---------------------------------------------------------------------------
# Negation normal form
# ---------------------------------------------------------------------------


def nnf(formula: Formula) -> Formula:
    """Push negations onto atoms.

    The result uses only literals, And/Or, Next/WeakNext and Until/Release;
    Eventually and Always are lowered to their Until/Release expansions.
    Satisfaction is preserved on every non-empty trace.
    """
    if isinstance(formula, (TrueFormula, FalseFormula, Atom)):
        return formula
    if isinstance(formula, Not):
        return _nnf_negated(formula.operand)
    if isinstance(formula, And):
        return And(nnf(formula.left), nnf(formula.right))
    if isinstance(formula, Or):
        return Or(nnf(formula.left), nnf(formula.right))
    if isinstance(formula, Next):
        return Next(nnf(formula.operand))
    if isinstance(formula, WeakNext):
        return WeakNext(nnf(formula.operand))
    if isinstance(formula, Until):
        return Until(nnf(formula.left), nnf(formula.right))
    if isinstance(formula, Release):
        return Release(nnf(formula.left), nnf(formula.right))
    if isinstance(formula, Eventually):
        return Until(TRUE, nnf(formula.operand))
    if isinstance(formula, Always):
        return Release(FALSE, nnf(formula.operand))
    raise TypeError(f"not a formula node: {formula!r}")


def _nnf_negated(formula: Formula) -> Formula:
    """Negation normal form of ``Not(formula)``."""
    if isinstance(formula, TrueFormula):
        return FALSE
    if isinstance(formula, FalseFormula):
        return TRUE
    if isinstance(formula, Atom):
        return Not(formula)
    if isinstance(formula, Not):
        return nnf(formula.operand)
    if isinstance(formula, And):
        return Or(_nnf_negated(formula.left), _nnf_negated(formula.right))
    if isinstance(formula, Or):
        return And(_nnf_negated(formula.left), _nnf_negated(formula.right))
    if isinstance(formula, Next):
        return WeakNext(_nnf_negated(formula.operand))
    if isinstance(formula, WeakNext):
        return Next(_nnf_negated(formula.operand))
    if isinstance(formula, Until):
        return Release(_nnf_negated(formula.left), _nnf_negated(formula.right))
    if isinstance(formula, Release):
        return Until(_nnf_negated(formula.left), _nnf_negated(formula.right))
    if isinstance(formula, Eventually):
        return Release(FALSE, _nnf_negated(formula.operand))
    if isinstance(formula, Always):
        return Until(TRUE, _nnf_negated(formula.operand))
    raise TypeError(f"not a formula node: {formula!r}")


def is_nnf(formula: Formula) -> bool:
    """Check the normal-form invariant: negation only directly on atoms."""
    if isinstance(formula, Not):
        return isinstance(formula.operand, Atom)
    if isinstance(formula, (Eventually, Always)):
        return False
    if isinstance(formula, _UNARY):
        return is_nnf(formula.operand)
    if isinstance(formula, _BINARY):
        return is_nnf(formula.left) and is_nnf(formula.right)
    return True
