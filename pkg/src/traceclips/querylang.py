"""The drop-down query model and its translation to temporal formulas.

A query names a start state, an end state, and optionally one constraint on
the stretch between them.  Start/end/constraint states are propositional:
per predicate group the user picks one member (optionally negated) or
leaves the group unconstrained.  The constraint kinds compile to fixed
templates:

  changes         (start & c) & X F (!c & F end)
  stays-constant  (start & c) & X (c U end)
  changes-into    (start & c & !c2) & X F (!c & c2 & F end)
  none            start & X F end

Duplicate conjuncts produced by the templates are kept verbatim; the
automaton compiler simplifies internally, and byte-stable template output is
what the golden tests (and the UI contract) pin down.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .ltlf import (
    And,
    Atom,
    Eventually,
    Formula,
    Next,
    Not,
    Until,
    canonical,
    conjoin,
)
from .tracedb import UnknownPredicateError, Vocabulary


class QueryError(Exception):
    """A query referenced unknown names or had an invalid shape."""

    def __init__(self, message: str, code: str = "invalid-query", detail: dict | None = None):
        super().__init__(message)
        self.code = code
        self.detail = detail or {}


@dataclass(frozen=True)
class Selection:
    """One group's pick: a member, optionally negated.

    ``predicate is None`` means the group is unconstrained ("any").
    """

    predicate: str | None = None
    negated: bool = False

    def to_wire(self) -> dict:
        if self.predicate is None:
            return {"select": "any"}
        wire = {"select": self.predicate}
        if self.negated:
            wire["negated"] = True
        return wire


@dataclass(frozen=True)
class PropSpec:
    """Per-group selections describing one propositional state."""

    selections: tuple[tuple[str, Selection], ...] = ()

    @classmethod
    def of(cls, selections: Mapping[str, Selection] | None = None) -> "PropSpec":
        return cls(tuple((selections or {}).items()))

    def selection_map(self) -> dict[str, Selection]:
        return dict(self.selections)

    def to_wire(self) -> dict:
        return {
            group: sel.to_wire()
            for group, sel in self.selections
            if sel.predicate is not None
        }


class ConstraintKind(str, Enum):
    NONE = "none"
    CHANGES = "changes"
    STAYS_CONSTANT = "stays-constant"
    CHANGES_INTO = "changes-into"


@dataclass(frozen=True)
class Constraint:
    kind: ConstraintKind = ConstraintKind.NONE
    spec: PropSpec = field(default_factory=PropSpec)
    spec2: PropSpec = field(default_factory=PropSpec)


@dataclass(frozen=True)
class Query:
    start: PropSpec = field(default_factory=PropSpec)
    end: PropSpec = field(default_factory=PropSpec)
    constraint: Constraint = field(default_factory=Constraint)

    def to_wire(self) -> dict:
        wire: dict = {"start": self.start.to_wire(), "end": self.end.to_wire()}
        constraint: dict = {"kind": self.constraint.kind.value}
        if self.constraint.kind is not ConstraintKind.NONE:
            constraint["spec"] = self.constraint.spec.to_wire()
        if self.constraint.kind is ConstraintKind.CHANGES_INTO:
            constraint["spec2"] = self.constraint.spec2.to_wire()
        wire["constraint"] = constraint
        return wire


def compile_prop(spec: PropSpec, vocab: Vocabulary) -> Formula:
    """Conjunction of the selected literals, in vocabulary group order.

    An empty selection compiles to ``true``.
    """
    chosen: dict[str, Selection] = {}
    for group, selection in spec.selections:
        if group not in vocab.group_names():
            raise QueryError(
                f"unknown predicate group {group!r}",
                code="unknown-group",
                detail={"group": group},
            )
        if group in chosen:
            raise QueryError(
                f"group {group!r} selected twice",
                code="duplicate-group",
                detail={"group": group},
            )
        chosen[group] = selection

    literals: list[Formula] = []
    for group in vocab.group_names():
        selection = chosen.get(group)
        if selection is None or selection.predicate is None:
            continue
        name = selection.predicate
        try:
            vocab.index(name)
        except UnknownPredicateError:
            raise QueryError(
                f"unknown predicate {name!r}",
                code="unknown-predicate",
                detail={"predicate": name},
            ) from None
        if vocab.group_of(name) != group:
            raise QueryError(
                f"predicate {name!r} is not a member of group {group!r}",
                code="wrong-group",
                detail={"predicate": name, "group": group},
            )
        literal: Formula = Atom(name)
        if selection.negated:
            literal = Not(literal)
        literals.append(literal)
    return conjoin(literals)


def compile_query(query: Query, vocab: Vocabulary) -> Formula:
    """Instantiate the constraint template for the query."""
    start = compile_prop(query.start, vocab)
    end = compile_prop(query.end, vocab)
    kind = query.constraint.kind
    if kind is ConstraintKind.NONE:
        # no constraint: start and end still name distinct positions
        return And(start, Next(Eventually(end)))
    middle = compile_prop(query.constraint.spec, vocab)
    if kind is ConstraintKind.CHANGES:
        return And(
            And(start, middle),
            Next(Eventually(And(Not(middle), Eventually(end)))),
        )
    if kind is ConstraintKind.STAYS_CONSTANT:
        return And(And(start, middle), Next(Until(middle, end)))
    if kind is ConstraintKind.CHANGES_INTO:
        if query.constraint.spec == query.constraint.spec2:
            raise QueryError(
                "changes-into requires two distinct specifications",
                code="constraint-not-distinct",
            )
        target = compile_prop(query.constraint.spec2, vocab)
        return And(
            And(And(start, middle), Not(target)),
            Next(Eventually(And(And(Not(middle), target), Eventually(end)))),
        )
    raise QueryError(f"unknown constraint kind {kind!r}")


def canonical_query_text(query: Query, vocab: Vocabulary) -> str:
    return canonical(compile_query(query, vocab))


# ---------------------------------------------------------------------------
# Wire format
# ---------------------------------------------------------------------------
#
# {
#   "start": {"lanes": {"select": "lane-2"}},
#   "end": {"lanes": {"select": "lane-1", "negated": true}},
#   "constraint": {"kind": "changes", "spec": {"lanes": {"select": "lane-2"}}}
# }
#
# Omitted groups and {"select": "any"} both mean "unconstrained".


def _selection_from_wire(group: str, value) -> Selection:
    if not isinstance(value, dict):
        raise QueryError(
            f"selection for group {group!r} must be an object",
            code="malformed-query",
            detail={"group": group},
        )
    name = value.get("select", "any")
    if name == "any":
        return Selection()
    if not isinstance(name, str):
        raise QueryError(
            f"selection for group {group!r} has a non-string predicate",
            code="malformed-query",
            detail={"group": group},
        )
    return Selection(predicate=name, negated=bool(value.get("negated", False)))


def _prop_from_wire(value, where: str) -> PropSpec:
    if value is None:
        return PropSpec()
    if not isinstance(value, dict):
        raise QueryError(
            f"{where} must be an object of group selections",
            code="malformed-query",
            detail={"field": where},
        )
    return PropSpec(
        tuple(
            (group, _selection_from_wire(group, sel)) for group, sel in value.items()
        )
    )


def query_from_wire(wire: dict) -> Query:
    """Parse the interchange form of a query; raises QueryError on shape errors."""
    if not isinstance(wire, dict):
        raise QueryError("query must be an object", code="malformed-query")
    unknown = set(wire) - {"start", "end", "constraint"}
    if unknown:
        raise QueryError(
            f"unknown query fields: {', '.join(sorted(unknown))}",
            code="malformed-query",
            detail={"fields": sorted(unknown)},
        )
    start = _prop_from_wire(wire.get("start"), "start")
    end = _prop_from_wire(wire.get("end"), "end")
    raw_constraint = wire.get("constraint") or {"kind": "none"}
    if not isinstance(raw_constraint, dict):
        raise QueryError("constraint must be an object", code="malformed-query")
    kind_text = raw_constraint.get("kind", "none")
    try:
        kind = ConstraintKind(kind_text)
    except ValueError:
        raise QueryError(
            f"unknown constraint kind {kind_text!r}",
            code="unknown-constraint",
            detail={"kind": kind_text},
        ) from None
    constraint = Constraint(
        kind=kind,
        spec=_prop_from_wire(raw_constraint.get("spec"), "constraint.spec"),
        spec2=_prop_from_wire(raw_constraint.get("spec2"), "constraint.spec2"),
    )
    return Query(start=start, end=end, constraint=constraint)
