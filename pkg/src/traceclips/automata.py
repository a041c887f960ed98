"""Deterministic automata for finite-trace temporal formulas.

The construction works on the negation normal form of the input.  An
automaton state is a positive Boolean combination of "next obligations":
strong obligations ``X(b)`` (a successor position must exist and satisfy
``b``) and weak obligations ``N(b)`` (any successor position must satisfy
``b``).  The initial state is the single strong obligation on the whole
formula.  Consuming a letter strips the outer obligation of every variable,
expands Until/Release one step (``a U b = b | (a & X(a U b))``,
``a R b = b & (a | N(a R b))``), decides literals against the letter, and
canonicalizes the resulting combination in a shared decision diagram, so two
states are merged exactly when they are semantically equal.  A state accepts
when its combination is true under the end-of-trace map (strong -> false,
weak -> true); that split is what keeps strong and weak next sound at the
end of a trace.

Guards on edges are cubes over the formula's own atoms (the support set),
so edge counts are independent of the dataset vocabulary.  For every state
the guard cubes partition the full valuation space of the support set.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Container, NamedTuple, Sequence

from . import bdd as _bdd
from .ltlf import (
    And,
    Atom,
    Eventually,
    FalseFormula,
    Formula,
    Next,
    Not,
    Or,
    Release,
    TrueFormula,
    Until,
    WeakNext,
    atoms,
    canonical,
    nnf,
)

DEFAULT_STATE_CAP = 50_000
MAX_SUPPORT = 16


class CompileError(Exception):
    """Compilation exceeded a resource cap or met a malformed input."""


class InvariantError(Exception):
    """An automaton violated one of its structural invariants."""


class RunResult(NamedTuple):
    state: int
    accepted: bool


@dataclass(frozen=True)
class Guard:
    """A cube over support predicates: (name, required value) pairs.

    Predicates absent from the cube are unconstrained.
    """

    requires: tuple[tuple[str, bool], ...]

    def matches(self, state: Container[str]) -> bool:
        return all((name in state) == value for name, value in self.requires)

    def text(self) -> str:
        if not self.requires:
            return "*"
        return " & ".join(
            name if value else f"!{name}" for name, value in self.requires
        )


@dataclass
class DfaState:
    label: str
    accepting: bool
    edges: list[tuple[Guard, int]] = field(default_factory=list)


class Dfa:
    """Deterministic automaton with cube-guarded, total transitions."""

    def __init__(
        self,
        formula: Formula,
        support: Sequence[str],
        states: list[DfaState],
        initial: int,
        next_table: list[list[int]],
        raw_state_count: int,
        minimized: bool,
    ):
        self.formula = formula
        self.formula_text = canonical(formula)
        self.support = tuple(support)
        self.states = states
        self.initial = initial
        self.next_table = next_table
        self.raw_state_count = raw_state_count
        self.minimized = minimized
        self.accepting_mask = sum(
            1 << i for i, state in enumerate(states) if state.accepting
        )

    def __len__(self) -> int:
        return len(self.states)

    @property
    def letter_count(self) -> int:
        return 1 << len(self.support)

    def letter_of(self, state: Container[str]) -> int:
        """Project an abstract state onto the support valuation index."""
        letter = 0
        for i, name in enumerate(self.support):
            if name in state:
                letter |= 1 << i
        return letter

    def letter_names(self, letter: int) -> frozenset[str]:
        return frozenset(
            name for i, name in enumerate(self.support) if letter >> i & 1
        )

    def accepting_states(self) -> frozenset[int]:
        return frozenset(
            i for i, state in enumerate(self.states) if state.accepting
        )

    def is_accepting(self, state: int) -> bool:
        return bool(self.accepting_mask >> state & 1)

    def predecessors(self, states: int, letter: int) -> int:
        """Bitmask of states whose ``letter`` successor lies in ``states``."""
        out = 0
        for q, row in enumerate(self.next_table):
            if states >> row[letter] & 1:
                out |= 1 << q
        return out

    def validate(self) -> None:
        """Check determinism, totality, reachability, and table agreement."""
        n = len(self.states)
        for q, state in enumerate(self.states):
            for _, succ in state.edges:
                if not 0 <= succ < n:
                    raise InvariantError(f"edge target {succ} out of range")
            for letter in range(self.letter_count):
                valuation = self.letter_names(letter)
                hits = [succ for guard, succ in state.edges if guard.matches(valuation)]
                if len(hits) != 1:
                    raise InvariantError(
                        f"state {q}, letter {guard_text(valuation)}: "
                        f"{len(hits)} matching guards (want exactly 1)"
                    )
                if hits[0] != self.next_table[q][letter]:
                    raise InvariantError(
                        f"state {q}: guard successor disagrees with table"
                    )
        seen = {self.initial}
        frontier = [self.initial]
        while frontier:
            q = frontier.pop()
            for succ in self.next_table[q]:
                if succ not in seen:
                    seen.add(succ)
                    frontier.append(succ)
        if len(seen) != n:
            raise InvariantError(f"{n - len(seen)} states unreachable from initial")

    def to_dot(self) -> str:
        lines = [
            "digraph dfa {",
            "  rankdir=LR;",
            "  init [shape=point];",
            f"  init -> s{self.initial};",
        ]
        for i, state in enumerate(self.states):
            shape = "doublecircle" if state.accepting else "circle"
            label = state.label.replace('"', '\\"')
            lines.append(f'  s{i} [shape={shape} label="{i}: {label}"];')
        for i, state in enumerate(self.states):
            for guard, succ in state.edges:
                lines.append(f'  s{i} -> s{succ} [label="{guard.text()}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def describe(self) -> str:
        """Diagnostic dump: states, accepting flags, guards."""
        lines = [
            f"formula: {self.formula_text}",
            f"support: {', '.join(self.support) or '(none)'}",
            f"states: {len(self.states)} (constructed: {self.raw_state_count})",
        ]
        for i, state in enumerate(self.states):
            marks = []
            if i == self.initial:
                marks.append("initial")
            if state.accepting:
                marks.append("accepting")
            suffix = f" [{', '.join(marks)}]" if marks else ""
            lines.append(f"q{i}{suffix}: {state.label}")
            for guard, succ in state.edges:
                lines.append(f"  {guard.text()} -> q{succ}")
        return "\n".join(lines) + "\n"


def guard_text(valuation: frozenset[str]) -> str:
    return "{" + ", ".join(sorted(valuation)) + "}"


def run(dfa: Dfa, trace) -> RunResult:
    """Walk the automaton over a trace of abstract states.

    The empty trace ends (and is judged) at the initial state.
    """
    state = dfa.initial
    table = dfa.next_table
    for sigma in trace:
        state = table[state][dfa.letter_of(sigma)]
    return RunResult(state, dfa.is_accepting(state))


def step_backward(dfa: Dfa, states: int, sigma) -> int:
    """One predecessor step: all q with ``delta(q, sigma)`` in ``states``.

    State sets are bitmasks over state indices.
    """
    return dfa.predecessors(states, dfa.letter_of(sigma))


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Obligation:
    weak: bool
    body: Formula


class _Builder:
    def __init__(self, formula: Formula, support: tuple[str, ...], max_states: int):
        self.source = formula
        self.normalized = nnf(formula)
        self.support = support
        self.max_states = max_states
        self.bdd = _bdd.Bdd()
        self.obligations: list[_Obligation] = []
        self._var_index: dict[_Obligation, int] = {}
        self._bit = {name: i for i, name in enumerate(support)}
        self._step_memo: dict[tuple[int, Formula], int] = {}

    def _var(self, weak: bool, body: Formula) -> int:
        key = _Obligation(weak, body)
        index = self._var_index.get(key)
        if index is None:
            index = len(self.obligations)
            self.obligations.append(key)
            self._var_index[key] = index
        return self.bdd.var(index)

    def _step(self, formula: Formula, letter: int) -> int:
        """Combination equivalent to "the trace from this letter satisfies
        ``formula``", expressed over obligations about the following suffix."""
        memo_key = (letter, formula)
        cached = self._step_memo.get(memo_key)
        if cached is not None:
            return cached
        result = self._step_uncached(formula, letter)
        self._step_memo[memo_key] = result
        return result

    def _step_uncached(self, formula: Formula, letter: int) -> int:
        bdd = self.bdd
        if isinstance(formula, TrueFormula):
            return _bdd.ONE
        if isinstance(formula, FalseFormula):
            return _bdd.ZERO
        if isinstance(formula, Atom):
            return _bdd.ONE if letter >> self._bit[formula.name] & 1 else _bdd.ZERO
        if isinstance(formula, Not):  # NNF: operand is an atom
            return _bdd.ZERO if letter >> self._bit[formula.operand.name] & 1 else _bdd.ONE
        if isinstance(formula, And):
            return bdd.and_(
                self._step(formula.left, letter), self._step(formula.right, letter)
            )
        if isinstance(formula, Or):
            return bdd.or_(
                self._step(formula.left, letter), self._step(formula.right, letter)
            )
        if isinstance(formula, Next):
            return self._var(False, formula.operand)
        if isinstance(formula, WeakNext):
            return self._var(True, formula.operand)
        if isinstance(formula, Until):
            return bdd.or_(
                self._step(formula.right, letter),
                bdd.and_(self._step(formula.left, letter), self._var(False, formula)),
            )
        if isinstance(formula, Release):
            return bdd.and_(
                self._step(formula.right, letter),
                bdd.or_(self._step(formula.left, letter), self._var(True, formula)),
            )
        raise CompileError(f"unexpected node after normalization: {formula!r}")

    def _successor(self, node: int, node_support: set[int], letter: int) -> int:
        env = {
            var: self._step(self.obligations[var].body, letter)
            for var in node_support
        }
        return self.bdd.compose(node, env)

    def _accepting(self, node: int) -> bool:
        # End of trace: strong obligations fail, weak ones hold vacuously.
        return self.bdd.evaluate(node, lambda var: self.obligations[var].weak)

    def _label(self, node: int) -> str:
        if node == _bdd.ONE:
            return "true"
        if node == _bdd.ZERO:
            return "false"
        variables = sorted(self.bdd.support(node))
        if len(variables) > 12:
            return f"comb#{node}"
        position = {var: i for i, var in enumerate(variables)}

        def satisfied(mask: int) -> bool:
            return self.bdd.evaluate(node, lambda var: bool(mask >> position[var] & 1))

        terms = []
        for mask in range(1 << len(variables)):
            if not satisfied(mask):
                continue
            # minimal true-sets only; state combinations are monotone
            if any(mask >> i & 1 and satisfied(mask & ~(1 << i)) for i in range(len(variables))):
                continue
            literals = [
                ("N(" if self.obligations[var].weak else "X(") + canonical(self.obligations[var].body) + ")"
                for i, var in enumerate(variables)
                if mask >> i & 1
            ]
            terms.append(" & ".join(literals))
        return " | ".join(terms) if terms else f"comb#{node}"

    def build(self) -> Dfa:
        letters = 1 << len(self.support)
        initial = self._var(False, self.normalized)
        nodes = [initial]
        index = {initial: 0}
        next_table: list[list[int]] = []
        cursor = 0
        while cursor < len(nodes):
            node = nodes[cursor]
            node_support = self.bdd.support(node)
            row = []
            for letter in range(letters):
                succ = self._successor(node, node_support, letter)
                succ_index = index.get(succ)
                if succ_index is None:
                    succ_index = len(nodes)
                    if succ_index >= self.max_states:
                        raise CompileError(
                            f"state cap {self.max_states} exceeded while compiling "
                            f"{canonical(self.source)}"
                        )
                    index[succ] = succ_index
                    nodes.append(succ)
                row.append(succ_index)
            next_table.append(row)
            cursor += 1
        states = [
            DfaState(self._label(node), self._accepting(node)) for node in nodes
        ]
        for q, row in enumerate(next_table):
            states[q].edges = _cube_edges(row, self.support)
        return Dfa(
            formula=self.source,
            support=self.support,
            states=states,
            initial=0,
            next_table=next_table,
            raw_state_count=len(states),
            minimized=False,
        )


def _cube_edges(row: list[int], support: tuple[str, ...]) -> list[tuple[Guard, int]]:
    """Cover each successor's letter set with disjoint cubes.

    Root-to-one paths of a decision diagram are pairwise disjoint, and the
    groups partition the letter space, so the resulting guards are
    deterministic and total by construction.
    """
    manager = _bdd.Bdd()
    groups: dict[int, int] = {}
    for letter, succ in enumerate(row):
        cube = _bdd.ONE
        for bit in reversed(range(len(support))):
            var = manager.var(bit)
            cube = manager.and_(cube, var if letter >> bit & 1 else manager.not_(var))
        groups[succ] = manager.or_(groups.get(succ, _bdd.ZERO), cube)
    edges = []
    for succ in sorted(groups):
        for path in manager.paths_to_one(groups[succ]):
            requires = tuple(sorted((support[var], val) for var, val in path.items()))
            edges.append((Guard(requires), succ))
    return edges


def compile_formula(
    formula: Formula,
    *,
    minimize: bool = True,
    max_states: int = DEFAULT_STATE_CAP,
    max_support: int = MAX_SUPPORT,
) -> Dfa:
    """Compile a formula into a deterministic automaton.

    The automaton accepts exactly the non-empty traces satisfying the
    formula (the empty trace is always rejected before minimization; after
    minimization its verdict is unspecified, matching the undefined
    semantics).  Minimization is on by default; disable it when debugging
    the raw construction.
    """
    support = tuple(sorted(atoms(formula)))
    if len(support) > max_support:
        raise CompileError(
            f"support of {len(support)} predicates exceeds the cap of "
            f"{max_support} while compiling {canonical(formula)}"
        )
    dfa = _Builder(formula, support, max_states).build()
    if minimize:
        dfa = _apply_minimize(dfa)
    return dfa


def compile_pair(formula: Formula, **kwargs) -> tuple[Dfa, Dfa]:
    """The automaton of the formula and of its eventually-wrapper.

    Both share one support ordering, so search code can reuse letter
    projections between them.
    """
    return compile_formula(formula, **kwargs), compile_formula(
        Eventually(formula), **kwargs
    )


# ---------------------------------------------------------------------------
# Minimization
# ---------------------------------------------------------------------------


def minimize(dfa: Dfa) -> Dfa:
    """Smallest automaton agreeing with the input on every non-empty trace.

    Moore partition refinement over all support valuations, plus one folding
    pass that may merge an edge-free initial state into an equivalent state
    whose acceptance differs only on the empty trace.
    """
    return _apply_minimize(dfa)


def _apply_minimize(dfa: Dfa) -> Dfa:
    n = len(dfa.states)
    letters = dfa.letter_count
    table = dfa.next_table

    block = [1 if state.accepting else 0 for state in dfa.states]
    block_count = len(set(block))
    while True:
        signatures: dict[tuple, int] = {}
        refined = [0] * n
        for q in range(n):
            signature = (block[q], tuple(block[succ] for succ in table[q]))
            refined[q] = signatures.setdefault(signature, len(signatures))
        block = refined
        if len(signatures) == block_count:
            break
        block_count = len(signatures)

    members: dict[int, list[int]] = {}
    for q in range(n):
        members.setdefault(block[q], []).append(q)

    # Fold an initial state that nothing transitions into onto a block with
    # identical outgoing behavior; they can only differ on the empty trace.
    initial_block = block[dfa.initial]
    if members[initial_block] == [dfa.initial] and not any(
        succ == dfa.initial for row in table for succ in row
    ):
        wanted = tuple(block[succ] for succ in table[dfa.initial])
        for candidate, candidate_members in members.items():
            if candidate == initial_block:
                continue
            representative = candidate_members[0]
            if tuple(block[succ] for succ in table[representative]) == wanted:
                block[dfa.initial] = candidate
                members[candidate].append(dfa.initial)
                del members[initial_block]
                break

    # Renumber surviving blocks breadth-first from the initial block.  The
    # folded initial state never represents its block: its acceptance bit is
    # the one thing that may disagree with the rest of the block.
    def block_rep(block_id: int) -> int:
        candidates = [m for m in members[block_id] if m != dfa.initial]
        return min(candidates) if candidates else dfa.initial

    order = [block[dfa.initial]]
    seen = {block[dfa.initial]}
    cursor = 0
    while cursor < len(order):
        rep = block_rep(order[cursor])
        for letter in range(letters):
            succ_block = block[table[rep][letter]]
            if succ_block not in seen:
                seen.add(succ_block)
                order.append(succ_block)
        cursor += 1

    new_id = {block_id: i for i, block_id in enumerate(order)}
    new_table = []
    new_states = []
    for block_id in order:
        rep = block_rep(block_id)
        row = [new_id[block[table[rep][letter]]] for letter in range(letters)]
        new_table.append(row)
        new_states.append(
            DfaState(
                label=dfa.states[rep].label,
                accepting=dfa.states[rep].accepting,
                edges=_cube_edges(row, dfa.support),
            )
        )
    return Dfa(
        formula=dfa.formula,
        support=dfa.support,
        states=new_states,
        initial=0,
        next_table=new_table,
        raw_state_count=dfa.raw_state_count,
        minimized=True,
    )


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------


class DfaCache:
    """Compile-once cache keyed by canonical formula text (plus a scope).

    The lock is held across the fill, so concurrent lookups behave as if
    each formula were compiled exactly once.
    """

    def __init__(self, **compile_kwargs):
        self._lock = threading.Lock()
        self._cache: dict[tuple[str, str], Dfa] = {}
        self._compile_kwargs = compile_kwargs

    def get(self, formula: Formula, scope: str = "") -> Dfa:
        key = (scope, canonical(formula))
        with self._lock:
            dfa = self._cache.get(key)
            if dfa is None:
                dfa = compile_formula(formula, **self._compile_kwargs)
                self._cache[key] = dfa
            return dfa

    def __len__(self) -> int:
        return len(self._cache)
