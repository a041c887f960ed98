"""A small reduced ordered binary decision diagram manager.

Variables are non-negative integers ordered by value.  Node ids are stable
within one manager, so two functions built in the same manager are
semantically equal exactly when their ids are equal; the automaton compiler
relies on that for state canonicalization, and the guard builder uses
root-to-one paths as a disjoint cube cover.
"""

from __future__ import annotations

from typing import Callable, Iterator

ZERO = 0
ONE = 1


class Bdd:
    def __init__(self):
        # id -> (var, lo, hi); ids 0 and 1 are the terminals
        self._nodes: list[tuple[int, int, int] | None] = [None, None]
        self._unique: dict[tuple[int, int, int], int] = {}
        self._ite_memo: dict[tuple[int, int, int], int] = {}

    def __len__(self) -> int:
        return len(self._nodes)

    def var(self, index: int) -> int:
        return self._mk(index, ZERO, ONE)

    def _mk(self, var: int, lo: int, hi: int) -> int:
        if lo == hi:
            return lo
        key = (var, lo, hi)
        node = self._unique.get(key)
        if node is None:
            node = len(self._nodes)
            self._nodes.append(key)
            self._unique[key] = node
        return node

    def _var_of(self, f: int) -> int:
        if f <= ONE:
            return 1 << 60  # terminals sort after every variable
        return self._nodes[f][0]

    def _cofactors(self, f: int, var: int) -> tuple[int, int]:
        if f <= ONE:
            return f, f
        node_var, lo, hi = self._nodes[f]
        if node_var == var:
            return lo, hi
        return f, f

    def ite(self, f: int, g: int, h: int) -> int:
        if f == ONE:
            return g
        if f == ZERO:
            return h
        if g == h:
            return g
        if g == ONE and h == ZERO:
            return f
        key = (f, g, h)
        cached = self._ite_memo.get(key)
        if cached is not None:
            return cached
        var = min(self._var_of(f), self._var_of(g), self._var_of(h))
        f_lo, f_hi = self._cofactors(f, var)
        g_lo, g_hi = self._cofactors(g, var)
        h_lo, h_hi = self._cofactors(h, var)
        result = self._mk(
            var, self.ite(f_lo, g_lo, h_lo), self.ite(f_hi, g_hi, h_hi)
        )
        self._ite_memo[key] = result
        return result

    def and_(self, f: int, g: int) -> int:
        return self.ite(f, g, ZERO)

    def or_(self, f: int, g: int) -> int:
        return self.ite(f, ONE, g)

    def not_(self, f: int) -> int:
        return self.ite(f, ZERO, ONE)

    def compose(self, f: int, env: dict[int, int]) -> int:
        """Simultaneously substitute env[var] for each variable of f."""
        memo: dict[int, int] = {}

        def walk(node: int) -> int:
            if node <= ONE:
                return node
            hit = memo.get(node)
            if hit is not None:
                return hit
            var, lo, hi = self._nodes[node]
            replacement = env.get(var)
            if replacement is None:
                replacement = self.var(var)
            result = self.ite(replacement, walk(hi), walk(lo))
            memo[node] = result
            return result

        return walk(f)

    def support(self, f: int) -> set[int]:
        seen: set[int] = set()
        out: set[int] = set()
        stack = [f]
        while stack:
            node = stack.pop()
            if node <= ONE or node in seen:
                continue
            seen.add(node)
            var, lo, hi = self._nodes[node]
            out.add(var)
            stack.append(lo)
            stack.append(hi)
        return out

    def evaluate(self, f: int, assignment: Callable[[int], bool]) -> bool:
        node = f
        while node > ONE:
            var, lo, hi = self._nodes[node]
            node = hi if assignment(var) else lo
        return node == ONE

    def paths_to_one(self, f: int) -> Iterator[dict[int, bool]]:
        """Disjoint partial assignments whose union is exactly the on-set."""

        def walk(node: int, path: dict[int, bool]) -> Iterator[dict[int, bool]]:
            if node == ONE:
                yield dict(path)
                return
            if node == ZERO:
                return
            var, lo, hi = self._nodes[node]
            path[var] = False
            yield from walk(lo, path)
            path[var] = True
            yield from walk(hi, path)
            del path[var]

        yield from walk(f, {})
