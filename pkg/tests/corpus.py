"""Seeded random formulas and traces shared across the test modules."""

import random

from traceclips.ltlf import (
    FALSE,
    TRUE,
    Always,
    And,
    Atom,
    Eventually,
    Next,
    Not,
    Or,
    Release,
    Until,
    WeakNext,
)

ATOM_POOL = ("p", "q", "r", "s")

_LEAF_WEIGHTS = [("atom", 8), ("true", 1), ("false", 1)]
_NODE_KINDS = (
    "not",
    "and",
    "and",
    "or",
    "or",
    "next",
    "weaknext",
    "until",
    "until",
    "release",
    "eventually",
    "always",
)


def random_formula(rng: random.Random, depth: int, atom_pool=ATOM_POOL):
    if depth <= 0 or rng.random() < 0.25:
        kind = rng.choices(
            [k for k, _ in _LEAF_WEIGHTS], weights=[w for _, w in _LEAF_WEIGHTS]
        )[0]
        if kind == "true":
            return TRUE
        if kind == "false":
            return FALSE
        return Atom(rng.choice(atom_pool))
    kind = rng.choice(_NODE_KINDS)
    if kind == "not":
        return Not(random_formula(rng, depth - 1, atom_pool))
    if kind == "next":
        return Next(random_formula(rng, depth - 1, atom_pool))
    if kind == "weaknext":
        return WeakNext(random_formula(rng, depth - 1, atom_pool))
    if kind == "eventually":
        return Eventually(random_formula(rng, depth - 1, atom_pool))
    if kind == "always":
        return Always(random_formula(rng, depth - 1, atom_pool))
    left = random_formula(rng, depth - 1, atom_pool)
    right = random_formula(rng, depth - 1, atom_pool)
    if kind == "and":
        return And(left, right)
    if kind == "or":
        return Or(left, right)
    if kind == "until":
        return Until(left, right)
    return Release(left, right)


def random_state(rng: random.Random, atom_pool=ATOM_POOL, density=0.4):
    return frozenset(a for a in atom_pool if rng.random() < density)


def random_trace(rng: random.Random, max_len=8, min_len=1, atom_pool=ATOM_POOL):
    length = rng.randint(min_len, max_len)
    return [random_state(rng, atom_pool) for _ in range(length)]


def synthetic_vocab(atom_pool=ATOM_POOL):
    from traceclips.tracedb import GroupDef, PredicateDef, Vocabulary

    return Vocabulary(
        [GroupDef("flags", exclusive=False)],
        [PredicateDef.make(name, "flags") for name in atom_pool],
    )


def synthetic_dataset(rng, episodes=1, length=30, atom_pool=ATOM_POOL, density=0.4):
    """Random abstract traces with placeholder concrete payloads."""
    from traceclips.tracedb import Episode, ingest

    vocab = synthetic_vocab(atom_pool)
    built = []
    for index in range(episodes):
        masks = [
            vocab.to_mask(random_state(rng, atom_pool, density)) for _ in range(length)
        ]
        concrete = [{"step": i + 1} for i in range(length)]
        built.append(Episode(f"ep-{index:04d}", concrete, masks, {}))
    return ingest(built, vocab)


def brute_force_matches(formula, states):
    """Restart-semantics reference: for each earliest satisfiable end at or
    after the cursor, pair it with the latest start in the live window."""
    from traceclips.ltlf import evaluate

    n = len(states)
    found = []
    cursor = 1
    while cursor <= n:
        hit = None
        for end in range(cursor, n + 1):
            starts = [
                k
                for k in range(cursor, end + 1)
                if evaluate(formula, states[k - 1 : end])
            ]
            if starts:
                hit = (max(starts), end)
                break
        if hit is None:
            break
        found.append(hit)
        cursor = hit[1] + 1
    return found
