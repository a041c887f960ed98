"""Acceptance suite: one test per release criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion.
"""

import json
import random
import time

import pytest

from corpus import (
    brute_force_matches,
    random_formula,
    random_trace,
    synthetic_dataset,
    synthetic_vocab,
)
from traceclips.automata import compile_formula, run
from traceclips.highway import FaultySpec, generate_dataset, vocabulary
from traceclips.ltlf import canonical, evaluate, parse
from traceclips.querylang import (
    Constraint,
    ConstraintKind,
    PropSpec,
    Query,
    Selection,
    compile_query,
)
from traceclips.search import SearchOptions, find_all
from traceclips.tracedb import Episode, canonical_json, ingest


def _report(name: str, detail: str) -> None:
    print(f"\nACCEPTANCE PASS {name}: {detail}")


# -- 1. automaton/oracle equivalence ----------------------------------------


def test_oracle_equivalence_10k_pairs():
    rng = random.Random(2718)
    started = time.time()
    pairs = 0
    disagreements = []
    for _ in range(2000):
        formula = random_formula(rng, depth=4)
        dfa = compile_formula(formula)
        for _ in range(5):
            trace = random_trace(rng, max_len=8)
            accepted = run(dfa, trace).accepted
            satisfied = evaluate(formula, trace)
            if accepted != satisfied:
                disagreements.append((formula, trace))
            pairs += 1
    elapsed = time.time() - started
    assert pairs >= 10_000
    assert disagreements == [], disagreements[:3]
    assert elapsed < 60.0, f"took {elapsed:.1f}s, budget 60s"
    _report(
        "automaton equals direct semantics",
        f"{pairs} pairs, 0 disagreements, {elapsed:.1f}s",
    )


# -- 2 & 3. search correctness and the linear read bound ---------------------


@pytest.fixture(scope="module")
def search_corpus():
    rng = random.Random(5150)
    cases = []
    for _ in range(1000):
        formula = random_formula(rng, depth=3)
        dataset = synthetic_dataset(rng, episodes=1, length=rng.randint(1, 50))
        episode = dataset.episodes[0]
        result = find_all(formula, dataset, SearchOptions(min_len=1))
        cases.append(
            {
                "formula": formula,
                "states": episode.abstract_sets(dataset.vocabulary),
                "spans": [(c.match.start, c.match.end) for c in result.clips],
                "reads": result.stats.letter_reads(episode.id),
            }
        )
    return cases


def test_search_soundness_and_completeness(search_corpus):
    mismatches = 0
    for case in search_corpus:
        expected = brute_force_matches(case["formula"], case["states"])
        if case["spans"] != expected:
            mismatches += 1
            continue
        for start, end in case["spans"]:
            assert evaluate(case["formula"], case["states"][start - 1 : end])
    assert mismatches == 0
    total_matches = sum(len(case["spans"]) for case in search_corpus)
    _report(
        "search sound and complete",
        f"1000 formulas, {total_matches} matches, restart ends and latest starts "
        "all equal brute force, 0 disagreements",
    )


def test_read_bound_two_passes(search_corpus):
    for case in search_corpus:
        n = len(case["states"])
        assert case["reads"] <= 2 * n, f"{case['reads']} reads over {n} letters"

    # adversarial fixtures
    def states_of(*specs):
        return [frozenset(s) for s in specs]

    fixtures = {
        "no match": (parse("p"), states_of(*([()] * 40))),
        "match at last index": (parse("p"), states_of(*([()] * 39), ("p",))),
        "back-to-back matches": (
            parse("p & X q"),
            states_of(*([("p",), ("q",)] * 20)),
        ),
        "whole-episode match": (
            parse("r & (p U q)"),
            states_of(("p", "r"), *([("p",)] * 38), ("q",)),
        ),
    }
    details = []
    vocab = synthetic_vocab()
    for name, (formula, states) in fixtures.items():
        episode = Episode(
            "adv",
            [{"step": i + 1} for i in range(len(states))],
            [vocab.to_mask(s) for s in states],
            {},
        )
        adversarial = ingest([episode], vocab)
        result = find_all(formula, adversarial, SearchOptions(min_len=1))
        reads = result.stats.letter_reads("adv")
        assert reads <= 2 * len(states), name
        details.append(f"{name}: {reads}/{2 * len(states)}")
    _report(
        "letter reads within two passes",
        f"max 2n on all 1000 random episodes; adversarial: {'; '.join(details)}",
    )


# -- 4. template golden strings ----------------------------------------------


def test_template_golden_strings():
    vocab = vocabulary()
    lane2 = PropSpec.of({"lanes": Selection("lane-2")})
    changes = Query(
        start=lane2, constraint=Constraint(ConstraintKind.CHANGES, lane2)
    )
    assert (
        canonical(compile_query(changes, vocab))
        == "((lane-2 & lane-2) & X (F (!lane-2 & F true)))"
    )

    stays = Query(
        start=PropSpec.of(
            {"lanes": Selection("lane-1"), "relational": Selection("behind")}
        ),
        end=PropSpec.of({"lanes": Selection("lane-4")}),
        constraint=Constraint(
            ConstraintKind.STAYS_CONSTANT,
            PropSpec.of({"relational": Selection("behind")}),
        ),
    )
    assert (
        canonical(compile_query(stays, vocab))
        == "(((lane-1 & behind) & behind) & X (behind U lane-4))"
    )

    into = Query(
        constraint=Constraint(
            ConstraintKind.CHANGES_INTO,
            PropSpec.of({"lanes": Selection("lane-1")}),
            PropSpec.of({"lanes": Selection("lane-2")}),
        )
    )
    assert (
        canonical(compile_query(into, vocab))
        == "(((true & lane-1) & !lane-2) & X (F ((!lane-1 & lane-2) & F true)))"
    )
    _report(
        "constraint templates byte-stable",
        "changes / stays-constant / changes-into all match their golden strings",
    )


# -- 5. faulty-agent retrieval ------------------------------------------------


def test_faulty_agent_retrieval():
    started = time.time()
    spec = FaultySpec("plain", "top-lane", "lane-2 & car-above")
    dataset = generate_dataset(spec, episodes=100, steps=200, seed=7)
    query = Query(
        start=PropSpec.of(
            {"lanes": Selection("lane-2"), "relational": Selection("car-above")}
        ),
        end=PropSpec.of({"lanes": Selection("lane-1")}),
        constraint=Constraint(
            ConstraintKind.CHANGES, PropSpec.of({"lanes": Selection("lane-2")})
        ),
    )
    formula = compile_query(query, dataset.vocabulary)
    result = find_all(formula, dataset)
    assert len(result.clips) >= 1, "the fault query returned no clips"
    after_trigger = 0
    for clip in result.clips:
        trigger_step = dataset.episode(clip.match.episode_id).metadata["trigger_step"]
        if trigger_step is not None and clip.match.start >= trigger_step:
            after_trigger += 1
    share = after_trigger / len(result.clips)
    elapsed = time.time() - started
    assert share >= 0.80, f"only {share:.0%} of clips start at/after the trigger"
    assert elapsed < 120.0, f"took {elapsed:.1f}s, budget 120s"
    _report(
        "faulty-agent retrieval",
        f"{len(result.clips)} clips, {share:.0%} at/after the ground-truth trigger, "
        f"{elapsed:.1f}s",
    )


# -- 6. determinism ------------------------------------------------------------


def test_determinism_of_generation_and_queries():
    spec = FaultySpec("plain", "top-lane", "lane-2 & car-above")
    first = generate_dataset(spec, episodes=10, steps=120, seed=3)
    second = generate_dataset(spec, episodes=10, steps=120, seed=3)
    assert first.content_hash == second.content_hash

    formula = parse("lane-2 & X (F lane-1)")

    def query_digest(dataset):
        result = find_all(formula, dataset, SearchOptions(max_matches=50))
        return canonical_json(
            [
                {
                    "episode": c.match.episode_id,
                    "start": c.match.start,
                    "end": c.match.end,
                    "window": [c.window_start, c.window_end],
                }
                for c in result.clips
            ]
        )
    digest_a = query_digest(first)
    digest_b = query_digest(second)
    assert digest_a == digest_b
    _report(
        "deterministic generation and querying",
        f"dataset hash {first.content_hash[:12]} and query results stable across runs",
    )


# -- 7. performance sanity ------------------------------------------------------


def test_linear_scan_performance():
    dataset = generate_dataset("plain", episodes=500, steps=200, seed=31)
    assert dataset.total_steps == 100_000
    formula = parse("lane-2 & X (F lane-1)")
    started = time.time()
    result = find_all(formula, dataset)
    elapsed = time.time() - started
    assert elapsed < 2.0, f"find_all took {elapsed:.2f}s over 100k steps"
    _report(
        "linear-scan performance",
        f"find_all over {dataset.total_steps} steps in {elapsed:.2f}s "
        f"({len(result.clips)} clips), budget 2s",
    )
