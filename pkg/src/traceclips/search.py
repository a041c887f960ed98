"""Two-pass retrieval of matching sub-traces.

For a query formula f the engine compiles two automata: one for f and one
for "eventually f".  Per episode it feeds letters forward into the
eventually-automaton; the first accepting position is the earliest possible
match end.  It then reads the same letters backward while maintaining the
set of automaton states of f that can still reach acceptance, and stops at
the first position from which the initial state is a witness; that is the
latest possible match start for this end (the shortest clip).  The scan
restarts just after the match end, so every letter is consumed at most once
forward and at most once backward: at most 2n automaton reads per episode
of length n, no matter how many matches there are.

Scans never cross episode boundaries: a window spanning two independent
episodes would be physically meaningless.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .automata import Dfa, DfaCache, compile_formula
from .ltlf import Eventually, Formula, atoms, canonical
from .tracedb import Dataset, Episode, Vocabulary


@dataclass(frozen=True)
class Match:
    """A sub-trace [start..end] (1-based, inclusive) satisfying the query."""

    episode_id: str
    start: int
    end: int
    formula_text: str

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class Clip:
    """A match plus padded context frames for rendering."""

    match: Match
    window_start: int
    window_end: int
    frames: tuple = ()

    @property
    def window_length(self) -> int:
        return self.window_end - self.window_start + 1


@dataclass(frozen=True)
class SearchOptions:
    max_matches: int | None = None
    min_len: int = 2  # purely propositional queries match single frames otherwise
    pad: int = 5


@dataclass
class EpisodeReads:
    forward: int = 0
    backward: int = 0

    @property
    def total(self) -> int:
        return self.forward + self.backward


@dataclass
class SearchStats:
    reads: dict[str, EpisodeReads] = field(default_factory=dict)
    matches_found: int = 0
    matches_discarded: int = 0

    def for_episode(self, episode_id: str) -> EpisodeReads:
        return self.reads.setdefault(episode_id, EpisodeReads())

    def letter_reads(self, episode_id: str) -> int:
        return self.reads[episode_id].total

    def total_letter_reads(self) -> int:
        return sum(r.total for r in self.reads.values())


@dataclass
class SearchResult:
    clips: list[Clip]
    truncated: bool
    stats: SearchStats
    formula_text: str

    def matches(self) -> list[Match]:
        return [clip.match for clip in self.clips]


class _EpisodeScanner:
    """Forward/backward scanning over one episode's abstract trace.

    Letters are projected from the stored bitsets the first time the forward
    pass consumes a position and reused by the backward pass, so the trace
    itself is only traversed by the two automaton passes.
    """

    def __init__(self, dfa_phi: Dfa, dfa_f: Dfa, masks: Sequence[int], bits: Sequence[int], reads: EpisodeReads):
        self._masks = masks
        self._bits = tuple(bits)
        self._letters: list[int] = [-1] * len(masks)
        self._phi = dfa_phi
        self._f = dfa_f
        self._reads = reads

    def _letter(self, position: int) -> int:
        letter = self._letters[position - 1]
        if letter < 0:
            mask = self._masks[position - 1]
            letter = 0
            for out_bit, vocab_bit in enumerate(self._bits):
                if mask >> vocab_bit & 1:
                    letter |= 1 << out_bit
            self._letters[position - 1] = letter
        return letter

    def find(self, start: int) -> tuple[int, int] | None:
        """Earliest match end at or after ``start`` and its latest start."""
        table = self._f.next_table
        accepting = self._f.accepting_mask
        state = self._f.initial
        n = len(self._masks)
        for position in range(start, n + 1):
            self._reads.forward += 1
            state = table[state][self._letter(position)]
            if accepting >> state & 1:
                return self._backward(position), position
        return None

    def _backward(self, end: int) -> int:
        """Latest start so that [start..end] satisfies the query formula.

        Walks backward keeping the set of states from which the remaining
        (already read) suffix reaches acceptance; stops as soon as the
        initial state joins the set.  Matches are non-empty, so the check
        happens only after a letter has been read.
        """
        dfa = self._phi
        states = dfa.accepting_mask
        initial_bit = 1 << dfa.initial
        for position in range(end, 0, -1):
            self._reads.backward += 1
            states = dfa.predecessors(states, self._letter(position))
            if states & initial_bit:
                return position
        raise AssertionError(
            "forward pass accepted but no backward witness was found"
        )


def find_next(
    dfa_phi: Dfa,
    dfa_f: Dfa,
    trace: Sequence,
    start: int = 1,
    *,
    episode_id: str = "",
    stats: SearchStats | None = None,
) -> Match | None:
    """One match within a raw abstract trace of set-like states.

    ``dfa_f`` must be the automaton of the eventually-wrapper of
    ``dfa_phi``'s formula, compiled with the same support.
    """
    if dfa_phi.support != dfa_f.support:
        raise ValueError("the two automata were not compiled over the same support")
    reads = (stats or SearchStats()).for_episode(episode_id)
    # present the set-like states as single-bit-per-support masks
    masks = []
    for sigma in trace:
        masks.append(dfa_phi.letter_of(sigma))
    bits = range(len(dfa_phi.support))
    scanner = _EpisodeScanner(dfa_phi, dfa_f, masks, bits, reads)
    found = scanner.find(max(1, start))
    if found is None:
        return None
    k, l = found
    return Match(episode_id, k, l, dfa_phi.formula_text)


def _scan_episode(
    episode: Episode,
    dfa_phi: Dfa,
    dfa_f: Dfa,
    vocab: Vocabulary,
    options: SearchOptions,
    stats: SearchStats,
    remaining: int | None,
) -> tuple[list[Clip], bool]:
    bits = [vocab.index(name) for name in dfa_phi.support]
    scanner = _EpisodeScanner(
        dfa_phi, dfa_f, episode.abstract, bits, stats.for_episode(episode.id)
    )
    n = len(episode)
    clips: list[Clip] = []
    cursor = 1
    while cursor <= n:
        found = scanner.find(cursor)
        if found is None:
            break
        k, l = found
        cursor = l + 1  # discarded matches advance the restart cursor too
        stats.matches_found += 1
        if l - k + 1 < options.min_len:
            stats.matches_discarded += 1
            continue
        if remaining is not None and len(clips) >= remaining:
            return clips, True
        window_start = max(1, k - options.pad)
        window_end = min(n, l + options.pad)
        clips.append(
            Clip(
                match=Match(episode.id, k, l, dfa_phi.formula_text),
                window_start=window_start,
                window_end=window_end,
                frames=tuple(episode.concrete[window_start - 1 : window_end]),
            )
        )
    return clips, False


def find_all(
    formula: Formula,
    dataset: Dataset,
    options: SearchOptions | None = None,
    *,
    cache: DfaCache | None = None,
) -> SearchResult:
    """All matches in the dataset, ordered by (episode order, match end).

    Matches shorter than ``min_len`` are located and counted but not
    returned.  With ``max_matches`` set, the result is truncated once the
    limit is reached and flagged when at least one further match exists.
    """
    options = options or SearchOptions()
    vocab = dataset.vocabulary
    vocab.validate_atoms(atoms(formula), "query formula")
    if cache is not None:
        dfa_phi = cache.get(formula, scope=vocab.version)
        dfa_f = cache.get(Eventually(formula), scope=vocab.version)
    else:
        dfa_phi = compile_formula(formula)
        dfa_f = compile_formula(Eventually(formula))
    stats = SearchStats()
    clips: list[Clip] = []
    truncated = False
    for episode in dataset.episodes:
        remaining = None
        if options.max_matches is not None:
            remaining = options.max_matches - len(clips)
        episode_clips, hit_cap = _scan_episode(
            episode, dfa_phi, dfa_f, vocab, options, stats, remaining
        )
        clips.extend(episode_clips)
        if hit_cap:
            truncated = True
            break
    return SearchResult(
        clips=clips,
        truncated=truncated,
        stats=stats,
        formula_text=canonical(formula),
    )
