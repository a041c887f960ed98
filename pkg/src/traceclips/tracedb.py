"""Episode storage: predicate vocabulary, abstraction, and persistence.

A dataset is an immutable snapshot: an ordered predicate vocabulary plus a
list of episodes, each pairing concrete per-step payloads with a parallel
abstract trace.  Abstract states are integer bitsets; bit i corresponds to
the i-th predicate in vocabulary order.

On disk a dataset is a directory:

    manifest.json            vocabulary, episode index with per-file hashes,
                             content hash, format version
    episodes/<id>.jsonl      line 1: episode header (id, metadata)
                             line 2..n+1: {"a": "<hex bitset>", "s": {...}}

The hex bitset encodes the abstract state with the lowest bit mapped to the
first predicate in vocabulary order.  Serialization is canonical (sorted
keys, compact separators), so save -> load -> save is byte-identical and the
content hash is reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

FORMAT_VERSION = 1


class DatasetError(Exception):
    """Invalid, inconsistent, or corrupt dataset contents."""


class UnknownPredicateError(DatasetError):
    def __init__(self, name: str, context: str = ""):
        suffix = f" ({context})" if context else ""
        super().__init__(f"unknown predicate {name!r}{suffix}")
        self.name = name


def canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class GroupDef:
    name: str
    exclusive: bool


@dataclass(frozen=True)
class PredicateDef:
    name: str
    group: str
    description: str = ""
    params: tuple[tuple[str, float], ...] = ()

    @classmethod
    def make(cls, name: str, group: str, description: str = "", **params) -> "PredicateDef":
        return cls(name, group, description, tuple(sorted(params.items())))

    def params_dict(self) -> dict:
        return dict(self.params)


class Vocabulary:
    """Ordered predicate definitions, their groups, and (optionally) their
    concrete-state evaluators.

    Evaluators are only needed to abstract new concrete states; datasets
    loaded for search carry precomputed abstractions and work without them.
    """

    def __init__(
        self,
        groups: Sequence[GroupDef],
        predicates: Sequence[PredicateDef],
        evaluators: Mapping[str, Callable] | None = None,
        domain: str = "custom",
    ):
        group_names = [g.name for g in groups]
        if len(set(group_names)) != len(group_names):
            raise DatasetError("duplicate group names in vocabulary")
        names = [p.name for p in predicates]
        if len(set(names)) != len(names):
            raise DatasetError("duplicate predicate names in vocabulary")
        by_group = {g.name: g for g in groups}
        for predicate in predicates:
            if predicate.group not in by_group:
                raise DatasetError(
                    f"predicate {predicate.name!r} references unknown group "
                    f"{predicate.group!r}"
                )
        self.domain = domain
        self.groups = tuple(groups)
        self.predicates = tuple(predicates)
        self._index = {p.name: i for i, p in enumerate(predicates)}
        self._groups_by_name = by_group
        self._evaluators = dict(evaluators or {})
        self.version = hashlib.sha256(
            canonical_json(self._definition_dict()).encode()
        ).hexdigest()[:12]

    def _definition_dict(self) -> dict:
        return {
            "domain": self.domain,
            "groups": [
                {"name": g.name, "exclusive": g.exclusive} for g in self.groups
            ],
            "predicates": [
                {
                    "name": p.name,
                    "group": p.group,
                    "description": p.description,
                    "params": p.params_dict(),
                }
                for p in self.predicates
            ],
        }

    def __len__(self) -> int:
        return len(self.predicates)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.predicates)

    def group_names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.groups)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownPredicateError(name) from None

    def group_of(self, name: str) -> str:
        return self.predicates[self.index(name)].group

    def members(self, group: str) -> tuple[str, ...]:
        return tuple(p.name for p in self.predicates if p.group == group)

    def validate_atoms(self, names: Iterable[str], context: str = "") -> None:
        for name in names:
            if name not in self._index:
                raise UnknownPredicateError(name, context)

    def has_evaluators(self) -> bool:
        return bool(self._evaluators)

    def with_evaluators(self, evaluators: Mapping[str, Callable]) -> "Vocabulary":
        return Vocabulary(self.groups, self.predicates, evaluators, self.domain)

    # -- abstraction ------------------------------------------------------

    def abstract_state(self, concrete) -> int:
        """Bitset of the predicates that hold on one concrete state."""
        if not self._evaluators:
            raise DatasetError(
                "vocabulary has no evaluators bound; cannot abstract states"
            )
        mask = 0
        for i, predicate in enumerate(self.predicates):
            evaluator = self._evaluators.get(predicate.name)
            if evaluator is None:
                raise DatasetError(f"no evaluator for predicate {predicate.name!r}")
            try:
                value = bool(evaluator(concrete))
            except Exception as exc:
                raise DatasetError(
                    f"evaluator for predicate {predicate.name!r} failed: {exc}"
                ) from exc
            if value:
                mask |= 1 << i
        self.check_groups(mask)
        return mask

    def check_groups(self, mask: int) -> None:
        """Exclusive groups may have at most one member set."""
        for group in self.groups:
            if not group.exclusive:
                continue
            count = sum(
                1
                for i, p in enumerate(self.predicates)
                if p.group == group.name and mask >> i & 1
            )
            if count > 1:
                raise DatasetError(
                    f"{count} members of exclusive group {group.name!r} set at once"
                )

    def to_names(self, mask: int) -> frozenset[str]:
        return frozenset(
            p.name for i, p in enumerate(self.predicates) if mask >> i & 1
        )

    def to_mask(self, names: Iterable[str]) -> int:
        mask = 0
        for name in names:
            mask |= 1 << self.index(name)
        return mask

    # -- hex line format --------------------------------------------------

    @property
    def hex_width(self) -> int:
        return max(1, (len(self.predicates) + 3) // 4)

    def encode_hex(self, mask: int) -> str:
        return format(mask, f"0{self.hex_width}x")

    def decode_hex(self, text: str) -> int:
        mask = int(text, 16)
        if mask >> len(self.predicates):
            raise DatasetError(f"abstract bitset {text!r} sets bits beyond vocabulary")
        return mask

    # -- manifest ---------------------------------------------------------

    def manifest_dict(self) -> dict:
        body = self._definition_dict()
        body["version"] = self.version
        return body

    @classmethod
    def from_manifest(cls, body: dict) -> "Vocabulary":
        groups = [GroupDef(g["name"], bool(g["exclusive"])) for g in body["groups"]]
        predicates = [
            PredicateDef(
                p["name"],
                p["group"],
                p.get("description", ""),
                tuple(sorted(p.get("params", {}).items())),
            )
            for p in body["predicates"]
        ]
        vocab = cls(groups, predicates, domain=body.get("domain", "custom"))
        declared = body.get("version")
        if declared and declared != vocab.version:
            raise DatasetError(
                f"vocabulary version mismatch: manifest says {declared}, "
                f"definitions hash to {vocab.version}"
            )
        return vocab


def abstract(concrete, vocab: Vocabulary) -> int:
    """Abstraction of one concrete state under the vocabulary."""
    return vocab.abstract_state(concrete)


@dataclass
class Episode:
    id: str
    concrete: list[dict]
    abstract: list[int]
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.concrete)

    def abstract_sets(self, vocab: Vocabulary) -> list[frozenset[str]]:
        return [vocab.to_names(mask) for mask in self.abstract]


@dataclass
class Dataset:
    vocabulary: Vocabulary
    episodes: list[Episode]
    content_hash: str

    def __len__(self) -> int:
        return len(self.episodes)

    @property
    def total_steps(self) -> int:
        return sum(len(ep) for ep in self.episodes)

    def episode(self, episode_id: str) -> Episode:
        for ep in self.episodes:
            if ep.id == episode_id:
                return ep
        raise DatasetError(f"no episode {episode_id!r} in dataset")


def _episode_lines(episode: Episode, vocab: Vocabulary) -> list[str]:
    lines = [canonical_json({"episode": {"id": episode.id, "metadata": episode.metadata}})]
    for mask, payload in zip(episode.abstract, episode.concrete):
        lines.append(canonical_json({"a": vocab.encode_hex(mask), "s": payload}))
    return lines


def _episode_bytes(episode: Episode, vocab: Vocabulary) -> bytes:
    return ("\n".join(_episode_lines(episode, vocab)) + "\n").encode()


def _content_hash(vocab: Vocabulary, episode_hashes: list[tuple[str, str]]) -> str:
    body = {
        "vocabulary": vocab.version,
        "episodes": [{"id": eid, "sha256": h} for eid, h in episode_hashes],
    }
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()


def ingest(
    episodes: Sequence[Episode],
    vocab: Vocabulary,
    verify_abstraction: bool = True,
) -> Dataset:
    """Build an immutable dataset snapshot, validating episode invariants.

    ``verify_abstraction=False`` skips re-abstracting concrete states; use it
    when the abstractions were just computed with this same vocabulary.
    """
    seen_ids = set()
    for episode in episodes:
        if episode.id in seen_ids:
            raise DatasetError(f"duplicate episode id {episode.id!r}")
        seen_ids.add(episode.id)
        if len(episode.concrete) != len(episode.abstract):
            raise DatasetError(
                f"episode {episode.id!r}: {len(episode.concrete)} concrete states "
                f"but {len(episode.abstract)} abstract states"
            )
        if len(episode.concrete) < 1:
            raise DatasetError(f"episode {episode.id!r} is empty")
        for step, mask in enumerate(episode.abstract):
            if mask >> len(vocab):
                raise DatasetError(
                    f"episode {episode.id!r} step {step + 1}: bits beyond vocabulary"
                )
            vocab.check_groups(mask)
        if verify_abstraction and vocab.has_evaluators():
            for step, (payload, mask) in enumerate(
                zip(episode.concrete, episode.abstract)
            ):
                recomputed = vocab.abstract_state(payload)
                if recomputed != mask:
                    raise DatasetError(
                        f"episode {episode.id!r} step {step + 1}: stored abstraction "
                        f"{vocab.encode_hex(mask)} != recomputed "
                        f"{vocab.encode_hex(recomputed)}"
                    )
    hashes = [
        (ep.id, hashlib.sha256(_episode_bytes(ep, vocab)).hexdigest())
        for ep in episodes
    ]
    return Dataset(vocab, list(episodes), _content_hash(vocab, hashes))


def save(dataset: Dataset, path: str | Path) -> Path:
    """Write the dataset directory; idempotent for identical content."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if manifest_path.exists():
        existing = json.loads(manifest_path.read_text())
        if existing.get("content_hash") == dataset.content_hash:
            return root
        raise DatasetError(
            f"{root} already holds a different dataset "
            f"({existing.get('content_hash', '?')[:12]})"
        )
    episode_dir = root / "episodes"
    episode_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for episode in dataset.episodes:
        blob = _episode_bytes(episode, dataset.vocabulary)
        filename = f"{episode.id}.jsonl"
        (episode_dir / filename).write_bytes(blob)
        index.append(
            {
                "id": episode.id,
                "steps": len(episode),
                "file": f"episodes/{filename}",
                "sha256": hashlib.sha256(blob).hexdigest(),
            }
        )
    manifest = {
        "format": FORMAT_VERSION,
        "vocabulary": dataset.vocabulary.manifest_dict(),
        "episodes": index,
        "content_hash": dataset.content_hash,
    }
    manifest_path.write_text(canonical_json(manifest) + "\n")
    return root


def load(path: str | Path, expect_vocabulary: Vocabulary | None = None) -> Dataset:
    """Load a dataset directory, verifying hashes and invariants.

    When ``expect_vocabulary`` is given, every manifest predicate must exist
    in it (same name, same group); the loaded dataset then uses the expected
    vocabulary object so its evaluators stay available.
    """
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"{root} has no manifest.json")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"corrupt manifest in {root}: {exc}") from exc
    if manifest.get("format") != FORMAT_VERSION:
        raise DatasetError(
            f"unsupported dataset format {manifest.get('format')!r} in {root}"
        )
    vocab = Vocabulary.from_manifest(manifest["vocabulary"])
    if expect_vocabulary is not None:
        for predicate in vocab.predicates:
            if predicate.name not in expect_vocabulary.names:
                raise UnknownPredicateError(predicate.name, f"manifest of {root}")
            if expect_vocabulary.group_of(predicate.name) != predicate.group:
                raise DatasetError(
                    f"predicate {predicate.name!r} is in group {predicate.group!r} "
                    f"in the manifest but {expect_vocabulary.group_of(predicate.name)!r} "
                    "in the expected vocabulary"
                )
        if vocab.version != expect_vocabulary.version:
            raise DatasetError(
                "vocabulary parameters differ from the expected vocabulary "
                f"({vocab.version} != {expect_vocabulary.version}); stored "
                "abstractions are stale"
            )
        vocab = expect_vocabulary

    episodes = []
    hashes = []
    for entry in manifest["episodes"]:
        file_path = root / entry["file"]
        if not file_path.exists():
            raise DatasetError(f"missing episode file {entry['file']} in {root}")
        blob = file_path.read_bytes()
        digest = hashlib.sha256(blob).hexdigest()
        if digest != entry["sha256"]:
            raise DatasetError(f"episode file {entry['file']} is corrupt (hash mismatch)")
        hashes.append((entry["id"], digest))
        lines = blob.decode().splitlines()
        if not lines:
            raise DatasetError(f"episode file {entry['file']} is empty")
        header = json.loads(lines[0]).get("episode", {})
        if header.get("id") != entry["id"]:
            raise DatasetError(
                f"episode file {entry['file']} names id {header.get('id')!r}, "
                f"manifest says {entry['id']!r}"
            )
        concrete = []
        abstract = []
        for line in lines[1:]:
            record = json.loads(line)
            abstract.append(vocab.decode_hex(record["a"]))
            concrete.append(record["s"])
        if len(concrete) != entry["steps"]:
            raise DatasetError(
                f"episode {entry['id']!r} has {len(concrete)} steps, manifest "
                f"says {entry['steps']}"
            )
        episodes.append(
            Episode(
                id=entry["id"],
                concrete=concrete,
                abstract=abstract,
                metadata=header.get("metadata", {}),
            )
        )
    content_hash = _content_hash(vocab, hashes)
    if content_hash != manifest["content_hash"]:
        raise DatasetError(
            f"dataset content hash mismatch in {root}: manifest says "
            f"{manifest['content_hash'][:12]}, files hash to {content_hash[:12]}"
        )
    dataset = ingest(episodes, vocab, verify_abstraction=False)
    assert dataset.content_hash == content_hash
    return dataset
