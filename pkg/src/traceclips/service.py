"""HTTP facade: vocabulary, dataset generation, query answering, clip replay.

All routes live under /api/v1 and exchange JSON.  Errors use one envelope:

    {"error": {"code": "...", "message": "...", "detail": {...}}}

Dataset generation is content addressed: the id is a hash of the canonical
generation payload, so identical requests return the same dataset and the
work happens once (generation per id is single flight).  Query answers are
paginated by opaque cursors; pages of one cursor chain are disjoint and
their union is the full result in a stable order.
"""

from __future__ import annotations

import base64
import hashlib
import json
import random
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .automata import CompileError, DfaCache, compile_formula
from .highway import (
    FaultySpec,
    HighwayConfig,
    InvalidConfigError,
    generate_dataset,
    render_frame,
    vocabulary,
)
from .ltlf import ParseError, atoms, canonical, parse
from .querylang import QueryError, compile_query, query_from_wire
from .search import SearchOptions, find_all
from .tracedb import (
    Dataset,
    DatasetError,
    UnknownPredicateError,
    canonical_json,
    load,
    save,
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: dict | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail or {}

    def response(self) -> JSONResponse:
        return JSONResponse(
            status_code=self.status,
            content={
                "error": {
                    "code": self.code,
                    "message": self.message,
                    "detail": self.detail,
                }
            },
        )


def _bad_request(code: str, message: str, detail: dict | None = None) -> ApiError:
    return ApiError(400, code, message, detail)


class DatasetStore:
    """Content-addressed dataset directories under one root."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._datasets: dict[str, Dataset] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, dataset_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(dataset_id, threading.Lock())

    def list(self) -> list[dict]:
        entries = []
        for directory in sorted(self.root.iterdir()):
            manifest_path = directory / "manifest.json"
            if not manifest_path.is_file():
                continue
            manifest = json.loads(manifest_path.read_text())
            generator = {}
            generator_path = directory / "generator.json"
            if generator_path.is_file():
                generator = json.loads(generator_path.read_text())
            entries.append(
                {
                    "id": directory.name,
                    "content_hash": manifest["content_hash"],
                    "episodes": len(manifest["episodes"]),
                    "steps": sum(e["steps"] for e in manifest["episodes"]),
                    "generator": generator,
                }
            )
        return entries

    def get(self, dataset_id: str) -> Dataset:
        with self._registry_lock:
            cached = self._datasets.get(dataset_id)
        if cached is not None:
            return cached
        directory = self.root / dataset_id
        if not (directory / "manifest.json").is_file():
            raise ApiError(
                404, "unknown-dataset", f"no dataset {dataset_id!r}", {"dataset": dataset_id}
            )
        generator_path = directory / "generator.json"
        expected = None
        if generator_path.is_file():
            payload = json.loads(generator_path.read_text())
            expected = vocabulary(_config_from_payload(payload))
        dataset = load(directory, expect_vocabulary=expected)
        with self._registry_lock:
            self._datasets[dataset_id] = dataset
        return dataset

    def generate(self, payload: dict) -> tuple[str, bool]:
        normalized = canonical_json(payload)
        dataset_id = "ds-" + hashlib.sha256(normalized.encode()).hexdigest()[:16]
        with self._lock_for(dataset_id):
            directory = self.root / dataset_id
            if (directory / "manifest.json").is_file():
                return dataset_id, False
            config = _config_from_payload(payload)
            spec = _policy_from_payload(payload)
            dataset = generate_dataset(
                spec,
                episodes=payload["episodes"],
                steps=payload["steps"],
                seed=payload["seed"],
                config=config,
            )
            save(dataset, directory)
            (directory / "generator.json").write_text(normalized + "\n")
            with self._registry_lock:
                self._datasets[dataset_id] = dataset
            return dataset_id, True


def _config_from_payload(payload: dict) -> HighwayConfig:
    road = payload.get("road") or {}
    if not isinstance(road, dict):
        raise _bad_request("invalid-config", "road overrides must be an object")
    try:
        return HighwayConfig.from_dict(road)
    except InvalidConfigError as exc:
        raise _bad_request("invalid-config", str(exc)) from exc


def _policy_from_payload(payload: dict):
    policy = payload.get("policy")
    faulty = payload.get("faulty")
    if (policy is None) == (faulty is None):
        raise _bad_request(
            "invalid-config", "exactly one of 'policy' or 'faulty' is required"
        )
    if policy is not None:
        if not isinstance(policy, str):
            raise _bad_request("invalid-config", "'policy' must be a policy name")
        return policy
    if not isinstance(faulty, dict) or not {"base", "fault", "trigger"} <= set(faulty):
        raise _bad_request(
            "invalid-config", "'faulty' needs 'base', 'fault' and 'trigger'"
        )
    return FaultySpec(faulty["base"], faulty["fault"], faulty["trigger"])


def _require_int(body: dict, field: str, minimum: int, maximum: int | None = None) -> int:
    value = body.get(field)
    if not isinstance(value, int) or isinstance(value, bool):
        raise _bad_request("invalid-config", f"{field!r} must be an integer")
    if value < minimum or (maximum is not None and value > maximum):
        bound = f"{minimum}..{maximum}" if maximum is not None else f">= {minimum}"
        raise _bad_request("invalid-config", f"{field!r} must be {bound}")
    return value


def _encode_cursor(fingerprint: str, offset: int) -> str:
    raw = canonical_json({"q": fingerprint, "o": offset}).encode()
    return base64.urlsafe_b64encode(raw).decode()


def _decode_cursor(cursor: str, fingerprint: str) -> int:
    try:
        body = json.loads(base64.urlsafe_b64decode(cursor.encode()))
        offset = body["o"]
        stamp = body["q"]
    except Exception:
        raise _bad_request("invalid-cursor", "cursor is not decodable") from None
    if stamp != fingerprint or not isinstance(offset, int) or offset < 0:
        raise _bad_request(
            "invalid-cursor", "cursor does not belong to this query", {"cursor": cursor}
        )
    return offset


def create_app(
    data_dir: str | Path,
    *,
    page_default: int = 4,
    page_cap: int = 10,
    max_total_default: int = 500,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="traceclips", docs_url=None, redoc_url=None)
    store = DatasetStore(Path(data_dir))
    dfa_cache = DfaCache()
    default_vocab = vocabulary()

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return exc.response()

    async def _read_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise _bad_request("invalid-json", "request body is not valid JSON") from None
        if not isinstance(body, dict):
            raise _bad_request("invalid-json", "request body must be a JSON object")
        return body

    @app.get("/api/v1/predicates")
    def predicates():
        groups = []
        for group in default_vocab.groups:
            groups.append(
                {
                    "name": group.name,
                    "exclusive": group.exclusive,
                    "predicates": [
                        {
                            "name": p.name,
                            "description": p.description,
                            "params": p.params_dict(),
                        }
                        for p in default_vocab.predicates
                        if p.group == group.name
                    ],
                }
            )
        return {
            "domain": default_vocab.domain,
            "version": default_vocab.version,
            "groups": groups,
        }

    @app.get("/api/v1/datasets")
    def list_datasets():
        return {"datasets": store.list()}

    @app.post("/api/v1/datasets:generate")
    async def generate(request: Request):
        body = await _read_body(request)
        unknown = set(body) - {"policy", "faulty", "episodes", "steps", "seed", "road"}
        if unknown:
            raise _bad_request(
                "invalid-config", f"unknown fields: {', '.join(sorted(unknown))}"
            )
        payload = {
            "policy": body.get("policy"),
            "faulty": body.get("faulty"),
            "episodes": _require_int(body, "episodes", 1, 10_000),
            "steps": _require_int(body, "steps", 1, 1_000_000),
            "seed": _require_int(body, "seed", -(2**62), 2**62),
            "road": body.get("road") or {},
        }
        _policy_from_payload(payload)  # validate shape before hashing
        try:
            dataset_id, created = store.generate(payload)
        except InvalidConfigError as exc:
            raise _bad_request("invalid-config", str(exc)) from exc
        dataset = store.get(dataset_id)
        return {
            "dataset": dataset_id,
            "content_hash": dataset.content_hash,
            "episodes": len(dataset),
            "steps": dataset.total_steps,
            "created": created,
        }

    def _road_of(dataset: Dataset, episode_id: str | None = None) -> dict:
        episodes = dataset.episodes
        if episode_id is not None:
            episodes = [dataset.episode(episode_id)]
        for episode in episodes:
            road = episode.metadata.get("road")
            if road:
                return road
        return HighwayConfig().road_dict()

    @app.post("/api/v1/queries")
    async def queries(request: Request):
        body = await _read_body(request)
        dataset_id = body.get("dataset")
        if not isinstance(dataset_id, str):
            raise _bad_request("invalid-query", "'dataset' must be a dataset id")
        dataset = store.get(dataset_id)
        vocab = dataset.vocabulary

        wire = body.get("query")
        ltlf_text = body.get("ltlf")
        if (wire is None) == (ltlf_text is None):
            raise _bad_request(
                "invalid-query", "exactly one of 'query' or 'ltlf' is required"
            )
        try:
            if wire is not None:
                formula = compile_query(query_from_wire(wire), vocab)
            else:
                formula = parse(ltlf_text)
        except QueryError as exc:
            raise _bad_request(exc.code, str(exc), exc.detail) from exc
        except ParseError as exc:
            raise _bad_request(
                "parse-error",
                str(exc),
                {"offset": exc.offset, "expected": sorted(exc.expected)},
            ) from exc
        try:
            vocab.validate_atoms(sorted(atoms(formula)), "query")
        except UnknownPredicateError as exc:
            raise _bad_request(
                "unknown-predicate", str(exc), {"predicate": exc.name}
            ) from exc

        options = body.get("options") or {}
        if not isinstance(options, dict):
            raise _bad_request("invalid-query", "'options' must be an object")
        page_size = options.get("page_size", page_default)
        if not isinstance(page_size, int) or not 1 <= page_size <= page_cap:
            raise _bad_request(
                "invalid-page-size", f"page_size must be 1..{page_cap}"
            )
        min_len = options.get("min_len", 2)
        pad = options.get("pad", 5)
        max_total = options.get("max_total", max_total_default)
        shuffle_seed = options.get("shuffle_seed")
        for name, value in (("min_len", min_len), ("pad", pad), ("max_total", max_total)):
            if not isinstance(value, int) or value < 0:
                raise _bad_request("invalid-query", f"{name!r} must be a non-negative integer")
        if shuffle_seed is not None and not isinstance(shuffle_seed, int):
            raise _bad_request("invalid-query", "'shuffle_seed' must be an integer")

        canonical_text = canonical(formula)
        fingerprint = hashlib.sha256(
            canonical_json(
                {
                    "dataset": dataset_id,
                    "ltlf": canonical_text,
                    "min_len": min_len,
                    "pad": pad,
                    "max_total": max_total,
                    "shuffle": shuffle_seed,
                }
            ).encode()
        ).hexdigest()[:12]
        offset = 0
        if body.get("cursor") is not None:
            offset = _decode_cursor(body["cursor"], fingerprint)

        try:
            result = find_all(
                formula,
                dataset,
                SearchOptions(max_matches=max_total, min_len=min_len, pad=pad),
                cache=dfa_cache,
            )
        except CompileError as exc:
            raise _bad_request("compile-error", str(exc)) from exc
        clips = list(result.clips)
        if shuffle_seed is not None:
            random.Random(f"shuffle:{shuffle_seed}").shuffle(clips)

        page = clips[offset : offset + page_size]
        has_more = offset + page_size < len(clips)
        road_cache: dict[str, dict] = {}
        clip_docs = []
        for clip in page:
            road = road_cache.get(clip.match.episode_id)
            if road is None:
                road = _road_of(dataset, clip.match.episode_id)
                road_cache[clip.match.episode_id] = road
            clip_docs.append(
                {
                    "episode": clip.match.episode_id,
                    "start": clip.match.start,
                    "end": clip.match.end,
                    "window": {"start": clip.window_start, "end": clip.window_end},
                    "frames": [render_frame(f, road) for f in clip.frames],
                }
            )
        return {
            "ltlf": canonical_text,
            "dataset": dataset_id,
            "clips": clip_docs,
            "offset": offset,
            "total_found": len(clips),
            "has_more": has_more,
            "next_cursor": _encode_cursor(fingerprint, offset + page_size)
            if has_more
            else None,
            "truncated": result.truncated,
        }

    @app.get("/api/v1/clips/{dataset_id}/{episode_id}/{start}/{end}")
    def clip(dataset_id: str, episode_id: str, start: int, end: int):
        dataset = store.get(dataset_id)
        try:
            episode = dataset.episode(episode_id)
        except DatasetError:
            raise ApiError(
                404, "unknown-episode", f"no episode {episode_id!r}", {"episode": episode_id}
            ) from None
        if not 1 <= start <= end <= len(episode):
            raise ApiError(
                404,
                "out-of-range",
                f"[{start}..{end}] outside 1..{len(episode)}",
                {"start": start, "end": end, "steps": len(episode)},
            )
        road = _road_of(dataset, episode_id)
        return {
            "episode": episode_id,
            "start": start,
            "end": end,
            "frames": [
                render_frame(f, road) for f in episode.concrete[start - 1 : end]
            ],
        }

    @app.post("/api/v1/ltlf:compile")
    async def compile_endpoint(request: Request):
        body = await _read_body(request)
        text = body.get("formula")
        if not isinstance(text, str):
            raise _bad_request("invalid-query", "'formula' must be a string")
        try:
            formula = parse(text)
        except ParseError as exc:
            raise _bad_request(
                "parse-error",
                str(exc),
                {"offset": exc.offset, "expected": sorted(exc.expected)},
            ) from exc
        try:
            dfa = compile_formula(formula)
        except CompileError as exc:
            raise _bad_request("compile-error", str(exc)) from exc
        return {
            "canonical": canonical(formula),
            "states": len(dfa),
            "states_before_minimization": dfa.raw_state_count,
            "accepting_states": sorted(dfa.accepting_states()),
            "support": list(dfa.support),
        }

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app
