"""Command-line entry points: generate, query, compile, check, serve.

Exit codes: 0 success, 1 usage error, 2 data error (datasets, vocabularies,
traces), 3 formula error (parse or compilation).
"""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click

from .automata import CompileError, compile_formula
from .highway import (
    POLICIES,
    FaultySpec,
    HighwayConfig,
    InvalidConfigError,
    ascii_clip,
    generate_dataset,
)
from .ltlf import EmptyTraceError, ParseError, canonical, evaluate, parse
from .querylang import (
    Constraint,
    ConstraintKind,
    PropSpec,
    Query,
    QueryError,
    Selection,
    compile_query,
)
from .search import SearchOptions, find_all
from .tracedb import DatasetError, Vocabulary, load, save

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_COMPILE = 3


class DataFailure(click.ClickException):
    exit_code = EXIT_DATA


class FormulaFailure(click.ClickException):
    exit_code = EXIT_COMPILE


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ParseError as exc:
            raise FormulaFailure(str(exc)) from exc
        except CompileError as exc:
            raise FormulaFailure(str(exc)) from exc
        except (DatasetError, InvalidConfigError, QueryError, EmptyTraceError) as exc:
            raise DataFailure(str(exc)) from exc

    return wrapper


@click.group()
def cli():
    """Query recorded agent behavior with temporal-logic clip retrieval."""


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--policy", type=click.Choice(sorted(POLICIES)), default=None)
@click.option(
    "--faulty",
    default=None,
    help='faulty agent spec as JSON: {"base": .., "fault": .., "trigger": ..}',
)
@click.option("--episodes", type=int, default=10, show_default=True)
@click.option("--steps", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--road", default=None, help="road config overrides as JSON")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_guard
def generate(policy, faulty, episodes, steps, seed, road, out):
    """Simulate a batch of episodes into a dataset directory."""
    if (policy is None) == (faulty is None):
        raise click.UsageError("exactly one of --policy or --faulty is required")
    if faulty is not None:
        try:
            body = json.loads(faulty)
            spec = FaultySpec(body["base"], body["fault"], body["trigger"])
        except (json.JSONDecodeError, TypeError, KeyError) as exc:
            raise click.UsageError(f"--faulty is not a valid spec: {exc}") from exc
    else:
        spec = policy
    config = HighwayConfig()
    if road is not None:
        try:
            overrides = json.loads(road)
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"--road is not valid JSON: {exc}") from exc
        config = HighwayConfig.from_dict(overrides)
    dataset = generate_dataset(spec, episodes=episodes, steps=steps, seed=seed, config=config)
    save(dataset, out)
    click.echo(f"dataset: {out}")
    click.echo(f"episodes: {len(dataset)}  steps: {dataset.total_steps}")
    click.echo(f"content-hash: {dataset.content_hash}")


# ---------------------------------------------------------------------------
# query
# ---------------------------------------------------------------------------


def _parse_literals(text: str, vocab: Vocabulary) -> PropSpec:
    """Comma-separated literals like "lane-2,car-above" or "!lane-1"."""
    selections: dict[str, Selection] = {}
    for raw in text.split(","):
        literal = raw.strip()
        if not literal:
            continue
        negated = literal.startswith("!")
        name = literal[1:].strip() if negated else literal
        group = vocab.group_of(name)  # raises on unknown names
        if group in selections:
            raise QueryError(
                f"two selections for group {group!r} in {text!r}",
                code="duplicate-group",
            )
        selections[group] = Selection(name, negated)
    return PropSpec.of(selections)


def _parse_constraint(text: str, vocab: Vocabulary) -> Constraint:
    """Forms: changes:SPEC | stays:SPEC | into:SPEC>SPEC."""
    kind, _, payload = text.partition(":")
    kind = kind.strip().lower()
    if kind == "changes":
        return Constraint(ConstraintKind.CHANGES, _parse_literals(payload, vocab))
    if kind == "stays":
        return Constraint(ConstraintKind.STAYS_CONSTANT, _parse_literals(payload, vocab))
    if kind == "into":
        before, sep, after = payload.partition(">")
        if not sep:
            raise click.UsageError("--constraint into needs the form into:SPEC>SPEC")
        return Constraint(
            ConstraintKind.CHANGES_INTO,
            _parse_literals(before, vocab),
            _parse_literals(after, vocab),
        )
    raise click.UsageError(
        f"unknown constraint kind {kind!r}; use changes:, stays: or into:"
    )


@cli.command()
@click.option("--dataset", type=click.Path(path_type=Path), required=True)
@click.option("--start", default=None, help='start literals, e.g. "lane-2,car-above"')
@click.option("--end", default=None, help='end literals, e.g. "lane-1"')
@click.option("--constraint", default=None, help="changes:SPEC | stays:SPEC | into:SPEC>SPEC")
@click.option("--ltlf", default=None, help="raw formula instead of the drop-down form")
@click.option("--max", "max_matches", type=int, default=None)
@click.option("--min-len", type=int, default=2, show_default=True)
@click.option("--pad", type=int, default=5, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
@click.option("--frames", "show_frames", is_flag=True, help="print ASCII frame strips")
@_guard
def query(dataset, start, end, constraint, ltlf, max_matches, min_len, pad, as_json, show_frames):
    """Search a dataset for clips matching a query."""
    data = load(dataset)
    vocab = data.vocabulary
    form_used = any(v is not None for v in (start, end, constraint))
    if (ltlf is None) == (not form_used):
        raise click.UsageError("use either --ltlf or the --start/--end/--constraint form")
    if ltlf is not None:
        formula = parse(ltlf)
    else:
        formula = compile_query(
            Query(
                start=_parse_literals(start or "", vocab),
                end=_parse_literals(end or "", vocab),
                constraint=_parse_constraint(constraint, vocab)
                if constraint
                else Constraint(),
            ),
            vocab,
        )
    result = find_all(
        formula,
        data,
        SearchOptions(max_matches=max_matches, min_len=min_len, pad=pad),
    )
    if as_json:
        click.echo(
            json.dumps(
                {
                    "v": 1,
                    "ltlf": result.formula_text,
                    "dataset_hash": data.content_hash,
                    "matches": [
                        {
                            "episode": c.match.episode_id,
                            "start": c.match.start,
                            "end": c.match.end,
                            "length": c.match.length,
                            "window": {"start": c.window_start, "end": c.window_end},
                        }
                        for c in result.clips
                    ],
                    "truncated": result.truncated,
                    "stats": {
                        "letter_reads": result.stats.total_letter_reads(),
                        "matches_found": result.stats.matches_found,
                        "matches_discarded": result.stats.matches_discarded,
                    },
                },
                indent=2,
            )
        )
        return
    click.echo(f"ltlf: {result.formula_text}")
    if not result.clips:
        click.echo("0 matches")
        return
    click.echo(f"{len(result.clips)} matches" + (" (more available)" if result.truncated else ""))
    click.echo(f"{'episode':<12} {'start':>6} {'end':>6} {'len':>5}   window")
    for clip in result.clips:
        m = clip.match
        click.echo(
            f"{m.episode_id:<12} {m.start:>6} {m.end:>6} {m.length:>5}   "
            f"[{clip.window_start}..{clip.window_end}]"
        )
    if show_frames:
        for clip in result.clips:
            episode = data.episode(clip.match.episode_id)
            road = episode.metadata.get("road") or HighwayConfig().road_dict()
            click.echo(
                f"\n=== {clip.match.episode_id} [{clip.match.start}..{clip.match.end}] ==="
            )
            click.echo(ascii_clip(list(clip.frames), road))


# ---------------------------------------------------------------------------
# compile / check
# ---------------------------------------------------------------------------


@cli.command("compile")
@click.option("--ltlf", required=True)
@click.option("--dot", type=click.Path(path_type=Path), default=None)
@_guard
def compile_cmd(ltlf, dot):
    """Compile a formula and report automaton statistics."""
    formula = parse(ltlf)
    dfa = compile_formula(formula)
    click.echo(f"canonical: {canonical(formula)}")
    click.echo(f"states: {dfa.raw_state_count} before minimization, {len(dfa)} after")
    click.echo(f"accepting: {len(dfa.accepting_states())}")
    click.echo(f"support: {', '.join(dfa.support) or '(none)'}")
    if dot is not None:
        dot.write_text(dfa.to_dot())
        click.echo(f"dot: {dot}")


@cli.command()
@click.option("--ltlf", required=True)
@click.option(
    "--trace",
    type=click.Path(path_type=Path, exists=True),
    required=True,
    help="fixture: one state per line as comma-separated predicate names",
)
@_guard
def check(ltlf, trace):
    """Evaluate a formula on a trace fixture with the direct semantics."""
    formula = parse(ltlf)
    states = []
    for line in trace.read_text().splitlines():
        names = frozenset(part.strip() for part in line.split(",") if part.strip())
        states.append(names)
    verdict = evaluate(formula, states)
    click.echo("true" if verdict else "false")


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


@cli.command()
@click.option(
    "--data",
    type=click.Path(path_type=Path),
    default=lambda: os.environ.get("TRACECLIPS_DATA", "./data"),
    help="dataset root directory [env TRACECLIPS_DATA]",
)
@click.option(
    "--port",
    type=int,
    default=lambda: int(os.environ.get("TRACECLIPS_PORT", "8000")),
    help="[env TRACECLIPS_PORT]",
)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option(
    "--page-cap",
    type=int,
    default=lambda: int(os.environ.get("TRACECLIPS_PAGE_CAP", "10")),
    help="maximum clips per page [env TRACECLIPS_PAGE_CAP]",
)
@click.option(
    "--frontend",
    type=click.Path(path_type=Path),
    default=None,
    help="directory with the built web UI (served at /)",
)
@_guard
def serve(data, port, host, page_cap, frontend):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(data, page_cap=page_cap, frontend_dir=frontend)
    uvicorn.run(app, host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(EXIT_USAGE)
    return 0


if __name__ == "__main__":
    sys.exit(main())
