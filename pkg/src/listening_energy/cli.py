"""Command-line interface.

Exit codes: 0 success, 1 other I/O failure, 2 usage, 3 input format,
4 structure violation, 5 provider failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .corpus import FIXTURE_NAMES, fixture_path, load_corpus, write_corpus
from .errors import MissingFile, ParseError, ToolkitError, UsageError
from .fsutil import atomic_write_text
from .harness import (
    MODES,
    ExchangeLog,
    ProviderSession,
    extend_corpus,
    generate_control,
    load_providers,
    load_template,
)
from .questionnaire import (
    DEFAULT_RATING_CUTOFF,
    FREE_TEXT_PROMPT,
    QUESTIONS,
    SCALE_FIELDS,
    QuestionnaireResponse,
    ResponseStore,
    discordance_report,
    dumps_responses,
    read_responses,
    record_response,
)
from .report import ChartStyle, analyze, write_files
from .sentiment import load_lexicon, polarity_scores, resolve_lexicon_path
from .trajectory import (
    DEFAULT_CONVERGENCE_THRESHOLD,
    DEFAULT_TREND_THRESHOLD,
    Role,
    score_corpus,
    summaries_from_csv,
    summarize_corpus,
)

log = logging.getLogger("listening_energy")

FIXTURE_PREFIX = "fixture:"


def _resolve_input(value: str) -> Path:
    """Plain path, or ``fixture:NAME`` for a bundled corpus or exchange log."""
    if not value.startswith(FIXTURE_PREFIX):
        return Path(value)
    name = value[len(FIXTURE_PREFIX) :]
    if name in FIXTURE_NAMES:
        return fixture_path(name)
    bundled = fixture_path("expert").parent / f"{name}.jsonl"
    if name.startswith("exchanges-") and bundled.is_file():
        return bundled
    raise UsageError(f"unknown bundled fixture {name!r}")


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--lexicon", default=default, help="lexicon file (default: $LISTENING_ENERGY_LEXICON or bundled)")
    parser.add_argument("--out", default=default, help="output directory (default: ./out)")
    parser.add_argument("--threshold-trend", type=float, default=argparse.SUPPRESS if suppress else DEFAULT_TREND_THRESHOLD)
    parser.add_argument(
        "--threshold-converge", type=float, default=argparse.SUPPRESS if suppress else DEFAULT_CONVERGENCE_THRESHOLD
    )
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def _provider_options(parser: argparse.ArgumentParser, default_template: str) -> None:
    parser.add_argument("--provider", required=True, help="provider name, e.g. chatgpt or gemini")
    parser.add_argument("--providers-file", help="JSON file overriding provider settings")
    parser.add_argument("--replay", help="exchange log to replay from (and append to with --live)")
    parser.add_argument("--live", action="store_true", help="allow real provider calls for unrecorded requests")
    parser.add_argument("--template", default=default_template, help="prompt template file or bundled name")
    parser.add_argument("--target-turns", type=int, default=12)
    parser.add_argument("--mode", choices=MODES, default="one-shot")
    parser.add_argument("--workers", type=int, default=1, help="parallel provider calls")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="listening-energy", description="Energy-trajectory analysis of dialogues.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="score texts or every turn of a corpus")
    p.add_argument("texts", nargs="*")
    p.add_argument("--corpus")

    p = sub.add_parser("analyze", parents=[common], help="trajectory summary, hypothesis report and charts")
    p.add_argument("corpus")
    p.add_argument("--start-index", type=int, default=0, help="x value of the first plotted point")
    p.add_argument("--smooth", action="store_true", help="plot a centered 3-point moving average")
    p.add_argument("--mean-color", default="red")
    p.add_argument("--bound-color", default="blue")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("extend", parents=[common], help="continue expert conversations with an LLM")
    p.add_argument("corpus")
    _provider_options(p, "empathetic")

    p = sub.add_parser("control", parents=[common], help="generate control conversations with an LLM")
    p.add_argument("--count", type=int, required=True)
    _provider_options(p, "control")

    p = sub.add_parser("questionnaire", parents=[common], help="record or move expert form responses")
    p.add_argument("dataset_id", nargs="?")
    p.add_argument("--store", required=True, help="response store file")
    p.add_argument("--rater", default="expert")
    for name in SCALE_FIELDS:
        p.add_argument(f"--{name.replace('_', '-')}", type=int, dest=name)
    p.add_argument("--comment", help="free-text remarks")
    p.add_argument("--order", type=int, help="position in which this dataset was presented")
    p.add_argument("--import", dest="import_path", help="merge responses from a file into the store")
    p.add_argument("--export", dest="export_path", help="write all stored responses to a file")

    p = sub.add_parser("discordance", parents=[common], help="contrast listener trends with empathy ratings")
    p.add_argument("--responses", required=True)
    p.add_argument("--corpus", action="append", default=[], help="corpus whose listener trend to use")
    p.add_argument("--summary", action="append", default=[], metavar="ID=CSV", help="saved trajectory.csv")
    p.add_argument("--cutoff", type=int, default=DEFAULT_RATING_CUTOFF, help="highest rating still counted as low")
    return parser


def _out_dir(args) -> Path:
    return Path(args.out or "out")


def _lexicon(args):
    path = resolve_lexicon_path(args.lexicon)
    return load_lexicon(path), path


def cmd_score(args) -> int:
    lexicon, _ = _lexicon(args)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if args.corpus:
        corpus = load_corpus(_resolve_input(args.corpus))
        writer.writerow(["id", "position", "role", "neg", "neu", "pos", "compound"])
        for conv in corpus:
            for turn in conv.turns:
                s = polarity_scores(turn.text, lexicon)
                writer.writerow([conv.id, turn.position, turn.role.value, s.negative, s.neutral, s.positive, s.compound])
    elif args.texts:
        writer.writerow(["text", "neg", "neu", "pos", "compound"])
        for text in args.texts:
            s = polarity_scores(text, lexicon)
            writer.writerow([text, s.negative, s.neutral, s.positive, s.compound])
    else:
        raise UsageError("give texts to score or --corpus")
    if args.out:
        atomic_write_text(_out_dir(args) / "scores.csv", buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_analyze(args) -> int:
    lexicon, lexicon_path = _lexicon(args)
    corpus_path = _resolve_input(args.corpus)
    corpus = load_corpus(corpus_path)
    style = ChartStyle(
        mean_color=args.mean_color,
        bound_color=args.bound_color,
        start_index=args.start_index,
        smooth=args.smooth,
    )
    result = analyze(
        corpus,
        lexicon,
        corpus_path,
        lexicon_path,
        trend_threshold=args.threshold_trend,
        convergence_threshold=args.threshold_converge,
        style=style,
        workers=args.workers,
    )
    for path in write_files(_out_dir(args), result.files):
        log.info("wrote %s", path)
    h = result.hypothesis
    print(
        f"{result.dataset_id}: speaker {result.summaries[Role.SPEAKER].trend.value}, "
        f"listener {result.summaries[Role.LISTENER].trend.value}; "
        f"starts_negative={h.starts_negative} ends_positive={h.ends_positive} converged={h.converged}"
    )
    return 0


def _session(args) -> ProviderSession:
    providers = load_providers(args.providers_file)
    if args.provider not in providers:
        raise UsageError(f"unknown provider {args.provider!r}; known: {', '.join(sorted(providers))}")
    if not args.replay and not args.live:
        raise UsageError("pass --replay LOG, or --live to call the provider")
    if args.target_turns < 1:
        raise UsageError("--target-turns must be positive")
    config = providers[args.provider]
    if args.replay:
        log_path = _resolve_input(args.replay)
        if not args.live and not log_path.is_file():
            raise UsageError(f"replay log {log_path} does not exist")
    else:
        log_path = _out_dir(args) / f"exchanges-{config.name}.jsonl"
    return ProviderSession(config, ExchangeLog(log_path), live=args.live)


def cmd_extend(args) -> int:
    seeds = load_corpus(_resolve_input(args.corpus))
    if seeds.kind.name != "expert":
        raise UsageError("extend needs an expert corpus")
    session = _session(args)
    template = load_template(args.template)
    result = extend_corpus(seeds, session, template, args.target_turns, args.mode, args.workers)
    path = write_corpus(result, _out_dir(args) / f"{result.dataset_id}.jsonl")
    print(f"wrote {len(result)} conversations to {path}")
    return 0


def cmd_control(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    session = _session(args)
    template = load_template(args.template)
    result = generate_control(session, template, args.count, args.target_turns, args.mode, args.workers)
    path = write_corpus(result, _out_dir(args) / f"{result.dataset_id}.jsonl")
    print(f"wrote {len(result)} conversations to {path}")
    return 0


def _ask_rating(field: str) -> int:
    while True:
        answer = input(f"{QUESTIONS[field]} [1-5]: ").strip()
        if answer.isdigit() and 1 <= int(answer) <= 5:
            return int(answer)
        print("please answer with a whole number from 1 to 5", file=sys.stderr)


def cmd_questionnaire(args) -> int:
    store = ResponseStore(args.store)
    if args.import_path:
        for response in read_responses(args.import_path):
            record_response(response, store)
    if args.dataset_id:
        ratings = {name: getattr(args, name) for name in SCALE_FIELDS}
        for name, value in ratings.items():
            if value is None:
                ratings[name] = _ask_rating(name)
        comment = args.comment
        if comment is None and any(getattr(args, n) is None for n in SCALE_FIELDS):
            comment = input(f"{FREE_TEXT_PROMPT} ").strip() or None
        response = QuestionnaireResponse(
            dataset_id=args.dataset_id,
            rater=args.rater,
            free_text=comment,
            presentation_order=args.order,
            **ratings,
        )
        print(f"stored {record_response(response, store)}")
    elif not args.import_path and not args.export_path:
        raise UsageError("give a dataset id to rate, --import or --export")
    if args.export_path:
        atomic_write_text(Path(args.export_path), dumps_responses(store))
    return 0


def cmd_discordance(args) -> int:
    summaries = {}
    lexicon = None
    for value in args.corpus:
        if lexicon is None:
            lexicon, _ = _lexicon(args)
        corpus = load_corpus(_resolve_input(value))
        scored = score_corpus(corpus, lexicon)
        summaries[corpus.dataset_id] = summarize_corpus(scored, args.threshold_trend)[Role.LISTENER]
    for value in args.summary:
        dataset_id, sep, path = value.partition("=")
        if not sep or not dataset_id:
            raise UsageError(f"--summary expects ID=CSV, got {value!r}")
        try:
            parsed = summaries_from_csv(Path(path).read_text(encoding="utf-8"), args.threshold_trend)
        except FileNotFoundError:
            raise MissingFile(path) from None
        except ValueError as exc:
            raise ParseError(path, str(exc)) from None
        if Role.LISTENER not in parsed:
            raise UsageError(f"{path} has no listener rows")
        summaries[dataset_id] = parsed[Role.LISTENER]
    if not summaries:
        raise UsageError("give at least one --corpus or --summary")
    entries = discordance_report(read_responses(args.responses), summaries, cutoff=args.cutoff)
    lines = "".join(json.dumps(e.as_dict()) + "\n" for e in entries)
    if args.out:
        atomic_write_text(_out_dir(args) / "discordance.jsonl", lines)
    sys.stdout.write(lines)
    return 0


COMMANDS = {
    "score": cmd_score,
    "analyze": cmd_analyze,
    "extend": cmd_extend,
    "control": cmd_control,
    "questionnaire": cmd_questionnaire,
    "discordance": cmd_discordance,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return UsageError.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ToolkitError.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
