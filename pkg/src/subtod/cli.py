"""Command-line entry point.

Subcommands: ``synth`` writes a synthetic corpus, ``evaluate`` scores a
predictions file, ``sample`` generates and labels candidate dialogs,
``detect`` turns labeled candidates into training records, ``iterate`` runs
the full per-iteration pipeline, and ``stats`` renders report files as a
table. Exit codes: 0 on success, 2 on input or validation problems, 3 when
the generation backend is unreachable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .backends import ErrorInjectionConfig, GeneratorBackend, HttpBackend, ScriptedBackend, stable_seed
from .corpus import (
    Corpus,
    dialog_from_dict,
    dialog_to_dict,
    load_corpus,
    load_predictions,
    save_corpus,
)
from .errors import BackendError, PipelineError
from .evaluate import evaluate_corpus
from .iteration import (
    IterationConfig,
    IterationReport,
    TrainMode,
    build_group,
    map_goals,
    run_iteration,
    subsample_goals,
    write_jsonl,
)
from .sampling import SamplingConfig
from .subgoals import CandidateGroup, PairPolicy, detect_subgoals, emit_dpo, emit_sft
from .synthetic import build_world

BACKEND_URL_ENV = "SUIT_BACKEND_URL"


def _print_json(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def _make_backend(args, corpus: Corpus) -> GeneratorBackend:
    if args.backend == "scripted":
        noise = ErrorInjectionConfig(rate=args.noise_rate)
        return ScriptedBackend(corpus, noise, seed=args.seed)
    url = os.environ.get(BACKEND_URL_ENV) or args.url
    if not url:
        raise ValueError(f"--backend http requires --url or {BACKEND_URL_ENV}")
    return HttpBackend(url)


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("scripted", "http"), default="scripted")
    parser.add_argument("--url", help=f"http backend endpoint; {BACKEND_URL_ENV} overrides")
    parser.add_argument("--k", type=int, default=2)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--temperature", type=float, default=1.0)
    parser.add_argument("--goal-fraction", type=float, default=0.5)
    parser.add_argument("--iteration", type=int, default=0)
    parser.add_argument("--noise-rate", type=float, default=0.0,
                        help="scripted backend error injection rate per site")
    parser.add_argument("--workers", type=int, default=1)


def cmd_synth(args) -> int:
    corpus = build_world(args.goals, seed=args.seed, dev_goals=args.dev)
    save_corpus(corpus, args.out)
    _print_json(
        {
            "corpus": str(args.out),
            "n_goals": len(corpus.goals),
            "n_dev_goals": len(corpus.dev_goals),
        }
    )
    return 0


def cmd_evaluate(args) -> int:
    corpus = load_corpus(args.corpus)
    predictions = load_predictions(args.predictions)
    goals = {**corpus.goals, **corpus.dev_goals}
    references = {**corpus.references(), **corpus.dev_references()}
    report = evaluate_corpus(predictions, goals, corpus.database, references)
    _print_json(report.to_dict())
    if args.per_domain:
        print()
        print(f"{'domain':<12} {'inform':>7} {'success':>8}")
        for domain, (inform, success) in report.per_domain.items():
            print(f"{domain:<12} {inform:>7.1f} {success:>8.1f}")
    return 0


def cmd_sample(args) -> int:
    corpus = load_corpus(args.corpus)
    backend = _make_backend(args, corpus)
    goal_ids = subsample_goals(
        corpus.goals, args.goal_fraction, stable_seed(args.seed, "goals", args.iteration)
    )
    sampling = SamplingConfig(
        k=args.k,
        temperature=args.temperature,
        seed=stable_seed(args.seed, "sampling", args.iteration),
    )
    dialog_map = corpus.dialog_map()

    def process(goal_id: str) -> CandidateGroup:
        return build_group(
            dialog_map[goal_id], corpus.goals[goal_id], backend, sampling, args.k, corpus.database
        )

    results, skipped = map_goals(goal_ids, process, args.workers)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    n_candidates = n_successful = 0
    for goal_id in sorted(results):
        group = results[goal_id]
        entries = []
        for dialog, success in group.labeled():
            entry = dialog_to_dict(dialog)
            entry["success"] = success
            entries.append(entry)
            n_candidates += 1
            n_successful += success
        lines.append({"goal_id": goal_id, "candidates": entries})
    write_jsonl(out_dir / "candidates.jsonl", lines)
    _print_json(
        {
            "candidates_file": str(out_dir / "candidates.jsonl"),
            "n_goals": len(results),
            "n_candidates": n_candidates,
            "n_successful": n_successful,
            "n_unsuccessful": n_candidates - n_successful,
            "skipped": [list(pair) for pair in skipped],
        }
    )
    if not results and skipped:
        return 3
    return 0


def cmd_detect(args) -> int:
    corpus = load_corpus(args.corpus)
    dialog_map = corpus.dialog_map()
    samples = []
    with open(args.candidates, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            goal_id = entry["goal_id"]
            group = CandidateGroup(
                goal_id=goal_id,
                goal=corpus.goals[goal_id],
                source=dialog_map[goal_id],
                candidates=tuple(dialog_from_dict(c) for c in entry["candidates"]),
                labels=tuple(bool(c["success"]) for c in entry["candidates"]),
            )
            samples.extend(detect_subgoals(group, corpus.database))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    if args.mode in ("sft", "both"):
        records = emit_sft(samples)
        write_jsonl(out_dir / "sft.jsonl", records)
        written["sft.jsonl"] = len(records)
    if args.mode in ("dpo", "both"):
        records = emit_dpo(samples, PairPolicy(args.pair_policy))
        write_jsonl(out_dir / "dpo.jsonl", records)
        written["dpo.jsonl"] = len(records)
    _print_json({"n_subgoal_samples": len(samples), "written": written})
    return 0


def cmd_iterate(args) -> int:
    corpus = load_corpus(args.corpus)
    backend = _make_backend(args, corpus)
    cfg = IterationConfig(
        k=args.k,
        goal_fraction=args.goal_fraction,
        seed=args.seed,
        train_mode=TrainMode(args.mode),
        out_dir=args.out,
        iteration_index=args.iteration,
        temperature=args.temperature,
        workers=args.workers,
        pair_policy=PairPolicy(args.pair_policy),
    )
    report = run_iteration(corpus, cfg, backend)
    _print_json(report.to_dict())
    if report.n_goals_sampled == 0 and report.skipped:
        return 3
    return 0


def cmd_stats(args) -> int:
    reports = []
    for path in args.report:
        with open(path, encoding="utf-8") as handle:
            reports.append(IterationReport.from_dict(json.load(handle)))
    reports.sort(key=lambda r: r.iteration_index)
    max_bucket = max(r.k * r.k + 1 for r in reports)
    headers = ["iter", "mode", "goals", "success", "unsuccess"]
    headers += [str(b) for b in range(max_bucket + 1)]
    headers += ["state", "act_response"]
    rows = []
    for report in reports:
        row = [
            str(report.iteration_index),
            report.train_mode,
            str(report.n_goals_sampled),
            str(report.n_dialogs_successful),
            str(report.n_dialogs_unsuccessful),
        ]
        row += [str(report.histogram.get(b, 0)) for b in range(max_bucket + 1)]
        row += [
            str(report.n_subgoal_samples.get("state", 0)),
            str(report.n_subgoal_samples.get("act_response", 0)),
        ]
        rows.append(row)
    widths = [
        max(len(header), *(len(row[i]) for row in rows)) for i, header in enumerate(headers)
    ]
    print("  ".join(h.rjust(w) for h, w in zip(headers, widths)))
    for row in rows:
        print("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subtod")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic corpus")
    p.add_argument("--goals", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dev", type=int, default=None, help="held-out goal count")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="score a predictions file against a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--per-domain", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sample", help="generate and label candidate dialogs")
    p.add_argument("--corpus", required=True)
    _add_backend_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("detect", help="detect subgoals in labeled candidates")
    p.add_argument("--corpus", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--mode", choices=("sft", "dpo", "both"), default="both")
    p.add_argument("--pair-policy", choices=("first", "all"), default="first")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("iterate", help="run one full pipeline iteration")
    p.add_argument("--corpus", required=True)
    _add_backend_flags(p)
    p.add_argument("--mode", choices=("sft", "dpo"), default="sft")
    p.add_argument("--pair-policy", choices=("first", "all"), default="first")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("stats", help="render iteration reports as a table")
    p.add_argument("--report", action="append", required=True, help="repeatable")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON: line {exc.lineno} column {exc.colno}: {exc.msg}",
              file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"error: backend failure: {exc}", file=sys.stderr)
        return 3
    except (PipelineError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
