"""Command-line entry point: ``kba gen|run|sweep|calibrate|route``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .benchkit.data import load_descriptions, load_pool, load_testset
from .benchkit.harness import (
    MODES,
    SWEEP_PARAMS,
    BenchSettings,
    calibrate,
    format_table,
    make_router,
    run_benchmark,
    sweep,
)
from .benchkit.synthetic import SuiteSpec, generate_suite
from .knowledge_base import load_corpus
from .orchestrator import AmbiguityPolicy
from .semantic_cache import CacheConfig


def _load_settings(path: Optional[str]) -> BenchSettings:
    if path is None:
        return BenchSettings()
    with open(path, encoding="utf-8") as fh:
        return BenchSettings.from_dict(json.load(fh))


def _pool(args, settings: BenchSettings):
    return load_pool(
        args.corpus,
        getattr(args, "descriptions", None),
        settings.variant,
        kb_config=settings.kb,
        spec=settings.embedder,
        cache_config=CacheConfig(lookup_threshold=settings.router.cache.lookup_threshold),
    )


def _write_json(path: str, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_gen(args) -> int:
    spec = SuiteSpec(
        agents=args.agents, docs=args.docs, questions=args.questions, overlap=args.overlap, seed=args.seed
    )
    paths = generate_suite(spec).write(args.out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_run(args) -> int:
    settings = _load_settings(args.config)
    if args.variant:
        settings.variant = args.variant
    pool = _pool(args, settings)
    report = run_benchmark(pool, load_testset(args.testset), args.mode, settings, args.cache)
    _write_json(args.report, report.to_dict())
    if args.confusion_csv:
        Path(args.confusion_csv).write_text(report.metrics.confusion_csv(), encoding="utf-8")
    t = report.totals
    print(
        f"mode={report.mode} cache={report.cache} accuracy={report.accuracy:.3f} "
        f"weighted_precision={report.weighted_precision:.3f} weighted_f1={report.weighted_f1:.3f} "
        f"probes={t.probes_sent} classifier_calls={t.classifier_calls} cache_hits={t.cache_hits}"
    )
    return 0


def _parse_values(param: str, raw: str) -> list:
    items = [v.strip() for v in raw.split(",") if v.strip()]
    return items if param == "description_variant" else [float(v) for v in items]


def cmd_sweep(args) -> int:
    settings = _load_settings(args.config)
    values = _parse_values(args.param, args.values)
    modes = ("baseline", "kba") if args.mode == "both" else (args.mode,)
    if args.param == "overlap":
        spec = SuiteSpec(agents=args.agents, docs=args.docs, questions=args.questions, seed=settings.seed)
        rows = sweep(args.param, values, settings, suite_spec=spec, modes=modes, cache=args.cache)
    else:
        if not args.corpus or not args.testset:
            raise SystemExit("--corpus and --testset are required for this parameter")
        desc_path = args.descriptions or Path(args.corpus).with_name("descriptions.json")
        descriptions = load_descriptions(desc_path) if Path(desc_path).exists() else None
        rows = sweep(
            args.param,
            values,
            settings,
            corpus=load_corpus(args.corpus),
            testset=load_testset(args.testset),
            descriptions=descriptions,
            modes=modes,
            cache=args.cache,
        )
    print(format_table(rows))
    _write_json(
        args.report,
        {
            "parameter": args.param,
            "values": values,
            "config": settings.to_dict(),
            "rows": [{k: v for k, v in r.items() if k != "report"} for r in rows],
            "reports": [r["report"].to_dict() for r in rows],
        },
    )
    return 0


def cmd_calibrate(args) -> int:
    settings = _load_settings(args.config)
    result = calibrate(load_corpus(args.corpus), args.seed, settings.embedder)
    print(f"positives: min={result.positives.min():.3f} median={np.median(result.positives):.3f}")
    if len(result.negatives):
        print(f"negatives: max={result.negatives.max():.3f}")
    print(f"balanced accuracy at theta: {result.balanced_accuracy:.3f}")
    print(json.dumps({"kb": result.kb.to_dict()}, sort_keys=True))
    return 0


def _terminal_prompt(capable) -> str:
    print("Several agents can handle this request:")
    for i, (agent_id, conf) in enumerate(capable, 1):
        shown = "n/a" if conf is None else f"{conf:.3f}"
        print(f"  {i}. {agent_id} (confidence {shown})")
    ids = [a for a, _ in capable]
    while True:
        choice = input("Choose an agent (number or id): ").strip()
        if choice in ids:
            return choice
        if choice.isdigit() and 1 <= int(choice) <= len(ids):
            return ids[int(choice) - 1]
        print("invalid choice")


def cmd_route(args) -> int:
    settings = _load_settings(args.config)
    if args.variant:
        settings.variant = args.variant
    if args.interactive:
        settings.router = replace(settings.router, resolver=AmbiguityPolicy.INTERACTIVE)
    pool = _pool(args, settings)
    prompt = _terminal_prompt if args.interactive and sys.stdin.isatty() else None
    router = make_router(settings, probing=not args.baseline, prompt=prompt).fit(pool)
    decision = router.route_request(args.query)
    print(json.dumps(decision.to_dict(), indent=2, sort_keys=True))
    return 0 if not decision.failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kba", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic suite")
    p.add_argument("--agents", type=int, default=7)
    p.add_argument("--docs", type=int, default=20)
    p.add_argument("--questions", type=int, default=20)
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="route a test set and write a report")
    p.add_argument("--corpus", required=True)
    p.add_argument("--testset", required=True)
    p.add_argument("--descriptions")
    p.add_argument("--variant")
    p.add_argument("--mode", choices=MODES, default="kba")
    p.add_argument("--config")
    p.add_argument("--cache", choices=("cold", "warm"), default="cold")
    p.add_argument("--report", required=True)
    p.add_argument("--confusion-csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="vary one parameter and compare runs")
    p.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--corpus")
    p.add_argument("--testset")
    p.add_argument("--descriptions")
    p.add_argument("--config")
    p.add_argument("--mode", choices=("baseline", "kba", "both"), default="both")
    p.add_argument("--cache", choices=("cold", "warm"), default="cold")
    p.add_argument("--agents", type=int, default=7)
    p.add_argument("--docs", type=int, default=20)
    p.add_argument("--questions", type=int, default=20)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="recommend KB ack thresholds for a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("route", help="route a single query")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config")
    p.add_argument("--descriptions")
    p.add_argument("--variant")
    p.add_argument("--query", required=True)
    p.add_argument("--interactive", action="store_true")
    p.add_argument("--baseline", action="store_true", help="disable probing")
    p.set_defaults(func=cmd_route)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
