"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 gateway error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig
from .domain import validate_matrix
from .errors import ArchSelectError, ConfigError, InvalidMatrix
from .io import load_matrix
from .pipeline import (
    PipelineResult,
    run_pipeline,
    whatif_air_scan,
    whatif_remove_asr,
    whatif_scale_qa,
)
from .report import render_air_scan, render_estimate, render_report, render_whatif
from .sensitivity import LATENCY_PRESETS, estimate_runtime

log = logging.getLogger("archselect")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI run configuration; flags override it")
    p.add_argument("--requirements", help="requirements JSON or CSV")
    p.add_argument("--matrix", help="decision matrix CSV or INI")
    p.add_argument("--backend", choices=("live", "mock"))
    p.add_argument("--mock-fixture", help="mock backend fixture JSON")
    p.add_argument("--endpoint-url", help="OpenAI-compatible base URL (live backend)")
    p.add_argument("--credential-env", help="name of the env var holding the API key")
    p.add_argument("--completion-model")
    p.add_argument("--embedding-model")
    p.add_argument("--cache-dir")
    p.add_argument("--out", help="output directory for result.json / report.txt")
    p.add_argument("--strict", action="store_true", default=None, help="fail on unknown QA labels")
    p.add_argument("--chunk-size", type=int)
    p.add_argument("--linkage", choices=("average", "complete", "single"))
    p.add_argument("--threshold", type=float, help="clustering merge threshold (cosine distance)")
    p.add_argument("--tie-break", choices=("first-listed", "report-all"))
    p.add_argument("--temperature", type=float)
    p.add_argument("--concurrency", type=int)


def _config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.override(
        requirements_path=args.requirements,
        matrix_path=args.matrix,
        backend=args.backend,
        mock_fixture=args.mock_fixture,
        endpoint_url=args.endpoint_url,
        credential_env_var=args.credential_env,
        completion_model=args.completion_model,
        embedding_model=args.embedding_model,
        cache_dir=args.cache_dir,
        out_dir=args.out,
        strict=args.strict,
        chunk_size=args.chunk_size,
        linkage=args.linkage,
        merge_threshold=args.threshold,
        tie_break=args.tie_break,
        temperature=args.temperature,
        concurrency=args.concurrency,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="archselect",
        description="Derive architectural choices from natural-language requirements.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline")
    _add_run_flags(run)

    whatif = sub.add_parser("whatif", help="re-optimise a run under a change")
    wsub = whatif.add_subparsers(dest="whatif", required=True)
    for name, help_ in (
        ("remove-asr", "drop ASRs and diff the decisions"),
        ("scale-qa", "scale one QA weight and diff the decisions"),
        ("air-scan", "find architecture-influencing requirement sets"),
    ):
        w = wsub.add_parser(name, help=help_)
        _add_run_flags(w)
        w.add_argument("--result", help="prior result.json (otherwise the pipeline runs fresh)")
        w.add_argument("--ccg", type=int, action="append", help="restrict to CCG id (repeatable)")
        w.add_argument("--json", action="store_true", help="print JSON instead of text")
        if name == "remove-asr":
            w.add_argument("ids", nargs="+", metavar="ASR_ID")
        elif name == "scale-qa":
            w.add_argument("qa")
            w.add_argument("factor", type=float)
        else:
            w.add_argument("--removal-order", choices=("input-order", "by-sensitive-qa"), default="input-order")

    est = sub.add_parser("estimate", help="runtime estimate for condition grouping")
    est.add_argument("n", type=int, help="number of requirements")
    est.add_argument("--asr-ratio", type=float, default=0.15)
    est.add_argument("--conditional-ratio", type=float, default=0.15)
    est.add_argument("--latency", default="table",
                     help=f"seconds per LLM call or a preset {sorted(LATENCY_PRESETS)}")
    est.add_argument("--json", action="store_true")

    val = sub.add_parser("validate-matrix", help="check a decision matrix file")
    val.add_argument("--matrix", required=True)
    return parser


def _result_for(args) -> PipelineResult:
    if args.result:
        return PipelineResult.load(args.result)
    return run_pipeline(_config(args))


def _cmd_run(args) -> int:
    result = run_pipeline(_config(args))
    sys.stdout.write(render_report(result))
    log.info("gateway: %s", result.gateway_stats.to_dict())
    return 0


def _cmd_whatif(args) -> int:
    result = _result_for(args)
    if args.whatif == "air-scan":
        per, hist = whatif_air_scan(result, args.ccg, args.removal_order)
        if args.json:
            doc = {"air_sets": {str(k): [a.to_dict() for a in v] for k, v in per.items()},
                   "histogram": {str(k): v for k, v in hist.items()}}
            sys.stdout.write(json.dumps(doc, indent=2) + "\n")
        else:
            sys.stdout.write(render_air_scan(per, hist))
        return 0
    if args.whatif == "remove-asr":
        entries = whatif_remove_asr(result, args.ids, args.ccg)
        title = f"What if {', '.join(args.ids)} were removed"
    else:
        entries = whatif_scale_qa(result, args.qa, args.factor, args.ccg)
        title = f"What if {args.qa.upper()} weight were scaled by {args.factor:g}"
    if args.json:
        sys.stdout.write(json.dumps([e.to_dict() for e in entries], indent=2) + "\n")
    else:
        sys.stdout.write(render_whatif(title, entries))
    return 0


def _cmd_estimate(args) -> int:
    try:
        latency = LATENCY_PRESETS[args.latency] if args.latency in LATENCY_PRESETS else float(args.latency)
    except ValueError:
        raise ConfigError(f"--latency must be a number or one of {sorted(LATENCY_PRESETS)}") from None
    try:
        est = estimate_runtime(args.n, args.asr_ratio, args.conditional_ratio, latency)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sys.stdout.write(json.dumps(est.to_dict(), indent=2) + "\n" if args.json else render_estimate(est))
    return 0


def _cmd_validate(args) -> int:
    try:
        matrix = load_matrix(args.matrix)
    except InvalidMatrix as exc:
        for v in exc.violations:
            print(v)
        return 1
    problems = validate_matrix(matrix)
    for v in problems:
        print(v)
    if not problems:
        print(f"ok: {len(matrix.groups)} groups, {matrix.n_choices} choices, QAs {', '.join(matrix.qas)}")
    return 1 if problems else 0


COMMANDS = {"run": _cmd_run, "whatif": _cmd_whatif, "estimate": _cmd_estimate, "validate-matrix": _cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except ArchSelectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal failure
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
