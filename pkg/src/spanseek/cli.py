"""Command-line surface: run, eval, decompose, synth, sweep, plotdata."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .decompose import (
    BACKEND_LLM,
    BACKENDS,
    ChatEndpoint,
    DecomposeCache,
    EndpointConfig,
    decompose_query,
)
from .io import Manifest, load_document, load_manifest, save_manifest, write_document
from .metrics import format_report_table, format_sweep_table, report_to_dict
from .pipeline import (
    MODES,
    SWEEP_PARAMETERS,
    PipelineConfig,
    emit_plot_data,
    evaluate,
    run,
    sweep,
)
from .synthbench import PRESETS, generate_suite, write_suite


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--fps", type=float, default=None, help="frames per second of the tracks")
    parser.add_argument("--mode", choices=MODES, default=None, help="ablation mode")
    parser.add_argument("--prominence", type=float, default=None, help="peak prominence threshold")
    parser.add_argument("--mtd", type=float, default=None, help="minimum peak distance, seconds")
    parser.add_argument("--beta", type=float, default=None, help="evidence bonus weight")
    parser.add_argument("--nms", type=float, default=None, help="NMS tIoU threshold")
    parser.add_argument("--top-k", type=int, default=None, help="maximum spans per query")
    parser.add_argument("--parallelism", type=int, default=None, help="concurrent queries")
    parser.add_argument(
        "--unweighted-injection",
        action="store_true",
        help="add the raw evidence bonus to injected candidates instead of beta times it",
    )


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig()
    span = config.span
    refine = config.refine
    if args.prominence is not None:
        span = dataclasses.replace(span, prominence_min=args.prominence)
    if args.mtd is not None:
        span = dataclasses.replace(span, min_distance_s=args.mtd)
    if args.beta is not None:
        refine = dataclasses.replace(refine, beta=args.beta)
    if args.nms is not None:
        refine = dataclasses.replace(refine, nms_tiou=args.nms)
    if args.top_k is not None:
        refine = dataclasses.replace(refine, top_k=args.top_k)
    if args.unweighted_injection:
        refine = dataclasses.replace(refine, beta_applies_to_injected=False)
    updates: dict = {"span": span, "refine": refine}
    if args.fps is not None:
        updates["fps"] = args.fps
    if args.mode is not None:
        updates["mode"] = args.mode
    if args.parallelism is not None:
        updates["parallelism"] = args.parallelism
    return dataclasses.replace(config, **updates)


def _check_fps(manifest: Manifest, config: PipelineConfig) -> PipelineConfig:
    # manifest fps is authoritative for file-backed runs
    if manifest.fps != config.fps:
        return dataclasses.replace(config, fps=manifest.fps)
    return config


def _cmd_run(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    config = _check_fps(manifest, _config_from_args(args))
    document = run(manifest, config)
    write_document(document, args.out)
    errors = sum(1 for q in document["queries"] if "error" in q)
    print(f"wrote {args.out} ({len(document['queries'])} queries, {errors} errors)")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    document = load_document(args.predictions)
    report, skipped = evaluate(document, manifest)
    if skipped:
        print(f"warning: {skipped} queries had no ground truth and were skipped", file=sys.stderr)
    if args.out:
        write_document(report_to_dict(report), args.out)
        print(f"wrote {args.out}")
    print(format_report_table(report, label=f"{report.num_queries} queries"))
    return 0


def _cmd_decompose(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    endpoint = None
    cache = DecomposeCache(args.cache_dir) if args.cache_dir else None
    if args.backend == BACKEND_LLM:
        endpoint_config = EndpointConfig.from_env(
            base_url=args.endpoint_url, model=args.model
        )
        endpoint = ChatEndpoint(endpoint_config)
    records = []
    for record in manifest.queries:
        if record.sub_queries is not None and args.backend == "provided":
            records.append(record)
            continue
        triple = decompose_query(
            record.query_text,
            args.backend,
            endpoint=endpoint,
            cache=cache,
            provided=record.sub_queries,
        )
        records.append(dataclasses.replace(record, sub_queries=(triple.sub_a, triple.sub_b)))
    out = Manifest(fps=manifest.fps, queries=tuple(records), root=manifest.root)
    save_manifest(out, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    ranges = PRESETS[args.preset]()
    cases = generate_suite(args.cases, ranges, args.seed)
    manifest_path = write_suite(cases, args.out_dir)
    print(f"wrote {len(cases)} cases under {args.out_dir} (manifest: {manifest_path})")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    config = _check_fps(manifest, _config_from_args(args))
    values = [float(v) for v in args.values.split(",") if v.strip()]
    rows = sweep(manifest, config, args.parameter, values)
    table = format_sweep_table(rows, args.parameter)
    if args.out:
        doc = {
            "parameter": args.parameter,
            "rows": [
                {"value": value, "report": report_to_dict(report)}
                for value, report in rows
            ],
        }
        write_document(doc, args.out)
        print(f"wrote {args.out}")
    print(table)
    return 0


def _cmd_plotdata(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    config = _check_fps(manifest, _config_from_args(args))
    path = emit_plot_data(manifest, args.query_id, config, args.out)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spanseek",
        description="Temporal moment retrieval over per-frame similarity tracks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run retrieval over a manifest")
    p_run.add_argument("--manifest", required=True)
    p_run.add_argument("--out", required=True, help="prediction document path")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_eval = sub.add_parser("eval", help="score predictions against ground truth")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--predictions", required=True)
    p_eval.add_argument("--out", default=None, help="metrics document path")
    p_eval.set_defaults(func=_cmd_eval)

    p_dec = sub.add_parser("decompose", help="fill sub-queries into a manifest")
    p_dec.add_argument("--manifest", required=True)
    p_dec.add_argument("--out", required=True, help="augmented manifest path")
    p_dec.add_argument("--backend", choices=BACKENDS, default="rule")
    p_dec.add_argument("--cache-dir", default="", help="decomposition cache directory")
    p_dec.add_argument("--endpoint-url", default=None, help="chat-completions base URL")
    p_dec.add_argument("--model", default=None, help="endpoint model name")
    p_dec.set_defaults(func=_cmd_decompose)

    p_synth = sub.add_parser("synth", help="generate a synthetic benchmark suite")
    p_synth.add_argument("--out-dir", required=True)
    p_synth.add_argument("--cases", type=int, default=100)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--preset", choices=sorted(PRESETS), default="clean")
    p_synth.set_defaults(func=_cmd_synth)

    p_sweep = sub.add_parser("sweep", help="sensitivity sweep over one parameter")
    p_sweep.add_argument("--manifest", required=True)
    p_sweep.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", default=None, help="sweep document path")
    _add_config_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_plot = sub.add_parser("plotdata", help="dump aligned plot columns for one query")
    p_plot.add_argument("--manifest", required=True)
    p_plot.add_argument("--query-id", required=True)
    p_plot.add_argument("--out", required=True)
    _add_config_flags(p_plot)
    p_plot.set_defaults(func=_cmd_plotdata)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
