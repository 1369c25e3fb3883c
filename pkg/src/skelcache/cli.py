"""Command-line front end: run / sweep / bench / gen-synth / fetch-priors / export-report.

Exit codes: 0 success, 2 validation error (bad flags, malformed inputs),
1 runtime error (I/O failures, unexpected exceptions).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, priors, tensorio


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip() != ""]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _add_run_flags(sub: argparse.ArgumentParser, need_container: bool = True) -> None:
    if need_container:
        sub.add_argument("--container", required=True, help="SKC1 stream file")
    sub.add_argument("--priors", default=None, help="prior-matrix JSON (needed for --weight-mode llm)")
    sub.add_argument("--weight-mode", default="uniform", choices=list(harness.fusion.WEIGHT_MODES))
    sub.add_argument("--k", type=int, default=harness.DEFAULT_CAPACITY, help="cache capacity per class")
    sub.add_argument("--beta", type=float, default=harness.retrieval.DEFAULT_BETA, help="affinity temperature")
    sub.add_argument("--alpha-s", type=float, default=harness.fusion.DEFAULT_ALPHA, help="fusion balance")
    sub.add_argument("--retrieve-before-update", action="store_true")
    sub.add_argument("--gate-on-adapted", action="store_true",
                     help="gate cache updates on the adapted posterior instead of the zero-shot one")
    sub.add_argument("--gzsl", action="store_true", help="also report seen/unseen/harmonic-mean accuracy")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--prior-select", default="predicted", choices=list(harness.PRIOR_SELECT_MODES))
    sub.add_argument("--scheme", default=None, help="partition-scheme JSON for non-default skeletons")


def _run_config(args) -> harness.RunConfig:
    return harness.RunConfig(
        container=getattr(args, "container", None),
        priors=args.priors,
        weight_mode=args.weight_mode,
        k=args.k,
        beta=args.beta,
        alpha_s=args.alpha_s,
        retrieve_before_update=args.retrieve_before_update,
        gate_on_adapted=args.gate_on_adapted,
        gzsl=args.gzsl,
        out_dir=getattr(args, "out", None),
        seed=args.seed,
        prior_select=args.prior_select,
        scheme=args.scheme,
    )


def _cmd_run(args) -> int:
    cfg = _run_config(args)
    report = harness.run_stream(cfg)
    out = Path(args.out)
    harness.emit_reports(report, out)
    harness.save_report(report, out / "report.json")
    print(f"samples: {report.sample_count}")
    print(f"top1 baseline: {report.top1_baseline:.4f}")
    print(f"top1 adapted:  {report.top1_adapted:.4f}")
    if report.gzsl_adapted:
        g = report.gzsl_adapted
        print(f"gzsl adapted:  S={g.seen_accuracy:.4f} U={g.unseen_accuracy:.4f} H={g.harmonic_mean:.4f}")
    print(f"reports written to {out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _run_config(args)
    values = _int_list(args.values) if args.param == "k" else _float_list(args.values)
    rows = harness.sweep(cfg, args.param, values)
    harness.write_sweep_csv(rows, args.out)
    for row in rows:
        print(f"{args.param}={row['value']}: top1_adapted={row['top1_adapted']:.4f} ({row['runtime_s']:.2f}s)")
    print(f"sweep table written to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _run_config(args)
    rows = harness.bench_latency(
        cfg, _int_list(args.t_values), samples_per_t=args.samples,
        class_count=args.class_count, channels=args.channels, joints=args.joints,
        warm=not args.cold,
    )
    harness.write_bench_csv(rows, args.out)
    for row in rows:
        print(f"T={row['frames']}: {row['mean_retrieve_fuse_s'] * 1e6:.1f} us/sample over {row['samples']} samples")
    print(f"bench table written to {args.out}")
    return 0


def _cmd_gen_synth(args) -> int:
    cfg = tensorio.SyntheticConfig(
        class_count=args.class_count,
        channels=args.channels,
        frames=args.frames,
        joints=args.joints,
        sigma_proto=args.sigma_proto,
        sigma_noise=args.sigma_noise,
        sigma_logit=args.sigma_logit,
        seed=args.seed,
        samples_per_class=args.samples_per_class,
        seen_classes=tuple(_int_list(args.seen_classes)) if args.seen_classes else (),
    )
    container = tensorio.generate_synthetic(cfg)
    tensorio.write_container(args.out, container)
    print(f"wrote {container.sample_count} samples, {container.class_count} classes to {args.out}")
    return 0


def _cmd_fetch_priors(args) -> int:
    if args.classes:
        names = [ln.strip() for ln in Path(args.classes).read_text(encoding="utf-8").splitlines() if ln.strip()]
    elif args.container:
        names = tensorio.read_container(args.container).class_names
    else:
        raise ValueError("fetch-priors needs --classes or --container")
    endpoint = priors.EndpointConfig(
        base_url=args.base_url,
        model=args.model,
        api_key_env=args.api_key_env,
        timeout_s=args.timeout,
        max_retries=args.max_retries,
        fixture_dir=args.fixture_dir,
    )
    matrix = priors.fetch_priors(names, endpoint, save_to=args.out)
    print(f"wrote prior matrix for {matrix.class_count} classes to {args.out}")
    return 0


def _cmd_export_report(args) -> int:
    report = harness.load_report(args.report)
    harness.emit_reports(report, args.out)
    print(f"report bundle written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skelcache",
        description="Streaming test-time adaptation for zero-shot skeleton action classifiers.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="stream a container through the adaptation loop")
    _add_run_flags(run)
    run.add_argument("--out", required=True, help="report output directory")
    run.set_defaults(fn=_cmd_run)

    swp = subs.add_parser("sweep", help="re-run the stream across hyperparameter values")
    _add_run_flags(swp)
    swp.add_argument("--param", required=True, choices=list(harness.SWEEP_PARAMETERS))
    swp.add_argument("--values", required=True, help="comma-separated values, e.g. 2,4,8,16")
    swp.add_argument("--out", required=True, help="output CSV path")
    swp.set_defaults(fn=_cmd_sweep)

    bench = subs.add_parser("bench", help="latency of retrieval+fusion across sequence lengths")
    _add_run_flags(bench, need_container=False)
    bench.add_argument("--t-values", required=True, help="comma-separated frame counts, e.g. 50,500")
    bench.add_argument("--samples", type=int, default=500, help="timed samples per T")
    bench.add_argument("--class-count", type=int, default=10)
    bench.add_argument("--channels", type=int, default=64)
    bench.add_argument("--joints", type=int, default=25)
    bench.add_argument("--cold", action="store_true", help="bench against an empty cache")
    bench.add_argument("--out", required=True, help="output CSV path")
    bench.set_defaults(fn=_cmd_bench)

    gen = subs.add_parser("gen-synth", help="generate a seeded synthetic SKC1 stream")
    gen.add_argument("--class-count", type=int, required=True)
    gen.add_argument("--channels", type=int, required=True)
    gen.add_argument("--frames", type=int, required=True)
    gen.add_argument("--joints", type=int, required=True)
    gen.add_argument("--sigma-proto", type=float, default=1.0)
    gen.add_argument("--sigma-noise", type=float, default=0.1)
    gen.add_argument("--sigma-logit", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--samples-per-class", type=int, default=10)
    gen.add_argument("--seen-classes", default="", help="comma-separated class indices flagged as seen")
    gen.add_argument("--out", required=True, help="output SKC1 path")
    gen.set_defaults(fn=_cmd_gen_synth)

    fp = subs.add_parser("fetch-priors", help="build a prior matrix from an LLM endpoint or fixtures")
    fp.add_argument("--classes", default=None, help="text file with one class name per line")
    fp.add_argument("--container", default=None, help="take class names from an SKC1 file")
    fp.add_argument("--fixture-dir", default=None, help="offline mode: one response file per class")
    fp.add_argument("--base-url", default="https://api.openai.com/v1")
    fp.add_argument("--model", default="gpt-4-turbo")
    fp.add_argument("--api-key-env", default="OPENAI_API_KEY")
    fp.add_argument("--timeout", type=float, default=30.0)
    fp.add_argument("--max-retries", type=int, default=3)
    fp.add_argument("--out", required=True, help="output prior-matrix JSON path")
    fp.set_defaults(fn=_cmd_fetch_priors)

    er = subs.add_parser("export-report", help="re-emit the report bundle from a saved report.json")
    er.add_argument("--report", required=True, help="report.json written by 'run'")
    er.add_argument("--out", required=True, help="report output directory")
    er.set_defaults(fn=_cmd_export_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
