"""Command-line entry points: gen, run, summary, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .acquisition import AcquisitionHeader, BasisModel, ProtocolTiming
from .config import load_config
from .errors import ConfigError, ContainerError, DynamoQcError
from .pipeline import build_summary, run_cohort, run_dataset
from .synthgen import CorruptionEvent, CorruptionKind, GroundTruth, synthesize_to_file

_GT_KEYS = {
    "pcr_rest",
    "pi_rest",
    "depletion_frac",
    "tau_ex_s",
    "tau_rec_s",
    "ph",
    "atp",
    "snr_target",
}


def _parse_gen_spec(path: Path):
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    unknown = set(doc) - {"dataset_id", "ground_truth", "corruptions", "header"}
    if unknown:
        raise ConfigError(f"{path}: unknown fields {sorted(unknown)}")
    gt_doc = doc.get("ground_truth", {})
    unknown = set(gt_doc) - _GT_KEYS
    if unknown:
        raise ConfigError(f"{path}: ground_truth: unknown fields {sorted(unknown)}")
    gt = GroundTruth(**gt_doc)
    corruptions = [
        CorruptionEvent(
            kind=CorruptionKind(c["kind"]),
            start=int(c["start"]),
            end=int(c["end"]),
            magnitude=float(c["magnitude"]),
        )
        for c in doc.get("corruptions", [])
    ]
    header = None
    if "header" in doc:
        h = dict(doc["header"])
        timing = ProtocolTiming(**h.pop("timing")) if "timing" in h else ProtocolTiming()
        header = AcquisitionHeader(timing=timing, **h)
    return gt, corruptions, header, doc.get("dataset_id")


def _cmd_gen(args: argparse.Namespace) -> int:
    gt, corruptions, header, dataset_id = _parse_gen_spec(Path(args.truth))
    path, truth_path = synthesize_to_file(
        Path(args.out),
        gt,
        basis=BasisModel(),
        header=header,
        corruptions=corruptions,
        rng_seed=args.seed,
        dataset_id=dataset_id,
    )
    print(f"wrote {path} and {truth_path}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    target = Path(args.input)
    out_dir = Path(args.out)
    if target.is_dir():
        summary = run_cohort(target, config, out_dir)
        print(json.dumps(summary.to_dict(), indent=1, sort_keys=True))
        if summary.total == 0:
            print("warning: no dataset files found", file=sys.stderr)
        return 0
    report = run_dataset(target, config, out_dir)
    qcs = report["qcs"]
    print(
        f"{report['dataset_id']}: QCS {qcs['score']:g} -> {qcs['verdict']} "
        f"({len(qcs['violations'])} violation(s))"
    )
    return 0


def _cmd_summary(args: argparse.Namespace) -> int:
    summary = build_summary(Path(args.reports))
    print(json.dumps(summary.to_dict(), indent=1, sort_keys=True))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.reports), ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynamoqc",
        description="Quality control for dynamic phosphorus MRS exercise protocols.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset with truth sidecar")
    p.add_argument("--truth", required=True, help="generation spec JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output dataset file")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("run", help="run the QC pipeline on a file or directory")
    p.add_argument("input", help="dataset file or directory")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.add_argument("--out", required=True, help="report store directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("summary", help="print the cohort summary for a report store")
    p.add_argument("reports", help="report store directory")
    p.set_defaults(func=_cmd_summary)

    p = sub.add_parser("serve", help="serve the review API over a report store")
    p.add_argument("--reports", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", default=None, help="static directory for the review console")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ContainerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DynamoQcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
