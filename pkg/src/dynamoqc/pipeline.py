"""Batch orchestration, report emission, and decision persistence.

The report store is plain files: one JSON report per dataset plus a single
append-only JSON-lines decision log.  Effective review state is a pure fold
over the log (latest entry per dataset wins; nothing is ever rewritten).
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from . import __version__ as PIPELINE_VERSION
from .acquisition import DynamicSeries, load_series
from .config import PipelineConfig
from .errors import (
    ConflictError,
    ContainerError,
    DomainError,
    DynamoQcError,
    NotFoundError,
    ValidationError,
)
from .kinetics import (
    KineticsResult,
    extract_kinetics,
    kinetics_to_dict,
    ph_from_shift,
)
from .qcs import (
    Criterion,
    Verdict,
    coalesce_outlier_events,
    compute_qcs,
    derivative_outliers,
    evaluate_criteria,
    reselect_recovery_start,
)
from .quantifier import (
    frame_quant_to_dict,
    indicators_to_dict,
    quantify_series,
    snr_fwhm,
)

REPORT_SUFFIX = ".qcreport.json"
DECISION_LOG = "decisions.jsonl"
GROUP_MANIFEST = "groups.json"

OUTLIER_LABELS = ("pcr", "pi", "pcr_plus_pi")

EXERCISE_CRITERIA = {
    Criterion.OUTLIER_DETECTED,
    Criterion.TAU_EX_GT_100,
    Criterion.R2_EX_LT_70,
    Criterion.CV_REC_GT_10,
}
RECOVERY_CRITERIA = {Criterion.DEPLETION_LT_20, Criterion.R2_REC_LT_70}


class DecisionChoice(str, Enum):
    ACCEPT_ALL = "AcceptAll"
    ACCEPT_RECOVERY_ONLY = "AcceptRecoveryOnly"
    REJECT_ALL = "RejectAll"


class Category(str, Enum):
    ACCEPT_ALL = "AcceptAll"
    ACCEPT_RECOVERY_ONLY = "AcceptRecoveryOnly"
    REJECT_ALL = "RejectAll"
    PENDING_REVIEW = "PendingReview"


@dataclass(frozen=True)
class ReviewDecision:
    """One operator decision; only ManualInspect datasets accept them."""

    dataset_id: str
    decided_by: str
    decision: DecisionChoice
    recovery_start_offset: int
    timestamp: str = ""
    note: str = ""

    def __post_init__(self) -> None:
        if not self.dataset_id:
            raise ValidationError("dataset_id must be non-empty")
        if not self.decided_by:
            raise ValidationError("decided_by must be non-empty")
        if not 0 <= self.recovery_start_offset <= 3:
            raise ValidationError("recovery_start_offset must be in 0..3")
        if not self.timestamp:
            object.__setattr__(self, "timestamp", _utc_now())

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "decided_by": self.decided_by,
            "decision": self.decision.value,
            "recovery_start_offset": self.recovery_start_offset,
            "timestamp": self.timestamp,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReviewDecision":
        return cls(
            dataset_id=doc["dataset_id"],
            decided_by=doc["decided_by"],
            decision=DecisionChoice(doc["decision"]),
            recovery_start_offset=int(doc["recovery_start_offset"]),
            timestamp=doc.get("timestamp", ""),
            note=doc.get("note", ""),
        )


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


# --- report construction --------------------------------------------------


def analyze_series(series: DynamicSeries, config: PipelineConfig) -> dict:
    """Run the full per-dataset analysis and assemble the report body."""
    errors: list[str] = []
    header = series.header
    timing = header.timing

    quants = quantify_series(
        series,
        config.basis,
        lb_hz=config.apodization_lb_hz,
        options=config.fit,
        atp_reference_mmol=config.atp_reference_mmol,
    )

    kin = KineticsResult()
    try:
        kin = extract_kinetics(
            quants,
            timing,
            pcr_post_window=config.pcr_post_window,
            ph_post_window=config.ph_post_window,
        )
    except DynamoQcError as exc:
        errors.append(f"kinetics: {exc}")

    pcr = [q.concentrations["pcr"] for q in quants]
    pi = [q.concentrations["pi"] for q in quants]
    outliers_by_label: dict[str, list[tuple[int, int]]] = {}
    series_by_label = {
        "pcr": pcr,
        "pi": pi,
        "pcr_plus_pi": [a + b for a, b in zip(pcr, pi)],
    }
    for label in OUTLIER_LABELS:
        try:
            outliers_by_label[label] = derivative_outliers(
                series_by_label[label], label
            )
        except ValueError as exc:
            outliers_by_label[label] = []
            errors.append(f"outliers[{label}]: {exc}")

    resel = None
    try:
        resel = reselect_recovery_start(
            pcr, pi, timing, pcr_post_window=config.pcr_post_window
        )
    except (ValueError, DynamoQcError) as exc:
        errors.append(f"reselection: {exc}")

    violations = evaluate_criteria(kin, outliers_by_label, resel, config.weights)
    outcome = compute_qcs(violations, config.weights, reselection=resel)

    indicators = {"rest": None, "post_exercise": None}
    try:
        from .quantifier import preprocess_frame

        rest_idx = timing.n_rest - 1
        post_idx = timing.recovery_start_index
        for key, idx in (("rest", rest_idx), ("post_exercise", post_idx)):
            fid, _ = preprocess_frame(
                series.frames[idx].samples, header, config.apodization_lb_hz
            )
            indicators[key] = snr_fwhm(
                fid, quants[idx], config.basis, header, context=key
            )
    except DynamoQcError as exc:
        errors.append(f"indicators: {exc}")

    reportable_recovery = not any(
        v.criterion in RECOVERY_CRITERIA for v in violations
    )
    reportable_exercise = reportable_recovery and not any(
        v.criterion in EXERCISE_CRITERIA for v in violations
    )

    frame_rows = []
    for q in quants:
        row = frame_quant_to_dict(q)
        try:
            row["ph"] = ph_from_shift(q.delta_pi_pcr_ppm)
        except DomainError:
            row["ph"] = None
        frame_rows.append(row)

    return {
        "pipeline_version": PIPELINE_VERSION,
        "config_fingerprint": config.fingerprint(),
        "dataset_id": series.dataset_id,
        "header": {
            "larmor_hz": header.larmor_hz,
            "spectral_width_hz": header.spectral_width_hz,
            "n_points": header.n_points,
            "reference_ppm": header.reference_ppm,
            "timing": {
                "tr_s": timing.tr_s,
                "n_rest": timing.n_rest,
                "n_exercise": timing.n_exercise,
                "n_recovery": timing.n_recovery,
            },
        },
        "frames": frame_rows,
        "kinetics": kinetics_to_dict(kin),
        "outliers": {
            **{label: [[k, s] for k, s in outliers_by_label[label]] for label in OUTLIER_LABELS},
            "events": [
                {
                    "frame_start": e.frame_start,
                    "frame_end": e.frame_end,
                    "labels": list(e.labels),
                    "penalized": "pcr_plus_pi" in e.labels,
                }
                for e in coalesce_outlier_events(outliers_by_label)
            ],
        },
        "reselection": resel.to_dict() if resel is not None else None,
        "qcs": {
            **outcome.to_dict(),
            "reportable": {
                "exercise": reportable_exercise,
                "recovery": reportable_recovery,
            },
        },
        "indicators": {
            key: indicators_to_dict(ind) for key, ind in indicators.items()
        },
        "errors": errors,
    }


def _category_for(verdict: str, decision: ReviewDecision | None) -> str:
    if verdict == Verdict.AUTO_ACCEPT.value:
        return Category.ACCEPT_ALL.value
    if verdict == Verdict.AUTO_REJECT.value:
        return Category.REJECT_ALL.value
    if decision is None:
        return Category.PENDING_REVIEW.value
    return decision.decision.value


def apply_review_state(report: dict, decision: ReviewDecision | None) -> dict:
    """Attach the review section derived from the decision fold."""
    verdict = report["qcs"]["verdict"]
    category = _category_for(verdict, decision)
    review: dict = {"category": category, "decision": None, "effective": None}
    if decision is not None:
        review["decision"] = decision.to_dict()
        resel = report.get("reselection")
        if decision.decision is not DecisionChoice.REJECT_ALL and resel:
            offset = decision.recovery_start_offset
            review["effective"] = {
                "recovery_start_offset": offset,
                "pcr_rec": resel["fits"]["pcr"][offset],
                "pi_rec": resel["fits"]["pi"][offset],
                "exercise_included": decision.decision is DecisionChoice.ACCEPT_ALL,
            }
    report["review"] = review
    return report


# --- report store ---------------------------------------------------------


def report_path(out_dir: Path, dataset_id: str) -> Path:
    return Path(out_dir) / f"{dataset_id}{REPORT_SUFFIX}"


def _json_safe(value):
    """Replace non-finite floats with null so reports stay strict JSON."""
    if isinstance(value, float):
        return value if value == value and abs(value) != float("inf") else None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_report(report: dict, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = report_path(out_dir, report["dataset_id"])
    body = _json_safe(dict(report))
    body["generated_at"] = _utc_now()
    # write-then-rename so concurrent readers never see a partial report
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(body, sort_keys=True, indent=1, allow_nan=False))
    tmp.replace(path)
    return path


def read_report(out_dir: Path, dataset_id: str) -> dict:
    path = report_path(out_dir, dataset_id)
    if not path.exists():
        raise NotFoundError(f"no report for dataset {dataset_id!r}")
    return json.loads(path.read_text())


def list_report_ids(out_dir: Path) -> list[str]:
    out_dir = Path(out_dir)
    return sorted(
        p.name[: -len(REPORT_SUFFIX)]
        for p in out_dir.glob(f"*{REPORT_SUFFIX}")
    )


def load_decision_log(out_dir: Path) -> list[ReviewDecision]:
    path = Path(out_dir) / DECISION_LOG
    if not path.exists():
        return []
    decisions = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if line:
            decisions.append(ReviewDecision.from_dict(json.loads(line)))
    return decisions


def fold_decisions(log: list[ReviewDecision]) -> dict[str, ReviewDecision]:
    """Effective review state: the latest log entry per dataset wins."""
    state: dict[str, ReviewDecision] = {}
    for decision in log:
        state[decision.dataset_id] = decision
    return state


def append_decision(out_dir: Path, decision: ReviewDecision) -> None:
    path = Path(out_dir) / DECISION_LOG
    with path.open("a") as fh:
        fh.write(json.dumps(decision.to_dict()) + "\n")


# --- public operations ------------------------------------------------------


def run_dataset(
    path: str | Path, config: PipelineConfig, out_dir: str | Path
) -> dict:
    """Full pipeline for one dataset file; writes the report and returns it.

    Deterministic and idempotent for identical input and config (the
    generated_at timestamp aside).
    """
    series = load_series(path)
    if not series.dataset_id:
        series = DynamicSeries(
            header=series.header, frames=series.frames, dataset_id=Path(path).stem
        )
    report = analyze_series(series, config)
    decision = fold_decisions(load_decision_log(Path(out_dir))).get(
        report["dataset_id"]
    )
    report = apply_review_state(report, decision)
    write_report(report, Path(out_dir))
    return report


@dataclass
class CohortSummary:
    total: int
    categories: dict[str, int]
    verdicts: dict[str, int]
    percentages: dict[str, float]
    by_group: dict[str, dict[str, int]] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "categories": self.categories,
            "verdicts": self.verdicts,
            "percentages": self.percentages,
            "by_group": self.by_group,
            "failures": self.failures,
        }


def load_group_manifest(data_dir: Path) -> dict[str, str]:
    path = Path(data_dir) / GROUP_MANIFEST
    if not path.exists():
        return {}
    doc = json.loads(path.read_text())
    if not isinstance(doc, dict):
        raise ContainerError(f"{path}: group manifest must map dataset_id to label")
    return {str(k): str(v) for k, v in doc.items()}


def build_summary(out_dir: str | Path, groups: dict[str, str] | None = None) -> CohortSummary:
    """Aggregate the report store into per-category counts and percentages,
    merging any recorded review decisions."""
    out_dir = Path(out_dir)
    groups = groups or {}
    state = fold_decisions(load_decision_log(out_dir))
    categories = {c.value: 0 for c in Category}
    verdicts = {v.value: 0 for v in Verdict}
    by_group: dict[str, dict[str, int]] = {}
    ids = list_report_ids(out_dir)
    for dataset_id in ids:
        report = read_report(out_dir, dataset_id)
        verdict = report["qcs"]["verdict"]
        category = _category_for(verdict, state.get(dataset_id))
        verdicts[verdict] += 1
        categories[category] += 1
        group = groups.get(dataset_id) or report.get("group")
        if group:
            by_group.setdefault(group, {c.value: 0 for c in Category})[category] += 1
    total = len(ids)
    percentages = {
        name: (100.0 * count / total if total else 0.0)
        for name, count in categories.items()
    }
    return CohortSummary(
        total=total,
        categories=categories,
        verdicts=verdicts,
        percentages=percentages,
        by_group=by_group,
    )


def _run_one(args: tuple[str, PipelineConfig, str]) -> tuple[str, str | None]:
    path, config, out_dir = args
    try:
        run_dataset(path, config, out_dir)
        return path, None
    except DynamoQcError as exc:
        return path, str(exc)


def dataset_files(data_dir: Path) -> list[Path]:
    data_dir = Path(data_dir)
    return sorted(
        p
        for p in data_dir.glob("*.json")
        if not p.name.endswith(".truth.json") and p.name != GROUP_MANIFEST
    )


def run_cohort(
    data_dir: str | Path, config: PipelineConfig, out_dir: str | Path
) -> CohortSummary:
    """Run every dataset in a directory; failures are isolated per dataset
    and the summary is produced regardless."""
    data_dir = Path(data_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = dataset_files(data_dir)
    groups = load_group_manifest(data_dir)

    failures: dict[str, str] = {}
    jobs = [(str(p), config, str(out_dir)) for p in files]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    for path, error in results:
        if error is not None:
            failures[Path(path).name] = error

    # Stamp group labels into the stored reports so the service can filter.
    for dataset_id in list_report_ids(out_dir):
        if dataset_id in groups:
            report = read_report(out_dir, dataset_id)
            if report.get("group") != groups[dataset_id]:
                report["group"] = groups[dataset_id]
                report.pop("generated_at", None)
                write_report(report, out_dir)

    summary = build_summary(out_dir, groups)
    summary.failures = failures
    (out_dir / "summary.json").write_text(
        json.dumps(summary.to_dict(), sort_keys=True, indent=1)
    )
    return summary


def record_decision(out_dir: str | Path, decision: ReviewDecision) -> dict:
    """Validate, append to the decision log, and regenerate the report.

    Decisions are only legal on ManualInspect datasets and must reference
    a successful reselection fit for the chosen offset.
    """
    out_dir = Path(out_dir)
    report = read_report(out_dir, decision.dataset_id)
    verdict = report["qcs"]["verdict"]
    if verdict != Verdict.MANUAL_INSPECT.value:
        raise ConflictError(
            f"dataset {decision.dataset_id!r} has verdict {verdict}; "
            "auto verdicts are immutable"
        )
    resel = report.get("reselection")
    if decision.decision is not DecisionChoice.REJECT_ALL:
        if not resel:
            raise ValidationError("dataset has no reselection analysis")
        fit = resel["fits"]["pcr"][decision.recovery_start_offset]
        if fit is None:
            raise ValidationError(
                f"offset {decision.recovery_start_offset} has no successful "
                "recovery fit"
            )
    append_decision(out_dir, decision)
    report = apply_review_state(report, decision)
    report.pop("generated_at", None)
    write_report(report, out_dir)
    return report
