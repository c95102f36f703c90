"""Quality criteria, weighted scoring, outlier detection, and reselection.

A dataset's score is the sum of the (negative) weights of its criterion
violations.  Score 0 auto-accepts, scores at or below the exclusion
threshold (-3) auto-reject, anything between goes to manual inspection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .acquisition import Phase, ProtocolTiming
from .errors import FitError, ValidationError
from .kinetics import KineticsResult, MonoExpFit, fit_monoexp, phase_sample_times

# Derivative spreads below this fraction of the series scale are numerical
# dust, not physiology; they are treated like the zero-variance case.
REL_STD_FLOOR = 1e-6

N_RESELECTION_OFFSETS = 4


class Criterion(str, Enum):
    DEPLETION_LT_20 = "DepletionLt20"
    R2_REC_LT_70 = "R2RecLt70"
    OUTLIER_DETECTED = "OutlierDetected"
    TAU_EX_GT_100 = "TauExGt100"
    R2_EX_LT_70 = "R2ExLt70"
    CV_REC_GT_10 = "CvRecGt10"


class Verdict(str, Enum):
    AUTO_ACCEPT = "AutoAccept"
    MANUAL_INSPECT = "ManualInspect"
    AUTO_REJECT = "AutoReject"


@dataclass(frozen=True)
class WeightTable:
    """Criterion weights; recovery-critical criteria carry the -3 anchor."""

    depletion: float = -3.0
    r2_rec: float = -3.0
    outlier_per_event: float = -0.75
    tau_ex: float = -0.75
    r2_ex: float = -1.0
    cv_rec: float = -0.5
    exclusion_threshold: float = -3.0

    def __post_init__(self) -> None:
        if self.depletion != -3.0 or self.r2_rec != -3.0:
            raise ValidationError("depletion and r2_rec weights must be -3 exactly")
        for name in ("outlier_per_event", "tau_ex", "r2_ex", "cv_rec"):
            w = getattr(self, name)
            if not 0.5 <= -w <= 1.0:
                raise ValidationError(
                    f"{name} weight magnitude must lie in [0.5, 1.0], got {w}"
                )
        if self.exclusion_threshold >= 0:
            raise ValidationError("exclusion_threshold must be negative")

    def weight_of(self, criterion: Criterion) -> float:
        return {
            Criterion.DEPLETION_LT_20: self.depletion,
            Criterion.R2_REC_LT_70: self.r2_rec,
            Criterion.OUTLIER_DETECTED: self.outlier_per_event,
            Criterion.TAU_EX_GT_100: self.tau_ex,
            Criterion.R2_EX_LT_70: self.r2_ex,
            Criterion.CV_REC_GT_10: self.cv_rec,
        }[criterion]


@dataclass(frozen=True)
class CriterionViolation:
    criterion: Criterion
    weight: float
    detail: str
    evidence: tuple = ()

    def __post_init__(self) -> None:
        if self.weight >= 0:
            raise ValidationError("violation weights must be negative")

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "weight": self.weight,
            "detail": self.detail,
            "evidence": list(self.evidence),
        }


@dataclass(frozen=True)
class OutlierEvent:
    """A coalesced run of outlier derivative indices across labels."""

    frame_start: int
    frame_end: int
    labels: tuple[str, ...]
    signs: tuple[int, ...]


@dataclass
class ReselectionAnalysis:
    """Recovery fits at start offsets 0..3 with the tau dispersion (CV)."""

    fits: dict[str, list[MonoExpFit | None]]
    cv: dict[str, float | None]
    cv_complete: dict[str, bool]
    recommended_offset: int
    qualified: bool
    fit_errors: dict[str, dict[int, str]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        from .kinetics import monoexp_to_dict

        return {
            "fits": {
                met: [monoexp_to_dict(f) for f in fits]
                for met, fits in self.fits.items()
            },
            "cv": dict(self.cv),
            "cv_complete": dict(self.cv_complete),
            "recommended_offset": self.recommended_offset,
            "qualified": self.qualified,
            "fit_errors": {
                met: {str(k): v for k, v in errs.items()}
                for met, errs in self.fit_errors.items()
            },
        }


@dataclass
class QcsOutcome:
    score: float
    violations: list[CriterionViolation]
    verdict: Verdict
    reselection: ReselectionAnalysis | None = None

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "verdict": self.verdict.value,
            "violations": [v.to_dict() for v in self.violations],
        }


def derivative_outliers(
    values: Sequence[float], label: str = ""
) -> list[tuple[int, int]]:
    """Indices k where the first difference v[k+1]-v[k] deviates from its
    mean by more than three standard deviations, with the deviation sign.

    A spread at or below the numerical floor counts as zero variance and
    yields no outliers.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 10:
        raise ValueError("need at least 10 frames for derivative outliers")
    d = np.diff(v)
    mean = d.mean()
    std = d.std()
    scale = float(np.max(np.abs(v))) if v.size else 0.0
    if std <= REL_STD_FLOOR * max(scale, 1e-30):
        return []
    dev = d - mean
    hits = np.abs(dev) > 3.0 * std
    return [(int(k), 1 if dev[k] > 0 else -1) for k in np.flatnonzero(hits)]


def coalesce_outlier_events(
    outliers_by_label: dict[str, list[tuple[int, int]]],
) -> list[OutlierEvent]:
    """Merge consecutive outlier indices into runs, then merge runs whose
    frame ranges overlap across labels: one physical event, one penalty.

    Derivative index k involves frames k and k+1, so a run [a..b] covers
    frames [a, b+1].
    """
    runs: list[tuple[int, int, str, tuple[int, ...]]] = []
    for label, hits in outliers_by_label.items():
        if not hits:
            continue
        hits = sorted(hits)
        start, prev, signs = hits[0][0], hits[0][0], [hits[0][1]]
        for k, sign in hits[1:]:
            if k == prev + 1:
                prev = k
                signs.append(sign)
            else:
                runs.append((start, prev + 1, label, tuple(signs)))
                start, prev, signs = k, k, [sign]
        runs.append((start, prev + 1, label, tuple(signs)))

    runs.sort(key=lambda r: (r[0], r[1]))
    events: list[OutlierEvent] = []
    for f0, f1, label, signs in runs:
        merged = False
        for i, ev in enumerate(events):
            if f0 <= ev.frame_end and f1 >= ev.frame_start:
                events[i] = OutlierEvent(
                    frame_start=min(ev.frame_start, f0),
                    frame_end=max(ev.frame_end, f1),
                    labels=tuple(sorted(set(ev.labels) | {label})),
                    signs=ev.signs + signs,
                )
                merged = True
                break
        if not merged:
            events.append(
                OutlierEvent(
                    frame_start=f0, frame_end=f1, labels=(label,), signs=signs
                )
            )
    events.sort(key=lambda e: (e.frame_start, e.frame_end))
    return events


def reselect_recovery_start(
    pcr_values: Sequence[float],
    pi_values: Sequence[float],
    timing: ProtocolTiming,
    pcr_post_window: int = 3,
) -> ReselectionAnalysis:
    """Fit the recovery phase at start offsets 0..3 for PCr and Pi.

    Offsets exclude the first recovery frames cumulatively; the time axis
    is not re-referenced, so every fit extrapolates back to the same
    end-exercise baseline.  The CV is the population sigma/mu over the
    successful taus per metabolite, flagged incomplete when fewer than
    four fits succeeded.  The recommended offset is the qualifying offset
    (PCr r2 >= 0.70) with maximal PCr r2; offsets within 1e-4 of the best
    r2 count as tied and the smallest wins, so clean data recommends 0.
    With no qualifying offset it falls back to 0 with qualified=False.
    """
    if timing.n_recovery < 10:
        raise ValueError("reselection requires at least 10 recovery frames")
    pcr = np.asarray(pcr_values, dtype=float)
    pi = np.asarray(pi_values, dtype=float)
    exercise = timing.frame_indices(Phase.EXERCISE)
    recovery = timing.frame_indices(Phase.RECOVERY)
    w = min(pcr_post_window, len(exercise))
    baselines = {
        "pcr": float(pcr[exercise][-w:].mean()),
        "pi": float(pi[exercise][-w:].mean()),
    }
    series = {"pcr": pcr[recovery], "pi": pi[recovery]}
    directions = {"pcr": "up", "pi": "down"}
    times = phase_sample_times(timing, Phase.RECOVERY)

    fits: dict[str, list[MonoExpFit | None]] = {}
    errors: dict[str, dict[int, str]] = {}
    for met in ("pcr", "pi"):
        fits[met] = []
        errors[met] = {}
        for offset in range(N_RESELECTION_OFFSETS):
            try:
                fits[met].append(
                    fit_monoexp(
                        series[met],
                        times,
                        directions[met],
                        baselines[met],
                        start_offset=offset,
                        phase=Phase.RECOVERY,
                    )
                )
            except FitError as exc:
                fits[met].append(None)
                errors[met][offset] = str(exc)

    cv: dict[str, float | None] = {}
    cv_complete: dict[str, bool] = {}
    for met in ("pcr", "pi"):
        taus = [f.tau_s for f in fits[met] if f is not None]
        cv_complete[met] = len(taus) == N_RESELECTION_OFFSETS
        if not taus:
            cv[met] = None
        else:
            mu = float(np.mean(taus))
            cv[met] = float(np.std(taus) / mu) if mu > 0 else None

    qualifying = [
        (offset, fit.r2)
        for offset, fit in enumerate(fits["pcr"])
        if fit is not None and fit.r2 >= 0.70
    ]
    if qualifying:
        best_r2 = max(r2 for _, r2 in qualifying)
        recommended = min(
            offset for offset, r2 in qualifying if r2 >= best_r2 - 1e-4
        )
        qualified = True
    else:
        recommended, qualified = 0, False

    return ReselectionAnalysis(
        fits=fits,
        cv=cv,
        cv_complete=cv_complete,
        recommended_offset=recommended,
        qualified=qualified,
        fit_errors=errors,
    )


def _r2_violation(
    fits: dict[str, MonoExpFit | None],
    criterion: Criterion,
    weights: WeightTable,
) -> CriterionViolation | None:
    missing = [name for name, f in fits.items() if f is None]
    low = {name: f.r2 for name, f in fits.items() if f is not None and f.r2 < 0.70}
    if not missing and not low:
        return None
    if missing and not low:
        detail = f"fit unavailable ({', '.join(missing)})"
    else:
        worst = min(low.values())
        detail = f"r2 {worst:.3f} < 0.70 ({', '.join(sorted(low))})"
        if missing:
            detail += f"; fit unavailable ({', '.join(missing)})"
    return CriterionViolation(
        criterion=criterion,
        weight=weights.weight_of(criterion),
        detail=detail,
        evidence=tuple(sorted(low.values())),
    )


def evaluate_criteria(
    kin: KineticsResult,
    outliers_by_label: dict[str, list[tuple[int, int]]],
    resel: ReselectionAnalysis | None,
    weights: WeightTable,
) -> list[CriterionViolation]:
    """Evaluate all six criteria; one violation per criterion except
    OutlierDetected, which is counted per coalesced event.

    Only events involving the conserved sum (the "pcr_plus_pi" label) are
    penalized: the sum is flat for valid data, so its derivative isolates
    acquisition artefacts, whereas the PCr and Pi derivatives legitimately
    spike at the phase transitions and serve as corroborating indicators.
    """
    violations: list[CriterionViolation] = []

    if kin.depletion_pct is None:
        violations.append(
            CriterionViolation(
                Criterion.DEPLETION_LT_20,
                weights.depletion,
                "fit unavailable",
            )
        )
    elif kin.depletion_pct < 20.0:
        violations.append(
            CriterionViolation(
                Criterion.DEPLETION_LT_20,
                weights.depletion,
                f"PCr depletion {kin.depletion_pct:.1f}% < 20%",
                evidence=(kin.depletion_pct,),
            )
        )

    v = _r2_violation(
        {"pcr_rec": kin.pcr_rec, "pi_rec": kin.pi_rec},
        Criterion.R2_REC_LT_70,
        weights,
    )
    if v:
        violations.append(v)

    for event in coalesce_outlier_events(outliers_by_label):
        if "pcr_plus_pi" not in event.labels:
            continue
        violations.append(
            CriterionViolation(
                Criterion.OUTLIER_DETECTED,
                weights.outlier_per_event,
                f"derivative outlier over frames {event.frame_start}-"
                f"{event.frame_end} ({', '.join(event.labels)})",
                evidence=(event.frame_start, event.frame_end),
            )
        )

    ex_fits = {"pcr_ex": kin.pcr_ex, "pi_ex": kin.pi_ex}
    missing_ex = [name for name, f in ex_fits.items() if f is None]
    long_tau = {
        name: f.tau_s for name, f in ex_fits.items() if f is not None and f.tau_s > 100.0
    }
    if missing_ex or long_tau:
        if long_tau:
            worst = max(long_tau.values())
            detail = f"exercise tau {worst:.0f}s > 100s ({', '.join(sorted(long_tau))})"
            if missing_ex:
                detail += f"; fit unavailable ({', '.join(missing_ex)})"
        else:
            detail = f"fit unavailable ({', '.join(missing_ex)})"
        violations.append(
            CriterionViolation(
                Criterion.TAU_EX_GT_100,
                weights.tau_ex,
                detail,
                evidence=tuple(sorted(long_tau.values())),
            )
        )

    v = _r2_violation(ex_fits, Criterion.R2_EX_LT_70, weights)
    if v:
        violations.append(v)

    if resel is None:
        violations.append(
            CriterionViolation(
                Criterion.CV_REC_GT_10, weights.cv_rec, "fit unavailable"
            )
        )
    else:
        high = {
            met: c for met, c in resel.cv.items() if c is not None and c > 0.10
        }
        no_cv = [met for met, c in resel.cv.items() if c is None]
        if high or no_cv:
            if high:
                worst = max(high.values())
                detail = f"recovery tau CV {worst:.3f} > 0.10 ({', '.join(sorted(high))})"
                if no_cv:
                    detail += f"; fit unavailable ({', '.join(no_cv)})"
            else:
                detail = f"fit unavailable ({', '.join(no_cv)})"
            violations.append(
                CriterionViolation(
                    Criterion.CV_REC_GT_10,
                    weights.cv_rec,
                    detail,
                    evidence=tuple(sorted(high.values())),
                )
            )
    return violations


def compute_qcs(
    violations: Sequence[CriterionViolation],
    weights: WeightTable,
    reselection: ReselectionAnalysis | None = None,
) -> QcsOutcome:
    """Sum the violation weights and map the score onto a triage verdict."""
    score = float(sum(v.weight for v in violations))
    if math.isclose(score, 0.0, abs_tol=1e-12):
        verdict = Verdict.AUTO_ACCEPT
        score = 0.0
    elif score <= weights.exclusion_threshold + 1e-9:
        verdict = Verdict.AUTO_REJECT
    else:
        verdict = Verdict.MANUAL_INSPECT
    return QcsOutcome(
        score=score,
        violations=list(violations),
        verdict=verdict,
        reselection=reselection,
    )
