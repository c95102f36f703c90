// Pure view-model helpers.  Everything here is a mapping over server data:
// the console never refits, rescores, or recomputes what the pipeline
// already reported.

import type {
  DecisionBody,
  DecisionChoice,
  FrameDto,
  MonoExpFitDto,
  QueueItemDto,
  ReportDto,
  ReselectionDto,
} from "./types.js";

export interface QueueView {
  /** ManualInspect items awaiting a decision, worst score first. */
  actionable: QueueItemDto[];
  /** ManualInspect items already decided in this store. */
  decided: QueueItemDto[];
}

/** Split and order the manual-inspection queue; auto verdicts are never actionable. */
export function buildQueue(items: QueueItemDto[]): QueueView {
  const manual = items.filter((item) => item.verdict === "ManualInspect");
  const byScore = (a: QueueItemDto, b: QueueItemDto) =>
    a.score - b.score || a.dataset_id.localeCompare(b.dataset_id);
  return {
    actionable: manual.filter((item) => !item.decided).sort(byScore),
    decided: manual.filter((item) => item.decided).sort(byScore),
  };
}

export interface OffsetOption {
  offset: number;
  tauS: number | null;
  r2: number | null;
  recommended: boolean;
  available: boolean;
  error: string | null;
}

/** The four precomputed recovery fits for the offset toggle (no refitting). */
export function offsetOptions(
  resel: ReselectionDto | null,
  metabolite: "pcr" | "pi" = "pcr",
): OffsetOption[] {
  if (!resel) return [];
  return resel.fits[metabolite].map((fit, offset) => ({
    offset,
    tauS: fit ? fit.tau_s : null,
    r2: fit ? fit.r2 : null,
    recommended: offset === resel.recommended_offset && resel.qualified,
    available: fit !== null,
    error: fit ? null : resel.fit_errors?.[metabolite]?.[String(offset)] ?? "fit failed",
  }));
}

/** Client-side mirror of the server's decision rules. */
export function validateDecision(
  body: DecisionBody,
  report: ReportDto,
): string[] {
  const problems: string[] = [];
  if (report.qcs.verdict !== "ManualInspect") {
    problems.push("only ManualInspect datasets accept decisions");
  }
  if (!body.decided_by.trim()) {
    problems.push("operator id is required");
  }
  if (
    !Number.isInteger(body.recovery_start_offset) ||
    body.recovery_start_offset < 0 ||
    body.recovery_start_offset > 3
  ) {
    problems.push("recovery start offset must be 0..3");
  } else if (body.decision !== "RejectAll") {
    const fits = report.reselection?.fits.pcr ?? [];
    if (!fits[body.recovery_start_offset]) {
      problems.push(`offset ${body.recovery_start_offset} has no successful fit`);
    }
  }
  return problems;
}

/** The final category a decision choice maps to. */
export function categoryAfterDecision(choice: DecisionChoice): string {
  return choice;
}

export interface SeriesPoint {
  timeS: number;
  frame: number;
  value: number;
}

export interface ConcentrationSeries {
  pcr: SeriesPoint[];
  pi: SeriesPoint[];
  sum: SeriesPoint[];
  ph: SeriesPoint[];
  phaseBoundaries: { exerciseStartS: number; recoveryStartS: number };
}

/** Concentration and pH traces straight from the report's frame table. */
export function concentrationSeries(
  frames: FrameDto[],
  timing: ReportDto["header"]["timing"],
): ConcentrationSeries {
  const point = (f: FrameDto, value: number): SeriesPoint => ({
    timeS: f.frame_index * timing.tr_s,
    frame: f.frame_index,
    value,
  });
  return {
    pcr: frames.map((f) => point(f, f.concentrations.pcr)),
    pi: frames.map((f) => point(f, f.concentrations.pi)),
    sum: frames.map((f) => point(f, f.concentrations.pcr + f.concentrations.pi)),
    ph: frames.filter((f) => f.ph !== null).map((f) => point(f, f.ph as number)),
    phaseBoundaries: {
      exerciseStartS: timing.n_rest * timing.tr_s,
      recoveryStartS: (timing.n_rest + timing.n_exercise) * timing.tr_s,
    },
  };
}

export interface OutlierMarker {
  frameStart: number;
  frameEnd: number;
  labels: string[];
  penalized: boolean;
}

/** Outlier frame ranges for markers, penalized events first. */
export function outlierMarkers(report: ReportDto): OutlierMarker[] {
  const events = report.outliers?.events ?? [];
  return events
    .map((e) => ({
      frameStart: e.frame_start,
      frameEnd: e.frame_end,
      labels: e.labels,
      penalized: e.penalized,
    }))
    .sort((a, b) =>
      a.penalized === b.penalized
        ? a.frameStart - b.frameStart
        : a.penalized
          ? -1
          : 1,
    );
}

export interface ScoreRow {
  criterion: string;
  weight: number;
  detail: string;
}

/** QCS breakdown rows plus the total, verbatim from the server. */
export function scoreBreakdown(report: ReportDto): { rows: ScoreRow[]; total: number } {
  return {
    rows: report.qcs.violations.map((v) => ({
      criterion: v.criterion,
      weight: v.weight,
      detail: v.detail,
    })),
    total: report.qcs.score,
  };
}

/** Server-provided fit curve sampler for overlay rendering. */
export function fitCurvePoints(
  fit: MonoExpFitDto,
  phaseStartS: number,
  phaseDurationS: number,
  n = 120,
): SeriesPoint[] {
  const sign = fit.direction === "up" ? 1 : -1;
  const points: SeriesPoint[] = [];
  for (let i = 0; i <= n; i++) {
    const t = (phaseDurationS * i) / n;
    const value = fit.baseline + sign * fit.delta * (1 - Math.exp(-t / fit.tau_s));
    points.push({ timeS: phaseStartS + t, frame: -1, value });
  }
  return points;
}

export function formatTau(tauS: number | null): string {
  return tauS === null ? "n/a" : `${tauS.toFixed(1)} s`;
}

export function formatR2(r2: number | null): string {
  return r2 === null ? "n/a" : r2.toFixed(3);
}
