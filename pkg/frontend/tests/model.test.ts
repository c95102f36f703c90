// View-model unit tests over fixture DTOs; no server required.

import { describe, expect, it } from "vitest";

import {
  buildQueue,
  categoryAfterDecision,
  concentrationSeries,
  fitCurvePoints,
  offsetOptions,
  outlierMarkers,
  scoreBreakdown,
  validateDecision,
} from "../src/model.js";
import type {
  FrameDto,
  MonoExpFitDto,
  QueueItemDto,
  ReportDto,
  ReselectionDto,
} from "../src/types.js";

function queueItem(overrides: Partial<QueueItemDto>): QueueItemDto {
  return {
    dataset_id: "ds",
    score: -1,
    verdict: "ManualInspect",
    category: "PendingReview",
    violations: [],
    group: null,
    decided: false,
    ...overrides,
  };
}

function fit(tau: number, r2 = 0.99, offset = 0): MonoExpFitDto {
  return {
    baseline: 20,
    delta: 13,
    tau_s: tau,
    direction: "up",
    r2,
    phase: "recovery",
    start_offset: offset,
    tau_at_cap: false,
  };
}

function reselection(): ReselectionDto {
  return {
    fits: {
      pcr: [fit(22.3, 0.81, 0), fit(20.1, 0.9999, 1), fit(20.0, 0.9999, 2), null],
      pi: [fit(21.0, 0.8, 0), fit(20.2, 0.999, 1), fit(20.1, 0.999, 2), null],
    },
    cv: { pcr: 0.05, pi: 0.04 },
    cv_complete: { pcr: false, pi: false },
    recommended_offset: 1,
    qualified: true,
    fit_errors: { pcr: { "3": "degenerate data: zero variance" }, pi: {} },
  };
}

function report(overrides?: Partial<ReportDto>): ReportDto {
  return {
    dataset_id: "dropout01",
    header: { timing: { tr_s: 4, n_rest: 10, n_exercise: 30, n_recovery: 90 } },
    qcs: {
      score: -0.75,
      verdict: "ManualInspect",
      violations: [
        {
          criterion: "OutlierDetected",
          weight: -0.75,
          detail: "derivative outlier over frames 39-41 (pcr_plus_pi)",
        },
      ],
      reportable: { exercise: false, recovery: true },
    },
    kinetics: {
      pcr_rest: 33,
      pcr_post: 20,
      depletion_pct: 39.2,
      ph_rest: 7.0,
      ph_post: 7.0,
      pcr_ex: fit(30),
      pi_ex: fit(30),
      pcr_rec: fit(22.3, 0.81),
      pi_rec: fit(21),
      errors: {},
    },
    reselection: reselection(),
    outliers: {
      pcr: [[39, -1]],
      pi: [[39, 1]],
      pcr_plus_pi: [
        [39, -1],
        [40, 1],
      ],
      events: [
        { frame_start: 39, frame_end: 41, labels: ["pcr", "pcr_plus_pi"], penalized: true },
        { frame_start: 9, frame_end: 12, labels: ["pi"], penalized: false },
      ],
    },
    review: { category: "PendingReview", decision: null, effective: null },
    ...overrides,
  };
}

describe("buildQueue", () => {
  it("keeps only ManualInspect items actionable", () => {
    const items = [
      queueItem({ dataset_id: "a", verdict: "AutoAccept", category: "AcceptAll" }),
      queueItem({ dataset_id: "b", verdict: "AutoReject", category: "RejectAll" }),
      queueItem({ dataset_id: "c", score: -2.25 }),
      queueItem({ dataset_id: "d", score: -0.75 }),
    ];
    const queue = buildQueue(items);
    expect(queue.actionable.map((i) => i.dataset_id)).toEqual(["c", "d"]);
    expect(queue.decided).toHaveLength(0);
  });

  it("sorts by score ascending", () => {
    const queue = buildQueue([
      queueItem({ dataset_id: "x", score: -0.5 }),
      queueItem({ dataset_id: "y", score: -2.5 }),
    ]);
    expect(queue.actionable[0].dataset_id).toBe("y");
  });

  it("moves decided items out of the actionable list", () => {
    const queue = buildQueue([
      queueItem({ dataset_id: "done", decided: true, category: "AcceptAll" }),
      queueItem({ dataset_id: "todo" }),
    ]);
    expect(queue.actionable.map((i) => i.dataset_id)).toEqual(["todo"]);
    expect(queue.decided.map((i) => i.dataset_id)).toEqual(["done"]);
  });
});

describe("offsetOptions", () => {
  it("exposes the four precomputed fits without refitting", () => {
    const options = offsetOptions(reselection());
    expect(options).toHaveLength(4);
    expect(options.map((o) => o.tauS)).toEqual([22.3, 20.1, 20.0, null]);
    expect(options[1].recommended).toBe(true);
    expect(options[0].recommended).toBe(false);
    expect(options[3].available).toBe(false);
    expect(options[3].error).toContain("zero variance");
  });

  it("handles a missing reselection", () => {
    expect(offsetOptions(null)).toEqual([]);
  });
});

describe("validateDecision", () => {
  const base = {
    decided_by: "op1",
    decision: "AcceptRecoveryOnly" as const,
    recovery_start_offset: 1,
    note: "",
  };

  it("accepts a valid body", () => {
    expect(validateDecision(base, report())).toEqual([]);
  });

  it("requires an operator id", () => {
    const problems = validateDecision({ ...base, decided_by: " " }, report());
    expect(problems.some((p) => p.includes("operator"))).toBe(true);
  });

  it("rejects offsets without a successful fit", () => {
    const problems = validateDecision(
      { ...base, recovery_start_offset: 3 },
      report(),
    );
    expect(problems.some((p) => p.includes("offset 3"))).toBe(true);
  });

  it("allows any offset for RejectAll", () => {
    expect(
      validateDecision(
        { ...base, decision: "RejectAll", recovery_start_offset: 3 },
        report(),
      ),
    ).toEqual([]);
  });

  it("refuses decisions on auto verdicts", () => {
    const auto = report();
    auto.qcs.verdict = "AutoAccept";
    const problems = validateDecision(base, auto);
    expect(problems.some((p) => p.includes("ManualInspect"))).toBe(true);
  });

  it("maps decision choices onto final categories verbatim", () => {
    expect(categoryAfterDecision("AcceptAll")).toBe("AcceptAll");
    expect(categoryAfterDecision("RejectAll")).toBe("RejectAll");
  });
});

describe("traces", () => {
  const frames: FrameDto[] = [0, 1, 2].map((i) => ({
    frame_index: i,
    concentrations: { pcr: 33 - i, pi: 4 + i, atp: 8.2 },
    delta_pi_pcr_ppm: 4.82,
    ph: i === 1 ? null : 7.0,
    zero_order_phase_rad: 0,
    residual_norm: 0,
    converged: true,
  }));
  const timing = { tr_s: 4, n_rest: 10, n_exercise: 30, n_recovery: 90 };

  it("maps frames onto time-indexed series", () => {
    const series = concentrationSeries(frames, timing);
    expect(series.pcr[2]).toEqual({ timeS: 8, frame: 2, value: 31 });
    expect(series.sum.every((p) => p.value === 37)).toBe(true);
    expect(series.ph).toHaveLength(2); // null pH frames dropped
    expect(series.phaseBoundaries).toEqual({
      exerciseStartS: 40,
      recoveryStartS: 160,
    });
  });

  it("orders outlier markers penalized-first", () => {
    const markers = outlierMarkers(report());
    expect(markers[0].penalized).toBe(true);
    expect(markers[0].frameStart).toBe(39);
    expect(markers[1].labels).toEqual(["pi"]);
  });

  it("samples the fit curve from server parameters only", () => {
    const curve = fitCurvePoints(fit(20), 160, 360, 10);
    expect(curve[0].value).toBeCloseTo(20); // baseline at the boundary
    expect(curve[10].value).toBeCloseTo(33, 0); // asymptote
    expect(curve).toHaveLength(11);
  });

  it("summarizes the score breakdown verbatim", () => {
    const { rows, total } = scoreBreakdown(report());
    expect(rows).toHaveLength(1);
    expect(rows[0].weight).toBe(-0.75);
    expect(total).toBe(-0.75);
  });
});
