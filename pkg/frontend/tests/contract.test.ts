// UI contract against a live service seeded with the engineered cohort:
// the queue carries only ManualInspect items, a submitted decision removes
// the item and the re-fetch shows the final category, and the offset
// toggle displays the four precomputed taus.

import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, StaleStateError } from "../src/api.js";
import { buildQueue, offsetOptions, validateDecision } from "../src/model.js";
import { BASE_URL } from "./helpers.js";

const api = new ApiClient(BASE_URL);

describe("queue contract", () => {
  it("verdict filter returns only ManualInspect datasets", async () => {
    const items = await api.listDatasets({ verdict: "manual" });
    expect(items.length).toBeGreaterThan(0);
    expect(items.every((i) => i.verdict === "ManualInspect")).toBe(true);
    const ids = items.map((i) => i.dataset_id);
    expect(ids).toContain("dropout01");
    expect(ids).toContain("slowex01");
    expect(ids).not.toContain("clean01");
    expect(ids).not.toContain("shallow01");
  });

  it("auto verdicts are never actionable in the queue view", async () => {
    const queue = buildQueue(await api.listDatasets());
    const actionableIds = queue.actionable.map((i) => i.dataset_id);
    expect(actionableIds).not.toContain("clean01");
    expect(actionableIds).not.toContain("shallow01");
    for (const item of queue.actionable) {
      expect(item.verdict).toBe("ManualInspect");
    }
  });

  it("group filter narrows the listing", async () => {
    const patients = await api.listDatasets({ group: "patient" });
    expect(patients.length).toBeGreaterThan(0);
    expect(patients.every((i) => i.group === "patient")).toBe(true);
  });
});

describe("offset toggle contract", () => {
  it("shows the four precomputed taus without refitting", async () => {
    const report = await api.getDataset("dropout01");
    expect(report.reselection).not.toBeNull();
    const options = offsetOptions(report.reselection);
    expect(options).toHaveLength(4);
    for (const [offset, option] of options.entries()) {
      const fit = report.reselection!.fits.pcr[offset];
      expect(option.tauS).toBe(fit ? fit.tau_s : null);
    }
    // the corrupted first point pushes the recommendation past offset 0
    expect(report.reselection!.recommended_offset).toBeGreaterThanOrEqual(1);
    const recommended = options.find((o) => o.recommended);
    expect(recommended?.offset).toBe(report.reselection!.recommended_offset);
  });

  it("per-frame table is served for rendering", async () => {
    const frames = await api.getFrames("dropout01");
    expect(frames).toHaveLength(130);
    expect(frames[0].concentrations.pcr).toBeGreaterThan(0);
    expect(frames[0].ph).not.toBeNull();
  });
});

describe("decision contract", () => {
  it("submits, leaves the queue, and the re-fetch shows the category", async () => {
    const before = buildQueue(await api.listDatasets());
    expect(before.actionable.map((i) => i.dataset_id)).toContain("dropout01");

    const report = await api.getDataset("dropout01");
    const offset = report.reselection!.recommended_offset;
    const body = {
      decided_by: "ui-test",
      decision: "AcceptRecoveryOnly" as const,
      recovery_start_offset: offset,
      note: "criterion-9 contract",
    };
    expect(validateDecision(body, report)).toEqual([]);

    const updated = await api.postDecision("dropout01", body);
    expect(updated.review.category).toBe("AcceptRecoveryOnly");
    expect(updated.review.effective?.recovery_start_offset).toBe(offset);
    expect(updated.review.effective?.pcr_rec?.tau_s).toBe(
      report.reselection!.fits.pcr[offset]?.tau_s,
    );

    const after = buildQueue(await api.listDatasets());
    expect(after.actionable.map((i) => i.dataset_id)).not.toContain("dropout01");
    expect(after.decided.map((i) => i.dataset_id)).toContain("dropout01");

    const refetched = await api.getDataset("dropout01");
    expect(refetched.review.category).toBe("AcceptRecoveryOnly");

    const summary = await api.getSummary();
    expect(summary.categories.AcceptRecoveryOnly).toBe(1);
  });

  it("conflicts on auto-verdict datasets surface as stale-state errors", async () => {
    await expect(
      api.postDecision("clean01", {
        decided_by: "ui-test",
        decision: "AcceptAll",
        recovery_start_offset: 0,
        note: "",
      }),
    ).rejects.toBeInstanceOf(StaleStateError);
  });

  it("invalid bodies are rejected with 422", async () => {
    try {
      await api.postDecision("slowex01", {
        decided_by: "ui-test",
        decision: "AcceptAll",
        recovery_start_offset: 9,
        note: "",
      });
      expect.unreachable("server accepted an invalid offset");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(422);
    }
  });

  it("unknown datasets 404", async () => {
    try {
      await api.getDataset("ghost");
      expect.unreachable("server served a missing dataset");
    } catch (err) {
      expect((err as ApiError).status).toBe(404);
    }
  });
});
