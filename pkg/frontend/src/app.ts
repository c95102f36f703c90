// DOM wiring for the two views: the manual-inspection queue and the
// dataset detail page with fit overlays, outlier markers, and the
// decision form.  Rendering only; all numbers come from the server.

import { ApiClient, StaleStateError } from "./api.js";
import {
  buildQueue,
  concentrationSeries,
  fitCurvePoints,
  formatR2,
  formatTau,
  offsetOptions,
  outlierMarkers,
  scoreBreakdown,
  validateDecision,
  type SeriesPoint,
} from "./model.js";
import type { DecisionChoice, FrameDto, ReportDto } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function polyline(
  points: SeriesPoint[],
  scaleX: (t: number) => number,
  scaleY: (v: number) => number,
  cls: string,
): SVGPolylineElement {
  const line = document.createElementNS(SVG_NS, "polyline");
  line.setAttribute(
    "points",
    points.map((p) => `${scaleX(p.timeS).toFixed(1)},${scaleY(p.value).toFixed(1)}`).join(" "),
  );
  line.setAttribute("class", cls);
  return line;
}

export class App {
  private api: ApiClient;
  private root: HTMLElement;

  constructor(api: ApiClient, root: HTMLElement) {
    this.api = api;
    this.root = root;
    window.addEventListener("hashchange", () => void this.route());
  }

  async route(): Promise<void> {
    const hash = window.location.hash.replace(/^#\/?/, "");
    try {
      if (hash.startsWith("dataset/")) {
        await this.renderDetail(decodeURIComponent(hash.slice("dataset/".length)));
      } else {
        await this.renderQueue();
      }
    } catch (err) {
      this.renderError(err);
    }
  }

  private renderError(err: unknown): void {
    this.root.replaceChildren();
    const banner = el("div", "banner error");
    banner.textContent = `Server unreachable or request failed: ${String(err)}`;
    const retry = el("button", "", "Retry");
    retry.onclick = () => void this.route();
    banner.appendChild(retry);
    this.root.appendChild(banner);
  }

  // --- queue view --------------------------------------------------------

  async renderQueue(): Promise<void> {
    const [items, summary] = await Promise.all([
      this.api.listDatasets(),
      this.api.getSummary(),
    ]);
    const queue = buildQueue(items);
    this.root.replaceChildren();

    const head = el("header");
    head.appendChild(el("h1", "", "dynamoqc review queue"));
    const counts = el("p", "summary-line");
    counts.textContent =
      `${summary.total} datasets — ` +
      `${summary.categories.AcceptAll} accepted, ` +
      `${summary.categories.AcceptRecoveryOnly} recovery-only, ` +
      `${summary.categories.RejectAll} rejected, ` +
      `${summary.categories.PendingReview} pending review`;
    head.appendChild(counts);
    this.root.appendChild(head);

    const section = el("section");
    section.appendChild(el("h2", "", `Awaiting inspection (${queue.actionable.length})`));
    if (queue.actionable.length === 0) {
      section.appendChild(el("p", "empty", "Nothing to review."));
    } else {
      section.appendChild(this.queueTable(queue.actionable, true));
    }
    section.appendChild(el("h2", "", `Decided (${queue.decided.length})`));
    if (queue.decided.length === 0) {
      section.appendChild(el("p", "empty", "No decisions recorded yet."));
    } else {
      section.appendChild(this.queueTable(queue.decided, false));
    }
    this.root.appendChild(section);
  }

  private queueTable(items: ReturnType<typeof buildQueue>["actionable"], actionable: boolean) {
    const table = el("table", "queue");
    const thead = el("thead");
    const hrow = el("tr");
    for (const title of ["Dataset", "QCS", "Group", "Violations", "Status"]) {
      hrow.appendChild(el("th", "", title));
    }
    thead.appendChild(hrow);
    table.appendChild(thead);
    const tbody = el("tbody");
    for (const item of items) {
      const row = el("tr", actionable ? "actionable" : "");
      const link = el("td");
      const a = el("a", "", item.dataset_id) as HTMLAnchorElement;
      a.href = `#/dataset/${encodeURIComponent(item.dataset_id)}`;
      link.appendChild(a);
      row.appendChild(link);
      row.appendChild(el("td", "score", item.score.toFixed(2)));
      row.appendChild(el("td", "", item.group ?? "—"));
      const chips = el("td", "chips");
      for (const v of item.violations) {
        const chip = el("span", "chip", `${v.criterion} ${v.weight}`);
        chip.title = v.detail;
        chips.appendChild(chip);
      }
      row.appendChild(chips);
      row.appendChild(el("td", "", item.decided ? item.category : "pending"));
      tbody.appendChild(row);
    }
    table.appendChild(tbody);
    return table;
  }

  // --- detail view -------------------------------------------------------

  async renderDetail(datasetId: string): Promise<void> {
    const [report, frames] = await Promise.all([
      this.api.getDataset(datasetId),
      this.api.getFrames(datasetId),
    ]);
    this.root.replaceChildren();

    const head = el("header");
    const back = el("a", "back", "← queue") as HTMLAnchorElement;
    back.href = "#/";
    head.appendChild(back);
    head.appendChild(el("h1", "", datasetId));
    head.appendChild(
      el(
        "p",
        "summary-line",
        `QCS ${report.qcs.score} — ${report.qcs.verdict} — ${report.review.category}`,
      ),
    );
    this.root.appendChild(head);

    this.root.appendChild(this.chartSection(report, frames));
    this.root.appendChild(this.breakdownSection(report));
    if (report.qcs.verdict === "ManualInspect") {
      this.root.appendChild(this.decisionSection(report));
    }
  }

  private chartSection(report: ReportDto, frames: FrameDto[]): HTMLElement {
    const timing = report.header.timing;
    const series = concentrationSeries(frames, timing);
    const section = el("section");
    section.appendChild(el("h2", "", "Concentration time courses"));

    const width = 860;
    const height = 300;
    const pad = 40;
    const allValues = [...series.pcr, ...series.pi, ...series.sum].map((p) => p.value);
    const tMax = Math.max(...series.pcr.map((p) => p.timeS));
    const vMax = Math.max(...allValues) * 1.05;
    const vMin = Math.min(0, ...allValues);
    const sx = (t: number) => pad + ((width - 2 * pad) * t) / tMax;
    const sy = (v: number) => height - pad - ((height - 2 * pad) * (v - vMin)) / (vMax - vMin);

    const svg = document.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
    svg.setAttribute("class", "chart");

    for (const boundary of [
      series.phaseBoundaries.exerciseStartS,
      series.phaseBoundaries.recoveryStartS,
    ]) {
      const line = document.createElementNS(SVG_NS, "line");
      line.setAttribute("x1", String(sx(boundary)));
      line.setAttribute("x2", String(sx(boundary)));
      line.setAttribute("y1", String(pad));
      line.setAttribute("y2", String(height - pad));
      line.setAttribute("class", "phase-boundary");
      svg.appendChild(line);
    }

    for (const marker of outlierMarkers(report)) {
      const rect = document.createElementNS(SVG_NS, "rect");
      const x0 = sx(marker.frameStart * timing.tr_s);
      const x1 = sx((marker.frameEnd + 1) * timing.tr_s);
      rect.setAttribute("x", String(x0));
      rect.setAttribute("width", String(Math.max(x1 - x0, 2)));
      rect.setAttribute("y", String(pad));
      rect.setAttribute("height", String(height - 2 * pad));
      rect.setAttribute("class", marker.penalized ? "outlier penalized" : "outlier");
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent = `outlier frames ${marker.frameStart}-${marker.frameEnd} (${marker.labels.join(", ")})`;
      rect.appendChild(title);
      svg.appendChild(rect);
    }

    svg.appendChild(polyline(series.sum, sx, sy, "trace sum"));
    svg.appendChild(polyline(series.pcr, sx, sy, "trace pcr"));
    svg.appendChild(polyline(series.pi, sx, sy, "trace pi"));

    const rec = report.reselection;
    if (rec) {
      const offset = this.selectedOffset ?? rec.recommended_offset;
      const fit = rec.fits.pcr[offset];
      if (fit) {
        const recoveryStart = series.phaseBoundaries.recoveryStartS;
        const duration = timing.n_recovery * timing.tr_s;
        svg.appendChild(
          polyline(fitCurvePoints(fit, recoveryStart, duration), sx, sy, "trace fit"),
        );
      }
    }
    section.appendChild(svg);

    const legend = el("p", "legend");
    legend.innerHTML =
      '<span class="key pcr">PCr</span> <span class="key pi">Pi</span> ' +
      '<span class="key sum">PCr+Pi</span> <span class="key fit">recovery fit</span>';
    section.appendChild(legend);
    return section;
  }

  private breakdownSection(report: ReportDto): HTMLElement {
    const section = el("section");
    section.appendChild(el("h2", "", "QCS breakdown"));
    const { rows, total } = scoreBreakdown(report);
    if (rows.length === 0) {
      section.appendChild(el("p", "empty", "No criterion violations."));
    } else {
      const table = el("table", "breakdown");
      for (const row of rows) {
        const tr = el("tr");
        tr.appendChild(el("td", "", row.criterion));
        tr.appendChild(el("td", "score", row.weight.toFixed(2)));
        tr.appendChild(el("td", "", row.detail));
        table.appendChild(tr);
      }
      const totalRow = el("tr", "total");
      totalRow.appendChild(el("td", "", "QCS"));
      totalRow.appendChild(el("td", "score", total.toFixed(2)));
      totalRow.appendChild(el("td", "", report.qcs.verdict));
      table.appendChild(totalRow);
      section.appendChild(table);
    }
    const kin = report.kinetics;
    const facts = el("p", "facts");
    facts.textContent =
      `depletion ${kin.depletion_pct?.toFixed(1) ?? "n/a"}% — ` +
      `pH rest ${kin.ph_rest?.toFixed(2) ?? "n/a"} / post ${kin.ph_post?.toFixed(2) ?? "n/a"} — ` +
      `tau PCr rec ${formatTau(kin.pcr_rec?.tau_s ?? null)} (r² ${formatR2(kin.pcr_rec?.r2 ?? null)})`;
    section.appendChild(facts);
    return section;
  }

  // --- decision form -----------------------------------------------------

  private selectedOffset: number | null = null;

  private decisionSection(report: ReportDto): HTMLElement {
    const section = el("section", "decision");
    section.appendChild(el("h2", "", "Recovery start and decision"));

    const options = offsetOptions(report.reselection);
    const offsetRow = el("div", "offsets");
    const current = () => this.selectedOffset ?? report.reselection?.recommended_offset ?? 0;
    for (const option of options) {
      const button = el(
        "button",
        "offset" +
          (option.recommended ? " recommended" : "") +
          (option.offset === current() ? " selected" : ""),
      );
      button.appendChild(el("div", "offset-label", `offset ${option.offset}`));
      button.appendChild(
        el("div", "offset-tau", option.available ? formatTau(option.tauS) : "failed"),
      );
      button.appendChild(el("div", "offset-r2", `r² ${formatR2(option.r2)}`));
      if (!option.available) button.disabled = true;
      button.onclick = () => {
        this.selectedOffset = option.offset;
        void this.renderDetail(report.dataset_id);
      };
      offsetRow.appendChild(button);
    }
    section.appendChild(offsetRow);

    const form = el("div", "decision-form");
    const operator = el("input") as HTMLInputElement;
    operator.placeholder = "operator id";
    operator.id = "operator";
    form.appendChild(operator);
    const note = el("input") as HTMLInputElement;
    note.placeholder = "note (optional)";
    note.id = "note";
    form.appendChild(note);

    const status = el("p", "status");
    for (const choice of ["AcceptAll", "AcceptRecoveryOnly", "RejectAll"] as DecisionChoice[]) {
      const button = el("button", `choice ${choice}`, choice);
      button.onclick = async () => {
        const body = {
          decided_by: operator.value,
          decision: choice,
          recovery_start_offset: current(),
          note: note.value,
        };
        const problems = validateDecision(body, report);
        if (problems.length > 0) {
          status.textContent = problems.join("; ");
          status.className = "status error";
          return;
        }
        status.textContent = "submitting…";
        try {
          await this.api.postDecision(report.dataset_id, body);
          // optimistic: jump back, then the queue re-fetch confirms
          window.location.hash = "#/";
        } catch (err) {
          if (err instanceof StaleStateError) {
            status.textContent = "Dataset changed on the server; reloading.";
            status.className = "status error";
            await this.renderDetail(report.dataset_id);
            return;
          }
          status.textContent = String(err);
          status.className = "status error";
        }
      };
      form.appendChild(button);
    }
    section.appendChild(form);
    section.appendChild(status);
    return section;
  }
}
