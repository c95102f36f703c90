// Typed client for the review service; the console never computes, it
// only reads what the server already derived.

import type {
  DecisionBody,
  FrameDto,
  QueueItemDto,
  ReportDto,
  SummaryDto,
} from "./types.js";

export class ApiError extends Error {
  status: number;
  constructor(message: string, status: number) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

/** 409: the dataset's review state moved under us; reload before retrying. */
export class StaleStateError extends ApiError {
  constructor(message: string) {
    super(message, 409);
    this.name = "StaleStateError";
  }
}

async function parseError(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return res.statusText;
  }
}

export class ApiClient {
  private baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(`${this.baseUrl}${path}`, {
      headers: { Accept: "application/json" },
    });
    if (!res.ok) throw new ApiError(await parseError(res), res.status);
    return (await res.json()) as T;
  }

  async listDatasets(params?: { verdict?: string; group?: string }): Promise<QueueItemDto[]> {
    const query = new URLSearchParams();
    if (params?.verdict) query.set("verdict", params.verdict);
    if (params?.group) query.set("group", params.group);
    const suffix = query.size > 0 ? `?${query.toString()}` : "";
    const body = await this.get<{ datasets: QueueItemDto[] }>(`/datasets${suffix}`);
    return body.datasets;
  }

  async getDataset(id: string): Promise<ReportDto> {
    return this.get<ReportDto>(`/datasets/${encodeURIComponent(id)}`);
  }

  async getFrames(id: string): Promise<FrameDto[]> {
    const body = await this.get<{ frames: FrameDto[] }>(
      `/datasets/${encodeURIComponent(id)}/frames`,
    );
    return body.frames;
  }

  async getSummary(): Promise<SummaryDto> {
    return this.get<SummaryDto>("/summary");
  }

  async postDecision(id: string, body: DecisionBody): Promise<ReportDto> {
    const res = await fetch(
      `${this.baseUrl}/datasets/${encodeURIComponent(id)}/decision`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json", Accept: "application/json" },
        body: JSON.stringify(body),
      },
    );
    if (res.status === 409) throw new StaleStateError(await parseError(res));
    if (!res.ok) throw new ApiError(await parseError(res), res.status);
    return (await res.json()) as ReportDto;
  }
}
