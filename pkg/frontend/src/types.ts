// Wire types mirroring the review service's JSON bodies.

export type Verdict = "AutoAccept" | "ManualInspect" | "AutoReject";

export type Category =
  | "AcceptAll"
  | "AcceptRecoveryOnly"
  | "RejectAll"
  | "PendingReview";

export type DecisionChoice = "AcceptAll" | "AcceptRecoveryOnly" | "RejectAll";

export interface ViolationDto {
  criterion: string;
  weight: number;
  detail: string;
  evidence?: unknown[];
}

export interface QueueItemDto {
  dataset_id: string;
  score: number;
  verdict: Verdict;
  category: Category;
  violations: ViolationDto[];
  group: string | null;
  decided: boolean;
}

export interface MonoExpFitDto {
  baseline: number;
  delta: number;
  tau_s: number;
  direction: "up" | "down";
  r2: number;
  phase: "exercise" | "recovery";
  start_offset: number;
  tau_at_cap: boolean;
}

export interface ReselectionDto {
  fits: { pcr: (MonoExpFitDto | null)[]; pi: (MonoExpFitDto | null)[] };
  cv: { pcr: number | null; pi: number | null };
  cv_complete: { pcr: boolean; pi: boolean };
  recommended_offset: number;
  qualified: boolean;
  fit_errors: Record<string, Record<string, string>>;
}

export interface OutlierEventDto {
  frame_start: number;
  frame_end: number;
  labels: string[];
  penalized: boolean;
}

export interface OutliersDto {
  pcr: [number, number][];
  pi: [number, number][];
  pcr_plus_pi: [number, number][];
  events: OutlierEventDto[];
}

export interface KineticsDto {
  pcr_rest: number | null;
  pcr_post: number | null;
  depletion_pct: number | null;
  ph_rest: number | null;
  ph_post: number | null;
  pcr_ex: MonoExpFitDto | null;
  pi_ex: MonoExpFitDto | null;
  pcr_rec: MonoExpFitDto | null;
  pi_rec: MonoExpFitDto | null;
  errors: Record<string, string>;
}

export interface FrameDto {
  frame_index: number;
  concentrations: { pcr: number; pi: number; atp: number };
  delta_pi_pcr_ppm: number;
  ph: number | null;
  zero_order_phase_rad: number;
  residual_norm: number;
  converged: boolean;
}

export interface ReviewStateDto {
  category: Category;
  decision: DecisionBody & { dataset_id: string; timestamp: string } | null;
  effective: {
    recovery_start_offset: number;
    pcr_rec: MonoExpFitDto | null;
    pi_rec: MonoExpFitDto | null;
    exercise_included: boolean;
  } | null;
}

export interface ReportDto {
  dataset_id: string;
  group?: string | null;
  header: {
    timing: { tr_s: number; n_rest: number; n_exercise: number; n_recovery: number };
  };
  qcs: {
    score: number;
    verdict: Verdict;
    violations: ViolationDto[];
    reportable: { exercise: boolean; recovery: boolean };
  };
  kinetics: KineticsDto;
  reselection: ReselectionDto | null;
  outliers: OutliersDto;
  review: ReviewStateDto;
}

export interface DecisionBody {
  decided_by: string;
  decision: DecisionChoice;
  recovery_start_offset: number;
  note: string;
}

export interface SummaryDto {
  total: number;
  categories: Record<Category, number>;
  verdicts: Record<Verdict, number>;
  percentages: Record<Category, number>;
  by_group: Record<string, Record<Category, number>>;
}
