// Shapes mirrored from the review service's JSON API. The service is
// the single source of truth; nothing here adds or renames fields.

export type Verdict = "accepted" | "rejected";
export type Status = "pending" | Verdict;

export interface Candidate {
  id: number;
  text: string;
  img: string;
  confidence: number;
  assigned_label: 0 | 1;
  status: Status;
  image_url: string;
}

export interface Stats {
  total: number;
  pending: number;
  accepted: number;
  rejected: number;
}

export interface CandidatePage {
  total: number;
  page: number;
  page_size: number;
  items: Candidate[];
}

export interface DecisionAck {
  ok: boolean;
  candidate_id: number;
  verdict: Verdict;
  stats: Stats;
}
