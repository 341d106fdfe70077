// Shapes of the labeling service's /api/v1 responses. Only the fields the
// console renders are typed; unknown extras pass through untouched.

export type Label = 'positive' | 'negative';

export interface QueueItem {
  patent_id: string;
  title: string;
  abstract: string;
  claims_excerpt: string;
  uncertainty: number;
}

export interface QueueResponse {
  items: QueueItem[];
}

export interface PatentDetail {
  patent_id: string;
  title: string;
  abstract: string;
  claims: string;
  description: string;
  cpc_codes: string[];
  citations: string[];
  family_id: string | null;
  grant_date: string | null;
}

export interface SubmitResponse {
  retrained: boolean;
  labels_total: number;
}

export interface KappaPair {
  annotators: string[];
  kappa: number;
  overlap: number;
}

export interface SessionStats {
  session_id: string;
  pool_size: number;
  labels_total: number;
  labels_by_category: Record<string, number>;
  labels_by_source: Record<string, number>;
  labels_since_retrain: number;
  retrain_count: number;
  model_hash: string;
  kappa_pairs: KappaPair[];
}

export interface ConflictDetail {
  patent_id: string;
  existing_label: Label;
  existing_annotator_id: string;
}
