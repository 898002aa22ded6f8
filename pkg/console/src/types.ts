/** Payload shapes served by the parkcast HTTP API, verbatim. */

export type Group = "with_data" | "without_data";
export type Metric = "cosine" | "emd";

export interface HealthPayload {
  status: string;
  estimate_date: string; // YYYY-MM-DD
  estimate_times: string[]; // "HH:MM", the configured grid
  artifacts: Record<string, boolean>;
}

export interface ClusterProperties {
  cluster_id: number;
  group: Group;
  api_id: string;
  block_count: number;
  category_counts: number[] | null;
}

export interface ClusterFeature {
  type: "Feature";
  geometry: { type: string; coordinates: unknown };
  properties: ClusterProperties;
}

export interface ClustersPayload {
  type: "FeatureCollection";
  features: ClusterFeature[];
}

export interface EstimateRow {
  source_id: number;
  similarity: number;
  lo: number; // integer percent
  hi: number; // integer percent
  eii: { lo: number; hi: number } | null;
}

export interface EstimatesPayload {
  target_cluster: number;
  timestamp: string;
  metric: Metric;
  rows: EstimateRow[];
}

export interface ModelSummary {
  cluster_id: number;
  learner: string;
  hyperparameters: Record<string, unknown>;
  cv_rmse: number;
  cv_rmse_pct: number;
}

export interface ModelsPayload {
  learner: string;
  seed: number;
  datapoints: string;
  models: ModelSummary[];
}
