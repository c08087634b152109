/** Payload shapes of the contestation service API. */

export interface Metrics {
  accuracy: number | null;
  f1: number | null;
  auc: number | null;
}

export interface ModelInfo {
  model_id: string;
  metrics: Metrics;
  n_train: number;
  n_test: number;
  feature_kind: string;
}

export interface PredictionRow {
  test_index: number;
  prob: number;
  label: number;
  margin: number;
  k: number | null;
  text: string | null;
  true_label: number;
}

export interface FlipsetMember {
  index: number;
  label: number;
  delta: number;
  text: string | null;
}

export interface FlipsetPayload {
  test_index: number;
  algorithm: string;
  found: boolean;
  k: number;
  original_prob: number;
  original_label: number;
  estimated_prob: number;
  outer_passes: number;
  members: FlipsetMember[];
  tau: number;
}

export interface HistoryEntry {
  seq: number;
  disputed: number[];
  retrained_prob: number;
  flipped: boolean;
}

export interface Session {
  id: string;
  model_id: string;
  test_index: number;
  disputed: number[];
  history: HistoryEntry[];
}

export interface WhatIfOutcome {
  retrained_prob: number;
  flipped: boolean;
  history_entry: HistoryEntry;
}

export interface ExperimentSummary {
  dataset_name: string;
  algorithm: string;
  n_test: number;
  n_found: number;
  found_rate: number;
  flip_rate: number;
  k_values: number[];
  k_vs_confidence: Array<[number, number]>;
}

export interface TrainRequest {
  dataset: Record<string, unknown>;
  bow?: Record<string, unknown>;
  hyper?: Record<string, unknown>;
}

export interface TrainResponse {
  model_id: string;
  metrics: Metrics;
  n_train: number;
  n_test: number;
  dimension: number;
  feature_kind: string;
}
