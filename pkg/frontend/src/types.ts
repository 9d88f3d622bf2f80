/**
 * Wire types for the cfx HTTP service.
 *
 * These mirror the JSON payloads field-for-field; the UI never invents or
 * recomputes any of the numbers it displays.
 */

export type FeatureValue = number | string;

export interface FeatureInfo {
  name: string;
  kind: 'categorical' | 'ordinal' | 'continuous';
  distinct: number;
  min: FeatureValue;
  max: FeatureValue;
  /** present for categoricals and small numeric domains (<= 64 values) */
  values?: FeatureValue[];
}

export interface SchemaResponse {
  features: FeatureInfo[];
  /** multi-feature GROUPs declared by the session's constraint program */
  groups: string[][];
  rows: number;
  plaf: string;
}

export interface InstanceRow {
  row: number;
  values: Record<string, FeatureValue>;
  prediction: number;
}

export interface InstancesResponse {
  rows: InstanceRow[];
  offset: number;
  total: number;
}

export interface PlafDiagnostic {
  message: string;
  line: number;
  column: number;
}

export type PlafValidation =
  | { ok: true; normalized: string; rules: number; groups: string[][] }
  | { ok: false; error: PlafDiagnostic };

export interface ChangedCell {
  from: FeatureValue;
  to: FeatureValue;
}

export interface Counterfactual {
  values: Record<string, FeatureValue>;
  changed: Record<string, ChangedCell>;
  distance: number;
  prediction: number;
  score: number;
  features_changed: number;
}

export interface ExplainResponse {
  method: 'engine';
  converged: boolean;
  generations: number;
  explored: number;
  top_k: Counterfactual[];
  timings?: Record<string, number>;
}

export interface HyperOverrides {
  q?: number;
  k?: number;
  m_init?: number;
  m_mut?: number;
  max_generations?: number;
  restarts?: number;
  mutation_scope?: 'all' | 'topPerDelta';
  selective_mutate?: boolean;
}

export interface DistanceOverrides {
  alpha?: number;
  beta?: number;
  gamma?: number;
}

export interface ExplainRequest {
  row?: number;
  values?: Record<string, FeatureValue>;
  plaf?: string;
  hyper?: HyperOverrides;
  distance?: DistanceOverrides;
  seed?: number;
}

export interface ServiceError {
  error: { message: string; line?: number; column?: number };
}
