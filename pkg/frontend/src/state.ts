/**
 * Session state for the explorer.
 *
 * The store owns the (instance, plaf, params) triple the page displays and
 * enforces two rules the rest of the UI relies on:
 *
 *  - a shown result always belongs to the shown triple: any edit marks the
 *    current result stale until the next explain completes;
 *  - one explain in flight at a time: edits (or a newer explain) abort the
 *    pending request, whose response is then dropped, never displayed.
 */

import { ApiClient, RawResult } from './api.js';
import type {
  DistanceOverrides,
  ExplainRequest,
  ExplainResponse,
  FeatureValue,
  HyperOverrides,
  PlafValidation,
  SchemaResponse,
} from './types.js';

export type PlafStatus =
  | { state: 'unchecked' }
  | { state: 'valid'; rules: number }
  | { state: 'invalid'; message: string; line: number; column: number };

export interface HistoryEntry {
  request: ExplainRequest;
  response: ExplainResponse;
  raw: string;
  at: string; // ISO timestamp
}

export interface ShownResult {
  request: ExplainRequest;
  response: ExplainResponse;
  raw: string;
}

type Listener = () => void;

export class ExplorerState {
  schema: SchemaResponse | null = null;
  /** feature name -> editable value; starts from a dataset row or all-blank */
  instance: Record<string, FeatureValue> = {};
  /** dataset row the instance was loaded from, if unedited since */
  sourceRow: number | null = null;
  plafText = '';
  plafStatus: PlafStatus = { state: 'unchecked' };
  hyper: HyperOverrides = {};
  distance: DistanceOverrides = {};
  seed = 0;
  result: ShownResult | null = null;
  stale = false;
  busy = false;
  lastError: string | null = null;
  readonly history: HistoryEntry[] = [];

  private controller: AbortController | null = null;
  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient) {}

  onChange(fn: Listener): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  async loadSchema(): Promise<SchemaResponse> {
    const schema = await this.api.schema();
    this.schema = schema;
    this.plafText = schema.plaf;
    this.plafStatus = { state: 'unchecked' };
    this.emit();
    return schema;
  }

  async selectRow(row: number): Promise<void> {
    const page = await this.api.instances(1, row);
    const r = page.rows[0];
    if (!r) throw new Error(`row ${row} out of range`);
    this.instance = { ...r.values };
    this.sourceRow = row;
    this.invalidate();
  }

  setFeature(name: string, value: FeatureValue): void {
    this.instance[name] = value;
    this.sourceRow = null; // hand-edited: no longer a dataset row
    this.invalidate();
  }

  setPlaf(text: string): void {
    if (text === this.plafText) return;
    this.plafText = text;
    this.plafStatus = { state: 'unchecked' };
    this.invalidate();
  }

  setSeed(seed: number): void {
    this.seed = seed;
    this.invalidate();
  }

  setHyper(h: HyperOverrides): void {
    this.hyper = { ...h };
    this.invalidate();
  }

  setDistance(d: DistanceOverrides): void {
    this.distance = { ...d };
    this.invalidate();
  }

  /** Any edit: the shown result no longer matches the shown triple. */
  private invalidate(): void {
    if (this.controller) {
      this.controller.abort();
      this.controller = null;
      this.busy = false;
    }
    if (this.result) this.stale = true;
    this.emit();
  }

  async validatePlaf(): Promise<PlafValidation> {
    const v = await this.api.validatePlaf(this.plafText);
    this.plafStatus = v.ok
      ? { state: 'valid', rules: v.rules }
      : { state: 'invalid', ...v.error };
    this.emit();
    return v;
  }

  buildRequest(): ExplainRequest {
    const req: ExplainRequest = { seed: this.seed };
    if (this.sourceRow !== null) req.row = this.sourceRow;
    else req.values = { ...this.instance };
    if (this.schema && this.plafText !== this.schema.plaf) req.plaf = this.plafText;
    if (Object.keys(this.hyper).length) req.hyper = { ...this.hyper };
    if (Object.keys(this.distance).length) req.distance = { ...this.distance };
    return req;
  }

  /**
   * Run explain for the current triple. Returns null when superseded by an
   * edit or a newer call before the response arrived.
   */
  async explain(): Promise<ShownResult | null> {
    if (this.controller) this.controller.abort(); // newer request wins
    const controller = new AbortController();
    this.controller = controller;
    this.busy = true;
    this.lastError = null;
    this.emit();

    const request = this.buildRequest();
    let res: RawResult<ExplainResponse>;
    try {
      res = await this.api.explain(request, controller.signal);
    } catch (e) {
      if (controller.signal.aborted) return null; // superseded: drop silently
      this.busy = false;
      this.lastError = e instanceof Error ? e.message : String(e);
      this.emit();
      throw e;
    }
    if (controller.signal.aborted || this.controller !== controller) {
      return null; // a later edit invalidated this response before it landed
    }
    this.controller = null;
    this.busy = false;
    this.result = { request, response: res.payload, raw: res.raw };
    this.stale = false;
    this.history.push({
      request,
      response: res.payload,
      raw: res.raw,
      at: new Date().toISOString(),
    });
    this.emit();
    return this.result;
  }

  /** Session history as portable JSON (request + response pairs). */
  exportHistory(): string {
    return JSON.stringify(
      this.history.map((h) => ({ at: h.at, request: h.request, response: h.response })),
      null,
      2,
    );
  }
}
