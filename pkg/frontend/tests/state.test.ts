import { describe, expect, test, vi } from 'vitest';

import { ApiClient, RawResult } from '../src/api.js';
import { appendRule, applyQuickAction, ruleFor } from '../src/editor.js';
import { ExplorerState } from '../src/state.js';
import type { ExplainRequest, ExplainResponse, SchemaResponse } from '../src/types.js';

const schema: SchemaResponse = {
  features: [
    { name: 'age', kind: 'continuous', distinct: 40, min: 18, max: 80 },
    { name: 'income', kind: 'continuous', distinct: 300, min: 0, max: 200000 },
  ],
  groups: [],
  rows: 10,
  plaf: 'PLAF x_cf.age >= x.age\n',
};

function explainResponse(seed = 0): ExplainResponse {
  return {
    method: 'engine',
    converged: true,
    generations: 3,
    explored: 500 + seed,
    top_k: [],
  };
}

/** ApiClient stub: canned schema/instances, programmable explain. */
function stubApi(
  explainImpl?: (req: ExplainRequest, signal?: AbortSignal) => Promise<RawResult<ExplainResponse>>,
): ApiClient {
  const api = new ApiClient('http://stub');
  api.schema = async () => schema;
  api.instances = async (_limit, offset) => ({
    rows: [{ row: offset, values: { age: 30 + offset, income: 1000 }, prediction: 0.4 }],
    offset,
    total: 10,
  });
  api.explain =
    explainImpl ??
    (async (req) => {
      const payload = explainResponse(req.seed ?? 0);
      return { payload, raw: JSON.stringify(payload) };
    });
  return api;
}

describe('ExplorerState', () => {
  test('loadSchema adopts the session program text', async () => {
    const store = new ExplorerState(stubApi());
    await store.loadSchema();
    expect(store.plafText).toBe(schema.plaf);
    expect(store.plafStatus).toEqual({ state: 'unchecked' });
  });

  test('explain stores result + history; edits mark it stale', async () => {
    const store = new ExplorerState(stubApi());
    await store.loadSchema();
    await store.selectRow(3);
    const shown = await store.explain();
    expect(shown).not.toBeNull();
    expect(store.stale).toBe(false);
    expect(store.history).toHaveLength(1);

    store.setFeature('age', 44);
    expect(store.stale).toBe(true);
    expect(store.sourceRow).toBeNull(); // hand-edited, no longer row 3
    expect(store.buildRequest().values).toMatchObject({ age: 44 });

    store.setPlaf(store.plafText + 'PLAF x_cf.income >= x.income\n');
    expect(store.plafStatus.state).toBe('unchecked');
  });

  test('request uses row reference while the instance is an unedited dataset row', async () => {
    const store = new ExplorerState(stubApi());
    await store.loadSchema();
    await store.selectRow(5);
    expect(store.buildRequest()).toMatchObject({ row: 5, seed: 0 });
    // the session program is unchanged, so no plaf override is sent
    expect(store.buildRequest().plaf).toBeUndefined();
  });

  test('a second explain supersedes a slower in-flight one', async () => {
    let calls = 0;
    const api = stubApi(async (req, signal) => {
      calls += 1;
      const mine = calls;
      await new Promise((r) => setTimeout(r, mine === 1 ? 60 : 5));
      if (signal?.aborted) throw new DOMException('aborted', 'AbortError');
      const payload = explainResponse(req.seed ?? 0);
      return { payload, raw: `run-${mine}` };
    });
    const store = new ExplorerState(api);
    await store.loadSchema();
    await store.selectRow(0);

    const first = store.explain();
    store.setSeed(9); // also aborts the pending request
    const second = store.explain();

    const [r1, r2] = await Promise.all([first, second]);
    expect(r1).toBeNull(); // dropped, never shown
    expect(r2?.raw).toBe('run-2');
    expect(store.result?.raw).toBe('run-2');
    expect(store.history).toHaveLength(1);
  });

  test('an edit during flight cancels and keeps the old result stale', async () => {
    const api = stubApi(async (req, signal) => {
      await new Promise((r) => setTimeout(r, 40));
      if (signal?.aborted) throw new DOMException('aborted', 'AbortError');
      const payload = explainResponse(req.seed ?? 0);
      return { payload, raw: 'late' };
    });
    const store = new ExplorerState(api);
    await store.loadSchema();
    await store.selectRow(0);

    const pending = store.explain();
    store.setFeature('income', 99999);
    expect(await pending).toBeNull();
    expect(store.result).toBeNull(); // nothing was ever shown
    expect(store.busy).toBe(false);
  });

  test('exportHistory round-trips request/response pairs as JSON', async () => {
    const store = new ExplorerState(stubApi());
    await store.loadSchema();
    await store.selectRow(1);
    await store.explain();
    const parsed = JSON.parse(store.exportHistory());
    expect(parsed).toHaveLength(1);
    expect(parsed[0].request).toMatchObject({ row: 1 });
    expect(parsed[0].response.method).toBe('engine');
  });

  test('validatePlaf reflects service diagnostics', async () => {
    const api = stubApi();
    api.validatePlaf = async () => ({
      ok: false,
      error: { message: 'unknown feature wages', line: 2, column: 10 },
    });
    const store = new ExplorerState(api);
    await store.loadSchema();
    await store.validatePlaf();
    expect(store.plafStatus).toEqual({
      state: 'invalid',
      message: 'unknown feature wages',
      line: 2,
      column: 10,
    });
  });

  test('onChange fires on edits', async () => {
    const store = new ExplorerState(stubApi());
    const spy = vi.fn();
    store.onChange(spy);
    await store.loadSchema();
    store.setFeature('age', 21);
    expect(spy.mock.calls.length).toBeGreaterThanOrEqual(2);
  });
});

describe('constraint editor quick actions', () => {
  test('immutable appends an equality rule', () => {
    expect(ruleFor('immutable', 'gender')).toBe('PLAF x_cf.gender = x.gender');
    const out = applyQuickAction('', 'immutable', 'gender');
    expect(out).toBe('PLAF x_cf.gender = x.gender\n');
  });

  test('monotone actions append inequality rules', () => {
    expect(ruleFor('monotone-up', 'age')).toBe('PLAF x_cf.age >= x.age');
    expect(ruleFor('monotone-down', 'debt')).toBe('PLAF x_cf.debt <= x.debt');
  });

  test('appendRule keeps existing text and skips exact duplicates', () => {
    const base = 'PLAF x_cf.age >= x.age\n';
    const once = appendRule(base, 'PLAF x_cf.gender = x.gender');
    expect(once).toBe('PLAF x_cf.age >= x.age\nPLAF x_cf.gender = x.gender\n');
    expect(appendRule(once, 'PLAF x_cf.gender = x.gender')).toBe(once);
  });
});
