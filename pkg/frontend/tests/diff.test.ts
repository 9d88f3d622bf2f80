import { describe, expect, test } from 'vitest';

import { diffRows, renderDiff } from '../src/diff.js';
import type { Counterfactual, ExplainResponse } from '../src/types.js';

const original = { age: 39, income: 42000, gender: 'female', hasDebt: 'yes' };
const order = ['age', 'income', 'gender', 'hasDebt'];

const cfChangingIncome: Counterfactual = {
  values: { ...original, income: 55000 },
  changed: { income: { from: 42000, to: 55000 } },
  distance: 0.0123,
  prediction: 0.82,
  score: 0.0123,
  features_changed: 1,
};

function response(overrides: Partial<ExplainResponse> = {}): ExplainResponse {
  return {
    method: 'engine',
    converged: true,
    generations: 4,
    explored: 1234,
    top_k: [cfChangingIncome],
    ...overrides,
  };
}

describe('diffRows', () => {
  test('changed feature uses the service payload values verbatim', () => {
    const rows = diffRows(original, cfChangingIncome, order);
    expect(rows).toHaveLength(4);
    const income = rows.find((r) => r.feature === 'income')!;
    expect(income).toEqual({ feature: 'income', from: 42000, to: 55000, changed: true });
  });

  test('unchanged features keep from === to and changed=false', () => {
    const rows = diffRows(original, cfChangingIncome, order);
    for (const r of rows.filter((x) => x.feature !== 'income')) {
      expect(r.changed).toBe(false);
      expect(r.from).toBe(r.to);
    }
  });

  test('rows follow the schema feature order', () => {
    const rows = diffRows(original, cfChangingIncome, order);
    expect(rows.map((r) => r.feature)).toEqual(order);
  });
});

describe('renderDiff', () => {
  test('single changed feature renders exactly one highlighted row', () => {
    const html = renderDiff(original, response(), order);
    expect(html.match(/class="changed"/g)).toHaveLength(1);
    expect(html).toContain('55000');
    expect(html).not.toContain('banner');
  });

  test('non-converged result shows the generation-cap banner', () => {
    const html = renderDiff(original, response({ converged: false, generations: 100 }), order);
    expect(html).toContain('banner warn');
    expect(html).toContain('generation cap');
    expect(html).toContain('100 generations');
  });

  test('k results render k cards in service order', () => {
    const second: Counterfactual = {
      ...cfChangingIncome,
      changed: { age: { from: 39, to: 52 } },
      distance: 0.3,
      score: 0.3,
    };
    const html = renderDiff(original, response({ top_k: [cfChangingIncome, second] }), order);
    const ranks = [...html.matchAll(/data-rank="(\d+)"/g)].map((m) => m[1]);
    expect(ranks).toEqual(['1', '2']);
    expect(html.indexOf('distance 0.0123')).toBeLessThan(html.indexOf('distance 0.3000'));
  });

  test('empty top_k renders the not-found banner', () => {
    const html = renderDiff(original, response({ converged: false, top_k: [] }), order);
    expect(html).toContain('no counterfactual found');
  });

  test('values are HTML-escaped', () => {
    const cf: Counterfactual = {
      ...cfChangingIncome,
      changed: { gender: { from: '<script>', to: 'male' } },
    };
    const html = renderDiff(original, response({ top_k: [cf] }), order);
    expect(html).toContain('&lt;script&gt;');
    expect(html).not.toContain('<script>');
  });
});
