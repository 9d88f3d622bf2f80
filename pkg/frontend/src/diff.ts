/**
 * Diff presentation of counterfactuals: original vs proposed values, one row
 * per feature, changed cells highlighted. Pure string/array functions so the
 * same code runs under tests without a DOM.
 *
 * Every number shown comes straight from the service payload (distance,
 * score, prediction, changed map); nothing is recomputed client-side.
 */

import type {
  Counterfactual,
  ExplainResponse,
  FeatureValue,
} from './types.js';

export interface DiffRow {
  feature: string;
  from: FeatureValue;
  to: FeatureValue;
  changed: boolean;
}

/** Rows in schema feature order; unchanged features keep from === to. */
export function diffRows(
  original: Record<string, FeatureValue>,
  cf: Counterfactual,
  featureOrder?: string[],
): DiffRow[] {
  const order = featureOrder ?? Object.keys(original);
  return order.map((name) => {
    const cell = cf.changed[name];
    if (cell) return { feature: name, from: cell.from, to: cell.to, changed: true };
    const v = original[name];
    return { feature: name, from: v, to: v, changed: false };
  });
}

const esc = (v: FeatureValue): string =>
  String(v)
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');

const fmt = (v: FeatureValue): string =>
  typeof v === 'number' && !Number.isInteger(v) ? v.toFixed(4) : String(v);

function cfCard(
  original: Record<string, FeatureValue>,
  cf: Counterfactual,
  rank: number,
  featureOrder?: string[],
): string {
  const rows = diffRows(original, cf, featureOrder)
    .map((r) => {
      const cls = r.changed ? ' class="changed"' : '';
      return (
        `<tr${cls}><td>${esc(r.feature)}</td>` +
        `<td>${esc(fmt(r.from))}</td><td>${esc(fmt(r.to))}</td></tr>`
      );
    })
    .join('');
  return (
    `<section class="cf-card" data-rank="${rank}">` +
    `<header>#${rank} &mdash; distance ${cf.distance.toFixed(4)}, ` +
    `score ${cf.score.toFixed(4)}, prediction ${cf.prediction.toFixed(4)}, ` +
    `${cf.features_changed} feature${cf.features_changed === 1 ? '' : 's'} changed` +
    `</header>` +
    `<table><thead><tr><th>feature</th><th>current</th><th>proposed</th></tr></thead>` +
    `<tbody>${rows}</tbody></table></section>`
  );
}

/**
 * Full result block: cards in service order (already sorted by score) plus a
 * banner when the search hit its generation cap without converging.
 */
export function renderDiff(
  original: Record<string, FeatureValue>,
  result: ExplainResponse,
  featureOrder?: string[],
): string {
  const parts: string[] = [];
  if (!result.converged) {
    parts.push(
      '<div class="banner warn">no counterfactual search convergence within ' +
        `the generation cap (ran ${result.generations} generations); ` +
        'results below are best-effort</div>',
    );
  }
  if (result.top_k.length === 0) {
    parts.push('<div class="banner">no counterfactual found</div>');
  }
  result.top_k.forEach((cf, i) => parts.push(cfCard(original, cf, i + 1, featureOrder)));
  return parts.join('\n');
}
