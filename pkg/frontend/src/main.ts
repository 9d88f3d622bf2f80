/**
 * DOM wiring for the explorer page. All logic lives in the store/renderers;
 * this file only moves values between the DOM and the store.
 *
 * The page is static: serve this directory (e.g. `python3 -m http.server`)
 * and point it at a running cfx service with `?api=http://host:port`.
 */

import { ApiClient } from './api.js';
import { renderDiff } from './diff.js';
import { applyQuickAction, QuickAction } from './editor.js';
import { ExplorerState } from './state.js';
import type { FeatureInfo, FeatureValue } from './types.js';

const $ = <T extends HTMLElement>(sel: string): T => {
  const el = document.querySelector<T>(sel);
  if (!el) throw new Error(`missing element: ${sel}`);
  return el;
};

function apiBase(): string {
  const qs = new URLSearchParams(location.search).get('api');
  return (qs ?? 'http://127.0.0.1:8000').replace(/\/$/, '');
}

function inputFor(f: FeatureInfo, value: FeatureValue): HTMLInputElement | HTMLSelectElement {
  if (f.values && f.values.length <= 64) {
    const sel = document.createElement('select');
    for (const v of f.values) {
      const opt = document.createElement('option');
      opt.value = String(v);
      opt.textContent = String(v);
      if (String(v) === String(value)) opt.selected = true;
      sel.appendChild(opt);
    }
    return sel;
  }
  const inp = document.createElement('input');
  inp.type = f.kind === 'categorical' ? 'text' : 'number';
  inp.value = String(value);
  return inp;
}

function parseValue(f: FeatureInfo, raw: string): FeatureValue {
  if (f.kind === 'categorical') return raw;
  const n = Number(raw);
  return Number.isFinite(n) ? n : raw;
}

async function boot(): Promise<void> {
  const api = new ApiClient(apiBase());
  const store = new ExplorerState(api);

  const rowInput = $<HTMLInputElement>('#row');
  const loadBtn = $<HTMLButtonElement>('#load-row');
  const featureTable = $<HTMLTableSectionElement>('#features tbody');
  const plafBox = $<HTMLTextAreaElement>('#plaf');
  const plafStatus = $<HTMLElement>('#plaf-status');
  const quickFeature = $<HTMLSelectElement>('#quick-feature');
  const explainBtn = $<HTMLButtonElement>('#explain');
  const seedInput = $<HTMLInputElement>('#seed');
  const results = $<HTMLElement>('#results');
  const status = $<HTMLElement>('#status');
  const exportBtn = $<HTMLButtonElement>('#export-history');

  function renderFeatures(): void {
    if (!store.schema) return;
    featureTable.replaceChildren();
    for (const f of store.schema.features) {
      const tr = document.createElement('tr');
      const name = document.createElement('td');
      name.textContent = `${f.name} (${f.kind})`;
      const cell = document.createElement('td');
      const inp = inputFor(f, store.instance[f.name] ?? '');
      inp.addEventListener('change', () => {
        store.setFeature(f.name, parseValue(f, inp.value));
      });
      cell.appendChild(inp);
      tr.append(name, cell);
      featureTable.appendChild(tr);
    }
  }

  function renderStatus(): void {
    explainBtn.disabled = store.busy || store.plafStatus.state === 'invalid';
    status.textContent = store.busy
      ? 'explaining…'
      : store.lastError
        ? `error: ${store.lastError}`
        : store.stale
          ? 'edited since last explain — results below are stale'
          : '';
    status.className = store.lastError ? 'error' : store.stale ? 'stale' : '';
    results.classList.toggle('stale', store.stale);

    switch (store.plafStatus.state) {
      case 'valid':
        plafStatus.textContent = `ok: ${store.plafStatus.rules} rules`;
        plafStatus.className = 'ok';
        break;
      case 'invalid':
        plafStatus.textContent =
          `line ${store.plafStatus.line}:${store.plafStatus.column} ` +
          store.plafStatus.message;
        plafStatus.className = 'error';
        break;
      default:
        plafStatus.textContent = '';
        plafStatus.className = '';
    }
  }

  function renderResults(): void {
    if (!store.result) return;
    const original =
      store.result.request.values ?? store.instance;
    results.innerHTML = renderDiff(
      original as Record<string, FeatureValue>,
      store.result.response,
      store.schema?.features.map((f) => f.name),
    );
    // each changed feature gets a one-click "freeze this" affordance
    for (const section of results.querySelectorAll('section.cf-card')) {
      for (const tr of section.querySelectorAll('tr.changed')) {
        const feat = tr.children[0].textContent ?? '';
        const btn = document.createElement('button');
        btn.textContent = 'mark immutable';
        btn.addEventListener('click', () => {
          store.setPlaf(applyQuickAction(store.plafText, 'immutable', feat));
          plafBox.value = store.plafText;
          void store.validatePlaf();
        });
        tr.appendChild(document.createElement('td')).appendChild(btn);
      }
    }
  }

  store.onChange(renderStatus);

  loadBtn.addEventListener('click', async () => {
    const row = Number(rowInput.value);
    await store.selectRow(row);
    renderFeatures();
  });

  plafBox.addEventListener('input', () => store.setPlaf(plafBox.value));
  plafBox.addEventListener('blur', () => void store.validatePlaf());

  for (const action of ['immutable', 'monotone-up', 'monotone-down'] as QuickAction[]) {
    $<HTMLButtonElement>(`#qa-${action}`).addEventListener('click', () => {
      const feat = quickFeature.value;
      if (!feat) return;
      store.setPlaf(applyQuickAction(store.plafText, action, feat));
      plafBox.value = store.plafText;
      void store.validatePlaf();
    });
  }

  seedInput.addEventListener('change', () => store.setSeed(Number(seedInput.value)));

  explainBtn.addEventListener('click', async () => {
    try {
      const shown = await store.explain();
      if (shown) renderResults();
    } catch {
      // store.lastError already set; status line shows it
    }
  });

  exportBtn.addEventListener('click', () => {
    const blob = new Blob([store.exportHistory()], { type: 'application/json' });
    const a = document.createElement('a');
    a.href = URL.createObjectURL(blob);
    a.download = 'cfx-history.json';
    a.click();
    URL.revokeObjectURL(a.href);
  });

  const schema = await store.loadSchema();
  plafBox.value = store.plafText;
  for (const f of schema.features) {
    const opt = document.createElement('option');
    opt.value = f.name;
    opt.textContent = f.name;
    quickFeature.appendChild(opt);
  }
  await store.selectRow(0);
  rowInput.value = '0';
  renderFeatures();
  renderStatus();
}

if (typeof document !== 'undefined') {
  void boot();
}
