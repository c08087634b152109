/** DOM rendering bound to the store. One full re-render per state change
 * keeps things simple at this scale. */

import { cumulativeBar, kHistogram, kVsMarginScatter } from "./charts.js";
import type { AppStore, SortKey } from "./store.js";
import type { PredictionRow } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className = "", text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

function fmtProb(p: number): string {
  return p.toFixed(4);
}

export function mount(root: HTMLElement, store: AppStore): void {
  store.subscribe(() => render(root, store));
  render(root, store);
}

function render(root: HTMLElement, store: AppStore): void {
  const state = store.state;
  root.replaceChildren();

  if (state.error) {
    root.append(el("div", "error-banner", `error: ${state.error}`));
  }

  root.append(renderModelPicker(store));
  if (state.modelId === null) {
    return;
  }

  const columns = el("div", "columns");
  columns.append(renderPredictions(store), renderInspector(store));
  root.append(columns);
  root.append(renderCharts(store));
}

function renderModelPicker(store: AppStore): HTMLElement {
  const state = store.state;
  const box = el("section", "panel");
  box.append(el("h2", "", "models"));
  if (state.models.length === 0) {
    box.append(el("p", "hint", "no models yet; train one via POST /models or the CLI"));
  }
  const list = el("div", "model-list");
  for (const model of state.models) {
    const acc = model.metrics.accuracy;
    const button = el(
      "button",
      model.model_id === state.modelId ? "model selected" : "model",
      `${model.model_id} (${model.feature_kind}, acc ${acc === null ? "n/a" : acc.toFixed(3)})`);
    button.addEventListener("click", () => void store.selectModel(model.model_id));
    list.append(button);
  }
  box.append(list);
  return box;
}

function renderPredictions(store: AppStore): HTMLElement {
  const state = store.state;
  const box = el("section", "panel");
  box.append(el("h2", "", `test predictions (tau=${state.tau})`));
  const table = el("table", "predictions");
  const head = el("tr");
  const headers: Array<[SortKey, string]> = [
    ["test_index", "#"], ["prob", "prob"], ["margin", "margin"], ["k", "k"],
  ];
  for (const [key, label] of headers) {
    const th = el("th", state.sortKey === key ? "sorted" : "");
    const arrow = state.sortKey === key ? (state.sortAscending ? " ↑" : " ↓") : "";
    th.textContent = label + arrow;
    th.addEventListener("click", () => store.sortBy(key));
    head.append(th);
  }
  head.append(el("th", "", "text"));
  table.append(head);
  for (const row of store.sortedPredictions()) {
    table.append(renderPredictionRow(store, row));
  }
  box.append(table);
  return box;
}

function renderPredictionRow(store: AppStore, row: PredictionRow): HTMLElement {
  const selected = store.state.selected?.test_index === row.test_index;
  const tr = el("tr", selected ? "row selected" : "row");
  tr.append(el("td", "", String(row.test_index)));
  tr.append(el("td", "", fmtProb(row.prob)));
  tr.append(el("td", "", row.margin.toFixed(3)));
  tr.append(el("td", "", row.k === null ? "?" : String(row.k)));
  tr.append(el("td", "text-cell", row.text ?? ""));
  tr.addEventListener("click", () => void store.selectInstance(row.test_index));
  return tr;
}

function renderInspector(store: AppStore): HTMLElement {
  const state = store.state;
  const box = el("section", "panel");
  box.append(el("h2", "", "contest a prediction"));
  if (state.selected === null) {
    box.append(el("p", "hint", "pick a test instance on the left"));
    return box;
  }
  const sel = state.selected;
  box.append(el("p", "", `test ${sel.test_index}: prob ${fmtProb(sel.prob)}, `
    + `label ${sel.label}, margin ${sel.margin.toFixed(3)}`));
  if (sel.text) {
    box.append(el("blockquote", "instance-text", sel.text));
  }

  const controls = el("div", "controls");
  const algorithm = el("select") as HTMLSelectElement;
  for (const name of ["iterative", "greedy"]) {
    const option = el("option", "", name) as HTMLOptionElement;
    option.value = name;
    algorithm.append(option);
  }
  algorithm.value = state.algorithm;
  algorithm.addEventListener("change", () =>
    store.setAlgorithm(algorithm.value as "greedy" | "iterative"));
  const fetchButton = el("button", "primary", "find flipset");
  fetchButton.addEventListener("click", () => void store.fetchFlipset());
  controls.append(algorithm, fetchButton);
  box.append(controls);

  box.append(renderFlipset(store));
  box.append(renderDisputePanel(store));
  box.append(renderTimeline(store));
  return box;
}

function renderFlipset(store: AppStore): HTMLElement {
  const state = store.state;
  const box = el("div", "flipset");
  if (!state.flipsetRequested) {
    return box;
  }
  if (state.flipset === null) {
    box.append(el("p", "hint", "searching…"));
    return box;
  }
  const flipset = state.flipset;
  if (!flipset.found) {
    box.append(el("p", "not-found",
      "no subset found: removals cannot push this prediction across the threshold"));
    return box;
  }
  box.append(el("h3", "", `flipset: k=${flipset.k} (${flipset.algorithm}, `
    + `${flipset.outer_passes} pass${flipset.outer_passes > 1 ? "es" : ""}), `
    + `estimated ${fmtProb(flipset.original_prob)} → ${fmtProb(flipset.estimated_prob)}`));

  const bar = el("div", "cumulative");
  bar.innerHTML = cumulativeBar(store.cumulativeTrace(), flipset.original_prob, flipset.tau);
  box.append(bar);

  const disputed = new Set(store.disputed());
  const list = el("ul", "members");
  for (const member of flipset.members) {
    const item = el("li", disputed.has(member.index) ? "member disputed" : "member");
    const checkbox = el("input") as HTMLInputElement;
    checkbox.type = "checkbox";
    checkbox.checked = disputed.has(member.index);
    checkbox.addEventListener("change", () => void store.toggleDispute(member.index));
    item.append(checkbox);
    item.append(el("span", "delta", member.delta.toExponential(2)));
    item.append(el("span", "label", `y=${member.label}`));
    item.append(el("span", "member-text", member.text ?? `train[${member.index}]`));
    list.append(item);
  }
  box.append(list);

  const allButton = el("button", "", "dispute all members");
  allButton.addEventListener("click", () => void store.disputeAllMembers());
  box.append(allButton);
  return box;
}

function renderDisputePanel(store: AppStore): HTMLElement {
  const state = store.state;
  const box = el("div", "dispute-panel");
  const disputed = store.disputed();
  box.append(el("h3", "", `dispute basket (${disputed.length})`));
  if (disputed.length > 0) {
    box.append(el("p", "basket", disputed.join(", ")));
    const clear = el("button", "", "clear");
    clear.addEventListener("click", () => void store.clearDisputes());
    box.append(clear);
  }
  const run = el("button", "primary", state.whatifPending
    ? "retraining…" : "what if these were removed?") as HTMLButtonElement;
  run.disabled = !store.canWhatIf();
  run.addEventListener("click", () => void store.runWhatIf());
  box.append(run);
  if (state.whatifPending) {
    const cancel = el("button", "", "cancel");
    cancel.addEventListener("click", () => store.cancelWhatIf());
    box.append(cancel);
  }
  if (state.banner !== null) {
    const banner = state.banner;
    box.append(el("div", banner.flipped ? "banner flipped" : "banner not-flipped",
      banner.flipped
        ? `prediction FLIPPED: retrained probability ${fmtProb(banner.retrainedProb)}`
        : `not flipped: retrained probability ${fmtProb(banner.retrainedProb)}`));
  }
  return box;
}

function renderTimeline(store: AppStore): HTMLElement {
  const box = el("div", "timeline");
  box.append(el("h3", "", "what-if timeline"));
  const entries = store.timeline();
  if (entries.length === 0) {
    box.append(el("p", "hint", "no what-if runs yet"));
    return box;
  }
  const list = el("ol");
  for (const entry of entries) {
    list.append(el("li", entry.flipped ? "flipped" : "",
      `#${entry.seq}: removed ${entry.disputed.length} point(s) → `
      + `${fmtProb(entry.retrained_prob)} (${entry.flipped ? "flipped" : "not flipped"})`));
  }
  box.append(list);
  return box;
}

function renderCharts(store: AppStore): HTMLElement {
  const box = el("section", "panel charts");
  box.append(el("h2", "", "experiment report"));
  const experiment = store.state.experiment;
  const wrap = el("div", "chart-row");
  const hist = el("div");
  hist.innerHTML = kHistogram(experiment?.k_values ?? []);
  const scatter = el("div");
  scatter.innerHTML = kVsMarginScatter(experiment?.k_vs_confidence ?? []);
  wrap.append(hist, scatter);
  box.append(wrap);
  if (experiment) {
    box.append(el("p", "hint",
      `${experiment.dataset_name} (${experiment.algorithm}): found `
      + `${(experiment.found_rate * 100).toFixed(1)}%, flipped `
      + `${(experiment.flip_rate * 100).toFixed(1)}% of ${experiment.n_test} test points`));
  }
  return box;
}
