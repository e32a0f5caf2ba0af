// DOM rendering. Every number shown comes straight from the API response:
// percentages are rounded to one decimal for display and carry the raw
// value in the element's tooltip.

import { ApiError, ConnectionError, PredictResponse } from "./api.js";
import { ScanSession } from "./session.js";
import { TierPlan } from "./tiers.js";

export const CLASS_NAMES = ["cancerous", "non_cancerous", "negative"] as const;

export const RETAKE_MESSAGE = "image unreadable — retake";
export const UNSTABLE_LABEL_HINT =
  "label changes at low resolution — retake at higher resolution";

export function formatPercent(value: number): string {
  return `${(value * 100).toFixed(1)}%`;
}

function percentSpan(doc: Document, value: number, className: string): HTMLElement {
  const span = doc.createElement("span");
  span.className = className;
  span.textContent = formatPercent(value);
  span.title = String(value); // raw API value, untouched
  return span;
}

export function actionableMessage(err: unknown): string {
  if (err instanceof ConnectionError) return err.message;
  if (err instanceof ApiError) {
    if (err.status === 400) return `${RETAKE_MESSAGE} (${err.message})`;
    if (err.status === 503) return "model is still loading — try again shortly";
    return `service error ${err.status}: ${err.message}`;
  }
  return String(err);
}

export function renderError(container: HTMLElement, message: string): void {
  container.innerHTML = "";
  const banner = container.ownerDocument.createElement("div");
  banner.className = "banner banner-error";
  banner.textContent = message;
  container.appendChild(banner);
}

export function clearError(container: HTMLElement): void {
  container.innerHTML = "";
}

export function renderResult(
  container: HTMLElement,
  response: PredictResponse,
  tier?: number,
): void {
  const doc = container.ownerDocument;
  container.innerHTML = "";

  const card = doc.createElement("div");
  card.className = "result-card";

  const label = doc.createElement("div");
  label.className = `label label-${response.label}`;
  label.textContent = response.label;
  card.appendChild(label);

  const confidence = doc.createElement("div");
  confidence.className = "confidence";
  confidence.append("confidence ");
  confidence.appendChild(percentSpan(doc, response.confidence, "confidence-value"));
  card.appendChild(confidence);

  if (tier !== undefined) {
    const tierNote = doc.createElement("div");
    tierNote.className = "tier-note";
    tierNote.textContent = `degraded to ${tier}p before scanning`;
    card.appendChild(tierNote);
  }

  const dist = doc.createElement("ul");
  dist.className = "distribution";
  response.distribution.forEach((p, i) => {
    const item = doc.createElement("li");
    const name = doc.createElement("span");
    name.className = "dist-name";
    name.textContent = CLASS_NAMES[i] ?? `class ${i}`;
    item.appendChild(name);
    item.appendChild(percentSpan(doc, p, "dist-value"));
    const bar = doc.createElement("div");
    bar.className = "dist-bar";
    bar.style.width = `${Math.round(p * 100)}%`;
    item.appendChild(bar);
    dist.appendChild(item);
  });
  card.appendChild(dist);

  const geometry = doc.createElement("div");
  geometry.className = "geometry";
  geometry.textContent =
    `received ${response.input_geometry.width}x${response.input_geometry.height}`;
  card.appendChild(geometry);

  container.appendChild(card);
}

export function renderHistory(container: HTMLElement, session: ScanSession): void {
  const doc = container.ownerDocument;
  container.innerHTML = "";
  const list = doc.createElement("ol");
  list.className = "history";
  for (const attempt of session.history) {
    const item = doc.createElement("li");
    item.className = "history-entry";
    const when = doc.createElement("time");
    when.textContent = attempt.timestamp;
    item.appendChild(when);
    const what = doc.createElement("span");
    const tierText = attempt.tier !== undefined ? ` @${attempt.tier}p` : "";
    what.textContent = ` ${attempt.response.label}${tierText} `;
    item.appendChild(what);
    item.appendChild(
      percentSpan(doc, attempt.response.confidence, "history-confidence"),
    );
    list.appendChild(item);
  }
  container.appendChild(list);
}

export interface CompareRow {
  plan: TierPlan;
  response?: PredictResponse;
  error?: string;
}

export function renderCompareTable(container: HTMLElement, rows: CompareRow[]): void {
  const doc = container.ownerDocument;
  container.innerHTML = "";

  const table = doc.createElement("table");
  table.className = "compare-table";
  const head = doc.createElement("tr");
  for (const title of ["tier", "geometry", "label", "confidence"]) {
    const th = doc.createElement("th");
    th.textContent = title;
    head.appendChild(th);
  }
  table.appendChild(head);

  for (const row of rows) {
    const tr = doc.createElement("tr");
    tr.className = "compare-row";

    const tierCell = doc.createElement("td");
    tierCell.textContent = `${row.plan.tier}p`;
    tr.appendChild(tierCell);

    const geomCell = doc.createElement("td");
    geomCell.textContent = row.plan.native
      ? `${row.plan.width}x${row.plan.height} — native (not upsampled)`
      : `${row.plan.width}x${row.plan.height}`;
    tr.appendChild(geomCell);

    const labelCell = doc.createElement("td");
    const confCell = doc.createElement("td");
    if (row.response) {
      labelCell.textContent = row.response.label;
      labelCell.className = `label-${row.response.label}`;
      confCell.appendChild(percentSpan(doc, row.response.confidence, "compare-confidence"));
    } else {
      labelCell.textContent = "failed";
      labelCell.className = "compare-error";
      confCell.textContent = row.error ?? "request failed";
    }
    tr.appendChild(labelCell);
    tr.appendChild(confCell);
    table.appendChild(tr);
  }
  container.appendChild(table);

  const labels = new Set(
    rows.filter((r) => r.response).map((r) => r.response!.label),
  );
  if (labels.size > 1) {
    const hint = doc.createElement("div");
    hint.className = "banner banner-hint";
    hint.textContent = UNSTABLE_LABEL_HINT;
    container.appendChild(hint);
  }
}
