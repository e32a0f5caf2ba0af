// Page wiring: pick or capture a photo, preview it, scan it, compare tiers.

import { predictImage } from "./api.js";
import {
  actionableMessage,
  clearError,
  renderCompareTable,
  renderError,
  renderHistory,
  renderResult,
  CompareRow,
} from "./render.js";
import { isSupportedImage, ScanSession, UNSUPPORTED_FILE_MESSAGE } from "./session.js";
import { downscaleToPlan, planAllTiers } from "./tiers.js";

// Same-origin by default; ?api=http://host:port points at a service running
// elsewhere (start it with --cors).
const BASE_URL =
  typeof location !== "undefined"
    ? new URLSearchParams(location.search).get("api") ?? ""
    : "";

const session = new ScanSession();
let currentFile: File | null = null;
let previewUrl: string | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBusy(busy: boolean): void {
  el<HTMLButtonElement>("scan-button").disabled = busy || !currentFile;
  el<HTMLButtonElement>("compare-button").disabled = busy || !currentFile;
}

function imageDimensions(file: Blob): Promise<{ width: number; height: number }> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    const url = URL.createObjectURL(file);
    img.onload = () => {
      URL.revokeObjectURL(url);
      resolve({ width: img.naturalWidth, height: img.naturalHeight });
    };
    img.onerror = () => {
      URL.revokeObjectURL(url);
      reject(new Error("preview failed"));
    };
    img.src = url;
  });
}

function onFileChosen(): void {
  const input = el<HTMLInputElement>("file-input");
  const errors = el<HTMLDivElement>("errors");
  const file = input.files?.[0] ?? null;
  clearError(errors);
  if (previewUrl) {
    URL.revokeObjectURL(previewUrl);
    previewUrl = null;
  }
  currentFile = null;
  const preview = el<HTMLImageElement>("preview");
  preview.removeAttribute("src");
  if (!file) {
    setBusy(false);
    return;
  }
  if (!isSupportedImage(file.name, file.type)) {
    renderError(errors, UNSUPPORTED_FILE_MESSAGE);
    setBusy(false);
    return;
  }
  currentFile = file;
  previewUrl = URL.createObjectURL(file);
  preview.src = previewUrl;
  setBusy(false);
}

async function onScan(): Promise<void> {
  if (!currentFile) return;
  const errors = el<HTMLDivElement>("errors");
  clearError(errors);
  setBusy(true);
  try {
    const tierField = el<HTMLSelectElement>("tier-select").value;
    const tier = tierField ? Number(tierField) : undefined;
    const response = await predictImage(BASE_URL, currentFile, currentFile.name, tier);
    renderResult(el("result"), response, tier);
    session.record(response, tier);
    renderHistory(el("history"), session);
  } catch (err) {
    renderError(errors, actionableMessage(err));
  } finally {
    setBusy(false);
  }
}

async function onCompare(): Promise<void> {
  if (!currentFile) return;
  const errors = el<HTMLDivElement>("errors");
  clearError(errors);
  setBusy(true);
  try {
    const { width, height } = await imageDimensions(currentFile);
    const plans = planAllTiers(width, height);
    const rows: CompareRow[] = await Promise.all(
      plans.map(async (plan): Promise<CompareRow> => {
        try {
          const payload = await downscaleToPlan(currentFile!, plan);
          const name = plan.native ? currentFile!.name : `tier${plan.tier}.png`;
          const response = await predictImage(BASE_URL, payload, name);
          return { plan, response };
        } catch (err) {
          return { plan, error: actionableMessage(err) };
        }
      }),
    );
    renderCompareTable(el("compare"), rows);
  } catch (err) {
    renderError(errors, actionableMessage(err));
  } finally {
    setBusy(false);
  }
}

export function init(): void {
  el<HTMLInputElement>("file-input").addEventListener("change", onFileChosen);
  el<HTMLButtonElement>("scan-button").addEventListener("click", () => void onScan());
  el<HTMLButtonElement>("compare-button").addEventListener("click", () => void onCompare());
  setBusy(false);
}

if (typeof document !== "undefined" && document.getElementById("file-input")) {
  init();
}
