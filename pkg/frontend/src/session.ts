// Per-browser-session scan state. History is append-only and nothing is
// persisted anywhere; image bytes live only as long as their preview.

import { PredictResponse } from "./api.js";

export interface ScanAttempt {
  timestamp: string;
  tier?: number;
  response: PredictResponse;
}

export class ScanSession {
  private attempts: ScanAttempt[] = [];

  record(response: PredictResponse, tier?: number, now: () => Date = () => new Date()): ScanAttempt {
    const attempt: ScanAttempt = {
      timestamp: now().toISOString(),
      tier,
      response,
    };
    this.attempts.push(attempt);
    return attempt;
  }

  get history(): readonly ScanAttempt[] {
    return this.attempts;
  }
}

const ACCEPTED_EXTENSIONS = [".png", ".ppm"];
const ACCEPTED_TYPES = ["image/png", "image/x-portable-pixmap"];

export const UNSUPPORTED_FILE_MESSAGE =
  "unsupported file type — choose a PNG or PPM image";

export function isSupportedImage(name: string, type: string): boolean {
  if (ACCEPTED_TYPES.includes(type)) return true;
  const lower = name.toLowerCase();
  return ACCEPTED_EXTENSIONS.some((ext) => lower.endsWith(ext));
}
