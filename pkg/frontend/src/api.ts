// Client for the screening service HTTP API.

export interface InputGeometry {
  width: number;
  height: number;
}

export interface PredictResponse {
  label: string;
  confidence: number;
  distribution: number[];
  model_digest: string;
  input_geometry: InputGeometry;
}

export interface ModelCard {
  model_digest: string;
  classes: string[];
  input_side: number;
}

/** Service answered with an error status (4xx/5xx). */
export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** Request never reached the service. */
export class ConnectionError extends Error {
  constructor() {
    super("connection error — is the screening service running?");
  }
}

async function parseError(res: Response): Promise<ApiError> {
  let message = `request failed (${res.status})`;
  try {
    const body = await res.json();
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    // non-JSON error body: keep the generic message
  }
  return new ApiError(res.status, message);
}

export async function predictImage(
  baseUrl: string,
  image: Blob,
  filename: string,
  tier?: number,
): Promise<PredictResponse> {
  const form = new FormData();
  form.append("image", image, filename);
  if (tier !== undefined) form.append("tier", String(tier));
  let res: Response;
  try {
    res = await fetch(`${baseUrl}/api/predict`, { method: "POST", body: form });
  } catch {
    throw new ConnectionError();
  }
  if (!res.ok) throw await parseError(res);
  return (await res.json()) as PredictResponse;
}

export async function fetchModelCard(baseUrl: string): Promise<ModelCard> {
  let res: Response;
  try {
    res = await fetch(`${baseUrl}/api/model`);
  } catch {
    throw new ConnectionError();
  }
  if (!res.ok) throw await parseError(res);
  return (await res.json()) as ModelCard;
}
