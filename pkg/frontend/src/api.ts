/**
 * Typed client for the editing service. Every call goes through an
 * injectable fetch so tests can point the UI at a stub server.
 */

export interface ModelInfo {
  id: string;
  kind: "bucket" | "e2e" | "filterbank" | "identity";
  K: number;
}

export interface EditRequest {
  model: string;
  imageBase64: string;
  text: string;
  mode?: "fusion" | "argmax";
}

export interface EditResponse {
  imageBase64: string;
  weights: number[] | null;
  model: string;
  milliseconds: number;
}

export interface ProbeResponse {
  imageBase64: string;
  model: string;
  k: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Error carrying the service's structured code so the UI can explain itself. */
export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

async function toServiceError(res: Response): Promise<ServiceError> {
  let code = "unknown";
  let message = `service responded with status ${res.status}`;
  try {
    const body = await res.json();
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ServiceError(res.status, code, message);
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!res.ok) throw await toServiceError(res);
    return (await res.json()) as T;
  }

  async health(): Promise<boolean> {
    const res = await this.fetchImpl(`${this.baseUrl}/health`);
    return res.ok;
  }

  async listModels(): Promise<ModelInfo[]> {
    const res = await this.fetchImpl(`${this.baseUrl}/models`);
    if (!res.ok) throw await toServiceError(res);
    return (await res.json()) as ModelInfo[];
  }

  async edit(req: EditRequest): Promise<EditResponse> {
    const body = {
      model: req.model,
      image_base64: req.imageBase64,
      text: req.text,
      options: { mode: req.mode ?? "fusion", return_weights: true },
    };
    const raw = await this.post<{
      image_base64: string;
      weights: number[] | null;
      model: string;
      milliseconds: number;
    }>("/edit", body);
    return {
      imageBase64: raw.image_base64,
      weights: raw.weights,
      model: raw.model,
      milliseconds: raw.milliseconds,
    };
  }

  async probe(model: string, imageBase64: string, k: number): Promise<ProbeResponse> {
    const raw = await this.post<{ image_base64: string; model: string; k: number }>(
      "/probe",
      { model, image_base64: imageBase64, k },
    );
    return { imageBase64: raw.image_base64, model: raw.model, k: raw.k };
  }
}

/** Data URL for an in-session PNG, for <img> elements and downloads. */
export function pngDataUrl(imageBase64: string): string {
  return `data:image/png;base64,${imageBase64}`;
}
