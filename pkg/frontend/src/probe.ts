/**
 * Probe-panel view-model. Single-filter probes only mean something for
 * filter-bank models, so the panel is gated on the selected model's kind
 * and carries a human-readable reason while disabled.
 */

import { ModelInfo, ServiceClient } from "./api.js";

export interface ProbePreview {
  k: number;
  image: string;
}

export interface ProbeAvailability {
  enabled: boolean;
  /** Explanation shown in place of the grid while the panel is disabled. */
  reason: string | null;
}

export function probeAvailability(model: ModelInfo | null): ProbeAvailability {
  if (!model) {
    return { enabled: false, reason: "select a model to probe its filters" };
  }
  if (model.kind !== "filterbank") {
    return {
      enabled: false,
      reason: `model "${model.id}" is a ${model.kind} model; only filter-bank models expose per-filter probes`,
    };
  }
  return { enabled: true, reason: null };
}

/**
 * Fetch one preview per filter for the current image, k = 0..K-1 in
 * order. Callers gate on probeAvailability first; probing a model
 * without branches is rejected here as a safety net.
 */
export async function loadProbePreviews(
  client: ServiceClient,
  model: ModelInfo,
  imageBase64: string,
): Promise<ProbePreview[]> {
  const availability = probeAvailability(model);
  if (!availability.enabled) {
    throw new Error(availability.reason ?? "probing unavailable");
  }
  const previews: ProbePreview[] = [];
  for (let k = 0; k < model.K; k += 1) {
    const res = await client.probe(model.id, imageBase64, k);
    previews.push({ k, image: res.imageBase64 });
  }
  return previews;
}
