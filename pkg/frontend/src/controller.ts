/**
 * Owns the one mutable session reference and ties it to the service
 * client. Session math stays in session.ts; this layer adds validation,
 * the single-in-flight guard, and the network calls.
 */

import { ServiceClient } from "./api.js";
import {
  appendStep,
  canRedo,
  canUndo,
  createSession,
  currentImage,
  EditSession,
  jumpTo,
  markPending,
  redo,
  undo,
} from "./session.js";

export class SessionController {
  session: EditSession;

  constructor(
    private readonly client: ServiceClient,
    uploadImage: string,
  ) {
    this.session = createSession(uploadImage);
  }

  /**
   * Send the current image with the instruction and append the response
   * as a new step. Empty instructions and concurrent submits are rejected
   * locally; no request goes out, and the history is untouched.
   */
  async submitEdit(
    modelId: string,
    instruction: string,
    mode: "fusion" | "argmax" = "fusion",
  ): Promise<EditSession> {
    const text = instruction.trim();
    if (!text) throw new Error("instruction text must be non-empty");
    if (this.session.pending) throw new Error("an edit is already in flight");
    if (!modelId) throw new Error("select a model first");

    this.session = markPending(this.session, true);
    try {
      const res = await this.client.edit({
        model: modelId,
        imageBase64: currentImage(this.session),
        text,
        mode,
      });
      this.session = appendStep(this.session, {
        image: res.imageBase64,
        instruction: text,
        modelId: res.model,
        weights: res.weights,
      });
    } catch (err) {
      // service rejected the edit; the history is exactly as it was
      this.session = markPending(this.session, false);
      throw err;
    }
    return this.session;
  }

  /** One-hot application of a probed filter: the preview becomes a step. */
  applyProbePreview(
    modelId: string,
    k: number,
    branches: number,
    previewImage: string,
  ): EditSession {
    const weights = Array.from({ length: branches }, (_, i) => (i === k ? 1 : 0));
    this.session = appendStep(this.session, {
      image: previewImage,
      instruction: `apply filter ${k} only`,
      modelId,
      weights,
    });
    return this.session;
  }

  undo(): EditSession {
    this.session = undo(this.session);
    return this.session;
  }

  redo(): EditSession {
    this.session = redo(this.session);
    return this.session;
  }

  jumpTo(index: number): EditSession {
    this.session = jumpTo(this.session, index);
    return this.session;
  }

  get canUndo(): boolean {
    return canUndo(this.session);
  }

  get canRedo(): boolean {
    return canRedo(this.session);
  }
}
