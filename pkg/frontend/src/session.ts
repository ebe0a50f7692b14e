/**
 * Pure editing-session state: an ordered history of steps plus a cursor.
 * Step 0 is always the original upload; every later step's input was the
 * previous step's output, so walking the history replays the whole chain.
 * All operations return fresh session objects; nothing here touches the DOM
 * or the network.
 */

export interface EditStep {
  /** PNG base64 of this step's output image. */
  image: string;
  /** Instruction that produced the step; empty for the upload itself. */
  instruction: string;
  /** Model that served the edit; empty for the upload. */
  modelId: string;
  /** Branch weights reported by the service, when the model has branches. */
  weights: number[] | null;
}

export interface EditSession {
  steps: EditStep[];
  /** Index of the step currently shown; submits build on this step. */
  currentIndex: number;
  /** True while an edit request is in flight; submits are rejected. */
  pending: boolean;
}

export function createSession(uploadImage: string): EditSession {
  if (!uploadImage) throw new Error("session needs an uploaded image");
  return {
    steps: [{ image: uploadImage, instruction: "", modelId: "", weights: null }],
    currentIndex: 0,
    pending: false,
  };
}

export function currentStep(session: EditSession): EditStep {
  const step = session.steps[session.currentIndex];
  if (!step) throw new Error(`corrupt session: no step at ${session.currentIndex}`);
  return step;
}

/** Previous step's output; what a submit must send to the service. */
export function currentImage(session: EditSession): string {
  return currentStep(session).image;
}

export function canUndo(session: EditSession): boolean {
  return session.currentIndex > 0;
}

export function canRedo(session: EditSession): boolean {
  return session.currentIndex < session.steps.length - 1;
}

export function undo(session: EditSession): EditSession {
  if (!canUndo(session)) return session;
  return { ...session, currentIndex: session.currentIndex - 1 };
}

export function redo(session: EditSession): EditSession {
  if (!canRedo(session)) return session;
  return { ...session, currentIndex: session.currentIndex + 1 };
}

export function jumpTo(session: EditSession, index: number): EditSession {
  if (index < 0 || index >= session.steps.length) {
    throw new Error(`history index ${index} out of range`);
  }
  return { ...session, currentIndex: index };
}

export function markPending(session: EditSession, pending: boolean): EditSession {
  return { ...session, pending };
}

/**
 * Append a completed step after the cursor, dropping any forward history:
 * submitting from an earlier step branches the exploration.
 */
export function appendStep(session: EditSession, step: EditStep): EditSession {
  const steps = session.steps.slice(0, session.currentIndex + 1);
  steps.push(step);
  return { steps, currentIndex: steps.length - 1, pending: false };
}

/** Before/after pair for the comparison view of the current step. */
export function comparison(session: EditSession): { before: string; after: string } {
  const index = session.currentIndex;
  const after = currentStep(session).image;
  const before = index === 0 ? after : session.steps[index - 1]!.image;
  return { before, after };
}
