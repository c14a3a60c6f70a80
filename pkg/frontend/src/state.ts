// Announcement state machine for the capture -> classify -> announce flow.

import type { PredictionResponse } from "./api.js";

export type Phase = "idle" | "capturing" | "classifying" | "announced" | "error";

export interface AnnouncementState {
  phase: Phase;
  lastResponse: PredictionResponse | null;
  errorMessage: string | null;
}

export function initialState(): AnnouncementState {
  return { phase: "idle", lastResponse: null, errorMessage: null };
}

export function startCapture(state: AnnouncementState): AnnouncementState {
  return { ...state, phase: "capturing", errorMessage: null };
}

export function startClassify(state: AnnouncementState): AnnouncementState {
  return { ...state, phase: "classifying", errorMessage: null };
}

export function announced(state: AnnouncementState,
                          response: PredictionResponse): AnnouncementState {
  if (!response) {
    throw new Error("announced phase requires a response");
  }
  return { phase: "announced", lastResponse: response, errorMessage: null };
}

export function failed(state: AnnouncementState, message: string): AnnouncementState {
  return { ...state, phase: "error", errorMessage: message };
}

/** The announced phase must always carry the response it announced. */
export function isValid(state: AnnouncementState): boolean {
  if (state.phase === "announced") {
    return state.lastResponse !== null;
  }
  return true;
}
