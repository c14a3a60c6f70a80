// Orchestrates capture -> classify -> display + announce.
//
// A single classify request is in flight at any time; captures arriving while
// one is running queue up and are processed strictly in order, each producing
// exactly one utterance.

import { BirrClient, ServiceError, topConfidence } from "./api.js";
import type { PredictionResponse } from "./api.js";
import { Announcer } from "./speech.js";
import * as state from "./state.js";
import type { AnnouncementState } from "./state.js";

export interface View {
  /** Reflect the current phase (for status text and control disabling). */
  showState(snapshot: AnnouncementState): void;
  /** Large-type result: label display strings plus argmax confidence. */
  showResult(response: PredictionResponse, confidence: number): void;
  /** Visible error banner; always paired with an audible announcement. */
  showError(message: string): void;
}

export interface ErrorPhrases {
  unrecognized: { preferred: string; fallback: string };
  network: { preferred: string; fallback: string };
}

export const DEFAULT_ERROR_PHRASES: ErrorPhrases = {
  unrecognized: {
    preferred: "አልታወቀም፣ እባክዎ እንደገና ይሞክሩ",
    fallback: "Not recognized, try again",
  },
  network: {
    preferred: "አገልግሎቱ አልተገኘም",
    fallback: "Service unreachable",
  },
};

export class AppController {
  private snapshot: AnnouncementState = state.initialState();
  private queue: Blob[] = [];
  private processing = false;

  constructor(
    private readonly client: BirrClient,
    private readonly announcer: Announcer,
    private readonly view: View,
    private readonly phrases: ErrorPhrases = DEFAULT_ERROR_PHRASES,
  ) {}

  get current(): AnnouncementState {
    return this.snapshot;
  }

  /** Queue one captured image; returns when the queue has drained. */
  async submit(image: Blob | Uint8Array<ArrayBuffer>): Promise<void> {
    const blob = image instanceof Blob ? image : new Blob([image]);
    this.queue.push(blob);
    this.transition(state.startCapture(this.snapshot));
    if (this.processing) {
      return;
    }
    this.processing = true;
    try {
      while (this.queue.length > 0) {
        const next = this.queue.shift()!;
        await this.classifyOne(next);
      }
    } finally {
      this.processing = false;
    }
  }

  /** Interrupting capture cancels whatever announcements are still pending. */
  interrupt(): void {
    this.queue = [];
    this.announcer.cancelPending();
    this.transition(state.initialState());
  }

  private async classifyOne(blob: Blob): Promise<void> {
    this.transition(state.startClassify(this.snapshot));
    try {
      const response = await this.client.classify(blob);
      this.transition(state.announced(this.snapshot, response));
      this.view.showResult(response, topConfidence(response));
      // exactly one utterance per result; a deliberate re-scan of the same
      // note speaks again
      this.announcer.announce(response.display_amharic, response.display_latin);
    } catch (err) {
      const phrase = err instanceof ServiceError && err.kind === "unrecognized"
        ? this.phrases.unrecognized
        : this.phrases.network;
      const message = err instanceof Error ? err.message : String(err);
      this.transition(state.failed(this.snapshot, message));
      this.view.showError(phrase.fallback);
      this.announcer.announce(phrase.preferred, phrase.fallback);
    }
  }

  private transition(next: AnnouncementState): void {
    if (!state.isValid(next)) {
      throw new Error(`invalid state transition into ${next.phase}`);
    }
    this.snapshot = next;
    this.view.showState(next);
  }
}
