// Browser entry point: wires the DOM to the controller.
//
// Every control is a native button or input (keyboard-operable by default),
// and results land in an aria-live region as well as the speech queue.

import { BirrClient } from "./api.js";
import type { PredictionResponse } from "./api.js";
import { AppController } from "./controller.js";
import type { View } from "./controller.js";
import { Announcer, browserSpeechPort, nullSpeechPort } from "./speech.js";
import type { AnnouncementState } from "./state.js";

function serviceBaseUrl(): string {
  const param = new URLSearchParams(window.location.search).get("service");
  if (param) {
    return param;
  }
  const injected = (window as { BIRR_SERVICE_URL?: string }).BIRR_SERVICE_URL;
  return injected ?? "";
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const PHASE_TEXT: Record<AnnouncementState["phase"], string> = {
  idle: "Ready. Take or choose a photo of a banknote.",
  capturing: "Capturing…",
  classifying: "Classifying…",
  announced: "Result ready.",
  error: "Something went wrong.",
};

class DomView implements View {
  private status = el<HTMLParagraphElement>("status");
  private resultAmharic = el<HTMLDivElement>("result-amharic");
  private resultLatin = el<HTMLDivElement>("result-latin");
  private confidence = el<HTMLDivElement>("result-confidence");
  private live = el<HTMLDivElement>("live-region");

  showState(snapshot: AnnouncementState): void {
    this.status.textContent = PHASE_TEXT[snapshot.phase];
  }

  showResult(response: PredictionResponse, confidence: number): void {
    this.resultAmharic.textContent = response.display_amharic;
    this.resultLatin.textContent = response.display_latin;
    this.confidence.textContent = `confidence ${(confidence * 100).toFixed(1)}%`;
    this.live.textContent =
      `${response.display_latin}, confidence ${(confidence * 100).toFixed(0)} percent`;
    document.body.dataset.phase = "announced";
  }

  showError(message: string): void {
    this.resultAmharic.textContent = "";
    this.resultLatin.textContent = message;
    this.confidence.textContent = "";
    this.live.textContent = message;
    document.body.dataset.phase = "error";
  }
}

async function snapshotBlob(video: HTMLVideoElement): Promise<Blob> {
  const canvas = document.createElement("canvas");
  canvas.width = video.videoWidth || 640;
  canvas.height = video.videoHeight || 480;
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    throw new Error("canvas 2d context unavailable");
  }
  ctx.drawImage(video, 0, 0, canvas.width, canvas.height);
  return new Promise((resolve, reject) => {
    canvas.toBlob(
      blob => (blob ? resolve(blob) : reject(new Error("capture failed"))),
      "image/png");
  });
}

function boot(): void {
  const client = new BirrClient(serviceBaseUrl());
  const synth = window.speechSynthesis;
  const announcer = new Announcer(
    synth ? browserSpeechPort(synth) : nullSpeechPort());
  const view = new DomView();
  const controller = new AppController(client, announcer, view);

  const status = el<HTMLParagraphElement>("status");
  const video = el<HTMLVideoElement>("camera-preview");
  const cameraButton = el<HTMLButtonElement>("start-camera");
  const captureButton = el<HTMLButtonElement>("capture");
  const fileInput = el<HTMLInputElement>("file-input");

  client.health()
    .then(health => {
      status.textContent =
        `${PHASE_TEXT.idle} (service ok, model ${health.model_id})`;
    })
    .catch(() => {
      status.textContent = "Classification service unreachable.";
    });

  cameraButton.addEventListener("click", async () => {
    try {
      const stream = await navigator.mediaDevices.getUserMedia({
        video: { facingMode: "environment" },
      });
      video.srcObject = stream;
      video.hidden = false;
      await video.play();
      captureButton.disabled = false;
      cameraButton.disabled = true;
    } catch {
      status.textContent = "Camera unavailable; use the file picker instead.";
    }
  });

  captureButton.addEventListener("click", async () => {
    try {
      const blob = await snapshotBlob(video);
      await controller.submit(blob);
    } catch (err) {
      view.showError(err instanceof Error ? err.message : String(err));
    }
  });

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (file) {
      await controller.submit(file);
      fileInput.value = "";
    }
  });
}

boot();
