import assert from "node:assert/strict";
import { test } from "node:test";

import { BirrClient } from "../src/api.js";
import { AppController } from "../src/controller.js";
import { Announcer } from "../src/speech.js";
import { RecordingView, StubSpeechPort, jsonResponse, sampleResponse,
         scriptedFetch } from "./stubs.js";

function harness(script: Parameters<typeof scriptedFetch>[0]) {
  const { fn, calls } = scriptedFetch(script);
  const port = new StubSpeechPort();
  const view = new RecordingView();
  const controller = new AppController(
    new BirrClient("http://svc", fn), new Announcer(port), view);
  return { controller, port, view, calls };
}

const IMAGE = new Uint8Array([0x89, 0x50, 0x4e, 0x47]);

test("successful classify renders label + confidence and speaks once", async () => {
  const expected = sampleResponse("ETB_50", 0.97);
  const { controller, port, view } = harness(() => jsonResponse(expected));
  await controller.submit(IMAGE);

  assert.equal(view.results.length, 1);
  assert.equal(view.results[0].response.label_code, "ETB_50");
  assert.ok(Math.abs(view.results[0].confidence - 0.97) < 1e-12);
  assert.deepEqual(port.spoken.map(u => u.text), ["ሃምሳ ብር"]);
  assert.equal(controller.current.phase, "announced");
  assert.equal(controller.current.lastResponse?.label_code, "ETB_50");
});

test("two rapid captures produce exactly two utterances in order", async () => {
  let call = 0;
  const { controller, port, view, calls } = harness(() => {
    call += 1;
    return jsonResponse(sampleResponse(call === 1 ? "ETB_5" : "ETB_200", 0.9));
  });
  // fire both without awaiting the first: the second must queue behind the
  // single in-flight request
  const first = controller.submit(IMAGE);
  const second = controller.submit(IMAGE);
  await Promise.all([first, second]);

  assert.equal(calls.length, 2);
  assert.equal(view.results.length, 2);
  assert.equal(view.results[0].response.label_code, "ETB_5");
  assert.equal(view.results[1].response.label_code, "ETB_200");
  assert.equal(port.spoken.length, 2);
});

test("network failure is announced audibly and shown visually", async () => {
  const { controller, port, view } = harness(() => new Error("refused"));
  await controller.submit(IMAGE);

  assert.equal(controller.current.phase, "error");
  assert.equal(view.errors.length, 1);
  assert.match(view.errors[0], /unreachable/i);
  assert.equal(port.spoken.length, 1);
  assert.match(port.spoken[0].text, /አገልግሎቱ/);
});

test("422 becomes the not-recognized announcement", async () => {
  const { controller, port, view } = harness(() =>
    jsonResponse({ error: "undecodable" }, 422));
  await controller.submit(IMAGE);

  assert.equal(controller.current.phase, "error");
  assert.equal(view.errors.length, 1);
  assert.match(view.errors[0], /not recognized, try again/i);
  assert.equal(port.spoken.length, 1);
});

test("latin announcement when no amharic voice is installed", async () => {
  const { fn } = scriptedFetch(() => jsonResponse(sampleResponse("ETB_50")));
  const port = new StubSpeechPort({ voices: [{ name: "En", lang: "en-US" }] });
  const view = new RecordingView();
  const controller = new AppController(
    new BirrClient("http://svc", fn), new Announcer(port), view);
  await controller.submit(IMAGE);
  assert.deepEqual(port.spoken.map(u => u.text), ["50 birr"]);
  // the visible large-type result still carries both display strings
  assert.equal(view.results[0].response.display_amharic, "ሃምሳ ብር");
});

test("interrupt cancels pending announcements and resets state", async () => {
  const expected = sampleResponse("ETB_10");
  const port = new StubSpeechPort({ autoFinish: false });
  const view = new RecordingView();
  const { fn } = scriptedFetch(() => jsonResponse(expected));
  const controller = new AppController(
    new BirrClient("http://svc", fn), new Announcer(port), view);

  await controller.submit(IMAGE);
  await controller.submit(IMAGE);
  assert.equal(port.spoken.length, 1);  // second utterance still queued
  controller.interrupt();
  assert.equal(port.cancels, 1);
  assert.equal(controller.current.phase, "idle");

  // a fresh capture after the interrupt speaks normally
  await controller.submit(IMAGE);
  assert.equal(port.spoken.length, 2);
});

test("state invariant: announced phase always carries a response", async () => {
  const { controller } = harness(() => jsonResponse(sampleResponse()));
  await controller.submit(IMAGE);
  assert.equal(controller.current.phase, "announced");
  assert.notEqual(controller.current.lastResponse, null);
});
