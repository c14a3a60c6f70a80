"""HTTP classification service and the shared classify pipeline.

The CLI and the service call the same ``classify_bytes`` function, so their
results are identical for identical input bytes. The service holds one
immutable model in inference mode and handles requests concurrently with no
shared mutable state.

Endpoints:
    GET  /health    -> {"status": "ok", "model_id": ...}
    GET  /labels    -> id -> {code, display_amharic, display_latin}
    POST /classify  -> PredictionResponse JSON (body: raw PNG or PPM bytes)
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .errors import DecodeError
from .labels import ClassLabel
from .model import Model
from .preprocess import decode_image, normalize, resize_bilinear

MAX_BODY_BYTES = 10 * 1024 * 1024


@dataclass
class PredictionResponse:
    label_code: str
    display_amharic: str
    display_latin: str
    probabilities: dict[str, float]
    model_id: str
    latency_ms: float


def classify_bytes(model: Model, labels: list[ClassLabel], image_bytes: bytes,
                   model_id: str) -> PredictionResponse:
    """Decode, resize, normalize, and classify one image. Raises DecodeError
    (or a subclass) for malformed input bytes."""
    started = time.perf_counter()
    img = decode_image(image_bytes)
    res = model.config.input_resolution
    tensor = normalize(resize_bilinear(img, res, res))
    _, probs = model.forward(tensor, train=False)
    row = probs.reshape(-1)
    ordered = sorted(labels, key=lambda lab: lab.id)
    winner = ordered[int(np.argmax(row))]
    return PredictionResponse(
        label_code=winner.code,
        display_amharic=winner.display_amharic,
        display_latin=winner.display_latin,
        probabilities={lab.code: float(row[lab.id]) for lab in ordered},
        model_id=model_id,
        latency_ms=(time.perf_counter() - started) * 1000.0,
    )


def response_to_json(resp: PredictionResponse, include_latency: bool = True) -> str:
    """Stable-order JSON rendering. The latency field is the only
    non-deterministic one; callers that need byte-identical output for
    identical inputs (the CLI) omit it."""
    doc = {
        "label_code": resp.label_code,
        "display_amharic": resp.display_amharic,
        "display_latin": resp.display_latin,
        "probabilities": resp.probabilities,
        "model_id": resp.model_id,
    }
    if include_latency:
        doc["latency_ms"] = resp.latency_ms
    return json.dumps(doc, ensure_ascii=False)


def labels_to_json(labels: list[ClassLabel]) -> str:
    doc = {
        str(lab.id): {
            "code": lab.code,
            "display_amharic": lab.display_amharic,
            "display_latin": lab.display_latin,
        }
        for lab in sorted(labels, key=lambda lab: lab.id)
    }
    return json.dumps(doc, ensure_ascii=False)


class _Handler(BaseHTTPRequestHandler):
    server: "ClassifierServer"

    def _send(self, status: int, body: str) -> None:
        payload = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):  # noqa: N802  (http.server naming)
        if self.path == "/health":
            self._send(200, json.dumps(
                {"status": "ok", "model_id": self.server.model_id}))
        elif self.path == "/labels":
            self._send(200, labels_to_json(self.server.labels))
        else:
            self._send(404, json.dumps({"error": f"unknown route {self.path}"}))

    def do_POST(self):  # noqa: N802
        if self.path != "/classify":
            self._send(404, json.dumps({"error": f"unknown route {self.path}"}))
            return
        try:
            length = int(self.headers.get("Content-Length") or 0)
        except ValueError:
            length = 0
        if length > MAX_BODY_BYTES:
            # drain before answering so the client can read the response
            remaining = length
            while remaining > 0:
                chunk = self.rfile.read(min(remaining, 1 << 20))
                if not chunk:
                    break
                remaining -= len(chunk)
            self._send(413, json.dumps(
                {"error": f"body exceeds {MAX_BODY_BYTES} bytes"}))
            return
        body = self.rfile.read(length) if length > 0 else b""
        if not body:
            self._send(422, json.dumps({"error": "empty request body"}))
            return
        try:
            resp = classify_bytes(self.server.model, self.server.labels, body,
                                  self.server.model_id)
        except DecodeError as exc:
            self._send(422, json.dumps({"error": str(exc)}))
            return
        self._send(200, response_to_json(resp))

    def log_message(self, fmt, *args):  # quiet by default
        if self.server.verbose:
            super().log_message(fmt, *args)


class ClassifierServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, model: Model, labels: list[ClassLabel],
                 model_id: str, verbose: bool = False):
        super().__init__(address, _Handler)
        self.model = model
        self.labels = labels
        self.model_id = model_id
        self.verbose = verbose


def build_server(model: Model, labels: list[ClassLabel], model_id: str,
                 host: str = "127.0.0.1", port: int = 0,
                 verbose: bool = False) -> ClassifierServer:
    return ClassifierServer((host, port), model, labels, model_id, verbose=verbose)
