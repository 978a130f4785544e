"""Serve a point-cloud classifier over the stdin/stdout line protocol.

One JSON object per line.  Requests:

    {"op": "hello"}                      -> {"op": "hello", "classes": [...], "n_points": N}
    {"op": "classify", "batch": [...]}   -> {"op": "probs", "batch": [[...], ...]}
    {"op": "shutdown"}                   -> process exits 0

A malformed request gets {"op": "error", "msg": ...} and the loop keeps
serving.  Model load failures end the process with exit code 3 before the
handshake.  Responses are written one per request, in request order.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EXIT_LOAD_FAILURE = 3
PROB_SUM_TOLERANCE = 1e-6
DEFAULT_ECHO_CLASSES = ("class_0", "class_1", "class_2", "class_3")


@dataclass(frozen=True)
class BridgeModelSpec:
    """What to serve: an echo stub or a saved torch model."""

    kind: str  # "echo" or "torch"
    checkpoint: str | None
    class_names: tuple
    n_points: int

    def __post_init__(self):
        if self.kind not in ("echo", "torch"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "torch" and not self.checkpoint:
            raise ValueError("torch model needs a checkpoint path")
        if self.kind == "echo" and self.checkpoint:
            raise ValueError("echo model takes no checkpoint")
        if self.class_names is not None and len(self.class_names) == 0:
            raise ValueError("class list must be non-empty")
        if self.n_points < 1:
            raise ValueError("expected point count must be positive")


def normalize_points(points):
    """Centroid to the origin, largest point norm scaled to 1.

    Mirrors the explanation engine's canonical frame so perturbed clouds
    reach the model in the coordinates it was trained on.  A degenerate
    (single-location) cloud is only centered.
    """
    pts = np.asarray(points, dtype=np.float64)
    pts = pts - pts.mean(axis=0)
    scale = float(np.linalg.norm(pts, axis=1).max())
    if scale > 0.0:
        pts = pts / scale
    return pts


def softmax(vec):
    shifted = vec - vec.max()
    e = np.exp(shifted)
    return e / e.sum()


def ensure_probs(vec, n_classes: int):
    """Clamp model output to a probability vector (softmax on logits)."""
    vec = np.asarray(vec, dtype=np.float64).ravel()
    if vec.size != n_classes:
        raise ValueError(f"model emitted {vec.size} values for {n_classes} classes")
    if (vec < 0).any() or abs(vec.sum() - 1.0) > PROB_SUM_TOLERANCE:
        vec = softmax(vec)
    return vec


class EchoModel:
    """Ignores geometry; answers the uniform distribution every time."""

    def __init__(self, spec: BridgeModelSpec):
        self.class_names = tuple(spec.class_names or DEFAULT_ECHO_CLASSES)
        self.n_points = spec.n_points

    def infer(self, points) -> list:
        k = len(self.class_names)
        return [1.0 / k] * k


class TorchCheckpointModel:
    """Saved torch classifier; layout (B,3,N) vs (B,N,3) probed at load."""

    def __init__(self, spec: BridgeModelSpec):
        import torch  # deferred so the echo path has no ML dependency

        self._torch = torch
        path = Path(spec.checkpoint)
        if not path.is_file():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        try:
            self._model = torch.jit.load(str(path), map_location="cpu")
        except Exception:
            self._model = torch.load(str(path), map_location="cpu", weights_only=False)
        if not callable(self._model):
            raise TypeError("checkpoint did not contain a callable model")
        if hasattr(self._model, "eval"):
            self._model.eval()
        self.n_points = spec.n_points

        out, self._channels_first = self._probe_layout()
        if spec.class_names:
            if out.size != len(spec.class_names):
                raise ValueError(
                    f"model emits {out.size} values but {len(spec.class_names)} "
                    "class names were supplied"
                )
            self.class_names = tuple(spec.class_names)
        else:
            self.class_names = tuple(f"class_{i}" for i in range(out.size))

    def _probe_layout(self):
        for channels_first in (True, False):
            shape = (1, 3, self.n_points) if channels_first else (1, self.n_points, 3)
            try:
                with self._torch.no_grad():
                    out = self._model(self._torch.zeros(shape))
                return np.asarray(out).ravel(), channels_first
            except Exception:
                continue
        raise RuntimeError("model rejected both (1,3,N) and (1,N,3) input layouts")

    def _resample(self, pts):
        # wrap-around pad/truncate to the expected count; deterministic
        idx = np.resize(np.arange(len(pts)), self.n_points)
        return pts[idx]

    def infer(self, points) -> list:
        pts = self._resample(np.asarray(points, dtype=np.float64))
        arr = pts.T[None, :, :] if self._channels_first else pts[None, :, :]
        tensor = self._torch.as_tensor(arr, dtype=self._torch.float32)
        with self._torch.no_grad():
            out = self._model(tensor)
        return [float(v) for v in ensure_probs(np.asarray(out), len(self.class_names))]


def load_model(spec: BridgeModelSpec):
    if spec.kind == "echo":
        return EchoModel(spec)
    return TorchCheckpointModel(spec)


def _parse_batch(message: dict) -> list:
    batch = message.get("batch")
    if not isinstance(batch, list) or not batch:
        raise ValueError("classify needs a non-empty 'batch' list")
    clouds = []
    for i, cloud in enumerate(batch):
        arr = np.asarray(cloud, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
            raise ValueError(f"batch entry {i} is not an Nx3 point list")
        if not np.isfinite(arr).all():
            raise ValueError(f"batch entry {i} contains non-finite coordinates")
        clouds.append(arr)
    return clouds


def serve(model, stdin=None, stdout=None) -> int:
    """Answer requests until shutdown or EOF.  Returns the exit code."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout

    def reply(doc: dict):
        stdout.write(json.dumps(doc) + "\n")
        stdout.flush()

    for line in stdin:
        if not line.strip():
            continue
        try:
            message = json.loads(line)
            if not isinstance(message, dict):
                raise ValueError("request must be a JSON object")
            op = message.get("op")
            if op == "hello":
                reply(
                    {
                        "op": "hello",
                        "classes": list(model.class_names),
                        "n_points": model.n_points,
                    }
                )
            elif op == "classify":
                clouds = _parse_batch(message)
                probs = [model.infer(normalize_points(c)) for c in clouds]
                reply({"op": "probs", "batch": probs})
            elif op == "shutdown":
                return 0
            else:
                raise ValueError(f"unknown op {op!r}")
        except Exception as exc:  # malformed request: report and keep serving
            reply({"op": "error", "msg": str(exc)})
    return 0


def read_class_file(path) -> tuple:
    names = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    return tuple(n for n in names if n)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="smilepc-bridge",
        description="serve a point-cloud classifier over the stdin/stdout line protocol",
    )
    parser.add_argument("--model", choices=("echo", "torch"), default="echo")
    parser.add_argument("--checkpoint", default=None, help="saved torch model (jit or pickle)")
    parser.add_argument("--classes", default=None, help="file with one class name per line")
    parser.add_argument("--n-points", type=int, default=1024,
                        help="point count the model expects (default: 1024)")
    args = parser.parse_args(argv)

    try:
        class_names = read_class_file(args.classes) if args.classes else None
        spec = BridgeModelSpec(
            kind=args.model,
            checkpoint=args.checkpoint,
            class_names=class_names,
            n_points=args.n_points,
        )
        model = load_model(spec)
    except Exception as exc:
        print(f"smilepc-bridge: failed to load model: {exc}", file=sys.stderr)
        return EXIT_LOAD_FAILURE

    return serve(model)


if __name__ == "__main__":
    sys.exit(main())
