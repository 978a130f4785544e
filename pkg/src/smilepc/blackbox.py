"""Black-box classifier abstraction.

Two production classifiers: a deterministic geometric prototype model
("toy") that needs no external weights, and a line-protocol bridge that
drives an external model process over stdin/stdout.  The explainer only
ever sees ``classify_batch`` returning probability vectors.

Bridge wire protocol, one JSON object per line:
    -> {"op": "hello"}
    <- {"op": "hello", "classes": [...], "n_points": int}
    -> {"op": "classify", "batch": [[[x, y, z], ...], ...]}
    <- {"op": "probs", "batch": [[p, ...], ...]}
    -> {"op": "shutdown"}       (process exits 0)
"""

from __future__ import annotations

import json
import os
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import PointCloud
from .shapes import SHAPE_NAMES, make_shape

PROB_SUM_TOLERANCE = 1e-6
DEFAULT_BRIDGE_TIMEOUT = 60.0
TIMEOUT_ENV_VAR = "SMILEPC_BRIDGE_TIMEOUT_SECS"


class InvalidProbabilityError(ValueError):
    """A classifier returned a vector that is not a probability vector."""


class BridgeError(RuntimeError):
    """Base class for bridge subprocess failures."""


class BridgeProtocolError(BridgeError):
    """The bridge answered with something other than the expected message."""


class BridgeTimeoutError(BridgeError):
    """The bridge did not answer within the per-batch timeout."""


class BridgeExitError(BridgeError):
    """The bridge process exited while an answer was pending."""


@dataclass(frozen=True)
class ClassifierDescriptor:
    """Static facts the engine needs about a classifier."""

    kind: str
    class_names: tuple
    batch_limit: int
    serial_only: bool

    def __post_init__(self):
        if len(self.class_names) < 2:
            raise ValueError("classifier must have at least 2 classes")
        if self.batch_limit < 1:
            raise ValueError("batch_limit must be positive")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def validate_probs(vec, n_classes: int | None = None, *, context: str = "") -> np.ndarray:
    """Check a probability vector: finite, >= 0, sums to 1 within 1e-6."""
    arr = np.asarray(vec, dtype=np.float64).ravel()
    where = f" ({context})" if context else ""
    if n_classes is not None and arr.size != n_classes:
        raise InvalidProbabilityError(f"expected {n_classes} probabilities, got {arr.size}{where}")
    if arr.size < 2:
        raise InvalidProbabilityError(f"probability vector needs at least 2 entries{where}")
    if not np.all(np.isfinite(arr)):
        raise InvalidProbabilityError(f"probabilities must be finite{where}")
    if (arr < 0).any():
        raise InvalidProbabilityError(f"probabilities must be non-negative{where}")
    total = float(arr.sum())
    if abs(total - 1.0) > PROB_SUM_TOLERANCE:
        raise InvalidProbabilityError(f"probabilities sum to {total!r}, not 1{where}")
    return arr


class Classifier:
    """Minimal interface the explainer consumes."""

    descriptor: ClassifierDescriptor

    def classify_batch(self, clouds) -> list:
        raise NotImplementedError

    def classify(self, cloud: PointCloud) -> np.ndarray:
        return self.classify_batch([cloud])[0]

    def close(self) -> None:  # most classifiers hold no resources
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def shape_features(cloud: PointCloud) -> np.ndarray:
    """14-dim feature vector: location, spread, covariance shape, radial profile.

    Invariant to rotations about the z axis (up to float error) and
    frequency-weighted, so duplicated points count by their multiplicity.
    """
    pts = cloud.points
    center = pts.mean(axis=0)
    centered = pts - center
    var = (centered**2).mean(axis=0)
    cov = np.einsum("ij,ik->jk", centered, centered) / pts.shape[0]
    evals = np.linalg.eigvalsh(cov)  # ascending
    top = float(evals[2])
    if top > 1e-30:
        ratios = (float(evals[1]) / top, float(evals[0]) / top)
    else:
        ratios = (1.0, 1.0)
    r = np.linalg.norm(centered, axis=1)
    rmax = float(r.max())
    if rmax > 0.0:
        hist = np.histogram(r, bins=8, range=(0.0, rmax))[0] / pts.shape[0]
    else:
        hist = np.zeros(8)
        hist[0] = 1.0
    return np.array(
        [
            float(np.hypot(center[0], center[1])),
            float(center[2]),
            float(np.sqrt(var[0] + var[1])),
            float(np.sqrt(var[2])),
            *ratios,
            *hist,
        ]
    )


@lru_cache(maxsize=1)
def _prototypes() -> np.ndarray:
    feats = [shape_features(make_shape(name, 2048, seed=7040 + i)) for i, name in enumerate(SHAPE_NAMES)]
    return np.asarray(feats)


class ToyClassifier(Classifier):
    """Deterministic nearest-prototype classifier over shape features.

    Softmax of negative feature-space distances to the four reference
    shape prototypes; temperature 0.1 keeps the decision sharp but smooth
    enough that partial occlusion moves the probabilities.
    """

    def __init__(self, temperature: float = 0.1):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.temperature = float(temperature)
        self.descriptor = ClassifierDescriptor(
            kind="toy",
            class_names=SHAPE_NAMES,
            batch_limit=1024,
            serial_only=False,
        )

    def classify_batch(self, clouds) -> list:
        protos = _prototypes()
        out = []
        for cloud in clouds:
            feats = shape_features(cloud)
            diff = protos - feats
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            logits = -dist / self.temperature
            logits -= logits.max()
            e = np.exp(logits)
            out.append(e / e.sum())
        return out


class ConstantClassifier(Classifier):
    """Returns one fixed probability vector for every input.

    Exists for loopback testing: a bridge worker that ignores its input
    must reproduce this classifier bit-exactly through the full pipeline.
    """

    def __init__(self, probs=None, n_classes: int = 4):
        if probs is None:
            probs = np.full(n_classes, 1.0 / n_classes)
        self.probs = validate_probs(probs)
        self.descriptor = ClassifierDescriptor(
            kind="constant",
            class_names=tuple(f"class_{i}" for i in range(self.probs.size)),
            batch_limit=1024,
            serial_only=False,
        )

    def classify_batch(self, clouds) -> list:
        return [self.probs.copy() for _ in clouds]


class FunctionClassifier(Classifier):
    """Wrap a plain ``f(points) -> probs`` callable; handy in tests."""

    def __init__(self, func, class_names, batch_limit: int = 1024):
        self._func = func
        self.descriptor = ClassifierDescriptor(
            kind="function",
            class_names=tuple(class_names),
            batch_limit=batch_limit,
            serial_only=False,
        )

    def classify_batch(self, clouds) -> list:
        return [
            validate_probs(self._func(c.points), self.descriptor.n_classes) for c in clouds
        ]


_READER_EOF = object()


def bridge_timeout() -> float:
    raw = os.environ.get(TIMEOUT_ENV_VAR)
    if not raw:
        return DEFAULT_BRIDGE_TIMEOUT
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{TIMEOUT_ENV_VAR} must be a number, got {raw!r}") from None
    if value <= 0:
        raise ValueError(f"{TIMEOUT_ENV_VAR} must be positive, got {value}")
    return value


class BridgeClassifier(Classifier):
    """Line-protocol client around an external model subprocess.

    The subprocess is spawned once and reused for every batch; calls are
    serialized with a lock, and a reader thread feeds a queue so each
    response can be awaited with a timeout (default 60 s, overridable via
    SMILEPC_BRIDGE_TIMEOUT_SECS).
    """

    def __init__(self, command: str, timeout: float | None = None):
        self.command = command
        self.timeout = bridge_timeout() if timeout is None else float(timeout)
        self._lock = threading.Lock()
        self._queue: queue.Queue = queue.Queue()
        self._proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._reader = threading.Thread(target=self._drain_stdout, daemon=True)
        self._reader.start()
        hello = self._roundtrip({"op": "hello"}, context="hello handshake")
        if hello.get("op") != "hello" or "classes" not in hello:
            raise BridgeProtocolError(f"bad hello response: {hello!r}")
        classes = tuple(str(c) for c in hello["classes"])
        self.n_points = hello.get("n_points")
        self.descriptor = ClassifierDescriptor(
            kind="bridge",
            class_names=classes,
            batch_limit=256,
            serial_only=True,
        )

    def _drain_stdout(self):
        stream = self._proc.stdout
        if stream is not None:
            for line in stream:
                self._queue.put(line)
        self._queue.put(_READER_EOF)

    def _send(self, message: dict, context: str):
        try:
            assert self._proc.stdin is not None
            self._proc.stdin.write(json.dumps(message) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            rc = self._proc.wait()
            raise BridgeExitError(f"bridge exited with code {rc} during {context}") from None

    def _receive(self, context: str) -> dict:
        try:
            line = self._queue.get(timeout=self.timeout)
        except queue.Empty:
            raise BridgeTimeoutError(
                f"bridge did not answer within {self.timeout:g} s during {context}"
            ) from None
        if line is _READER_EOF:
            rc = self._proc.wait()
            raise BridgeExitError(f"bridge exited with code {rc} during {context}")
        try:
            doc = json.loads(line)
        except json.JSONDecodeError:
            raise BridgeProtocolError(f"bridge sent a non-JSON line during {context}: {line!r}") from None
        if not isinstance(doc, dict):
            raise BridgeProtocolError(f"bridge sent a non-object during {context}: {doc!r}")
        if doc.get("op") == "error":
            raise BridgeProtocolError(f"bridge reported an error during {context}: {doc.get('msg')!r}")
        return doc

    def _roundtrip(self, message: dict, context: str) -> dict:
        self._send(message, context)
        return self._receive(context)

    def classify_batch(self, clouds) -> list:
        if not clouds:
            return []
        payload = {
            "op": "classify",
            "batch": [[[float(v) for v in row] for row in c.points] for c in clouds],
        }
        with self._lock:
            doc = self._roundtrip(payload, context=f"classify batch of {len(clouds)}")
        if doc.get("op") != "probs" or "batch" not in doc:
            raise BridgeProtocolError(f"expected a probs response, got {doc!r}")
        batch = doc["batch"]
        if not isinstance(batch, list) or len(batch) != len(clouds):
            got = len(batch) if isinstance(batch, list) else type(batch).__name__
            raise BridgeProtocolError(f"expected {len(clouds)} probability vectors, got {got}")
        return [
            validate_probs(vec, self.descriptor.n_classes, context=f"batch index {i}")
            for i, vec in enumerate(batch)
        ]

    def close(self):
        if self._proc.poll() is None:
            try:
                self._send({"op": "shutdown"}, context="shutdown")
            except BridgeError:
                pass
            try:
                self._proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._proc.stdin is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass

    def __del__(self):
        try:
            if hasattr(self, "_proc") and self._proc.poll() is None:
                self._proc.kill()
        except Exception:
            pass


def make_classifier(spec: str) -> Classifier:
    """Resolve a CLI model spec: "toy" or "bridge:COMMAND LINE"."""
    if spec == "toy":
        return ToyClassifier()
    if spec.startswith("bridge:"):
        command = spec[len("bridge:") :].strip()
        if not command:
            raise ValueError("bridge model spec needs a command line after 'bridge:'")
        return BridgeClassifier(command)
    raise ValueError(f"unknown model spec {spec!r}; use 'toy' or 'bridge:CMDLINE'")
