import json
import subprocess
import sys

import numpy as np
import pytest

smilepc_bridge = pytest.importorskip("smilepc_bridge")

from smilepc_bridge.server import (
    BridgeModelSpec,
    EchoModel,
    ensure_probs,
    normalize_points,
    read_class_file,
    softmax,
)

ECHO_ARGV = [sys.executable, "-m", "smilepc_bridge", "--model", "echo"]


def run_requests(argv, requests, timeout=30):
    stdin = "".join(json.dumps(r) + "\n" for r in requests)
    proc = subprocess.run(
        argv, input=stdin, capture_output=True, text=True, timeout=timeout
    )
    replies = [json.loads(line) for line in proc.stdout.splitlines() if line]
    return proc.returncode, replies


class TestSpec:
    def test_echo_defaults(self):
        spec = BridgeModelSpec("echo", None, None, 64)
        model = EchoModel(spec)
        assert model.class_names == ("class_0", "class_1", "class_2", "class_3")

    def test_validation(self):
        with pytest.raises(ValueError):
            BridgeModelSpec("gguf", None, None, 64)
        with pytest.raises(ValueError):
            BridgeModelSpec("torch", None, None, 64)
        with pytest.raises(ValueError):
            BridgeModelSpec("echo", "model.pt", None, 64)
        with pytest.raises(ValueError):
            BridgeModelSpec("echo", None, (), 64)
        with pytest.raises(ValueError):
            BridgeModelSpec("echo", None, ("a", "b"), 0)


class TestNormalize:
    def test_centers_and_scales(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(50, 3)) * 4 + 7
        out = normalize_points(pts)
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
        assert np.linalg.norm(out, axis=1).max() == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_cloud_centered_only(self):
        out = normalize_points(np.full((5, 3), 3.0))
        np.testing.assert_array_equal(out, np.zeros((5, 3)))

    def test_matches_engine_frame(self):
        geometry = pytest.importorskip("smilepc.geometry")
        rng = np.random.default_rng(1)
        for _ in range(20):
            pts = rng.normal(size=(int(rng.integers(2, 80)), 3)) * 3 + rng.normal(size=3)
            ours = normalize_points(pts)
            theirs = geometry.normalize(geometry.PointCloud(pts)).points
            np.testing.assert_allclose(ours, theirs, atol=1e-12)


class TestProbGuards:
    def test_probability_vector_passes_through(self):
        vec = ensure_probs([0.2, 0.8], 2)
        np.testing.assert_array_equal(vec, [0.2, 0.8])

    def test_logits_softmaxed(self):
        vec = ensure_probs([2.0, -1.0, 0.5], 3)
        assert vec.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(vec, softmax(np.array([2.0, -1.0, 0.5])))

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            ensure_probs([0.5, 0.5], 3)


class TestEchoProtocol:
    def test_hello_then_classify_then_shutdown(self):
        cloud = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]
        code, replies = run_requests(
            ECHO_ARGV,
            [
                {"op": "hello"},
                {"op": "classify", "batch": [cloud, cloud]},
                {"op": "shutdown"},
            ],
        )
        assert code == 0
        assert replies[0] == {
            "op": "hello",
            "classes": ["class_0", "class_1", "class_2", "class_3"],
            "n_points": 1024,
        }
        assert replies[1]["op"] == "probs"
        assert replies[1]["batch"] == [[0.25, 0.25, 0.25, 0.25]] * 2

    def test_class_file_preserves_order(self, tmp_path):
        names = tmp_path / "classes.txt"
        names.write_text("plane\ncar\nlamp\n")
        code, replies = run_requests(
            ECHO_ARGV + ["--classes", str(names), "--n-points", "77"],
            [{"op": "hello"}, {"op": "shutdown"}],
        )
        assert code == 0
        assert replies[0]["classes"] == ["plane", "car", "lamp"]
        assert replies[0]["n_points"] == 77

    def test_malformed_lines_answered_and_survived(self):
        proc = subprocess.run(
            ECHO_ARGV,
            input='garbage\n[1,2,3]\n{"op":"teleport"}\n{"op":"classify"}\n{"op":"hello"}\n{"op":"shutdown"}\n',
            capture_output=True,
            text=True,
            timeout=30,
        )
        assert proc.returncode == 0
        replies = [json.loads(l) for l in proc.stdout.splitlines() if l]
        assert [r["op"] for r in replies] == ["error", "error", "error", "error", "hello"]

    def test_responses_order_preserving(self):
        clouds = [[[0.0, 0.0, float(i)], [1.0, 0.0, 0.0]] for i in range(3)]
        requests = [{"op": "classify", "batch": clouds[: i + 1]} for i in range(3)]
        code, replies = run_requests(ECHO_ARGV, requests + [{"op": "shutdown"}])
        assert code == 0
        assert [len(r["batch"]) for r in replies] == [1, 2, 3]

    def test_probs_sum_to_one(self):
        code, replies = run_requests(
            ECHO_ARGV,
            [{"op": "classify", "batch": [[[0.0, 0.0, 0.0]]]}, {"op": "shutdown"}],
        )
        assert code == 0
        for vec in replies[0]["batch"]:
            assert abs(sum(vec) - 1.0) <= 1e-6

    def test_empty_class_file_is_a_load_error(self, tmp_path):
        empty = tmp_path / "empty.txt"
        empty.write_text("")
        proc = subprocess.run(
            ECHO_ARGV + ["--classes", str(empty)],
            input='{"op":"hello"}\n',
            capture_output=True,
            text=True,
            timeout=30,
        )
        assert proc.returncode == 3

    def test_bad_batch_shapes_reported(self):
        code, replies = run_requests(
            ECHO_ARGV,
            [
                {"op": "classify", "batch": []},
                {"op": "classify", "batch": [[[1.0, 2.0]]]},
                {"op": "classify", "batch": [[[1.0, 2.0, None]]]},
                {"op": "shutdown"},
            ],
        )
        assert code == 0
        assert all(r["op"] == "error" for r in replies)


class TestTorchModel:
    @pytest.fixture
    def checkpoint(self, tmp_path):
        torch = pytest.importorskip("torch")

        class Tiny(torch.nn.Module):
            def __init__(self):
                super().__init__()
                self.linear = torch.nn.Linear(3, 4)

            def forward(self, x):
                # expects (B, 3, N) channels-first clouds
                return self.linear(x.mean(dim=2))

        torch.manual_seed(0)
        path = tmp_path / "tiny.pt"
        torch.jit.save(torch.jit.script(Tiny()), str(path))
        return path

    def test_serves_softmaxed_logits(self, checkpoint):
        argv = [
            sys.executable, "-m", "smilepc_bridge",
            "--model", "torch", "--checkpoint", str(checkpoint), "--n-points", "16",
        ]
        cloud = [[float(i), 0.0, 1.0] for i in range(5)]
        code, replies = run_requests(
            argv, [{"op": "hello"}, {"op": "classify", "batch": [cloud]}, {"op": "shutdown"}]
        )
        assert code == 0
        assert replies[0]["classes"] == ["class_0", "class_1", "class_2", "class_3"]
        vec = replies[1]["batch"][0]
        assert len(vec) == 4
        assert abs(sum(vec) - 1.0) <= 1e-6
        assert all(v >= 0 for v in vec)

    def test_deterministic_across_processes(self, checkpoint):
        argv = [
            sys.executable, "-m", "smilepc_bridge",
            "--model", "torch", "--checkpoint", str(checkpoint), "--n-points", "16",
        ]
        cloud = [[0.1 * i, -0.2 * i, 0.4] for i in range(9)]
        requests = [{"op": "classify", "batch": [cloud]}, {"op": "shutdown"}]
        _, first = run_requests(argv, requests)
        _, second = run_requests(argv, requests)
        assert first == second

    def test_missing_checkpoint_exits_3_before_handshake(self, tmp_path):
        proc = subprocess.run(
            [
                sys.executable, "-m", "smilepc_bridge",
                "--model", "torch", "--checkpoint", str(tmp_path / "none.pt"),
            ],
            input='{"op":"hello"}\n',
            capture_output=True,
            text=True,
            timeout=60,
        )
        assert proc.returncode == 3
        assert proc.stdout == ""
        assert "failed to load model" in proc.stderr

    def test_corrupt_checkpoint_exits_3(self, tmp_path):
        bad = tmp_path / "bad.pt"
        bad.write_bytes(b"this is not a torch file")
        proc = subprocess.run(
            [
                sys.executable, "-m", "smilepc_bridge",
                "--model", "torch", "--checkpoint", str(bad),
            ],
            input='{"op":"hello"}\n',
            capture_output=True,
            text=True,
            timeout=60,
        )
        assert proc.returncode == 3
        assert proc.stdout == ""

    def test_class_count_mismatch_exits_3(self, checkpoint, tmp_path):
        names = tmp_path / "classes.txt"
        names.write_text("a\nb\n")  # model emits 4 values
        proc = subprocess.run(
            [
                sys.executable, "-m", "smilepc_bridge",
                "--model", "torch", "--checkpoint", str(checkpoint),
                "--classes", str(names), "--n-points", "16",
            ],
            input='{"op":"hello"}\n',
            capture_output=True,
            text=True,
            timeout=60,
        )
        assert proc.returncode == 3


class TestClassFile:
    def test_blank_lines_dropped(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("a\n\n  \nb\n")
        assert read_class_file(path) == ("a", "b")
