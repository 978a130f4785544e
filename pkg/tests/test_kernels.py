"""Cross-backend agreement between the C extension and the pure fallback."""

import numpy as np
import pytest

from smilepc import kernels
from smilepc.kernels import _pure

_compiled = pytest.importorskip(
    "smilepc.kernels._compiled", reason="extension not built on this install"
)


def sorted_pair(rng, n=None, m=None, lattice=False):
    n = n or int(rng.integers(1, 40))
    m = m or int(rng.integers(1, 40))
    if lattice:
        a = rng.integers(0, 6, size=n).astype(np.float64)
        b = rng.integers(0, 6, size=m).astype(np.float64)
    else:
        a = rng.normal(size=n)
        b = rng.normal(size=m)
    return np.sort(a), np.sort(b)


class TestDistanceParity:
    @pytest.mark.parametrize("name", ["wd_sorted", "ks_sorted", "ad_sorted"])
    def test_continuous_samples(self, rng, name):
        for _ in range(120):
            a, b = sorted_pair(rng)
            pure = getattr(_pure, name)(a, b)
            comp = getattr(_compiled, name)(a, b)
            assert comp == pytest.approx(pure, abs=1e-12)

    @pytest.mark.parametrize("name", ["wd_sorted", "ks_sorted", "ad_sorted"])
    def test_heavy_ties(self, rng, name):
        # integer lattices force the tie-handling paths in both backends
        for _ in range(120):
            a, b = sorted_pair(rng, lattice=True)
            pure = getattr(_pure, name)(a, b)
            comp = getattr(_compiled, name)(a, b)
            assert comp == pytest.approx(pure, abs=1e-12)

    def test_singletons(self):
        one = np.array([0.0])
        two = np.array([1.0])
        for mod in (_pure, _compiled):
            assert mod.wd_sorted(one, two) == pytest.approx(1.0, abs=1e-15)
            assert mod.ks_sorted(one, two) == pytest.approx(1.0, abs=1e-15)
            assert mod.ad_sorted(one, two) == pytest.approx(1.0, abs=1e-15)


class TestFpsParity:
    def test_identical_index_sequences(self, rng):
        for _ in range(25):
            pts = rng.normal(size=(int(rng.integers(5, 120)), 3))
            k = int(rng.integers(1, min(12, len(pts)) + 1))
            start = int(rng.integers(len(pts)))
            np.testing.assert_array_equal(
                _pure.fps_indices(pts, k, start), _compiled.fps_indices(pts, k, start)
            )

    def test_collinear_frozen_case(self):
        # 10 points on a line starting at index 0: greedy picks the far end,
        # then the midpoint
        pts = np.zeros((10, 3))
        pts[:, 0] = np.arange(10, dtype=float)
        for mod in (_pure, _compiled):
            np.testing.assert_array_equal(mod.fps_indices(pts, 3, 0), [0, 9, 4])


class TestAssignParity:
    def test_labels_and_sse(self, rng):
        for _ in range(25):
            pts = rng.normal(size=(int(rng.integers(4, 200)), 3))
            cents = rng.normal(size=(int(rng.integers(1, 9)), 3))
            lab_p, sse_p = _pure.assign_clusters(pts, cents)
            lab_c, sse_c = _compiled.assign_clusters(pts, cents)
            np.testing.assert_array_equal(lab_p, lab_c)
            assert sse_c == pytest.approx(sse_p, rel=1e-12, abs=1e-12)

    def test_equidistant_tie_prefers_first_centroid(self):
        pts = np.array([[0.0, 0.0, 0.0]])
        cents = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
        for mod in (_pure, _compiled):
            labels, _ = mod.assign_clusters(pts, cents)
            assert labels[0] == 0


class TestSolveParity:
    def random_spd(self, rng, k):
        m = rng.normal(size=(k, k))
        return m @ m.T + k * np.eye(k)

    def test_solutions_match(self, rng):
        for _ in range(40):
            k = int(rng.integers(1, 10))
            a = self.random_spd(rng, k)
            b = rng.normal(size=k)
            x_p = _pure.solve_spd(a, b)
            x_c = _compiled.solve_spd(a, b)
            np.testing.assert_allclose(x_c, x_p, atol=1e-12, rtol=1e-12)
            np.testing.assert_allclose(a @ x_c, b, atol=1e-8)

    def test_non_pd_raises_in_both(self):
        a = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
        b = np.ones(2)
        with pytest.raises(np.linalg.LinAlgError):
            _pure.solve_spd(a, b)
        with pytest.raises(np.linalg.LinAlgError):
            _compiled.solve_spd(a, b)


class TestBackendSelection:
    def test_active_backend_reports_compiled(self):
        # the extension imported above, so the default selection must use it
        assert kernels.BACKEND == "compiled"
        assert kernels.wd_sorted is _compiled.wd_sorted

    def test_pure_backend_forced_by_env(self, tmp_path):
        import subprocess
        import sys

        code = (
            "import smilepc.kernels as k; "
            "print(k.BACKEND); "
            "import numpy as np; "
            "print(k.wd_sorted(np.array([0.0]), np.array([1.0])))"
        )
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True,
            text=True,
            env={"SMILEPC_PURE": "1", "PATH": "/usr/bin:/bin"},
        )
        assert out.returncode == 0, out.stderr
        assert out.stdout.split() == ["pure", "1.0"]

    def test_repeated_calls_bit_identical(self, rng):
        a, b = sorted_pair(rng, n=30, m=25)
        for mod in (_pure, _compiled):
            assert mod.ad_sorted(a, b) == mod.ad_sorted(a, b)
