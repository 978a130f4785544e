import math

import numpy as np
import pytest

from smilepc.explain import ExplainConfig, explain
from smilepc.blackbox import ToyClassifier
from smilepc.fidelity import (
    CSV_HEADER,
    FidelityReport,
    UndefinedMetricError,
    adjusted_weighted_r2,
    fidelity_report,
    l1_loss,
    l2_loss,
    mean_loss,
    weighted_l1_loss,
    weighted_l2_loss,
    weighted_r2,
    weighted_r2_conventional,
)
from smilepc.shapes import make_cross


# hand-computed four-row example, weights deliberately not summing to n
F = np.array([1.0, 0.5, 0.25, 0.25])
G = np.array([0.8, 0.6, 0.25, 0.05])
W = np.array([1.0, 0.5, 0.5, 0.0])


class TestPlainLosses:
    def test_mean_loss_frozen(self):
        # |mean F - mean G| = |0.5 - 0.425| = 0.075
        assert mean_loss(F, G) == pytest.approx(0.075, abs=1e-15)

    def test_l1_frozen(self):
        # (0.2 + 0.1 + 0 + 0.2)/4
        assert l1_loss(F, G) == pytest.approx(0.125, abs=1e-15)

    def test_l2_frozen(self):
        assert l2_loss(F, G) == pytest.approx((0.04 + 0.01 + 0.0 + 0.04) / 4, abs=1e-15)

    def test_perfect_fit_zero(self):
        assert l1_loss(F, F) == 0.0
        assert l2_loss(F, F) == 0.0
        assert mean_loss(F, F) == 0.0


class TestWeightedLosses:
    def test_weighted_l1_divides_by_row_count(self):
        # sum(w*|f-g|) / n = (0.2 + 0.05 + 0 + 0)/4, not / sum(w)=2.0
        assert weighted_l1_loss(F, G, W) == pytest.approx(0.0625, abs=1e-15)
        assert weighted_l1_loss(F, G, W) != pytest.approx(0.25 / 2.0, abs=1e-6)

    def test_weighted_l2_divides_by_row_count(self):
        expected = (1.0 * 0.04 + 0.5 * 0.01 + 0.0 + 0.0) / 4
        assert weighted_l2_loss(F, G, W) == pytest.approx(expected, abs=1e-15)

    def test_uniform_weights_match_plain(self, rng):
        f = rng.random(30)
        g = rng.random(30)
        ones = np.ones(30)
        assert weighted_l1_loss(f, g, ones) == pytest.approx(l1_loss(f, g), abs=1e-12)
        assert weighted_l2_loss(f, g, ones) == pytest.approx(l2_loss(f, g), abs=1e-12)


class TestWeightedR2:
    def test_frozen_example(self):
        # fbar_w = sum(w f)/sum(w) = (1.0 + 0.25 + 0.125)/2 = 0.6875
        # num = sum((f-g)^2) over ALL rows (unweighted residuals)
        # den = sum((f - fbar_w)^2) over ALL rows (unweighted spread)
        fbar = 0.6875
        num = float(np.sum((F - G) ** 2))
        den = float(np.sum((F - fbar) ** 2))
        assert weighted_r2(F, G, W) == pytest.approx(1 - num / den, abs=1e-15)

    def test_distinguishes_from_conventional(self):
        # conventional weights both sums; the two must differ on skewed weights
        plain = weighted_r2(F, G, W)
        conv = weighted_r2_conventional(F, G, W)
        assert abs(plain - conv) > 1e-3

    def test_perfect_fit_is_one(self, rng):
        f = rng.random(20)
        w = rng.random(20) + 0.1
        assert weighted_r2(f, f, w) == 1.0
        assert weighted_r2_conventional(f, f, w) == 1.0

    def test_constant_targets_undefined(self):
        f = np.full(5, 2.0)
        with pytest.raises(UndefinedMetricError):
            weighted_r2(f, f + 0.1, np.ones(5))

    def test_uniform_weights_equal_ordinary_r2(self, rng):
        f = rng.random(40)
        g = f + rng.normal(scale=0.1, size=40)
        w = np.ones(40)
        ss_res = np.sum((f - g) ** 2)
        ss_tot = np.sum((f - f.mean()) ** 2)
        assert weighted_r2(f, g, w) == pytest.approx(1 - ss_res / ss_tot, abs=1e-12)
        assert weighted_r2_conventional(f, g, w) == pytest.approx(1 - ss_res / ss_tot, abs=1e-12)


class TestAdjustedR2:
    def test_formula_frozen(self):
        # 1 - (1 - r2) (np-1)/(np-ns-1) with np=100, ns=9
        r2 = 0.8
        assert adjusted_weighted_r2(r2, 100, 9) == pytest.approx(1 - 0.2 * 99 / 90, abs=1e-15)

    def test_degenerate_sample_count_raises(self):
        with pytest.raises(ValueError):
            adjusted_weighted_r2(0.5, 10, 9)
        with pytest.raises(ValueError):
            adjusted_weighted_r2(0.5, 10, 10)

    def test_penalty_grows_with_clusters(self):
        r2 = 0.9
        vals = [adjusted_weighted_r2(r2, 50, ns) for ns in (2, 8, 32)]
        assert vals[0] > vals[1] > vals[2]


class TestFidelityReport:
    def build_explanation(self):
        cloud = make_cross(192, seed=11)
        config = ExplainConfig(clusters=6, perturbations=40, seed=3)
        return explain(cloud, ToyClassifier(), config)

    def test_report_consistent_with_metrics(self):
        exp = self.build_explanation()
        rep = fidelity_report(exp)
        f = exp.targets
        g = exp.fit.predictions
        w = exp.weights
        assert rep.n_features == 6
        assert rep.n_perturbations == 40
        assert rep.l_m == pytest.approx(mean_loss(f, g), abs=1e-15)
        assert rep.l1 == pytest.approx(l1_loss(f, g), abs=1e-15)
        assert rep.l1w == pytest.approx(weighted_l1_loss(f, g, w), abs=1e-15)
        assert rep.l2 == pytest.approx(l2_loss(f, g), abs=1e-15)
        assert rep.l2w == pytest.approx(weighted_l2_loss(f, g, w), abs=1e-15)
        assert rep.r2w == pytest.approx(weighted_r2(f, g, w), abs=1e-15)
        expected_adj = adjusted_weighted_r2(rep.r2w, 40, 6)
        assert rep.adj_r2w == pytest.approx(expected_adj, abs=1e-15)

    def test_adjusted_nan_when_underdetermined(self):
        cloud = make_cross(128, seed=11)
        config = ExplainConfig(clusters=8, perturbations=9, seed=3)
        exp = explain(cloud, ToyClassifier(), config)
        rep = fidelity_report(exp)
        assert math.isnan(rep.adj_r2w)
        assert math.isfinite(rep.r2w)

    def test_csv_row_matches_header(self):
        rep = self.build_explanation()
        row = fidelity_report(rep).to_csv_row()
        assert len(row) == len(CSV_HEADER)
        assert CSV_HEADER == ("C", "L_m", "L1", "L1w", "L2", "L2w", "R2w", "adjR2w")
        assert row[0] == 6

    def test_json_round_trip_keys(self):
        rep = fidelity_report(self.build_explanation())
        doc = rep.to_json_dict()
        assert doc["C"] == 6
        for key in ("L_m", "L1", "L1w", "L2", "L2w", "R2w", "adjR2w"):
            assert key in doc

    def test_explicit_targets_override(self):
        exp = self.build_explanation()
        f2 = np.linspace(0.0, 1.0, exp.targets.size)
        rep = fidelity_report(exp, f=f2)
        assert rep.l1 == pytest.approx(l1_loss(f2, exp.fit.predictions), abs=1e-15)


class TestValidation:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            l1_loss(np.zeros(3), np.zeros(4))
        with pytest.raises(ValueError):
            weighted_l1_loss(np.zeros(3), np.zeros(3), np.zeros(4))

    def test_report_is_frozen(self):
        rep = FidelityReport(4, 20, 0.1, 0.1, 0.1, 0.1, 0.1, 0.5, 0.4)
        with pytest.raises(AttributeError):
            rep.l1 = 9.0
