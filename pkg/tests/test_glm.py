import math

import numpy as np
import pytest

from esnbench.dataio import Dataset, SynthSpec, synth_generate
from esnbench.glm import (
    LogisticFit,
    NonConvergenceError,
    PerfectSeparationError,
    SingularInformationError,
    FitError,
    fit_logistic,
    load_logit,
    log_likelihood,
    predict_proba,
    save_logit,
    score_vector,
    wald_row,
    wald_stats,
    wald_table,
)
from esnbench.numkit import make_rng
from oracles import gradient_fd, loglik_mp


def intercept_only(labels):
    y = np.array(labels, dtype=float)
    return Dataset([], np.zeros((len(y), 0)), y)


def planted(n=40, seed=0, beta=(1.0, -0.5, 0.8), alpha=0.3):
    rng = make_rng(seed)
    x = rng.standard_normal((n, len(beta)))
    p = 1 / (1 + np.exp(-(alpha + x @ np.array(beta))))
    y = (rng.uniform(size=n) < p).astype(float)
    return Dataset([f"b{i}" for i in range(len(beta))], x, y), np.r_[alpha, beta]


class TestFit:
    def test_intercept_balanced(self):
        f = fit_logistic(intercept_only([0, 1]))
        assert f.intercept == pytest.approx(0.0, abs=1e-10)

    def test_intercept_log_odds(self):
        f = fit_logistic(intercept_only([0, 0, 1, 1, 1, 1]))
        assert f.intercept == pytest.approx(math.log(2), abs=1e-10)

    def test_planted_40(self):
        data, truth = planted()
        f = fit_logistic(data)
        assert f.converged
        assert f.final_log_likelihood >= loglik_mp(truth, data.features, data.labels)
        assert np.max(np.abs(score_vector(f.params, data.features, data.labels))) < 1e-8

    def test_covariance_symmetric_psd(self):
        data, _ = planted(n=200, seed=3)
        f = fit_logistic(data)
        assert np.max(np.abs(f.covariance - f.covariance.T)) <= 1e-10
        assert np.all(np.linalg.eigvalsh(f.covariance) > 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_loglik_monotone_over_iterations(self, seed):
        data, _ = planted(n=300, seed=seed, beta=(2.0, -1.5, 0.8, 0.0))
        h = fit_logistic(data).ll_history
        assert len(h) >= 3
        slack = 1e-12 * abs(h[-1])
        assert all(b >= a - slack for a, b in zip(h, h[1:]))

    def test_separation_detected(self):
        x = np.linspace(-1, 1, 30)[:, None]
        y = (x[:, 0] > 0).astype(float)
        with pytest.raises(PerfectSeparationError) as exc:
            fit_logistic(Dataset(["x"], x, y))
        assert exc.value.direction is not None

    def test_constant_column_rejected(self):
        data, _ = planted()
        x = np.column_stack([data.features, np.ones(data.n)])
        with pytest.raises(SingularInformationError):
            fit_logistic(Dataset(data.feature_names + ["c"], x, data.labels))

    def test_duplicate_column_rejected(self):
        data, _ = planted()
        x = np.column_stack([data.features, data.features[:, 0]])
        with pytest.raises(SingularInformationError):
            fit_logistic(Dataset(data.feature_names + ["dup"], x, data.labels))

    def test_nonconvergence(self):
        data, _ = planted(n=200)
        with pytest.raises(NonConvergenceError):
            fit_logistic(data, max_iters=1)


class TestLoglik:
    def test_zero_params(self):
        x = make_rng(0).standard_normal((7, 2))
        y = np.array([0, 1, 1, 0, 1, 0, 0.0])
        assert log_likelihood([0, 0, 0], x, y) == pytest.approx(7 * math.log(0.5), abs=1e-12)

    def test_confident_limit(self):
        x = np.array([[1.0], [-1.0]])
        y = np.array([1.0, 0.0])
        vals = [log_likelihood([0, s], x, y) for s in (1, 10, 20, 40)]
        assert all(v < 0 for v in vals)
        assert vals == sorted(vals)
        assert vals[-1] > -1e-16

    def test_vs_extended_precision(self):
        rng = make_rng(21)
        x = rng.standard_normal((10, 3))
        y = (rng.uniform(size=10) < 0.5).astype(float)
        params = rng.standard_normal(4)
        assert log_likelihood(params, x, y) == pytest.approx(loglik_mp(params, x, y), abs=1e-12)

    def test_no_overflow(self):
        assert math.isfinite(log_likelihood([0, 1e4], np.array([[1.0]]), np.array([0.0])))

    def test_gradient_vs_finite_differences(self):
        data, _ = planted(n=60, seed=9)
        rng = make_rng(10)
        for _ in range(20):
            params = rng.uniform(-1.5, 1.5, 4)
            g = score_vector(params, data.features, data.labels)
            fd = gradient_fd(params, data.features, data.labels)
            assert np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1.0)) < 1e-6


class TestPredict:
    def _fit(self, alpha, beta):
        beta = np.asarray(beta, dtype=float)
        k = beta.size + 1
        return LogisticFit(alpha, beta, [f"b{i}" for i in range(beta.size)], np.eye(k), True, 0, 0.0)

    def test_zero(self):
        assert predict_proba(self._fit(0.0, [0.0, 0.0]), [5.0, -3.0]) == 0.5

    def test_three_quarters(self):
        assert predict_proba(self._fit(0.0, [1.0]), [math.log(3)]) == pytest.approx(0.75, abs=1e-15)

    def test_monotone(self):
        f = self._fit(0.1, [0.7, -0.2])
        a = predict_proba(f, [0.0, 1.0])
        b = predict_proba(f, [0.5, 1.0])
        assert b > a

    def test_open_interval(self):
        f = self._fit(0.0, [1.0])
        p = predict_proba(f, np.array([[-20.0], [20.0]]))
        assert np.all((p > 0) & (p < 1))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            predict_proba(self._fit(0.0, [1.0]), [1.0, 2.0])


class TestWald:
    def test_identities(self):
        data, _ = planted(n=300, seed=4)
        for r in wald_stats(fit_logistic(data)):
            assert r.odds_ratio == pytest.approx(math.exp(r.coefficient), rel=1e-12)
            assert r.z_value == pytest.approx(r.coefficient / r.std_error, rel=1e-12)
            assert 0.0 <= r.p_value <= 1.0

    def test_zero_coefficient(self):
        r = wald_row("z", 0.0, 0.37)
        assert (r.odds_ratio, r.z_value, r.p_value) == (1.0, 0.0, 1.0)

    def test_known_two_sided_p(self):
        assert wald_row("x", 1.959963984540054, 1.0).p_value == pytest.approx(0.05, abs=1e-12)

    @pytest.mark.parametrize("name, coef, se, odds, z", [
        ("Sex", 1.15, 0.3065, 3.168, 3.719),
        ("MouthUlcer", 2.01, 0.0389, 7.404, 51.46),
    ])
    def test_table_rows_within_rounding(self, name, coef, se, odds, z):
        r = wald_row(name, coef, se)
        assert r.odds_ratio == pytest.approx(odds, rel=0.02)
        assert r.z_value == pytest.approx(z, rel=0.02)

    def test_mouth_ulcer_z_tight(self):
        assert wald_row("MouthUlcer", 2.01, 0.0389).z_value == pytest.approx(51.46, rel=0.005)

    def test_nonconverged_rejected(self):
        f = LogisticFit(0.0, np.zeros(1), ["a"], np.eye(2), False, 3, -1.0)
        with pytest.raises(FitError):
            wald_stats(f)

    def test_table_header(self):
        data, _ = planted(n=100)
        rows = wald_table(wald_stats(fit_logistic(data)))
        assert rows[0] == ["Predictor", "Co-eff.", "S.Error", "O. Ratio", "z-value", "p-value"]
        assert rows[1][0] == "(Intercept)"


def test_artifact_roundtrip(tmp_path):
    data, _ = planted(n=100)
    f = fit_logistic(data)
    save_logit(f, tmp_path / "m.txt")
    g, std = load_logit(tmp_path / "m.txt")
    assert std is None
    assert np.array_equal(g.params, f.params) and np.array_equal(g.covariance, f.covariance)
    assert g.predictor_names == f.predictor_names


@pytest.mark.slow
def test_planted_recovery_within_3_se():
    """n=5000, 50 replicates: >= 95% of coefficients within 3 SE of the truth."""
    hits = total = 0
    for rep in range(50):
        data, truth = synth_generate(SynthSpec(n=5000, p_informative=5, p_noise=0, planted_alpha=0.2, seed=rep))
        rows = wald_stats(fit_logistic(data))
        planted_vals = np.r_[truth.alpha, truth.beta]
        for r, t in zip(rows, planted_vals):
            hits += abs(r.coefficient - t) <= 3 * r.std_error
            total += 1
    assert hits / total >= 0.95
