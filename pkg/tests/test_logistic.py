import numpy as np
import pytest
from scipy.special import expit

from app.exceptions import DegenerateDataError, InputFormatError
from app.services.logistic import (
    fit_logistic,
    gradient,
    load_logistic,
    log_likelihood,
    predict_logistic,
    save_logistic,
)


def _planted(rng, n=2000, intercept=-3.0, theta=0.8):
    x = rng.normal(size=n)
    y = (rng.random(n) < expit(intercept + theta * x)).astype(np.int64)
    return x, y


def test_gradient_vanishes_at_optimum():
    x, y = _planted(np.random.default_rng(1))
    model = fit_logistic(x, y, feature="ac")
    assert model.converged
    assert np.linalg.norm(gradient(model.intercept, model.theta, x, y)) < 1e-8


def test_analytic_gradient_matches_finite_differences():
    x, y = _planted(np.random.default_rng(2))
    b0, b1, h = -2.0, 0.3, 1e-5
    numeric = np.array([
        (log_likelihood(b0 + h, b1, x, y) - log_likelihood(b0 - h, b1, x, y)) / (2 * h),
        (log_likelihood(b0, b1 + h, x, y) - log_likelihood(b0, b1 - h, x, y)) / (2 * h),
    ])
    analytic = gradient(b0, b1, x, y)
    assert np.max(np.abs(analytic - numeric) / np.abs(analytic)) < 1e-5


def test_planted_coefficients_recovered_within_three_standard_errors():
    rng = np.random.default_rng(42)
    theta_hits = intercept_hits = 0
    for _ in range(100):
        x, y = _planted(rng)
        model = fit_logistic(x, y)
        theta_hits += abs(model.theta - 0.8) <= 3 * model.sigma
        intercept_hits += abs(model.intercept + 3.0) <= 0.5
    assert theta_hits >= 95
    assert intercept_hits >= 95


def test_significance_of_informative_feature():
    x, y = _planted(np.random.default_rng(3))
    model = fit_logistic(x, y)
    assert model.z == pytest.approx(abs(model.theta) / model.sigma)
    assert model.p < 1e-6


def test_rescaled_feature_scales_theta():
    x, y = _planted(np.random.default_rng(4))
    base = fit_logistic(x, y)
    scaled = fit_logistic(x / 10.0, y)
    assert scaled.theta == pytest.approx(10 * base.theta, rel=1e-8)
    assert scaled.intercept == pytest.approx(base.intercept, rel=1e-8)
    assert scaled.p == pytest.approx(base.p, rel=1e-6)


def test_constant_feature_is_uninformative():
    model = fit_logistic(np.ones(10), np.array([1, 0, 0, 0, 0, 1, 0, 0, 0, 0]))
    assert model.theta == 0.0
    assert model.p == 1.0
    assert model.intercept == pytest.approx(np.log(0.2 / 0.8))


def test_separated_data_returns_flagged_model():
    x = np.arange(20, dtype=float)
    y = (x >= 10).astype(int)
    model = fit_logistic(x, y)
    assert model.separated
    assert model.theta > 0
    assert np.all(predict_logistic(model, [0.0, 19.0]) == pytest.approx([0.0, 1.0], abs=1e-3))


def test_single_class_rejected():
    with pytest.raises(DegenerateDataError):
        fit_logistic([1.0, 2.0, 3.0], [0, 0, 0])
    with pytest.raises(DegenerateDataError):
        fit_logistic([1.0], [1])


def test_model_file_round_trip(tmp_path):
    x, y = _planted(np.random.default_rng(5))
    model = fit_logistic(x, y, feature="assists")
    path = tmp_path / "model.txt"
    save_logistic(path, model)
    back = load_logistic(path)
    assert back.feature == "assists"
    assert (back.intercept, back.theta, back.sigma, back.z, back.p) == \
        (model.intercept, model.theta, model.sigma, model.z, model.p)


def test_model_file_needs_header(tmp_path):
    path = tmp_path / "model.txt"
    path.write_text("feature\tac\n1\t2\t3\t4\t5\n", encoding="utf-8")
    with pytest.raises(InputFormatError):
        load_logistic(path)
