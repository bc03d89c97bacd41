"""
Single-feature logistic regression fitted by Newton / IRLS.

The feature is standardized internally and the coefficients are mapped back,
so a feature divided by a positive constant yields theta scaled by that
constant and identical ranking.
"""
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from ..config import settings
from ..exceptions import ConvergenceError, DegenerateDataError, InputFormatError
from ..logging_setup import logger
from ..schemas import LogisticModel
from .interaction_store import text_lines

MODEL_HEADER = "# tie-logistic v1"
MIN_WEIGHT = 1e-12


def log_likelihood(intercept: float, theta: float, x, y) -> float:
    eta = intercept + theta * np.asarray(x, dtype=np.float64)
    return float(np.sum(np.asarray(y) * eta - np.logaddexp(0.0, eta)))


def gradient(intercept: float, theta: float, x, y) -> np.ndarray:
    """Analytic gradient of the log-likelihood in (intercept, theta)."""
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(y, dtype=np.float64) - expit(intercept + theta * x)
    return np.array([r.sum(), (r * x).sum()])


def predict_logistic(model: LogisticModel, x) -> np.ndarray:
    return expit(model.intercept + model.theta * np.asarray(x, dtype=np.float64))


def _separated(x: np.ndarray, y: np.ndarray) -> bool:
    pos, neg = x[y == 1], x[y == 0]
    return bool(pos.min() >= neg.max() or pos.max() <= neg.min())


def _newton(X: np.ndarray, y: np.ndarray, beta: np.ndarray, max_iter: int, tol: float):
    def ll(b):
        eta = X @ b
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

    current = ll(beta)
    info = None
    for iteration in range(1, max_iter + 1):
        p = expit(X @ beta)
        W = np.clip(p * (1.0 - p), MIN_WEIGHT, None)
        grad = X.T @ (y - p)
        info = (X.T * W) @ X
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, grad, rcond=None)[0]

        # Step halving keeps every iterate an ascent
        t = 1.0
        while True:
            candidate = beta + t * step
            value = ll(candidate)
            if value >= current - 1e-12 or t < 1e-10:
                break
            t *= 0.5
        improvement = value - current
        beta, current = candidate, value
        if improvement < tol:
            p = expit(X @ beta)
            info = (X.T * np.clip(p * (1.0 - p), MIN_WEIGHT, None)) @ X
            return beta, info, iteration, True
    return beta, info, max_iter, False


def fit_logistic(
    x,
    y,
    feature: str = "",
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> LogisticModel:
    """
    Fit logit P(y = 1) = intercept + theta * x by maximum likelihood.

    Args:
        x: Feature values
        y: 0/1 labels
        feature: Name recorded on the model
        max_iter: Newton iteration cap (settings.LOGISTIC_MAX_ITER)
        tol: Log-likelihood improvement that ends the fit (settings.LOGISTIC_TOL)

    Returns:
        LogisticModel with sigma from the inverse observed information and a
        two-sided p-value

    Raises:
        DegenerateDataError: fewer than two examples or a single class
        ConvergenceError: no convergence on non-separable data
    """
    max_iter = max_iter or settings.LOGISTIC_MAX_ITER
    tol = settings.LOGISTIC_TOL if tol is None else tol
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    n_pos = int(y.sum())
    if n < 2 or n_pos == 0 or n_pos == n:
        raise DegenerateDataError("logistic fit needs both classes", feature=feature, n=n, positives=n_pos)

    base = n_pos / n
    mu, sd = float(x.mean()), float(x.std())
    if sd == 0.0:
        return LogisticModel(
            feature=feature, intercept=float(np.log(base / (1.0 - base))), theta=0.0,
            sigma=float("inf"), z=0.0, p=1.0, iterations=0, converged=True, separated=False,
        )

    separated = _separated(x, y)
    X = np.column_stack([np.ones(n), (x - mu) / sd])
    beta0 = np.array([np.log(base / (1.0 - base)), 0.0])
    beta, info, iterations, converged = _newton(X, y, beta0, max_iter, tol)

    if separated:
        logger.warning("logistic_separated", feature=feature, iterations=iterations)
    elif not converged:
        raise ConvergenceError(f"logistic fit on '{feature}' did not converge in {max_iter} iterations",
                               feature=feature)

    try:
        cov = np.linalg.inv(info)
        var_b1 = float(cov[1, 1])
    except np.linalg.LinAlgError:
        var_b1 = float("inf")

    theta = float(beta[1] / sd)
    intercept = float(beta[0] - beta[1] * mu / sd)
    sigma = float(np.sqrt(var_b1) / sd) if var_b1 > 0 else float("inf")
    z = abs(theta) / sigma if np.isfinite(sigma) and sigma > 0 else 0.0
    return LogisticModel(
        feature=feature, intercept=intercept, theta=theta, sigma=sigma, z=z,
        p=float(2.0 * norm.sf(z)), iterations=iterations, converged=converged, separated=separated,
    )


def save_logistic(path, model: LogisticModel) -> None:
    Path(path).write_text(
        f"{MODEL_HEADER}\nfeature\t{model.feature}\n"
        f"{model.intercept!r}\t{model.theta!r}\t{model.sigma!r}\t{model.z!r}\t{model.p!r}\n",
        encoding="utf-8",
    )


def load_logistic(path) -> LogisticModel:
    path = str(path)
    lines = [text for _, text in text_lines(path)]
    if not lines or lines[0].strip() != MODEL_HEADER:
        raise InputFormatError(f"missing header '{MODEL_HEADER}'", path=path, line=1)
    if len(lines) < 3 or not lines[1].startswith("feature\t"):
        raise InputFormatError("expected 'feature<TAB>name' line", path=path, line=2)
    try:
        intercept, theta, sigma, z, p = (float(t) for t in lines[2].split("\t"))
    except ValueError:
        raise InputFormatError("expected five numbers", path=path, line=3)
    return LogisticModel(
        feature=lines[1].split("\t", 1)[1], intercept=intercept, theta=theta, sigma=sigma, z=z, p=p,
    )
