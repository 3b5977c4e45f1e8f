"""Weighted logistic regression by iteratively reweighted least squares.

Weights are normalised to sum to one before fitting, so the objective is the
weighted mean log-likelihood.  This makes the fit invariant to rescaling the
weights and makes ``score_tol`` and ``ridge_lambda`` independent of the
sample size.

Besides 0/1 outcomes the fitter accepts fractional targets ``y`` in [0, 1].
A row with weight ``m`` and target ``k/m`` contributes exactly as ``m`` unit
rows of which ``k`` are events, which lets callers fit a stacked sample of
repeated covariate rows without materialising it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

RIDGE_LADDER = (1e-6, 1e-4, 1e-2)
JITTER = 1e-12
# |x.beta| beyond this at an unpenalised optimum means fitted risks of 0/1
MAX_LINEAR_PREDICTOR = 30.0


class FitError(RuntimeError):
    """Raised when no fit converges, or the data cannot support one.

    ``beta`` and ``diagnostics`` hold the last iterate and per-attempt
    details when available.
    """

    def __init__(self, message, beta=None, diagnostics=None):
        super().__init__(message)
        self.beta = beta
        self.diagnostics = diagnostics or []


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 50
    score_tol: float = 1e-8
    ridge_lambda: float = 0.0
    min_risk_clip: float = 1e-12
    ridge_ladder: tuple[float, ...] = RIDGE_LADDER

    def __post_init__(self):
        if self.score_tol <= 0:
            raise ValueError("score_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be nonnegative")


@dataclass(frozen=True)
class Coefficients:
    """Fitted logistic coefficients, intercept first."""

    beta: np.ndarray
    converged: bool = True
    iterations: int = 0
    ridge_lambda_used: float = 0.0

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        if beta.ndim != 1 or not np.all(np.isfinite(beta)):
            raise ValueError("beta must be a finite vector")
        beta.flags.writeable = False
        object.__setattr__(self, "beta", beta)

    @property
    def ridge_fallback(self) -> bool:
        return self.ridge_lambda_used > 0


def sigmoid(eta):
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def log_likelihood(beta, x, y, w) -> float:
    """Weighted mean Bernoulli log-likelihood (weights normalised to sum 1)."""
    w = np.asarray(w, dtype=float)
    w = w / w.sum()
    eta = x @ beta
    # log(1 + exp(eta)) without overflow
    return float(np.dot(w, y * eta - np.logaddexp(0.0, eta)))


def score(beta, x, y, w) -> np.ndarray:
    """Gradient of :func:`log_likelihood` with respect to ``beta``."""
    w = np.asarray(w, dtype=float)
    w = w / w.sum()
    return x.T @ (w * (y - sigmoid(x @ beta)))


def _penalty_mask(p):
    mask = np.ones(p)
    mask[0] = 0.0
    return mask


def _solve_spd(h, g):
    try:
        return linalg.cho_solve(linalg.cho_factor(h, check_finite=False), g, check_finite=False)
    except linalg.LinAlgError:
        h = h + JITTER * np.eye(h.shape[0])
        return linalg.solve(h, g, assume_a="sym", check_finite=False)


def _irls(x, y, w, lam, opts: FitOptions):
    """Newton iterations on the penalised mean log-likelihood.

    Returns ``(beta, converged, iterations, score_norm)``.
    """
    p = x.shape[1]
    mask = _penalty_mask(p) * lam
    q = float(np.clip(np.dot(w, y), 1e-6, 1 - 1e-6))
    beta = np.zeros(p)
    beta[0] = np.log(q / (1 - q))

    def objective(b):
        eta = x @ b
        return np.dot(w, y * eta - np.logaddexp(0.0, eta)) - 0.5 * np.dot(mask * b, b)

    obj = objective(beta)
    g_norm = np.inf
    for it in range(1, opts.max_iter + 1):
        pi = sigmoid(x @ beta)
        g = x.T @ (w * (y - pi)) - mask * beta
        g_norm = float(np.max(np.abs(g)))
        if g_norm <= opts.score_tol:
            # one more Newton step takes the quadratic phase to machine precision
            pic = np.clip(pi, opts.min_risk_clip, 1 - opts.min_risk_clip)
            h = (x * (w * pic * (1 - pic))[:, None]).T @ x + np.diag(mask)
            polished = beta + _solve_spd(h, g)
            if np.all(np.isfinite(polished)):
                beta = polished
            return beta, True, it, g_norm
        pic = np.clip(pi, opts.min_risk_clip, 1 - opts.min_risk_clip)
        h = (x * (w * pic * (1 - pic))[:, None]).T @ x + np.diag(mask)
        step = _solve_spd(h, g)
        if not np.all(np.isfinite(step)):
            return beta, False, it, g_norm
        # step halving keeps the objective monotone
        t = 1.0
        for _ in range(30):
            cand = beta + t * step
            cand_obj = objective(cand)
            if np.isfinite(cand_obj) and cand_obj >= obj - 1e-15 * max(1.0, abs(obj)):
                break
            t *= 0.5
        beta, obj = cand, cand_obj
    return beta, False, opts.max_iter, g_norm


def fit_logistic(x, y, w=None, opts: FitOptions | None = None) -> Coefficients:
    """Fit ``P(y=1|x) = sigmoid(x @ beta)`` by weighted maximum likelihood.

    On non-convergence or separation the fit is retried along the ridge
    ladder; the smallest penalty that converges is recorded in
    ``ridge_lambda_used``.  Only slope coefficients are penalised.
    """
    opts = opts or FitOptions()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    w = np.ones(n) if w is None else np.asarray(getattr(w, "w", w), dtype=float)
    if w.shape != (n,) or y.shape != (n,):
        raise ValueError(f"length mismatch: x has {n} rows, y {y.shape}, w {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise FitError("weights must be finite, nonnegative and not all zero")
    if np.any((y < 0) | (y > 1)):
        raise ValueError("targets must lie in [0, 1]")
    wn = w / w.sum()
    if np.dot(wn, y) <= 0 or np.dot(wn, 1 - y) <= 0:
        raise FitError("all positive-weight outcomes fall in one class")

    ladder = [opts.ridge_lambda] + [lam for lam in opts.ridge_ladder if lam > opts.ridge_lambda]
    diagnostics = []
    beta = None
    for lam in ladder:
        beta, ok, iters, g_norm = _irls(x, y, wn, lam, opts)
        separated = False
        if ok and lam == 0:
            separated = bool(np.max(np.abs(x @ beta)) > MAX_LINEAR_PREDICTOR)
        diagnostics.append(
            {"ridge_lambda": lam, "converged": ok, "iterations": iters,
             "score_norm": g_norm, "separated": separated}
        )
        if ok and not separated and np.all(np.isfinite(beta)):
            return Coefficients(beta, True, iters, lam)
    raise FitError("logistic fit did not converge along the ridge ladder", beta, diagnostics)


def fit_weighted_logistic(d, w=None, opts: FitOptions | None = None) -> Coefficients:
    """Refit the logistic model on dataset ``d`` under row weights ``w``."""
    return fit_logistic(d.x, d.y, w, opts)


def predict_risk(c, x_rows, min_risk_clip: float = 1e-12) -> np.ndarray:
    """Risks ``sigmoid(x_rows @ beta)`` clipped into the open unit interval."""
    beta = c.beta if isinstance(c, Coefficients) else np.asarray(c, dtype=float)
    x_rows = np.atleast_2d(np.asarray(x_rows, dtype=float))
    if x_rows.shape[1] != beta.shape[0]:
        raise ValueError(f"expected {beta.shape[0]} columns, got {x_rows.shape[1]}")
    return np.clip(sigmoid(x_rows @ beta), min_risk_clip, 1 - min_risk_clip)
