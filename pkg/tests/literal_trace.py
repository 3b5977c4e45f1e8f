"""Literal, single-threaded re-implementation of the nested bootstrap.

Written independently of ``devvoi.voi``: merged samples are stacked
explicitly, fits use a plain Newton loop on the stacked rows and every NB is
a per-row Python loop.  Only the random stream derivation and the draw
protocol are shared, so both sides see the same random numbers.
"""

import math

import numpy as np

from devvoi.resample import RngSpec


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def newton(X, y, w, iters=60):
    beta = np.zeros(X.shape[1])
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(X @ beta)))
        g = X.T @ (w * (y - p))
        H = X.T @ (X * (w * p * (1 - p))[:, None])
        step = np.linalg.solve(H, g)
        beta = beta + step
        if np.max(np.abs(step)) < 1e-15:
            break
    return beta


def risks(X, beta):
    return [_sig(float(row @ beta)) for row in X]


def nb_rows(decision, truth, z):
    """(model, all, perfect) NB with equal row weights, by explicit loops."""
    r = z / (1 - z)
    n = len(truth)
    model = all_ = perfect = 0.0
    for dj, pj in zip(decision, truth):
        gain = pj - (1 - pj) * r
        all_ += gain
        if dj >= z:
            model += gain
        if pj >= z:
            perfect += gain
    return model / n, all_ / n, perfect / n


def trace(X, y, T, future_sizes, grid, seed):
    rng_spec = RngSpec(seed)
    n = X.shape[0]
    theta_hat = newton(X, y, np.ones(n))
    decision_hat = risks(X, theta_hat)
    sizes = sorted(future_sizes)
    out = {"current": [], "future": [], "theta_t": [], "theta_plus": []}
    for t in range(T):
        e = rng_spec.stream(t, 0).standard_exponential(n)
        w = e / e.sum()
        theta_t = newton(X, y, w)
        truth = risks(X, theta_t)
        out["theta_t"].append(theta_t)
        out["current"].append([nb_rows(decision_hat, truth, z) for z in grid])

        rng = rng_spec.stream(t, 1)
        Xs, ys = [X], [y]
        drawn = 0
        fut = {}
        plus = {}
        for n_star in sizes:
            extra = n_star - drawn
            if extra > 0:
                idx = rng.choice(n, size=extra, p=w / w.sum())
                ystar = (rng.random(extra) < np.array(truth)[idx]).astype(float)
                Xs.append(X[idx])
                ys.append(ystar)
                drawn = n_star
            Xp = np.vstack(Xs)
            yp = np.concatenate(ys)
            beta_plus = newton(Xp, yp, np.ones(len(yp))) if n_star > 0 else theta_hat
            plus[n_star] = beta_plus
            dec_plus = risks(Xp, beta_plus)
            truth_plus = risks(Xp, theta_t)
            fut[n_star] = [nb_rows(dec_plus, truth_plus, z)[:2] for z in grid]
        out["future"].append([fut[s] for s in future_sizes])
        out["theta_plus"].append([plus[s] for s in future_sizes])

    cur = np.array(out["current"])  # (T, G, 3)
    fut = np.array(out["future"])  # (T, K, G, 2)
    enb_model = cur[:, :, 0].sum(axis=0) / T
    enb_all = cur[:, :, 1].sum(axis=0) / T
    enb_perfect = cur[:, :, 2].sum(axis=0) / T
    best_now = np.maximum(0.0, np.maximum(enb_model, enb_all))
    evpi = enb_perfect - best_now
    evsi = []
    for k in range(len(future_sizes)):
        fm = fut[:, k, :, 0].sum(axis=0) / T
        fa = fut[:, k, :, 1].sum(axis=0) / T
        evsi.append(np.maximum(0.0, np.maximum(fm, fa)) - best_now)
    out.update(enb_model=enb_model, enb_all=enb_all, enb_perfect=enb_perfect,
               evpi=evpi, evsi=np.array(evsi).T, theta_hat=theta_hat)
    return out
