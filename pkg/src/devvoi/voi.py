"""Expected net benefit, EVPI and EVSI by nested bootstrap.

One outer iteration ``t`` draws a case-mix weighting ``w_t`` of the
development sample, refits the model under it and treats the refit as the
truth (``pi_t``).  It records

* the current-information NB of each strategy: decisions from the model
  fitted on ``d``, evaluated against ``pi_t``;
* the NB of perfect information (decisions from ``pi_t`` itself);
* for each future size ``n*``: the NB after drawing ``n*`` extra rows from the
  weighted sample, simulating their outcomes from ``pi_t``, merging them with
  ``d`` and refitting.

Future samples of increasing size are nested within an iteration (the sample
for a smaller ``n*`` is a prefix of the one for a larger ``n*``).

A merged sample is never materialised.  Each future row is a copy of a
development row, so the merged sample is represented by per-row
multiplicities ``m_j = 1 + c_j`` and event counts ``k_j = y_j + s_j``; the
binomial-weighted fit on ``(x, k/m, m)`` has the same likelihood as the
stacked fit, and NB sums over the stacked rows equal ``m``-weighted sums over
``d``.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import netbenefit as nb
from .glm import Coefficients, FitError, FitOptions, fit_logistic, predict_risk
from .netbenefit import ThresholdGrid
from .resample import (
    FUTURE,
    OUTER,
    RngSpec,
    bayesian_bootstrap_weights,
    draw_future_covariates,
    ordinary_bootstrap_counts,
    regenerate_outcomes,
)

log = logging.getLogger(__name__)

OUTER_SCHEMES = ("bayesian", "ordinary")
ESTIMATORS = ("winner_after_average", "winner_per_draw")
INEQUALITIES = ("non_strict", "strict")
POPULATIONS = ("merged_sample", "weighted_development")


class VoiError(RuntimeError):
    pass


@dataclass(frozen=True)
class VoiConfig:
    T: int = 1000
    future_sizes: tuple[int, ...] = ()
    grid: ThresholdGrid = field(default_factory=ThresholdGrid.default)
    outer_scheme: str = "bayesian"
    estimator: str = "winner_after_average"
    inequality: str = "non_strict"
    evaluation_population: str = "merged_sample"
    rng: RngSpec = field(default_factory=RngSpec)
    fit_options: FitOptions = field(default_factory=FitOptions)
    max_degenerate_fraction: float = 0.01
    threads: int = 1
    chunk_size: int = 250

    def __post_init__(self):
        if self.T < 2:
            raise ValueError("T must be at least 2")
        sizes = tuple(int(s) for s in self.future_sizes)
        if any(s < 0 for s in sizes):
            raise ValueError("future sizes must be nonnegative")
        if len(set(sizes)) != len(sizes):
            raise ValueError("future sizes must be distinct")
        object.__setattr__(self, "future_sizes", sizes)
        if not isinstance(self.grid, ThresholdGrid):
            object.__setattr__(self, "grid", ThresholdGrid(self.grid))
        if not isinstance(self.rng, RngSpec):
            object.__setattr__(self, "rng", RngSpec(int(self.rng)))
        for name, allowed in (("outer_scheme", OUTER_SCHEMES), ("estimator", ESTIMATORS),
                              ("inequality", INEQUALITIES),
                              ("evaluation_population", POPULATIONS)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")

    @property
    def strict(self) -> bool:
        return self.inequality == "strict"

    @property
    def seed(self) -> int:
        return self.rng.master_seed


@dataclass
class IterationRecord:
    """NB curves from one outer iteration.

    ``current`` rows are (model, all, perfect); ``future`` has shape
    ``(K, 2, G)`` with rows (model, all) per future size in config order.
    ``future_chosen`` and ``winners`` are filled only for the per-draw
    estimator.
    """

    t: int
    degenerate: bool = False
    reason: str = ""
    current: np.ndarray | None = None
    future: np.ndarray | None = None
    future_chosen: np.ndarray | None = None
    winners: np.ndarray | None = None
    ridge_fallbacks: int = 0


def _stack3(model, all_):
    return np.stack([np.zeros_like(model), model, all_])


def _outer_weights(n, cfg: VoiConfig, t):
    rng = cfg.rng.stream(t, OUTER)
    if cfg.outer_scheme == "bayesian":
        return bayesian_bootstrap_weights(n, rng).w
    return ordinary_bootstrap_counts(n, rng).w


def run_iteration(d, theta_hat: Coefficients, cfg: VoiConfig, t: int,
                  weights=None) -> IterationRecord:
    """Execute outer iteration ``t``.

    ``weights`` overrides the outer case-mix draw (for testing degenerate
    configurations).
    """
    grid = cfg.grid.z_values
    strict = cfg.strict
    opts = cfg.fit_options
    n = d.n
    w = _outer_weights(n, cfg, t) if weights is None else np.asarray(weights, dtype=float)
    fallbacks = 0
    try:
        theta_t = fit_logistic(d.x, d.y, w, opts)
    except FitError as exc:
        return IterationRecord(t, degenerate=True, reason=f"outer fit: {exc}")
    fallbacks += theta_t.ridge_fallback
    pi_t = predict_risk(theta_t, d.x, opts.min_risk_clip)
    dec_hat = predict_risk(theta_hat, d.x, opts.min_risk_clip)

    merged = cfg.evaluation_population == "merged_sample"
    pop_w = np.ones(n) if merged else w
    cur_model = nb.nb_model_curve(dec_hat, pi_t, pop_w, grid, strict)
    cur_all = nb.nb_all_curve(pi_t, pop_w, grid)
    perfect = nb.nb_perfect_curve(pi_t, pop_w, grid, strict)
    current = np.stack([cur_model, cur_all, perfect])

    sizes = cfg.future_sizes
    k_sizes = len(sizes)
    future = np.empty((k_sizes, 2, grid.size))
    per_draw = cfg.estimator == "winner_per_draw"
    chosen = np.empty((k_sizes, grid.size)) if per_draw else None
    winners = np.empty((k_sizes, grid.size), dtype=np.int8) if per_draw else None

    rng = cfg.rng.stream(t, FUTURE)
    counts = np.zeros(n)
    events = np.zeros(n)
    drawn = 0
    for k in sorted(range(k_sizes), key=lambda i: sizes[i]):
        n_star = sizes[k]
        extra = n_star - drawn
        if extra > 0:
            idx = draw_future_covariates(d, w, extra, rng)
            y_star = regenerate_outcomes(idx, pi_t, rng)
            counts += np.bincount(idx, minlength=n)
            events += np.bincount(idx, weights=y_star, minlength=n)
            drawn = n_star
        mult = 1.0 + counts
        target = (d.y + events) / mult
        if n_star == 0:
            theta_plus = theta_hat
        else:
            try:
                theta_plus = fit_logistic(d.x, target, mult, opts)
            except FitError as exc:
                return IterationRecord(t, degenerate=True, reason=f"merged fit n*={n_star}: {exc}")
            fallbacks += theta_plus.ridge_fallback
        dec_plus = predict_risk(theta_plus, d.x, opts.min_risk_clip)
        eval_w = mult if merged else w
        future[k, 0] = nb.nb_model_curve(dec_plus, pi_t, eval_w, grid, strict)
        future[k, 1] = nb.nb_all_curve(pi_t, eval_w, grid)
        if per_draw:
            emp = _stack3(nb.empirical_nb_curve(dec_plus, target, mult, grid, strict),
                          nb.empirical_all_curve(target, mult, grid))
            win = np.argmax(emp, axis=0)
            vals = _stack3(future[k, 0], future[k, 1])
            chosen[k] = np.take_along_axis(vals, win[None, :], axis=0)[0]
            winners[k] = win
    return IterationRecord(t, current=current, future=future, future_chosen=chosen,
                           winners=winners, ridge_fallbacks=fallbacks)


# ---------------------------------------------------------------------------
# Accumulation.  Chunks are reduced in a fixed order with Chan's pairwise
# update, so results do not depend on how many threads produced them.


@dataclass
class Moments:
    count: int = 0
    mean: np.ndarray | float = 0.0
    m2: np.ndarray | float = 0.0

    @classmethod
    def of(cls, stacked: np.ndarray) -> Moments:
        mean = stacked.mean(axis=0)
        return cls(stacked.shape[0], mean, ((stacked - mean) ** 2).sum(axis=0))

    def merge(self, other: Moments) -> Moments:
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta**2 * (self.count * other.count / n)
        return Moments(n, mean, m2)

    @property
    def sd(self):
        if self.count < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.count - 1))

    @property
    def se(self):
        return self.sd / math.sqrt(max(self.count, 1))


@dataclass
class RecordSummary:
    """Reduced iteration records."""

    iterations: int = 0
    degenerate: int = 0
    degenerate_reasons: list = field(default_factory=list)
    ridge_fallbacks: int = 0
    current: Moments = field(default_factory=Moments)
    evpi_gap: Moments = field(default_factory=Moments)
    future: Moments = field(default_factory=Moments)
    future_chosen: Moments = field(default_factory=Moments)
    winner_counts: np.ndarray | None = None
    increments: list = field(default_factory=list)

    @property
    def usable(self) -> int:
        return self.current.count

    def increment_matrix(self) -> np.ndarray:
        return np.concatenate(self.increments, axis=0) if self.increments else np.zeros((0, 0))

    def add(self, records: Sequence[IterationRecord]) -> RecordSummary:
        self.iterations += len(records)
        ok = [r for r in records if not r.degenerate]
        for r in records:
            if r.degenerate:
                self.degenerate += 1
                if len(self.degenerate_reasons) < 20:
                    self.degenerate_reasons.append({"t": r.t, "reason": r.reason})
        self.ridge_fallbacks += sum(r.ridge_fallbacks for r in ok)
        if not ok:
            return self
        cur = np.stack([r.current for r in ok])
        self.current = self.current.merge(Moments.of(cur))
        # perfect minus each strategy, for the EVPI standard error
        gap = cur[:, 2:3, :] - np.concatenate(
            [np.zeros_like(cur[:, :1, :]), cur[:, 0:2, :]], axis=1)
        self.evpi_gap = self.evpi_gap.merge(Moments.of(gap))
        self.increments.append(cur[:, 0, :] - np.maximum(0.0, cur[:, 1, :]))
        fut = np.stack([r.future for r in ok])
        self.future = self.future.merge(Moments.of(fut))
        if ok[0].future_chosen is not None:
            self.future_chosen = self.future_chosen.merge(
                Moments.of(np.stack([r.future_chosen for r in ok])))
            win = np.stack([r.winners for r in ok])
            counts = np.stack([(win == i).sum(axis=0) for i in range(3)], axis=1)
            self.winner_counts = counts if self.winner_counts is None else self.winner_counts + counts
        return self


def summarize(records: Sequence[IterationRecord]) -> RecordSummary:
    return RecordSummary().add(list(records))


def _as_summary(records) -> RecordSummary:
    return records if isinstance(records, RecordSummary) else summarize(records)


# ---------------------------------------------------------------------------


@dataclass
class EnbTable:
    z: np.ndarray
    enb_model: np.ndarray
    enb_all: np.ndarray
    enb_perfect: np.ndarray
    mc_se: dict

    @property
    def enb_none(self) -> np.ndarray:
        return np.zeros_like(self.z)

    def strategies(self) -> np.ndarray:
        """ENB stacked as (none, model, all), shape (3, G)."""
        return np.stack([self.enb_none, self.enb_model, self.enb_all])


def enb_current(records, cfg: VoiConfig) -> EnbTable:
    """Average current-information NB over usable iterations."""
    s = _as_summary(records)
    if s.usable < 2:
        raise VoiError(f"need at least 2 usable iterations, got {s.usable}")
    mean, se = s.current.mean, s.current.se
    return EnbTable(
        z=cfg.grid.z_values,
        enb_model=mean[0], enb_all=mean[1], enb_perfect=mean[2],
        mc_se={"none": np.zeros_like(mean[0]), "model": se[0], "all": se[1], "perfect": se[2]},
    )


def pick_winner(enb) -> int:
    """Index of the best strategy; ties go to the lower index."""
    enb = np.asarray(enb, dtype=float)
    if enb.shape != (3,) or not np.all(np.isfinite(enb)):
        raise ValueError("need three finite expected net benefits")
    return int(np.argmax(enb))


def pick_winners(enb_stack) -> np.ndarray:
    """Vectorised :func:`pick_winner` over a (3, G) array."""
    return np.argmax(np.asarray(enb_stack), axis=0)


def compute_evpi(enb: EnbTable) -> np.ndarray:
    best = np.maximum(0.0, np.maximum(enb.enb_model, enb.enb_all))
    return enb.enb_perfect - best


@dataclass
class VoiResult:
    z: np.ndarray
    future_sizes: tuple[int, ...]
    winner_current: np.ndarray
    evpi: np.ndarray
    evpi_se: np.ndarray
    evsi_raw: np.ndarray  # (G, K)
    mc_se: np.ndarray  # (G, K)
    diagnostics: dict

    @property
    def evsi_clamped(self) -> np.ndarray:
        return np.maximum(0.0, self.evsi_raw)

    def at(self, z: float) -> dict:
        i = int(np.argmin(np.abs(self.z - z)))
        return {
            "z": float(self.z[i]),
            "winner": int(self.winner_current[i]),
            "evpi": float(self.evpi[i]),
            "evsi": {int(n): float(self.evsi_raw[i, k]) for k, n in enumerate(self.future_sizes)},
        }


def compute_evsi(records, enb: EnbTable, cfg: VoiConfig) -> VoiResult:
    s = _as_summary(records)
    k_sizes = len(cfg.future_sizes)
    if s.usable and np.shape(s.future.mean)[0] != k_sizes:
        raise VoiError("records do not cover every future size")
    current_best = np.max(enb.strategies(), axis=0)
    winner_current = pick_winners(enb.strategies())
    evpi = compute_evpi(enb)
    g = cfg.grid.z_values.size
    cols = np.arange(g)
    evpi_se = s.evpi_gap.se[winner_current, cols] if s.usable else np.zeros(g)

    evsi = np.empty((g, k_sizes))
    se = np.empty((g, k_sizes))
    diagnostics = {
        "iterations": s.iterations,
        "usable_iterations": s.usable,
        "degenerate_iterations": s.degenerate,
        "degenerate_examples": s.degenerate_reasons,
        "ridge_fallback_fits": s.ridge_fallbacks,
    }
    for k in range(k_sizes):
        if cfg.estimator == "winner_after_average":
            fmean = s.future.mean[k]
            stack = np.stack([np.zeros(g), fmean[0], fmean[1]])
            win = pick_winners(stack)
            evsi[:, k] = stack[win, cols] - current_best
            fse = s.future.se[k]
            se_stack = np.stack([np.zeros(g), fse[0], fse[1]])
            se[:, k] = se_stack[win, cols]
        else:
            evsi[:, k] = s.future_chosen.mean[k] - current_best
            se[:, k] = s.future_chosen.se[k]
    if cfg.estimator == "winner_per_draw" and s.winner_counts is not None:
        diagnostics["winner_frequencies"] = {
            int(n): s.winner_counts[k].tolist()
            for k, n in enumerate(cfg.future_sizes)
        }
    return VoiResult(
        z=cfg.grid.z_values, future_sizes=cfg.future_sizes,
        winner_current=winner_current, evpi=evpi, evpi_se=evpi_se,
        evsi_raw=evsi, mc_se=se, diagnostics=diagnostics,
    )


def scale_to_population(per_decision_value: float, annual_decisions: float, z: float) -> dict:
    """Express a per-decision NB gain as yearly net true positives and
    equivalently averted false positives."""
    if annual_decisions < 0:
        raise ValueError("annual_decisions must be nonnegative")
    nb._check_z(z)
    net_tp = per_decision_value * annual_decisions
    return {"net_tp_per_year": net_tp, "fp_averted_per_year": net_tp * (1 - z) / z}


# ---------------------------------------------------------------------------


@dataclass
class VoiRun:
    config: VoiConfig
    theta_hat: Coefficients
    summary: RecordSummary
    enb: EnbTable
    result: VoiResult

    def decision_curve(self, level: float = 0.95) -> dict:
        """ENBs with a percentile interval on model minus best default."""
        inc = self.summary.increment_matrix()
        lo, hi = np.percentile(inc, [50 * (1 - level), 50 * (1 + level)], axis=0)
        return {
            "z": self.enb.z, "enb_none": self.enb.enb_none, "enb_model": self.enb.enb_model,
            "enb_all": self.enb.enb_all, "ci_lo": lo, "ci_hi": hi,
        }


def _run_chunk(d, theta_hat, cfg, ts):
    return [run_iteration(d, theta_hat, cfg, t) for t in ts]


def run_voi(d, cfg: VoiConfig, theta_hat: Coefficients | None = None) -> VoiRun:
    """Run all ``T`` outer iterations and reduce them to ENB, EVPI and EVSI."""
    if theta_hat is None:
        theta_hat = fit_logistic(d.x, d.y, None, cfg.fit_options)
    chunks = [range(a, min(a + cfg.chunk_size, cfg.T)) for a in range(0, cfg.T, cfg.chunk_size)]
    summary = RecordSummary()
    threads = cfg.threads if cfg.threads > 0 else _cpu_count()
    if threads == 1 or len(chunks) == 1:
        for ts in chunks:
            summary.add(_run_chunk(d, theta_hat, cfg, ts))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # map yields in submission order, so the reduction order is fixed
            for recs in pool.map(lambda ts: _run_chunk(d, theta_hat, cfg, ts), chunks):
                summary.add(recs)
    limit = cfg.max_degenerate_fraction * cfg.T
    if summary.degenerate > limit:
        raise VoiError(
            f"{summary.degenerate} of {cfg.T} iterations were degenerate "
            f"(limit {cfg.max_degenerate_fraction:.0%}); first: {summary.degenerate_reasons[:3]}"
        )
    if summary.degenerate:
        log.warning("%d degenerate iterations excluded", summary.degenerate)
    enb = enb_current(summary, cfg)
    result = compute_evsi(summary, enb, cfg)
    return VoiRun(cfg, theta_hat, summary, enb, result)


def _cpu_count() -> int:
    if hasattr(os, "sched_getaffinity"):
        return len(os.sched_getaffinity(0))
    return os.cpu_count() or 1
