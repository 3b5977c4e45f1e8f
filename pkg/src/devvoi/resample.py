"""Reproducible randomness for the outer and inner sampling levels.

Every iteration ``t`` owns its own generators, derived from the master seed
and a phase tag through :class:`numpy.random.SeedSequence` spawn keys and
fed to the counter-based Philox bit generator::

    stream(t, phase) = Generator(Philox(SeedSequence(master_seed,
                                                     spawn_key=(t, phase))))

with ``phase`` 0 for the outer case-mix draw and 1 for future-sample
generation (2 and 3 are reserved for synthetic data and truth oracles).
Results therefore never depend on the order in which iterations run or on
how many run at once.

Draw protocol within the streams (kept stable so runs replay exactly):

* outer stream: ``n`` standard exponentials (Bayesian bootstrap) or one
  multinomial draw (ordinary bootstrap);
* future stream: for each future-sample increment, ``rng.choice`` for the row
  indices followed by ``rng.random`` uniforms for the outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OUTER = 0
FUTURE = 1
SYNTH = 2
ORACLE = 3
PHASES = {"outer": OUTER, "future": FUTURE, "synth": SYNTH, "oracle": ORACLE}


@dataclass(frozen=True)
class WeightVector:
    """Row weights over a development sample.

    ``form`` is ``"dirichlet"`` (sums to one), ``"counts"`` (nonnegative
    integers summing to the resample size) or ``"uniform"``.
    """

    w: np.ndarray
    form: str = "uniform"

    def __len__(self):
        return self.w.size

    @property
    def normalized(self) -> np.ndarray:
        return self.w / self.w.sum()

    @classmethod
    def uniform(cls, n: int) -> WeightVector:
        return cls(np.full(n, 1.0 / n), "uniform")


@dataclass(frozen=True)
class RngSpec:
    master_seed: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")

    def stream_id(self, t: int, phase) -> tuple[int, int, int]:
        phase = PHASES.get(phase, phase)
        return (int(self.master_seed), int(t), int(phase))

    def stream(self, t: int, phase) -> np.random.Generator:
        seed, t, phase = self.stream_id(t, phase)
        ss = np.random.SeedSequence(seed, spawn_key=(t, phase))
        return np.random.Generator(np.random.Philox(ss))


def bayesian_bootstrap_weights(n: int, rng: np.random.Generator) -> WeightVector:
    """Dirichlet(1, ..., 1) weights as normalised standard exponentials."""
    e = rng.standard_exponential(n)
    return WeightVector(e / e.sum(), "dirichlet")


def ordinary_bootstrap_counts(n: int, rng: np.random.Generator) -> WeightVector:
    counts = rng.multinomial(n, np.full(n, 1.0 / n))
    return WeightVector(counts.astype(float), "counts")


def draw_future_covariates(d, w, n_star: int, rng: np.random.Generator) -> np.ndarray:
    """Row indices of ``d`` drawn i.i.d. with probabilities proportional to ``w``."""
    w = np.asarray(getattr(w, "w", w), dtype=float)
    n = d.n if hasattr(d, "n") else int(d)
    if w.shape != (n,):
        raise ValueError(f"weight length {w.shape} does not match n={n}")
    total = w.sum()
    if not total > 0:
        raise ValueError("cannot sample rows: all weights are zero")
    if n_star == 0:
        return np.zeros(0, dtype=np.intp)
    return rng.choice(n, size=int(n_star), p=w / total)


def regenerate_outcomes(indices, true_risks, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli outcomes with success probability ``true_risks[indices]``."""
    risks = np.asarray(true_risks, dtype=float)
    if np.any((risks < 0) | (risks > 1)) or np.any(np.isnan(risks)):
        raise ValueError("risks must lie in [0, 1]")
    p = risks[np.asarray(indices, dtype=np.intp)]
    return (rng.random(p.size) < p).astype(float)
