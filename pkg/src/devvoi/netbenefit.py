"""Net benefit of treat-none, use-model, treat-all and perfect information.

All quantities are in net true positives per decision.  ``eval_risks`` play
the role of the true risks of the population rows and ``decision_risks`` are
what the model predicts for the same rows; ``w`` are row weights describing
the population.  A row is treated when its decision risk is ``>= z`` (or
``> z`` with ``strict=True``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NONE, MODEL, ALL = 0, 1, 2
STRATEGIES = ("none", "model", "all")


@dataclass(frozen=True)
class ThresholdGrid:
    z_values: np.ndarray

    def __post_init__(self):
        z = np.array(self.z_values, dtype=float).ravel()
        if z.size == 0:
            raise ValueError("threshold grid is empty")
        if not np.all((z > 0) & (z < 1)):
            raise ValueError("thresholds must lie strictly inside (0, 1)")
        if np.any(np.diff(z) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        z.flags.writeable = False
        object.__setattr__(self, "z_values", z)

    def __len__(self):
        return self.z_values.size

    @classmethod
    def default(cls) -> ThresholdGrid:
        """0.01, 0.02, ..., 0.99."""
        return cls(np.arange(1, 100) / 100.0)

    def index(self, z: float) -> int:
        i = int(np.argmin(np.abs(self.z_values - z)))
        if abs(self.z_values[i] - z) > 1e-9:
            raise KeyError(f"threshold {z} not on grid")
        return i


@dataclass
class NbTable:
    z: np.ndarray
    nb_model: np.ndarray
    nb_all: np.ndarray
    nb_perfect: np.ndarray
    se: dict = field(default_factory=dict)

    @property
    def nb_none(self) -> np.ndarray:
        return np.zeros_like(self.z)


def harm_ratio(z):
    return z / (1.0 - z)


def _check_z(z):
    z = np.asarray(z, dtype=float)
    if not np.all((z > 0) & (z < 1)):
        raise ValueError(f"threshold must lie strictly inside (0, 1), got {z}")
    return z


def _weights(w, n):
    if w is None:
        return np.ones(n)
    w = np.asarray(getattr(w, "w", w), dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weight length {w.shape} does not match {n} rows")
    return w


def _treated(decision_risks, z, strict):
    return decision_risks > z if strict else decision_risks >= z


def nb_treat_all(eval_risks, w, z) -> float:
    _check_z(z)
    pi = np.asarray(eval_risks, dtype=float)
    w = _weights(w, pi.size)
    return float(np.dot(w, pi - (1 - pi) * harm_ratio(z)) / w.sum())


def nb_model(decision_risks, eval_risks, w, z, strict: bool = False) -> float:
    _check_z(z)
    dr = np.asarray(decision_risks, dtype=float)
    pi = np.asarray(eval_risks, dtype=float)
    if dr.shape != pi.shape:
        raise ValueError("decision and evaluation risks differ in length")
    w = _weights(w, pi.size)
    gain = np.where(_treated(dr, z, strict), pi - (1 - pi) * harm_ratio(z), 0.0)
    return float(np.dot(w, gain) / w.sum())


def nb_perfect(eval_risks, w, z, strict: bool = False) -> float:
    """NB of treating exactly the rows whose true risk clears the threshold."""
    return nb_model(eval_risks, eval_risks, w, z, strict)


def empirical_nb(decision_risks, y, w, z, strict: bool = False) -> float:
    """Plug-in NB using observed outcomes (or any per-row event probability)."""
    _check_z(z)
    dr = np.asarray(decision_risks, dtype=float)
    y = np.asarray(y, dtype=float)
    if dr.shape != y.shape:
        raise ValueError("decision risks and outcomes differ in length")
    w = _weights(w, y.size)
    treated = _treated(dr, z, strict)
    tp = np.dot(w, treated * y)
    fp = np.dot(w, treated * (1 - y))
    return float((tp - harm_ratio(z) * fp) / w.sum())


# ---------------------------------------------------------------------------
# Whole-grid versions.  O(n + G) per call: each row is binned by how many
# grid thresholds it clears and the bins are tail-summed.


def _tail_sums(k, values, g):
    """``out[i] = sum(values[k > i])`` for i in range(g)."""
    binned = np.bincount(k, weights=values, minlength=g + 1)
    tail = np.cumsum(binned[::-1])[::-1]
    return tail[1:]


def _cleared(grid, decision_risks, strict):
    # number of thresholds z_i with dr >= z_i (or dr > z_i)
    side = "left" if strict else "right"
    return np.searchsorted(grid, decision_risks, side=side)


def nb_all_curve(eval_risks, w, grid) -> np.ndarray:
    z = np.asarray(getattr(grid, "z_values", grid), dtype=float)
    pi = np.asarray(eval_risks, dtype=float)
    w = _weights(w, pi.size)
    sw = w.sum()
    return (np.dot(w, pi) - harm_ratio(z) * np.dot(w, 1 - pi)) / sw


def nb_model_curve(decision_risks, eval_risks, w, grid, strict: bool = False) -> np.ndarray:
    z = np.asarray(getattr(grid, "z_values", grid), dtype=float)
    dr = np.asarray(decision_risks, dtype=float)
    pi = np.asarray(eval_risks, dtype=float)
    w = _weights(w, pi.size)
    k = _cleared(z, dr, strict)
    benefit = _tail_sums(k, w * pi, z.size)
    harm = _tail_sums(k, w * (1 - pi), z.size)
    return (benefit - harm_ratio(z) * harm) / w.sum()


def nb_perfect_curve(eval_risks, w, grid, strict: bool = False) -> np.ndarray:
    return nb_model_curve(eval_risks, eval_risks, w, grid, strict)


def empirical_nb_curve(decision_risks, y, w, grid, strict: bool = False) -> np.ndarray:
    """Grid version of :func:`empirical_nb`; ``y`` may be fractional."""
    return nb_model_curve(decision_risks, y, w, grid, strict)


def empirical_all_curve(y, w, grid) -> np.ndarray:
    return nb_all_curve(y, w, grid)


def nb_table(decision_risks, eval_risks, w, grid, strict: bool = False) -> NbTable:
    z = np.asarray(getattr(grid, "z_values", grid), dtype=float)
    return NbTable(
        z=z,
        nb_model=nb_model_curve(decision_risks, eval_risks, w, z, strict),
        nb_all=nb_all_curve(eval_risks, w, z),
        nb_perfect=nb_perfect_curve(eval_risks, w, z, strict),
    )
