"""Synthetic development samples from a known data-generating process.

Covariates are drawn independently from per-predictor marginals and the
outcome from a logistic model with known coefficients, so the true risk of
every row, and the true NB of any model, are available for checking the
estimators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import netbenefit as nb
from .data import ColumnSpec, Dataset
from .glm import predict_risk, sigmoid


@dataclass(frozen=True)
class Marginal:
    """One predictor's marginal distribution.

    ``kind`` is ``"continuous"`` (normal with ``mean``, ``sd``),
    ``"binary"`` (Bernoulli ``q``) or ``"categorical"`` (``probs`` over
    levels; the first level is the reference and contributes no column).
    """

    kind: str
    mean: float = 0.0
    sd: float = 1.0
    q: float = 0.5
    probs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "continuous" and not self.sd > 0:
            raise ValueError("sd must be positive")
        if self.kind == "binary" and not 0 <= self.q <= 1:
            raise ValueError("q must be a probability")
        if self.kind == "categorical":
            p = np.asarray(self.probs, dtype=float)
            if p.size < 2 or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
                raise ValueError("categorical probs must be a probability vector of length >= 2")
        if self.kind not in ("continuous", "binary", "categorical"):
            raise ValueError(f"unknown marginal kind {self.kind!r}")

    @property
    def width(self) -> int:
        return len(self.probs) - 1 if self.kind == "categorical" else 1


@dataclass(frozen=True)
class GeneratorSpec:
    theta_true: np.ndarray
    case_mix: tuple[Marginal, ...]
    n: int

    def __post_init__(self):
        theta = np.asarray(getattr(self.theta_true, "beta", self.theta_true), dtype=float)
        object.__setattr__(self, "theta_true", theta)
        object.__setattr__(self, "case_mix", tuple(self.case_mix))
        p = 1 + sum(m.width for m in self.case_mix)
        if theta.shape != (p,):
            raise ValueError(f"theta_true has {theta.size} entries, case mix implies {p}")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def p(self) -> int:
        return self.theta_true.size


def draw_covariates(case_mix: Sequence[Marginal], n: int, rng: np.random.Generator) -> np.ndarray:
    cols = [np.ones(n)]
    for m in case_mix:
        if m.kind == "continuous":
            cols.append(rng.normal(m.mean, m.sd, n))
        elif m.kind == "binary":
            cols.append((rng.random(n) < m.q).astype(float))
        else:
            level = rng.choice(len(m.probs), size=n, p=np.asarray(m.probs))
            for j in range(1, len(m.probs)):
                cols.append((level == j).astype(float))
    return np.column_stack(cols)


def _schema(case_mix):
    specs = []
    for j, m in enumerate(case_mix, start=1):
        if m.kind == "categorical":
            levels = tuple(str(i) for i in range(len(m.probs)))
            specs.append(ColumnSpec(f"x{j}", "categorical", levels=levels))
        else:
            specs.append(ColumnSpec(f"x{j}", m.kind))
    specs.append(ColumnSpec("y", "binary", "outcome"))
    return tuple(specs)


def _column_names(case_mix):
    names = ["intercept"]
    for j, m in enumerate(case_mix, start=1):
        if m.kind == "categorical":
            names += [f"x{j}[{i}]" for i in range(1, len(m.probs))]
        else:
            names.append(f"x{j}")
    return tuple(names)


def generate(spec: GeneratorSpec, rng: np.random.Generator, max_tries: int = 100) -> Dataset:
    """Draw a development sample; redraws until both outcome classes occur."""
    for _ in range(max_tries):
        x = draw_covariates(spec.case_mix, spec.n, rng)
        y = (rng.random(spec.n) < sigmoid(x @ spec.theta_true)).astype(float)
        if 0 < y.sum() < spec.n and spec.n > spec.p:
            return Dataset(x, y, _schema(spec.case_mix), _column_names(spec.case_mix))
        if spec.n <= spec.p:
            break
    raise ValueError(f"could not generate a usable sample in {max_tries} tries")


def to_rows(d: Dataset, spec: GeneratorSpec) -> list[dict]:
    """Raw CSV records for a generated dataset, matching its schema."""
    rows = []
    for xi, yi in zip(d.x, d.y):
        row, col = {}, 1
        for j, m in enumerate(spec.case_mix, start=1):
            if m.kind == "categorical":
                dummies = xi[col:col + m.width]
                row[f"x{j}"] = str(int(np.argmax(dummies)) + 1 if dummies.any() else 0)
            elif m.kind == "binary":
                row[f"x{j}"] = str(int(xi[col]))
            else:
                row[f"x{j}"] = repr(float(xi[col]))
            col += m.width
        row["y"] = str(int(yi))
        rows.append(row)
    return rows


def true_nb_oracle(spec: GeneratorSpec, decision_model, grid, n_mc: int,
                   rng: np.random.Generator, strict: bool = False) -> nb.NbTable:
    """Population NB of ``decision_model`` under the known truth.

    Expectations are taken by Monte Carlo over ``n_mc`` fresh covariate draws
    with per-threshold standard errors in ``table.se``.
    """
    if n_mc < 10**5:
        raise ValueError("n_mc must be at least 1e5")
    z = np.asarray(getattr(grid, "z_values", grid), dtype=float)
    x = draw_covariates(spec.case_mix, n_mc, rng)
    truth = sigmoid(x @ spec.theta_true)
    decision = predict_risk(decision_model, x)
    r = nb.harm_ratio(z)
    gain = truth[:, None] - (1 - truth[:, None]) * r[None, :]
    model_terms = np.where(nb._treated(decision[:, None], z[None, :], strict), gain, 0.0)
    perfect_terms = np.where(nb._treated(truth[:, None], z[None, :], strict), gain, 0.0)
    root_n = np.sqrt(n_mc)
    return nb.NbTable(
        z=z,
        nb_model=model_terms.mean(axis=0),
        nb_all=gain.mean(axis=0),
        nb_perfect=perfect_terms.mean(axis=0),
        se={
            "model": model_terms.std(axis=0, ddof=1) / root_n,
            "all": gain.std(axis=0, ddof=1) / root_n,
            "perfect": perfect_terms.std(axis=0, ddof=1) / root_n,
        },
    )


def gusto_like_spec(n: int = 1000, n_predictors: int = 5) -> GeneratorSpec:
    """A five-predictor world with roughly 7% outcome prevalence."""
    if n_predictors != 5:
        raise ValueError("only the five-predictor world is predefined")
    case_mix = (
        Marginal("continuous", 0.0, 1.0),
        Marginal("binary", q=0.25),
        Marginal("continuous", 0.0, 1.0),
        Marginal("binary", q=0.15),
        Marginal("continuous", 0.0, 1.0),
    )
    theta = np.array([-3.1, 1.0, 0.5, 0.3, 0.6, 0.0])
    return GeneratorSpec(theta, case_mix, n)


__all__ = [
    "Marginal", "GeneratorSpec", "draw_covariates", "generate",
    "to_rows", "true_nb_oracle", "gusto_like_spec",
]
