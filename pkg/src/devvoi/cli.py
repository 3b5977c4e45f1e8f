"""Command-line front end.

Usage::

    devvoi --config run.cfg [--seed N] [--threads N] [--out DIR]
    devvoi-plot-data voi.csv [-o voi_wide.csv]

The config file is flat ``key = value`` text; list values are comma
separated.  See README.md for the full key list.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import ColumnSpec, load_csv
from .glm import FitOptions
from .netbenefit import ThresholdGrid
from .resample import ORACLE, SYNTH, RngSpec
from .synth import GeneratorSpec, Marginal, generate, true_nb_oracle
from .voi import VoiConfig, run_voi, scale_to_population

FORMAT_VERSION = 1
COMMANDS = ("decision-curve", "voi", "synth-check")
DEFAULT_REPORTING = (0.02, 0.21)
# keys that cannot change any output byte
NON_SEMANTIC_KEYS = {"threads", "out"}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing


def read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text if not text.lstrip().startswith("[") else text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw = {}
    for section in parser.sections():
        raw.update(parser[section])
    base = path.parent
    for key in ("data",):
        if key in raw and not os.path.isabs(raw[key]):
            raw[key] = str(base / raw[key])
    return raw


def _list(value: str) -> list[str]:
    return [v.strip() for v in value.replace("\n", ",").split(",") if v.strip()]


def parse_schema(value: str) -> list[ColumnSpec]:
    """``name:kind[:lvl|lvl...]`` entries; ``kind`` ``outcome`` marks the outcome."""
    specs = []
    for entry in _list(value):
        parts = [p.strip() for p in entry.split(":", 2)]
        if len(parts) < 2:
            raise ConfigError(f"schema entry {entry!r} needs name:kind")
        name, kind = parts[0], parts[1]
        levels = tuple(parts[2].split("|")) if len(parts) == 3 else ()
        if kind == "outcome":
            specs.append(ColumnSpec(name, "binary", "outcome", levels))
        else:
            specs.append(ColumnSpec(name, kind, "predictor", levels))
    return specs


def parse_grid(value: str) -> ThresholdGrid:
    value = value.strip()
    if value.count(":") == 2:
        lo, hi, step = (float(v) for v in value.split(":"))
        k = int(round((hi - lo) / step))
        return ThresholdGrid(np.round(lo + step * np.arange(k + 1), 12))
    return ThresholdGrid([float(v) for v in _list(value)])


def parse_marginal(entry: str) -> Marginal:
    """``continuous(mean|sd)``, ``binary(q)`` or ``categorical(p0|p1|...)``."""
    entry = entry.strip()
    if not entry.endswith(")") or "(" not in entry:
        raise ConfigError(f"bad case-mix entry {entry!r}")
    kind, args = entry[:-1].split("(", 1)
    vals = [float(v) for v in args.split("|") if v.strip()]
    kind = kind.strip()
    if kind == "continuous":
        return Marginal("continuous", mean=vals[0], sd=vals[1])
    if kind == "binary":
        return Marginal("binary", q=vals[0])
    if kind == "categorical":
        return Marginal("categorical", probs=tuple(vals))
    raise ConfigError(f"unknown case-mix kind {kind!r}")


def build_settings(raw: dict, seed=None, threads=None, out=None) -> dict:
    """Resolve raw config strings into typed settings."""
    raw = dict(raw)
    if seed is not None:
        raw["seed"] = str(seed)
    if threads is not None:
        raw["threads"] = str(threads)
    if out is not None:
        raw["out"] = str(out)
    command = raw.get("command", "voi")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {command!r}")
    try:
        seed_val = int(raw.get("seed", "0"))
        voi_cfg = VoiConfig(
            T=int(raw.get("T", "1000")),
            future_sizes=tuple(int(v) for v in _list(raw.get("future_sizes", ""))),
            grid=parse_grid(raw["grid"]) if "grid" in raw else ThresholdGrid.default(),
            outer_scheme=raw.get("outer_scheme", "bayesian"),
            estimator=raw.get("estimator", "winner_after_average"),
            inequality=raw.get("inequality", "non_strict"),
            evaluation_population=raw.get("evaluation_population", "merged_sample"),
            rng=RngSpec(seed_val),
            fit_options=FitOptions(
                max_iter=int(raw.get("max_iter", "50")),
                score_tol=float(raw.get("score_tol", "1e-8")),
                ridge_lambda=float(raw.get("ridge_lambda", "0")),
            ),
            max_degenerate_fraction=float(raw.get("max_degenerate_fraction", "0.01")),
            threads=int(raw.get("threads", "1")),
            chunk_size=int(raw.get("chunk_size", "250")),
        )
        reporting = [float(v) for v in _list(raw.get("reporting_thresholds", ""))] or list(
            DEFAULT_REPORTING)
        annual = float(raw.get("annual_decisions", "0"))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    if command == "decision-curve":
        voi_cfg = dataclasses.replace(voi_cfg, future_sizes=())

    settings = {"command": command, "voi": voi_cfg, "reporting": reporting,
                "annual_decisions": annual, "out": Path(raw.get("out", "devvoi_out")),
                "raw": raw}
    if command == "synth-check":
        try:
            case_mix = tuple(parse_marginal(e) for e in _list(raw["synth_case_mix"]))
            theta = np.array([float(v) for v in _list(raw["synth_theta"])])
            settings["synth"] = GeneratorSpec(theta, case_mix, int(raw.get("synth_n", "1000")))
            settings["synth_n_mc"] = int(raw.get("synth_n_mc", "200000"))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid synth config: {exc}") from None
    else:
        if "data" not in raw:
            raise ConfigError("config lacks 'data'")
        if "schema" not in raw:
            raise ConfigError("config lacks 'schema'")
        settings["data"] = Path(raw["data"])
        settings["schema"] = parse_schema(raw["schema"])
        if not settings["data"].is_file():
            raise ConfigError(f"data file not found: {settings['data']}")
    return settings


def config_hash(raw: dict) -> str:
    semantic = {k: v for k, v in sorted(raw.items()) if k not in NON_SEMANTIC_KEYS}
    return hashlib.sha256(json.dumps(semantic, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def decision_curve_csv(curve: dict) -> str:
    cols = ["z", "enb_none", "enb_model", "enb_all", "ci_lo", "ci_hi"]
    return _csv_text(cols, zip(*(curve[c] for c in cols)))


def voi_csv(result) -> str:
    rows = []
    clamped = result.evsi_clamped
    for i, z in enumerate(result.z):
        for k, n in enumerate(result.future_sizes):
            rows.append((z, n, result.evpi[i], result.evsi_raw[i, k], clamped[i, k],
                         result.mc_se[i, k]))
    return _csv_text(["z", "future_n", "evpi", "evsi_raw", "evsi_clamped", "mc_se"], rows)


def render_plot_data(voi_csv_text: str) -> str:
    """Pivot long-format voi.csv text into one column per series."""
    reader = csv.DictReader(io.StringIO(voi_csv_text))
    needed = {"z", "future_n", "evpi", "evsi_clamped"}
    if reader.fieldnames is None or not needed <= set(reader.fieldnames):
        raise ValueError(f"voi table must have columns {sorted(needed)}")
    evpi, evsi, sizes = {}, {}, []
    for line, row in enumerate(reader, start=2):
        try:
            z = float(row["z"])
            n = int(row["future_n"])
            evpi[z] = float(row["evpi"])
            evsi[(z, n)] = float(row["evsi_clamped"])
        except (TypeError, ValueError):
            raise ValueError(f"malformed voi table at line {line}") from None
        if n not in sizes:
            sizes.append(n)
    if not evpi:
        raise ValueError("voi table has an empty threshold grid")
    zs = sorted(evpi)
    header = ["z"] + [f"evsi_n{n}" for n in sizes] + ["evpi"]
    rows = []
    for z in zs:
        try:
            rows.append([z] + [evsi[(z, n)] for n in sizes] + [evpi[z]])
        except KeyError:
            raise ValueError(f"voi table lacks some future sizes at z={z}") from None
    return _csv_text(header, rows)


def _summary(settings, run, started, extra=None) -> dict:
    cfg = settings["voi"]
    res = run.result
    enb = run.enb
    reporting = {}
    for z in settings["reporting"]:
        i = int(np.argmin(np.abs(enb.z - z)))
        entry = {
            "z": float(enb.z[i]),
            "winner": ["treat_none", "use_model", "treat_all"][int(res.winner_current[i])],
            "enb": {"none": 0.0, "model": float(enb.enb_model[i]), "all": float(enb.enb_all[i]),
                    "perfect": float(enb.enb_perfect[i])},
            "evpi": float(res.evpi[i]),
            "evpi_mc_se": float(res.evpi_se[i]),
            "evsi": {str(n): float(res.evsi_raw[i, k]) for k, n in enumerate(res.future_sizes)},
        }
        if settings["annual_decisions"] > 0:
            n_dec = settings["annual_decisions"]
            entry["population"] = {
                "annual_decisions": n_dec,
                "evpi": scale_to_population(float(res.evpi[i]), n_dec, float(enb.z[i])),
                "evsi": {str(n): scale_to_population(float(res.evsi_clamped[i, k]), n_dec,
                                                     float(enb.z[i]))
                         for k, n in enumerate(res.future_sizes)},
            }
        reporting[f"{enb.z[i]:g}"] = entry
    out = {
        "format_version": FORMAT_VERSION,
        "package_version": __version__,
        "command": settings["command"],
        "master_seed": cfg.seed,
        "config_hash": config_hash(settings["raw"]),
        "config": settings["raw"],
        "resolved": {
            "T": cfg.T, "future_sizes": list(cfg.future_sizes),
            "grid": [float(z) for z in cfg.grid.z_values],
            "outer_scheme": cfg.outer_scheme, "estimator": cfg.estimator,
            "inequality": cfg.inequality, "evaluation_population": cfg.evaluation_population,
        },
        "theta_hat": run.theta_hat.beta.tolist(),
        "reporting": reporting,
        "diagnostics": res.diagnostics,
        "elapsed_seconds": round(time.perf_counter() - started, 3),
    }
    if extra:
        out.update(extra)
    return out


def run(settings: dict) -> dict:
    """Execute one configured command and write its outputs.

    Returns the summary dictionary that was written to ``summary.json``.
    """
    started = time.perf_counter()
    out: Path = settings["out"]
    cfg: VoiConfig = settings["voi"]
    extra = {}
    if settings["command"] == "synth-check":
        spec = settings["synth"]
        d = generate(spec, RngSpec(cfg.seed).stream(0, SYNTH))
    else:
        d = load_csv(settings["data"], settings["schema"])
    voi_run = run_voi(d, cfg)
    atomic_write(out / "decision_curve.csv", decision_curve_csv(voi_run.decision_curve()))
    if cfg.future_sizes:
        text = voi_csv(voi_run.result)
        atomic_write(out / "voi.csv", text)
        atomic_write(out / "voi_wide.csv", render_plot_data(text))
    if settings["command"] == "synth-check":
        oracle = true_nb_oracle(settings["synth"], voi_run.theta_hat, cfg.grid,
                                settings["synth_n_mc"], RngSpec(cfg.seed).stream(0, ORACLE),
                                cfg.strict)
        rows = zip(oracle.z, voi_run.enb.enb_model, oracle.nb_model, oracle.se["model"],
                   voi_run.enb.enb_all, oracle.nb_all, oracle.nb_perfect)
        atomic_write(out / "synth_check.csv", _csv_text(
            ["z", "enb_model", "true_nb_model", "true_nb_model_se", "enb_all", "true_nb_all",
             "true_nb_perfect"], rows))
        extra["synth"] = {"n": spec.n, "theta_true": spec.theta_true.tolist(),
                          "n_mc": settings["synth_n_mc"]}
    summary = _summary(settings, voi_run, started, extra)
    atomic_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _error(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="devvoi", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="run configuration file")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--threads", type=int, help="worker threads, 0 = all available cores")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    if args.verbose:
        import logging

        logging.basicConfig(level=logging.INFO)
    try:
        settings = build_settings(read_config(args.config), args.seed, args.threads, args.out)
        run(settings)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a JSON error line
        return _error(exc, 1)
    return 0


def plot_data_main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="devvoi-plot-data",
                                 description="Pivot voi.csv into one column per series")
    ap.add_argument("voi_csv")
    ap.add_argument("-o", "--output", help="output path (default: stdout)")
    args = ap.parse_args(argv)
    try:
        text = render_plot_data(Path(args.voi_csv).read_text(encoding="utf-8"))
    except Exception as exc:  # noqa: BLE001
        return _error(exc, 1)
    if args.output:
        atomic_write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
