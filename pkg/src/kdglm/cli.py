"""Command-line front end: ``kdglm fit`` and ``kdglm simulate``.

Runs are configured by a JSON file; data are CSV files with a header row
and ``NA`` for missing values. Exit codes: 2 configuration, 3 data,
4 numerical failure.
"""

import argparse
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import jsonschema
import numpy as np
import pandas as pd

from .errors import ConfigurationError, DataError, DomainError, ForecastError, FilterError, KDGLMError, NumericalError
from .families import FAMILIES, get_family
from .filter import InterventionSpec, ObservationSeries, filter_series
from .simkit import simulate
from .smoother import DEFAULT_QUANTILES, forecast, smooth
from .state_space import BlockSpec, GaussianMoments, build_structure

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
FLOAT_FORMAT = "%.17g"
Z975 = 1.959963984540054

_num_list = {"type": "array", "items": {"type": "number"}}
_cov = {"oneOf": [{"type": "number"}, _num_list,
                  {"type": "array", "items": _num_list}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "family", "response", "blocks"],
    "properties": {
        "version": {"const": 1},
        "family": {"enum": list(FAMILIES)},
        "response": {"oneOf": [{"type": "string"},
                               {"type": "array", "items": {"type": "string"}, "minItems": 1}]},
        "trials": {"type": "string"},
        "date": {"type": "string"},
        "k": {"type": "integer", "minimum": 1},
        "blocks": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["type"],
                "properties": {
                    "type": {"enum": ["polynomial", "harmonic", "regression"]},
                    "discount": {"type": "number"},
                    "targets": {"type": "array", "items": {"type": "integer"}},
                    "order": {"type": "integer"},
                    "period": {"type": "number"},
                    "index": {"type": "integer"},
                    "columns": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "prior": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"mean": {"oneOf": [{"type": "number"}, _num_list]},
                           "variance": {"oneOf": [{"type": "number"}, _num_list]}},
        },
        "horizon": {"type": "integer", "minimum": 0},
        "quantiles": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                                 "exclusiveMaximum": 1}},
        "forecast_trials": {"type": "integer", "minimum": 0},
        "interventions": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["time"],
                "properties": {
                    "time": {"type": "integer", "minimum": 0},
                    "mode": {"enum": ["inflate", "override"]},
                    "factor": {"type": "number"},
                    "blocks": {"type": "array", "items": {"type": "integer"}},
                    "mean": _num_list,
                    "variance": {"oneOf": [{"type": "number"}, _num_list]},
                },
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {name: {"type": "string"} for name in
                           ("filtered", "smoothed", "forecast", "data", "truth")},
        },
        "fast_poisson": {"type": "boolean"},
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["T", "theta0", "W"],
            "properties": {
                "T": {"type": "integer"},
                "theta0": _num_list,
                "W": _cov,
                "trials": {"type": "integer", "minimum": 0},
                "replications": {"type": "integer", "minimum": 1},
            },
        },
    },
}

DEFAULT_OUTPUTS = {"filtered": "filtered.csv", "smoothed": "smoothed.csv",
                   "forecast": "forecast.csv", "data": "data.csv", "truth": "truth.csv"}


@dataclass
class RunConfig:
    family: str
    response: List[str]
    blocks: Tuple[BlockSpec, ...]
    k: int
    trials: Optional[str] = None
    date: Optional[str] = None
    prior_mean: Optional[np.ndarray] = None
    prior_var: Optional[np.ndarray] = None
    horizon: int = 0
    quantiles: Tuple[float, ...] = DEFAULT_QUANTILES
    forecast_trials: Optional[int] = None
    interventions: Tuple[InterventionSpec, ...] = ()
    outputs: dict = field(default_factory=lambda: dict(DEFAULT_OUTPUTS))
    fast_poisson: bool = False
    simulation: Optional[dict] = None

    @property
    def regression_columns(self):
        return [c for b in self.blocks if b.kind == "regression" for c in b.columns]

    def model(self, covariates=None):
        return build_structure(self.blocks, self.family, self.k, covariates)

    def prior(self, p):
        if self.prior_mean is None and self.prior_var is None:
            return None
        mean = _expand(self.prior_mean if self.prior_mean is not None else 0.0, p, "prior mean")
        var = _expand(self.prior_var if self.prior_var is not None else 1.0, p, "prior variance")
        if np.any(var < 0):
            raise ConfigurationError("prior variances must be nonnegative")
        return GaussianMoments(mean, np.diag(var))


def _expand(value, p, what):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(p, arr[0])
    if arr.size != p:
        raise ConfigurationError(f"{what} has length {arr.size}, model has p={p}")
    return arr


def parse_config(raw: dict) -> RunConfig:
    """Validate a decoded JSON config and build a RunConfig."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config {where}: {exc.message}") from None

    family = raw["family"]
    response = [raw["response"]] if isinstance(raw["response"], str) else list(raw["response"])
    if family == "multinomial":
        if "trials" not in raw:
            raise ConfigurationError("multinomial config needs a trials column")
        k = len(response)
    elif family == "normal":
        k = 2
    else:
        k = 1
    if family != "multinomial" and len(response) != 1:
        raise ConfigurationError(f"{family} family takes a single response column")
    if "k" in raw and raw["k"] != k:
        raise ConfigurationError(f"k={raw['k']} is inconsistent with family {family} (k={k})")

    blocks = []
    for spec in raw["blocks"]:
        spec = dict(spec)
        kind = spec.pop("type")
        if "targets" not in spec:
            if k > 1:
                raise ConfigurationError(f"{kind} block needs explicit targets when k={k}")
            spec["targets"] = [0]
        blocks.append(BlockSpec(kind, **spec))

    n_blocks = len(blocks)
    ivs = []
    for iv in raw.get("interventions", []):
        iv = dict(iv)
        if any(b < 0 or b >= n_blocks for b in iv.get("blocks", [])):
            raise ConfigurationError(f"intervention at t={iv['time']} names a missing block")
        if "variance" in iv:
            mean = np.asarray(iv.get("mean", []), dtype=float)
            iv["cov"] = np.diag(_expand(iv.pop("variance"), mean.size, "intervention variance"))
        try:
            ivs.append(InterventionSpec(**iv))
        except DomainError as exc:
            raise ConfigurationError(f"intervention at t={iv['time']}: {exc}") from None

    prior = raw.get("prior", {})
    outputs = dict(DEFAULT_OUTPUTS)
    outputs.update(raw.get("outputs", {}))
    for name in outputs.values():
        if os.path.basename(name) != name or name in ("", ".", ".."):
            raise ConfigurationError(f"output name {name!r} must be a plain file name")
    return RunConfig(
        family=family, response=response, blocks=tuple(blocks), k=k,
        trials=raw.get("trials"), date=raw.get("date"),
        prior_mean=prior.get("mean"), prior_var=prior.get("variance"),
        horizon=raw.get("horizon", 0),
        quantiles=tuple(raw.get("quantiles", DEFAULT_QUANTILES)),
        forecast_trials=raw.get("forecast_trials"),
        interventions=tuple(ivs), outputs=outputs,
        fast_poisson=raw.get("fast_poisson", False),
        simulation=raw.get("simulation"),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(raw)


def read_csv(path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, na_values=["NA"], keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"data file {path} not found") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from None


def _numeric(df, col):
    if col not in df.columns:
        raise DataError(f"column {col!r} not found in data")
    try:
        return pd.to_numeric(df[col], errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError):
        raise DataError(f"column {col!r} has non-numeric entries") from None


def series_from_frame(cfg: RunConfig, df: pd.DataFrame):
    """Observation series and covariates from a data frame, with validation."""
    if len(df) == 0:
        raise DataError("data has no rows")
    values = np.column_stack([_numeric(df, c) for c in cfg.response])
    if np.any(np.isinf(values)):
        raise DataError("response contains infinite values")
    trials = None
    if cfg.family == "multinomial":
        trials = _numeric(df, cfg.trials)
    else:
        values = values[:, 0]
    obs = np.where(np.isnan(values), 0.0, values)
    if cfg.family in ("poisson", "bernoulli", "multinomial"):
        neg = obs < 0 if obs.ndim == 1 else np.any(obs < 0, axis=1)
        if np.any(neg):
            raise DataError(f"negative count at row {int(np.argmax(neg))}")
        if np.any(obs != np.round(obs)):
            raise DataError("counts must be integers")
    covariates = {c: _numeric(df, c) for c in cfg.regression_columns}
    return ObservationSeries(values, trials), covariates


def _atomic_write(df: pd.DataFrame, path):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            df.to_csv(fh, index=False, float_format=FLOAT_FORMAT, na_rep="NA")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _diag(A):
    return np.diagonal(A, axis1=-2, axis2=-1)


def _add(cols, prefix, arr):
    arr = np.asarray(arr, dtype=float)
    arr = arr.reshape(arr.shape[0], -1)
    for i in range(arr.shape[1]):
        cols[f"{prefix}_{i + 1}"] = arr[:, i]


def _labels(df, cfg):
    cols = {"t": np.arange(len(df))}
    if cfg.date:
        if cfg.date not in df.columns:
            raise DataError(f"date column {cfg.date!r} not found")
        cols[cfg.date] = df[cfg.date].astype(str).to_numpy()
    return cols


def filtered_frame(traj, labels):
    cols = dict(labels)
    _add(cols, "f", traj.f)
    _add(cols, "Q", _diag(traj.Q))
    _add(cols, "fstar", traj.f_star)
    _add(cols, "Qstar", _diag(traj.Q_star))
    _add(cols, "m", traj.m)
    _add(cols, "C", _diag(traj.C))
    cols["log_score"] = traj.log_score
    cols["missing"] = np.array([int(r.missing) for r in traj.records])
    return pd.DataFrame(cols)


def smoothed_frame(sm, labels):
    cols = dict(labels)
    _add(cols, "ms", sm.m)
    _add(cols, "Cs", _diag(sm.C))
    sd = np.sqrt(np.clip(_diag(sm.Q), 0.0, None))
    _add(cols, "fs", sm.f)
    _add(cols, "fs_lower", sm.f - Z975 * sd)
    _add(cols, "fs_upper", sm.f + Z975 * sd)
    return pd.DataFrame(cols)


def forecast_frame(fc):
    cols = {"j": fc.horizons}
    _add(cols, "f", fc.f)
    _add(cols, "Q", _diag(fc.Q))
    _add(cols, "mean", fc.mean)
    _add(cols, "var", fc.var)
    for i, level in enumerate(fc.quantile_levels):
        _add(cols, f"q{level:g}", fc.quantiles[:, i])
    return pd.DataFrame(cols)


def run_fit(cfg: RunConfig, df: pd.DataFrame, out_dir, horizon=None, stream=None):
    """Filter, smooth and forecast; write the three output tables."""
    start = time.perf_counter()
    ys, covariates = series_from_frame(cfg, df)
    model = cfg.model(covariates if covariates else None)
    family = get_family(cfg.family, d=cfg.k, fast_poisson=cfg.fast_poisson)
    labels = _labels(df, cfg)
    J = cfg.horizon if horizon is None else int(horizon)
    if J < 0:
        raise ConfigurationError("forecast horizon must be >= 0")
    if J and cfg.regression_columns:
        raise ConfigurationError("forecasting with regression blocks needs future covariates")

    traj = filter_series(model, ys, prior=cfg.prior(model.p), interventions=cfg.interventions,
                         family=family)
    sm = smooth(traj)
    fc = None
    if J:
        trials = None
        if cfg.family == "multinomial":
            trials = cfg.forecast_trials
            if trials is None:
                seen = ys.trials[~np.isnan(ys.trials)]
                if seen.size == 0:
                    raise DataError("no observed trials to carry into the forecast")
                trials = int(seen[-1])
        fc = forecast(traj.last, model, J, family=family, quantiles=cfg.quantiles, trials=trials)

    os.makedirs(out_dir, exist_ok=True)
    frames = [(cfg.outputs["filtered"], filtered_frame(traj, labels)),
              (cfg.outputs["smoothed"], smoothed_frame(sm, labels))]
    if fc is not None:
        frames.append((cfg.outputs["forecast"], forecast_frame(fc)))
    for name, frame in frames:
        _atomic_write(frame, os.path.join(out_dir, name))
    elapsed = time.perf_counter() - start
    stream = stream or sys.stdout
    print(f"total log predictive score: {traj.total_log_score:.6f}", file=stream)
    print(f"wall time: {elapsed:.3f} s", file=stream)
    return traj, sm, fc


def _sim_frames(cfg: RunConfig, sim):
    data = {}
    y = np.asarray(sim.y)
    if cfg.family == "multinomial":
        for i, name in enumerate(cfg.response):
            data[name] = y[:, i].astype(np.int64)
        data[cfg.trials] = sim.trials.astype(np.int64)
    elif cfg.family in ("poisson", "bernoulli"):
        data[cfg.response[0]] = y.astype(np.int64)
    else:
        data[cfg.response[0]] = y
    data.update(sim.covariates)
    truth = {"t": np.arange(y.shape[0])}
    _add(truth, "theta", sim.theta)
    _add(truth, "lambda", sim.lam)
    return pd.DataFrame(data), pd.DataFrame(truth)


def run_simulate(cfg: RunConfig, seed: int, out_dir, replications=None):
    """Simulate one or more series; replication r uses seed + r."""
    if cfg.simulation is None:
        raise ConfigurationError("config has no simulation block")
    sim_cfg = cfg.simulation
    model = cfg.model()
    if model.p != len(sim_cfg["theta0"]):
        raise ConfigurationError(f"theta0 has length {len(sim_cfg['theta0'])}, model has p={model.p}")
    W = np.asarray(sim_cfg["W"], dtype=float)
    if W.ndim < 2:
        W = np.diag(_expand(W, model.p, "W"))
    trials = sim_cfg.get("trials")
    if cfg.family == "multinomial" and trials is None:
        raise ConfigurationError("multinomial simulation needs trials")
    n_rep = int(replications or sim_cfg.get("replications", 1))
    if n_rep < 1:
        raise ConfigurationError("replications must be >= 1")

    def one(r):
        sim = simulate(model, W, sim_cfg["theta0"], sim_cfg["T"], seed + r, trials=trials)
        target = out_dir if n_rep == 1 else os.path.join(out_dir, f"rep_{r:04d}")
        os.makedirs(target, exist_ok=True)
        data, truth = _sim_frames(cfg, sim)
        _atomic_write(data, os.path.join(target, cfg.outputs["data"]))
        _atomic_write(truth, os.path.join(target, cfg.outputs["truth"]))
        return target

    os.makedirs(out_dir, exist_ok=True)
    if n_rep == 1:
        return [one(0)]
    workers = max(1, min(thread_cap(), n_rep))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n_rep)))


def thread_cap():
    raw = os.environ.get("KDGLM_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def build_parser():
    parser = argparse.ArgumentParser(prog="kdglm",
                                     description="Dynamic generalized linear models via KL projection.")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="filter, smooth and forecast a series")
    fit.add_argument("--config", required=True)
    fit.add_argument("--data", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--horizon", type=int, default=None, help="forecast horizon J (overrides config)")
    fit.add_argument("--fast-poisson", action="store_true",
                     help="use the fast digamma approximation for the Poisson projection")

    sim = sub.add_parser("simulate", help="simulate data with known states")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--replications", type=int, default=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "fit":
            if args.fast_poisson:
                cfg.fast_poisson = True
            run_fit(cfg, read_csv(args.data), args.out, horizon=args.horizon)
        else:
            run_simulate(cfg, args.seed, args.out, args.replications)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FilterError, ForecastError, NumericalError, KDGLMError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
