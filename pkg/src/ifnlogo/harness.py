"""Clique-size sweeps: build networks, fit models, score train/test likelihood.

A sweep evaluates every (resample, max clique size R, model) cell. Within one
resample the train/test split, the dependence estimates and the networks are
shared by all models; networks are rebuilt for every estimator and every R.
Rows are sorted by (resample, R, model) before writing, so output does not
depend on scheduling.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Literal, Sequence

import numpy as np

from .data import ResamplePlan, read_observations_csv, resample
from .dependence import (
    ObservationMatrix,
    correlation_to_covariance,
    covariance_to_correlation,
    kendall_correlation,
    pearson_covariance,
)
from .errors import ConfigError, ConvergenceError
from .gaussian import GaussianModel, assemble_precision, fit_mu, gaussian_log_likelihood
from .mfcf import build_mfcf
from .student import (
    EmConfig,
    StudentTModel,
    estimate_nu_tail,
    fit_student_em,
    student_log_likelihood,
)
from .synthetic import GeneratorSpec, factor_covariance, make_rng, sample

__all__ = [
    "MODELS",
    "ModelSpec",
    "SourceConfig",
    "SweepConfig",
    "SweepResult",
    "AggregateRow",
    "load_config",
    "resample_data",
    "run_sweep",
    "aggregate",
    "write_results",
    "read_results",
    "write_aggregate",
    "read_baseline",
    "RESULT_COLUMNS",
    "AGGREGATE_COLUMNS",
]


@dataclass(frozen=True)
class ModelSpec:
    family: Literal["normal", "student"]
    estimator: Literal["pearson", "kendall"]
    em: bool = False


MODELS: dict[str, ModelSpec] = {
    "normal_pearson": ModelSpec("normal", "pearson"),
    "normal_kendall": ModelSpec("normal", "kendall"),
    "student_pearson": ModelSpec("student", "pearson"),
    "student_pearson_em": ModelSpec("student", "pearson", em=True),
    "student_kendall": ModelSpec("student", "kendall"),
    "student_kendall_em": ModelSpec("student", "kendall", em=True),
}

RESULT_COLUMNS = (
    "resample_id",
    "max_clique",
    "n_edges",
    "model",
    "estimator",
    "ll_train_per_obs",
    "ll_test_per_obs",
    "em_iterations",
    "wall_time_ms",
    "status",
)
AGGREGATE_COLUMNS = ("model", "max_clique", "n_edges", "mean_ll_test", "q10", "q90", "is_argmax")


@dataclass(frozen=True)
class SourceConfig:
    """Where the observations come from.

    ``kind="returns"`` resamples a log-returns CSV. ``kind="synthetic"`` draws
    a fresh Normal or Student-t dataset per resample, with mean and covariance
    taken from the selected columns of ``path`` when given, otherwise from a
    random equity-like factor covariance.
    """

    kind: Literal["returns", "synthetic"] = "synthetic"
    path: str | None = None
    family: Literal["normal", "student_t"] = "normal"
    nu: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("returns", "synthetic"):
            raise ConfigError(f"unknown source kind {self.kind!r}")
        if self.kind == "returns" and not self.path:
            raise ConfigError("a returns source needs a path")
        if self.family not in ("normal", "student_t"):
            raise ConfigError(f"unknown family {self.family!r}")
        if self.family == "student_t" and (self.nu is None or self.nu <= 2):
            raise ConfigError("synthetic Student-t source needs nu > 2")


@dataclass(frozen=True)
class SweepConfig:
    clique_sizes: tuple[int, ...]
    models: tuple[str, ...] = tuple(MODELS)
    nu: float | Literal["tail"] = 2.2
    plan: ResamplePlan = field(default_factory=ResamplePlan)
    source: SourceConfig = field(default_factory=SourceConfig)
    output: str | None = None
    jobs: int = 1
    em_max_iterations: int = 500
    em_tolerance: float = 1e-6
    tail_fraction: float = 0.05
    kendall_transform: Literal["none", "sine"] = "none"
    record_timing: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "clique_sizes", tuple(int(r) for r in self.clique_sizes))
        object.__setattr__(self, "models", tuple(self.models))
        if not self.clique_sizes:
            raise ConfigError("clique_sizes is empty")
        if any(r < 2 for r in self.clique_sizes):
            raise ConfigError("clique sizes must be >= 2")
        if not self.models:
            raise ConfigError("models is empty")
        unknown = [m for m in self.models if m not in MODELS]
        if unknown:
            raise ConfigError(f"unknown models {unknown}; choose from {list(MODELS)}")
        if self.nu != "tail" and not float(self.nu) > 2.0:
            raise ConfigError(f"nu must exceed 2, got {self.nu}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


def _clique_sizes(value: Any) -> tuple[int, ...]:
    if isinstance(value, dict):
        return tuple(range(int(value["start"]), int(value["stop"]) + 1, int(value.get("step", 1))))
    return tuple(int(v) for v in value)


def config_from_dict(doc: dict[str, Any]) -> SweepConfig:
    known = {f.name for f in fields(SweepConfig)}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    doc = dict(doc)
    if "clique_sizes" not in doc:
        raise ConfigError("config needs clique_sizes")
    doc["clique_sizes"] = _clique_sizes(doc["clique_sizes"])
    try:
        if "plan" in doc:
            doc["plan"] = ResamplePlan(**doc["plan"])
        if "source" in doc:
            doc["source"] = SourceConfig(**doc["source"])
        return SweepConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> SweepConfig:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(doc)


def config_to_dict(cfg: SweepConfig) -> dict[str, Any]:
    return asdict(cfg)


@dataclass(frozen=True)
class SweepResult:
    resample_id: int
    max_clique: int
    n_edges: int | None
    model: str
    estimator: str
    ll_train_per_obs: float | None
    ll_test_per_obs: float | None
    em_iterations: int | None = None
    wall_time_ms: float | None = None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def sort_key(self) -> tuple[int, int, str]:
        return (self.resample_id, self.max_clique, self.model)


# --- data sources ------------------------------------------------------------


def resample_data(
    cfg: SweepConfig, resample_id: int, returns: ObservationMatrix | None = None
) -> tuple[ObservationMatrix, ObservationMatrix]:
    """Train/test pair for one resample; identical for every model and R."""
    plan, src = cfg.plan, cfg.source
    if src.kind == "returns":
        if returns is None:
            returns = read_observations_csv(src.path)
        return resample(returns, plan, resample_id)

    rng = make_rng(plan.seed, resample_id, 1)
    if src.path:
        base = returns if returns is not None else read_observations_csv(src.path)
        p_all = base.p
        if plan.series_with_replacement:
            cols = rng.integers(0, p_all, size=plan.p_select)
        else:
            if plan.p_select > p_all:
                raise ConfigError(f"cannot pick {plan.p_select} distinct series out of {p_all}")
            cols = rng.choice(p_all, size=plan.p_select, replace=False)
        chosen = base.values[:, cols]
        mu = chosen.mean(axis=0)
        sigma = np.cov(chosen, rowvar=False, bias=True)
        dup = np.zeros(len(cols), dtype=bool)
        _, first = np.unique(cols, return_index=True)
        dup[np.setdiff1d(np.arange(len(cols)), first)] = True
        # repeated series would give a singular covariance
        sigma[dup, dup] *= 1.0 + plan.jitter
        labels = tuple(base.labels[c] for c in cols)
    else:
        sigma = factor_covariance(plan.p_select, rng)
        mu = np.zeros(plan.p_select)
        labels = ()
    seed = int(rng.integers(0, 2**63 - 1))
    spec = GeneratorSpec(mu, sigma, src.family, src.nu, seed, plan.q_train + plan.q_test, labels)
    data = sample(spec)
    return data.rows(slice(0, plan.q_train)), data.rows(slice(plan.q_train, None))


# --- cells -------------------------------------------------------------------


@dataclass
class _Estimates:
    correlation: Any
    covariance: Any


def _estimates(train: ObservationMatrix, estimator: str, transform: str) -> _Estimates:
    if estimator == "pearson":
        cov = pearson_covariance(train)
        return _Estimates(covariance_to_correlation(cov), cov)
    corr = kendall_correlation(train, transform)
    return _Estimates(corr, correlation_to_covariance(corr))


def _fit_and_score(
    spec: ModelSpec,
    train: ObservationMatrix,
    test: ObservationMatrix,
    forest,
    est: _Estimates,
    nu: float,
    cfg: SweepConfig,
) -> tuple[float, float, int | None]:
    if spec.family == "normal":
        model = GaussianModel(fit_mu(train), assemble_precision(est.covariance, forest))
        return (
            gaussian_log_likelihood(train, model) / train.q,
            gaussian_log_likelihood(test, model) / test.q if test.q else math.nan,
            None,
        )
    if spec.em:
        em_cfg = EmConfig(cfg.em_max_iterations, cfg.em_tolerance, nu)
        model = fit_student_em(train, forest, em_cfg, covariance=est.covariance)
        iterations = model.iterations
    else:
        model = StudentTModel(fit_mu(train), assemble_precision(est.covariance, forest), nu)
        iterations = None
    return (
        student_log_likelihood(train, model) / train.q,
        student_log_likelihood(test, model) / test.q if test.q else math.nan,
        iterations,
    )


def _describe(exc: BaseException) -> str:
    text = f"{type(exc).__name__}: {exc}".replace("\n", " ").replace(",", ";")
    return "error: " + text


def run_resample(cfg: SweepConfig, resample_id: int, returns: ObservationMatrix | None = None) -> list[SweepResult]:
    """All (R, model) cells for one resample. Failures become error rows."""
    results: list[SweepResult] = []
    try:
        train, test = resample_data(cfg, resample_id, returns)
    except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
        return [
            SweepResult(resample_id, r, None, m, MODELS[m].estimator, None, None, status=_describe(exc))
            for r in cfg.clique_sizes
            for m in cfg.models
        ]

    specs = {m: MODELS[m] for m in cfg.models}
    estimates: dict[str, _Estimates | BaseException] = {}
    for e in sorted({s.estimator for s in specs.values()}):
        try:
            estimates[e] = _estimates(train, e, cfg.kendall_transform)
        except Exception as exc:  # noqa: BLE001
            estimates[e] = exc

    nu: float | BaseException = math.nan
    if any(s.family == "student" for s in specs.values()):
        try:
            nu = estimate_nu_tail(train, cfg.tail_fraction) if cfg.nu == "tail" else float(cfg.nu)
        except Exception as exc:  # noqa: BLE001
            nu = exc

    for r in cfg.clique_sizes:
        forests: dict[str, Any] = {}
        for e, est in estimates.items():
            if isinstance(est, BaseException):
                forests[e] = est
                continue
            try:
                forests[e] = build_mfcf(est.correlation, r)
            except Exception as exc:  # noqa: BLE001
                forests[e] = exc
        for name, spec in specs.items():
            start = time.perf_counter()
            forest = forests[spec.estimator]
            n_edges = None if isinstance(forest, BaseException) else forest.n_edges
            try:
                for dep in (estimates[spec.estimator], forest, nu if spec.family == "student" else None):
                    if isinstance(dep, BaseException):
                        raise dep
                ll_train, ll_test, iterations = _fit_and_score(
                    spec, train, test, forest, estimates[spec.estimator], nu, cfg
                )
                status = "ok"
            except (Exception, ConvergenceError) as exc:  # noqa: BLE001
                ll_train = ll_test = None
                iterations = None
                status = _describe(exc)
            elapsed = (time.perf_counter() - start) * 1e3 if cfg.record_timing else None
            results.append(
                SweepResult(
                    resample_id, r, n_edges, name, spec.estimator,
                    ll_train, ll_test, iterations, elapsed, status,
                )
            )
    return results


def run_sweep(
    cfg: SweepConfig,
    returns: ObservationMatrix | None = None,
    resample_ids: Iterable[int] | None = None,
) -> list[SweepResult]:
    ids = list(range(cfg.plan.n_resamples)) if resample_ids is None else list(resample_ids)
    if returns is None and cfg.source.path:
        returns = read_observations_csv(cfg.source.path)
    results: list[SweepResult] = []
    if cfg.jobs > 1 and len(ids) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            for chunk in pool.map(run_resample, [cfg] * len(ids), ids, [returns] * len(ids)):
                results.extend(chunk)
    else:
        for rid in ids:
            results.extend(run_resample(cfg, rid, returns))
    return sorted(results, key=SweepResult.sort_key)


# --- CSV I/O -----------------------------------------------------------------


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def results_to_csv(results: Sequence[SweepResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for r in sorted(results, key=SweepResult.sort_key):
        writer.writerow([_fmt(getattr(r, c)) for c in RESULT_COLUMNS])
    return buf.getvalue()


def write_results(results: Sequence[SweepResult], path: str | Path) -> None:
    Path(path).write_text(results_to_csv(results))


def _opt(cast, text: str):
    return None if text == "" else cast(text)


def read_results(path: str | Path) -> list[SweepResult]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RESULT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ConfigError(f"{path}: missing result columns {sorted(missing)}")
        return [
            SweepResult(
                int(row["resample_id"]),
                int(row["max_clique"]),
                _opt(int, row["n_edges"]),
                row["model"],
                row["estimator"],
                _opt(float, row["ll_train_per_obs"]),
                _opt(float, row["ll_test_per_obs"]),
                _opt(int, row["em_iterations"]),
                _opt(float, row["wall_time_ms"]),
                row["status"],
            )
            for row in reader
        ]


# --- aggregation -------------------------------------------------------------


@dataclass(frozen=True)
class AggregateRow:
    model: str
    max_clique: int | None
    n_edges: float | int | None
    mean_ll_test: float | str
    q10: float | str | None
    q90: float | str | None
    is_argmax: bool | None


def aggregate(results: Sequence[SweepResult]) -> list[AggregateRow]:
    """Mean and linearly interpolated 10%/90% quantiles of test ll per
    (model, R); the R with the largest mean is flagged per model."""
    groups: dict[tuple[str, int], list[SweepResult]] = {}
    for r in results:
        if r.ok and r.ll_test_per_obs is not None and math.isfinite(r.ll_test_per_obs):
            groups.setdefault((r.model, r.max_clique), []).append(r)
    if not groups:
        raise ValueError("no successful results to aggregate")
    rows: list[AggregateRow] = []
    for (model, R), cell in sorted(groups.items()):
        values = np.array([c.ll_test_per_obs for c in cell], dtype=np.float64)
        edges = {c.n_edges for c in cell}
        n_edges = edges.pop() if len(edges) == 1 else float(np.mean([c.n_edges for c in cell]))
        q10, q90 = np.percentile(values, [10.0, 90.0])
        rows.append(AggregateRow(model, R, n_edges, float(values.mean()), float(q10), float(q90), False))
    best: dict[str, AggregateRow] = {}
    for row in rows:
        # strict '>' keeps the smallest R on ties
        if row.model not in best or row.mean_ll_test > best[row.model].mean_ll_test:
            best[row.model] = row
    winners = {(b.model, b.max_clique) for b in best.values()}
    return [
        AggregateRow(r.model, r.max_clique, r.n_edges, r.mean_ll_test, r.q10, r.q90,
                     (r.model, r.max_clique) in winners)
        for r in rows
    ]


def read_baseline(path: str | Path) -> list[dict[str, str]]:
    """External baseline points (e.g. Glasso): columns ``n_edges`` and
    ``ll_test_per_obs``, optionally ``model``, ``q10``, ``q90``. Values are
    kept as the original strings."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"n_edges", "ll_test_per_obs"}
        if not need <= set(reader.fieldnames or ()):
            raise ConfigError(f"{path}: baseline needs columns {sorted(need)}")
        return [dict(row) for row in reader]


def aggregate_to_csv(rows: Sequence[AggregateRow], baseline: Sequence[dict[str, str]] = ()) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGGREGATE_COLUMNS)
    for r in rows:
        writer.writerow([
            r.model, _fmt(r.max_clique), _fmt(r.n_edges), _fmt(r.mean_ll_test),
            _fmt(r.q10), _fmt(r.q90), "1" if r.is_argmax else "0",
        ])
    for b in baseline:
        writer.writerow([
            b.get("model") or "glasso", "", b["n_edges"], b["ll_test_per_obs"],
            b.get("q10", ""), b.get("q90", ""), "",
        ])
    return buf.getvalue()


def write_aggregate(
    rows: Sequence[AggregateRow], path: str | Path, baseline: Sequence[dict[str, str]] = ()
) -> None:
    Path(path).write_text(aggregate_to_csv(rows, baseline))
