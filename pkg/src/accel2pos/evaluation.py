"""Method comparison across scenarios.

Trains or loads the per-axis models, runs every method on the test split of
every scenario, aggregates 3D MAE/RMSE over test sequences and writes a CSV
report, an aligned plain-text table (methods as row groups, scenarios as
columns) and per-sequence trajectory CSVs for plotting.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dsp_recon import (DspPipelineConfig, load_config, optimize_filters, reconstruct_from_drive,
                        save_config)
from .metrics import ErrorMetrics, format_cell
from .neural import load_checkpoint, save_checkpoint
from .seq2seq import AXES, FormulationConfig, FormulationKind, predict_position, train_on_pairs
from .synthgen import GeneratorConfig, ScenarioDataset, build_scenario, load_dataset, write_dataset
from .timeseries import SampledSignal

__all__ = [
    "ComparisonReport",
    "ConfigurationError",
    "METHODS",
    "ReportRow",
    "SweepConfig",
    "checkpoint_path",
    "compare",
    "evaluate",
    "export_trajectory",
    "load_models",
    "parse_method",
    "read_trajectory",
    "report_from_trajectories",
    "run_sweep",
    "save_models",
    "train_models",
]

DOUBLE_INTEGRATION = "double_integration"
METHODS = (DOUBLE_INTEGRATION, "many_to_one", "many_to_many", "autoregressive")
METRICS = ("MAE", "RMSE")
DISPLAY = {
    DOUBLE_INTEGRATION: "Double Integration",
    "many_to_one": "Many-to-One",
    "many_to_many": "Many-to-Many",
    "autoregressive": "Autoregressive",
}
_ALIASES = {"di": DOUBLE_INTEGRATION, "dsp": DOUBLE_INTEGRATION,
            "m2o": "many_to_one", "m2m": "many_to_many", "ar": "autoregressive"}
REPORT_COLUMNS = ("method", "scenario", "metric", "mean_mm", "std_mm")
TRAJECTORY_COLUMNS = ("t", "x_true", "y_true", "z_true", "x_pred", "y_pred", "z_pred")


class ConfigurationError(ValueError):
    """A requested method lacks its checkpoint or filter configuration."""


def parse_method(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in METHODS:
        raise ValueError(f"unknown method {name!r}; expected one of {METHODS} or {sorted(_ALIASES)}")
    return name


def _num(v: float) -> str:
    return format(float(v), ".17g")


# --------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class ReportRow:
    method: str
    scenario: int
    metric: str
    mean_mm: float
    std_mm: float

    @property
    def cell(self) -> str:
        return format_cell(self.mean_mm, self.std_mm)


@dataclass
class ComparisonReport:
    """Aggregated errors; ``per_sequence`` keeps the raw values per (method, scenario)."""

    rows: list[ReportRow]
    per_sequence: dict[tuple[str, int], ErrorMetrics] = field(default_factory=dict)

    @classmethod
    def from_metrics(cls, metrics: Mapping[tuple[str, int], ErrorMetrics]) -> "ComparisonReport":
        keys = sorted(metrics, key=lambda k: (METHODS.index(k[0]), k[1]))
        rows = []
        for method, scenario in keys:
            summary = metrics[(method, scenario)].summary()
            for metric in METRICS:
                mean, std = summary[metric]
                rows.append(ReportRow(method, scenario, metric, mean, std))
        return cls(rows, {k: metrics[k] for k in keys})

    @property
    def methods(self) -> list[str]:
        return sorted({r.method for r in self.rows}, key=METHODS.index)

    @property
    def scenarios(self) -> list[int]:
        return sorted({r.scenario for r in self.rows})

    def row(self, method: str, scenario: int, metric: str = "RMSE") -> ReportRow:
        method = parse_method(method)
        for r in self.rows:
            if (r.method, r.scenario, r.metric) == (method, scenario, metric):
                return r
        raise KeyError((method, scenario, metric))

    def mean(self, method: str, scenario: int, metric: str = "RMSE") -> float:
        return self.row(method, scenario, metric).mean_mm

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.method, r.scenario, r.metric, _num(r.mean_mm), _num(r.std_mm)])
        return buf.getvalue()

    def per_sequence_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "scenario", "series_id", "seq_id", "mae_mm", "rmse_mm"])
        for (method, scenario), m in self.per_sequence.items():
            for series_id, seq_id, mae, rmse in m.per_sequence:
                w.writerow([method, scenario, series_id, seq_id, _num(mae), _num(rmse)])
        return buf.getvalue()

    def to_table(self) -> str:
        scenarios = self.scenarios
        header = ["Method", "Metric"] + [f"Scen. {k}" for k in scenarios]
        body = []
        for method in self.methods:
            for j, metric in enumerate(METRICS):
                cells = []
                for k in scenarios:
                    try:
                        cells.append(self.row(method, k, metric).cell)
                    except KeyError:
                        cells.append("-")
                body.append([DISPLAY[method] if j == 0 else "", metric] + cells)
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        fmt = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
        lines = [
            "# 3D position reconstruction error in mm: mean±std over the test sequences of each",
            "# scenario (std is the N-1 sample estimator over per-sequence values)",
            fmt(header),
            fmt(["-" * w for w in widths]),
        ]
        lines += [fmt(r) for r in body]
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in (("report.csv", self.to_csv()), ("report.txt", self.to_table()),
                           ("per_sequence.csv", self.per_sequence_csv())):
            (out / name).write_text(text, encoding="utf-8", newline="\n")
        return out


# --------------------------------------------------------------------------
# trajectories


def _trajectory_file(out_dir, method: str, scenario: int, series_id: int, seq_id: int) -> Path:
    return (Path(out_dir) / "trajectories" / f"scenario{scenario}" / method
            / f"series{series_id}_seq{seq_id}.csv")


def export_trajectory(pred: SampledSignal, truth: SampledSignal, path) -> None:
    if len(pred) != len(truth):
        raise ValueError("prediction and truth differ in length")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for t, row_t, row_p in zip(truth.times, truth.data, pred.data):
        w.writerow([_num(t)] + [_num(v) for v in row_t] + [_num(v) for v in row_p])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def read_trajectory(path, sample_rate_hz: float | None = None) -> tuple[SampledSignal, SampledSignal]:
    """Inverse of :func:`export_trajectory`; returns ``(pred, truth)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        data = np.array([[float(v) for v in row] for row in reader])
    t = data[:, 0]
    if sample_rate_hz is None:
        sample_rate_hz = round(1.0 / float(np.median(np.diff(t))), 6) if len(t) > 1 else 1.0
    truth = SampledSignal(AXES, data[:, 1:4], sample_rate_hz, float(t[0]), "mm")
    pred = SampledSignal(AXES, data[:, 4:7], sample_rate_hz, float(t[0]), "mm")
    return pred, truth


def report_from_trajectories(out_dir) -> ComparisonReport:
    """Rebuild a report from exported per-sequence trajectories without rerunning any method."""
    root = Path(out_dir) / "trajectories"
    metrics: dict[tuple[str, int], ErrorMetrics] = {}
    for path in root.glob("scenario*/*/series*_seq*.csv"):
        scenario = int(path.parent.parent.name[len("scenario"):])
        method = path.parent.name
        series, seq = path.stem.split("_")
        pred, truth = read_trajectory(path)
        metrics.setdefault((method, scenario), ErrorMetrics()).add(
            int(series[len("series"):]), int(seq[len("seq"):]), pred, truth)
    for m in metrics.values():
        m.per_sequence.sort()
    if not metrics:
        raise FileNotFoundError(f"no trajectories under {root}")
    return ComparisonReport.from_metrics(metrics)


# --------------------------------------------------------------------------
# checkpoints


def checkpoint_path(root, scenario: int, kind, axis: str) -> Path:
    kind = FormulationKind.parse(kind)
    return Path(root) / f"s{scenario}_{kind.value}_{axis}.json"


def dsp_config_path(root, scenario: int) -> Path:
    return Path(root) / f"s{scenario}_dsp.json"


def _train_job(args):
    pairs, cfg = args
    return train_on_pairs(pairs, cfg)


def train_models(dataset: ScenarioDataset, base: FormulationConfig, workers: int = 1) -> dict:
    """Train one model per axis; returns ``{axis: (SeqModel, FormulationConfig)}``.

    With ``workers > 1`` the three axes train in separate processes. Each job
    is seeded by its own config, so the result does not depend on scheduling.
    """
    cfgs = [replace(base, axis=ax) for ax in AXES]
    jobs = [(dataset.train_pairs, c) for c in cfgs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            runs = list(pool.map(_train_job, jobs))
    else:
        runs = [_train_job(j) for j in jobs]
    return {c.axis: (run.model, c, run.loss_trace) for c, run in zip(cfgs, runs)}


def save_models(models: dict, root, scenario: int, sample_rate_hz: float = 100.0) -> list[Path]:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for axis, (model, cfg, *rest) in models.items():
        meta = {"scenario": scenario, "formulation": cfg.to_dict(), "sample_rate_hz": sample_rate_hz}
        if rest:
            meta["loss_trace"] = list(rest[0])
        path = checkpoint_path(root, scenario, cfg.kind, axis)
        save_checkpoint(model, path, meta)
        paths.append(path)
    return paths


def load_models(root, scenario: int, kind) -> dict:
    models = {}
    for axis in AXES:
        path = checkpoint_path(root, scenario, kind, axis)
        if not path.is_file():
            raise ConfigurationError(
                f"missing checkpoint {path} for {FormulationKind.parse(kind).value}, "
                f"scenario {scenario}, axis {axis}; train it with `accel2pos train`")
        model, meta = load_checkpoint(path)
        cfg = FormulationConfig.from_dict(meta["formulation"])
        if cfg.axis != axis:
            raise ConfigurationError(f"{path} holds a model for axis {cfg.axis}, expected {axis}")
        models[axis] = (model, cfg)
    return models


# --------------------------------------------------------------------------
# evaluation


def _predict(method: str, record, models, dsp_cfg: DspPipelineConfig | None) -> SampledSignal:
    if method == DOUBLE_INTEGRATION:
        cfg = replace(dsp_cfg, p0_mm=tuple(float(v) for v in record.p0_mm))
        return reconstruct_from_drive(record.pair.accel, cfg)
    return predict_position(models, record.pair.accel, record.p0_mm)


def evaluate(datasets: Iterable[ScenarioDataset], methods: Sequence[str], models: Mapping,
             dsp_configs: Mapping[int, DspPipelineConfig], out=None) -> ComparisonReport:
    """Run each method on each test sequence.

    ``models`` maps ``(scenario, method)`` to per-axis models and
    ``dsp_configs`` maps scenario to the filter configuration.
    """
    methods = [parse_method(m) for m in methods]
    metrics = {}
    for ds in datasets:
        for method in methods:
            if method == DOUBLE_INTEGRATION:
                if ds.scenario not in dsp_configs:
                    raise ConfigurationError(f"no DSP configuration for scenario {ds.scenario}")
                mdl, dsp = None, dsp_configs[ds.scenario]
            else:
                if (ds.scenario, method) not in models:
                    raise ConfigurationError(f"no trained {method} models for scenario {ds.scenario}")
                mdl, dsp = models[(ds.scenario, method)], None
            em = ErrorMetrics()
            for rec in ds.test:
                pred = _predict(method, rec, mdl, dsp)
                em.add(rec.series_id, rec.seq_id, pred, rec.truth)
                if out is not None:
                    export_trajectory(pred, rec.truth,
                                      _trajectory_file(out, method, ds.scenario, *rec.key))
            metrics[(method, ds.scenario)] = em
    report = ComparisonReport.from_metrics(metrics)
    if out is not None:
        report.write(out)
    return report


def _resolve_dsp(dsp_config, scenario: int) -> DspPipelineConfig:
    if isinstance(dsp_config, DspPipelineConfig):
        return dsp_config
    if isinstance(dsp_config, Mapping):
        return dsp_config[scenario]
    path = Path(dsp_config)
    if path.is_dir():
        path = dsp_config_path(path, scenario)
    if not path.is_file():
        raise ConfigurationError(f"missing DSP filter configuration {path} for scenario {scenario}")
    return load_config(path)


def _discover_scenarios(dataset_dir: Path) -> list[int]:
    if (dataset_dir / "dataset.json").is_file():
        return [json.loads((dataset_dir / "dataset.json").read_text())["scenario"]]
    found = sorted(int(p.parent.name[len("scenario"):])
                   for p in dataset_dir.glob("scenario*/dataset.json"))
    if not found:
        raise ConfigurationError(f"no datasets found under {dataset_dir}")
    return found


def compare(dataset_dir, methods: Sequence[str], checkpoints=None, dsp_config=None, out=None,
            scenarios: Sequence[int] | None = None) -> ComparisonReport:
    """Compare methods on stored datasets using stored checkpoints and filter configs.

    ``dataset_dir`` holds ``scenario<k>/`` directories written by
    :func:`~accel2pos.synthgen.write_dataset`. ``dsp_config`` is a single JSON
    file, a directory with ``s<k>_dsp.json`` files, a mapping or a config.
    """
    dataset_dir = Path(dataset_dir)
    methods = [parse_method(m) for m in methods]
    scenarios = list(scenarios) if scenarios else _discover_scenarios(dataset_dir)
    learned = [m for m in methods if m != DOUBLE_INTEGRATION]
    if learned and checkpoints is None:
        raise ConfigurationError("learned methods requested but no checkpoint directory given")
    if DOUBLE_INTEGRATION in methods and dsp_config is None:
        raise ConfigurationError("double_integration requested but no DSP config given")
    models, dsp_cfgs = {}, {}
    # resolve everything before running anything so configuration errors surface early
    for k in scenarios:
        for m in learned:
            models[(k, m)] = load_models(checkpoints, k, m)
        if DOUBLE_INTEGRATION in methods:
            dsp_cfgs[k] = _resolve_dsp(dsp_config, k)
    datasets = [load_dataset(dataset_dir, k) for k in scenarios]
    return evaluate(datasets, methods, models, dsp_cfgs, out)


# --------------------------------------------------------------------------
# full sweep


def _default_formulations() -> dict:
    return {
        "many_to_one": FormulationConfig(kind="m2o", epochs=40, windows_per_epoch=512),
        "many_to_many": FormulationConfig(kind="m2m", epochs=80),
        "autoregressive": FormulationConfig(kind="ar", epochs=80),
    }


@dataclass
class SweepConfig:
    """Settings for the methods x scenarios comparison at reduced training length."""

    scenarios: tuple[int, ...] = (1, 2, 3, 4)
    methods: tuple[str, ...] = METHODS
    seed: int = 0
    dsp_budget: int = 32
    n_train_series: int = 6
    n_test_series: int = 2
    seqs_per_series: int = 6
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    formulations: dict = field(default_factory=_default_formulations)
    workers: int = 1


def run_sweep(cfg: SweepConfig | None = None, out=None, log=None) -> ComparisonReport:
    """Synthesize, fit filters, train and compare in one call.

    With ``out`` set, datasets, DSP configs, checkpoints, reports and
    trajectories are written below it in the layout the CLI expects.
    """
    cfg = cfg or SweepConfig()
    methods = [parse_method(m) for m in cfg.methods]
    log = log or (lambda msg: None)
    out = Path(out) if out is not None else None
    datasets, models, dsp_cfgs = [], {}, {}
    for k in cfg.scenarios:
        ds = build_scenario(k, cfg.n_train_series, cfg.n_test_series, cfg.seqs_per_series,
                            cfg.seed, cfg.generator)
        datasets.append(ds)
        if out is not None:
            write_dataset(ds, out / "datasets")
        if DOUBLE_INTEGRATION in methods:
            base = DspPipelineConfig.from_generator(cfg.generator)
            dsp_cfgs[k] = optimize_filters(ds.train_pairs, base, cfg.dsp_budget, cfg.seed)
            if out is not None:
                save_config(dsp_cfgs[k], dsp_config_path(out / "checkpoints", k))
            log(f"scenario {k}: filters fitted")
        for m in methods:
            if m == DOUBLE_INTEGRATION:
                continue
            base = replace(cfg.formulations[m], seed=cfg.seed)
            trained = train_models(ds, base, cfg.workers)
            if out is not None:
                save_models(trained, out / "checkpoints", k, cfg.generator.common_rate_hz)
            models[(k, m)] = {ax: v[:2] for ax, v in trained.items()}
            log(f"scenario {k}: {m} trained")
    report = evaluate(datasets, methods, models, dsp_cfgs, out / "report" if out is not None else None)
    return report
