"""Config-driven experiment orchestration.

One run directory holds one experiment: generated corpus files, the
teacher checkpoint, one unlearned student checkpoint, per-epoch logs, and
metric reports. Sweeps iterate unlearning over a parameter grid against a
single trained teacher and aggregate the metric suite per grid cell.

Every output is reproducible byte-for-byte from (config, seed); wall-clock
measurements are confined to the train_timings.csv file and the
wall_seconds column of epochs.csv.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import baselines as bl
from .curd import UnlearnConfig, UnlearnResult, curd_unlearn
from .data import (
    CorrectedDataset,
    Dataset,
    ForgetSet,
    ForgetSpec,
    SubstituteMap,
    apply_substitutes,
    build_forget_set,
    load_dataset,
    load_forget_spec,
    load_substitute_map,
)
from .datagen import ForgetProtocol, GenConfig, emit, fraction_tag
from .errors import ValidationError
from .metrics import REPORT_COLUMNS, MetricsReport, build_report
from .scorers import ScorerKind, ScorerParams, load_checkpoint, save_checkpoint
from .training import TrainConfig, train
from .svgchart import line_chart

UNLEARN_METHODS = ("curd", "retrain", "cf", "amnesiac", "neggrad", "badt")
EXCLUDED_METHODS = {
    "ssd": "selective synaptic dampening is out of scope for this artifact",
    "cocol": "the CoCoL distillation protocol is out of scope for this artifact",
}
SWEEP_AXES = ("k", "gamma", "fraction", "method")
SWEEP_METRICS = tuple(c for c in REPORT_COLUMNS if c != "unlearn_time_normalised")
SWEEP_CSV_HEADER = ("axis", "value", "repeat", "metric", "score", "error")


@dataclass(frozen=True)
class ScorerSpec:
    kind: ScorerKind = ScorerKind.BIENCODER
    embed_dim: int = 8
    hidden_dim: int = 16


@dataclass(frozen=True)
class SweepConfig:
    k_grid: tuple[int, ...] = (2, 5, 10, 15)
    gamma_grid: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75)
    fraction_grid: tuple[float, ...] = (0.01, 0.05, 0.10, 0.20)
    method_grid: tuple[str, ...] = UNLEARN_METHODS
    repeats: int = 3
    epoch_unit: int = 1
    workers: int = 1

    def __post_init__(self):
        for name in ("k_grid", "gamma_grid", "fraction_grid", "method_grid"):
            if not getattr(self, name):
                raise ValidationError(f"sweep grid {name} must be non-empty")
        if self.repeats < 1:
            raise ValidationError("sweep repeats must be >= 1")
        if self.epoch_unit < 1:
            raise ValidationError("epoch_unit must be >= 1")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    outdir: str = "runs"
    run_id: str | None = None
    seed: int | None = None
    include_negative_doc_removal: bool = False
    scorer: ScorerSpec = field(default_factory=ScorerSpec)
    gen: GenConfig = field(default_factory=GenConfig)
    protocol: ForgetProtocol = field(default_factory=ForgetProtocol)
    train: TrainConfig = field(default_factory=TrainConfig)
    unlearn: UnlearnConfig = field(default_factory=UnlearnConfig)
    baseline: bl.BaselineConfig = field(default_factory=bl.BaselineConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def resolved_run_id(self) -> str:
        if self.run_id:
            return self.run_id
        digest = hashlib.sha256(canonical_json(config_to_dict(self)).encode()).hexdigest()
        return f"run-{digest[:12]}"


_ENUM_FIELDS = {"kind": ScorerKind, "method": bl.BaselineMethod}
_TUPLE_FIELDS = {"k_grid", "gamma_grid", "fraction_grid", "method_grid"}
_SECTIONS = {
    "scorer": ScorerSpec,
    "gen": GenConfig,
    "protocol": ForgetProtocol,
    "train": TrainConfig,
    "unlearn": UnlearnConfig,
    "baseline": bl.BaselineConfig,
    "sweep": SweepConfig,
}


def _build_section(cls, obj: Mapping[str, Any], where: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ValidationError(f"unknown key(s) {unknown} in config section '{where}'")
    kwargs: dict[str, Any] = {}
    for key, value in obj.items():
        if key in _ENUM_FIELDS and isinstance(value, str):
            try:
                value = _ENUM_FIELDS[key](value)
            except ValueError:
                raise ValidationError(f"bad value {value!r} for {where}.{key}") from None
        if key in _TUPLE_FIELDS:
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad config section '{where}': {exc}") from None


def config_from_dict(raw: Mapping[str, Any]) -> ExperimentConfig:
    """Build a config from a JSON-shaped dict; unknown keys are rejected.

    A non-null top-level seed derives every section seed from it
    (gen=seed, protocol=seed+1, train=seed+2, unlearn=seed+3,
    baseline=seed+4), overriding whatever the sections say.
    """
    raw = dict(raw)
    top_known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - top_known)
    if unknown:
        raise ValidationError(f"unknown top-level config key(s): {unknown}")
    sections = {
        name: dict(raw.get(name, {})) for name in _SECTIONS
    }
    seed = raw.get("seed")
    if seed is not None:
        seed = int(seed)
        sections["gen"]["seed"] = seed
        sections["protocol"]["seed"] = seed + 1
        sections["train"]["seed"] = seed + 2
        sections["unlearn"]["seed"] = seed + 3
        sections["baseline"]["seed"] = seed + 4
    built = {name: _build_section(cls, sections[name], name) for name, cls in _SECTIONS.items()}
    return ExperimentConfig(
        outdir=str(raw.get("outdir", "runs")),
        run_id=raw.get("run_id"),
        seed=seed,
        include_negative_doc_removal=bool(raw.get("include_negative_doc_removal", False)),
        **built,
    )


def _plain(value: Any) -> Any:
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, ScorerKind) or isinstance(value, bl.BaselineMethod):
        return value.value
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return _plain(cfg)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    """Apply `--set section.key=value` style overrides to a raw config dict.

    Values parse as JSON when possible and fall back to plain strings.
    """
    out = json.loads(json.dumps(raw))  # deep copy, JSON types only
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        dotted, text = item.split("=", 1)
        keys = [k for k in dotted.split(".") if k]
        if not keys:
            raise ValidationError(f"--set has an empty key in {item!r}")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ValidationError(f"--set path {dotted!r} descends into a non-object")
        node[keys[-1]] = value
    return out


def load_config(
    path: str | Path | None,
    overrides: Sequence[str] = (),
    seed: int | None = None,
    run_id: str | None = None,
    outdir: str | None = None,
) -> ExperimentConfig:
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ValidationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ValidationError(f"config file {path} must hold a JSON object")
    raw = apply_overrides(raw, overrides)
    if seed is not None:
        raw["seed"] = seed
    if run_id is not None:
        raw["run_id"] = run_id
    if outdir is not None:
        raw["outdir"] = outdir
    return config_from_dict(raw)


@dataclass(frozen=True)
class RunPaths:
    root: Path

    @property
    def data(self) -> Path:
        return self.root / "data"

    @property
    def checkpoints(self) -> Path:
        return self.root / "checkpoints"

    @property
    def teacher(self) -> Path:
        return self.checkpoints / "teacher.json"

    @property
    def student(self) -> Path:
        return self.checkpoints / "student.json"

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.json"

    @property
    def train_log(self) -> Path:
        return self.root / "train_log.csv"

    @property
    def train_timings(self) -> Path:
        return self.root / "train_timings.csv"

    @property
    def epochs(self) -> Path:
        return self.root / "epochs.csv"

    @property
    def metrics_json(self) -> Path:
        return self.root / "metrics.json"

    @property
    def metrics_csv(self) -> Path:
        return self.root / "metrics.csv"

    @property
    def sweep_csv(self) -> Path:
        return self.root / "sweep.csv"

    @property
    def sweep_svg(self) -> Path:
        return self.root / "sweep.svg"

    @property
    def trajectories_csv(self) -> Path:
        return self.root / "trajectories.csv"


def run_paths(cfg: ExperimentConfig) -> RunPaths:
    return RunPaths(Path(cfg.outdir) / cfg.resolved_run_id())


@dataclass(frozen=True)
class RunData:
    """Everything an unlearning run needs, loaded from a run directory."""

    dataset: Dataset
    testset: Dataset
    spec: ForgetSpec
    forget: ForgetSet
    subs: SubstituteMap
    corrected: CorrectedDataset


def _required_protocols(cfg: ExperimentConfig) -> list[ForgetProtocol]:
    fractions = list(cfg.sweep.fraction_grid)
    if cfg.protocol.fraction not in fractions:
        fractions.append(cfg.protocol.fraction)
    return [replace(cfg.protocol, fraction=f) for f in fractions]


def cmd_generate(cfg: ExperimentConfig) -> RunPaths:
    """Materialise the corpus and one forget spec per configured fraction."""
    paths = run_paths(cfg)
    paths.data.mkdir(parents=True, exist_ok=True)
    data_manifest = emit(cfg.gen, _required_protocols(cfg), paths.data)
    manifest = {"config": config_to_dict(cfg), "data": data_manifest}
    paths.manifest.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def load_run_data(cfg: ExperimentConfig, fraction: float | None = None) -> RunData:
    paths = run_paths(cfg)
    tag = fraction_tag(cfg.protocol.fraction if fraction is None else fraction)
    try:
        dataset = load_dataset(
            paths.data / "train_pairs.tsv",
            paths.data / "train_queries.tsv",
            paths.data / "train_docs.tsv",
        )
        testset = load_dataset(
            paths.data / "test_pairs.tsv",
            paths.data / "test_queries.tsv",
            paths.data / "test_docs.tsv",
        )
        spec = load_forget_spec(paths.data / f"forget_{tag}.json")
        subs = load_substitute_map(paths.data / f"substitutes_{tag}.json")
    except FileNotFoundError as exc:
        raise ValidationError(
            f"run directory {paths.root} is missing generated data ({exc}); run `generate` first"
        ) from None
    forget = build_forget_set(dataset, spec, cfg.include_negative_doc_removal)
    corrected = apply_substitutes(dataset, forget, subs)
    return RunData(dataset=dataset, testset=testset, spec=spec, forget=forget, subs=subs, corrected=corrected)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]], comment: str | None = None) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_train(cfg: ExperimentConfig) -> RunPaths:
    """Fit the teacher on the generated corpus; write checkpoint and logs."""
    paths = run_paths(cfg)
    data = load_run_data(cfg)
    result = train(
        data.dataset,
        cfg.scorer.kind,
        cfg.train,
        embed_dim=cfg.scorer.embed_dim,
        hidden_dim=cfg.scorer.hidden_dim,
    )
    paths.checkpoints.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.params, paths.teacher)
    _write_csv(
        paths.train_log,
        ("epoch", "loss", "val_mrr"),
        [(row.epoch, repr(row.loss), repr(row.val_mrr)) for row in result.log],
    )
    _write_csv(
        paths.train_timings,
        ("epoch", "wall_seconds"),
        [(i + 1, f"{sec:.6f}") for i, sec in enumerate(result.epoch_seconds)],
    )
    return paths


def run_unlearner(
    method: str,
    teacher: ScorerParams,
    data: RunData,
    cfg: ExperimentConfig,
    unlearn_cfg: UnlearnConfig | None = None,
    on_epoch: Callable[[int, ScorerParams], None] | None = None,
) -> UnlearnResult:
    """Dispatch one unlearning method against loaded run data."""
    if method in EXCLUDED_METHODS:
        raise ValidationError(f"method {method!r} is not available: {EXCLUDED_METHODS[method]}")
    if method not in UNLEARN_METHODS:
        raise ValidationError(f"unknown unlearn method {method!r}; choose one of {', '.join(UNLEARN_METHODS)}")
    if method == "curd":
        return curd_unlearn(
            teacher, data.dataset, data.forget, data.subs,
            unlearn_cfg or cfg.unlearn, on_epoch=on_epoch,
        )
    bcfg = replace(cfg.baseline, method=bl.BaselineMethod(method))
    if method == "retrain":
        return bl.retrain(
            data.corrected, cfg.scorer.kind, bcfg,
            embed_dim=cfg.scorer.embed_dim, hidden_dim=cfg.scorer.hidden_dim,
        )
    if method == "cf":
        return bl.catastrophic_forgetting(teacher, data.corrected, bcfg)
    if method == "amnesiac":
        return bl.amnesiac(teacher, data.dataset, data.forget, data.subs, bcfg)
    if method == "neggrad":
        return bl.neggrad(teacher, data.dataset, data.forget, data.subs, bcfg)
    return bl.bad_teacher(teacher, data.corrected, data.forget, data.subs, bcfg)


def cmd_unlearn(cfg: ExperimentConfig, method: str) -> RunPaths:
    """Unlearn with one method; write the student checkpoint and epoch log."""
    paths = run_paths(cfg)
    data = load_run_data(cfg)
    teacher = _load_teacher(paths)
    result = run_unlearner(method, teacher, data, cfg)
    paths.checkpoints.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.params, paths.student)
    _write_csv(
        paths.epochs,
        ("epoch", "fc_loss", "retain_loss", "wall_seconds"),
        [
            (row.epoch, _cell(row.fc_loss), _cell(row.retain_loss), f"{row.wall_seconds:.6f}")
            for row in result.epochs
        ],
        comment=f"method={result.method}",
    )
    return paths


def _load_teacher(paths: RunPaths) -> ScorerParams:
    if not paths.teacher.exists():
        raise ValidationError(f"teacher checkpoint {paths.teacher} not found; run `train` first")
    return load_checkpoint(paths.teacher)


def _read_timings(path: Path, column: str) -> list[float]:
    if not path.exists():
        return []
    out = []
    with path.open(encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    for record in csv.DictReader(rows):
        text = record.get(column, "")
        if text:
            out.append(float(text))
    return out


def cmd_evaluate(cfg: ExperimentConfig, checkpoint: str | Path | None = None) -> MetricsReport:
    """Score a checkpoint (default: the unlearned student) with the full
    metric suite and write metrics.json / metrics.csv."""
    paths = run_paths(cfg)
    data = load_run_data(cfg)
    teacher = _load_teacher(paths)
    target = Path(checkpoint) if checkpoint is not None else paths.student
    if not target.exists():
        raise ValidationError(f"checkpoint {target} not found; run `unlearn` first")
    student = load_checkpoint(target)
    report = build_report(
        student,
        teacher,
        data.dataset,
        data.testset,
        data.spec,
        data.forget,
        data.subs,
        data.corrected,
        unlearn_epoch_seconds=_read_timings(paths.epochs, "wall_seconds"),
        train_epoch_seconds=_read_timings(paths.train_timings, "wall_seconds"),
        include_negative_doc_removal=cfg.include_negative_doc_removal,
    )
    report.write(paths.metrics_json, paths.metrics_csv)
    return report


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepOutcome:
    rows: tuple[tuple, ...]
    trajectory_rows: tuple[tuple, ...]
    failures: int


def _axis_grid(cfg: ExperimentConfig, axis: str) -> list:
    if axis == "k":
        return list(cfg.sweep.k_grid)
    if axis == "gamma":
        return list(cfg.sweep.gamma_grid)
    if axis == "fraction":
        return list(cfg.sweep.fraction_grid)
    if axis == "method":
        return list(cfg.sweep.method_grid)
    raise ValidationError(f"unknown sweep axis {axis!r}; choose one of {', '.join(SWEEP_AXES)}")


def _cell_payload(cfg: ExperimentConfig, axis: str, value, rep: int) -> dict:
    return {"config": config_to_dict(cfg), "axis": axis, "value": value, "rep": rep}


def _run_sweep_cell(payload: dict) -> tuple[dict[str, float | None], list[tuple]]:
    """Execute one (axis value, repeat) cell; returns metric map + trajectories.

    Module-level so that a process pool can run cells in parallel; data and
    teacher are reloaded from the run directory inside the worker.
    """
    cfg = config_from_dict(payload["config"])
    axis, value, rep = payload["axis"], payload["value"], payload["rep"]
    paths = run_paths(cfg)
    teacher = _load_teacher(paths)

    proto = replace(
        cfg.protocol,
        seed=cfg.protocol.seed + rep,
        fraction=float(value) if axis == "fraction" else cfg.protocol.fraction,
    )
    base = load_run_data(cfg)  # corpus files; the forget split is rebuilt per cell
    from .datagen import build_protocol

    spec, subs = build_protocol(base.dataset, proto)
    forget = build_forget_set(base.dataset, spec, cfg.include_negative_doc_removal)
    corrected = apply_substitutes(base.dataset, forget, subs)
    data = RunData(
        dataset=base.dataset, testset=base.testset, spec=spec,
        forget=forget, subs=subs, corrected=corrected,
    )

    unlearn_cfg = cfg.unlearn
    method = "curd"
    if axis == "k":
        unlearn_cfg = replace(unlearn_cfg, k=int(value))
    elif axis == "gamma":
        unlearn_cfg = replace(unlearn_cfg, gamma=float(value))
    elif axis == "method":
        method = str(value)

    trajectory_rows: list[tuple] = []

    def on_epoch(epoch: int, params: ScorerParams) -> None:
        if epoch % cfg.sweep.epoch_unit != 0:
            return
        snapshot_report = build_report(
            params, teacher, data.dataset, data.testset, data.spec,
            data.forget, data.subs, data.corrected,
            include_negative_doc_removal=cfg.include_negative_doc_removal,
        )
        unit = epoch // cfg.sweep.epoch_unit
        for metric in SWEEP_METRICS:
            trajectory_rows.append(
                (fraction_tag(proto.fraction), rep, unit, metric, _cell(getattr(snapshot_report, metric)))
            )

    hook = on_epoch if (axis == "fraction" and method == "curd") else None
    result = run_unlearner(method, teacher, data, cfg, unlearn_cfg=unlearn_cfg, on_epoch=hook)
    report = build_report(
        result.params, teacher, data.dataset, data.testset, data.spec,
        data.forget, data.subs, data.corrected,
        include_negative_doc_removal=cfg.include_negative_doc_removal,
    )
    metric_map = {metric: getattr(report, metric) for metric in SWEEP_METRICS}
    return metric_map, trajectory_rows


def run_sweep(cfg: ExperimentConfig, axis: str) -> SweepOutcome:
    """Run every (value, repeat) cell for the axis; cell failures are
    recorded in the rows and do not stop the sweep."""
    grid = _axis_grid(cfg, axis)
    cells = [(value, rep) for value in grid for rep in range(cfg.sweep.repeats)]
    payloads = [_cell_payload(cfg, axis, value, rep) for value, rep in cells]

    outcomes: list[tuple[dict[str, float | None] | None, list[tuple], str]] = []
    if cfg.sweep.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.sweep.workers) as pool:
            futures = [pool.submit(_run_sweep_cell, p) for p in payloads]
            for future in futures:
                try:
                    metric_map, traj = future.result()
                    outcomes.append((metric_map, traj, ""))
                except Exception as exc:  # noqa: BLE001 - cell isolation is the point
                    outcomes.append((None, [], str(exc)))
    else:
        for payload in payloads:
            try:
                metric_map, traj = _run_sweep_cell(payload)
                outcomes.append((metric_map, traj, ""))
            except Exception as exc:  # noqa: BLE001
                outcomes.append((None, [], str(exc)))

    rows: list[tuple] = []
    trajectory_rows: list[tuple] = []
    failures = 0
    for (value, rep), (metric_map, traj, error) in zip(cells, outcomes):
        if metric_map is None:
            failures += 1
        for metric in SWEEP_METRICS:
            score = None if metric_map is None else metric_map[metric]
            rows.append((axis, _cell(value), rep, metric, _cell(score), error))
        trajectory_rows.extend(traj)
    return SweepOutcome(rows=tuple(rows), trajectory_rows=tuple(trajectory_rows), failures=failures)


def aggregate_sweep(rows: Sequence[Sequence]) -> list[dict]:
    """Collapse long-format sweep rows to mean and standard error per
    (value, metric); the stderr cell is empty below two samples."""
    groups: dict[tuple[str, str], list[float]] = {}
    order: list[tuple[str, str]] = []
    for axis, value, rep, metric, score, error in rows:
        key = (str(value), str(metric))
        if key not in groups:
            groups[key] = []
            order.append(key)
        if score not in ("", None):
            groups[key].append(float(score))
    out = []
    for value, metric in order:
        samples = groups[(value, metric)]
        mean = float(np.mean(samples)) if samples else None
        stderr = (
            float(np.std(samples, ddof=1) / math.sqrt(len(samples)))
            if len(samples) >= 2
            else None
        )
        out.append({"value": value, "metric": metric, "n": len(samples), "mean": mean, "stderr": stderr})
    return out


def _sweep_chart(axis: str, grid: list, aggregated: list[dict]) -> str:
    categorical = axis == "method"
    if categorical:
        xs = list(range(len(grid)))
        title = f"sweep over {axis} ({', '.join(f'{i}={v}' for i, v in enumerate(grid))})"
    else:
        xs = [float(v) for v in grid]
        title = f"sweep over {axis}"
    series: dict[str, list[float | None]] = {}
    means = {(row["value"], row["metric"]): row["mean"] for row in aggregated}
    for metric in SWEEP_METRICS:
        series[metric] = [means.get((_cell(v), metric)) for v in grid]
    return line_chart(xs, series, title=title, x_label=axis, y_label="score")


def cmd_sweep(cfg: ExperimentConfig, axis: str) -> SweepOutcome:
    """Run the sweep and write sweep.csv, sweep.svg, and (for the fraction
    axis) per-epoch trajectories in epoch units."""
    paths = run_paths(cfg)
    grid = _axis_grid(cfg, axis)
    outcome = run_sweep(cfg, axis)
    _write_csv(paths.sweep_csv, SWEEP_CSV_HEADER, outcome.rows)
    paths.sweep_svg.write_text(_sweep_chart(axis, grid, aggregate_sweep(outcome.rows)), encoding="utf-8")
    if axis == "fraction":
        _write_csv(
            paths.trajectories_csv,
            ("fraction", "repeat", "epoch_unit", "metric", "score"),
            outcome.trajectory_rows,
        )
    return outcome


def read_sweep_csv(path: str | Path) -> list[tuple]:
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    for record in csv.DictReader(lines):
        rows.append(tuple(record[c] for c in SWEEP_CSV_HEADER))
    return rows


def format_report_table(aggregated: Sequence[dict]) -> str:
    lines = [f"{'value':>10}  {'metric':<24} {'n':>3}  {'mean':>12}  {'stderr':>12}"]
    for row in aggregated:
        mean = "" if row["mean"] is None else f"{row['mean']:.6f}"
        stderr = "" if row["stderr"] is None else f"{row['stderr']:.6f}"
        lines.append(f"{row['value']:>10}  {row['metric']:<24} {row['n']:>3}  {mean:>12}  {stderr:>12}")
    return "\n".join(lines)


def cmd_report(cfg: ExperimentConfig, out: str | Path | None = None) -> str:
    """Aggregate an existing sweep.csv to mean +/- stderr per cell."""
    paths = run_paths(cfg)
    if not paths.sweep_csv.exists():
        raise ValidationError(f"{paths.sweep_csv} not found; run `sweep` first")
    aggregated = aggregate_sweep(read_sweep_csv(paths.sweep_csv))
    table = format_report_table(aggregated)
    if out is not None:
        _write_csv(
            Path(out),
            ("value", "metric", "n", "mean", "stderr"),
            [
                (row["value"], row["metric"], row["n"], _cell(row["mean"]), _cell(row["stderr"]))
                for row in aggregated
            ],
        )
    return table
