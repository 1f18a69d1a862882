"""Parameter-grid sweep: privatize, evaluate, attack, persist.

One sweep walks the full budget grid for a case, runs the configured number
of privatize -> evaluate repetitions per cell (the same release draws feed
the effectiveness metric and the singling-out audit), adds the non-private
and k-anonymity baseline rows once, and writes:

* ``tradeoff.csv``  -- one row per grid cell / baseline (schema frozen below)
* ``raw.jsonl``     -- one record per repetition
* ``cells/*.json``  -- full per-cell detail incl. per-radius attack scores
* ``run.json``      -- config, seed, package version
* ``manifest.json`` -- completed cells, enabling resume

Reruns with the same output directory skip cells listed in the manifest, so
a partially finished sweep picks up where it stopped. All randomness is
derived from (seed, fixed stream ids), so results do not depend on
execution order or thread count.
"""

from __future__ import annotations

import csv
import json
import os
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import (
    attribute_inference_protection,
    baseline_singling_out,
    distinguishing_protection,
    identity_privatizer,
    singling_out_from_draws,
)
from .budgets import to_classic_dp
from .data import preprocess, read_csv
from .errors import InvalidConfig
from .mondrian import AnonymityParams, mondrian_anonymize
from .projection import BaseBudget, partitioned_privatizer, projection_privatizer
from .rng import RandomSource
from .synth import (
    nigeria_like_spec,
    synth_classification_dataset,
    synth_loan_book,
    synth_regression_dataset,
    togo_like_spec,
)
from .targeting import (
    DEFAULT_ELIGIBLE_FRACTION,
    DEFAULT_LOGISTIC_LAMBDA,
    DEFAULT_RIDGE_LAMBDA,
    TOGO_ADULT_POPULATION,
    EligibilityRule,
    ProfitLedger,
    evaluate_classification_case,
    evaluate_regression_case,
    kfold_split,
    relative_change,
)

DEFAULT_B_GRID = (0.05, 0.075, 0.1, 0.25, 0.5, 0.75, 1.0, 2.0)
DEFAULT_EPS1_GRID = (2.0, 3.0)
DEFAULT_EPS2_GRID = (0.5, 0.9999)

# Stream-id blocks hanging off the root seed; keep disjoint.
_STREAM_FOLDS = 1
_STREAM_LOANS = 5
_STREAM_BASELINE_AI = 900
_STREAM_CELL = 1_000
_STREAM_CELL_AI = 100_000


@dataclass
class ExperimentConfig:
    case: str
    out_dir: str
    seed: int = 0
    similarity_bounds: tuple = DEFAULT_B_GRID
    epsilon1_grid: tuple = DEFAULT_EPS1_GRID
    epsilon2_grid: tuple = DEFAULT_EPS2_GRID
    proj_dim: int = 10_000
    repetitions: int = 50
    folds: int = 5
    mondrian_ks: tuple = tuple(range(2, 11))
    partitions: int | None = None  # default: togo 1, nigeria 6
    n: int | None = None  # synthetic-size override
    d: int | None = None
    signal_strength: float = 0.7
    eligible_fraction: float = DEFAULT_ELIGIBLE_FRACTION
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA
    logistic_lambda: float = DEFAULT_LOGISTIC_LAMBDA
    population: float = TOGO_ADULT_POPULATION
    attack_holdout: int = 500
    include_attribute_attack: bool = True
    include_joint_net: bool = False
    threads: int = 1
    features_csv: str | None = None
    target_csv: str | None = None
    loans_csv: str | None = None

    def __post_init__(self):
        self.similarity_bounds = tuple(self.similarity_bounds)
        self.epsilon1_grid = tuple(self.epsilon1_grid)
        self.epsilon2_grid = tuple(self.epsilon2_grid)
        self.mondrian_ks = tuple(self.mondrian_ks)
        if self.partitions is None:
            self.partitions = 6 if self.case == "nigeria" else 1

    def validate(self):
        if self.case not in ("togo", "nigeria"):
            raise InvalidConfig(f"case must be togo or nigeria, got {self.case!r}")
        for b in self.similarity_bounds:
            if not 0.0 < b <= 2.0:
                raise InvalidConfig(f"B={b} outside (0, 2]")
        for e in self.epsilon1_grid:
            if e <= 0:
                raise InvalidConfig(f"epsilon1={e} must be positive")
        for e in self.epsilon2_grid:
            if not 0.0 < e < 1.0:
                raise InvalidConfig(f"epsilon2={e} outside (0, 1)")
        if self.proj_dim < 1 or self.repetitions < 1 or self.folds < 2:
            raise InvalidConfig("proj_dim >= 1, repetitions >= 1, folds >= 2 required")
        if self.partitions < 1:
            raise InvalidConfig("partitions must be >= 1")
        if self.threads < 1:
            raise InvalidConfig("threads must be >= 1")
        if (self.features_csv is None) != (self.target_csv is None):
            raise InvalidConfig("features_csv and target_csv go together")
        if self.repetitions < 20:
            warnings.warn(
                f"repetitions={self.repetitions} is below 20; cell statistics "
                "will be noisy (fine for desk-scale runs)",
                stacklevel=2,
            )

    def to_dict(self) -> dict:
        out = {}
        for f in dc_fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dc_fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        if "case" not in raw or "out_dir" not in raw:
            raise InvalidConfig("config requires 'case' and 'out_dir'")
        return cls(**raw)


# ---------------------------------------------------------------------------
# Tradeoff rows
# ---------------------------------------------------------------------------

CSV_SCHEMA = "tdp-tradeoff-v1"
CSV_COLUMNS = (
    "case",
    "label",
    "mondrian_k",
    "B",
    "epsilon1",
    "delta1",
    "epsilon2",
    "delta2",
    "k",
    "partitions",
    "repetitions",
    "effect_mean",
    "effect_std",
    "effect_delta_vs_baseline",
    "relative_change_pct",
    "accuracy_mean",
    "fpr_mean",
    "singling_out",
    "attribute_inference",
    "distinguishing",
    "classic_steps",
    "classic_epsilon",
    "classic_delta",
)

_INT_COLUMNS = {"mondrian_k", "k", "partitions", "repetitions", "classic_steps"}
_STR_COLUMNS = {"case", "label"}


@dataclass(frozen=True)
class TradeoffPoint:
    """One row of the tradeoff table; None marks a non-applicable field."""

    case: str
    label: str  # "tdp" | "nonprivate" | "mondrian"
    mondrian_k: int | None = None
    B: float | None = None
    epsilon1: float | None = None
    delta1: float | None = None
    epsilon2: float | None = None
    delta2: float | None = None
    k: int | None = None
    partitions: int | None = None
    repetitions: int | None = None
    effect_mean: float | None = None
    effect_std: float | None = None
    effect_delta_vs_baseline: float | None = None
    relative_change_pct: float | None = None
    accuracy_mean: float | None = None
    fpr_mean: float | None = None
    singling_out: float | None = None
    attribute_inference: float | None = None
    distinguishing: float | None = None
    classic_steps: int | None = None
    classic_epsilon: float | None = None
    classic_delta: float | None = None

    def to_row(self) -> list[str]:
        out = []
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            if v is None:
                out.append("")
            elif col in _STR_COLUMNS:
                out.append(str(v))
            elif col in _INT_COLUMNS:
                out.append(str(int(v)))
            else:
                out.append(repr(float(v)))
        return out

    @classmethod
    def from_row(cls, row: list[str]) -> "TradeoffPoint":
        kwargs = {}
        for col, raw in zip(CSV_COLUMNS, row):
            if raw == "":
                kwargs[col] = None
            elif col in _STR_COLUMNS:
                kwargs[col] = raw
            elif col in _INT_COLUMNS:
                kwargs[col] = int(raw)
            else:
                kwargs[col] = float(raw)
        return cls(**kwargs)


@dataclass
class SweepResult:
    config: ExperimentConfig
    points: list = field(default_factory=list)
    raw_records: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Data assembly
# ---------------------------------------------------------------------------


@dataclass
class CaseData:
    X: np.ndarray  # preprocessed features (unit-ball rows)
    y: np.ndarray
    kind: str  # "regression" | "binary"
    ledger: ProfitLedger | None = None


def load_case_data(config: ExperimentConfig) -> CaseData:
    if config.features_csv:
        feats, _ = read_csv(config.features_csv)
        target, _ = read_csv(config.target_csv)
        X, y, _ = preprocess(feats, target[:, 0])
        kind = y.kind
        values, target = X.values, y.values
    elif config.case == "togo":
        spec = togo_like_spec(
            seed=config.seed, n=config.n, d=config.d,
            signal_strength=config.signal_strength,
        )
        X, y = synth_regression_dataset(spec)
        values, target, kind = X.values, y.values, "regression"
    else:
        spec = nigeria_like_spec(
            seed=config.seed, n=config.n, d=config.d,
            signal_strength=config.signal_strength,
        )
        X, y = synth_classification_dataset(spec)
        values, target, kind = X.values, y.values, "binary"

    ledger = None
    if config.case == "nigeria":
        if config.loans_csv:
            loans, cols = read_csv(config.loans_csv)
            ledger = ProfitLedger(
                loan_amount=loans[:, cols.index("loan_amount")],
                revenue=loans[:, cols.index("revenue")],
                interest=loans[:, cols.index("interest")],
            )
        else:
            book = synth_loan_book(values.shape[0], RandomSource(config.seed, _STREAM_LOANS))
            ledger = ProfitLedger(
                loan_amount=book.loan_amount, revenue=book.revenue, interest=book.interest
            )
    return CaseData(X=values, y=target, kind=kind, ledger=ledger)


# ---------------------------------------------------------------------------
# Cell evaluation
# ---------------------------------------------------------------------------


def _cell_id(b: float, e1: float, e2: float) -> str:
    return f"B{b:g}_e1{e1:g}_e2{e2:g}"


def _evaluate_matrix(values, data: CaseData, folds, config, baseline_profit=None) -> dict:
    if data.kind == "regression":
        return evaluate_regression_case(
            values,
            data.y,
            folds,
            rule=EligibilityRule(percentile=config.eligible_fraction),
            lam=config.ridge_lambda,
            population=config.population,
        )
    return evaluate_classification_case(
        values, data.y, folds, data.ledger,
        lam=config.logistic_lambda, baseline_profit=baseline_profit,
    )


def _effect_of(report: dict) -> float:
    if report["task"] == "regression":
        return report["exclusion_errors_national"]
    return report["profit"]


def run_single(
    data: CaseData,
    config: ExperimentConfig,
    folds,
    cell_index: int,
    b: float,
    eps1: float,
    eps2: float,
    baseline_effect: float | None,
) -> tuple[TradeoffPoint, dict, list]:
    """Evaluate one budget tuple. Returns (point, cell detail, raw records)."""
    n = data.X.shape[0]
    base = BaseBudget(
        similarity_bound=b, epsilon1=eps1, epsilon2=eps2, proj_dim=config.proj_dim
    )
    budget = base.with_deltas(n, config.partitions)
    # De-scaled releases (known 1/k output scale undone) are what the audits
    # attack; the effectiveness harness re-standardizes, so sharing the same
    # draws for both costs nothing.
    if config.partitions == 1:
        privatizer = projection_privatizer(budget, descale=True)
    else:
        privatizer = partitioned_privatizer(base, config.partitions, descale=True)

    draw_rng = RandomSource(config.seed, _STREAM_CELL + cell_index)
    draws = [privatizer(data.X, gen) for gen in draw_rng.generators(config.repetitions)]

    records = []
    effects, accs, fprs = [], [], []
    for rep, draw in enumerate(draws):
        report = _evaluate_matrix(draw, data, folds, config)
        effects.append(_effect_of(report))
        accs.append(report["accuracy"])
        fprs.append(report["false_positive_rate"])
        records.append(
            {"cell": _cell_id(b, eps1, eps2), "rep": rep, **_scalars(report)}
        )

    singling = singling_out_from_draws(
        data.X, draws, include_joint=config.include_joint_net
    )

    attribute = None
    attr_detail = None
    if config.include_attribute_attack:
        attr_report = attribute_inference_protection(
            data.X,
            privatizer,
            RandomSource(config.seed, _STREAM_CELL_AI + cell_index),
            holdout=config.attack_holdout,
            repeats=config.repetitions,
        )
        attribute = attr_report.protection
        attr_detail = {
            f"col{j}_h{h}": cell for (j, h), cell in attr_report.cells.items()
        }

    dist = distinguishing_protection(budget)
    classic_eq = to_classic_dp(budget.composed())

    effect_mean = float(np.mean(effects))
    point = TradeoffPoint(
        case=config.case,
        label="tdp",
        B=b,
        epsilon1=eps1,
        delta1=budget.delta1,
        epsilon2=eps2,
        delta2=budget.delta2,
        k=config.proj_dim,
        partitions=config.partitions,
        repetitions=config.repetitions,
        effect_mean=effect_mean,
        effect_std=float(np.std(effects)),
        effect_delta_vs_baseline=(
            None if baseline_effect is None else effect_mean - baseline_effect
        ),
        relative_change_pct=(
            relative_change(effect_mean, baseline_effect)
            if data.kind == "binary" and baseline_effect not in (None, 0)
            else None
        ),
        accuracy_mean=float(np.mean(accs)),
        fpr_mean=float(np.mean(fprs)),
        singling_out=singling.worst_case,
        attribute_inference=attribute,
        distinguishing=dist.protection,
        classic_steps=classic_eq.steps,
        classic_epsilon=classic_eq.epsilon,
        classic_delta=classic_eq.delta,
    )
    detail = {
        "cell": _cell_id(b, eps1, eps2),
        "singling_out_by_scale": singling.protection_by_scale,
        "singling_out_joint_by_scale": singling.joint_by_scale,
        "attribute_cells": attr_detail,
        "distinguishing": {
            "loss_projection": dist.loss_projection,
            "loss_covariance": dist.loss_covariance,
            "total_loss": dist.total_loss,
        },
    }
    return point, detail, records


def _scalars(report: dict) -> dict:
    return {k: v for k, v in report.items() if isinstance(v, (int, float, str))}


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def _nonprivate_point(data: CaseData, config: ExperimentConfig, folds) -> tuple:
    report = _evaluate_matrix(data.X, data, folds, config)
    attribute = None
    if config.include_attribute_attack:
        attr = attribute_inference_protection(
            data.X,
            identity_privatizer,
            RandomSource(config.seed, _STREAM_BASELINE_AI),
            holdout=config.attack_holdout,
            repeats=config.repetitions,
            deterministic_privatizer=True,
        )
        attribute = attr.protection
    point = TradeoffPoint(
        case=config.case,
        label="nonprivate",
        repetitions=1,
        effect_mean=_effect_of(report),
        effect_std=0.0,
        accuracy_mean=report["accuracy"],
        fpr_mean=report["false_positive_rate"],
        singling_out=baseline_singling_out(data.X),
        attribute_inference=attribute,
        distinguishing=distinguishing_protection(None).protection,
    )
    return point, {"cell": "baseline_nonprivate", "report": _scalars(report)}


def _mondrian_point(data, config, folds, k, baseline_effect) -> tuple:
    released = mondrian_anonymize(data.X, AnonymityParams(k=k)).values
    report = _evaluate_matrix(released, data, folds, config)
    effect = _effect_of(report)
    point = TradeoffPoint(
        case=config.case,
        label="mondrian",
        mondrian_k=k,
        repetitions=1,
        effect_mean=effect,
        effect_std=0.0,
        effect_delta_vs_baseline=(
            None if baseline_effect is None else effect - baseline_effect
        ),
        relative_change_pct=(
            relative_change(effect, baseline_effect)
            if data.kind == "binary" and baseline_effect not in (None, 0)
            else None
        ),
        accuracy_mean=report["accuracy"],
        fpr_mean=report["false_positive_rate"],
    )
    return point, {"cell": f"mondrian_k{k}", "report": _scalars(report)}


# ---------------------------------------------------------------------------
# Sweep driver with resume
# ---------------------------------------------------------------------------


class _CellStore:
    """Per-cell JSON results plus an atomically updated manifest."""

    def __init__(self, out_dir: Path):
        self.dir = out_dir / "cells"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.manifest_path = out_dir / "manifest.json"
        self._lock = threading.Lock()
        self.completed = set()
        if self.manifest_path.exists():
            self.completed = set(json.loads(self.manifest_path.read_text())["completed"])

    def load(self, name: str):
        if name not in self.completed:
            return None
        path = self.dir / f"{name}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def save(self, name: str, payload: dict):
        with self._lock:
            tmp = self.dir / f"{name}.json.tmp"
            tmp.write_text(json.dumps(payload))
            os.replace(tmp, self.dir / f"{name}.json")
            self.completed.add(name)
            tmp = self.manifest_path.with_suffix(".tmp")
            tmp.write_text(json.dumps({"completed": sorted(self.completed)}))
            os.replace(tmp, self.manifest_path)


def run_sweep(config: ExperimentConfig) -> SweepResult:
    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store = _CellStore(out_dir)

    data = load_case_data(config)
    if config.attack_holdout >= data.X.shape[0]:
        raise InvalidConfig("attack_holdout must be smaller than the dataset")
    folds = kfold_split(data.X.shape[0], config.folds, RandomSource(config.seed, _STREAM_FOLDS))

    result = SweepResult(config=config)

    # Baselines run once per sweep.
    cached = store.load("baseline_nonprivate")
    if cached is not None:
        base_point = TradeoffPoint.from_row(cached["row"])
    else:
        base_point, detail = _nonprivate_point(data, config, folds)
        store.save("baseline_nonprivate", {"row": base_point.to_row(), "detail": detail})
    result.points.append(base_point)
    baseline_effect = base_point.effect_mean

    for k in config.mondrian_ks:
        name = f"mondrian_k{k}"
        cached = store.load(name)
        if cached is not None:
            point = TradeoffPoint.from_row(cached["row"])
        else:
            point, detail = _mondrian_point(data, config, folds, k, baseline_effect)
            store.save(name, {"row": point.to_row(), "detail": detail})
        result.points.append(point)

    cells = [
        (i, b, e1, e2)
        for i, (b, e1, e2) in enumerate(
            (b, e1, e2)
            for b in config.similarity_bounds
            for e1 in config.epsilon1_grid
            for e2 in config.epsilon2_grid
        )
    ]

    def compute(cell):
        i, b, e1, e2 = cell
        name = _cell_id(b, e1, e2)
        cached = store.load(name)
        if cached is not None:
            return TradeoffPoint.from_row(cached["row"]), cached.get("records", [])
        point, detail, records = run_single(
            data, config, folds, i, b, e1, e2, baseline_effect
        )
        store.save(name, {"row": point.to_row(), "detail": detail, "records": records})
        return point, records

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(compute, cells))
    else:
        outcomes = [compute(cell) for cell in cells]

    for point, records in outcomes:
        result.points.append(point)
        result.raw_records.extend(records)

    emit_results(result, out_dir)
    return result


def emit_results(result: SweepResult, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with (out_dir / "tradeoff.csv").open("w", newline="") as fh:
        fh.write(f"# {CSV_SCHEMA} columns={','.join(CSV_COLUMNS)}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for point in result.points:
            writer.writerow(point.to_row())

    with (out_dir / "raw.jsonl").open("w") as fh:
        for record in result.raw_records:
            fh.write(json.dumps(record) + "\n")

    (out_dir / "run.json").write_text(
        json.dumps({"version": __version__, "config": result.config.to_dict()}, indent=2)
    )


def read_tradeoff_csv(path) -> list[TradeoffPoint]:
    points = []
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    for row in rows[1:]:  # skip header
        points.append(TradeoffPoint.from_row(row))
    return points
