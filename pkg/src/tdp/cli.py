"""Command-line interface.

Subcommands: synth, privatize, anonymize, evaluate, attack, check-params,
sweep. Exit codes: 0 success, 2 invalid configuration or arguments, 3
infeasible budget, 4 runtime failure.

``--config FILE`` (JSON) supplies defaults for any flag not given on the
command line; explicit flags always win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import (
    attribute_inference_protection,
    baseline_singling_out,
    distinguishing_protection,
    singling_out_protection,
)
from .budgets import SplitBudget, max_feasible_bound, targeting_feasible
from .data import preprocess, read_csv, scale_target_unit_interval, validate_l2_ball, write_csv
from .errors import InvalidConfig, TdpError
from .mondrian import AnonymityParams, mondrian_anonymize
from .projection import (
    BaseBudget,
    delta_convention,
    partitioned_privatizer,
    privatize,
    privatize_partitioned,
    projection_privatizer,
)
from .rng import RandomSource
from .sweep import ExperimentConfig, run_sweep
from .synth import (
    nigeria_like_spec,
    synth_classification_dataset,
    synth_loan_book,
    synth_regression_dataset,
    target_moments,
    togo_like_spec,
)
from .targeting import ProfitLedger, evaluate_classification_case, evaluate_regression_case, kfold_split

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_RUNTIME = 4


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="root random seed (default 0)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default 1)")
    common.add_argument("--config", default=None, help="JSON file with default flag values")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="tdp", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tdp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic case dataset")
    p.add_argument("--case", choices=("togo", "nigeria"), required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--signal-strength", type=float, default=None)

    p = sub.add_parser("privatize", parents=[common], help="produce a privatized release")
    p.add_argument("--input", required=True, help="features CSV")
    p.add_argument("--budget", required=True, help="budget JSON: B, epsilon1, epsilon2, k[, delta1, delta2]")
    p.add_argument("--partitions", type=int, default=None)
    p.add_argument("--output", required=True, help="release CSV path")
    p.add_argument("--certificate", required=True, help="certificate JSON path")

    p = sub.add_parser("anonymize", parents=[common], help="k-anonymity baseline release")
    p.add_argument("--method", choices=("mondrian",), default="mondrian")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("evaluate", parents=[common], help="run the targeting evaluation")
    p.add_argument("--task", choices=("togo", "nigeria"), required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--ledger", default=None, help="loan ledger CSV (nigeria)")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--baseline-profit", type=float, default=None)
    p.add_argument("--out", required=True, help="report JSON path")

    p = sub.add_parser("attack", parents=[common], help="audit a privatization budget")
    p.add_argument("--kind", choices=("singling-out", "attribute", "distinguishing"), required=True)
    p.add_argument("--original", required=True, help="original features CSV")
    p.add_argument("--budget", required=True)
    p.add_argument("--partitions", type=int, default=None)
    p.add_argument("--runs", type=int, default=None, help="release draws (default 50)")
    p.add_argument("--holdout", type=int, default=None)
    p.add_argument("--joint-net", action="store_true", help="also score the same-row net variant")
    p.add_argument("--out", required=True)

    p = sub.add_parser("check-params", parents=[common], help="budget feasibility verdict")
    p.add_argument("params", help="JSON file with B, epsilon, delta, gamma ('-' for stdin)")

    p = sub.add_parser("sweep", parents=[common], help="run the tradeoff parameter sweep")
    p.add_argument("--case", choices=("togo", "nigeria"), default=None)
    p.add_argument("--out-dir", default=None)

    return parser


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill None-valued args from the --config JSON (explicit flags win)."""
    if getattr(args, "config", None):
        raw = json.loads(Path(args.config).read_text())
        if not isinstance(raw, dict):
            raise InvalidConfig("--config must contain a JSON object")
        for key, value in raw.items():
            attr = key.replace("-", "_")
            if getattr(args, attr, "__missing__") is None:
                setattr(args, attr, value)
    return args


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _load_budget(path, n: int, partitions: int) -> tuple[BaseBudget, dict]:
    raw = json.loads(Path(path).read_text())
    try:
        base = BaseBudget(
            similarity_bound=float(raw["B"]),
            epsilon1=float(raw["epsilon1"]),
            epsilon2=float(raw["epsilon2"]),
            proj_dim=int(raw["k"]),
        )
    except KeyError as exc:
        raise InvalidConfig(f"budget JSON missing key {exc}") from exc
    return base, raw


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    seed = args.seed or 0
    out = Path(args.out_dir)
    signal = 0.7 if args.signal_strength is None else args.signal_strength
    if args.case == "togo":
        spec = togo_like_spec(seed=seed, n=args.n, d=args.d, signal_strength=signal)
        X, y = synth_regression_dataset(spec)
    else:
        spec = nigeria_like_spec(seed=seed, n=args.n, d=args.d, signal_strength=signal)
        X, y = synth_classification_dataset(spec)

    write_csv(out / "X.csv", X.values, [f"f{j}" for j in range(X.d)])
    write_csv(out / "y.csv", y.values[:, None], ["y"])
    if args.case == "nigeria":
        book = synth_loan_book(X.n, RandomSource(seed, 5))
        write_csv(
            out / "loans.csv",
            np.column_stack([book.loan_amount, book.interest, book.revenue]),
            ["loan_amount", "interest", "revenue"],
        )
    moments = {
        "case": args.case,
        "seed": seed,
        "n": X.n,
        "d": X.d,
        "signal_strength": signal,
        "target": target_moments(y.values, y.kind),
        "features": {
            "structure": "correlated gaussian with randomly drawn correlation "
            "matrix (synthetic invention, not estimated from any real data)",
            "preprocessing": "columns standardized (population std), rows clipped "
            "to the unit L2 ball",
        },
    }
    _write_json(out / "moments.json", moments)
    print(f"wrote {args.case} dataset (n={X.n}, d={X.d}) to {out}")
    return EXIT_OK


def _cmd_privatize(args) -> int:
    seed = args.seed or 0
    partitions = args.partitions or 1
    values, columns = read_csv(args.input)

    preprocessed = False
    if not validate_l2_ball(values):
        matrix, _, _ = preprocess(values)
        values = matrix.values
        preprocessed = True

    base, raw = _load_budget(args.budget, values.shape[0], partitions)
    rng = RandomSource(seed)
    if partitions == 1:
        if "delta1" in raw and "delta2" in raw:
            budget = SplitBudget(
                similarity_bound=base.similarity_bound,
                epsilon1=base.epsilon1,
                delta1=float(raw["delta1"]),
                epsilon2=base.epsilon2,
                delta2=float(raw["delta2"]),
                proj_dim=base.proj_dim,
            )
        else:
            budget = base.with_deltas(values.shape[0], 1)
        output = privatize(values, budget, rng)
    else:
        output = privatize_partitioned(values, base, rng, partitions)

    write_csv(args.output, output.x_priv.values, columns)
    delta, d1, d2 = delta_convention(values.shape[0], partitions)
    cert = output.certificate()
    cert.update(
        {
            "seed": seed,
            "preprocessed_input": preprocessed,
            "delta_convention": {
                "n": values.shape[0],
                "partitions": partitions,
                "delta": delta,
            },
        }
    )
    _write_json(args.certificate, cert)
    print(f"wrote release to {args.output} (epsilon_total={cert['epsilon_total']:g})")
    return EXIT_OK


def _cmd_anonymize(args) -> int:
    values, columns = read_csv(args.input)
    released = mondrian_anonymize(values, AnonymityParams(k=args.k))
    write_csv(args.output, released.values, columns)
    print(f"wrote {args.k}-anonymous release to {args.output}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    seed = args.seed or 0
    folds_n = args.folds or 5
    features, _ = read_csv(args.features)
    target_raw, _ = read_csv(args.target)
    target = scale_target_unit_interval(target_raw[:, 0])
    folds = kfold_split(features.shape[0], folds_n, RandomSource(seed, 1))

    if args.task == "togo":
        report = evaluate_regression_case(features, target.values, folds)
    else:
        if not args.ledger:
            raise InvalidConfig("--ledger is required for the nigeria task")
        loans, cols = read_csv(args.ledger)
        ledger = ProfitLedger(
            loan_amount=loans[:, cols.index("loan_amount")],
            revenue=loans[:, cols.index("revenue")],
            interest=loans[:, cols.index("interest")],
        )
        report = evaluate_classification_case(
            features, target.values, folds, ledger, baseline_profit=args.baseline_profit
        )
    report.update({"seed": seed, "folds": folds_n, "task": args.task})
    _write_json(args.out, report)
    print(f"wrote evaluation report to {args.out}")
    return EXIT_OK


def _cmd_attack(args) -> int:
    seed = args.seed or 0
    values, _ = read_csv(args.original)
    n = values.shape[0]
    partitions = args.partitions or 1
    base, _ = _load_budget(args.budget, n, partitions)
    budget = base.with_deltas(n, partitions)

    if args.kind == "distinguishing":
        rep = distinguishing_protection(budget)
        payload = {
            "kind": args.kind,
            "protection": rep.protection,
            "loss_projection": rep.loss_projection,
            "loss_covariance": rep.loss_covariance,
            "total_loss": rep.total_loss,
        }
    else:
        # The adversary knows the algorithm, so attacks run against the
        # release with its deterministic 1/k output scale undone.
        if partitions == 1:
            privatizer = projection_privatizer(budget, descale=True)
        else:
            privatizer = partitioned_privatizer(base, partitions, descale=True)
        runs = args.runs or 50
        if args.kind == "singling-out":
            rep = singling_out_protection(
                values,
                privatizer,
                RandomSource(seed, 7),
                runs=runs,
                include_joint=args.joint_net,
            )
            payload = {
                "kind": args.kind,
                "protection": rep.worst_case,
                "baseline_nonprivate": baseline_singling_out(values),
                "by_scale": {str(k): v for k, v in rep.protection_by_scale.items()},
                "per_run_by_scale": {str(k): v for k, v in rep.per_run_by_scale.items()},
                "joint_by_scale": (
                    None
                    if rep.joint_by_scale is None
                    else {str(k): v for k, v in rep.joint_by_scale.items()}
                ),
                "runs": rep.runs,
            }
        else:
            rep = attribute_inference_protection(
                values,
                privatizer,
                RandomSource(seed, 8),
                holdout=args.holdout or 500,
                repeats=runs,
            )
            payload = {
                "kind": args.kind,
                "protection": rep.protection,
                "h_values": list(rep.h_values),
                "holdout": rep.holdout,
                "repeats": rep.repeats,
                "cells": {f"col{j}_h{h}": cell for (j, h), cell in rep.cells.items()},
            }
    payload["budget"] = json.loads(Path(args.budget).read_text())
    payload["partitions"] = partitions
    payload["seed"] = seed
    _write_json(args.out, payload)
    print(f"wrote {args.kind} attack report to {args.out}")
    return EXIT_OK


def _cmd_check_params(args) -> int:
    text = sys.stdin.read() if args.params == "-" else Path(args.params).read_text()
    raw = json.loads(text)
    try:
        b = float(raw["B"])
        epsilon = float(raw["epsilon"])
        delta = float(raw["delta"])
        gamma = float(raw["gamma"])
    except KeyError as exc:
        raise InvalidConfig(f"params JSON missing key {exc}") from exc

    feasible = targeting_feasible(b, epsilon, delta, gamma)
    verdict = {
        "feasible": feasible,
        "B": b,
        "epsilon": epsilon,
        "delta": delta,
        "gamma": gamma,
        "max_feasible_B": max_feasible_bound(epsilon, delta, gamma) if gamma > 0.5 else 2.0,
        "note": "necessary condition only: infeasible budgets are provably "
        "hopeless, feasible ones are not thereby guaranteed accurate",
    }
    print(json.dumps(verdict, indent=2))
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def _cmd_sweep(args) -> int:
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        if args.case:
            raw["case"] = args.case
        if args.out_dir:
            raw["out_dir"] = args.out_dir
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.threads is not None:
            raw["threads"] = args.threads
        config = ExperimentConfig.from_dict(raw)
    else:
        if not (args.case and args.out_dir):
            raise InvalidConfig("sweep needs --config or both --case and --out-dir")
        config = ExperimentConfig(
            case=args.case,
            out_dir=args.out_dir,
            seed=args.seed or 0,
            threads=args.threads or 1,
        )
    result = run_sweep(config)
    print(f"sweep complete: {len(result.points)} rows -> {config.out_dir}/tradeoff.csv")
    return EXIT_OK


_HANDLERS = {
    "synth": _cmd_synth,
    "privatize": _cmd_privatize,
    "anonymize": _cmd_anonymize,
    "evaluate": _cmd_evaluate,
    "attack": _cmd_attack,
    "check-params": _cmd_check_params,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command != "sweep":  # sweep does its own config merge
            args = _merge_config(args)
        return _HANDLERS[args.command](args)
    except InvalidConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except TdpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
