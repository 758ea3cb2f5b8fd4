"""Command-line interface tying estimation, metrics, scenarios and barycenters.

Commands read trajectory CSVs (``# dt=<seconds>`` header) or spectral-measure
JSON files and emit tidy CSV/JSON results into --out-dir. Every command is
deterministic given its config and seed. Exit codes: 0 success, 2 input
error, 3 numerical failure, 4 non-convergence / budget exhaustion.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import errors
from .barycenter import BarycenterProblem, params_to_measure, solve_barycenter
from .classify import (
    ETA_GRID,
    classification_features,
    fit_classification_operator,
    knn_classify,
)
from .estimation import (
    eigendecompose,
    fit_rrr,
    generator_eigenvalues,
    read_trajectory_csv,
    windowed_pairs,
    write_trajectory_csv,
)
from .forecast import forecast_series
from .kernels import KernelKind, KernelSpec
from .measures import build_measure, load_measure, save_measure
from .metrics import (
    MetricConfig,
    MetricKind,
    config_for_metric,
    distance_matrix,
    hilbert_schmidt_distance,
    martin_distance,
    operator_norm_distance,
    pairwise_distance,
    write_distance_csv,
)
from .synth import (
    ScenarioKind,
    decay_scenario,
    frequency_scenario,
    interpolation_pair,
    reference_dataset,
    sampling_scenario,
    scenario_grid,
    subspace_scenario,
)

INPUT_ERRORS = (
    errors.ParameterError,
    errors.ParseError,
    errors.InsufficientDataError,
    errors.DimensionError,
    errors.RankError,
    errors.StratificationError,
    errors.IncompatibleSystemsError,
    errors.MarginalError,
    errors.EmptyMeasureError,
)
NUMERICAL_ERRORS = (
    errors.NumericalError,
    errors.DefectiveOperatorError,
    errors.ZeroEigenvalueError,
    errors.IllDefinedError,
    errors.DegenerateDirectionError,
    errors.ProjectionError,
)

SCENARIO_FACTORIES = {
    "a": frequency_scenario,
    "frequency": frequency_scenario,
    "b": decay_scenario,
    "decay": decay_scenario,
    "c": subspace_scenario,
    "subspace": subspace_scenario,
    "d": sampling_scenario,
    "sampling": sampling_scenario,
}

ALL_METRICS = ("sgot", "sot", "got", "hs", "op", "martin")


class _Budget:
    """Wall-clock budget shared by a command's work loop."""

    def __init__(self, seconds: float | None):
        self.seconds = seconds
        self.start = time.monotonic()

    def check(self, what: str) -> None:
        if self.seconds is not None and time.monotonic() - self.start > self.seconds:
            raise errors.ConvergenceError(
                f"time budget of {self.seconds} s exhausted during {what}"
            )


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise errors.ParseError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise errors.ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise errors.ParseError(f"{path}: config must be a JSON object")
    return cfg


def _kernel_from_name(name: str) -> KernelSpec:
    try:
        kind = KernelKind(name)
    except ValueError as exc:
        raise errors.ParameterError(f"unknown kernel {name!r}") from exc
    return KernelSpec(kind)


def _metric_config(args, cfg: dict) -> MetricConfig:
    overrides = {}
    eta = args.eta if args.eta is not None else cfg.get("eta")
    if eta is not None:
        overrides["eta"] = float(eta)
    p = args.p if args.p is not None else cfg.get("p")
    if p is not None:
        overrides["p"] = int(p)
    name = args.metric or cfg.get("metric", "sgot")
    return config_for_metric(name, **overrides)


def _estimate_measure(series, dt, args, cfg):
    """Trajectory -> spectral measure with the command's estimation settings."""
    n = series.shape[0]
    context = int(cfg.get("context", min(100, n // 4)))
    feature_size = cfg.get("feature_size")
    feature_size = int(feature_size) if feature_size is not None else None
    data = windowed_pairs(series, context, dt, feature_size=feature_size)
    kernel = _kernel_from_name(args.kernel or cfg.get("kernel", "linear"))
    rank = int(args.rank if args.rank is not None else cfg.get("rank", 4))
    gamma = float(args.gamma if args.gamma is not None else cfg.get("gamma", 1e-8))
    op = fit_rrr(data, kernel, rank, gamma)
    return build_measure(eigendecompose(op), op), op


def cmd_estimate(args, cfg: dict, out_dir: Path) -> int:
    budget = _Budget(args.time_budget)
    for path in args.inputs:
        budget.check("estimation")
        series, dt = read_trajectory_csv(path)
        measure, _ = _estimate_measure(series, dt, args, cfg)
        out = out_dir / (Path(path).stem + ".measure.json")
        save_measure(measure, out)
        print(out)
    return 0


def cmd_distmat(args, cfg: dict, out_dir: Path) -> int:
    mcfg = _metric_config(args, cfg)
    if mcfg.metric_kind in (MetricKind.HILBERT_SCHMIDT, MetricKind.OPERATOR_NORM):
        raise errors.ParameterError(
            "hs/op baselines need raw operators; estimate trajectories with "
            "--metric sgot|sot|got|martin or use the library API"
        )
    measures = [load_measure(p) for p in args.inputs]
    D = distance_matrix(measures, mcfg)
    out = out_dir / "distances.csv"
    write_distance_csv(out, D, [Path(p).stem for p in args.inputs])
    print(out)
    return 0


def _scenario_distances(ref_data, reps, mcfg: MetricConfig, rank: int, gamma: float):
    """Replicate-averaged distance of one grid point to the reference system."""
    kernel = KernelSpec(KernelKind.LINEAR)
    ref_op = fit_rrr(ref_data, kernel, rank, gamma)
    ref_measure = build_measure(eigendecompose(ref_op), ref_op)
    vals = []
    for data in reps:
        op = fit_rrr(data, kernel, rank, gamma)
        kind = mcfg.metric_kind
        if kind in (MetricKind.HILBERT_SCHMIDT, MetricKind.OPERATOR_NORM):
            vals.append(pairwise_distance(ref_op, op, mcfg))
        elif kind is MetricKind.MARTIN:
            measure = build_measure(eigendecompose(op), op)
            vals.append(martin_distance(ref_measure, measure, mcfg.martin_truncation))
        else:
            measure = build_measure(eigendecompose(op), op)
            vals.append(pairwise_distance(ref_measure, measure, mcfg))
    return float(np.mean(vals))


def cmd_scenario(args, cfg: dict, out_dir: Path) -> int:
    name = args.scenario
    if name not in SCENARIO_FACTORIES:
        raise errors.ParameterError(f"unknown scenario {name!r}")
    factory = SCENARIO_FACTORIES[name]
    spec_kw = {
        k: cfg[k]
        for k in ("n_points", "lo", "hi", "fs", "length", "noise_std", "replicates")
        if k in cfg
    }
    if name in ("c", "subspace") and "max_order" in cfg:
        spec_kw["max_order"] = cfg["max_order"]
        spec_kw.pop("n_points", None)
        spec_kw.pop("lo", None)
        spec_kw.pop("hi", None)
    spec = factory(seed=args.seed, **spec_kw)
    rank = int(args.rank if args.rank is not None else cfg.get("rank", 4))
    gamma = float(args.gamma if args.gamma is not None else cfg.get("gamma", 1e-8))
    metrics = cfg.get("metrics", list(ALL_METRICS))
    budget = _Budget(args.time_budget)

    grid = scenario_grid(spec)
    ref = reference_dataset(spec)
    rows = []  # (metric, shift, distance, degenerate flag)
    for mname in metrics:
        mcfg = _metric_config(args, {**cfg, "metric": mname})
        col = []
        for value, reps in zip(spec.grid, grid):
            budget.check(f"scenario {name}/{mname}")
            try:
                d = _scenario_distances(ref, reps, mcfg, rank, gamma)
                col.append((float(value), d, ""))
            except errors.IllDefinedError:
                col.append((float(value), float("nan"), "ill-defined"))
        finite = [d for _, d, _ in col if np.isfinite(d)]
        # Scenario (d) stays unnormalized: the figure of merit is absolute
        # flatness across sampling rates.
        normalize = spec.kind is not ScenarioKind.SAMPLING_SHIFT
        top = max(finite) if finite else 0.0
        for value, d, flag in col:
            if normalize and top > 0 and np.isfinite(d):
                rows.append((mname, value, d / top, flag))
            else:
                f = flag or ("zero-maximum" if normalize and top == 0 else "")
                rows.append((mname, value, d, f))
    out = out_dir / f"scenario_{name}.csv"
    with open(out, "w") as fh:
        fh.write("scenario,shift,metric,distance,flag\n")
        for mname, value, d, flag in rows:
            fh.write(f"{name},{value!r},{mname},{d!r},{flag}\n")
    print(out)
    return 0


def cmd_classify(args, cfg: dict, out_dir: Path) -> int:
    manifest = Path(args.manifest)
    pairs = []
    try:
        with open(manifest) as fh:
            for ln, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.rsplit(",", 1)
                if len(parts) != 2:
                    raise errors.ParseError(f"{manifest}:{ln}: expected 'path,label'")
                pairs.append((parts[0].strip(), parts[1].strip()))
    except OSError as exc:
        raise errors.ParseError(f"cannot read manifest {manifest}: {exc}") from exc
    if not pairs:
        raise errors.InsufficientDataError(f"{manifest}: empty manifest")
    budget = _Budget(args.time_budget)
    labels = np.array([lab for _, lab in pairs])
    rank = int(args.rank if args.rank is not None else cfg.get("rank", 4))
    measures, ops = [], []
    for path, _ in pairs:
        budget.check("estimation")
        series, dt = read_trajectory_csv(manifest.parent / path)
        data = classification_features(series, dt)
        op = fit_classification_operator(data, rank)
        ops.append(op)
        measures.append(build_measure(eigendecompose(op), op))
    name = args.metric or cfg.get("metric", "sgot")
    budget.check("distance matrices")
    if name == "sgot":
        distances = {
            eta: distance_matrix(measures, config_for_metric("sgot", eta=eta))
            for eta in ETA_GRID
        }
    elif name in ("hs", "op"):
        distances = {name: distance_matrix(ops, config_for_metric(name))}
    else:
        distances = {name: distance_matrix(measures, _metric_config(args, cfg))}
    budget.check("cross-validation")
    report = knn_classify(
        distances,
        labels,
        n_iterations=int(cfg.get("n_iterations", 10)),
        test_frac=float(cfg.get("test_frac", 0.3)),
        inner_folds=int(cfg.get("inner_folds", 5)),
        seed=args.seed,
    )
    out = out_dir / "classification.json"
    with open(out, "w") as fh:
        json.dump({"metric": name, **report.to_dict()}, fh, indent=2)
    print(out)
    return 0


def _write_trace_csv(path, trace, residuals) -> None:
    with open(path, "w") as fh:
        fh.write("cycle,objective,biorthogonality_residual,normalization_residual\n")
        for i, J in enumerate(trace):
            fh.write(f"{i},{float(J)!r},{float(residuals[0])!r},{float(residuals[1])!r}\n")


def cmd_interpolate(args, cfg: dict, out_dir: Path) -> int:
    budget = _Budget(args.time_budget)
    if args.inputs:
        if len(args.inputs) != 2:
            raise errors.ParameterError("interpolate takes exactly two trajectory CSVs")
        loaded = []
        for path in args.inputs:
            series, dt = read_trajectory_csv(path)
            loaded.append(_estimate_measure(series, dt, args, cfg)[0])
        m0, m1 = loaded
    else:
        d0, d1 = interpolation_pair(seed=args.seed)
        kernel = KernelSpec(KernelKind.LINEAR)
        rank = int(args.rank if args.rank is not None else cfg.get("rank", 4))
        gamma = float(args.gamma if args.gamma is not None else cfg.get("gamma", 1e-8))
        ops = [fit_rrr(d, kernel, rank, gamma) for d in (d0, d1)]
        m0, m1 = (build_measure(eigendecompose(op), op) for op in ops)
    n_gammas = int(cfg.get("n_gammas", 11))
    gammas = np.linspace(0.0, 1.0, n_gammas)
    mcfg = _metric_config(args, cfg)
    rank = int(args.rank if args.rank is not None else cfg.get("rank", max(len(m0.lambdas), len(m1.lambdas))))
    summary = []
    for g in gammas:
        budget.check(f"barycenter at gamma={g:.2f}")
        problem = BarycenterProblem(
            inputs=(m0, m1),
            weights=np.array([1.0 - g, g]),
            rank=rank,
            lr=float(cfg.get("lr", 1e-2)),
            max_cycles=int(cfg.get("max_cycles", 200)),
            inner_steps=int(cfg.get("inner_steps", 10)),
            n_control=int(cfg.get("n_control", 400)),
            metric=mcfg,
        )
        params, _, trace = solve_barycenter(problem, seed=args.seed)
        measure = params_to_measure(params)
        tag = f"{g:.2f}"
        save_measure(measure, out_dir / f"barycenter_gamma_{tag}.json")
        _write_trace_csv(
            out_dir / f"trace_gamma_{tag}.csv", trace, params.constraint_residuals()
        )
        for idx, lam in enumerate(measure.lambdas):
            summary.append((float(g), idx, float(lam.real), float(lam.imag) / (2.0 * np.pi)))
    out = out_dir / "interpolation_summary.csv"
    with open(out, "w") as fh:
        fh.write("gamma,mode,decay,frequency_hz\n")
        for g, idx, dec, f in summary:
            fh.write(f"{g!r},{idx},{dec!r},{f!r}\n")
    print(out)
    return 0


def cmd_forecast(args, cfg: dict, out_dir: Path) -> int:
    measure = load_measure(args.measure)
    window, dt = read_trajectory_csv(args.init_window)
    horizon = int(args.horizon)
    dim = window.shape[1] if window.ndim == 2 else 1
    pred = forecast_series(measure, window, horizon, dim=dim)
    out = out_dir / "forecast.csv"
    write_trajectory_csv(out, pred, measure.dt)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgot",
        description="Spectral-Grassmann optimal transport between dynamical systems",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file with command parameters")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--metric", choices=ALL_METRICS)
    common.add_argument("--eta", type=float, help="eigenvalue/Grassmann trade-off in (0,1)")
    common.add_argument("--p", type=int, help="Wasserstein order")
    common.add_argument("--rank", type=int, help="estimator rank")
    common.add_argument("--gamma", type=float, help="Tikhonov regularization")
    common.add_argument("--kernel", choices=["linear", "rbf"])
    common.add_argument("--jobs", type=int, default=1, help="reserved; work items are independent")
    common.add_argument("--time-budget", type=float, help="wall-clock budget in seconds")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("estimate", parents=[common], help="trajectory CSVs -> measure JSONs")
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_estimate)
    p = sub.add_parser("distmat", parents=[common], help="measure JSONs -> distance CSV")
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_distmat)
    p = sub.add_parser("scenario", parents=[common], help="benchmark scenario sweep")
    p.add_argument("scenario", choices=sorted(SCENARIO_FACTORIES))
    p.set_defaults(func=cmd_scenario)
    p = sub.add_parser("classify", parents=[common], help="kNN over a labeled manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_classify)
    p = sub.add_parser("interpolate", parents=[common], help="barycentric interpolation path")
    p.add_argument("inputs", nargs="*", help="two trajectory CSVs (default: built-in pair)")
    p.set_defaults(func=cmd_interpolate)
    p = sub.add_parser("forecast", parents=[common], help="modal forecast from a measure")
    p.add_argument("measure")
    p.add_argument("init_window", help="trajectory CSV holding the initial context window")
    p.add_argument("--horizon", type=int, required=True)
    p.set_defaults(func=cmd_forecast)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return args.func(args, cfg, out_dir)
    except (errors.ConvergenceError,) as exc:
        _emit_error(exc)
        return 4
    except NUMERICAL_ERRORS as exc:
        _emit_error(exc)
        return 3
    except INPUT_ERRORS as exc:
        _emit_error(exc)
        return 2
    except OSError as exc:
        _emit_error(exc)
        return 2


def _emit_error(exc: Exception) -> None:
    json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
    sys.stderr.write("\n")


if __name__ == "__main__":
    sys.exit(main())
