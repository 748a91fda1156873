"""Experiment runner.

Reads a JSON experiment spec, executes one experiment kind by composing the
library modules, and writes analysis-ready CSV tables plus a JSON summary
and a versioned JSON run manifest.  Outputs are a pure function of
(spec, seed): rerunning with any worker count reproduces the CSV bytes.

Exit codes: 0 success; 2 bad configuration; 3 memory budget exceeded;
4 survival rejection exhausted (partial results are still written and
flagged in the manifest).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import MemoryBudgetError, RejectionLimitError
from .estimators import (
    covariance_from_paths,
    ensemble_from_sweep,
    path_average_bracket,
    porosity_extremes,
)
from .experiments import (
    dimension_slope,
    ensemble_sweep_parallel,
    run_path_batch_partial,
    slice_decay,
)
from .percolation import STREAM_ENSEMBLE, PercolationConfig, _max_nodes_default
from .qsampler import DEFAULT_ALPHA_GRID, DEFAULT_EPS_GRID
from .rng import substream
from . import __version__

KINDS = (
    "path-series",
    "ensemble",
    "covariance",
    "porosity-extremes",
    "slice-decay",
    "dimension-slope",
)

_SCHEMA_VERSION = 1


@dataclass
class ExperimentSpec:
    """Everything a run needs; serializable to/from plain JSON."""

    kind: str
    m: int = 2
    k: int = 2
    p: float = 0.8
    seed: int = 0
    scales: int = 100  # path length (scales visited per path)
    resolution: int = 6  # r: grid refinement depth per scale
    probe_depth: int = 4  # g: extra generations deciding alive cells
    alpha_grid: Tuple[float, ...] = DEFAULT_ALPHA_GRID
    eps_grid: Tuple[float, ...] = DEFAULT_EPS_GRID
    delta_frac: float = 1.0 / 3.0  # delta = delta_frac * alpha in summaries
    replicas: int = 20  # paths / ensemble replicas / trees, per kind
    workers: int = 1
    out_dir: str = "results"
    alpha: float = 0.25  # focal alpha for the covariance kind
    lags: Tuple[int, ...] = (0, 1, 2, 4, 6, 8)
    depths: Tuple[int, ...] = tuple(range(4, 13))
    resolutions: Tuple[int, ...] = (4, 8)
    slab_axis: int = 0
    slab_position: int = 0
    max_attempts: int = 1000

    def config(self) -> PercolationConfig:
        return PercolationConfig(m=self.m, k=self.k, p=self.p, seed=self.seed)


_TUPLE_FIELDS = {"alpha_grid", "eps_grid", "lags", "depths", "resolutions"}


def spec_from_dict(data: dict) -> ExperimentSpec:
    if "spec" in data and isinstance(data["spec"], dict):
        data = data["spec"]  # accept a run manifest as input
    known = {f for f in ExperimentSpec.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown spec keys: {sorted(unknown)}")
    if "kind" not in data:
        raise ValueError("spec must declare a kind")
    clean = {}
    for key, value in data.items():
        if key in _TUPLE_FIELDS:
            clean[key] = tuple(value)
        else:
            clean[key] = value
    return ExperimentSpec(**clean)


def spec_errors(spec: ExperimentSpec) -> List[str]:
    """Hard bound violations; any entry makes the spec unusable."""
    errors = []
    if spec.kind not in KINDS:
        errors.append(f"kind must be one of {KINDS}, got {spec.kind!r}")
    if spec.m < 1:
        errors.append("m must be >= 1")
    if spec.k < 2:
        errors.append("k must be >= 2")
    if not 0.0 < spec.p <= 1.0:
        errors.append("p must lie in (0, 1]")
    if spec.scales < 1:
        errors.append("scales must be >= 1")
    if spec.resolution < 1:
        errors.append("resolution must be >= 1")
    if spec.probe_depth < 0:
        errors.append("probe_depth must be >= 0")
    if spec.replicas < 1:
        errors.append("replicas must be >= 1")
    if spec.workers < 1:
        errors.append("workers must be >= 1")
    if not 0.0 < spec.delta_frac < 1.0:
        errors.append("delta_frac must lie in (0, 1)")
    if any(not 0.0 < a <= 1.0 for a in spec.alpha_grid):
        errors.append("alpha_grid entries must lie in (0, 1]")
    if not 0.0 < spec.alpha <= 1.0:
        errors.append("alpha must lie in (0, 1]")
    if any(e <= 0.0 for e in spec.eps_grid):
        errors.append("eps_grid entries must be > 0")
    if any(l < 0 for l in spec.lags) or not spec.lags:
        errors.append("lags must be a nonempty list of integers >= 0")
    if any(j < 1 for j in spec.depths) or not spec.depths:
        errors.append("depths must be a nonempty list of integers >= 1")
    if any(r < 1 for r in spec.resolutions) or not spec.resolutions:
        errors.append("resolutions must be a nonempty list of integers >= 1")
    if not 0 <= spec.slab_axis < spec.m:
        errors.append("slab_axis out of range")
    if spec.slab_position < 0 or spec.slab_position >= spec.k ** min(spec.resolutions):
        errors.append("slab_position outside the coarsest slice grid")
    if spec.max_attempts < 1:
        errors.append("max_attempts must be >= 1")
    return errors


def validate(spec: ExperimentSpec) -> List[str]:
    """Advisory report: conditions worth a warning but not a refusal."""
    warnings = []
    if spec.p <= float(spec.k) ** (-spec.m):
        warnings.append(
            f"p={spec.p} is at or below the critical value k^-m="
            f"{float(spec.k) ** (-spec.m):g}: the process dies out almost "
            f"surely and survival rejection will be slow or hopeless"
        )
    if spec.kind == "slice-decay":
        depth = max(spec.resolutions) + spec.probe_depth
    elif spec.kind == "dimension-slope":
        depth = 0  # sparse frontier walk; dense cap does not apply
    else:
        depth = spec.resolution + spec.probe_depth
    if depth:
        nodes = spec.k ** (spec.m * depth)
        budget = _max_nodes_default()
        concurrent = max(1, spec.workers)
        if nodes > budget:
            warnings.append(
                f"a depth-{depth} expansion needs {nodes} nodes, above the "
                f"budget {budget}; the run will fail (raise PERCOLAB_MAX_NODES)"
            )
        elif nodes * concurrent > budget * 4:
            warnings.append(
                f"{concurrent} workers x {nodes} nodes is a large resident "
                f"set; consider fewer workers or a smaller resolution"
            )
    return warnings


# -- output helpers ------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _py(obj):
    """Recursively convert numpy containers/scalars for JSON output."""
    if isinstance(obj, dict):
        return {key: _py(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_py(val) for val in obj]
    if isinstance(obj, np.ndarray):
        return [_py(val) for val in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(_py(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _estimate_row_fields():
    return [
        "alpha",
        "lower_estimate",
        "lower_se",
        "lower_ci_low",
        "lower_ci_high",
        "upper_estimate",
        "upper_se",
        "upper_ci_low",
        "upper_ci_high",
        "replicas",
        "r",
        "g",
        "kind",
    ]


def _estimate_row(lower, upper):
    return [
        lower.alpha,
        lower.estimate,
        lower.se,
        lower.ci_low,
        lower.ci_high,
        upper.estimate,
        upper.se,
        upper.ci_low,
        upper.ci_high,
        lower.replicas,
        lower.r,
        lower.g,
        lower.kind,
    ]


# -- experiment kinds ----------------------------------------------------------


def _paths_outputs(out: Path, paths) -> List[str]:
    outputs = []

    rows = [
        (
            p.replica,
            p.tree_config.seed,
            p.attempts,
            p.weight,
            p.n,
            p.r,
            p.g,
        )
        for p in paths
    ]
    _write_csv(
        out / "path_summary.csv",
        ["replica", "seed", "attempts", "weight", "scales", "resolution", "probe_depth"],
        rows,
    )
    outputs.append("path_summary.csv")

    scale_rows = []
    for p in paths:
        for j in range(p.n):
            scale_rows.append(
                (
                    p.replica,
                    p.tree_config.seed,
                    j + 1,
                    p.x_hat[j],
                    p.total_mass[j],
                    p.a_star[j],
                    p.restricted_a_star[j],
                    p.set_por[j],
                )
            )
    _write_csv(
        out / "scales.csv",
        [
            "replica",
            "seed",
            "scale",
            "x_hat",
            "total_mass",
            "a_star",
            "restricted_a_star",
            "set_porosity",
        ],
        scale_rows,
    )
    outputs.append("scales.csv")

    ind_rows = []
    for p in paths:
        for j in range(p.n):
            for ia, alpha in enumerate(p.alpha_grid):
                for ie, eps in enumerate(p.eps_grid):
                    ind_rows.append(
                        (
                            p.replica,
                            j + 1,
                            alpha,
                            eps,
                            p.lower[j, ia],
                            p.upper[j, ia],
                            p.measure_ind[j, ia, ie],
                        )
                    )
    _write_csv(
        out / "indicators.csv",
        ["replica", "scale", "alpha", "eps", "set_lower", "set_upper", "measure_hole"],
        ind_rows,
    )
    outputs.append("indicators.csv")

    por_rows = []
    for p in paths:
        for j in range(p.n):
            for ie, eps in enumerate(p.eps_grid):
                por_rows.append((p.replica, j + 1, eps, p.meas_por[j, ie]))
    _write_csv(
        out / "porosity.csv",
        ["replica", "scale", "eps", "measure_porosity"],
        por_rows,
    )
    outputs.append("porosity.csv")
    return outputs


def _survival_of_paths(paths) -> dict:
    total_attempts = int(sum(p.attempts for p in paths))
    return {
        "paths": len(paths),
        "total_attempts": total_attempts,
        "rejections": total_attempts - len(paths),
        "acceptance_rate": len(paths) / total_attempts if total_attempts else 0.0,
    }


def _run_path_series(spec: ExperimentSpec, out: Path):
    config = spec.config()
    paths, err = run_path_batch_partial(
        config,
        paths=spec.replicas,
        n=spec.scales,
        r=spec.resolution,
        g=spec.probe_depth,
        alpha_grid=spec.alpha_grid,
        eps_grid=spec.eps_grid,
        workers=spec.workers,
        max_attempts=spec.max_attempts,
    )
    outputs = _paths_outputs(out, paths)

    summary = {"kind": spec.kind, "alphas": []}
    if len(paths) >= 2:
        for alpha in spec.alpha_grid:
            lower, upper = path_average_bracket(paths, alpha)
            summary["alphas"].append(
                {
                    "alpha": alpha,
                    "lower": {
                        "estimate": lower.estimate,
                        "se": lower.se,
                        "ci": [lower.ci_low, lower.ci_high],
                    },
                    "upper": {
                        "estimate": upper.estimate,
                        "se": upper.se,
                        "ci": [upper.ci_low, upper.ci_high],
                    },
                    "replicas": lower.replicas,
                    "kind": lower.kind,
                }
            )
        summary["mean_weight"] = float(np.mean([p.weight for p in paths]))
    seeds = [
        {"replica": p.replica, "seed": p.tree_config.seed, "attempts": p.attempts}
        for p in paths
    ]
    return outputs, summary, _survival_of_paths(paths), seeds, err


def _run_ensemble(spec: ExperimentSpec, out: Path):
    config = spec.config()
    weights, blocks = ensemble_sweep_parallel(
        config, spec.resolution, spec.probe_depth, spec.replicas, spec.workers
    )
    pairs = ensemble_from_sweep(
        config, spec.alpha_grid, spec.resolution, spec.probe_depth, weights, blocks
    )
    _write_csv(
        out / "ensemble.csv",
        _estimate_row_fields(),
        [_estimate_row(lo, up) for lo, up in pairs],
    )
    seeds = [substream(spec.seed, STREAM_ENSEMBLE, i) for i in range(spec.replicas)]
    _write_csv(
        out / "replica_sweep.csv",
        ["replica", "seed", "weight", "a_star"],
        [(i, seeds[i], weights[i], blocks[i]) for i in range(spec.replicas)],
    )
    summary = {
        "kind": spec.kind,
        "alphas": [
            {
                "alpha": lo.alpha,
                "lower": {"estimate": lo.estimate, "ci": [lo.ci_low, lo.ci_high]},
                "upper": {"estimate": up.estimate, "ci": [up.ci_low, up.ci_high]},
                "replicas": lo.replicas,
                "kind": lo.kind,
            }
            for lo, up in pairs
        ],
        "mean_weight": float(weights.mean()),
        "alive_fraction": float((weights > 0).mean()),
    }
    survival = {
        "replicas": spec.replicas,
        "alive_fraction": float((weights > 0).mean()),
    }
    return (
        ["ensemble.csv", "replica_sweep.csv"],
        summary,
        survival,
        [{"replica": i, "seed": seeds[i]} for i in range(spec.replicas)],
        None,
    )


def _run_covariance(spec: ExperimentSpec, out: Path):
    config = spec.config()
    lags = tuple(sorted(set(spec.lags)))
    paths, err = run_path_batch_partial(
        config,
        paths=spec.replicas,
        n=max(lags) + 1,
        r=spec.resolution,
        g=spec.probe_depth,
        alpha_grid=(spec.alpha,),
        eps_grid=(),
        workers=spec.workers,
        max_attempts=spec.max_attempts,
    )
    rows = []
    summary = {"kind": spec.kind, "alpha": spec.alpha, "lags": []}
    if len(paths) >= 2:
        for lag in lags:
            est = covariance_from_paths(paths, spec.alpha, lag)
            rows.append(
                (
                    est.alpha,
                    est.r,
                    est.g,
                    est.lag,
                    est.replicas,
                    est.covariance,
                    est.se,
                    est.ci_low,
                    est.ci_high,
                    est.mean_first,
                    est.mean_second,
                )
            )
            summary["lags"].append(
                {
                    "lag": est.lag,
                    "covariance": est.covariance,
                    "se": est.se,
                    "ci": [est.ci_low, est.ci_high],
                    "replicas": est.replicas,
                }
            )
    _write_csv(
        out / "covariance.csv",
        [
            "alpha",
            "r",
            "g",
            "lag",
            "replicas",
            "covariance",
            "se",
            "ci_low",
            "ci_high",
            "mean_first",
            "mean_second",
        ],
        rows,
    )
    seeds = [
        {"replica": p.replica, "seed": p.tree_config.seed, "attempts": p.attempts}
        for p in paths
    ]
    return ["covariance.csv"], summary, _survival_of_paths(paths), seeds, err


def _run_porosity_extremes(spec: ExperimentSpec, out: Path):
    config = spec.config()
    paths, err = run_path_batch_partial(
        config,
        paths=spec.replicas,
        n=spec.scales,
        r=spec.resolution,
        g=spec.probe_depth,
        alpha_grid=spec.alpha_grid,
        eps_grid=spec.eps_grid,
        workers=spec.workers,
        max_attempts=spec.max_attempts,
    )
    rows = []
    finals = {"set_min": [], "set_max": []}
    finals_meas = {eps: [] for eps in spec.eps_grid}
    for p in paths:
        ext = porosity_extremes(p)
        for j in range(p.n):
            for ie, eps in enumerate(spec.eps_grid):
                rows.append(
                    (
                        p.replica,
                        j + 1,
                        ext.set_min[j],
                        ext.set_max[j],
                        eps,
                        ext.meas_min[j, ie],
                        ext.meas_max[j, ie],
                    )
                )
        finals["set_min"].append(float(ext.set_min[-1]))
        finals["set_max"].append(float(ext.set_max[-1]))
        for ie, eps in enumerate(spec.eps_grid):
            finals_meas[eps].append(float(ext.meas_max[-1, ie]))
    _write_csv(
        out / "extremes.csv",
        ["replica", "scale", "set_min", "set_max", "eps", "meas_min", "meas_max"],
        rows,
    )
    summary = {"kind": spec.kind}
    if paths:
        summary.update(
            {
                "median_set_min": float(np.median(finals["set_min"])),
                "median_set_max": float(np.median(finals["set_max"])),
                "median_meas_max": {
                    repr(float(eps)): float(np.median(vals))
                    for eps, vals in finals_meas.items()
                },
                "paths": len(paths),
            }
        )
    seeds = [
        {"replica": p.replica, "seed": p.tree_config.seed, "attempts": p.attempts}
        for p in paths
    ]
    return ["extremes.csv"], summary, _survival_of_paths(paths), seeds, err


def _run_slice_decay(spec: ExperimentSpec, out: Path):
    config = spec.config()
    res = slice_decay(
        config,
        resolutions=spec.resolutions,
        trees=spec.replicas,
        g=spec.probe_depth,
        axis=spec.slab_axis,
        position=spec.slab_position,
        workers=spec.workers,
    )
    _write_csv(
        out / "slice.csv",
        ["resolution", "trees", "surviving", "mean_fraction", "se"],
        [
            (r, res.trees, res.surviving[i], res.mean_fraction[i], res.se[i])
            for i, r in enumerate(res.resolutions)
        ],
    )
    summary = {
        "kind": spec.kind,
        "resolutions": list(res.resolutions),
        "mean_fraction": list(res.mean_fraction),
        "se": list(res.se),
        "observed_ratios": list(res.observed_ratios),
        "theory_ratios": list(res.theory_ratios),
        "trees": res.trees,
        "surviving": list(res.surviving),
    }
    seeds = [
        {"replica": i, "seed": substream(spec.seed, STREAM_ENSEMBLE, i)}
        for i in range(spec.replicas)
    ]
    survival = {"trees": res.trees, "surviving": list(res.surviving)}
    return ["slice.csv"], summary, survival, seeds, None


def _run_dimension_slope(spec: ExperimentSpec, out: Path):
    config = spec.config()
    ds = dimension_slope(
        config, depths=spec.depths, trees=spec.replicas, workers=spec.workers
    )
    _write_csv(
        out / "dimension.csv",
        ["depth", "mean_count", "log_k_mean", "trees", "candidates"],
        [
            (depth, ds.mean_counts[i], ds.log_means[i], ds.trees, ds.candidates)
            for i, depth in enumerate(ds.depths)
        ],
    )
    summary = {
        "kind": spec.kind,
        "slope": ds.slope,
        "dimension": ds.dimension_value,
        "abs_error": abs(ds.slope - ds.dimension_value),
        "trees": ds.trees,
        "candidates": ds.candidates,
    }
    seeds = [
        {"replica": i, "seed": substream(spec.seed, STREAM_ENSEMBLE, i)}
        for i in range(ds.candidates)
    ]
    survival = {
        "trees": ds.trees,
        "candidates": ds.candidates,
        "survival_rate": ds.trees / ds.candidates if ds.candidates else 0.0,
    }
    return ["dimension.csv"], summary, survival, seeds, None


_RUNNERS = {
    "path-series": _run_path_series,
    "ensemble": _run_ensemble,
    "covariance": _run_covariance,
    "porosity-extremes": _run_porosity_extremes,
    "slice-decay": _run_slice_decay,
    "dimension-slope": _run_dimension_slope,
}


def run(spec: ExperimentSpec, out_dir: Optional[str] = None) -> dict:
    """Execute one experiment and persist tables, summary, and manifest."""
    errors = spec_errors(spec)
    if errors:
        raise ValueError("; ".join(errors))
    out = Path(out_dir if out_dir is not None else spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    outputs, summary, survival, seeds, err = _RUNNERS[spec.kind](spec, out)
    _write_json(out / "summary.json", summary)
    outputs = outputs + ["summary.json"]
    manifest = {
        "schema_version": _SCHEMA_VERSION,
        "tool": "percolab",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "wall_clock_seconds": time.time() - started,
        "spec": asdict(spec),
        "outputs": outputs,
        "survival": survival,
        "replica_seeds": seeds,
        "partial": err is not None,
    }
    if err is not None:
        manifest["rejection_error"] = str(err)
    _write_json(out / "run_manifest.json", manifest)
    return manifest


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="percolab",
        description=(
            "Reproducible Monte Carlo experiments on random recursive "
            "subdivision sets, their natural mass, and multi-scale holes."
        ),
        epilog=(
            "The dense-expansion node budget defaults to 2^24 and can be "
            "raised via the PERCOLAB_MAX_NODES environment variable."
        ),
    )
    parser.add_argument("--spec", help="path to a JSON spec (or a prior run manifest)")
    parser.add_argument("--kind", choices=KINDS, help="experiment kind (overrides spec)")
    parser.add_argument("--out", help="output directory (overrides spec)")
    parser.add_argument("--workers", type=int, help="process count (overrides spec)")
    parser.add_argument("--seed", type=int, help="master seed (overrides spec)")
    args = parser.parse_args(argv)

    data: dict = {}
    if args.spec:
        try:
            with open(args.spec, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read spec {args.spec}: {exc}", file=sys.stderr)
            return 2
        if not isinstance(data, dict):
            print("error: spec file must hold a JSON object", file=sys.stderr)
            return 2
    if "spec" in data and isinstance(data.get("spec"), dict):
        data = data["spec"]
    if args.kind:
        data["kind"] = args.kind
    if args.seed is not None:
        data["seed"] = args.seed
    if args.workers is not None:
        data["workers"] = args.workers

    try:
        spec = spec_from_dict(data)
        errors = spec_errors(spec)
        if errors:
            raise ValueError("; ".join(errors))
    except (TypeError, ValueError) as exc:
        print(f"error: invalid spec: {exc}", file=sys.stderr)
        return 2

    for line in validate(spec):
        print(f"warning: {line}", file=sys.stderr)

    try:
        manifest = run(spec, out_dir=args.out)
    except MemoryBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except RejectionLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4

    out = args.out if args.out is not None else spec.out_dir
    print(f"wrote {', '.join(manifest['outputs'])} to {out}")
    if manifest["partial"]:
        print(
            "warning: survival rejection exhausted; results are partial",
            file=sys.stderr,
        )
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
