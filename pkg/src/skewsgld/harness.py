"""Experiment runner: multi-trial execution, CSV emission, comparison.

Layout produced by ``run_experiment`` (one subdirectory per algorithm, each
self-describing):

    <out>/<algorithm label>/
        resolved_config.json      full config the run used
        manifest.json             files, seeds, dataset hash, wall clock
        dataset.csv               generated dataset (dataset models only)
        trial_000.csv             k,theta_1..theta_N[,cost][,s_i_j...]
        trial_000_skew.csv        skew snapshots keyed by k (skew algorithms)
        posterior_mean_theta1.csv k,mean,std aggregated across trials

Trials are parallelized over processes with a bounded worker count; output
ordering is deterministic regardless of completion order, and identical
config + base seed reproduce byte-identical CSVs (manifest timestamps
excepted).
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import (
    ExperimentConfig,
    TrackingConfig,
    build_model_and_dataset,
    ConfigError,
)
from .metrics import MarginalCDF, aggregate_trials, running_posterior_mean, wasserstein1_marginal
from .samplers import Trajectory, run_sampler
from .skew import pair_indices
from .tracking import MarkovRegime, quadratic_switching_bank, run_tracking

OUTPUT_ROOT_ENV = "SKEWSGLD_OUT_ROOT"


def resolve_output_dir(path_str: str) -> Path:
    """Relative output dirs land under $SKEWSGLD_OUT_ROOT when it is set."""
    p = Path(path_str)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _skew_labels(dim: int):
    rows, cols = pair_indices(dim)
    return [f"s_{i + 1}_{j + 1}" for i, j in zip(rows, cols)]


def write_trajectory_csv(traj: Trajectory, path, include_skew_inline: bool = False) -> None:
    dim = traj.dim
    header = ["k"] + [f"theta_{i + 1}" for i in range(dim)]
    if traj.costs is not None:
        header.append("cost")
    inline = include_skew_inline and traj.skews is not None and traj.skews.shape[0] == len(traj)
    if inline:
        header += _skew_labels(dim)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for r in range(len(traj)):
            row = [int(traj.ks[r])] + [repr(float(v)) for v in traj.thetas[r]]
            if traj.costs is not None:
                row.append(repr(float(traj.costs[r])))
            if inline:
                row += [repr(float(v)) for v in traj.skews[r]]
            w.writerow(row)


def write_skew_snapshots_csv(traj: Trajectory, path) -> None:
    if traj.skews is None:
        return
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["k"] + _skew_labels(traj.dim))
        for r in range(traj.skews.shape[0]):
            w.writerow([int(traj.skew_ks[r])] + [repr(float(v)) for v in traj.skews[r]])


def read_trajectory_csv(path):
    """Return (ks, thetas) from a trial CSV (cost/skew columns ignored)."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        theta_cols = [i for i, h in enumerate(header) if h.startswith("theta_")]
        ks, rows = [], []
        for row in reader:
            if not row:
                continue
            ks.append(int(row[0]))
            rows.append([float(row[i]) for i in theta_cols])
    return np.asarray(ks, dtype=np.int64), np.asarray(rows)


def _write_curve_csv(path, ks, mean, std) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["k", "mean", "std"])
        for k, m, s in zip(ks, mean, std):
            w.writerow([int(k), repr(float(m)), repr(float(s))])


@dataclass
class TrialResult:
    algorithm: str
    trial: int
    seed: int
    files: list
    wall_clock_s: float
    curves: np.ndarray  # (dim, n_records) running posterior means
    ks: np.ndarray


def _run_one_trial(payload) -> TrialResult:
    """Worker: run one (algorithm, trial) chain and write its CSVs."""
    cfg: ExperimentConfig = payload["cfg"]
    spec = payload["spec"]
    trial = payload["trial"]
    out_dir = Path(payload["out_dir"])
    model, dataset = build_model_and_dataset(cfg)
    seed = cfg.trial_seed(trial)
    t0 = time.perf_counter()
    traj = run_sampler(
        spec.name,
        model,
        dataset,
        spec.sampler,
        cfg.iterations,
        seed,
        theta0=cfg.theta0,
        skew_init=spec.skew_init,
        thin=cfg.thin,
        snapshot_every=cfg.snapshot_every,
        record_cost=cfg.record_cost,
    )
    wall = time.perf_counter() - t0
    files = []
    traj_path = out_dir / f"trial_{trial:03d}.csv"
    write_trajectory_csv(traj, traj_path, include_skew_inline=cfg.snapshot_every == cfg.thin)
    files.append(traj_path.name)
    if traj.skews is not None:
        snap_path = out_dir / f"trial_{trial:03d}_skew.csv"
        write_skew_snapshots_csv(traj, snap_path)
        files.append(snap_path.name)
    curves = np.stack(
        [running_posterior_mean(traj, c, 0.0)[1] for c in range(traj.dim)]
    )
    return TrialResult(
        algorithm=spec.display,
        trial=trial,
        seed=seed,
        files=files,
        wall_clock_s=wall,
        curves=curves,
        ks=traj.ks,
    )


def run_experiment(cfg: ExperimentConfig, out_override=None, progress=None) -> Path:
    """Execute every (algorithm, trial) pair and emit CSVs plus manifests."""
    out_root = resolve_output_dir(out_override or cfg.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    model, dataset = build_model_and_dataset(cfg)
    if cfg.theta0 is not None and len(cfg.theta0) != model.dim:
        raise ConfigError(
            f"theta0 has length {len(cfg.theta0)} but the model dimension is {model.dim}"
        )
    dataset_sha = dataset.sha256() if dataset is not None else None

    max_workers = cfg.max_parallel or os.cpu_count() or 1
    for spec in cfg.algorithms:
        (out_root / spec.display).mkdir(parents=True, exist_ok=True)

    tasks = []
    for spec in cfg.algorithms:
        for trial in range(cfg.trials):
            tasks.append(
                {
                    "cfg": cfg,
                    "spec": spec,
                    "trial": trial,
                    "out_dir": str(out_root / spec.display),
                }
            )

    t0 = time.perf_counter()
    if max_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(_run_one_trial, tasks))
    else:
        results = [_run_one_trial(t) for t in tasks]
    total_wall = time.perf_counter() - t0
    if progress:
        progress(f"ran {len(tasks)} chains in {total_wall:.1f}s")

    by_algorithm: dict = {}
    for r in results:
        by_algorithm.setdefault(r.algorithm, []).append(r)

    for spec in cfg.algorithms:
        adir = out_root / spec.display
        rs = sorted(by_algorithm[spec.display], key=lambda r: r.trial)
        files = [f for r in rs for f in r.files]
        # aggregated running posterior-mean curves, one CSV per coordinate
        dim = rs[0].curves.shape[0]
        for c in range(dim):
            if len(rs) >= 2:
                summary = aggregate_trials([r.curves[c] for r in rs], ks=rs[0].ks)
                mean, std = summary.mean, summary.std
            else:
                mean, std = rs[0].curves[c], np.zeros_like(rs[0].curves[c])
            curve_path = adir / f"posterior_mean_theta{c + 1}.csv"
            _write_curve_csv(curve_path, rs[0].ks, mean, std)
            files.append(curve_path.name)
        if dataset is not None:
            dataset.save_csv(adir / "dataset.csv")
            files.append("dataset.csv")
        resolved = cfg.resolved()
        with open(adir / "resolved_config.json", "w") as f:
            json.dump(resolved, f, indent=2, sort_keys=True)
        manifest = {
            "algorithm": spec.name,
            "label": spec.display,
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "dataset_sha256": dataset_sha,
            "model": cfg.model_spec,
            "iterations": cfg.iterations,
            "thin": cfg.thin,
            "trials": cfg.trials,
            "seeds": {str(r.trial): r.seed for r in rs},
            "wall_clock_s": {str(r.trial): round(r.wall_clock_s, 3) for r in rs},
            "files": sorted(set(files)) + ["manifest.json", "resolved_config.json"],
        }
        with open(adir / "manifest.json", "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
    return out_root


# ---------------------------------------------------------------------------
# Comparison across algorithm run directories
# ---------------------------------------------------------------------------

def _load_manifest(run_dir: Path) -> dict:
    mpath = run_dir / "manifest.json"
    if not mpath.exists():
        raise ConfigError(f"{run_dir}: not a run directory (missing manifest.json)")
    with open(mpath) as f:
        return json.load(f)


def compare_runs(run_dirs, out_path, burn_in_fraction: float = 0.2) -> dict:
    """Merge per-algorithm aggregated curves into one long-format CSV.

    All runs must share the model, dataset, and recording grid. When one of
    the directories holds a Metropolis-Hastings run ("mh"), the final
    Wasserstein-1 distance of every other algorithm's post-burn-in marginals
    against the mh reference (trial-mean) is appended as rows of a second
    CSV next to ``out_path``.
    """
    run_dirs = [Path(d) for d in run_dirs]
    if len(run_dirs) < 2:
        raise ConfigError("compare needs at least two run directories")
    manifests = [_load_manifest(d) for d in run_dirs]
    ref = manifests[0]
    for d, m in zip(run_dirs[1:], manifests[1:]):
        for key in ("dataset_sha256", "model", "iterations", "thin"):
            if m.get(key) != ref.get(key):
                raise ConfigError(
                    f"{d}: {key} differs from {run_dirs[0]} "
                    f"({m.get(key)!r} vs {ref.get(key)!r}); runs are not comparable"
                )

    labels = []
    for d, m in zip(run_dirs, manifests):
        label = m["label"]
        if label in labels:
            label = f"{label}#{len(labels)}"
        labels.append(label)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rows_written = 0
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["algorithm", "coordinate", "k", "mean", "std"])
        for d, label in zip(run_dirs, labels):
            curve_files = sorted(d.glob("posterior_mean_theta*.csv"))
            if not curve_files:
                raise ConfigError(f"{d}: no aggregated posterior-mean curves found")
            for cf in curve_files:
                coord = int(cf.stem.replace("posterior_mean_theta", ""))
                with open(cf, newline="") as g:
                    reader = csv.reader(g)
                    next(reader)
                    for row in reader:
                        w.writerow([label, coord, row[0], row[1], row[2]])
                        rows_written += 1

    result = {"curves_csv": str(out_path), "rows": rows_written, "w1_csv": None}

    mh_idx = [i for i, m in enumerate(manifests) if m["algorithm"] == "mh"]
    if mh_idx:
        ref_dir = run_dirs[mh_idx[0]]
        ref_samples = _pooled_post_burn_in(ref_dir, burn_in_fraction)
        w1_path = out_path.with_name(out_path.stem + "_w1.csv")
        with open(w1_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["marginal", "algorithm", "w1"])
            for d, label in zip(run_dirs, labels):
                pooled = _pooled_post_burn_in(d, burn_in_fraction)
                for coord in range(ref_samples.shape[1]):
                    w1 = wasserstein1_marginal(
                        MarginalCDF(pooled[:, coord]), MarginalCDF(ref_samples[:, coord])
                    )
                    w.writerow([coord + 1, label, repr(float(w1))])
        result["w1_csv"] = str(w1_path)
    return result


def _per_trial_post_burn_in(run_dir: Path, burn_in_fraction: float):
    out = []
    for tf in sorted(run_dir.glob("trial_*.csv")):
        if tf.stem.endswith("_skew"):
            continue
        _, thetas = read_trajectory_csv(tf)
        start = int(np.floor(thetas.shape[0] * burn_in_fraction))
        out.append(thetas[start:])
    if not out:
        raise ConfigError(f"{run_dir}: no trial CSVs found")
    return out


def _pooled_post_burn_in(run_dir: Path, burn_in_fraction: float) -> np.ndarray:
    return np.concatenate(_per_trial_post_burn_in(run_dir, burn_in_fraction), axis=0)


# ---------------------------------------------------------------------------
# Tracking experiments
# ---------------------------------------------------------------------------

def run_tracking_experiment(cfg: TrackingConfig, out_override=None) -> Path:
    out_dir = resolve_output_dir(out_override or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bank = quadratic_switching_bank(
        dim=int(cfg.bank_spec.get("dim", 2)),
        offset=float(cfg.bank_spec.get("offset", 3.0)),
        sigma_g=float(cfg.bank_spec.get("sigma_g", 0.0)),
    )
    files = []
    n_switches = {}
    for trial in range(cfg.trials):
        regime = MarkovRegime(
            Q=cfg.regime_spec["Q"],
            alpha_chain=float(cfg.regime_spec["alpha_chain"]),
            state=int(cfg.regime_spec.get("initial_state", 0)),
        )
        seed = cfg.trial_seed(trial)
        trace = run_tracking(
            cfg.algorithm.name,
            bank,
            regime,
            cfg.algorithm.sampler,
            cfg.iterations,
            seed,
            theta0=cfg.theta0,
            skew_init=cfg.algorithm.skew_init,
        )
        trace_path = out_dir / f"trace_{trial:03d}.csv"
        events_path = out_dir / f"switches_{trial:03d}.csv"
        trace.to_csv(trace_path)
        trace.events_to_csv(events_path)
        files += [trace_path.name, events_path.name]
        n_switches[str(trial)] = len(trace.switch_events())
    with open(out_dir / "resolved_config.json", "w") as f:
        json.dump(cfg.resolved(), f, indent=2, sort_keys=True)
    manifest = {
        "kind": "tracking",
        "algorithm": cfg.algorithm.name,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "iterations": cfg.iterations,
        "trials": cfg.trials,
        "seeds": {str(t): cfg.trial_seed(t) for t in range(cfg.trials)},
        "n_switches": n_switches,
        "files": sorted(files) + ["manifest.json", "resolved_config.json"],
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return out_dir
