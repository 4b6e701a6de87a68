"""Posterior summaries and distributional distances.

Running posterior means, empirical histograms, the exact Wasserstein-1
distance between one-dimensional empirical distributions, and cross-trial
aggregation. All operations are pure functions on immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .samplers import Trajectory


@dataclass(frozen=True)
class MarginalCDF:
    """Sorted sample array of one coordinate, read as a step CDF."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float).ravel()
        if s.size == 0:
            raise ValueError("empty sample set")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        s.sort()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_samples(cls, samples) -> "MarginalCDF":
        return cls(samples)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def evaluate(self, x) -> np.ndarray:
        """Right-continuous step CDF at the points x."""
        x = np.asarray(x, dtype=float)
        return np.searchsorted(self.samples, x, side="right") / self.n


def wasserstein1_marginal(a: MarginalCDF, b: MarginalCDF) -> float:
    """Exact integral of |F_a - F_b| over the merged breakpoint partition."""
    xs = np.concatenate([a.samples, b.samples])
    xs.sort(kind="mergesort")
    fa = np.searchsorted(a.samples, xs[:-1], side="right") / a.n
    fb = np.searchsorted(b.samples, xs[:-1], side="right") / b.n
    return float(np.sum(np.abs(fa - fb) * np.diff(xs)))


def wasserstein1_samples(x, y) -> float:
    """Convenience wrapper on raw sample arrays."""
    return wasserstein1_marginal(MarginalCDF(x), MarginalCDF(y))


def running_posterior_mean(
    traj: Trajectory, coordinate: int, burn_in_fraction: float = 0.0
):
    """Cumulative mean of one coordinate over the post-burn-in records.

    Returns (ks, means): at each recorded iteration k past burn-in, the mean
    of theta(coordinate) over the records in (burn-in, k].
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    start = int(math.floor(len(traj) * burn_in_fraction))
    if start >= len(traj):
        raise ValueError(f"burn-in fraction {burn_in_fraction} consumes all records")
    x = traj.thetas[start:, coordinate]
    means = np.cumsum(x) / np.arange(1, x.shape[0] + 1)
    return traj.ks[start:], means


def running_w1(
    samples: np.ndarray, reference: MarginalCDF, checkpoints
) -> np.ndarray:
    """W1 between the growing sample prefix and a fixed reference.

    ``checkpoints`` are prefix lengths (1-based counts into ``samples``).
    """
    samples = np.asarray(samples, dtype=float)
    out = np.empty(len(checkpoints))
    for i, c in enumerate(checkpoints):
        if not 1 <= c <= samples.shape[0]:
            raise ValueError(f"checkpoint {c} outside 1..{samples.shape[0]}")
        out[i] = wasserstein1_marginal(MarginalCDF(samples[:c]), reference)
    return out


def histogram_density(
    traj: Trajectory,
    coordinates,
    bins: int,
    hist_range,
    burn_in_fraction: float = 0.0,
    allow_clip: bool = False,
):
    """Normalized histogram (bin masses sum to 1) over post-burn-in records.

    ``coordinates`` is an int for a 1-D histogram or a pair for 2-D.
    Samples outside ``hist_range`` raise unless ``allow_clip`` is set, in
    which case they are dropped and the retained mass is renormalized.
    """
    thetas = traj.post_burn_in(burn_in_fraction)
    if thetas.shape[0] == 0:
        raise ValueError("zero post-burn-in samples")
    if isinstance(coordinates, (int, np.integer)):
        x = thetas[:, int(coordinates)]
        lo, hi = hist_range
        inside = (x >= lo) & (x <= hi)
        if not allow_clip and not inside.all():
            raise ValueError(
                f"{int((~inside).sum())} samples outside range [{lo}, {hi}]; "
                "pass allow_clip=True to drop them"
            )
        kept = x[inside]
        if kept.size == 0:
            raise ValueError("no samples inside the histogram range")
        counts, edges = np.histogram(kept, bins=bins, range=(lo, hi))
        return counts / counts.sum(), edges
    ci, cj = coordinates
    x = thetas[:, int(ci)]
    y = thetas[:, int(cj)]
    (xlo, xhi), (ylo, yhi) = hist_range
    inside = (x >= xlo) & (x <= xhi) & (y >= ylo) & (y <= yhi)
    if not allow_clip and not inside.all():
        raise ValueError(
            f"{int((~inside).sum())} samples outside range; pass allow_clip=True to drop them"
        )
    if not inside.any():
        raise ValueError("no samples inside the histogram range")
    counts, xe, ye = np.histogram2d(
        x[inside], y[inside], bins=bins, range=[(xlo, xhi), (ylo, yhi)]
    )
    return counts / counts.sum(), (xe, ye)


@dataclass(frozen=True)
class TrialSummary:
    """Pointwise mean and population std of equal-grid curves across trials."""

    ks: np.ndarray | None
    mean: np.ndarray
    std: np.ndarray
    n_trials: int
    final_w1: dict | None = None


def aggregate_trials(curves, ks=None, final_w1=None) -> TrialSummary:
    """Stack per-trial curves and reduce pointwise (population std).

    Raises on fewer than two trials or ragged curve lengths.
    """
    curves = [np.asarray(c, dtype=float) for c in curves]
    if len(curves) < 2:
        raise ValueError(f"need at least 2 trials, got {len(curves)}")
    lengths = {c.shape for c in curves}
    if len(lengths) != 1:
        raise ValueError(f"ragged trial curves, shapes {sorted(lengths)}")
    block = np.stack(curves)
    return TrialSummary(
        ks=None if ks is None else np.asarray(ks),
        mean=block.mean(axis=0),
        std=block.std(axis=0),
        n_trials=len(curves),
        final_w1=final_w1,
    )
