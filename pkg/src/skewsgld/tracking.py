"""Regime-switching tracking harness.

A slow finite-state Markov chain selects the active cost among a bank of
alternatives; a constant-step sampler receives gradient samples only from
the currently active model and must track the moving minimizer. The chain
is a hyper-parameter: the sampler side never sees the regime state, only a
cost-model facade that delegates to whichever bank member is active.

The regime chain owns a random stream separate from the sampler chain, so a
run with a frozen regime (alpha_chain = 0) is bitwise identical to a
fixed-cost ``run_sampler`` run under the same seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .models import CostModel, QuadraticModel
from .samplers import (
    SamplerConfig,
    accelerated_step,
    alg1_step,
    alg2_step,
    init_state,
    make_initial_skew,
    sgld_step,
)

TRACKING_ALGORITHMS = ("sgld", "accelerated", "alg1", "alg2")

_REGIME_STREAM_TAG = 0x52454749  # distinct child stream for the regime chain


@dataclass(frozen=True)
class MarkovRegime:
    """Finite-state chain with generator Q and one-step transition I + alpha Q."""

    Q: np.ndarray
    alpha_chain: float
    state: int = 0

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 1:
            raise ValueError(f"Q must be a square matrix, got shape {Q.shape}")
        X = Q.shape[0]
        off = Q.copy()
        np.fill_diagonal(off, 0.0)
        if np.any(off < 0):
            i, j = np.argwhere(off < 0)[0]
            raise ValueError(f"off-diagonal generator entry Q[{i},{j}]={Q[i, j]} is negative")
        row_sums = Q.sum(axis=1)
        bad = np.flatnonzero(np.abs(row_sums) > 1e-9)
        if bad.size:
            raise ValueError(f"generator row {bad[0]} sums to {row_sums[bad[0]]}, expected 0")
        if self.alpha_chain < 0:
            raise ValueError(f"alpha_chain must be >= 0, got {self.alpha_chain}")
        P = np.eye(X) + self.alpha_chain * Q
        if np.any(P < -1e-12):
            i, j = np.argwhere(P < -1e-12)[0]
            raise ValueError(
                f"I + alpha Q has negative entry at ({i},{j}); alpha_chain too large"
            )
        if not self._irreducible(off):
            raise ValueError("generator Q is not irreducible (single communicating class)")
        if not 0 <= self.state < X:
            raise ValueError(f"state {self.state} outside 0..{X - 1}")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    @staticmethod
    def _irreducible(off: np.ndarray) -> bool:
        X = off.shape[0]
        if X == 1:
            return True
        reach = (off > 0).astype(bool) | np.eye(X, dtype=bool)
        # transitive closure by repeated squaring
        for _ in range(int(math.ceil(math.log2(X))) + 1):
            reach = reach | (reach @ reach)
        return bool(reach.all())

    @property
    def n_states(self) -> int:
        return self.Q.shape[0]

    def transition_matrix(self) -> np.ndarray:
        P = np.eye(self.n_states) + self.alpha_chain * self.Q
        return np.clip(P, 0.0, None)

    def _row_cumsum(self) -> np.ndarray:
        return np.cumsum(self.transition_matrix(), axis=1)


def regime_step(regime: MarkovRegime, rng: np.random.Generator) -> MarkovRegime:
    """Draw the next state from row x_k of I + alpha Q (one uniform draw)."""
    cum = regime._row_cumsum()[regime.state]
    u = rng.random()
    nxt = int(np.searchsorted(cum, u, side="right"))
    nxt = min(nxt, regime.n_states - 1)
    if nxt == regime.state:
        return regime
    return replace(regime, state=nxt)


@dataclass(frozen=True)
class SwitchingCost:
    """Per-state cost bank; minimizers are recorded for evaluation only."""

    models: tuple
    minimizers: tuple

    def __post_init__(self):
        if len(self.models) < 1:
            raise ValueError("need at least one model in the bank")
        dims = {m.dim for m in self.models}
        if len(dims) != 1:
            raise ValueError(f"all bank models must share a dimension, got {sorted(dims)}")
        if len(self.minimizers) != len(self.models):
            raise ValueError("one minimizer per model required")
        mins = tuple(np.asarray(m, dtype=float) for m in self.minimizers)
        for m in mins:
            if m.shape != (self.dim,):
                raise ValueError("minimizer shape does not match model dimension")
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "minimizers", mins)

    @property
    def dim(self) -> int:
        return self.models[0].dim


def quadratic_switching_bank(dim: int = 2, offset: float = 3.0, sigma_g: float = 0.0) -> SwitchingCost:
    """Default bank: two identity quadratics with minimizers +/-[offset, 0, ...]."""
    m = np.zeros(dim)
    m[0] = offset
    a = np.eye(dim)
    return SwitchingCost(
        models=(
            QuadraticModel(a, sigma_g=sigma_g, center=m),
            QuadraticModel(a, sigma_g=sigma_g, center=-m),
        ),
        minimizers=(m, -m),
    )


class _ActiveCost(CostModel):
    """Facade handed to the sampler; exposes only the active model's oracle."""

    def __init__(self, bank: SwitchingCost):
        self._models = bank.models
        self._active = 0

    @property
    def dim(self) -> int:
        return self._models[0].dim

    def stochastic_gradient(self, theta, datum):
        return self._models[self._active].stochastic_gradient(theta, datum)

    def sample_cost(self, theta, datum):
        return self._models[self._active].sample_cost(theta, datum)

    def hessian_vector(self, theta, datum, v):
        return self._models[self._active].hessian_vector(theta, datum, v)

    def full_log_target(self, theta):
        return self._models[self._active].full_log_target(theta)

    def sample_datum(self, rng):
        return self._models[self._active].sample_datum(rng)


@dataclass
class TrackingTrace:
    """Per-iteration tracking record plus switch events."""

    algorithm: str
    seed: int
    ks: np.ndarray
    states: np.ndarray
    thetas: np.ndarray
    errors: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.ks.shape[0]

    def switch_events(self, trailing_window: int = 1000, recovery_factor: float = 1.5):
        """Switch times with time-to-recover diagnostics.

        Recovery length is the first lag after the switch at which the error
        re-enters ``recovery_factor`` times its pre-switch trailing mean
        (window capped at the segment since the previous switch); -1 when the
        error never recovers within the trace.
        """
        events = []
        xs = self.states
        errs = self.errors
        prev_switch = 0
        for t in range(1, len(self)):
            if xs[t] == xs[t - 1]:
                continue
            w = min(trailing_window, t - prev_switch)
            baseline = float(errs[max(0, t - w):t].mean()) if w > 0 else float(errs[t - 1])
            threshold = recovery_factor * baseline
            rec = -1
            after = errs[t:]
            hits = np.flatnonzero(after <= threshold)
            if hits.size:
                rec = int(hits[0])
            events.append(
                {
                    "k_switch": int(self.ks[t]),
                    "from": int(xs[t - 1]),
                    "to": int(xs[t]),
                    "recovery_len": rec,
                }
            )
            prev_switch = t
        return events

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["k", "x"] + [f"theta_{i + 1}" for i in range(self.thetas.shape[1])] + ["err"])
            for t in range(len(self)):
                w.writerow(
                    [int(self.ks[t]), int(self.states[t])]
                    + [repr(float(v)) for v in self.thetas[t]]
                    + [repr(float(self.errors[t]))]
                )

    def events_to_csv(self, path, **kwargs) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["k_switch", "from", "to", "recovery_len"])
            for ev in self.switch_events(**kwargs):
                w.writerow([ev["k_switch"], ev["from"], ev["to"], ev["recovery_len"]])


def run_tracking(
    algorithm: str,
    switching: SwitchingCost,
    regime: MarkovRegime,
    config: SamplerConfig,
    iterations: int,
    seed: int,
    *,
    theta0=None,
    skew_init="zero",
) -> TrackingTrace:
    """Track the switching cost: advance the regime, step the sampler, record.

    At each k the regime advances first, the sampler then receives one
    gradient sample from the active model (through the facade, never the
    regime state), and (k, x_k, theta_k, ||theta_k - theta_{x_k}||) is
    recorded.
    """
    if algorithm not in TRACKING_ALGORITHMS:
        raise ValueError(
            f"tracking supports algorithms {TRACKING_ALGORITHMS}, got {algorithm!r}"
        )
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if len(switching.models) != regime.n_states:
        raise ValueError(
            f"bank holds {len(switching.models)} models but the regime has "
            f"{regime.n_states} states"
        )

    rng = np.random.default_rng(seed)
    regime_rng = np.random.default_rng([seed, _REGIME_STREAM_TAG])
    facade = _ActiveCost(switching)
    theta0 = np.zeros(switching.dim) if theta0 is None else np.array(theta0, dtype=float)
    skew0 = make_initial_skew(algorithm, switching.dim, skew_init, rng, config)
    state = init_state(algorithm, theta0, rng, skew=skew0)

    step = {
        "sgld": sgld_step,
        "accelerated": accelerated_step,
        "alg1": alg1_step,
        "alg2": alg2_step,
    }[algorithm]

    ks = np.arange(1, iterations + 1, dtype=np.int64)
    xs = np.empty(iterations, dtype=np.int64)
    thetas = np.empty((iterations, switching.dim))
    errs = np.empty(iterations)
    for t in range(iterations):
        regime = regime_step(regime, regime_rng)
        facade._active = regime.state
        datum = facade.sample_datum(rng)
        step(state, facade, datum, config)
        xs[t] = regime.state
        thetas[t] = state.theta
        errs[t] = float(np.linalg.norm(state.theta - switching.minimizers[regime.state]))
    return TrackingTrace(
        algorithm=algorithm,
        seed=seed,
        ks=ks,
        states=xs,
        thetas=thetas,
        errors=errs,
        meta={"iterations": iterations, "alpha_chain": regime.alpha_chain},
    )
