"""Single-step transitions and trajectory drivers for all samplers.

Algorithms
----------
- ``sgld``: classical constant-step stochastic gradient Langevin update.
- ``accelerated``: drift premultiplied by (I + S) for a fixed skew matrix S;
  same stationary law, faster mixing.
- ``alg1``: adapts S online via a stochastic gradient step on the cost as a
  function of S, propagating the derivative of the iterate with respect to
  each free skew entry (needs Hessian-vector products).
- ``alg2``: adapts S via a two-sided simultaneous-perturbation estimate from
  a pair of coupled chains driven with (I + S +/- mu * Delta).
- ``alg3``: two-time-scale variant; a slow chain moves with (I + S) while an
  inner loop of coupled perturbed chains accumulates the S-gradient estimate.
- ``mh``: random-walk Metropolis-Hastings baseline on the full-data target.

Random draw order (one chain, one iteration)
--------------------------------------------
Synthetic models draw their datum from the chain stream first ("[datum]");
dataset-backed models consume no draws for the datum.

- sgld / accelerated / alg1: [datum], w (dim Gaussians)
- alg2: [datum], Delta (n_pairs sign draws), w (dim Gaussians, shared by both
  coupled chains)
- alg3: [datum], w_slow (dim), Delta (n_pairs), then per inner step
  n = 0..M-1: [datum_n], w_n (dim, shared by the inner pair)
- mh: xi (dim Gaussians), u (1 uniform)

With ``noise_enabled=False`` (deterministic test mode) the Gaussian w draws
are skipped entirely. Every step therefore consumes a deterministic,
documented number of draws and paired-seed comparisons are exact.

The free parameters of S are its lower-triangle entries s(i, j), i > j; the
derivative state D(i, j) and all projection bounds refer to them (storage
holds the negated upper triangle, see ``skew``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .models import CostModel, DataSet
from .skew import (
    SkewMatrix,
    n_pairs,
    pair_indices,
    skew_apply,
    skew_apply_rows,
    skew_init_tridiagonal,
    skew_perturbation_sample,
)

ALGORITHMS = ("sgld", "accelerated", "alg1", "alg2", "alg3", "mh")
SKEW_ALGORITHMS = ("accelerated", "alg1", "alg2", "alg3")


class SamplerDivergedError(RuntimeError):
    """Non-finite state encountered; carries the iteration index and theta."""

    def __init__(self, k: int, theta, detail: str = ""):
        self.k = k
        self.theta = np.asarray(theta)
        msg = f"non-finite sampler state at iteration {k}: theta={self.theta!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


@dataclass
class SamplerConfig:
    """Step sizes and shared sampler settings.

    ``alpha`` is the slow skew step size (0 freezes adaptation), ``mu`` the
    perturbation size of the coupled-chain estimators, ``inner_steps`` the
    inner loop length M of alg3. The adaptation regime expects alpha to be
    small relative to eps; alpha > eps only warns.
    """

    eps: float = 1e-3
    alpha: float = 0.0
    beta: float = 1.0
    mu: float = 0.1
    inner_steps: int = 1
    skew_bounds: tuple = (-10.0, 10.0)
    burn_in_fraction: float = 0.2
    sigma_prop: float = 0.25
    noise_enabled: bool = True
    pool_spsa_chains: bool = False

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.inner_steps < 1:
            raise ValueError(f"inner_steps must be >= 1, got {self.inner_steps}")
        lo, hi = self.skew_bounds
        if lo > hi:
            raise ValueError(f"empty skew_bounds [{lo}, {hi}]")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError(f"burn_in_fraction must be in [0, 1), got {self.burn_in_fraction}")
        if self.sigma_prop < 0:
            raise ValueError(f"sigma_prop must be >= 0, got {self.sigma_prop}")
        if self.alpha > self.eps:
            warnings.warn(
                f"alpha={self.alpha} > eps={self.eps}: the skew adaptation is meant "
                "to run on the slower time scale",
                stacklevel=2,
            )

    def noise_scale(self) -> float:
        return math.sqrt(self.eps) * math.sqrt(2.0 / self.beta)


@dataclass
class SamplerState:
    """Mutable per-chain state; owns its random stream."""

    theta: np.ndarray
    rng: np.random.Generator
    skew: SkewMatrix | None = None
    deriv: np.ndarray | None = None  # (n_pairs, dim); row p = D(j_p, i_p), lower pair
    theta_plus: np.ndarray | None = None
    theta_minus: np.ndarray | None = None
    log_target: float | None = None
    last_spsa_quotient: np.ndarray | None = None
    k: int = 0

    def deriv_entry(self, i: int, j: int) -> np.ndarray:
        """D(i, j) for a lower pair (i > j, 0-based)."""
        if self.deriv is None:
            raise ValueError("state carries no derivative block")
        if not i > j:
            raise ValueError(f"derivative entries are keyed by lower pairs, got ({i}, {j})")
        rows, cols = pair_indices(self.skew.dim)
        p = int(np.flatnonzero((rows == j) & (cols == i))[0])
        return self.deriv[p]


def init_state(
    algorithm: str,
    theta0,
    rng: np.random.Generator,
    skew: SkewMatrix | None = None,
) -> SamplerState:
    theta0 = np.array(theta0, dtype=float)
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}")
    state = SamplerState(theta=theta0, rng=rng)
    if algorithm in SKEW_ALGORITHMS:
        state.skew = skew if skew is not None else SkewMatrix.zeros(theta0.shape[0])
    if algorithm == "alg1":
        state.deriv = np.zeros((n_pairs(theta0.shape[0]), theta0.shape[0]))
    if algorithm == "alg2":
        state.theta_plus = theta0.copy()
        state.theta_minus = theta0.copy()
    return state


def _check_finite(theta: np.ndarray, k: int, detail: str = "") -> None:
    # sum() propagates NaN/Inf; cheaper than isfinite over the array
    if not math.isfinite(float(theta.sum())):
        raise SamplerDivergedError(k, theta, detail)


def _project_lower(skew: SkewMatrix, new_lower: np.ndarray, lo: float, hi: float) -> SkewMatrix:
    return SkewMatrix._wrap(skew.dim, -np.clip(new_lower, lo, hi))


def _pair_direction_rows(dim: int, g: np.ndarray) -> np.ndarray:
    """Row p: derivative of (S g) in the lower entry s(j_p, i_p).

    For the lower pair (i, j), i > j, the matrix derivative is E_ij - E_ji,
    so component i picks up g_j and component j picks up -g_i.
    """
    rows, cols = pair_indices(dim)
    out = np.zeros((rows.shape[0], dim))
    ar = np.arange(rows.shape[0])
    out[ar, cols] = g[rows]
    out[ar, rows] = -g[cols]
    return out


# ---------------------------------------------------------------------------
# Single-step transitions
# ---------------------------------------------------------------------------

def sgld_step(state: SamplerState, model: CostModel, datum, config: SamplerConfig) -> SamplerState:
    """theta <- theta - eps * grad + sqrt(eps) * sqrt(2/beta) * w."""
    g = model.stochastic_gradient(state.theta, datum)
    th = state.theta - config.eps * g
    if config.noise_enabled:
        th = th + config.noise_scale() * state.rng.standard_normal(th.shape[0])
    _check_finite(th, state.k)
    state.theta = th
    state.k += 1
    return state


def accelerated_step(state: SamplerState, model: CostModel, datum, config: SamplerConfig) -> SamplerState:
    """theta <- theta - eps * (I + S) grad + noise, S fixed."""
    g = model.stochastic_gradient(state.theta, datum)
    th = state.theta - config.eps * (g + skew_apply(state.skew, g))
    if config.noise_enabled:
        th = th + config.noise_scale() * state.rng.standard_normal(th.shape[0])
    _check_finite(th, state.k)
    state.theta = th
    state.k += 1
    return state


def alg1_step(state: SamplerState, model: CostModel, datum, config: SamplerConfig) -> SamplerState:
    """Hessian-based adaptive step: theta, then S, then D, one shared gradient.

    All three sub-updates use the gradient sampled once at the current theta
    and the pre-update skew matrix S_k.
    """
    S = state.skew
    theta_k = state.theta
    g = model.stochastic_gradient(theta_k, datum)

    th = theta_k - config.eps * (g + skew_apply(S, g))
    if config.noise_enabled:
        th = th + config.noise_scale() * state.rng.standard_normal(th.shape[0])
    _check_finite(th, state.k)

    # slow descent on the lower-triangle parameters, clamped into bounds;
    # alpha = 0 freezes adaptation exactly (entries stay inside bounds)
    D = state.deriv
    if config.alpha != 0.0:
        lo, hi = config.skew_bounds
        new_skew = _project_lower(S, (-S.upper) - config.alpha * (D @ g), lo, hi)
    else:
        new_skew = S

    # derivative propagation: D <- D - eps (I + S_k) H D - eps dS/ds(i,j) g
    HD = model.hessian_vector(theta_k, datum, D)
    new_D = D - config.eps * (HD + skew_apply_rows(S, HD)) - config.eps * _pair_direction_rows(S.dim, g)

    state.theta = th
    state.skew = new_skew
    state.deriv = new_D
    state.k += 1
    return state


def alg2_step(state: SamplerState, model: CostModel, datum, config: SamplerConfig) -> SamplerState:
    """Coupled-chain perturbation step; the reported chain is theta_plus.

    Both chains share the datum and the injected noise; the skew update uses
    the post-update cost difference divided by 2 * mu * Delta(i, j) per lower
    entry.
    """
    S = state.skew
    delta = skew_perturbation_sample(S.dim, state.rng)
    w = state.rng.standard_normal(S.dim) if config.noise_enabled else None

    gp = model.stochastic_gradient(state.theta_plus, datum)
    gm = model.stochastic_gradient(state.theta_minus, datum)
    drift_p = gp + skew_apply(S, gp) + config.mu * skew_apply(delta, gp)
    drift_m = gm + skew_apply(S, gm) - config.mu * skew_apply(delta, gm)
    tp = state.theta_plus - config.eps * drift_p
    tm = state.theta_minus - config.eps * drift_m
    if w is not None:
        scale = config.noise_scale()
        tp = tp + scale * w
        tm = tm + scale * w
    _check_finite(tp, state.k, "theta_plus")
    _check_finite(tm, state.k, "theta_minus")

    if config.alpha != 0.0:
        cp = model.sample_cost(tp, datum)
        cm = model.sample_cost(tm, datum)
        delta_lower = -delta.upper
        quotient = (cp - cm) / (2.0 * config.mu * delta_lower)
        lo, hi = config.skew_bounds
        new_skew = _project_lower(S, (-S.upper) - config.alpha * quotient, lo, hi)
        state.last_spsa_quotient = quotient
    else:
        new_skew = S

    state.theta_plus = tp
    state.theta_minus = tm
    state.theta = tp
    state.skew = new_skew
    state.k += 1
    return state


def alg3_step(state: SamplerState, model: CostModel, data_window, config: SamplerConfig) -> SamplerState:
    """Two-time-scale step: slow chain plus an M-step inner estimation loop.

    ``data_window`` supplies M + 1 data: the first drives the slow update,
    the rest the inner loop. The inner pair restarts from the pre-update
    theta with one Delta per outer iteration; the accumulated estimate is
    averaged over M before the slow skew update.
    """
    M = config.inner_steps
    if len(data_window) != M + 1:
        raise ValueError(f"data_window must supply {M + 1} data, got {len(data_window)}")
    S = state.skew
    theta_k = state.theta

    g = model.stochastic_gradient(theta_k, data_window[0])
    th = theta_k - config.eps * (g + skew_apply(S, g))
    if config.noise_enabled:
        th = th + config.noise_scale() * state.rng.standard_normal(th.shape[0])
    _check_finite(th, state.k)

    delta = skew_perturbation_sample(S.dim, state.rng)
    delta_lower = -delta.upper
    tp = theta_k.copy()
    tm = theta_k.copy()
    acc = np.zeros(delta_lower.shape[0])
    scale = config.noise_scale()
    for n in range(M):
        datum_n = data_window[1 + n]
        w = state.rng.standard_normal(S.dim) if config.noise_enabled else None
        gp = model.stochastic_gradient(tp, datum_n)
        gm = model.stochastic_gradient(tm, datum_n)
        tp = tp - config.eps * (gp + skew_apply(S, gp) + config.mu * skew_apply(delta, gp))
        tm = tm - config.eps * (gm + skew_apply(S, gm) - config.mu * skew_apply(delta, gm))
        if w is not None:
            tp = tp + scale * w
            tm = tm + scale * w
        _check_finite(tp, state.k, f"inner chain, n={n}")
        _check_finite(tm, state.k, f"inner chain, n={n}")
        acc += (model.sample_cost(tp, datum_n) - model.sample_cost(tm, datum_n)) / (
            2.0 * config.mu * delta_lower
        )

    quotient = acc / M
    if config.alpha != 0.0:
        lo, hi = config.skew_bounds
        new_skew = _project_lower(S, (-S.upper) - config.alpha * quotient, lo, hi)
    else:
        new_skew = S

    state.theta = th
    state.skew = new_skew
    state.last_spsa_quotient = quotient
    state.k += 1
    return state


def mh_step(state: SamplerState, model: CostModel, config: SamplerConfig) -> SamplerState:
    """Symmetric Gaussian random-walk proposal on exp(beta * full_log_target)."""
    if state.log_target is None:
        state.log_target = model.full_log_target(state.theta)
    xi = state.rng.standard_normal(state.theta.shape[0])
    proposal = state.theta + config.sigma_prop * xi
    log_target_prop = model.full_log_target(proposal)
    log_ratio = config.beta * (log_target_prop - state.log_target)
    u = state.rng.random()
    accept = True if u == 0.0 else math.log(u) < log_ratio
    if accept:
        state.theta = proposal
        state.log_target = log_target_prop
    state.k += 1
    return state


# ---------------------------------------------------------------------------
# Trajectory driver
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Per-iteration record stream of one chain.

    ``ks`` holds 1-based iteration indices of the records (every ``thin``
    iterations); ``skew_ks``/``skews`` hold the upper-triangle snapshots on
    the ``snapshot_every`` grid for skew-carrying algorithms.
    """

    algorithm: str
    seed: int
    ks: np.ndarray
    thetas: np.ndarray
    costs: np.ndarray | None = None
    theta_minus: np.ndarray | None = None
    skew_ks: np.ndarray | None = None
    skews: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.thetas.shape[1]

    def __len__(self) -> int:
        return self.thetas.shape[0]

    def post_burn_in(self, burn_in_fraction: float) -> np.ndarray:
        """Theta records past the burn-in fraction of the recording grid."""
        start = int(math.floor(len(self) * burn_in_fraction))
        if start >= len(self):
            raise ValueError(
                f"burn-in fraction {burn_in_fraction} consumes all {len(self)} records"
            )
        return self.thetas[start:]


def _fetch_datum(model, dataset, cursor: int, rng: np.random.Generator):
    if dataset is not None:
        return dataset.observation(cursor)
    sampler = getattr(model, "sample_datum", None)
    if sampler is None:
        raise ValueError(
            f"model {type(model).__name__} has no dataset and no sample_datum(); "
            "cannot produce gradient samples"
        )
    return sampler(rng)


def make_initial_skew(
    algorithm: str,
    dim: int,
    skew_init,
    rng: np.random.Generator,
    config: SamplerConfig,
) -> SkewMatrix | None:
    """Resolve the initial skew matrix; random inits draw from rng.

    ``skew_init`` is "zero" (no draws), "tridiagonal" (dim - 1 Gaussian
    draws), or an explicit SkewMatrix. The result is projected into the
    configured bounds (lower-parameter convention).
    """
    if algorithm not in SKEW_ALGORITHMS:
        return None
    if isinstance(skew_init, SkewMatrix):
        skew = skew_init
        if skew.dim != dim:
            raise ValueError(f"initial skew dim {skew.dim} does not match model dim {dim}")
    elif skew_init == "zero":
        skew = SkewMatrix.zeros(dim)
    elif skew_init == "tridiagonal":
        skew = skew_init_tridiagonal(dim, rng)
    else:
        raise ValueError(f"unknown skew_init {skew_init!r}")
    lo, hi = config.skew_bounds
    return _project_lower(skew, -skew.upper, lo, hi)


def run_sampler(
    algorithm: str,
    model: CostModel,
    dataset: DataSet | None,
    config: SamplerConfig,
    iterations: int,
    seed: int,
    *,
    theta0=None,
    skew_init="zero",
    thin: int = 1,
    snapshot_every: int | None = None,
    record_cost: bool = False,
) -> Trajectory:
    """Drive the chosen step over the cyclic dataset.

    Deterministic given (seed, config, dataset): two runs with identical
    arguments produce bitwise-identical trajectories. alg3 consumes
    inner_steps + 1 data per iteration; all others consume one (mh none).
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1 (empty trajectory), got {iterations}")
    if thin < 1:
        raise ValueError(f"thin must be >= 1, got {thin}")
    if snapshot_every is not None and snapshot_every < 1:
        raise ValueError(f"snapshot_every must be >= 1, got {snapshot_every}")

    rng = np.random.default_rng(seed)
    theta0 = np.zeros(model.dim) if theta0 is None else np.array(theta0, dtype=float)
    if theta0.shape != (model.dim,):
        raise ValueError(f"theta0 of shape {theta0.shape} does not match model dim {model.dim}")
    skew0 = make_initial_skew(algorithm, model.dim, skew_init, rng, config)
    state = init_state(algorithm, theta0, rng, skew=skew0)

    n_records = iterations // thin
    ks = np.empty(n_records, dtype=np.int64)
    thetas = np.empty((n_records, model.dim))
    costs = np.empty(n_records) if record_cost else None
    minus = np.empty((n_records, model.dim)) if (algorithm == "alg2" and config.pool_spsa_chains) else None
    snap_ks: list[int] = []
    snaps: list[np.ndarray] = []

    cursor = 0
    rec = 0
    try:
        for k in range(iterations):
            if algorithm == "mh":
                datum = None
                mh_step(state, model, config)
            elif algorithm == "alg3":
                window = [
                    _fetch_datum(model, dataset, cursor + i, rng)
                    for i in range(config.inner_steps + 1)
                ]
                cursor += config.inner_steps + 1
                datum = window[0]
                alg3_step(state, model, window, config)
            else:
                datum = _fetch_datum(model, dataset, cursor, rng)
                cursor += 1
                if algorithm == "sgld":
                    sgld_step(state, model, datum, config)
                elif algorithm == "accelerated":
                    accelerated_step(state, model, datum, config)
                elif algorithm == "alg1":
                    alg1_step(state, model, datum, config)
                else:
                    alg2_step(state, model, datum, config)
            k1 = k + 1
            if k1 % thin == 0:
                ks[rec] = k1
                thetas[rec] = state.theta
                if costs is not None:
                    costs[rec] = (
                        -model.full_log_target(state.theta)
                        if datum is None
                        else model.sample_cost(state.theta, datum)
                    )
                if minus is not None:
                    minus[rec] = state.theta_minus
                rec += 1
            if snapshot_every is not None and state.skew is not None and k1 % snapshot_every == 0:
                snap_ks.append(k1)
                snaps.append(np.asarray(state.skew.upper).copy())
    except SamplerDivergedError as err:
        raise SamplerDivergedError(
            err.k, err.theta, f"algorithm={algorithm}, seed={seed}"
        ) from None

    return Trajectory(
        algorithm=algorithm,
        seed=seed,
        ks=ks,
        thetas=thetas,
        costs=costs,
        theta_minus=minus,
        skew_ks=np.asarray(snap_ks, dtype=np.int64) if snap_ks else None,
        skews=np.asarray(snaps) if snaps else None,
        meta={"iterations": iterations, "thin": thin, "theta0": theta0.tolist()},
    )
