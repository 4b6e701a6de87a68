"""Cost-model oracles: the interface every sampler consumes, plus concrete
benchmark models.

Conventions
-----------
- ``stochastic_gradient(theta, datum)`` returns a sample-path gradient of the
  scaled cost whose Gibbs measure exp(-beta * C) the samplers target. For the
  Bayesian-learning models this is

      -grad log p(theta) - T * grad log p(y | theta)

  evaluated at a single observation y, with T the dataset size.
- ``sample_cost(theta, datum)`` is the matching per-datum scalar cost. For
  the Bayesian models it is -log p(theta) / T - log p(y | theta), so the
  gradient above equals T times its theta-gradient and the per-datum costs
  sum to the negative full-data log target over one sweep.
- ``full_log_target(theta)`` is log p(theta) + sum_k log p(y_k | theta) for
  dataset models and -C(theta) for the synthetic models; the random-walk
  Metropolis baseline targets exp(beta * full_log_target).
- Synthetic models (quadratic, double well) use their gradient-noise draw as
  the datum, so the gradient is exactly the theta-derivative of the sample
  cost at every (theta, datum) pair. They provide ``sample_datum(rng)`` and
  can run without a dataset.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass

import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)


class CostModel:
    """Oracle interface consumed by every sampler."""

    dim: int

    def stochastic_gradient(self, theta, datum) -> np.ndarray:
        raise NotImplementedError

    def sample_cost(self, theta, datum) -> float:
        raise NotImplementedError

    def hessian_vector(self, theta, datum, v) -> np.ndarray:
        """Hessian-vector product; finite-difference fallback by default.

        ``v`` may be a single vector (dim,) or a row block (m, dim).
        """
        return hessian_vector_default(self, theta, datum, v)

    def full_log_target(self, theta) -> float:
        raise NotImplementedError


def hessian_vector_default(model: CostModel, theta, datum, v) -> np.ndarray:
    """Central finite difference of the stochastic gradient along v.

    Step h = 1e-5 * max(1, ||theta||) / max(1, ||v||) per row. Rows with
    v = 0 return exactly 0.
    """
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    rows = v[None, :] if single else v
    out = np.zeros_like(rows)
    theta_scale = max(1.0, float(np.linalg.norm(theta)))
    for r, row in enumerate(rows):
        nv = float(np.linalg.norm(row))
        if nv == 0.0:
            continue
        h = 1e-5 * theta_scale / max(1.0, nv)
        gp = model.stochastic_gradient(theta + h * row, datum)
        gm = model.stochastic_gradient(theta - h * row, datum)
        out[r] = (gp - gm) / (2.0 * h)
    return out[0] if single else out


@dataclass(frozen=True)
class DataSet:
    """Fixed observation set with cyclic indexing over sweeps.

    ``true_theta`` records the generating parameter for evaluation only;
    samplers never read it.
    """

    observations: np.ndarray
    true_theta: np.ndarray | None = None

    def __post_init__(self):
        obs = np.array(self.observations, dtype=float)
        if obs.ndim not in (1, 2) or obs.shape[0] < 1:
            raise ValueError(f"observations must be (T,) or (T, d) with T >= 1, got {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise ValueError("observations must be finite")
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        if self.true_theta is not None:
            tt = np.array(self.true_theta, dtype=float)
            tt.setflags(write=False)
            object.__setattr__(self, "true_theta", tt)

    def __len__(self) -> int:
        return self.observations.shape[0]

    def observation(self, k: int):
        """Observation for iteration k (cyclic, total for any k >= 0)."""
        return self.observations[k % self.observations.shape[0]]

    def sha256(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.observations).tobytes()).hexdigest()

    def save_csv(self, path) -> None:
        obs = self.observations
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            if obs.ndim == 1:
                w.writerow(["y"])
                for y in obs:
                    w.writerow([repr(float(y))])
            else:
                w.writerow([f"y_{c + 1}" for c in range(obs.shape[1])])
                for row in obs:
                    w.writerow([repr(float(y)) for y in row])

    @classmethod
    def load_csv(cls, path, true_theta=None) -> "DataSet":
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            rows = [[float(x) for x in row] for row in reader if row]
        if not rows:
            raise ValueError(f"dataset file {path} holds no observations")
        arr = np.asarray(rows)
        if header == ["y"] or arr.shape[1] == 1:
            arr = arr[:, 0]
        return cls(arr, true_theta=true_theta)


# ---------------------------------------------------------------------------
# Two-parameter Gaussian-mixture posterior (dim 2)
# ---------------------------------------------------------------------------

def generate_dataset_mixture2(theta_true, T: int, rng: np.random.Generator) -> DataSet:
    """T i.i.d. draws from 1/2 N(th1, var 2) + 1/2 N(th1 + th2, var 2)."""
    theta_true = np.asarray(theta_true, dtype=float)
    if theta_true.shape != (2,):
        raise ValueError(f"theta_true must be a 2-vector, got shape {theta_true.shape}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    comp = rng.integers(0, 2, size=T)
    means = theta_true[0] + comp * theta_true[1]
    y = means + math.sqrt(2.0) * rng.standard_normal(T)
    return DataSet(y, true_theta=theta_true)


@dataclass(frozen=True)
class Mixture2Model(CostModel):
    """Two-component location mixture likelihood with Gaussian priors.

    Prior: th1 ~ N(0, var 10), th2 ~ N(0, var 1). Likelihood:
    y ~ 1/2 N(th1, var 2) + 1/2 N(th1 + th2, var 2). T weights the
    likelihood term of the gradient.
    """

    dataset: DataSet
    prior_vars: tuple = (10.0, 1.0)
    lik_var: float = 2.0

    dim = 2

    def __post_init__(self):
        if self.dataset.observations.ndim != 1:
            raise ValueError("Mixture2Model expects scalar observations")

    @property
    def T(self) -> int:
        return len(self.dataset)

    def _responsibilities(self, th0: float, th1: float, y: float):
        e1 = y - th0
        e2 = y - th0 - th1
        l1 = -e1 * e1 / (2.0 * self.lik_var)
        l2 = -e2 * e2 / (2.0 * self.lik_var)
        m = l1 if l1 > l2 else l2
        w1 = math.exp(l1 - m)
        w2 = math.exp(l2 - m)
        z = w1 + w2
        return w1 / z, w2 / z, e1, e2

    def stochastic_gradient(self, theta, datum) -> np.ndarray:
        th0, th1 = float(theta[0]), float(theta[1])
        if not (math.isfinite(th0) and math.isfinite(th1)):
            raise ValueError(f"non-finite theta {theta!r}")
        y = float(datum)
        r1, r2, e1, e2 = self._responsibilities(th0, th1, y)
        v0, v1 = self.prior_vars
        dlik0 = (r1 * e1 + r2 * e2) / self.lik_var
        dlik1 = r2 * e2 / self.lik_var
        T = self.T
        return np.array([th0 / v0 - T * dlik0, th1 / v1 - T * dlik1])

    def _neg_log_prior(self, theta) -> float:
        th0, th1 = float(theta[0]), float(theta[1])
        v0, v1 = self.prior_vars
        return 0.5 * (th0 * th0 / v0 + math.log(v0) + th1 * th1 / v1 + math.log(v1) + 2.0 * _LOG_2PI)

    def _log_lik(self, theta, y: float) -> float:
        th0, th1 = float(theta[0]), float(theta[1])
        e1 = y - th0
        e2 = y - th0 - th1
        v = self.lik_var
        l1 = -e1 * e1 / (2.0 * v)
        l2 = -e2 * e2 / (2.0 * v)
        hi, lo = (l1, l2) if l1 > l2 else (l2, l1)
        return hi + math.log1p(math.exp(lo - hi)) + math.log(0.5) - 0.5 * (math.log(v) + _LOG_2PI)

    def sample_cost(self, theta, datum) -> float:
        return self._neg_log_prior(theta) / self.T - self._log_lik(theta, float(datum))

    def full_log_target(self, theta) -> float:
        th0, th1 = float(theta[0]), float(theta[1])
        y = self.dataset.observations
        e1 = y - th0
        e2 = y - th0 - th1
        v = self.lik_var
        ll = np.logaddexp(-e1 * e1 / (2.0 * v), -e2 * e2 / (2.0 * v)).sum()
        ll += len(y) * (math.log(0.5) - 0.5 * (math.log(v) + _LOG_2PI))
        return float(ll - self._neg_log_prior(theta))

    def hessian_vector(self, theta, datum, v) -> np.ndarray:
        """Analytic Hessian-vector product of the sampled cost."""
        th0, th1 = float(theta[0]), float(theta[1])
        y = float(datum)
        r1, r2, e1, e2 = self._responsibilities(th0, th1, y)
        lv = self.lik_var
        b1, b2 = e1 / lv, e2 / lv
        c1 = r1 * (1.0 / lv - b1 * b1)
        c2 = r2 * (1.0 / lv - b2 * b2)
        gbar = np.array([r1 * b1 + r2 * b2, r2 * b2])

        v = np.asarray(v, dtype=float)
        single = v.ndim == 1
        V = v[None, :] if single else v
        # components have means u1'theta, u2'theta with u1 = [1,0], u2 = [1,1]
        p1 = V[:, 0]
        p2 = V[:, 0] + V[:, 1]
        pg = V @ gbar
        T = self.T
        out = np.empty_like(V)
        out[:, 0] = V[:, 0] / self.prior_vars[0] + T * (c1 * p1 + c2 * p2 + pg * gbar[0])
        out[:, 1] = V[:, 1] / self.prior_vars[1] + T * (c2 * p2 + pg * gbar[1])
        return out[0] if single else out


def mixture2_stochastic_gradient(model: Mixture2Model, theta, y) -> np.ndarray:
    return model.stochastic_gradient(theta, y)


# ---------------------------------------------------------------------------
# Ten-parameter half-sum mixture posterior (dim 10)
# ---------------------------------------------------------------------------

def generate_dataset_mixture10(theta_true, T: int, rng: np.random.Generator) -> DataSet:
    """T draws from 1/2 N(sum first half, var 2) + 1/2 N(sum second half, var 2)."""
    theta_true = np.asarray(theta_true, dtype=float)
    n = theta_true.shape[0]
    if n < 2 or n % 2:
        raise ValueError(f"theta_true must have even length >= 2, got {n}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    m1 = float(theta_true[: n // 2].sum())
    m2 = float(theta_true[n // 2:].sum())
    comp = rng.integers(0, 2, size=T)
    means = np.where(comp == 0, m1, m2)
    y = means + math.sqrt(2.0) * rng.standard_normal(T)
    return DataSet(y, true_theta=theta_true)


@dataclass(frozen=True)
class Mixture10Model(CostModel):
    """Half-sum mixture likelihood with independent Gaussian priors.

    Priors th_i ~ N(mu_i, sigma2_i); per-coordinate hyper-parameters are
    drawn once (mu_i ~ U[-2, 2], sigma2_i ~ U[1, 10]) and then fixed.
    Mixture component means are the sums of the first and second halves of
    theta.
    """

    dataset: DataSet
    mu: np.ndarray
    sigma2: np.ndarray
    lik_var: float = 2.0

    dim = 10

    def __post_init__(self):
        if self.dataset.observations.ndim != 1:
            raise ValueError("Mixture10Model expects scalar observations")
        mu = np.array(self.mu, dtype=float)
        sigma2 = np.array(self.sigma2, dtype=float)
        if mu.shape != (self.dim,) or sigma2.shape != (self.dim,):
            raise ValueError("mu and sigma2 must be length-10 vectors")
        if np.any(sigma2 <= 0):
            raise ValueError("prior variances must be positive")
        mu.setflags(write=False)
        sigma2.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma2", sigma2)

    @classmethod
    def draw_hyperparams(cls, rng: np.random.Generator, dim: int = 10):
        """mu_i ~ U[-2, 2], sigma2_i ~ U[1, 10], drawn once per model."""
        return rng.uniform(-2.0, 2.0, size=dim), rng.uniform(1.0, 10.0, size=dim)

    @property
    def T(self) -> int:
        return len(self.dataset)

    def _mix_terms(self, theta, y: float):
        half = self.dim // 2
        total = float(theta.sum())
        m1 = float(theta[:half].sum())
        m2 = total - m1
        e1, e2 = y - m1, y - m2
        v = self.lik_var
        l1 = -e1 * e1 / (2.0 * v)
        l2 = -e2 * e2 / (2.0 * v)
        m = l1 if l1 > l2 else l2
        w1, w2 = math.exp(l1 - m), math.exp(l2 - m)
        z = w1 + w2
        return w1 / z, w2 / z, e1, e2

    def stochastic_gradient(self, theta, datum) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        # sum() propagates non-finite values; cheaper than isfinite().all()
        if not math.isfinite(float(theta.sum())):
            raise ValueError(f"non-finite theta {theta!r}")
        y = float(datum)
        r1, r2, e1, e2 = self._mix_terms(theta, y)
        half = self.dim // 2
        g = (theta - self.mu) / self.sigma2
        T_lv = self.T / self.lik_var
        g[:half] -= T_lv * r1 * e1
        g[half:] -= T_lv * r2 * e2
        return g

    def _neg_log_prior(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        d = theta - self.mu
        return float(0.5 * np.sum(d * d / self.sigma2 + np.log(self.sigma2) + _LOG_2PI))

    def _log_lik(self, theta, y: float) -> float:
        half = self.dim // 2
        m1 = float(np.sum(theta[:half]))
        m2 = float(np.sum(theta[half:]))
        v = self.lik_var
        return float(
            np.logaddexp(-((y - m1) ** 2) / (2.0 * v), -((y - m2) ** 2) / (2.0 * v))
            + math.log(0.5)
            - 0.5 * (math.log(v) + _LOG_2PI)
        )

    def sample_cost(self, theta, datum) -> float:
        return self._neg_log_prior(theta) / self.T - self._log_lik(theta, float(datum))

    def full_log_target(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        half = self.dim // 2
        m1 = float(np.sum(theta[:half]))
        m2 = float(np.sum(theta[half:]))
        y = self.dataset.observations
        v = self.lik_var
        ll = np.logaddexp(-((y - m1) ** 2) / (2.0 * v), -((y - m2) ** 2) / (2.0 * v)).sum()
        ll += len(y) * (math.log(0.5) - 0.5 * (math.log(v) + _LOG_2PI))
        return float(ll - self._neg_log_prior(theta))

    def hessian_vector(self, theta, datum, v) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        y = float(datum)
        r1, r2, e1, e2 = self._mix_terms(theta, y)
        lv = self.lik_var
        b1, b2 = e1 / lv, e2 / lv
        c1 = r1 * (1.0 / lv - b1 * b1)
        c2 = r2 * (1.0 / lv - b2 * b2)
        half = self.dim // 2
        gbar = np.zeros(self.dim)
        gbar[:half] = r1 * b1
        gbar[half:] = r2 * b2

        v = np.asarray(v, dtype=float)
        single = v.ndim == 1
        V = v[None, :] if single else v
        p1 = V[:, :half].sum(axis=1)
        p2 = V[:, half:].sum(axis=1)
        pg = V @ gbar
        T = self.T
        out = V / self.sigma2
        out[:, :half] += T * (c1 * p1)[:, None]
        out[:, half:] += T * (c2 * p2)[:, None]
        out += T * pg[:, None] * gbar
        return out[0] if single else out


def mixture10_stochastic_gradient(model: Mixture10Model, theta, y) -> np.ndarray:
    return model.stochastic_gradient(theta, y)


# ---------------------------------------------------------------------------
# Synthetic validation models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticModel(CostModel):
    """C(theta) = 1/2 (theta - m)' A (theta - m) with additive gradient noise.

    The datum is the noise draw xi, so sample_cost includes the matching
    linear term sigma_g * xi'(theta - m) and the gradient is its exact
    theta-derivative. The Gibbs covariance inv(A) / beta is available in
    closed form for validation.
    """

    A: np.ndarray
    sigma_g: float = 0.0
    center: np.ndarray | None = None

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if not np.allclose(A, A.T, rtol=0.0, atol=1e-12):
            raise ValueError("A must be symmetric")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise ValueError("A must be positive definite (Cholesky failed)") from None
        if self.sigma_g < 0:
            raise ValueError("sigma_g must be >= 0")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        center = np.zeros(A.shape[0]) if self.center is None else np.array(self.center, dtype=float)
        if center.shape != (A.shape[0],):
            raise ValueError("center must match the dimension of A")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def sample_datum(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.dim)

    def stochastic_gradient(self, theta, datum) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        g = self.A @ (theta - self.center)
        if self.sigma_g:
            g = g + self.sigma_g * np.asarray(datum, dtype=float)
        return g

    def sample_cost(self, theta, datum) -> float:
        d = np.asarray(theta, dtype=float) - self.center
        c = 0.5 * float(d @ self.A @ d)
        if self.sigma_g:
            c += self.sigma_g * float(np.asarray(datum, dtype=float) @ d)
        return c

    def hessian_vector(self, theta, datum, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return v @ self.A  # A symmetric; works for (dim,) and (m, dim)

    def full_log_target(self, theta) -> float:
        d = np.asarray(theta, dtype=float) - self.center
        return -0.5 * float(d @ self.A @ d)

    def gibbs_covariance(self, beta: float) -> np.ndarray:
        """Exact stationary covariance inv(A) / beta of the target diffusion."""
        return np.linalg.inv(self.A) / beta


def quadratic_stochastic_gradient(model: QuadraticModel, theta, rng: np.random.Generator) -> np.ndarray:
    """Convenience: draw the noise datum from rng and return the gradient sample."""
    return model.stochastic_gradient(theta, model.sample_datum(rng))


@dataclass(frozen=True)
class DoubleWellModel(CostModel):
    """Scalar double well C(theta) = (theta^2 - 1)^2, minima at +/-1."""

    sigma_g: float = 0.0

    dim = 1

    def sample_datum(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(1)

    def stochastic_gradient(self, theta, datum) -> np.ndarray:
        t = float(np.asarray(theta, dtype=float)[0])
        g = 4.0 * t * (t * t - 1.0)
        if self.sigma_g:
            g += self.sigma_g * float(np.asarray(datum, dtype=float)[0])
        return np.array([g])

    def sample_cost(self, theta, datum) -> float:
        t = float(np.asarray(theta, dtype=float)[0])
        c = (t * t - 1.0) ** 2
        if self.sigma_g:
            c += self.sigma_g * float(np.asarray(datum, dtype=float)[0]) * t
        return c

    def hessian_vector(self, theta, datum, v) -> np.ndarray:
        t = float(np.asarray(theta, dtype=float)[0])
        return (12.0 * t * t - 4.0) * np.asarray(v, dtype=float)

    def full_log_target(self, theta) -> float:
        t = float(np.asarray(theta, dtype=float)[0])
        return -((t * t - 1.0) ** 2)
