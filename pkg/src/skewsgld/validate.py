"""Built-in oracle suite behind the ``validate`` CLI command.

Fast self-checks that gate a checkout: finite-difference agreement of every
model gradient and Hessian-vector product, skew-matrix structure, the
reduced-iteration quadratic stationary-covariance check, Wasserstein-1
metric axioms, and histogram normalization. Each check returns a
CheckResult; any failure names the offending quantity (coordinate, entry,
or axiom).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import MarginalCDF, wasserstein1_marginal
from .models import (
    DataSet,
    DoubleWellModel,
    Mixture2Model,
    Mixture10Model,
    QuadraticModel,
    generate_dataset_mixture2,
    generate_dataset_mixture10,
)
from .samplers import SamplerConfig, run_sampler
from .skew import (
    SkewMatrix,
    skew_apply,
    skew_init_tridiagonal,
    skew_perturbation_sample,
    skew_project,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<36s} {self.detail}"


def check_gradient_fd(
    model,
    rng,
    datum_sampler,
    n_points: int = 100,
    name: str = "",
    rel: float = 1e-4,
    abs_floor: float = 1e-5,
) -> CheckResult:
    """Stochastic gradient vs. central finite difference of the sample cost.

    Step 1e-6 per coordinate; tolerance max(abs_floor, rel * |g_i|) per
    coordinate.
    """
    h = 1e-6
    worst = 0.0
    for _ in range(n_points):
        theta = rng.normal(0.0, 2.0, size=model.dim)
        datum = datum_sampler(rng)
        g = model.stochastic_gradient(theta, datum)
        fd = np.empty(model.dim)
        for i in range(model.dim):
            tp = theta.copy()
            tm = theta.copy()
            tp[i] += h
            tm[i] -= h
            fd[i] = (model.sample_cost(tp, datum) - model.sample_cost(tm, datum)) / (2.0 * h)
        # the sampled gradient is T times the per-datum cost gradient for
        # dataset models; synthetic models have T == 1
        fd *= getattr(model, "T", 1)
        err = np.abs(g - fd)
        tol = np.maximum(abs_floor, rel * np.abs(g))
        if np.any(err > tol):
            i = int(np.argmax(err - tol))
            return CheckResult(
                f"gradient_fd[{name}]",
                False,
                f"coordinate {i}: gradient {g[i]:.6g} vs finite difference {fd[i]:.6g} "
                f"(|err|={err[i]:.3g} > tol={tol[i]:.3g})",
            )
        worst = max(worst, float(np.max(err / tol)))
    return CheckResult(f"gradient_fd[{name}]", True, f"{n_points} points, worst err/tol {worst:.3f}")


def check_hessian_vector_fd(
    model,
    rng,
    datum_sampler,
    n_points: int = 100,
    name: str = "",
    rel: float = 1e-4,
    abs_floor: float = 1e-5,
) -> CheckResult:
    """Hessian-vector products vs. finite differences of the gradient."""
    worst = 0.0
    for _ in range(n_points):
        theta = rng.normal(0.0, 2.0, size=model.dim)
        datum = datum_sampler(rng)
        v = rng.standard_normal(model.dim)
        hv = model.hessian_vector(theta, datum, v)
        h = 1e-6 * max(1.0, float(np.linalg.norm(theta))) / max(1.0, float(np.linalg.norm(v)))
        fd = (
            model.stochastic_gradient(theta + h * v, datum)
            - model.stochastic_gradient(theta - h * v, datum)
        ) / (2.0 * h)
        err = np.abs(hv - fd)
        tol = np.maximum(abs_floor, rel * np.abs(hv))
        if np.any(err > tol):
            i = int(np.argmax(err - tol))
            return CheckResult(
                f"hessian_vector_fd[{name}]",
                False,
                f"coordinate {i}: hvp {hv[i]:.6g} vs finite difference {fd[i]:.6g}",
            )
        worst = max(worst, float(np.max(err / tol)))
    return CheckResult(
        f"hessian_vector_fd[{name}]", True, f"{n_points} points, worst err/tol {worst:.3f}"
    )


def check_skew_invariants(rng) -> CheckResult:
    for dim in (2, 5, 10):
        for _ in range(50):
            S = skew_init_tridiagonal(dim, rng)
            x = rng.standard_normal(dim)
            quad = abs(float(x @ skew_apply(S, x)))
            bound = 1e-12 * float(x @ x) * max(S.max_abs(), 1e-300)
            if quad > max(bound, 1e-300):
                return CheckResult(
                    "skew_invariants", False, f"x'Sx = {quad:.3g} exceeds bound at dim {dim}"
                )
            if not np.array_equal(SkewMatrix.from_dense(S.dense()).upper, S.upper):
                return CheckResult("skew_invariants", False, f"round trip broken at dim {dim}")
            P = skew_project(S, -0.5, 0.5)
            P2 = skew_project(P, -0.5, 0.5)
            if not np.array_equal(P.upper, P2.upper):
                return CheckResult("skew_invariants", False, "projection not idempotent")
        d = skew_perturbation_sample(dim, rng)
        if not np.array_equal(d.dense(), -d.dense().T):
            return CheckResult("skew_invariants", False, f"perturbation not skew at dim {dim}")
    return CheckResult("skew_invariants", True, "orthogonality, round trip, projection, signs")


def check_w1_axioms(rng) -> CheckResult:
    for _ in range(100):
        a = MarginalCDF(rng.normal(0, 1, size=rng.integers(2, 60)))
        b = MarginalCDF(rng.normal(0.5, 2, size=rng.integers(2, 60)))
        c = MarginalCDF(rng.normal(-1, 0.5, size=rng.integers(2, 60)))
        ab, ba = wasserstein1_marginal(a, b), wasserstein1_marginal(b, a)
        if ab != ba:
            return CheckResult("w1_axioms", False, f"symmetry broken: {ab} vs {ba}")
        ac = wasserstein1_marginal(a, c)
        cb = wasserstein1_marginal(c, b)
        if ab > ac + cb + 1e-12:
            return CheckResult("w1_axioms", False, f"triangle broken: {ab} > {ac} + {cb}")
        if wasserstein1_marginal(a, a) != 0.0:
            return CheckResult("w1_axioms", False, "self-distance not zero")
    return CheckResult("w1_axioms", True, "symmetry, triangle, identity on 100 triples")


def check_histogram_normalization(rng) -> CheckResult:
    from .metrics import histogram_density
    from .samplers import Trajectory

    x = rng.normal(0, 1, size=(5000, 2))
    traj = Trajectory(
        algorithm="sgld", seed=0, ks=np.arange(1, 5001), thetas=x
    )
    masses, _ = histogram_density(traj, 0, bins=40, hist_range=(-6, 6))
    if abs(float(masses.sum()) - 1.0) > 1e-12:
        return CheckResult("histogram_normalization", False, f"1-D masses sum to {masses.sum()}")
    m2, _ = histogram_density(traj, (0, 1), bins=20, hist_range=((-6, 6), (-6, 6)))
    if abs(float(m2.sum()) - 1.0) > 1e-12:
        return CheckResult("histogram_normalization", False, f"2-D masses sum to {m2.sum()}")
    return CheckResult("histogram_normalization", True, "1-D and 2-D masses sum to 1")


def check_quadratic_stationary(
    steps: int = 200_000, tol: float = 0.2, seed: int = 20240817
) -> CheckResult:
    """Reduced-iteration Gibbs check: sample covariance vs inv(A)/beta."""
    model = QuadraticModel(np.diag([1.0, 4.0]))
    config = SamplerConfig(eps=1e-3, beta=1.0)
    traj = run_sampler("sgld", model, None, config, steps, seed)
    cov = np.cov(traj.post_burn_in(0.2).T)
    target = model.gibbs_covariance(config.beta)
    scale = np.sqrt(np.outer(np.diag(target), np.diag(target)))
    err = np.abs(cov - target) / scale
    if np.any(err > tol):
        i, j = np.unravel_index(int(np.argmax(err)), err.shape)
        return CheckResult(
            "quadratic_stationary",
            False,
            f"cov[{i},{j}]={cov[i, j]:.4f} vs {target[i, j]:.4f} (rel err {err[i, j]:.3f} > {tol})",
        )
    return CheckResult(
        "quadratic_stationary", True, f"{steps} steps, max rel err {float(err.max()):.3f} <= {tol}"
    )


def _toy_models():
    rng = np.random.default_rng(90210)
    ds2 = generate_dataset_mixture2([0.0, 1.0], 20, rng)
    m2 = Mixture2Model(ds2)
    mu, sigma2 = Mixture10Model.draw_hyperparams(np.random.default_rng(7))
    theta_true = mu.copy()
    ds10 = generate_dataset_mixture10(theta_true, 20, rng)
    m10 = Mixture10Model(ds10, mu=mu, sigma2=sigma2)
    quad = QuadraticModel(np.array([[2.0, 0.3], [0.3, 1.0]]), sigma_g=0.7)
    dwell = DoubleWellModel(sigma_g=0.5)
    return (
        (m2, lambda r: float(r.normal(0.0, 3.0)), "mixture2"),
        (m10, lambda r: float(r.normal(0.0, 3.0)), "mixture10"),
        (quad, lambda r: r.standard_normal(quad.dim), "quadratic"),
        (dwell, lambda r: r.standard_normal(1), "double_well"),
    )


def run_all(n_points: int = 100, stationary_steps: int = 200_000) -> list:
    """The full oracle battery, fast enough for a commit gate."""
    results = []
    rng = np.random.default_rng(31337)
    results.append(check_skew_invariants(rng))
    for model, datum_sampler, name in _toy_models():
        results.append(check_gradient_fd(model, rng, datum_sampler, n_points, name))
        results.append(check_hessian_vector_fd(model, rng, datum_sampler, n_points, name))
    results.append(check_w1_axioms(rng))
    results.append(check_histogram_normalization(rng))
    results.append(check_quadratic_stationary(steps=stationary_steps))
    return results
