import numpy as np
import pytest

from skewsgld.models import QuadraticModel
from skewsgld.samplers import SamplerConfig, run_sampler
from skewsgld.tracking import (
    MarkovRegime,
    SwitchingCost,
    quadratic_switching_bank,
    regime_step,
    run_tracking,
)

SYMMETRIC_Q = [[-1.0, 1.0], [1.0, -1.0]]


class TestMarkovRegime:
    def test_transition_matrix_arithmetic(self):
        regime = MarkovRegime(Q=SYMMETRIC_Q, alpha_chain=0.01)
        assert np.allclose(regime.transition_matrix(), [[0.99, 0.01], [0.01, 0.99]])

    def test_frozen_chain_never_moves(self):
        regime = MarkovRegime(Q=SYMMETRIC_Q, alpha_chain=0.0, state=1)
        rng = np.random.default_rng(1)
        for _ in range(200):
            regime = regime_step(regime, rng)
            assert regime.state == 1

    def test_occupancy_matches_stationary_law(self):
        # symmetric two-state generator: uniform stationary law; over 1e5
        # steps at alpha 0.02 the occupancy se is ~0.016
        regime = MarkovRegime(Q=SYMMETRIC_Q, alpha_chain=0.02)
        rng = np.random.default_rng(2)
        visits = 0
        n = 100_000
        for _ in range(n):
            regime = regime_step(regime, rng)
            visits += regime.state
        assert abs(visits / n - 0.5) < 0.05

    def test_row_sum_violation_named(self):
        with pytest.raises(ValueError, match="row 1"):
            MarkovRegime(Q=[[-1.0, 1.0], [0.5, -1.0]], alpha_chain=0.1)

    def test_negative_off_diagonal_named(self):
        with pytest.raises(ValueError, match=r"Q\[0,1\]"):
            MarkovRegime(Q=[[1.0, -1.0], [1.0, -1.0]], alpha_chain=0.1)

    def test_reducible_generator_rejected(self):
        # state 0 is absorbing: not a single communicating class
        with pytest.raises(ValueError, match="irreducible"):
            MarkovRegime(Q=[[0.0, 0.0], [1.0, -1.0]], alpha_chain=0.1)

    def test_alpha_too_large_rejected(self):
        with pytest.raises(ValueError, match="negative entry"):
            MarkovRegime(Q=[[-2.0, 2.0], [2.0, -2.0]], alpha_chain=0.6)

    def test_three_state_cycle_valid(self):
        Q = [[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [1.0, 0.0, -1.0]]
        regime = MarkovRegime(Q=Q, alpha_chain=0.1)
        rng = np.random.default_rng(3)
        seen = set()
        for _ in range(2000):
            regime = regime_step(regime, rng)
            seen.add(regime.state)
        assert seen == {0, 1, 2}


class TestSwitchingCost:
    def test_default_bank(self):
        bank = quadratic_switching_bank(dim=3, offset=2.0)
        assert bank.dim == 3
        assert np.array_equal(bank.minimizers[0], [2.0, 0.0, 0.0])
        assert np.array_equal(bank.minimizers[1], [-2.0, 0.0, 0.0])
        for m, mini in zip(bank.models, bank.minimizers):
            assert np.array_equal(m.stochastic_gradient(mini, None), np.zeros(3))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            SwitchingCost(
                models=(QuadraticModel(np.eye(2)), QuadraticModel(np.eye(3))),
                minimizers=(np.zeros(2), np.zeros(3)),
            )


class TestRunTracking:
    def test_frozen_regime_matches_fixed_cost_run_bitwise(self):
        bank = quadratic_switching_bank(dim=2, offset=3.0)
        regime = MarkovRegime(Q=SYMMETRIC_Q, alpha_chain=0.0, state=0)
        cfg = SamplerConfig(eps=1e-2)
        trace = run_tracking("sgld", bank, regime, cfg, 500, seed=17, theta0=[0.0, 0.0])
        fixed = run_sampler("sgld", bank.models[0], None, cfg, 500, seed=17, theta0=[0.0, 0.0])
        assert trace.thetas.tobytes() == fixed.thetas.tobytes()
        assert len(trace.switch_events()) == 0

    def test_seed_reproducibility(self):
        bank = quadratic_switching_bank()
        cfg = SamplerConfig(eps=1e-2)
        runs = []
        for _ in range(2):
            regime = MarkovRegime(Q=SYMMETRIC_Q, alpha_chain=0.001)
            runs.append(run_tracking("accelerated", bank, regime, cfg, 2000, seed=23,
                                     skew_init="tridiagonal"))
        assert runs[0].thetas.tobytes() == runs[1].thetas.tobytes()
        assert np.array_equal(runs[0].states, runs[1].states)

    def test_switch_events_and_errors_recorded(self):
        bank = quadratic_switching_bank()
        regime = MarkovRegime(Q=SYMMETRIC_Q, alpha_chain=0.002)
        cfg = SamplerConfig(eps=5e-2)
        trace = run_tracking("sgld", bank, regime, cfg, 20_000, seed=29)
        events = trace.switch_events()
        assert len(events) >= 1
        for ev in events:
            assert ev["from"] != ev["to"]
            assert 1 <= ev["k_switch"] <= 20_000
        # errors are distances to the active minimizer
        t = 1000
        x = trace.states[t]
        assert trace.errors[t] == pytest.approx(
            float(np.linalg.norm(trace.thetas[t] - bank.minimizers[x]))
        )

    def test_sampler_never_sees_regime_state(self):
        from skewsgld.tracking import _ActiveCost

        facade = _ActiveCost(quadratic_switching_bank())
        # the facade exposes only the cost-model oracle, no regime attributes
        public = {n for n in dir(facade) if not n.startswith("_")}
        assert public == {
            "dim",
            "stochastic_gradient",
            "sample_cost",
            "hessian_vector",
            "full_log_target",
            "sample_datum",
        }

    def test_unsupported_algorithm_rejected(self):
        bank = quadratic_switching_bank()
        regime = MarkovRegime(Q=SYMMETRIC_Q, alpha_chain=0.01)
        with pytest.raises(ValueError, match="tracking supports"):
            run_tracking("alg3", bank, regime, SamplerConfig(), 10, seed=1)

    def test_bank_regime_size_mismatch_rejected(self):
        bank = quadratic_switching_bank()
        Q3 = [[-1.0, 0.5, 0.5], [0.5, -1.0, 0.5], [0.5, 0.5, -1.0]]
        regime = MarkovRegime(Q=Q3, alpha_chain=0.01)
        with pytest.raises(ValueError, match="states"):
            run_tracking("sgld", bank, regime, SamplerConfig(), 10, seed=1)

    def test_csv_export(self, tmp_path):
        bank = quadratic_switching_bank()
        regime = MarkovRegime(Q=SYMMETRIC_Q, alpha_chain=0.01)
        trace = run_tracking("sgld", bank, regime, SamplerConfig(eps=5e-2), 300, seed=31)
        trace.to_csv(tmp_path / "trace.csv")
        trace.events_to_csv(tmp_path / "events.csv")
        with open(tmp_path / "trace.csv") as f:
            assert f.readline().strip() == "k,x,theta_1,theta_2,err"
        with open(tmp_path / "events.csv") as f:
            assert f.readline().strip() == "k_switch,from,to,recovery_len"
