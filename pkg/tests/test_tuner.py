# Licensed under the MIT license.

"""Unit Tests for the theta tuner."""

import math
import os

import numpy as np
from parameterized import parameterized

from perfmm import constants, harness, tuner
from perfmm.strategies import ThetaParams
from perfmm.tuner import TuneConfig, TuningProblem
from perfmm.tuner.search_base import BudgetExhausted

from perfmm_test_base import PerfmmTestBase
from common import unittest_main


# pylint: disable=missing-docstring,invalid-name

_TRAIN_PATHS = 20


class TunerTests(PerfmmTestBase):

    def _config(self, **kwargs):
        values = dict(budget=8, train_paths=_TRAIN_PATHS, test_paths=_TRAIN_PATHS, train_seed=11, test_seed=12)
        values.update(kwargs)
        return TuneConfig(**values)

    def test_identity_objective_equals_performative(self):
        cell = self.make_cell(gamma=0.5, xi=5.0)
        identity = tuner.evaluate_candidate(ThetaParams.identity(), cell, 11, _TRAIN_PATHS)
        train_cell, tapes = tuner.market_tapes(cell, 11, _TRAIN_PATHS)
        pnl = np.concatenate([harness.evaluate_shadow(train_cell, tape, constants.STRATEGY_PERFORMATIVE,
                                                      fill_label=constants.STRATEGY_THETA)[0] for tape in tapes])
        self.assertEqual(identity, tuner.objective_value(pnl, cell.gamma, constants.OBJECTIVE_MEAN_PNL))

    @parameterized.expand([(objective,) for objective in constants.POSSIBLE_OBJECTIVES])
    def test_degenerate_market_objective_is_zero(self, objective):
        market = self.small_market(order_flow_scale=0.0, volatility=0.0)
        cell = self.make_cell(market=market)
        for theta in (ThetaParams.identity(), ThetaParams(0.0, 2.0, 0.5), ThetaParams(2.0, 0.0, 2.0)):
            value = tuner.evaluate_candidate(theta, cell, 11, 5, objective=objective)
            self.assertAlmostEqual(value, 0.0, places=12)

    def test_budget_of_one_returns_identity(self):
        result = tuner.tune(self._config(budget=1), self.make_cell())
        self.assertEqual(result.theta, ThetaParams.identity())
        self.assertEqual(result.evaluations, 1)
        self.assertTrue(result.budget_exhausted)
        self.assertEqual(result.train_objective, result.identity_train_objective)
        self.assertEqual(result.test_objective, result.identity_test_objective)

    def test_never_worse_than_identity_on_training(self):
        result = tuner.tune(self._config(), self.make_cell())
        self.assertGreaterEqual(result.train_objective, result.identity_train_objective)
        self.assertLessEqual(result.evaluations, 8)
        self.assertTrue(result.theta.within((0.0, 0.0, 0.0), (2.0, 2.0, 2.0)))

    def test_tuned_theta_is_locally_optimal(self):
        config = self._config(budget=20, train_paths=50, test_paths=10)
        cell = self.make_cell(gamma=0.5, xi=1.0)
        result = tuner.tune(config, cell)
        lower, upper = np.asarray(config.lower), np.asarray(config.upper)
        best = result.theta.as_array()
        signs = np.random.default_rng(7).choice([-1.0, 1.0], size=(4, 3))
        degraded = 0
        for direction in signs:
            candidate = np.clip(best + 0.5 * (upper - lower) * direction, lower, upper)
            value = tuner.evaluate_candidate(ThetaParams.from_array(candidate), cell, config.train_seed,
                                             config.train_paths, objective=config.objective)
            degraded += value < result.train_objective
        self.assertGreaterEqual(degraded, 2)

    def test_tune_is_reproducible(self):
        first = tuner.tune(self._config(), self.make_cell())
        second = tuner.tune(self._config(), self.make_cell())
        self.assertEqual(first, second)

    def test_test_paths_never_seen_while_searching(self):
        result = tuner.tune(self._config(), self.make_cell())
        self.assertEqual(result.candidate_seeds, frozenset([11]))
        self.assertNotIn(12, result.candidate_seeds)

    def test_tune_grid_covers_every_cell(self):
        experiment = harness.ExperimentConfig(market=self.small_market(), gammas=(0.1, 0.5), xis=(1.0,),
                                              paths_per_cell=5)
        results = tuner.tune_grid(self._config(budget=1, train_paths=5, test_paths=5), experiment)
        self.assertEqual([(r.gamma, r.xi) for r in results], [(0.1, 1.0), (0.5, 1.0)])

    def test_problem_caches_and_enforces_budget(self):
        cell, tapes = tuner.market_tapes(self.make_cell(), 11, 5)
        problem = TuningProblem(cell, tapes, self._config(budget=2))
        first = problem.evaluate([1.0, 1.0, 1.0])
        self.assertEqual(problem.evaluate([1.0, 1.0, 1.0]), first)
        self.assertEqual(problem.evaluations, 1)
        # out-of-box candidates are clipped onto the box
        problem.evaluate([5.0, -1.0, 1.0])
        self.assertEqual(problem.evaluate([2.0, 0.0, 1.0]), problem.evaluate([5.0, -1.0, 1.0]))
        self.assertTrue(problem.exhausted)
        with self.assertRaises(BudgetExhausted):
            problem.evaluate([0.5, 0.5, 0.5])
        self.assertEqual(problem.evaluations, 2)

    @parameterized.expand([
        ("mean", constants.OBJECTIVE_MEAN_PNL, [1.0, 2.0, 3.0], 2.0),
        ("sharpe", constants.OBJECTIVE_SHARPE, [0.0, 2.0], 1.0 / math.sqrt(2.0)),
        ("sharpe_flat", constants.OBJECTIVE_SHARPE, [4.0, 4.0], 0.0),
        ("utility_constant", constants.OBJECTIVE_MEAN_UTILITY, [3.0, 3.0, 3.0], 3.0),
        ("utility_pair", constants.OBJECTIVE_MEAN_UTILITY, [0.0, 2.0], -math.log((1.0 + math.exp(-1.0)) / 2.0) / 0.5),
    ])
    def test_objective_value(self, name, objective, samples, expected):
        self.assertAlmostEqual(tuner.objective_value(samples, 0.5, objective), expected, places=12)

    def test_certainty_equivalent_below_mean(self):
        rng = np.random.default_rng(5)
        pnl = rng.normal(10.0, 3.0, 500)
        self.assertLess(tuner.objective_value(pnl, 0.5, constants.OBJECTIVE_MEAN_UTILITY),
                        tuner.objective_value(pnl, 0.5, constants.OBJECTIVE_MEAN_PNL))
        # large losses must not overflow
        self.assertTrue(np.isfinite(tuner.objective_value([-5e3, 1.0], 1.0, constants.OBJECTIVE_MEAN_UTILITY)))

    def test_unknown_objective(self):
        with self.assertRaises(ValueError):
            tuner.objective_value([1.0], 0.5, "median")

    @parameterized.expand([
        ("box_excludes_identity", dict(lower=(1.5, 0.0, 0.0))),
        ("short_box", dict(lower=(0.0, 0.0), upper=(2.0, 2.0))),
        ("zero_budget", dict(budget=0)),
        ("same_seeds", dict(train_seed=3, test_seed=3)),
        ("no_paths", dict(train_paths=0)),
        ("bad_objective", dict(objective="median")),
    ])
    def test_tune_config_validation(self, name, kwargs):
        with self.assertRaises(ValueError):
            self._config(**kwargs)

    def test_theta_table_round_trip(self):
        results = [
            tuner.TuneResult(0.1, 0.3, ThetaParams(1.0, 0.25, 1.5), 1.0, 0.9, 0.8, 0.7, 3, True),
            tuner.TuneResult(0.5, 20.0, ThetaParams(0.75, 1.0, 2.0), 2.0, 1.9, 1.8, 1.7, 3, True),
        ]
        frame = tuner.theta_frame(results)
        self.assertEqual(list(frame.columns), constants.THETAS_COLUMNS)
        os.makedirs(self.test_data_directory, exist_ok=True)
        path = os.path.join(self.test_data_directory, constants.THETAS_FILE)
        frame.to_csv(path, index=False)
        table = tuner.read_theta_table(path)
        self.assertEqual(table, {(0.1, 0.3): ThetaParams(1.0, 0.25, 1.5), (0.5, 20.0): ThetaParams(0.75, 1.0, 2.0)})

    def test_theta_table_missing_columns(self):
        os.makedirs(self.test_data_directory, exist_ok=True)
        path = os.path.join(self.test_data_directory, "bad.csv")
        with open(path, "w") as f:
            f.write("gamma,xi,theta0\n0.1,1.0,1.0\n")
        with self.assertRaises(ValueError):
            tuner.read_theta_table(path)


if __name__ == '__main__':
    unittest_main()
