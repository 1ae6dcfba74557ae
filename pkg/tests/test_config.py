# Licensed under the MIT license.

"""Unit Tests for configuration loading."""

import json
import os

from parameterized import parameterized

from perfmm import constants, dynamics, harness, tuner
from perfmm.config import ConfigError, DecomposeConfig, load_config
from perfmm.strategies import ThetaParams

from perfmm_test_base import PerfmmTestBase
from common import unittest_main


# pylint: disable=missing-docstring,invalid-name

DEFAULT_CONFIG = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "configs", "default.yaml")


class ConfigTests(PerfmmTestBase):

    def _write(self, name, text):
        os.makedirs(self.test_data_directory, exist_ok=True)
        path = os.path.join(self.test_data_directory, name)
        with open(path, "w") as f:
            f.write(text)
        return path

    def test_default_file_matches_builtin_defaults(self):
        run_config = load_config(DEFAULT_CONFIG)
        self.assertEqual(run_config.experiment, harness.ExperimentConfig())
        self.assertEqual(run_config.experiment.market, dynamics.MarketParams())
        self.assertEqual(run_config.tune, tuner.TuneConfig())
        self.assertEqual(run_config.decompose, DecomposeConfig())
        self.assertEqual(len(run_config.experiment.xis), 20)

    def test_empty_config_is_all_defaults(self):
        run_config = load_config(text="")
        self.assertEqual(run_config.experiment, harness.ExperimentConfig())
        self.assertIsNone(run_config.path)

    @parameterized.expand([
        ("unknown_key", "market:\n  volatility: 2.0\n  vol: 1.0\n", 3, "unknown key 'market.vol'"),
        ("unknown_section", "market:\n  step: 0.01\nmarkets:\n  step: 0.01\n", 3, "unknown section 'markets'"),
        ("null_value", "experiment:\n  gammas: [0.1]\n  paths_per_cell:\n", 3,
         "'experiment.paths_per_cell' is set but empty"),
        ("wrong_type", "tune:\n  budget: ten\n", 2, "'tune.budget'"),
        ("bool_is_not_number", "market:\n  volatility: true\n", 2, "'market.volatility'"),
        ("bad_choice", "market:\n  fill_rule: poisson\n", 2, "'market.fill_rule'"),
        ("duplicate_key", "market:\n  step: 0.01\n  step: 0.02\n", 3, "duplicate key 'step'"),
        ("negative_seed", "experiment:\n  master_seed: -1\n", 2, "'experiment.master_seed'"),
        ("short_theta", "experiment:\n  theta_params: [1.0, 1.0]\n", 2, "'experiment.theta_params'"),
        ("dataclass_check", "\nexperiment:\n  paths_per_cell: 0\n", 2, "paths_per_cell"),
        ("grid_does_not_tile", "market:\n  step: 0.3\n", 1, "whole number of steps"),
        ("box_excludes_identity", "tune:\n  lower: 1.5\n", 1, "identity"),
        ("decompose_bounds", "decompose:\n  xi: 0.0\n", 1, "xi must be > 0"),
        ("decompose_path_index", "decompose:\n  path_index: -2\n", 1, "decompose path_index"),
        ("top_level_list", "- market\n", 1, "mapping of sections"),
        ("xi_grid_missing_count", "experiment:\n  xi_grid: {low: 1.0, high: 2.0}\n", 2, "missing count"),
    ])
    def test_errors_name_field_and_line(self, name, text, line, fragment):
        path = self._write("bad.yaml", text)
        with self.assertRaises(ConfigError) as cm:
            load_config(path)
        self.assertEqual(cm.exception.line, line)
        self.assertEqual(cm.exception.path, path)
        self.assertIn(fragment, str(cm.exception))
        self.assertTrue(str(cm.exception).startswith("{}:{}: ".format(path, line)))

    def test_malformed_yaml(self):
        with self.assertRaises(ConfigError) as cm:
            load_config(text="market: [1, 2\n")
        self.assertIn("malformed YAML", str(cm.exception))

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config(os.path.join(self.test_data_directory, "absent.yaml"))

    def test_config_error_is_value_error(self):
        self.assertTrue(issubclass(ConfigError, ValueError))

    @parameterized.expand([
        ("log", "log", (1.0, 10.0, 100.0)),
        ("linear", "linear", (1.0, 50.5, 100.0)),
    ])
    def test_xi_grid(self, name, spacing, expected):
        text = "experiment:\n  xi_grid: {{low: 1.0, high: 100.0, count: 3, spacing: {}}}\n".format(spacing)
        xis = load_config(text=text).experiment.xis
        self.assertAllClose(xis, expected, rtol=1e-12)

    def test_xis_and_xi_grid_conflict(self):
        text = "experiment:\n  xis: [1.0]\n  xi_grid: {low: 1.0, high: 2.0, count: 2}\n"
        with self.assertRaises(ConfigError) as cm:
            load_config(text=text)
        self.assertEqual(cm.exception.line, 3)

    @parameterized.expand([
        ("list", "[1.0, 0.5, 2.0]"),
        ("mapping", "{theta1: 0.5, theta2: 2.0}"),
    ])
    def test_theta_params(self, name, value):
        experiment = load_config(text="experiment:\n  theta_params: {}\n".format(value)).experiment
        self.assertEqual(experiment.theta_params, ThetaParams(1.0, 0.5, 2.0))
        self.assertEqual(experiment.cell(0.5, 1.0).theta, ThetaParams(1.0, 0.5, 2.0))

    def test_scalar_box_bound(self):
        tune_config = load_config(text="tune:\n  lower: 0.5\n  upper: [1.0, 3.0, 2.0]\n").tune
        self.assertEqual(tune_config.lower, (0.5, 0.5, 0.5))
        self.assertEqual(tune_config.upper, (1.0, 3.0, 2.0))

    def test_theta_table_relative_to_config(self):
        frame = tuner.theta_frame([tuner.TuneResult(0.5, 2.0, ThetaParams(1.0, 0.5, 1.5), 1.0, 1.0, 1.0, 1.0, 1,
                                                    True)])
        os.makedirs(self.test_data_directory, exist_ok=True)
        frame.to_csv(os.path.join(self.test_data_directory, constants.THETAS_FILE), index=False)
        path = self._write("run.yaml", "experiment:\n  gammas: [0.5]\n  xis: [2.0, 4.0]\n"
                                       "  theta_table: {}\n".format(constants.THETAS_FILE))
        experiment = load_config(path).experiment
        self.assertEqual(experiment.cell(0.5, 2.0).theta, ThetaParams(1.0, 0.5, 1.5))
        # cells missing from the table fall back to the identity
        self.assertEqual(experiment.cell(0.5, 4.0).theta, ThetaParams.identity())

    def test_missing_theta_table(self):
        path = self._write("run.yaml", "experiment:\n  theta_table: nowhere.csv\n")
        with self.assertRaises(ConfigError) as cm:
            load_config(path)
        self.assertEqual(cm.exception.line, 2)

    def test_overrides(self):
        run_config = load_config(text="experiment:\n  master_seed: 3\n", master_seed=7, zero_noise=None,
                                 impact_multiplier=10.0)
        self.assertEqual(run_config.experiment.master_seed, 7)
        self.assertFalse(run_config.experiment.zero_noise)
        self.assertEqual(run_config.experiment.impact_multiplier, 10.0)
        self.assertEqual(run_config.snapshot["experiment"]["master_seed"], 7)

    def test_snapshot_is_json_ready(self):
        run_config = load_config(DEFAULT_CONFIG)
        snapshot = json.loads(json.dumps(run_config.snapshot))
        self.assertEqual(sorted(snapshot), ["decompose", "experiment", "market", "tune"])
        self.assertEqual(snapshot["market"]["step"], 0.005)
        self.assertEqual(snapshot["tune"]["lower"], [0.0, 0.0, 0.0])
        self.assertIsNone(snapshot["experiment"]["theta_table"])


if __name__ == '__main__':
    unittest_main()
