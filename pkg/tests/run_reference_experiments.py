# Licensed under the MIT license.

"""Tool to run the long reference experiments and check the strategy orderings they must show."""

# pylint: disable=broad-except,protected-access

import argparse
import dataclasses
import math
import os
import sys
import time

import numpy as np
import yaml

from perfmm import cli, constants, harness, logging, tuner, utils
from perfmm.config import load_config
from perfmm.strategies import ThetaParams

logger = logging.getLogger("run_reference")

_KINDS = ["sweep", "tune", "tune-sweep"]
_SIGNIFICANCE = 3.0
_MIN_GAIN_SE = 2.0


def _combined_se(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))


def check_parity_at_low_xi(experiment, run_config, frame, results):
    """Below the break-off point the performative and A&S means are statistically indistinguishable."""
    rows = frame[np.isclose(frame.gamma, experiment.gamma)]
    xi = rows.xi.min()
    perf = cli._by_xi(rows, constants.STRATEGY_PERFORMATIVE)[xi]
    as_row = cli._by_xi(rows, constants.STRATEGY_AS)[xi]
    gap = abs(perf.mean_pnl - as_row.mean_pnl)
    bound = _SIGNIFICANCE * cli._combined_se(perf, as_row)
    return cli.PropertyCheck("parity-at-low-xi", cli.PASS if gap <= bound else cli.FAIL,
                             "xi={}: |gap| {:.4g}, bound {:.4g}".format(xi, gap, bound))


def check_break_off_exists(experiment, run_config, frame, results):
    rows = frame[np.isclose(frame.gamma, experiment.gamma)]
    perf = cli._by_xi(rows, constants.STRATEGY_PERFORMATIVE)
    crossing = cli._break_off(perf, cli._by_xi(rows, constants.STRATEGY_SYMMETRIC))
    ok = crossing is not None and crossing > min(perf)
    return cli.PropertyCheck("break-off-exists", cli.PASS if ok else cli.FAIL,
                             "performative above symmetric from xi={}".format(crossing))


def check_theta_gain(experiment, run_config, frame, results):
    """Tuned thetas never lose to the identity on held-out paths and win clearly at the smallest xi."""
    tune_config = run_config.tune
    smallest = min(r.xi for r in results)
    bad = []
    for result in results:
        cell = run_config.experiment.cell(result.gamma, result.xi)
        test_cell, tapes = tuner.market_tapes(cell, tune_config.test_seed, tune_config.test_paths)
        tuned = tuner.theta_pnl(test_cell, tapes, result.theta)
        identity = tuner.theta_pnl(test_cell, tapes, ThetaParams.identity())
        se = _combined_se(tuned, identity)
        gain = tuned.mean() - identity.mean()
        logger.info("gamma=%s xi=%.4g: theta %s gain %.4g (se %.4g)", result.gamma, result.xi,
                    result.theta.as_array().round(3).tolist(), gain, se)
        if gain < -se or (result.xi == smallest and gain < _MIN_GAIN_SE * se):
            bad.append(result.xi)
    return cli.PropertyCheck("theta-gain", cli.FAIL if bad else cli.PASS,
                             "fails at xi={}".format(bad) if bad else "{} cells".format(len(results)))


_CHECK_FUNCS = {
    "parity-at-low-xi": check_parity_at_low_xi,
    "break-off-exists": check_break_off_exists,
    "theta-gain": check_theta_gain,
}


class Experiment(object):
    """One reference experiment."""

    def __init__(self, name, kind, config, checks, gamma=0.5, disabled=False):
        utils.make_sure(kind in _KINDS, "%s: unknown kind %s", name, kind)
        self.name = name
        self.kind = kind
        self.config = config or {}
        self.checks = checks
        self.gamma = gamma
        self.disabled = disabled
        self.duration = 0.0

    def _evaluate(self, run_config, frame, results):
        sweep_checks = {c.name: c for c in cli.check_sweep(frame, self.gamma)} if frame is not None else {}
        checks = []
        for name in self.checks:
            if name in _CHECK_FUNCS:
                checks.append(_CHECK_FUNCS[name](self, run_config, frame, results))
            elif name in sweep_checks:
                checks.append(sweep_checks[name])
            else:
                checks.append(cli.PropertyCheck(name, cli.FAIL, "not produced by a {} run".format(self.kind)))
        return checks

    def run(self, threads=1):
        start = time.time()
        run_config = load_config(text=yaml.safe_dump(self.config))
        experiment = run_config.experiment
        frame, results = None, None
        if self.kind in ("tune", "tune-sweep"):
            results = tuner.tune_grid(run_config.tune, experiment)
        if self.kind == "tune-sweep":
            experiment = dataclasses.replace(experiment, theta_table={(r.gamma, r.xi): r.theta for r in results})
        if self.kind in ("sweep", "tune-sweep"):
            frame = cli.sweep_frame(harness.run_sweep(experiment, threads=threads))
        checks = self._evaluate(run_config, frame, results)
        self.duration = time.time() - start
        for check in checks:
            logger.info("%s", check)
        return all(check.status != cli.FAIL for check in checks)


def get_args():
    """Parse commandline."""
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", default="tests/run_reference_experiments.yaml", help="yaml config to use")
    parser.add_argument("--tests", help="experiments to run")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument("--verbose", "-v", help="verbose output, option is additive", action="count")
    parser.add_argument("--debug", help="debug mode", action="store_true")
    parser.add_argument("--list", help="list experiments", action="store_true")
    parser.add_argument("--include-disabled", help="include disabled experiments", action="store_true")
    parser.add_argument("--perf", help="write per-experiment runtimes to this csv file")
    return parser.parse_args()


def load_experiments_from_yaml(path):
    """Create experiments from yaml file."""
    with open(os.path.abspath(path), "r") as f:
        config = yaml.safe_load(f.read())
    experiments = {}
    for name, settings in config.items():
        kwargs = {}
        for kw in ["gamma", "disabled"]:
            if settings.get(kw) is not None:
                kwargs[kw] = settings[kw]
        experiments[name] = Experiment(name, settings.get("kind"), settings.get("config"),
                                       settings.get("checks", []), **kwargs)
    return experiments


def main():
    args = get_args()
    logging.basicConfig(level=logging.get_verbosity_level(args.verbose))
    if args.debug:
        utils.set_debug_mode(True)

    experiments = load_experiments_from_yaml(args.config)
    if args.list:
        logger.info(sorted(experiments.keys()))
        return 0
    keys = args.tests.split(",") if args.tests else list(experiments.keys())

    failed = 0
    count = 0
    for name in keys:
        logger.info("===================================")
        experiment = experiments[name]
        if args.tests is None and experiment.disabled and not args.include_disabled:
            logger.info("Skip %s: disabled", name)
            continue
        count += 1
        try:
            logger.info("Running %s", name)
            ret = experiment.run(threads=args.threads)
        except Exception:
            logger.error("Failed to run %s", name, exc_info=1)
            ret = False
        logger.info("%s took %.1fs", name, experiment.duration)
        if not ret:
            failed += 1

    logger.info("===================================")
    logger.info("RESULT: %s failed of %s", failed, count)

    if args.perf:
        with open(args.perf, "w") as f:
            f.write("experiment,seconds\n")
            for name in keys:
                f.write("{},{}\n".format(name, experiments[name].duration))
    return failed


if __name__ == "__main__":
    sys.exit(main())
