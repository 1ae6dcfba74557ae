# Licensed under the MIT license.

"""
python -m perfmm.cli : run performative market-making experiments and check their outputs
"""

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np
import pandas as pd

from perfmm import constants, harness, logging, tuner, utils
from perfmm.config import ConfigError, load_config
from perfmm.version import version

logger = logging.getLogger(constants.PERFMM_PACKAGE_NAME)

_HELP_TEXT = """
Usage Examples:

python -m perfmm.cli sweep --config configs/default.yaml --out runs/default
python -m perfmm.cli sweep --config configs/default.yaml --out runs/default --threads 4 --seed 7
python -m perfmm.cli decompose --config configs/default.yaml --out runs/impact --impact-multiplier 10
python -m perfmm.cli tune --config configs/default.yaml --out runs/thetas
python -m perfmm.cli validate --out runs/default
"""

# validate thresholds
_ORDERING_XI_MIN = 5.0
_SIGNIFICANCE = 3.0


def get_args(argv=None):
    """Parse commandline."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--verbose", "-v", help="verbose output, option is additive", action="count")
    common.add_argument("--debug", help="debug mode", action="store_true")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--config", help="yaml experiment config, defaults are used when omitted")
    run.add_argument("--seed", type=int, help="master seed, overrides experiment.master_seed")
    run.add_argument("--threads", type=int, default=1, help="worker threads, never changes the results")
    run.add_argument("--zero-noise", help="switch off the price noise", action="store_true")
    run.add_argument("--impact-multiplier", type=float, help="scale of the inventory term in the price drift")

    parser = argparse.ArgumentParser(description="Performative market-making experiments.",
                                     formatter_class=argparse.RawDescriptionHelpFormatter, epilog=_HELP_TEXT)
    commands = parser.add_subparsers(dest="command")
    commands.add_parser("sweep", parents=[common, run], help="sweep every (gamma, xi) cell, write sweep.csv")
    commands.add_parser("decompose", parents=[common, run], help="one path's price formation, write decompose.csv")
    commands.add_parser("tune", parents=[common, run], help="tune theta per cell, write thetas.csv")
    validate = commands.add_parser("validate", parents=[common], help="check ordering properties of sweep.csv")
    validate.add_argument("--gamma", type=float, default=0.5, help="risk aversion whose rows are checked")
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        sys.exit(constants.EXIT_CONFIG_ERROR)
    if args.command != "validate":
        if args.threads < 1:
            parser.error("--threads must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            parser.error("--seed must be an unsigned 64-bit value")
    return args


@dataclass
class RunManifest:
    """Completion record of one command; written last."""

    config: dict
    master_seed: int
    version: str
    command: str
    outputs: List[str]
    duration_seconds: float
    schema_version: str = constants.SCHEMA_VERSION
    extras: Dict[str, object] = field(default_factory=dict)


def write_frame(frame, path):
    with utils.atomic_output(path) as f:
        frame.to_csv(f, index=False, float_format=constants.CSV_FLOAT_FORMAT)
    logger.info("Wrote %s", path)
    return path


def write_manifest(out_dir, manifest):
    path = os.path.join(out_dir, constants.MANIFEST_FILE)
    with utils.atomic_output(path) as f:
        json.dump(asdict(manifest), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def sweep_frame(records):
    return pd.DataFrame([r.as_row() for r in records], columns=constants.SWEEP_COLUMNS)


def cmd_sweep(run_config, out_dir, threads=1):
    records = harness.run_sweep(run_config.experiment, threads=threads)
    return [write_frame(sweep_frame(records), os.path.join(out_dir, constants.SWEEP_FILE))]


def cmd_decompose(run_config, out_dir, threads=1):  # pylint: disable=unused-argument
    experiment = run_config.experiment
    cell = experiment.cell(run_config.decompose.gamma, run_config.decompose.xi)
    bundle = harness.decompose_run(cell, experiment.master_seed, path_index=run_config.decompose.path_index)
    series = bundle.decomposition
    decompose = pd.DataFrame({"t": series.times, "impact": series.impact_series,
                              "deterministic": series.deterministic_series, "mid_price": series.full_series},
                             columns=constants.DECOMPOSE_COLUMNS)
    session = pd.DataFrame(bundle.session, columns=list(bundle.session.keys()))
    return [write_frame(decompose, os.path.join(out_dir, constants.DECOMPOSE_FILE)),
            write_frame(session, os.path.join(out_dir, constants.SESSION_FILE))]


def cmd_tune(run_config, out_dir, threads=1):  # pylint: disable=unused-argument
    results = tuner.tune_grid(run_config.tune, run_config.experiment)
    exhausted = sum(1 for r in results if r.budget_exhausted)
    if exhausted:
        logger.warning("Tuning budget exhausted in %d of %d cells", exhausted, len(results))
    return [write_frame(tuner.theta_frame(results), os.path.join(out_dir, constants.THETAS_FILE))]


_COMMANDS = {
    "sweep": (cmd_sweep, [constants.SWEEP_FILE]),
    "decompose": (cmd_decompose, [constants.DECOMPOSE_FILE, constants.SESSION_FILE]),
    "tune": (cmd_tune, [constants.THETAS_FILE]),
}


def run_command(command, run_config, out_dir, threads=1):
    """Run one producing command; the manifest is written only after every output is in place."""
    os.makedirs(out_dir, exist_ok=True)
    utils.remove_files([os.path.join(out_dir, constants.MANIFEST_FILE)])
    start = time.time()
    outputs = []
    try:
        outputs = _COMMANDS[command][0](run_config, out_dir, threads)
        manifest = RunManifest(config=run_config.snapshot, master_seed=run_config.experiment.master_seed,
                               version=version, command=command,
                               outputs=[os.path.basename(p) for p in outputs],
                               duration_seconds=time.time() - start)
        if command == "tune":
            manifest.extras = {"train_seed": run_config.tune.train_seed, "test_seed": run_config.tune.test_seed}
        write_manifest(out_dir, manifest)
    except BaseException:
        utils.remove_files([os.path.join(out_dir, name) for name in _COMMANDS[command][1]])
        raise
    return outputs


@dataclass
class PropertyCheck:
    name: str
    status: str
    detail: str

    def __str__(self):
        return "{} {}: {}".format(self.status, self.name, self.detail)


PASS = "PASS"
FAIL = "FAIL"
SKIP = "SKIP"


def _combined_se(a, b):
    return math.sqrt(a.std_pnl ** 2 / a.paths + b.std_pnl ** 2 / b.paths)


def _by_xi(frame, strategy):
    return {row.xi: row for row in frame[frame.strategy == strategy].itertuples(index=False)}


def _break_off(performer, baseline):
    """Smallest grid xi from which performer's mean PnL stays above baseline's; None if never."""
    xis = sorted(set(performer) & set(baseline))
    crossing = None
    for xi in reversed(xis):
        if performer[xi].mean_pnl > baseline[xi].mean_pnl:
            crossing = xi
        else:
            break
    return crossing


def check_sweep(frame, gamma=0.5):
    """Re-check the ordering properties of a sweep table at one gamma; returns PropertyChecks."""
    checks = []
    rows = frame[np.isclose(frame.gamma, gamma)]
    if rows.empty:
        return [PropertyCheck("rows-present", FAIL, "no rows for gamma={}".format(gamma))]
    single_path = bool((rows.paths < 2).any())
    as_rows = _by_xi(rows, constants.STRATEGY_AS)
    sym_rows = _by_xi(rows, constants.STRATEGY_SYMMETRIC)
    perf_rows = _by_xi(rows, constants.STRATEGY_PERFORMATIVE)
    theta_rows = _by_xi(rows, constants.STRATEGY_THETA)

    name = "performative-mean-above-as"
    xis = sorted(xi for xi in set(perf_rows) & set(as_rows) if xi >= _ORDERING_XI_MIN)
    if not xis:
        checks.append(PropertyCheck(name, SKIP, "no performative/as rows with xi >= {}".format(_ORDERING_XI_MIN)))
    else:
        bad = [xi for xi in xis if perf_rows[xi].mean_pnl - as_rows[xi].mean_pnl
               <= _SIGNIFICANCE * _combined_se(perf_rows[xi], as_rows[xi])]
        checks.append(PropertyCheck(name, FAIL if bad else PASS,
                                    "fails at xi={}".format(bad) if bad else "{} cells".format(len(xis))))

    if single_path:
        for skipped in ("performative-std-below-symmetric", "terminal-inventory-near-zero",
                        "performative-sharpe-above-as"):
            checks.append(PropertyCheck(skipped, SKIP, "single-path sweep, dispersion undefined"))
    else:
        name = "performative-std-below-symmetric"
        xis = sorted(set(perf_rows) & set(sym_rows))
        if not xis:
            checks.append(PropertyCheck(name, SKIP, "no performative/symmetric rows"))
        else:
            bad = [xi for xi in xis if not perf_rows[xi].std_pnl < sym_rows[xi].std_pnl]
            checks.append(PropertyCheck(name, FAIL if bad else PASS,
                                        "fails at xi={}".format(bad) if bad else "{} cells".format(len(xis))))

        name = "terminal-inventory-near-zero"
        bad = [(row.strategy, row.xi) for row in rows.itertuples(index=False)
               if abs(row.mean_term_inv) > _SIGNIFICANCE * row.std_term_inv / math.sqrt(row.paths)]
        checks.append(PropertyCheck(name, FAIL if bad else PASS,
                                    "fails at {}".format(bad) if bad else "{} rows".format(len(rows))))

        name = "performative-sharpe-above-as"
        xis = sorted(xi for xi in set(perf_rows) & set(as_rows) if xi >= _ORDERING_XI_MIN)
        if not xis:
            checks.append(PropertyCheck(name, SKIP, "no performative/as rows with xi >= {}".format(_ORDERING_XI_MIN)))
        else:
            bad = [xi for xi in xis if not perf_rows[xi].sharpe > as_rows[xi].sharpe]
            checks.append(PropertyCheck(name, FAIL if bad else PASS,
                                        "fails at xi={}".format(bad) if bad else "{} cells".format(len(xis))))

    name = "theta-breaks-off-first"
    if not theta_rows or not perf_rows or not sym_rows:
        checks.append(PropertyCheck(name, SKIP, "needs theta, performative and symmetric rows"))
    else:
        perf_xi = _break_off(perf_rows, sym_rows)
        theta_xi = _break_off(theta_rows, sym_rows)
        ok = perf_xi is None or (theta_xi is not None and theta_xi <= perf_xi)
        checks.append(PropertyCheck(name, PASS if ok else FAIL,
                                    "theta from xi={}, performative from xi={}".format(theta_xi, perf_xi)))
    return checks


def read_sweep(path):
    frame = pd.read_csv(path)
    utils.make_sure(list(frame.columns) == constants.SWEEP_COLUMNS, "%s has columns %s, expected %s",
                    path, list(frame.columns), constants.SWEEP_COLUMNS)
    return frame


def cmd_validate(out_dir, gamma=0.5):
    """Print one line per property; True iff none failed."""
    path = os.path.join(out_dir, constants.SWEEP_FILE)
    if not os.path.exists(path):
        raise ConfigError("no {} in {}".format(constants.SWEEP_FILE, out_dir))
    checks = check_sweep(read_sweep(path), gamma)
    for check in checks:
        print(check)
    return all(check.status != FAIL for check in checks)


def main(argv=None):
    args = get_args(argv)
    logging.basicConfig(level=logging.get_verbosity_level(args.verbose))
    if args.debug:
        utils.set_debug_mode(True)

    try:
        if args.command == "validate":
            return constants.EXIT_OK if cmd_validate(args.out, args.gamma) else constants.EXIT_CONFIG_ERROR
        run_config = load_config(args.config, master_seed=args.seed, impact_multiplier=args.impact_multiplier,
                                 zero_noise=True if args.zero_noise else None)
    except ConfigError as ex:
        logger.error("%s", ex)
        return constants.EXIT_CONFIG_ERROR
    except ValueError as ex:
        logger.error("invalid input: %s", ex)
        return constants.EXIT_CONFIG_ERROR

    try:
        outputs = run_command(args.command, run_config, args.out, args.threads)
    except Exception as ex:  # pylint: disable=broad-except
        logger.error("%s failed: %s", args.command, ex, exc_info=True)
        return constants.EXIT_RUNTIME_ERROR
    logger.info("Finished %s, outputs: %s", args.command, ", ".join(outputs))
    return constants.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
