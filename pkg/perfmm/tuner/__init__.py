# Licensed under the MIT license.
"""perfmm.tuner module - derivative-free tuning of the theta-enhanced strategy."""

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import FrozenSet

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from .local_polish_search import LocalPolishSearch
from .search_base import BudgetExhausted
from .space_filling_search import SpaceFillingSearch
from .. import constants, harness, logging, streams, utils
from ..strategies import ThetaParams

# phase order matters: the polish starts from the incumbent the space filling phase leaves behind
_phases = OrderedDict([
    ("space_filling", SpaceFillingSearch),
    ("local_polish", LocalPolishSearch),
])


def _get_phases():
    return _phases


@dataclass(frozen=True)
class TuneConfig:
    lower: tuple = (0.0, 0.0, 0.0)
    upper: tuple = (2.0, 2.0, 2.0)
    budget: int = 100
    train_paths: int = 1000
    test_paths: int = 1000
    train_seed: int = 1
    test_seed: int = 2
    objective: str = constants.OBJECTIVE_MEAN_PNL

    def __post_init__(self):
        utils.make_sure(len(self.lower) == 3 and len(self.upper) == 3, "search box needs three components")
        for lo, hi in zip(self.lower, self.upper):
            utils.make_sure(lo <= 1.0 <= hi, "search box [%s, %s] must contain the identity 1", lo, hi)
        utils.make_sure(self.budget >= 1, "budget must be >= 1, got %s", self.budget)
        utils.make_sure(self.train_paths >= 1 and self.test_paths >= 1, "train and test paths must be >= 1")
        utils.make_sure(self.train_seed != self.test_seed, "train and test seeds must differ")
        utils.make_sure(self.objective in constants.POSSIBLE_OBJECTIVES, "unknown objective %s", self.objective)


@dataclass(frozen=True)
class TuneResult:
    gamma: float
    xi: float
    theta: ThetaParams
    train_objective: float
    test_objective: float
    identity_train_objective: float
    identity_test_objective: float
    evaluations: int
    budget_exhausted: bool
    candidate_seeds: FrozenSet[int] = field(default_factory=frozenset)

    def as_row(self):
        return [self.gamma, self.xi, self.theta.theta0, self.theta.theta1, self.theta.theta2,
                self.train_objective, self.test_objective]


def objective_value(pnl, gamma, objective):
    """Scalar score of terminal PnL samples; larger is better."""
    pnl = np.asarray(pnl, dtype=float)
    if objective == constants.OBJECTIVE_MEAN_PNL:
        return math.fsum(pnl) / len(pnl)
    if objective == constants.OBJECTIVE_SHARPE:
        return harness.aggregate(pnl).sharpe or 0.0
    if objective == constants.OBJECTIVE_MEAN_UTILITY:
        # certainty equivalent of exponential utility, evaluated in log space
        return -(logsumexp(-gamma * pnl) - math.log(len(pnl))) / gamma
    raise ValueError("unknown objective " + str(objective))


def market_tapes(cell, master_seed, paths):
    cell = cell.with_seed(master_seed, paths)
    return cell, [harness.drive_tape(cell, batch) for batch in harness.path_batches(paths)]


def theta_pnl(cell, tapes, theta):
    return np.concatenate([harness.evaluate_shadow(cell, tape, constants.STRATEGY_THETA, theta=theta)[0]
                           for tape in tapes])


def evaluate_candidate(theta, cell, master_seed, paths, objective=constants.OBJECTIVE_MEAN_PNL):
    """Objective of the theta strategy over paths 0..paths-1 of master_seed."""
    cell, tapes = market_tapes(cell, master_seed, paths)
    return objective_value(theta_pnl(cell, tapes, theta), cell.gamma, objective)


class TuningProblem(object):
    """Budgeted, cached objective over the theta box with incumbent tracking."""

    dimension = 3

    def __init__(self, cell, tapes, config):
        self.cell = cell
        self.tapes = tapes
        self.config = config
        self.lower = np.asarray(config.lower, dtype=float)
        self.upper = np.asarray(config.upper, dtype=float)
        self.evaluations = 0
        self.incumbent = None
        self.incumbent_value = -np.inf
        self._cache = {}
        self._logger = logging.getLogger(__name__)

    @property
    def exhausted(self):
        return self.evaluations >= self.config.budget

    def evaluate(self, candidate):
        candidate = np.clip(np.asarray(candidate, dtype=float), self.lower, self.upper)
        key = tuple(candidate.tolist())
        if key in self._cache:
            return self._cache[key]
        if self.exhausted:
            raise BudgetExhausted()
        self.evaluations += 1
        pnl = theta_pnl(self.cell, self.tapes, ThetaParams.from_array(candidate))
        value = objective_value(pnl, self.cell.gamma, self.config.objective)
        self._cache[key] = value
        # strict improvement only, so the identity stays incumbent on ties
        if value > self.incumbent_value:
            self.incumbent = candidate
            self.incumbent_value = value
        self._logger.verbose("candidate %s -> %.6g", key, value)
        return value


def tune(config, cell):
    """
    Tune the three multipliers for one cell: identity first, quasi-random sampling for half of the
    budget, then a local simplex polish. Never returns a theta worse on training than the identity.
    """
    logger = logging.getLogger(__name__)
    logger.info("Tuning theta for gamma=%s xi=%.4g (budget %d)", cell.gamma, cell.xi, config.budget)

    with streams.accounting() as accountant:
        train_cell, train_tapes = market_tapes(cell, config.train_seed, config.train_paths)
        problem = TuningProblem(train_cell, train_tapes, config)
        identity_value = problem.evaluate(ThetaParams.identity().as_array())

        for name, factory in _get_phases().items():
            phase = factory(seed=config.train_seed)
            logger.verbose("Apply %s", name)
            phase.search(problem, phase.allowance(config.budget, problem.evaluations))
    candidate_seeds = frozenset(accountant.seeds)

    theta = ThetaParams.from_array(problem.incumbent)
    test_cell, test_tapes = market_tapes(cell, config.test_seed, config.test_paths)
    test_value = objective_value(theta_pnl(test_cell, test_tapes, theta), cell.gamma, config.objective)
    identity_test = objective_value(theta_pnl(test_cell, test_tapes, ThetaParams.identity()), cell.gamma,
                                    config.objective)
    if problem.exhausted:
        logger.verbose("budget of %d evaluations exhausted", config.budget)
    logger.info("Best theta %s: train %.6g (identity %.6g), test %.6g (identity %.6g)",
                theta.as_array().round(4).tolist(), problem.incumbent_value, identity_value, test_value, identity_test)
    return TuneResult(gamma=cell.gamma, xi=cell.xi, theta=theta, train_objective=problem.incumbent_value,
                      test_objective=test_value, identity_train_objective=identity_value,
                      identity_test_objective=identity_test, evaluations=problem.evaluations,
                      budget_exhausted=problem.exhausted, candidate_seeds=candidate_seeds)


def tune_grid(config, experiment):
    """Tune every (gamma, xi) cell of the experiment independently."""
    return [tune(config, cell) for cell in experiment.cells()]


def theta_frame(results):
    return pd.DataFrame([r.as_row() for r in results], columns=constants.THETAS_COLUMNS)


def read_theta_table(path):
    """Theta table file -> {(gamma, xi): ThetaParams}."""
    frame = pd.read_csv(path)
    missing = [c for c in constants.THETAS_COLUMNS[:5] if c not in frame.columns]
    utils.make_sure(not missing, "theta table %s lacks columns %s", path, missing)
    return {(float(row.gamma), float(row.xi)): ThetaParams(float(row.theta0), float(row.theta1), float(row.theta2))
            for row in frame.itertuples(index=False)}
