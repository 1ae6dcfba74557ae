# Licensed under the MIT license.

"""
perfmm.harness - closed-loop experiments, parameter sweeps and metric aggregation.

A path is simulated in two stages. The A&S driver is run against the price process and its
inventory feeds the drift; the result is a market tape. The evaluated (shadow) agents then
quote against the tape on their own fill streams and never touch the price.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from . import constants, dynamics, execution, streams, utils
from . import verbose_logging as logging
from .handler import quoting_policy
from .strategies import ThetaParams

logger = logging.getLogger(__name__)

_ZERO_SPREAD = 1e-12


class EmptySampleError(ValueError):
    """Statistics requested over no samples."""


@dataclass(frozen=True)
class ExperimentConfig:
    market: dynamics.MarketParams = field(default_factory=dynamics.MarketParams)
    gammas: tuple = (0.1, 0.5, 0.8)
    xis: tuple = tuple(np.geomspace(0.3, 20.0, 20).tolist())
    paths_per_cell: int = 1000
    master_seed: int = 20240601
    strategies: tuple = tuple(constants.ALL_STRATEGIES)
    theta_params: Optional[ThetaParams] = None
    theta_table: Optional[Dict[tuple, ThetaParams]] = None
    impact_multiplier: float = 1.0
    stepper: str = constants.STEPPER_EULER
    initial_price: float = 0.0
    initial_inventory: int = 0
    display_offset: float = 0.0
    as_as_shadow: bool = False
    zero_noise: bool = False

    def __post_init__(self):
        utils.make_sure(self.paths_per_cell >= 1, "paths_per_cell must be >= 1, got %s", self.paths_per_cell)
        utils.make_sure(len(self.gammas) > 0, "gammas must not be empty")
        utils.make_sure(len(self.xis) > 0, "xis must not be empty")
        for gamma in self.gammas:
            dynamics.RiskParams(gamma)
        for xi in self.xis:
            dynamics.PerformativityParams(xi)
        utils.make_sure(self.impact_multiplier > 0, "impact_multiplier must be > 0")
        utils.make_sure(self.stepper in constants.POSSIBLE_STEPPERS, "unknown stepper %s", self.stepper)
        for name in self.strategies:
            utils.make_sure(name in constants.ALL_STRATEGIES, "unknown strategy %s", name)

    def theta_for(self, gamma, xi):
        if self.theta_table:
            theta = lookup_theta(self.theta_table, gamma, xi)
            if theta is not None:
                return theta
        return self.theta_params or ThetaParams.identity()

    def cell(self, gamma, xi):
        return Cell(market=self.market, gamma=gamma, xi=xi, paths=self.paths_per_cell,
                    master_seed=self.master_seed, strategies=tuple(self.strategies),
                    theta=self.theta_for(gamma, xi), impact_multiplier=self.impact_multiplier,
                    stepper=self.stepper, initial_price=self.initial_price,
                    initial_inventory=self.initial_inventory, display_offset=self.display_offset,
                    as_as_shadow=self.as_as_shadow, zero_noise=self.zero_noise)

    def cells(self):
        for gamma in self.gammas:
            for xi in self.xis:
                yield self.cell(gamma, xi)


def lookup_theta(table, gamma, xi):
    for (g, x), theta in table.items():
        if math.isclose(g, gamma, rel_tol=1e-9) and math.isclose(x, xi, rel_tol=1e-9):
            return theta
    return None


@dataclass(frozen=True)
class Cell:
    """One (gamma, xi) point of a sweep with everything needed to simulate it."""

    market: dynamics.MarketParams
    gamma: float
    xi: float
    paths: int = 1000
    master_seed: int = 20240601
    strategies: tuple = tuple(constants.ALL_STRATEGIES)
    theta: ThetaParams = ThetaParams()
    impact_multiplier: float = 1.0
    stepper: str = constants.STEPPER_EULER
    initial_price: float = 0.0
    initial_inventory: int = 0
    display_offset: float = 0.0
    as_as_shadow: bool = False
    zero_noise: bool = False

    def __post_init__(self):
        dynamics.RiskParams(self.gamma)
        dynamics.PerformativityParams(self.xi)

    def with_seed(self, master_seed, paths=None):
        return replace(self, master_seed=master_seed, paths=self.paths if paths is None else paths)

    def policy(self, label, theta=None):
        return quoting_policy.create(label, xi=self.xi, gamma=self.gamma, sigma=self.market.volatility,
                                     k=self.market.book_decay, theta=theta or self.theta)


@dataclass
class AgentTrace:
    """Per-step quotes and positions of one agent over a batch of paths."""

    reservation: np.ndarray
    ask_premium: np.ndarray
    bid_premium: np.ndarray
    inventory: np.ndarray
    cash: np.ndarray

    def pnl(self, prices):
        return self.cash + self.inventory * prices


@dataclass
class BatchOutcome:
    path_indices: np.ndarray
    terminal_pnl: Dict[str, np.ndarray]
    terminal_inventory: Dict[str, np.ndarray]
    tape: Optional[dynamics.DrivenMarket] = None
    traces: Dict[str, AgentTrace] = field(default_factory=dict)


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    sharpe: Optional[float]
    inventory_mean: float
    inventory_std: float
    count: int


@dataclass(frozen=True)
class SweepRecord:
    strategy: str
    gamma: float
    xi: float
    mean_pnl: float
    std_pnl: float
    sharpe: Optional[float]
    mean_terminal_inventory: float
    std_terminal_inventory: float
    paths: int
    master_seed: int

    def as_row(self):
        return [self.strategy, self.gamma, self.xi, self.mean_pnl, self.std_pnl,
                np.nan if self.sharpe is None else self.sharpe,
                self.mean_terminal_inventory, self.std_terminal_inventory, self.paths, self.master_seed]


def drive_tape(cell, path_indices):
    """Simulate the driver-only market for a batch of paths."""
    driver = cell.policy(constants.STRATEGY_AS)
    return dynamics.drive_market(cell.market, cell.xi, cell.gamma, driver, cell.master_seed, path_indices,
                                 stepper=cell.stepper, impact_multiplier=cell.impact_multiplier,
                                 zero_noise=cell.zero_noise, initial_price=cell.initial_price,
                                 initial_inventory=cell.initial_inventory)


def driver_trace(tape):
    return AgentTrace(reservation=tape.reservations, ask_premium=tape.ask_premia, bid_premium=tape.bid_premia,
                      inventory=tape.driver_inventory, cash=tape.driver_cash)


def evaluate_shadow(cell, tape, label, theta=None, record=False, fill_label=None):
    """
    Trade a shadow agent against a market tape. Returns (terminal pnl, terminal inventory, trace).
    The performative strategies read the driver's start-of-step inventory. fill_label draws the
    fills from another agent's stream, which puts two policies on identical fill draws.
    """
    market = cell.market
    n_paths, n_steps = tape.ask_premia.shape
    policy = cell.policy(label, theta)
    fill_tag = streams.fill_tag(fill_label or label)
    uniforms = streams.uniform_block(cell.master_seed, tape.path_indices, fill_tag, n_steps)
    model = execution.FillModel.from_market(market)
    ledger = execution.LedgerBatch(n_paths, initial_inventory=cell.initial_inventory)

    trace = None
    if record:
        trace = AgentTrace(reservation=np.empty((n_paths, n_steps)), ask_premium=np.empty((n_paths, n_steps)),
                           bid_premium=np.empty((n_paths, n_steps)),
                           inventory=np.empty((n_paths, n_steps + 1), dtype=np.int64),
                           cash=np.empty((n_paths, n_steps + 1)))
        trace.inventory[:, 0] = ledger.inventory
        trace.cash[:, 0] = ledger.cash

    for n in range(n_steps):
        tau = market.horizon - tape.times[n]
        s = tape.prices[:, n]
        decision = policy.quote(s, tau, tape.driver_inventory[:, n], ledger.inventory.copy())
        ledger.execute(decision, s, uniforms[:, n, :], model)
        if record:
            trace.reservation[:, n] = decision.reservation
            trace.ask_premium[:, n] = decision.ask_premium
            trace.bid_premium[:, n] = decision.bid_premium
            trace.inventory[:, n + 1] = ledger.inventory
            trace.cash[:, n + 1] = ledger.cash

    return ledger.mark(tape.prices[:, n_steps]), ledger.inventory.copy(), trace


def run_paths(cell, path_indices, record=False, strategies=None):
    """Simulate a batch of paths for every requested strategy of the cell."""
    strategies = tuple(strategies or cell.strategies)
    tape = drive_tape(cell, path_indices)
    n_steps = tape.ask_premia.shape[1]
    outcome = BatchOutcome(path_indices=tape.path_indices, terminal_pnl={}, terminal_inventory={},
                           tape=tape if record else None)
    for label in strategies:
        if label == constants.STRATEGY_AS and not cell.as_as_shadow:
            inventory = tape.driver_inventory[:, n_steps]
            outcome.terminal_pnl[label] = tape.driver_cash[:, n_steps] + inventory * tape.prices[:, n_steps]
            outcome.terminal_inventory[label] = inventory.copy()
            if record:
                outcome.traces[label] = driver_trace(tape)
            continue
        pnl, inventory, trace = evaluate_shadow(cell, tape, label, record=record)
        outcome.terminal_pnl[label] = pnl
        outcome.terminal_inventory[label] = inventory
        if record:
            outcome.traces[label] = trace
    return outcome


def run_path(cell, path_index, record=False):
    """Single path; deterministic for fixed (master_seed, path_index)."""
    return run_paths(cell, [path_index], record=record)


def path_batches(paths):
    """Fixed-size batches of path indices; the split never depends on concurrency."""
    return [np.arange(start, min(start + constants.PATH_BATCH_SIZE, paths))
            for start in range(0, paths, constants.PATH_BATCH_SIZE)]


def run_cell(cell, executor=None, strategies=None):
    """Terminal PnL and inventory per strategy over all paths of the cell, in path order."""
    batches = path_batches(cell.paths)
    if executor is None:
        outcomes = [run_paths(cell, batch, strategies=strategies) for batch in batches]
    else:
        outcomes = list(executor.map(lambda batch: run_paths(cell, batch, strategies=strategies), batches))
    labels = outcomes[0].terminal_pnl.keys()
    pnl = {label: np.concatenate([o.terminal_pnl[label] for o in outcomes]) for label in labels}
    inventory = {label: np.concatenate([o.terminal_inventory[label] for o in outcomes]) for label in labels}
    return pnl, inventory


def aggregate(pnl_samples, inventory_samples=None):
    """Mean, sample std (n - 1), Sharpe = mean / std and inventory statistics."""
    pnl_samples = [float(v) for v in np.ravel(pnl_samples)]
    if not pnl_samples:
        raise EmptySampleError("aggregate needs at least one sample")
    if inventory_samples is None:
        inventory_samples = [0.0] * len(pnl_samples)
    inventory_samples = [float(v) for v in np.ravel(inventory_samples)]
    utils.make_sure(len(inventory_samples) == len(pnl_samples), "pnl and inventory sample counts differ")

    mean, std = _mean_std(pnl_samples)
    inv_mean, inv_std = _mean_std(inventory_samples)
    # rounding noise on a deterministic PnL is not dispersion
    sharpe = mean / std if std > _ZERO_SPREAD * (1.0 + abs(mean)) else None
    if sharpe is None:
        logger.verbose("sharpe undefined for %d samples with zero spread", len(pnl_samples))
    return Summary(mean=mean, std=std, sharpe=sharpe, inventory_mean=inv_mean, inventory_std=inv_std,
                   count=len(pnl_samples))


def _mean_std(samples):
    # fsum is exact up to the final rounding, so the result is independent of summation order
    n = len(samples)
    mean = math.fsum(samples) / n
    if n < 2:
        return mean, 0.0
    return mean, math.sqrt(math.fsum((v - mean) ** 2 for v in samples) / (n - 1))


def sweep_cell(cell, executor=None):
    pnl, inventory = run_cell(cell, executor)
    records = []
    for label in cell.strategies:
        summary = aggregate(pnl[label], inventory[label])
        records.append(SweepRecord(strategy=label, gamma=cell.gamma, xi=cell.xi, mean_pnl=summary.mean,
                                   std_pnl=summary.std, sharpe=summary.sharpe,
                                   mean_terminal_inventory=summary.inventory_mean,
                                   std_terminal_inventory=summary.inventory_std, paths=summary.count,
                                   master_seed=cell.master_seed))
        logger.verbose("%s gamma=%s xi=%.4g: mean pnl %.4f std %.4f", label, cell.gamma, cell.xi,
                       summary.mean, summary.std)
    return records


def run_sweep(config, threads=1):
    """One SweepRecord per (strategy, gamma, xi); identical for every thread count."""
    records = []
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for cell in config.cells():
            records.extend(sweep_cell(cell, executor))
            logger.info("Finished cell gamma=%s xi=%.4g", cell.gamma, cell.xi)
    finally:
        if executor is not None:
            executor.shutdown()
    return records


@dataclass
class DecompositionBundle:
    decomposition: dynamics.PathDecomposition
    session: Dict[str, np.ndarray]
    agents: List[str]


def decompose_run(cell, seed, path_index=0, agents=(constants.STRATEGY_AS, constants.STRATEGY_PERFORMATIVE)):
    """Price formation series plus the per-step session of the driver and the performative agent."""
    cell = cell.with_seed(seed, paths=1)
    outcome = run_paths(cell, [path_index], record=True, strategies=agents)
    tape = outcome.tape
    decomposition = tape.decomposition(0)
    offset = cell.display_offset
    n_steps = tape.ask_premia.shape[1]

    def padded(values):
        return np.append(values, np.nan)

    session = {"t": tape.times, "mid_price": tape.prices[0] + offset}
    for label in agents:
        trace = outcome.traces[label]
        session[label + "_reservation"] = padded(trace.reservation[0] + offset)
        session[label + "_ask"] = padded(tape.prices[0, :n_steps] + trace.ask_premium[0] + offset)
        session[label + "_bid"] = padded(tape.prices[0, :n_steps] - trace.bid_premium[0] + offset)
        session[label + "_inventory"] = trace.inventory[0]
        session[label + "_pnl"] = trace.pnl(tape.prices)[0]
    if offset:
        decomposition = replace(decomposition, deterministic_series=decomposition.deterministic_series + offset,
                                full_series=decomposition.full_series + offset)
    return DecompositionBundle(decomposition=decomposition, session=session, agents=list(agents))
