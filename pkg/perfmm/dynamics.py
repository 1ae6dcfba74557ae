# Licensed under the MIT license.

"""
perfmm.dynamics - the performative mid-price process.

The mid-price mean-reverts towards the inventory correction of the prevailing
(A&S) market maker:

    ds = [g(t) - xi * s] dt + sigma dW,    g(t) = -gamma * sigma^2 * q * (T - t)

All closed forms accept floats or numpy arrays and evaluate elementwise.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import constants, execution, streams, utils
from . import verbose_logging as logging

logger = logging.getLogger(__name__)

# below this value of xi * tau the closed form of delta_xi loses digits to cancellation
_DELTA_SERIES_CUTOFF = 1e-4


class GridError(ValueError):
    """The time grid does not tile the horizon."""


@dataclass(frozen=True)
class MarketParams:
    """Ambient market constants shared by every module."""

    order_flow_scale: float = 140.0     # A
    book_decay: float = 1.5             # k
    volatility: float = 2.0             # sigma
    horizon: float = 1.0                # T
    step: float = 0.005                 # dt
    fill_rule: str = constants.FILL_LINEAR

    def __post_init__(self):
        # A = 0 and sigma = 0 are allowed so that degenerate markets (no fills, no noise) can be simulated
        utils.make_sure(self.order_flow_scale >= 0, "order_flow_scale must be >= 0, got %s", self.order_flow_scale)
        utils.make_sure(self.book_decay > 0, "book_decay must be > 0, got %s", self.book_decay)
        utils.make_sure(self.volatility >= 0, "volatility must be >= 0, got %s", self.volatility)
        utils.make_sure(self.horizon > 0, "horizon must be > 0, got %s", self.horizon)
        utils.make_sure(0 < self.step <= self.horizon, "step must be in (0, horizon], got %s", self.step)
        utils.make_sure(self.fill_rule in constants.POSSIBLE_FILL_RULES, "unknown fill rule %s", self.fill_rule)

    @property
    def step_count(self):
        n = utils.step_count(self.horizon, self.step)
        if n is None:
            raise GridError("horizon {} is not a whole number of steps of {}".format(self.horizon, self.step))
        return n

    def time_grid(self):
        return np.arange(self.step_count + 1) * self.step


@dataclass(frozen=True)
class PerformativityParams:
    xi: float

    def __post_init__(self):
        utils.make_sure(self.xi > 0, "xi must be > 0, got %s", self.xi)


@dataclass(frozen=True)
class RiskParams:
    gamma: float

    def __post_init__(self):
        utils.make_sure(self.gamma > 0, "gamma must be > 0, got %s", self.gamma)


@dataclass(frozen=True)
class PathState:
    """One path's state at grid point n."""

    step_index: int
    time: float
    mid_price: float
    driver_inventory: int = 0
    rng_cursor: int = 0


@dataclass(frozen=True)
class TransitionLaw:
    """Gaussian law of s(T) given s(t) with the driver inventory frozen over [t, T]."""

    mean: float
    variance: float
    horizon: float

    @property
    def std(self):
        return np.sqrt(self.variance)


@dataclass
class PathDecomposition:
    """Price formation series: impact term, deterministic part and full mid-price path."""

    times: np.ndarray
    impact_series: np.ndarray
    deterministic_series: np.ndarray
    full_series: np.ndarray
    inventory_series: Optional[np.ndarray] = None


@dataclass
class DrivenMarket:
    """Batch result of the closed-loop driver simulation; arrays are indexed [path, step]."""

    path_indices: np.ndarray
    times: np.ndarray
    prices: np.ndarray
    impact: np.ndarray
    deterministic: np.ndarray
    driver_inventory: np.ndarray
    driver_cash: np.ndarray
    ask_premia: np.ndarray
    bid_premia: np.ndarray
    reservations: np.ndarray
    extras: dict = field(default_factory=dict)

    def decomposition(self, row=0):
        return PathDecomposition(times=self.times, impact_series=self.impact[row],
                                 deterministic_series=self.deterministic[row], full_series=self.prices[row],
                                 inventory_series=self.driver_inventory[row])


def as_impact(gamma, sigma, q, tau):
    """A&S inventory correction g = -gamma * sigma^2 * q * tau."""
    return utils.as_output(-gamma * sigma ** 2 * np.asarray(q, dtype=float) * tau)


def delta_xi(xi, tau):
    """(1 - exp(-xi tau)(1 + xi tau)) / xi^2, the weight of the driver inventory on the terminal mean."""
    xi = np.asarray(xi, dtype=float)
    tau = np.asarray(tau, dtype=float)
    x = xi * tau
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = (-np.expm1(-x) - x * np.exp(-x)) / xi ** 2
    series = tau ** 2 * (0.5 - x / 3.0 + x ** 2 / 8.0 - x ** 3 / 30.0)
    return utils.as_output(np.where(x < _DELTA_SERIES_CUTOFF, series, closed))


def e_xi(xi, tau):
    """(1 - exp(-2 xi tau)) / (2 xi)."""
    xi = np.asarray(xi, dtype=float)
    tau = np.asarray(tau, dtype=float)
    return utils.as_output(-np.expm1(-2.0 * xi * tau) / (2.0 * xi))


def transition_law(s_t, q, xi, gamma, sigma, tau, impact_multiplier=1.0):
    decay = np.exp(-xi * np.asarray(tau, dtype=float))
    mean = decay * s_t - impact_multiplier * gamma * sigma ** 2 * np.asarray(q, dtype=float) * delta_xi(xi, tau)
    variance = sigma ** 2 * e_xi(xi, tau)
    return TransitionLaw(mean=utils.as_output(mean), variance=utils.as_output(variance), horizon=tau)


def step_integral(xi, dt, tau):
    """Integral of exp(-xi (t + dt - u)) (T - u) du over one step [t, t + dt] with tau = T - t."""
    return utils.as_output((tau - dt) * -np.expm1(-xi * dt) / xi + delta_xi(xi, dt))


def euler_parts(s, q, tau, xi, gamma, sigma, dt, impact_multiplier=1.0):
    """Deterministic part and noise scale of one Euler-Maruyama step of the discrete price process."""
    drift = impact_multiplier * as_impact(gamma, sigma, q, tau) - xi * np.asarray(s, dtype=float)
    return s + drift * dt, sigma * np.sqrt(dt)


def exact_parts(s, q, tau, xi, gamma, sigma, dt, impact_multiplier=1.0):
    """Deterministic part and noise scale of the exact one-step transition with q frozen over the step."""
    deterministic = (np.exp(-xi * dt) * np.asarray(s, dtype=float)
                     - impact_multiplier * gamma * sigma ** 2 * np.asarray(q, dtype=float)
                     * step_integral(xi, dt, tau))
    return deterministic, np.sqrt(sigma ** 2 * e_xi(xi, dt))


_STEPPERS = {
    constants.STEPPER_EULER: euler_parts,
    constants.STEPPER_EXACT: exact_parts,
}


def _advance(parts_func, state, xi, gamma, sigma, dt, z, horizon, impact_multiplier):
    utils.make_sure(np.isfinite(z), "noise draw must be finite, got %s", z)
    tau = horizon - state.time
    utils.make_sure(tau > -constants.GRID_TOLERANCE * horizon, "state at t=%s is past the horizon", state.time)
    deterministic, scale = parts_func(state.mid_price, state.driver_inventory, tau, xi, gamma, sigma, dt,
                                      impact_multiplier)
    n = state.step_index + 1
    return replace(state, step_index=n, time=n * dt, mid_price=float(deterministic + scale * z),
                   rng_cursor=state.rng_cursor + 1)


def euler_step(state, xi, gamma, sigma, dt, z, horizon, impact_multiplier=1.0):
    """Advance a path one step with the discrete process; the driver inventory is left untouched."""
    return _advance(euler_parts, state, xi, gamma, sigma, dt, z, horizon, impact_multiplier)


def exact_step(state, xi, gamma, sigma, dt, z, horizon, impact_multiplier=1.0):
    """Advance a path one step with the exact transition law, inventory frozen within the step."""
    return _advance(exact_parts, state, xi, gamma, sigma, dt, z, horizon, impact_multiplier)


def sample_terminal(s_t, q, xi, gamma, sigma, tau, size, rng, impact_multiplier=1.0):
    """Draw s(T) from the exact constant-inventory transition law."""
    law = transition_law(s_t, q, xi, gamma, sigma, tau, impact_multiplier)
    return law.mean + np.sqrt(law.variance) * rng.standard_normal(size)


def drive_market(market, xi, gamma, driver, master_seed, path_indices, fill_tag="fills:driver",
                 stepper=constants.STEPPER_EULER, impact_multiplier=1.0, zero_noise=False,
                 initial_price=0.0, initial_inventory=0):
    """
    Run the closed loop for a batch of paths: the driver quotes, its quotes fill, and the price
    moves with the driver's start-of-step inventory. Shadow agents never enter here.
    """
    n_steps = market.step_count
    path_indices = np.asarray(path_indices, dtype=np.int64)
    n_paths = len(path_indices)
    parts_func = _STEPPERS[stepper]
    dt = market.step
    sigma = market.volatility

    times = market.time_grid()
    if zero_noise:
        z = np.zeros((n_paths, n_steps))
    else:
        z = streams.normal_block(master_seed, path_indices, constants.STREAM_PRICE, n_steps)
    uniforms = streams.uniform_block(master_seed, path_indices, fill_tag, n_steps)
    fill_model = execution.FillModel.from_market(market)

    prices = np.empty((n_paths, n_steps + 1))
    deterministic = np.empty((n_paths, n_steps + 1))
    impact = np.empty((n_paths, n_steps + 1))
    inventory = np.empty((n_paths, n_steps + 1), dtype=np.int64)
    cash = np.empty((n_paths, n_steps + 1))
    ask_premia = np.empty((n_paths, n_steps))
    bid_premia = np.empty((n_paths, n_steps))
    reservations = np.empty((n_paths, n_steps))

    prices[:, 0] = initial_price
    deterministic[:, 0] = initial_price
    ledger = execution.LedgerBatch(n_paths, initial_inventory=initial_inventory)
    inventory[:, 0] = ledger.inventory
    cash[:, 0] = ledger.cash

    for n in range(n_steps):
        tau = market.horizon - times[n]
        s = prices[:, n]
        q_n = ledger.inventory.copy()
        impact[:, n] = impact_multiplier * as_impact(gamma, sigma, q_n, tau)

        decision = driver.quote(s, tau, q_n, q_n)
        ask_premia[:, n] = decision.ask_premium
        bid_premia[:, n] = decision.bid_premium
        reservations[:, n] = decision.reservation
        ledger.execute(decision, s, uniforms[:, n, :], fill_model)

        det, scale = parts_func(s, q_n, tau, xi, gamma, sigma, dt, impact_multiplier)
        deterministic[:, n + 1] = det
        prices[:, n + 1] = det + scale * z[:, n]
        inventory[:, n + 1] = ledger.inventory
        cash[:, n + 1] = ledger.cash

    impact[:, n_steps] = impact_multiplier * as_impact(gamma, sigma, inventory[:, n_steps], 0.0)
    logger.verbose("drove %d paths over %d steps (xi=%s, gamma=%s)", n_paths, n_steps, xi, gamma)
    return DrivenMarket(path_indices=path_indices, times=times, prices=prices, impact=impact,
                        deterministic=deterministic, driver_inventory=inventory, driver_cash=cash,
                        ask_premia=ask_premia, bid_premia=bid_premia, reservations=reservations)


def simulate_price_path(market, xi, gamma, driver, seed, path_index=0, **kwargs):
    """Single-path closed loop; returns the price formation series with the driver inventory attached."""
    driven = drive_market(market, xi, gamma, driver, seed, [path_index], **kwargs)
    return driven.decomposition(0)
