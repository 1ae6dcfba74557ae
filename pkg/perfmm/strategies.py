# Licensed under the MIT license.

"""
perfmm.strategies - quote decisions for the four market-making strategies.

Every decision is symmetric about its reservation price r, i.e. r = s + (ask - bid) / 2.
Negative premia are passed through; execution turns them into market orders.
"""

from dataclasses import dataclass

import numpy as np

from . import constants, dynamics, utils
from .handler import quoting_policy

REGIME_ALIGNED_BUY = "aligned-buy"
REGIME_ALIGNED_SELL = "aligned-sell"
REGIME_ARBITRAGE_BUY = "arbitrage-buy"
REGIME_ARBITRAGE_SELL = "arbitrage-sell"


class DegenerateHorizonError(ValueError):
    """Thresholds are unbounded at the horizon (E_xi = 0)."""


@dataclass(frozen=True)
class QuoteDecision:
    reservation: object
    ask_premium: object
    bid_premium: object
    spread: object

    def quotes(self, s):
        """Ask and bid prices around mid-price s."""
        return s + self.ask_premium, s - self.bid_premium


@dataclass(frozen=True)
class HjbCoefficients:
    theta1: object
    theta2: object


@dataclass(frozen=True)
class ThetaParams:
    """Multipliers on the price, market-inventory and own-inventory terms of the reservation price."""

    theta0: float = 1.0
    theta1: float = 1.0
    theta2: float = 1.0

    @staticmethod
    def identity():
        return ThetaParams(1.0, 1.0, 1.0)

    @staticmethod
    def from_array(values):
        theta0, theta1, theta2 = (float(v) for v in values)
        return ThetaParams(theta0, theta1, theta2)

    def as_array(self):
        return np.array([self.theta0, self.theta1, self.theta2])

    def within(self, lower, upper):
        return bool(np.all(self.as_array() >= np.asarray(lower)) and np.all(self.as_array() <= np.asarray(upper)))


@dataclass(frozen=True)
class ThresholdReport:
    h: float
    lower: float
    upper: float
    critical: float
    regime: str


def _decision(s, reservation, spread):
    skew = reservation - np.asarray(s, dtype=float)
    spread = np.asarray(spread, dtype=float)
    ask = 0.5 * spread + skew
    # bid is the remainder so ask + bid reproduces the model spread bit for bit
    bid = spread - ask
    spread = np.broadcast_to(spread, ask.shape).copy()
    return QuoteDecision(reservation=utils.as_output(reservation), ask_premium=utils.as_output(ask),
                         bid_premium=utils.as_output(bid), spread=utils.as_output(spread))


def base_half_spread(gamma, k):
    """(1 / gamma) ln(1 + gamma / k), the spread term shared by every strategy."""
    return np.log1p(gamma / k) / gamma


def as_quotes(s, q, gamma, sigma, k, tau):
    reservation = s - gamma * np.asarray(q, dtype=float) * sigma ** 2 * tau
    spread = 2.0 * base_half_spread(gamma, k) + gamma * sigma ** 2 * tau
    return _decision(s, reservation, spread)


def symmetric_quotes(s, gamma, k):
    return _decision(s, np.asarray(s, dtype=float), 2.0 * base_half_spread(gamma, k))


def hjb_coefficients(s, q, xi, gamma, sigma, tau):
    theta1 = dynamics.transition_law(s, q, xi, gamma, sigma, tau).mean
    theta2 = gamma * sigma ** 2 / (4.0 * xi) * np.expm1(-2.0 * xi * np.asarray(tau, dtype=float))
    return HjbCoefficients(theta1=theta1, theta2=utils.as_output(theta2))


def _performative_reservation(s, q, q_perf, xi, gamma, sigma, tau, theta=ThetaParams()):
    price_term = np.exp(-xi * np.asarray(tau, dtype=float)) * s
    market_term = np.asarray(q, dtype=float) * dynamics.delta_xi(xi, tau)
    own_term = np.asarray(q_perf, dtype=float) * dynamics.e_xi(xi, tau)
    return theta.theta0 * price_term - gamma * sigma ** 2 * (theta.theta1 * market_term + theta.theta2 * own_term)


def performative_spread(xi, gamma, sigma, k, tau):
    return utils.as_output(2.0 * base_half_spread(gamma, k) + gamma * sigma ** 2 * dynamics.e_xi(xi, tau))


def performative_quotes(s, q, q_perf, xi, gamma, sigma, k, tau):
    reservation = _performative_reservation(s, q, q_perf, xi, gamma, sigma, tau)
    return _decision(s, reservation, performative_spread(xi, gamma, sigma, k, tau))


def theta_quotes(s, q, q_perf, xi, gamma, sigma, k, tau, theta):
    reservation = _performative_reservation(s, q, q_perf, xi, gamma, sigma, tau, theta)
    return _decision(s, reservation, performative_spread(xi, gamma, sigma, k, tau))


def critical_thresholds(s, q, xi, gamma, sigma, tau, q_perf=0):
    """
    Thresholds h -+ |q| Delta_xi / E_xi on the performative inventory, and the regime of the
    performative agent relative to the A&S driver. Equality is classified as aligned.
    """
    e = dynamics.e_xi(xi, tau)
    if not e > 0:
        raise DegenerateHorizonError("critical thresholds need tau > 0, got tau={}".format(tau))
    delta = dynamics.delta_xi(xi, tau)
    h = -s * -np.expm1(-xi * tau) / (gamma * sigma ** 2 * e)
    width = abs(q) * delta / e

    reservation = _performative_reservation(s, q, q_perf, xi, gamma, sigma, tau)
    driver_side = "sell" if q > 0 else ("buy" if q < 0 else None)
    if reservation < s:
        side = "sell"
    elif reservation > s:
        side = "buy"
    else:
        side = driver_side or ("sell" if q * delta + q_perf * e >= 0 else "buy")
    stance = "aligned" if driver_side in (None, side) else "arbitrage"
    return ThresholdReport(h=float(h), lower=float(h - width), upper=float(h + width),
                           critical=float(h - q * delta / e), regime="{}-{}".format(stance, side))


def log_value_function(x, s, q_perf, q, xi, gamma, sigma, tau):
    """log(-u) for the exponential-utility value function."""
    mean = dynamics.transition_law(s, q, xi, gamma, sigma, tau).mean
    variance_term = gamma ** 2 * np.asarray(q_perf, dtype=float) ** 2 * sigma ** 2 / 2.0 * dynamics.e_xi(xi, tau)
    return utils.as_output(-gamma * np.asarray(x, dtype=float) - gamma * q_perf * mean + variance_term)


def value_function(x, s, q_perf, q, xi, gamma, sigma, tau):
    """Exponential-utility value function; -inf when the exponent overflows."""
    with np.errstate(over="ignore"):
        return utils.as_output(-np.exp(log_value_function(x, s, q_perf, q, xi, gamma, sigma, tau)))


class QuotingPolicy(object):
    """A strategy bound to its model parameters."""

    label = None

    def __init__(self, xi=None, gamma=None, sigma=None, k=None, theta=None):
        self.xi = xi
        self.gamma = gamma
        self.sigma = sigma
        self.k = k
        self.theta = theta or ThetaParams.identity()

    def quote(self, s, tau, q_driver, q_self):
        """Quote decision at mid-price s with tau to the horizon."""
        raise NotImplementedError


@quoting_policy(constants.STRATEGY_AS)
class InventoryPolicy(QuotingPolicy):
    label = constants.STRATEGY_AS

    def quote(self, s, tau, q_driver, q_self):
        return as_quotes(s, q_self, self.gamma, self.sigma, self.k, tau)


@quoting_policy(constants.STRATEGY_SYMMETRIC)
class SymmetricPolicy(QuotingPolicy):
    label = constants.STRATEGY_SYMMETRIC

    def quote(self, s, tau, q_driver, q_self):
        return symmetric_quotes(s, self.gamma, self.k)


@quoting_policy(constants.STRATEGY_PERFORMATIVE)
class PerformativePolicy(QuotingPolicy):
    label = constants.STRATEGY_PERFORMATIVE

    def quote(self, s, tau, q_driver, q_self):
        return performative_quotes(s, q_driver, q_self, self.xi, self.gamma, self.sigma, self.k, tau)


@quoting_policy(constants.STRATEGY_THETA)
class ThetaPolicy(QuotingPolicy):
    label = constants.STRATEGY_THETA

    def quote(self, s, tau, q_driver, q_self):
        return theta_quotes(s, q_driver, q_self, self.xi, self.gamma, self.sigma, self.k, tau, self.theta)
