# Licensed under the MIT license.

"""
perfmm.execution - probabilistic fills, cash/inventory ledgers and mark-to-market PnL.

A quote with premium delta > 0 fills with a probability derived from the intensity
A * exp(-k * delta) over one step. A premium <= 0 is a market order: it executes at the
mid-price with probability one. Every fill trades one share.
"""

from collections import namedtuple
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import constants, utils

ASK = "ask"
BID = "bid"

Fill = namedtuple("Fill", "step, side, price")


@dataclass(frozen=True)
class FillModel:
    order_flow_scale: float
    book_decay: float
    dt: float
    rule: str = constants.FILL_LINEAR

    @staticmethod
    def from_market(market):
        return FillModel(market.order_flow_scale, market.book_decay, market.step, market.fill_rule)

    def probability(self, premium):
        return fill_probability(premium, self.order_flow_scale, self.book_decay, self.dt, self.rule)


def fill_probability(premium, order_flow_scale, book_decay, dt, rule=constants.FILL_LINEAR):
    utils.make_sure(dt > 0, "dt must be > 0, got %s", dt)
    intensity = order_flow_scale * np.exp(-book_decay * np.maximum(premium, 0.0))
    if rule == constants.FILL_LINEAR:
        prob = np.minimum(1.0, intensity * dt)
    elif rule == constants.FILL_EXPONENTIAL:
        prob = -np.expm1(-intensity * dt)
    else:
        raise ValueError("unknown fill rule " + str(rule))
    return utils.as_output(prob)


def execute_sides(ask_premium, bid_premium, s, u_ask, u_bid, model):
    """
    Resolve both sides of a quote against the step's uniforms.
    Returns (ask_filled, ask_price, bid_filled, bid_price); market orders trade at s.
    """
    ask_premium = np.asarray(ask_premium, dtype=float)
    bid_premium = np.asarray(bid_premium, dtype=float)
    ask_market = ask_premium <= 0
    bid_market = bid_premium <= 0
    ask_filled = ask_market | (u_ask < model.probability(ask_premium))
    bid_filled = bid_market | (u_bid < model.probability(bid_premium))
    ask_price = s + np.where(ask_market, 0.0, ask_premium)
    bid_price = s - np.where(bid_market, 0.0, bid_premium)
    return ask_filled, ask_price, bid_filled, bid_price


@dataclass
class AgentLedger:
    """Single-path ledger: cash, signed inventory, fill history and mark-to-market series."""

    cash: float = 0.0
    inventory: int = 0
    initial_inventory: int = 0
    fills: List[Fill] = field(default_factory=list)
    pnl_series: List[float] = field(default_factory=list)

    @staticmethod
    def open(initial_inventory=0, cash=0.0):
        return AgentLedger(cash=cash, inventory=initial_inventory, initial_inventory=initial_inventory)

    def fill_count(self, side):
        return sum(1 for f in self.fills if f.side == side)

    def record_mark(self, s):
        self.pnl_series.append(mark_to_market(self, s))


def step_fills(decision, ledger, s, uniforms, model, step=None):
    """Apply one step of fills to a single-path ledger. Ask is resolved before bid; the two commute."""
    u_ask, u_bid = uniforms
    utils.make_sure(0 <= u_ask < 1 and 0 <= u_bid < 1, "uniforms must be in [0, 1), got %s", uniforms)
    ask_filled, ask_price, bid_filled, bid_price = execute_sides(
        decision.ask_premium, decision.bid_premium, s, u_ask, u_bid, model)
    if ask_filled:
        ledger.cash += float(ask_price)
        ledger.inventory -= 1
        ledger.fills.append(Fill(step, ASK, float(ask_price)))
    if bid_filled:
        ledger.cash -= float(bid_price)
        ledger.inventory += 1
        ledger.fills.append(Fill(step, BID, float(bid_price)))
    return ledger


def mark_to_market(ledger, s):
    return utils.as_output(ledger.cash + ledger.inventory * np.asarray(s, dtype=float))


class LedgerBatch(object):
    """Vectorised ledgers for a batch of independent paths."""

    def __init__(self, n_paths, initial_inventory=0):
        self.cash = np.zeros(n_paths)
        self.inventory = np.full(n_paths, initial_inventory, dtype=np.int64)
        self.ask_fills = np.zeros(n_paths, dtype=np.int64)
        self.bid_fills = np.zeros(n_paths, dtype=np.int64)

    def execute(self, decision, s, uniforms, model):
        ask_filled, ask_price, bid_filled, bid_price = execute_sides(
            decision.ask_premium, decision.bid_premium, s, uniforms[:, 0], uniforms[:, 1], model)
        self.cash += np.where(ask_filled, ask_price, 0.0) - np.where(bid_filled, bid_price, 0.0)
        self.inventory += bid_filled.astype(np.int64) - ask_filled.astype(np.int64)
        self.ask_fills += ask_filled
        self.bid_fills += bid_filled
        return ask_filled, bid_filled

    def mark(self, s):
        return self.cash + self.inventory * s


@dataclass
class Replay:
    cash: np.ndarray
    inventory: np.ndarray
    pnl: np.ndarray


def replay_ledger(ask_premia, bid_premia, prices, uniforms, model, initial_inventory=0):
    """
    Rebuild ledgers from recorded premia [path, step], prices [path, step + 1] and uniforms
    [path, step, side]. pnl[:, n + 1] marks the post-fill position at prices[:, n + 1].
    """
    ask_premia = np.atleast_2d(ask_premia)
    bid_premia = np.atleast_2d(bid_premia)
    prices = np.atleast_2d(prices)
    n_paths, n_steps = ask_premia.shape
    utils.make_sure(prices.shape == (n_paths, n_steps + 1), "prices must have one more column than premia")
    cash = np.zeros((n_paths, n_steps + 1))
    inventory = np.zeros((n_paths, n_steps + 1), dtype=np.int64)
    inventory[:, 0] = initial_inventory
    batch = LedgerBatch(n_paths, initial_inventory)
    decision = _Premia(None, None)
    for n in range(n_steps):
        decision.ask_premium = ask_premia[:, n]
        decision.bid_premium = bid_premia[:, n]
        batch.execute(decision, prices[:, n], uniforms[:, n, :], model)
        cash[:, n + 1] = batch.cash
        inventory[:, n + 1] = batch.inventory
    return Replay(cash=cash, inventory=inventory, pnl=cash + inventory * prices)


class _Premia(object):
    def __init__(self, ask_premium, bid_premium):
        self.ask_premium = ask_premium
        self.bid_premium = bid_premium
