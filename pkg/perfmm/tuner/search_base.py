# Licensed under the MIT license.

"""Search Phase Base"""

from .. import logging, utils


class BudgetExhausted(Exception):
    """Raised by the tuning problem once every allowed evaluation has been spent."""


class SearchPhaseBase(object):
    """One phase of the derivative-free theta search.
    """

    def __init__(self, seed=0):
        self.seed = seed
        self._logger = logging.getLogger('.'.join(__name__.split('.')[:-1] + [self.__class__.__name__]))

    @property
    def logger(self):
        return self._logger

    @property
    def is_debug_mode(self):
        return utils.is_debug_mode()

    def allowance(self, budget, used):
        """ Number of evaluations this phase may spend; by default whatever is left of the budget. """
        return budget - used

    def search(self, problem, evaluations):
        """ Spend up to `evaluations` candidate evaluations on problem; the incumbent is updated in place. """
        if evaluations <= 0:
            self.logger.verbose("no evaluations left, skip")
            return problem
        before = problem.incumbent_value
        try:
            self._search(problem, evaluations)
        except BudgetExhausted:
            self.logger.verbose("budget exhausted")
        self._print_stat_diff(before, problem.incumbent_value)
        return problem

    def _search(self, problem, evaluations):
        """ Derived class should override this function. """
        raise NotImplementedError

    def _print_stat_diff(self, before, after):
        if after > before:
            self.logger.verbose("objective %.6g -> %.6g", before, after)
        else:
            self.logger.verbose("no change")
