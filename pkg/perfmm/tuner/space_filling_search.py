# Licensed under the MIT license.

"""Space Filling Search.
   Evaluate a scrambled Halton design over the theta box.
"""

import math

from scipy.stats import qmc

from .search_base import SearchPhaseBase


class SpaceFillingSearch(SearchPhaseBase):
    """Quasi-random sampling of the search box."""

    def allowance(self, budget, used):
        # half of the budget, the identity evaluation included
        return int(math.ceil(budget / 2.0)) - used

    def _search(self, problem, evaluations):
        sampler = qmc.Halton(d=problem.dimension, scramble=True, seed=self.seed)
        unit = sampler.random(evaluations)
        candidates = problem.lower + unit * (problem.upper - problem.lower)
        for candidate in candidates:
            problem.evaluate(candidate)
