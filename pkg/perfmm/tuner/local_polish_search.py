# Licensed under the MIT license.

"""Local Polish Search.
   Bounded Nelder-Mead simplex started from the incumbent.
"""

import numpy as np
from scipy import optimize

from .search_base import SearchPhaseBase

# initial simplex edge as a fraction of the box width
_SIMPLEX_SCALE = 0.1


class LocalPolishSearch(SearchPhaseBase):
    """Derivative-free local refinement around the incumbent."""

    def _search(self, problem, evaluations):
        start = problem.incumbent.copy()
        simplex = self._initial_simplex(start, problem.lower, problem.upper)
        optimize.minimize(lambda x: -problem.evaluate(x), start, method="Nelder-Mead",
                          bounds=list(zip(problem.lower, problem.upper)),
                          options={"maxfev": evaluations, "initial_simplex": simplex,
                                   "xatol": 1e-4, "fatol": 1e-8})

    @staticmethod
    def _initial_simplex(start, lower, upper):
        width = upper - lower
        simplex = [start]
        for i, step in enumerate(_SIMPLEX_SCALE * width):
            vertex = start.copy()
            # step towards the side of the box with more room
            vertex[i] += step if upper[i] - start[i] >= start[i] - lower[i] else -step
            simplex.append(np.clip(vertex, lower, upper))
        return np.array(simplex)
