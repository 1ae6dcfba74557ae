# Licensed under the MIT license.
"""perfmm package."""

__all__ = ["utils", "dynamics", "execution", "strategies", "harness", "tuner", "config"]

from .version import version as __version__
from . import verbose_logging as logging
from perfmm import utils, dynamics, execution, strategies, harness, tuner, config  # pylint: disable=wrong-import-order
