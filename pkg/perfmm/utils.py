# Licensed under the MIT license.

"""
perfmm.utils - misc utilities for perfmm
"""

import os
import shutil
import tempfile
from contextlib import contextmanager

import numpy as np

from . import constants


def make_sure(bool_val, error_msg, *args):
    if not bool_val:
        raise ValueError("make_sure failure: " + error_msg % args)


def is_scalar(value):
    return np.ndim(value) == 0


def as_output(value):
    """Return a python float for 0-d results so scalar callers never see numpy 0-d arrays."""
    if is_scalar(value):
        return float(value)
    return value


def step_count(horizon, dt):
    """Number of grid steps N = round(T / dt); None if the grid does not tile the horizon."""
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > constants.GRID_TOLERANCE * horizon:
        return None
    return n


def parse_bool(val):
    if val is None:
        return False
    return val.lower() in ("yes", "true", "t", "y", "1")


_is_debug_mode = parse_bool(os.environ.get(constants.ENV_PERFMM_DEBUG_MODE))


def is_debug_mode():
    return _is_debug_mode


def set_debug_mode(enabled):
    global _is_debug_mode
    _is_debug_mode = enabled


def get_temp_directory():
    return os.environ.get(constants.ENV_PERFMM_TEMP_DIRECTORY, tempfile.mkdtemp())


def delete_directory(path):
    if os.path.exists(path):
        shutil.rmtree(path)


@contextmanager
def atomic_output(path, mode="w"):
    """Write to a temporary file next to path and rename it into place on success."""
    dir_name = os.path.dirname(path)
    if dir_name:
        os.makedirs(dir_name, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix="." + os.path.basename(path) + ".", dir=dir_name or ".")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as f:
            yield f
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def remove_files(paths):
    for path in paths:
        if path and os.path.exists(path):
            os.remove(path)
