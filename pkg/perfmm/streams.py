# Licensed under the MIT license.

"""
Per-path noise substreams.

Every random draw comes from a generator keyed by (master_seed, path_index, stream tag), so the
price noise of a path is shared by all strategies (common random numbers) and each agent draws its
fills from its own stream. The keying scheme is stable across releases.
"""

import threading
from contextlib import contextmanager

import numpy as np

from . import constants, utils


class StreamAccountant(object):
    """Records which (master_seed, path_index, tag) streams were opened."""

    def __init__(self):
        self._lock = threading.Lock()
        self.opened = set()

    def record(self, master_seed, path_index, tag):
        with self._lock:
            self.opened.add((int(master_seed), int(path_index), tag))

    @property
    def seeds(self):
        return {seed for seed, _, _ in self.opened}


_accountants = []
_accountants_lock = threading.Lock()


@contextmanager
def accounting():
    """Collect every stream opened inside the context."""
    accountant = StreamAccountant()
    with _accountants_lock:
        _accountants.append(accountant)
    try:
        yield accountant
    finally:
        with _accountants_lock:
            _accountants.remove(accountant)


def tag_code(tag):
    utils.make_sure(tag in constants.STREAM_TAGS, "unknown stream tag %s", tag)
    return constants.STREAM_TAGS[tag]


def fill_tag(label):
    """Stream tag of an agent's fill draws."""
    return "fills:" + label


def path_generator(master_seed, path_index, tag):
    code = tag_code(tag)
    utils.make_sure(0 <= int(master_seed) < 2 ** 64, "master seed must be an unsigned 64-bit value")
    for accountant in list(_accountants):
        accountant.record(master_seed, path_index, tag)
    seed_seq = np.random.SeedSequence([int(master_seed), int(path_index), code])
    return np.random.Generator(np.random.PCG64(seed_seq))


def normal_block(master_seed, path_indices, tag, n_steps):
    """Standard normal draws, one row of n_steps per path."""
    block = np.empty((len(path_indices), n_steps))
    for row, path_index in enumerate(path_indices):
        block[row] = path_generator(master_seed, path_index, tag).standard_normal(n_steps)
    return block


def uniform_block(master_seed, path_indices, tag, n_steps):
    """Uniform [0, 1) draws shaped [path, step, side] with side 0 = ask, 1 = bid."""
    block = np.empty((len(path_indices), n_steps, 2))
    for row, path_index in enumerate(path_indices):
        block[row] = path_generator(master_seed, path_index, tag).random((n_steps, 2))
    return block
