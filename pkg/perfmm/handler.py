# Licensed under the MIT license.

"""Quoting policy registry."""

import collections

from perfmm import utils

# pylint: disable=invalid-name


class quoting_policy:
    """Class to implement the decorator to register quoting policies under a strategy label."""

    _POLICIES = collections.OrderedDict()

    def __init__(self, name, **kwargs):
        """Called decorator from decorator.

        :param name: The strategy label, or a list of labels sharing one policy class.
        :param kwargs: Dictionary that is passed to the policy constructor.
        """
        if not isinstance(name, list):
            name = [name]
        self.name = name
        self.kwargs = kwargs

    def __call__(self, cls):
        for name in self.name:
            utils.make_sure(name not in quoting_policy._POLICIES, "policy %s registered twice", name)
            quoting_policy._POLICIES[name] = (cls, self.kwargs)
        return cls

    @staticmethod
    def get_policies():
        return quoting_policy._POLICIES

    @staticmethod
    def create(name, **params):
        """Instantiate the policy registered under name.

        :param name: The strategy label.
        :param params: Model parameters (xi, gamma, sigma, k, theta); each policy takes what it needs.
        """
        entry = quoting_policy._POLICIES.get(name)
        utils.make_sure(entry is not None, "no quoting policy registered for %s", name)
        cls, kwargs = entry
        merged = dict(kwargs)
        merged.update(params)
        return cls(**merged)
