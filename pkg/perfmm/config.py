# Licensed under the MIT license.

"""
perfmm.config - load and validate the experiment configuration file.

The file is YAML with the sections market, experiment, tune and decompose; field names
mirror MarketParams, ExperimentConfig and TuneConfig. A missing section or key takes its
default; an unknown key, a key set to null or a value of the wrong type is an error that
names the field and its line.
"""

import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import yaml

from . import constants, dynamics, harness, tuner, utils
from . import verbose_logging as logging
from .strategies import ThetaParams

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid configuration; str() is "<path>:<line>: <message>"."""

    def __init__(self, message, path=None, line=None):
        super(ConfigError, self).__init__(message)
        self.message = message
        self.path = path
        self.line = line

    def __str__(self):
        location = [str(p) for p in (self.path, self.line) if p is not None]
        return ":".join(location + [" " + self.message if location else self.message])


class _FieldError(ValueError):
    pass


class _Section(dict):
    """Mapping that remembers the line of each of its keys."""

    def __init__(self):
        super(_Section, self).__init__()
        self.line = None
        self.lines = {}


class _LineLoader(yaml.SafeLoader):  # pylint: disable=too-many-ancestors
    pass


def _construct_section(loader, node):
    loader.flatten_mapping(node)
    section = _Section()
    section.line = node.start_mark.line + 1
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        line = key_node.start_mark.line + 1
        if key in section:
            raise ConfigError("duplicate key '{}'".format(key), line=line)
        section[key] = loader.construct_object(value_node, deep=True)
        section.lines[key] = line
    return section


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_section)


@dataclass(frozen=True)
class DecomposeConfig:
    """The single cell a decompose run simulates."""

    gamma: float = 0.5
    xi: float = 10.0
    path_index: int = 0

    def __post_init__(self):
        dynamics.RiskParams(self.gamma)
        dynamics.PerformativityParams(self.xi)
        utils.make_sure(self.path_index >= 0, "decompose path_index must be >= 0, got %s", self.path_index)


@dataclass
class RunConfig:
    experiment: harness.ExperimentConfig = field(default_factory=harness.ExperimentConfig)
    tune: tuner.TuneConfig = field(default_factory=tuner.TuneConfig)
    decompose: DecomposeConfig = field(default_factory=DecomposeConfig)
    snapshot: dict = field(default_factory=dict)
    path: Optional[str] = None


# value converters; each raises _FieldError with a message that omits the field name

def _number(value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _FieldError("expected a number, got {!r}".format(value))
    return float(value)


def _integer(value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise _FieldError("expected an integer, got {!r}".format(value))
    return value


def _string(value):
    if not isinstance(value, str):
        raise _FieldError("expected a string, got {!r}".format(value))
    return value


def _seed(value):
    value = _integer(value)
    if not 0 <= value < 2 ** 64:
        raise _FieldError("expected an unsigned 64-bit seed, got {}".format(value))
    return value


def _boolean(value):
    if not isinstance(value, bool):
        raise _FieldError("expected true or false, got {!r}".format(value))
    return value


def _choice(choices):
    def convert(value):
        if value not in choices:
            raise _FieldError("expected one of {}, got {!r}".format(", ".join(choices), value))
        return value
    return convert


def _number_list(value):
    if not isinstance(value, list) or not value:
        raise _FieldError("expected a non-empty list of numbers, got {!r}".format(value))
    return tuple(_number(v) for v in value)


def _strategy_list(value):
    if not isinstance(value, list) or not value:
        raise _FieldError("expected a non-empty list of strategies, got {!r}".format(value))
    return tuple(_choice(constants.ALL_STRATEGIES)(v) for v in value)


def _box_bound(value):
    if isinstance(value, list):
        if len(value) != 3:
            raise _FieldError("expected three bounds, got {}".format(len(value)))
        return tuple(_number(v) for v in value)
    return (_number(value),) * 3


def _theta(value):
    if isinstance(value, list):
        if len(value) != 3:
            raise _FieldError("expected [theta0, theta1, theta2], got {!r}".format(value))
        return ThetaParams.from_array([_number(v) for v in value])
    if isinstance(value, dict):
        unknown = sorted(set(value) - {"theta0", "theta1", "theta2"})
        if unknown:
            raise _FieldError("unknown theta component(s) {}".format(", ".join(map(str, unknown))))
        return ThetaParams(**{k: _number(v) for k, v in value.items()})
    raise _FieldError("expected a list or mapping of three multipliers, got {!r}".format(value))


def _xi_grid(value):
    if not isinstance(value, dict):
        raise _FieldError("expected a mapping with low, high and count")
    unknown = sorted(set(value) - {"low", "high", "count", "spacing"})
    if unknown:
        raise _FieldError("unknown key(s) {}".format(", ".join(map(str, unknown))))
    missing = [k for k in ("low", "high", "count") if value.get(k) is None]
    if missing:
        raise _FieldError("missing {}".format(", ".join(missing)))
    low, high, count = _number(value["low"]), _number(value["high"]), _integer(value["count"])
    spacing = _choice(["log", "linear"])(value.get("spacing", "log"))
    if not 0 < low <= high or count < 1:
        raise _FieldError("expected 0 < low <= high and count >= 1")
    grid = np.geomspace(low, high, count) if spacing == "log" else np.linspace(low, high, count)
    return tuple(grid.tolist())


_MARKET_FIELDS = {
    "order_flow_scale": _number,
    "book_decay": _number,
    "volatility": _number,
    "horizon": _number,
    "step": _number,
    "fill_rule": _choice(constants.POSSIBLE_FILL_RULES),
}

_EXPERIMENT_FIELDS = {
    "gammas": _number_list,
    "xis": _number_list,
    "xi_grid": _xi_grid,
    "paths_per_cell": _integer,
    "master_seed": _seed,
    "strategies": _strategy_list,
    "theta_params": _theta,
    "theta_table": _string,
    "impact_multiplier": _number,
    "stepper": _choice(constants.POSSIBLE_STEPPERS),
    "initial_price": _number,
    "initial_inventory": _integer,
    "display_offset": _number,
    "as_as_shadow": _boolean,
    "zero_noise": _boolean,
}

_TUNE_FIELDS = {
    "lower": _box_bound,
    "upper": _box_bound,
    "budget": _integer,
    "train_paths": _integer,
    "test_paths": _integer,
    "train_seed": _seed,
    "test_seed": _seed,
    "objective": _choice(constants.POSSIBLE_OBJECTIVES),
}

_DECOMPOSE_FIELDS = {
    "gamma": _number,
    "xi": _number,
    "path_index": _integer,
}

_SECTIONS = {
    "market": _MARKET_FIELDS,
    "experiment": _EXPERIMENT_FIELDS,
    "tune": _TUNE_FIELDS,
    "decompose": _DECOMPOSE_FIELDS,
}


def _load_yaml(text, path):
    try:
        document = yaml.load(text, Loader=_LineLoader)
    except ConfigError as ex:
        ex.path = path
        raise
    except yaml.MarkedYAMLError as ex:
        line = ex.problem_mark.line + 1 if ex.problem_mark is not None else None
        raise ConfigError("malformed YAML: {}".format(ex.problem), path, line)
    except yaml.YAMLError as ex:
        raise ConfigError("malformed YAML: {}".format(ex), path)
    if document is None:
        return _Section()
    if not isinstance(document, _Section):
        raise ConfigError("top level must be a mapping of sections", path, 1)
    return document


def _read_section(document, name, path):
    """Convert the raw values of one section; returns (values, line of the section)."""
    fields = _SECTIONS[name]
    if name not in document:
        return {}, None
    raw = document[name]
    line = document.lines[name]
    if not isinstance(raw, _Section):
        raise ConfigError("section '{}' must be a mapping".format(name), path, line)
    values = {}
    for key, value in raw.items():
        key_line = raw.lines[key]
        if key not in fields:
            raise ConfigError("unknown key '{}.{}'".format(name, key), path, key_line)
        if value is None:
            raise ConfigError("'{}.{}' is set but empty".format(name, key), path, key_line)
        try:
            values[key] = fields[key](value)
        except _FieldError as ex:
            raise ConfigError("'{}.{}': {}".format(name, key, ex), path, key_line)
    return values, line


def _build(factory, values, path, line):
    try:
        return factory(**values)
    except ValueError as ex:
        raise ConfigError(str(ex), path, line)


def load_config(path=None, text=None, **overrides):
    """
    Load a run configuration from a YAML file (or text). Keyword overrides replace experiment
    values after parsing, e.g. master_seed from --seed; None overrides are ignored.
    """
    if text is None and path is not None:
        try:
            with open(path, "r") as f:
                text = f.read()
        except (IOError, OSError) as ex:
            raise ConfigError("cannot read config: {}".format(ex), path)
    document = _load_yaml(text or "", path)

    for key, line in document.lines.items():
        if key not in _SECTIONS:
            raise ConfigError("unknown section '{}'".format(key), path, line)

    market_values, market_line = _read_section(document, "market", path)
    experiment_values, experiment_line = _read_section(document, "experiment", path)
    tune_values, tune_line = _read_section(document, "tune", path)
    decompose_values, decompose_line = _read_section(document, "decompose", path)

    if "xis" in experiment_values and "xi_grid" in experiment_values:
        raise ConfigError("set either 'experiment.xis' or 'experiment.xi_grid', not both", path,
                          document["experiment"].lines["xi_grid"])
    if "xi_grid" in experiment_values:
        experiment_values["xis"] = experiment_values.pop("xi_grid")

    theta_table_path = experiment_values.pop("theta_table", None)
    if theta_table_path is not None:
        if path is not None and not os.path.isabs(theta_table_path):
            theta_table_path = os.path.join(os.path.dirname(os.path.abspath(path)), theta_table_path)
        try:
            experiment_values["theta_table"] = tuner.read_theta_table(theta_table_path)
        except (IOError, OSError, ValueError) as ex:
            raise ConfigError("'experiment.theta_table': {}".format(ex), path,
                              document["experiment"].lines["theta_table"])
        logger.info("Loaded %d tuned thetas from %s", len(experiment_values["theta_table"]), theta_table_path)

    experiment_values.update({k: v for k, v in overrides.items() if v is not None})

    market = _build(dynamics.MarketParams, market_values, path, market_line)
    try:
        market.step_count  # pylint: disable=pointless-statement
    except dynamics.GridError as ex:
        raise ConfigError(str(ex), path, market_line)
    experiment = _build(harness.ExperimentConfig, dict(experiment_values, market=market), path, experiment_line)
    tune_config = _build(tuner.TuneConfig, tune_values, path, tune_line)
    decompose = _build(DecomposeConfig, decompose_values, path, decompose_line)

    snapshot = _snapshot(experiment, tune_config, decompose, theta_table_path)
    return RunConfig(experiment=experiment, tune=tune_config, decompose=decompose, snapshot=snapshot, path=path)


def _snapshot(experiment, tune_config, decompose, theta_table_path):
    """Fully resolved, JSON-ready copy of the configuration."""
    experiment_values = {
        "gammas": list(experiment.gammas),
        "xis": list(experiment.xis),
        "paths_per_cell": experiment.paths_per_cell,
        "master_seed": experiment.master_seed,
        "strategies": list(experiment.strategies),
        "theta_params": asdict(experiment.theta_params) if experiment.theta_params else None,
        "theta_table": theta_table_path,
        "impact_multiplier": experiment.impact_multiplier,
        "stepper": experiment.stepper,
        "initial_price": experiment.initial_price,
        "initial_inventory": experiment.initial_inventory,
        "display_offset": experiment.display_offset,
        "as_as_shadow": experiment.as_as_shadow,
        "zero_noise": experiment.zero_noise,
    }
    tune_values = asdict(tune_config)
    tune_values["lower"] = list(tune_config.lower)
    tune_values["upper"] = list(tune_config.upper)
    return {
        "market": asdict(experiment.market),
        "experiment": experiment_values,
        "tune": tune_values,
        "decompose": asdict(decompose),
    }
