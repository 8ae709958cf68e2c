# Multiple contrast tests for right-censored survival data
# Copyright (C) 2024 survcontrasts developers

# This program is free software; you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software
# Foundation; either version 2 of the License, or (at your option) any later
# version.

# This program is distributed in the hope that it will be useful, but WITHOUT
# ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or
# FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more
# details.

# You should have received a copy of the GNU General Public License along with
# this program; if not, see https://www.gnu.org/licenses/gpl-2.0.html


"""
Running one simulation study per row of a scenario table

A scenario table is a list of records (typically rows of a CSV file) whose
keys are paths into the study configuration such as ``scenario/n`` or
``study/contrasts``. A path segment which is an integer indexes a list,
e.g. ``scenario/n/1`` changes the size of the second group. The ``name`` key
labels the row.
"""

import copy
import csv
import json

from .design import ConfigError
from .outputs import MuteReporter
from .simulation import run_study_from_config

STUDY_SECTIONS = ("study", "scenario", "bootstrap", "monte_carlo")


def merge_config(base, override):
    """Merge override into base in place, descending into dictionaries"""
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            merge_config(base[key], value)
        else:
            base[key] = copy.deepcopy(value)


def set_config_value(config, path, value):
    """Place value at a key/subkey path of a nested study configuration

    :param config: Nested configuration, modified in place
    :param path: Path such as ``scenario/censoring`` or ``scenario/n/0``
    :param value: New value, dictionaries are merged into existing ones
    """
    keys = path.split("/")
    if keys[0] == "name" and len(keys) == 1:
        config["name"] = value
        return
    if keys[0] not in STUDY_SECTIONS:
        raise ConfigError(
            "Unknown configuration section in scenario table: {path}".format(**locals())
        )
    node = config
    for key in keys[:-1]:
        node = node.setdefault(key, {}) if isinstance(node, dict) else node[int(key)]
    last = keys[-1]
    if isinstance(node, list):
        index = int(last)
        if not -len(node) <= index < len(node):
            raise ConfigError(
                "Index {index} out of range in scenario table column {path}".format(**locals())
            )
        node[index] = value
    elif isinstance(value, dict) and isinstance(node.get(last), dict):
        merge_config(node[last], value)
    else:
        node[last] = value


def update_config(config, record):
    """Copy of config with all key/subkey values of a record applied"""
    config = copy.deepcopy(config)
    for path, value in record.items():
        set_config_value(config, path, copy.deepcopy(value))
    return config


def run_scenarios(config, scenario_table, seed, threads=1, reporter=None):
    """Run a simulation study for each row of a scenario table

    All rows use the same master seed, so rows which differ only in the
    procedure settings see identical simulated data.

    :param config: Base study configuration (``study``, ``scenario``,
        ``bootstrap``, ``monte_carlo``)
    :param scenario_table: List of records with key/subkey keys
    :param seed: Master seed
    :param threads: Number of joblib workers for the runs of each study
    :returns: List of tuples (study report, configuration), one per row
    """
    reporter = reporter or MuteReporter()
    results = []
    for record in scenario_table:
        scenario_config = update_config(config, record)
        report = run_study_from_config(
            scenario_config, seed=seed, threads=threads, reporter=reporter
        )
        results.append((report, scenario_config))
    return results


def parse_cell(text):
    """Number, JSON value, or the text itself"""
    for convert in (int, float, json.loads):
        try:
            return convert(text)
        except ValueError:
            continue
    return text


def load_scenario_table(filename):
    """Load a CSV scenario table into a list of records

    Empty cells are left out so that they do not override the base configuration.
    """
    with open(filename, newline="") as file:
        return [
            {key: parse_cell(value) for key, value in row.items() if value not in (None, "")}
            for row in csv.DictReader(file)
        ]
