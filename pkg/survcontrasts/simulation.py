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
Monte Carlo evaluation of the test procedures

Data are generated from scenarios with one event-time law per group and
uniform censoring calibrated to a target proportion. A study applies
several procedures to many simulated samples and reports rejection rates.
"""

import functools
import itertools
import math

import joblib
import numpy as np
import scipy.integrate
import scipy.optimize
import scipy.stats as stats

from .design import ConfigError, dunnett, tukey
from .numerics import RngStream
from .outputs import MuteReporter
from .procedures import METHODS, get_procedure_function, method_stream
from .survdata import SurvivalSample

MAX_CENSORING = 0.3
DEFAULT_BAND_LEVEL = 0.99


class EventTimeLaw:
    """Positive event-time distribution with named parameters

    Exponential(rate), Lognormal(meanlog, sdlog), and Weibull(shape, scale).
    Laws with the same name and parameters compare equal.
    """

    def __init__(self, name, **parameters):
        if name == "exponential":
            rate = float(parameters["rate"])
            if rate <= 0:
                raise ConfigError(
                    "Exponential rate must be positive, got {rate}".format(**locals())
                )
            self.distribution = stats.expon(scale=1 / rate)
            self.parameters = (("rate", rate),)
        elif name == "lognormal":
            meanlog = float(parameters["meanlog"])
            sdlog = float(parameters["sdlog"])
            if sdlog <= 0:
                raise ConfigError(
                    "Lognormal sdlog must be positive, got {sdlog}".format(**locals())
                )
            self.distribution = stats.lognorm(s=sdlog, scale=math.exp(meanlog))
            self.parameters = (("meanlog", meanlog), ("sdlog", sdlog))
        elif name == "weibull":
            shape = float(parameters["shape"])
            scale = float(parameters["scale"])
            if shape <= 0 or scale <= 0:
                raise ConfigError(
                    "Weibull shape and scale must be positive, got {shape}, {scale}".format(
                        **locals()
                    )
                )
            self.distribution = stats.weibull_min(c=shape, scale=scale)
            self.parameters = (("shape", shape), ("scale", scale))
        else:
            raise ConfigError("Unknown event-time law: {name}".format(**locals()))
        self.name = name

    @property
    def label(self):
        """Short display form such as ``exponential(1.5)``"""
        values = ", ".join("{value:g}".format(value=value) for unused, value in self.parameters)
        return "{name}({values})".format(name=self.name, values=values)

    def draw(self, size, rng):
        """Event times from the random stream"""
        return self.distribution.rvs(size=size, random_state=rng.generator)

    def survival(self, t):
        """Survival function P(T > t)"""
        return self.distribution.sf(t)

    def __eq__(self, other):
        return isinstance(other, EventTimeLaw) and (self.name, self.parameters) == (
            other.name,
            other.parameters,
        )

    def __hash__(self):
        return hash((self.name, self.parameters))

    def __repr__(self):
        return "EventTimeLaw({label})".format(label=self.label)


def exponential(rate):
    """Exponential law with the given rate"""
    return EventTimeLaw("exponential", rate=rate)


def lognormal(meanlog, sdlog):
    """Lognormal law with log-scale mean and standard deviation"""
    return EventTimeLaw("lognormal", meanlog=meanlog, sdlog=sdlog)


def weibull(shape, scale):
    """Weibull law with the given shape and scale"""
    return EventTimeLaw("weibull", shape=shape, scale=scale)


def law_from_config(config):
    """Law from a dictionary like ``{"law": "exponential", "rate": 1.5}``"""
    parameters = dict(config)
    try:
        name = parameters.pop("law")
    except KeyError:
        raise ConfigError("Event-time law needs a 'law' key: {config}".format(**locals()))
    try:
        return EventTimeLaw(name, **parameters)
    except KeyError as error:
        raise ConfigError(
            "Missing parameter {error} for {name} law".format(error=error, name=name)
        )


def censored_fraction(law, bound):
    """P(C < T) for C uniform on (0, bound), i.e. E[min(T, bound)] / bound"""
    integral, unused_error = scipy.integrate.quad(law.survival, 0, bound, limit=200)
    return integral / bound


@functools.lru_cache(maxsize=256)
def censoring_bound(law, proportion):
    """Upper bound b of uniform censoring giving the target censored fraction

    The censored fraction falls from 1 to 0 as b grows, and b is found by
    bisection to a probability tolerance of 1e-6.
    """
    if not 0 < proportion < 1:
        raise ConfigError(
            "Censoring proportion must be in (0, 1), got {proportion}".format(**locals())
        )
    low = high = float(law.distribution.median())
    if not math.isfinite(high) or high <= 0:
        raise ConfigError("Cannot calibrate censoring for {law}".format(**locals()))
    for unused in range(200):
        if censored_fraction(law, high) <= proportion:
            break
        low = high
        high *= 2
    else:
        raise ConfigError(
            "Censoring proportion {proportion} unreachable for {law}".format(**locals())
        )
    for unused in range(200):
        if censored_fraction(law, low) >= proportion:
            break
        high = low
        low /= 2
    else:
        raise ConfigError(
            "Censoring proportion {proportion} unreachable for {law}".format(**locals())
        )

    def excess(bound):
        return censored_fraction(law, bound) - proportion

    bound = scipy.optimize.bisect(excess, low, high, xtol=1e-12 * high, maxiter=500)
    if abs(excess(bound)) > 1e-6:
        raise ConfigError(
            "Censoring calibration failed for {law} and {proportion}".format(**locals())
        )
    return bound


def _per_group(value, k, name):
    """Expand a scalar to k values or check a list has k values"""
    if np.ndim(value) == 0:
        return [value] * k
    values = list(value)
    if len(values) != k:
        raise ConfigError(
            "Expected {k} values of {name} (one per group), got {count}".format(
                k=k, name=name, count=len(values)
            )
        )
    return values


class Scenario:
    """Event-time laws, group sizes, and censoring targets of k groups

    :param name: Scenario name used in reports
    :param laws: One :class:`EventTimeLaw` per group
    :param n: Group size, a single integer or one per group
    :param censoring: Target censored fraction in [0, 0.3], single or per group
    """

    def __init__(self, name, laws, n=100, censoring=0.0):
        laws = list(laws)
        if len(laws) < 2:
            raise ConfigError("Scenario needs at least two groups")
        sizes = [int(size) for size in _per_group(n, len(laws), "n")]
        if min(sizes) < 1:
            raise ConfigError("Group sizes must be positive, got {sizes}".format(**locals()))
        targets = [float(target) for target in _per_group(censoring, len(laws), "censoring")]
        for target in targets:
            if not 0 <= target <= MAX_CENSORING:
                raise ConfigError(
                    "Censoring target must be between 0 and {maximum}, got {target}".format(
                        maximum=MAX_CENSORING, target=target
                    )
                )
        self.name = name
        self.laws = laws
        self.sizes = sizes
        self.censoring = targets

    @property
    def k(self):
        """Number of groups"""
        return len(self.laws)

    @property
    def is_null(self):
        """True when all groups share one law"""
        return all(law == self.laws[0] for law in self.laws)

    def true_null(self, j1, j2):
        """True when groups j1 and j2 (1-based) have the same law"""
        return self.laws[j1 - 1] == self.laws[j2 - 1]

    def null_variant(self, law_index=0):
        """The same scenario with every group using one of its laws"""
        return Scenario(
            "{name}-null".format(name=self.name),
            [self.laws[law_index]] * self.k,
            n=self.sizes,
            censoring=self.censoring,
        )

    def with_design(self, n=None, censoring=None):
        """The same laws with other group sizes or censoring targets"""
        return Scenario(
            self.name,
            self.laws,
            n=self.sizes if n is None else n,
            censoring=self.censoring if censoring is None else censoring,
        )

    def __repr__(self):
        return "Scenario({name}: {laws})".format(
            name=self.name, laws=", ".join(law.label for law in self.laws)
        )


def sample_scenario(scenario, rng):
    """Draw a right-censored sample from a scenario

    Groups are drawn in order. For each group the event times come first,
    then the censoring times when the target is positive.
    """
    times = []
    status = []
    groups = []
    for group, (law, size, target) in enumerate(
        zip(scenario.laws, scenario.sizes, scenario.censoring), start=1
    ):
        event_times = np.asarray(law.draw(size, rng), dtype=float)
        if target > 0:
            censoring_times = rng.uniform(0, censoring_bound(law, target), size)
            observed = np.minimum(event_times, censoring_times)
            events = event_times <= censoring_times
        else:
            observed = event_times
            events = np.ones(size, dtype=bool)
        times.append(observed)
        status.append(events.astype(int))
        groups.append(np.full(size, group))
    return SurvivalSample(np.concatenate(times), np.concatenate(status), np.concatenate(groups))


def builtin_scenarios(n=100, censoring=0.0):
    """Proportional, non-proportional, crossing, and mixed hazards scenarios

    Each is followed by its full-null variant in which all four groups use
    the first law.
    """
    alternatives = [
        Scenario("prop", [exponential(rate) for rate in (1.5, 2.5, 3.5, 4.5)], n, censoring),
        Scenario(
            "nprop",
            [lognormal(1.7, 1.7), lognormal(2.4, 1.6), lognormal(3.5, 1.7), lognormal(4.5, 1.6)],
            n,
            censoring,
        ),
        Scenario(
            "cross",
            [weibull(1.5, 5), weibull(2.5, 5), weibull(3.5, 5), weibull(4.5, 2.4)],
            n,
            censoring,
        ),
        Scenario(
            "mix",
            [lognormal(2.3, 1.7), exponential(0.05), weibull(2.4, 11.7), lognormal(3, 1.6)],
            n,
            censoring,
        ),
    ]
    scenarios = []
    for scenario in alternatives:
        scenarios.append(scenario)
        scenarios.append(scenario.null_variant())
    return scenarios


def get_scenario(name, n=100, censoring=0.0, null=False):
    """Built-in scenario by name (``prop``, ``cross-null``, ...)"""
    if null and not name.endswith("-null"):
        name = "{name}-null".format(**locals())
    for scenario in builtin_scenarios(n=n, censoring=censoring):
        if scenario.name == name:
            return scenario
    known = ", ".join(scenario.name for scenario in builtin_scenarios())
    raise ConfigError("Unknown scenario: {name} (use {known})".format(**locals()))


def scenario_from_config(config):
    """Scenario from the ``scenario`` section of a study configuration

    Either ``name`` (built-in, optionally with ``null: true``) or a list of
    ``laws`` is required. ``n`` and ``censoring`` apply to both.
    """
    n = config.get("n", 100)
    censoring = config.get("censoring", 0.0)
    if "laws" in config:
        laws = [law_from_config(law) for law in config["laws"]]
        return Scenario(config.get("name", "custom"), laws, n=n, censoring=censoring)
    if "name" not in config:
        raise ConfigError("Scenario needs a name or a list of laws")
    return get_scenario(config["name"], n=n, censoring=censoring, null=config.get("null", False))


def law_combinations(scenario, k=None):
    """Unordered assignments of the scenario's distinct laws to k groups

    Two assignments which differ only in group order count once.
    """
    k = scenario.k if k is None else k
    distinct = []
    for law in scenario.laws:
        if law not in distinct:
            distinct.append(law)
    return list(itertools.combinations_with_replacement(distinct, k))


def binomial_band(alpha, runs, level=DEFAULT_BAND_LEVEL):
    """Interval of empirical rejection rates compatible with a true rate alpha

    Central binomial interval with the given coverage, as rates.
    """
    low, high = stats.binom.interval(level, runs, alpha)
    return low / runs, high / runs


def get_contrasts(name, k):
    """Dunnett or Tukey contrasts by name"""
    if name == "dunnett":
        return dunnett(k)
    if name == "tukey":
        return tukey(k)
    raise ConfigError("Unknown contrast type for a study: {name}".format(**locals()))


class StudyReport:
    """Rejection rates of several procedures over many simulated samples

    For every scenario and method the report has the global rejection rate
    (familywise error under a full null), per-contrast rejection rates, and
    the local false-rejection rate over contrasts of equal laws.
    """

    def __init__(self, runs, seed, alpha, band_level=DEFAULT_BAND_LEVEL):
        if runs < 1:
            raise ConfigError("Number of runs must be positive, got {runs}".format(**locals()))
        self.runs = runs
        self.seed = seed
        self.alpha = alpha
        self.band_level = band_level
        self.band = binomial_band(alpha, runs, band_level)
        self.results = []

    def add(self, scenario, contrasts, method, global_count, local_counts):
        """Add counts of rejections for one scenario and method"""
        runs = float(self.runs)
        true_null = [scenario.true_null(j1, j2) for j1, j2 in contrasts]
        local_rates = [count / runs for count in local_counts]
        null_rates = [rate for rate, null in zip(local_rates, true_null) if null]
        global_rate = global_count / runs
        self.results.append(
            {
                "scenario": scenario.name,
                "null": scenario.is_null,
                "method": method,
                "contrasts": contrasts.labels(),
                "true_null": true_null,
                "global_rate": global_rate,
                "local_rates": local_rates,
                "local_false_rejection_rate": (
                    sum(null_rates) / len(null_rates) if null_rates else None
                ),
                "mean_local_power": (
                    sum(rate for rate, null in zip(local_rates, true_null) if not null)
                    / (len(true_null) - len(null_rates))
                    if len(null_rates) < len(true_null)
                    else None
                ),
                "outside_band": bool(
                    scenario.is_null and not self.band[0] <= global_rate <= self.band[1]
                ),
            }
        )

    def result(self, scenario, method):
        """Result dictionary for a scenario and method"""
        for result in self.results:
            if result["scenario"] == scenario and result["method"] == method:
                return result
        raise KeyError((scenario, method))

    def as_dict(self):
        """Report as a JSON-serializable dictionary"""
        return {
            "runs": self.runs,
            "seed": self.seed,
            "alpha": self.alpha,
            "band_level": self.band_level,
            "band": list(self.band),
            "results": self.results,
        }

    def rows(self):
        """One row per scenario, method, and contrast"""
        rows = []
        for result in self.results:
            for label, null, rate in zip(
                result["contrasts"], result["true_null"], result["local_rates"]
            ):
                rows.append(
                    {
                        "scenario": result["scenario"],
                        "method": result["method"],
                        "contrast": label,
                        "true_null": null,
                        "local_rate": rate,
                        "global_rate": result["global_rate"],
                        "outside_band": result["outside_band"],
                        "runs": self.runs,
                    }
                )
        return rows

    def to_frame(self):
        """Report rows as a pandas DataFrame"""
        # We don't want a special dependency to fail import of this file
        # in case this function is not used.
        import pandas as pd  # pylint: disable=import-outside-toplevel

        return pd.DataFrame.from_records(self.rows())


def simulate_run(scenario, procedures, contrasts, seed, run):
    """Draw one sample and apply every procedure to it

    :returns: List of (local rejection flags, global rejection) per procedure
    """
    stream = RngStream(seed, run)
    sample = sample_scenario(scenario, stream.spawn(0))
    outcomes = []
    for method, procedure in procedures:
        report = procedure(sample, contrasts, method_stream(stream, method))
        outcomes.append((report.rejected, report.global_rejected))
    return outcomes


def run_study(
    scenarios,
    methods,
    contrasts="dunnett",
    runs=1000,
    n=None,
    censoring=None,
    config=None,
    seed=None,
    threads=1,
    reporter=None,
):
    """Apply test procedures to repeatedly simulated samples

    Run r draws its data and resampling from the substream (seed, r) so any
    subset of runs can be reproduced on its own. Counts are summed, so the
    report does not depend on the number of threads.

    :param scenarios: Scenarios (or built-in scenario names)
    :param methods: Method names, see :data:`~survcontrasts.procedures.METHODS`
    :param contrasts: ``dunnett`` or ``tukey``
    :param runs: Number of simulated samples per scenario
    :param n: Group size override (integer or per-group list)
    :param censoring: Censoring target override
    :param config: Procedure configuration (``alpha``, ``weights``,
        ``bootstrap``, ``monte_carlo``)
    :param seed: Master seed (random when None)
    :param threads: Number of joblib workers over runs
    """
    # pylint: disable=too-many-arguments,too-many-locals
    config = dict(config or {})
    reporter = reporter or MuteReporter()
    if runs < 1:
        raise ConfigError("Number of runs must be positive, got {runs}".format(**locals()))
    if seed is None:
        seed = int(np.random.SeedSequence().entropy)
    alpha = config.get("alpha", 0.05)
    report = StudyReport(runs, seed, alpha, config.get("band_level", DEFAULT_BAND_LEVEL))
    config["threads"] = 1
    procedures = [(method, get_procedure_function(method, config)) for method in methods]
    for scenario in scenarios:
        if isinstance(scenario, str):
            scenario = get_scenario(scenario)
        if n is not None or censoring is not None:
            scenario = scenario.with_design(n=n, censoring=censoring)
        contrast_matrix = get_contrasts(contrasts, scenario.k)
        reporter.scenario_started(scenario.name, runs)
        outcomes = joblib.Parallel(n_jobs=threads, prefer="processes")(
            joblib.delayed(simulate_run)(scenario, procedures, contrast_matrix, seed, run)
            for run in range(runs)
        )
        global_counts = np.zeros(len(procedures), dtype=int)
        local_counts = np.zeros((len(procedures), contrast_matrix.q), dtype=int)
        for run, run_outcomes in enumerate(outcomes):
            for index, (local, rejected) in enumerate(run_outcomes):
                local_counts[index] += np.asarray(local, dtype=int)
                global_counts[index] += int(rejected)
            reporter.run_finished(scenario.name, run + 1, runs)
        for index, (method, unused) in enumerate(procedures):
            report.add(
                scenario, contrast_matrix, method, global_counts[index], local_counts[index]
            )
    return report


def run_study_from_config(config, seed=None, threads=1, reporter=None):
    """Run a study described by a configuration dictionary

    Keys are ``study`` (``runs``, ``seed``, ``methods``, ``contrasts``,
    ``alpha``, ``weights``), ``scenario``, ``bootstrap``, and ``monte_carlo``.
    The *seed* parameter overrides ``study/seed``.
    """
    study = config.get("study", {})
    scenario = scenario_from_config(config.get("scenario", {"name": "prop"}))
    procedure_config = {
        "alpha": study.get("alpha", 0.05),
        "weights": study.get("weights"),
        "bootstrap": config.get("bootstrap", {}),
        "monte_carlo": config.get("monte_carlo", {}),
        "band_level": study.get("band_level", DEFAULT_BAND_LEVEL),
    }
    return run_study(
        [scenario],
        study.get("methods", list(METHODS)),
        contrasts=study.get("contrasts", "dunnett"),
        runs=study.get("runs", 1000),
        config=procedure_config,
        seed=seed if seed is not None else study.get("seed"),
        threads=threads,
        reporter=reporter,
    )


def load_configuration_yaml_from_text(text):
    """Return configuration dictionary from YAML in a string"""
    import yaml  # pylint: disable=import-outside-toplevel

    return yaml.safe_load(text)


def load_configuration(filename):
    """Get the configuration from a JSON or YAML file

    The format is decided based on the file extension.
    The parameter can be a string or a path object (path-like object).
    """
    if str(filename).endswith(".json"):
        import json  # pylint: disable=import-outside-toplevel

        with open(filename) as file:
            return json.load(file)
    if str(filename).endswith(".yaml") or str(filename).endswith(".yml"):
        import yaml  # pylint: disable=import-outside-toplevel

        with open(filename) as file:
            return yaml.safe_load(file)
    raise ConfigError("Unknown file extension: {filename}".format(**locals()))
