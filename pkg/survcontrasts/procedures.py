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
Multiple contrast test procedures with familywise error control

Each procedure takes a sample (or risk table), a contrast matrix, and a level
and returns a :class:`TestReport` with local and global decisions.
A local hypothesis is rejected exactly when its adjusted p-value is at
most alpha and the global hypothesis is rejected when any local one is.
"""

import numpy as np
import joblib

from .design import ConfigError, default_weights, fleming_harrington, parse_weight
from .estimators import draw_multipliers, event_incidence, wild_bootstrap_increments
from .numerics import (
    DEFAULT_MC_SAMPLES,
    as_rng_stream,
    auto_tolerance,
    chi_square_upper_tail,
    add_one_critical_value,
    empirical_quantile,
    exceedance_fraction,
    moore_penrose,
    simulate_max_statistic,
)
from .outputs import MuteReporter
from .survdata import as_risk_table
from .teststats import (
    ContrastKernel,
    joint_covariance,
    quadratic_form,
    quadratic_forms,
    statistic_vector,
)

METHODS = ("logrank", "mdir", "maxwlr", "casanova-rade", "casanova-pois")

MIN_BOOTSTRAP_ITERATIONS = 100
DEFAULT_BOOTSTRAP_ITERATIONS = 1000
BOOTSTRAP_CHUNK_SIZE = 50


class TestReport:
    """Local and global results of one multiple contrast test procedure

    Per-contrast lists follow the order of the contrast matrix.
    """

    # Plain record of results, many attributes are expected.
    # pylint: disable=too-many-instance-attributes,too-few-public-methods

    # not a test class despite the name
    __test__ = False

    def __init__(self, method, alpha, contrasts, labels, weights):
        self.method = method
        self.alpha = alpha
        self.pairs = list(contrasts.pairs)
        self.labels = labels
        self.weights = [weight.label for weight in weights]
        self.statistics = []
        self.df = []
        self.pvalues = []
        self.rejected = []
        self.degenerate = []
        self.global_statistic = None
        self.critical_value = None
        self.global_pvalue = None
        self.global_rejected = False
        self.resampling = {}

    def add_local(self, statistic, pvalue, df=None, degenerate=False):
        """Record the result for the next contrast"""
        pvalue = min(max(float(pvalue), 0.0), 1.0)
        self.statistics.append(float(statistic))
        self.df.append(df)
        self.pvalues.append(pvalue)
        self.rejected.append(pvalue <= self.alpha)
        self.degenerate.append(bool(degenerate))

    def finish(self, global_statistic, critical_value, global_pvalue):
        """Record the global result"""
        self.global_statistic = float(global_statistic)
        self.critical_value = None if critical_value is None else float(critical_value)
        self.global_pvalue = min(max(float(global_pvalue), 0.0), 1.0)
        self.global_rejected = self.global_pvalue <= self.alpha

    @property
    def num_rejected(self):
        """Number of rejected local hypotheses"""
        return sum(self.rejected)

    def as_dict(self):
        """Report as a JSON-serializable dictionary"""
        return {
            "method": self.method,
            "alpha": self.alpha,
            "weights": list(self.weights),
            "contrasts": [
                {
                    "label": label,
                    "pair": list(pair),
                    "statistic": statistic,
                    "df": df,
                    "p_adjusted": pvalue,
                    "rejected": rejected,
                    "degenerate": degenerate,
                }
                for label, pair, statistic, df, pvalue, rejected, degenerate in zip(
                    self.labels,
                    self.pairs,
                    self.statistics,
                    self.df,
                    self.pvalues,
                    self.rejected,
                    self.degenerate,
                )
            ],
            "global": {
                "statistic": self.global_statistic,
                "critical_value": self.critical_value,
                "p_value": self.global_pvalue,
                "rejected": self.global_rejected,
                "num_rejected": self.num_rejected,
            },
            "resampling": dict(self.resampling),
        }

    def __repr__(self):
        return "TestReport({method}, q={q}, rejected={count})".format(
            method=self.method, q=len(self.pairs), count=self.num_rejected
        )


def check_alpha(alpha):
    """Raise ConfigError unless 0 < alpha < 1"""
    if not 0 < alpha < 1:
        raise ConfigError("Level alpha must be in (0, 1), got {alpha}".format(**locals()))


def _prepare(sample, contrasts, alpha):
    check_alpha(alpha)
    rt = as_risk_table(sample)
    if contrasts.k != rt.k:
        raise ConfigError(
            "Contrasts are for {contrasts.k} groups, but the data has {rt.k}".format(
                **locals()
            )
        )
    labels = contrasts.labels(getattr(sample, "labels", None))
    return rt, labels


def _bonferroni(method, sample, contrasts, weights, alpha, reporter):
    """Pairwise quadratic forms with chi-square p-values, Bonferroni-adjusted"""
    rt, labels = _prepare(sample, contrasts, alpha)
    report = TestReport(method, alpha, contrasts, labels, weights)
    q = contrasts.q
    for label, (j1, j2) in zip(labels, contrasts):
        kernel = ContrastKernel(rt, j1, j2, weights)
        statistic, df = quadratic_form(kernel.statistic(), kernel.covariance())
        if not df:
            reporter.degenerate_contrast(method, label)
        pvalue = chi_square_upper_tail(statistic, df)
        report.add_local(statistic, min(1.0, q * pvalue), df=df, degenerate=not df)
    report.finish(
        global_statistic=max(report.statistics),
        critical_value=alpha / q,
        global_pvalue=min(report.pvalues),
    )
    return report


def adjusted_logrank(sample, contrasts, alpha=0.05, reporter=None):
    """Log-rank test for each contrast at the Bonferroni level alpha / q

    The statistic is the chi-square form T^2 / Var(T). Reported p-values are
    adjusted, min(1, q p), and the critical value is the local level alpha / q.
    """
    reporter = reporter or MuteReporter()
    return _bonferroni(
        "logrank", sample, contrasts, [fleming_harrington(0, 0)], alpha, reporter
    )


def adjusted_mdir(sample, contrasts, weights=None, alpha=0.05, reporter=None):
    """Combination of several weighted log-rank tests for each contrast

    The quadratic form uses the Moore-Penrose inverse of the covariance and is
    compared with a chi-square distribution with rank degrees of freedom.
    Bonferroni adjustment as in :func:`adjusted_logrank`.
    """
    reporter = reporter or MuteReporter()
    weights = list(weights) if weights else default_weights()
    return _bonferroni("mdir", sample, contrasts, weights, alpha, reporter)


def multi_weighted_lr(
    sample,
    contrasts,
    weights=None,
    alpha=0.05,
    samples=DEFAULT_MC_SAMPLES,
    seed=None,
    two_sided=True,
    reporter=None,
):
    """Maximum test over all standardized weighted log-rank statistics

    All q * m statistics are standardized by the diagonal of their joint
    covariance. The local statistic of a contrast is its maximum over weights.
    Adjusted p-values and the equicoordinate critical value come from
    Monte Carlo draws of the maximum of a normal vector with the estimated
    correlation. Components with zero variance are left out.

    :param samples: Number of Monte Carlo draws
    :param seed: Seed or :class:`~survcontrasts.numerics.RngStream`
    :param two_sided: Use absolute values (otherwise only large positive
        statistics count against the hypothesis)
    """
    # pylint: disable=too-many-arguments,too-many-locals
    reporter = reporter or MuteReporter()
    weights = list(weights) if weights else default_weights()
    rt, labels = _prepare(sample, contrasts, alpha)
    report = TestReport("maxwlr", alpha, contrasts, labels, weights)
    m = len(weights)
    statistics = statistic_vector(rt, contrasts, weights)
    covariance = joint_covariance(rt, contrasts, weights, within="pooled")
    variances = np.diag(covariance).copy()
    keep = variances > max(auto_tolerance(variances, len(variances)), 0.0)
    standardized = np.zeros_like(statistics)
    standardized[keep] = statistics[keep] / np.sqrt(variances[keep])
    if not two_sided:
        signed = standardized
    else:
        signed = np.abs(standardized)
    report.resampling = {
        "samples": int(samples),
        "seed": _seed_of(seed),
        "two_sided": bool(two_sided),
        "excluded_components": int(np.count_nonzero(~keep)),
    }
    if not np.any(keep):
        for label in labels:
            reporter.degenerate_contrast("maxwlr", label)
            report.add_local(0.0, 1.0, degenerate=True)
        report.finish(0.0, None, 1.0)
        return report
    deviations = np.sqrt(variances[keep])
    correlation = covariance[np.ix_(keep, keep)] / np.outer(deviations, deviations)
    np.fill_diagonal(correlation, 1.0)
    maxima = simulate_max_statistic(correlation, samples, as_rng_stream(seed), two_sided)
    for index, label in enumerate(labels):
        block = slice(index * m, (index + 1) * m)
        if not np.any(keep[block]):
            reporter.degenerate_contrast("maxwlr", label)
            report.add_local(0.0, 1.0, degenerate=True)
            continue
        local = float(signed[block][keep[block]].max())
        report.add_local(local, exceedance_fraction(maxima, local))
    global_statistic = float(signed[keep].max())
    report.finish(
        global_statistic,
        empirical_quantile(maxima, 1 - alpha),
        exceedance_fraction(maxima, global_statistic),
    )
    return report


def method_stream(stream, method):
    """Random stream of a method under a parent stream

    Substream 0 is left for data generation, method i of :data:`METHODS`
    uses substream i + 1 whatever other methods run alongside.
    """
    return stream.spawn(1 + METHODS.index(method))


def _seed_of(seed):
    """Seed value for reports (master seed and substream path for streams)"""
    if hasattr(seed, "key"):
        return {"seed": seed.seed, "substream": list(seed.key)}
    return seed


def _bootstrap_maxima(rt, kernels, inverses, law, replicates, rng):
    """Maxima over contrasts of bootstrap quadratic forms for given replicates"""
    incidence = event_incidence(rt)
    multipliers = np.array([draw_multipliers(law, rt.n, rng.spawn(b)) for b in replicates])
    increments = wild_bootstrap_increments(rt, multipliers, incidence=incidence)
    forms = np.column_stack(
        [
            quadratic_forms(kernel.statistic(increments), inverse)
            for kernel, inverse in zip(kernels, inverses)
        ]
    )
    return forms.max(axis=1)


def multi_casanova(
    sample,
    contrasts,
    weights=None,
    alpha=0.05,
    law="rademacher",
    iterations=DEFAULT_BOOTSTRAP_ITERATIONS,
    seed=None,
    threads=1,
    reporter=None,
):
    """Maximum of pooled quadratic forms calibrated by the wild bootstrap

    Every replicate draws one multiplier per subject, shared by all
    contrasts. Bootstrap statistics replace the Nelson-Aalen increments by
    their wild bootstrap versions and keep the observed covariance.
    Adjusted p-values are (1 + #{C*_max >= C}) / (B + 1). The critical value
    is the order statistic of C*_max above which exactly these p-values fall
    to alpha or below, so C > critical value iff p <= alpha. The type-1
    empirical (1 - alpha) quantile is kept as ``resampling["quantile"]``.

    :param law: Multiplier distribution, ``rademacher`` or ``centered_poisson``
    :param iterations: Number of bootstrap replicates B (at least 100)
    :param seed: Seed or :class:`~survcontrasts.numerics.RngStream`;
        replicate b always uses substream b
    :param threads: Number of joblib workers for the replicates
    """
    # pylint: disable=too-many-arguments,too-many-locals
    reporter = reporter or MuteReporter()
    weights = list(weights) if weights else default_weights()
    if iterations < MIN_BOOTSTRAP_ITERATIONS:
        raise ConfigError(
            "At least {minimum} bootstrap iterations are required, got {iterations}".format(
                minimum=MIN_BOOTSTRAP_ITERATIONS, iterations=iterations
            )
        )
    if law not in ("rademacher", "centered_poisson"):
        raise ConfigError("Unknown multiplier distribution: {law}".format(**locals()))
    rt, labels = _prepare(sample, contrasts, alpha)
    method = "casanova-rade" if law == "rademacher" else "casanova-pois"
    report = TestReport(method, alpha, contrasts, labels, weights)
    rng = as_rng_stream(seed)

    kernels = []
    inverses = []
    observed = []
    ranks = []
    for j1, j2 in contrasts:
        kernel = ContrastKernel(rt, j1, j2, weights, pooled=True)
        statistics = kernel.statistic()
        covariance = kernel.covariance()
        statistic, rank = quadratic_form(statistics, covariance)
        kernels.append(kernel)
        inverses.append(moore_penrose(covariance)[0])
        observed.append(statistic)
        ranks.append(rank)

    chunks = [
        range(start, min(start + BOOTSTRAP_CHUNK_SIZE, iterations))
        for start in range(0, iterations, BOOTSTRAP_CHUNK_SIZE)
    ]
    results = joblib.Parallel(n_jobs=threads, prefer="threads")(
        joblib.delayed(_bootstrap_maxima)(rt, kernels, inverses, law, chunk, rng)
        for chunk in chunks
    )
    maxima = np.sort(np.concatenate(results))

    def bootstrap_pvalue(value):
        exceeding = iterations - np.searchsorted(maxima, value, side="left")
        return (1.0 + exceeding) / (iterations + 1.0)

    for label, statistic, rank in zip(labels, observed, ranks):
        if not rank:
            reporter.degenerate_contrast(method, label)
        report.add_local(statistic, bootstrap_pvalue(statistic), df=rank, degenerate=not rank)
    global_statistic = max(observed)
    critical_value = add_one_critical_value(maxima, alpha)
    report.finish(
        global_statistic,
        critical_value if np.isfinite(critical_value) else None,
        bootstrap_pvalue(global_statistic),
    )
    report.resampling = {
        "iterations": int(iterations),
        "law": law,
        "seed": _seed_of(seed),
        "quantile": empirical_quantile(maxima, 1 - alpha),
    }
    return report


def _weights_from_config(config):
    weights = config.get("weights")
    if not weights:
        return default_weights()
    return [parse_weight(weight) if isinstance(weight, str) else weight for weight in weights]


def get_procedure_function(method, config, reporter=None):
    """Get a test procedure function based on a method name and configuration

    The returned function takes a sample, a contrast matrix, and a seed
    (or random stream) and returns a :class:`TestReport`.

    Configuration keys are ``alpha``, ``weights`` (list of weights or weight
    strings), ``bootstrap/iterations``, ``monte_carlo/samples``, ``threads``.
    """
    alpha = config.get("alpha", 0.05)
    weights = _weights_from_config(config)
    iterations = config.get("bootstrap", {}).get("iterations", DEFAULT_BOOTSTRAP_ITERATIONS)
    samples = config.get("monte_carlo", {}).get("samples", DEFAULT_MC_SAMPLES)
    two_sided = config.get("monte_carlo", {}).get("two_sided", True)
    threads = config.get("threads", 1)

    if method == "logrank":

        def procedure(sample, contrasts, seed=None):
            # pylint: disable=unused-argument
            return adjusted_logrank(sample, contrasts, alpha=alpha, reporter=reporter)

    elif method == "mdir":

        def procedure(sample, contrasts, seed=None):
            # pylint: disable=unused-argument
            return adjusted_mdir(
                sample, contrasts, weights=weights, alpha=alpha, reporter=reporter
            )

    elif method == "maxwlr":

        def procedure(sample, contrasts, seed=None):
            return multi_weighted_lr(
                sample,
                contrasts,
                weights=weights,
                alpha=alpha,
                samples=samples,
                seed=seed,
                two_sided=two_sided,
                reporter=reporter,
            )

    elif method in ("casanova-rade", "casanova-pois"):
        law = "rademacher" if method == "casanova-rade" else "centered_poisson"

        def procedure(sample, contrasts, seed=None):
            return multi_casanova(
                sample,
                contrasts,
                weights=weights,
                alpha=alpha,
                law=law,
                iterations=iterations,
                seed=seed,
                threads=threads,
                reporter=reporter,
            )

    else:
        raise ConfigError("Unknown test method: {method}".format(**locals()))
    return procedure


def parse_methods(text):
    """Parse a comma-separated list of method names"""
    methods = [item.strip() for item in text.split(",") if item.strip()]
    if not methods:
        raise ConfigError("At least one method is required")
    for method in methods:
        if method not in METHODS:
            raise ConfigError(
                "Unknown test method: {method} (use {known})".format(
                    method=method, known=", ".join(METHODS)
                )
            )
    return methods
