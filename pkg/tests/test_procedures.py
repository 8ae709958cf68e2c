"""Test the multiple contrast test procedures"""

import numpy as np
import pytest

from survcontrasts.design import ConfigError, crossing, dunnett, fleming_harrington, tukey
from survcontrasts.numerics import RngStream, chi_square_upper_tail
from survcontrasts.procedures import (
    METHODS,
    adjusted_logrank,
    adjusted_mdir,
    check_alpha,
    get_procedure_function,
    method_stream,
    multi_casanova,
    multi_weighted_lr,
    parse_methods,
)
from survcontrasts.survdata import SurvivalSample
from survcontrasts.teststats import joint_covariance, mdir_statistic, statistic_vector

LOG_RANK = fleming_harrington(0, 0)


class RecordingReporter:
    """Reporter which remembers degenerate contrasts"""

    # pylint: disable=missing-function-docstring
    def __init__(self):
        self.degenerate = []

    def degenerate_contrast(self, method, label):
        self.degenerate.append((method, label))


def worked_sample():
    """Group 1 with events at 1 and 3, group 2 with events at 2 and 4"""
    return SurvivalSample([1, 3, 2, 4], [1, 1, 1, 1], [1, 1, 2, 2])


def exponential_sample(seed, rates, size=40, censoring=0.0):
    """Exponential event times with the given rate in each group"""
    generator = np.random.default_rng(seed)
    labels = np.repeat(np.arange(1, len(rates) + 1), size)
    times = generator.exponential(1 / np.asarray(rates, dtype=float)[labels - 1])
    status = (generator.random(len(times)) >= censoring).astype(int)
    status[0] = 1
    return SurvivalSample(times, status, labels)


def censored_groups_sample():
    """Groups 2 and 3 without any events"""
    generator = np.random.default_rng(17)
    times = generator.exponential(size=30) + 0.01
    status = np.repeat([1, 0, 0], 10)
    return SurvivalSample(times, status, np.repeat([1, 2, 3], 10))


def test_worked_example_logrank():
    """One contrast, no adjustment needed"""
    report = adjusted_logrank(worked_sample(), dunnett(2))
    assert report.statistics[0] == pytest.approx(8 / 13)
    assert report.pvalues[0] == pytest.approx(0.4328, abs=1e-4)
    assert report.df == [1]
    assert report.rejected == [False]
    assert not report.global_rejected
    assert report.critical_value == pytest.approx(0.05)


def test_bonferroni_adjustment():
    """Adjusted p-value is q times the chi-square p-value, capped at 1"""
    sample = exponential_sample(3, [1, 1.3, 1.6, 2])
    contrasts = dunnett(4)
    report = adjusted_logrank(sample, contrasts)
    for index, (j1, j2) in enumerate(contrasts):
        value, df = mdir_statistic(sample, j1, j2, [LOG_RANK])
        expected = min(1.0, 3 * chi_square_upper_tail(value, df))
        assert report.pvalues[index] == pytest.approx(expected)
    assert report.critical_value == pytest.approx(0.05 / 3)
    assert report.global_pvalue == min(report.pvalues)


def test_mdir_with_log_rank_weight_is_logrank():
    """A single constant weight reproduces the adjusted log-rank test"""
    sample = exponential_sample(4, [1, 2, 1.5])
    first = adjusted_logrank(sample, tukey(3))
    second = adjusted_mdir(sample, tukey(3), weights=[LOG_RANK])
    assert first.statistics == second.statistics
    assert first.pvalues == second.pvalues


def test_mdir_default_weights():
    """Log-rank and crossing weights give two degrees of freedom"""
    report = adjusted_mdir(exponential_sample(5, [1, 2]), dunnett(2))
    assert report.df == [2]
    assert report.weights == ["fh:0:0", "cross"]


@pytest.mark.parametrize("method", ["logrank", "mdir"])
def test_degenerate_contrast(method):
    """No events in either group gives p = 1 and a report line"""
    reporter = RecordingReporter()
    procedure = get_procedure_function(method, {}, reporter=reporter)
    report = procedure(censored_groups_sample(), tukey(3))
    assert report.degenerate == [False, False, True]
    assert report.pvalues[2] == 1
    assert report.df[2] == 0
    assert not report.rejected[2]
    assert reporter.degenerate == [(method, "3 - 2")]


def test_degenerate_contrast_max_test():
    """Zero-variance components are left out of the maximum"""
    reporter = RecordingReporter()
    report = multi_weighted_lr(
        censored_groups_sample(), tukey(3), samples=2000, seed=1, reporter=reporter
    )
    assert report.degenerate == [False, False, True]
    assert report.pvalues[2] == 1
    assert report.resampling["excluded_components"] == 2


def test_degenerate_contrast_bootstrap():
    """Groups without events give a zero form and p = 1"""
    report = multi_casanova(censored_groups_sample(), tukey(3), iterations=100, seed=3)
    assert report.statistics[2] == 0
    assert report.pvalues[2] == 1


def test_max_test_single_weight_matches_normal():
    """Two groups and one weight give the two-sided normal p-value"""
    sample = exponential_sample(6, [1, 1.4], size=50)
    report = multi_weighted_lr(sample, dunnett(2), weights=[LOG_RANK], samples=200000, seed=2)
    value, df = mdir_statistic(sample, 1, 2, [LOG_RANK])
    assert report.statistics[0] == pytest.approx(np.sqrt(value))
    assert report.pvalues[0] == pytest.approx(chi_square_upper_tail(value, df), abs=0.005)


def test_max_test_local_statistic():
    """Local statistic is the largest standardized component of the contrast"""
    sample = exponential_sample(7, [1, 1.5, 2])
    weights = [LOG_RANK, crossing()]
    report = multi_weighted_lr(sample, dunnett(3), weights=weights, samples=1000, seed=3)
    standardized = np.abs(statistic_vector(sample, dunnett(3), weights)) / np.sqrt(
        np.diag(joint_covariance(sample, dunnett(3), weights, within="pooled"))
    )
    for index in range(2):
        block = standardized[2 * index : 2 * index + 2]
        assert report.statistics[index] == pytest.approx(block.max())
    assert report.global_statistic == max(report.statistics)


def test_max_test_one_sided():
    """One-sided statistics do not exceed the two-sided ones"""
    sample = exponential_sample(8, [1, 0.6, 1.8])
    two = multi_weighted_lr(sample, dunnett(3), samples=5000, seed=4)
    one = multi_weighted_lr(sample, dunnett(3), samples=5000, seed=4, two_sided=False)
    for first, second in zip(one.statistics, two.statistics):
        assert first <= second + 1e-12
    assert not one.resampling["two_sided"]


def test_max_test_deterministic():
    """Same seed, same p-values"""
    sample = exponential_sample(9, [1, 1.5, 2])
    first = multi_weighted_lr(sample, tukey(3), samples=5000, seed=RngStream(12, 3))
    second = multi_weighted_lr(sample, tukey(3), samples=5000, seed=RngStream(12, 3))
    assert first.pvalues == second.pvalues
    assert first.critical_value == second.critical_value


def test_casanova_two_groups_statistic():
    """With two groups the pooled form equals the pairwise form"""
    sample = exponential_sample(10, [1, 1.8])
    report = multi_casanova(sample, dunnett(2), iterations=100, seed=1)
    value, df = mdir_statistic(sample, 1, 2, [LOG_RANK, crossing()])
    assert report.statistics[0] == value
    assert report.df[0] == df


def test_casanova_deterministic():
    """Same seed, same report"""
    sample = exponential_sample(11, [1, 1.2, 1.6])
    first = multi_casanova(sample, dunnett(3), iterations=150, seed=5)
    second = multi_casanova(sample, dunnett(3), iterations=150, seed=5)
    assert first.as_dict() == second.as_dict()


def test_casanova_threads_do_not_change_result():
    """Replicate b uses substream b whatever the number of workers"""
    sample = exponential_sample(12, [1, 1.2, 1.6])
    single = multi_casanova(sample, tukey(3), iterations=230, seed=6, threads=1)
    parallel = multi_casanova(sample, tukey(3), iterations=230, seed=6, threads=3)
    assert single.pvalues == parallel.pvalues
    assert single.critical_value == parallel.critical_value


def test_casanova_pvalue_range():
    """p-values lie between 1 / (B + 1) and 1"""
    sample = exponential_sample(13, [1, 4, 1])
    report = multi_casanova(sample, dunnett(3), iterations=200, seed=7, law="centered_poisson")
    assert report.method == "casanova-pois"
    for pvalue in report.pvalues:
        assert 1 / 201 <= pvalue <= 1
    assert report.rejected[0]
    assert report.pvalues[0] == pytest.approx(1 / 201)
    quantile = report.resampling.pop("quantile")
    assert np.isfinite(quantile)
    assert report.resampling == {"iterations": 200, "law": "centered_poisson", "seed": 7}


def test_casanova_too_few_iterations():
    """At least 100 bootstrap iterations"""
    with pytest.raises(ConfigError, match="100"):
        multi_casanova(worked_sample(), dunnett(2), iterations=99)


def test_casanova_unknown_law():
    """Rademacher or centered Poisson multipliers only"""
    with pytest.raises(ConfigError):
        multi_casanova(worked_sample(), dunnett(2), law="gaussian")


@pytest.mark.parametrize("method", METHODS)
def test_decisions_follow_pvalues(method):
    """Rejected exactly when the adjusted p-value is at most alpha"""
    sample = exponential_sample(14, [1, 4, 1.1, 1.8], size=30, censoring=0.2)
    procedure = get_procedure_function(
        method, {"bootstrap": {"iterations": 200}, "monte_carlo": {"samples": 5000}}
    )
    report = procedure(sample, tukey(4), seed=RngStream(1, 2))
    assert len(report.pvalues) == 6
    for pvalue, rejected in zip(report.pvalues, report.rejected):
        assert 0 <= pvalue <= 1
        assert rejected == (pvalue <= 0.05)
    assert report.global_rejected == any(report.rejected)
    assert report.global_pvalue == pytest.approx(min(report.pvalues))
    assert report.rejected[0]


@pytest.mark.parametrize("method", ["logrank", "mdir", "casanova-rade"])
def test_rejections_grow_with_alpha(method):
    """A larger level never rejects fewer hypotheses"""
    sample = exponential_sample(15, [1, 1.3, 1.6, 1.9], size=30)
    counts = []
    for alpha in (0.01, 0.05, 0.1, 0.2):
        procedure = get_procedure_function(
            method, {"alpha": alpha, "bootstrap": {"iterations": 200}}
        )
        counts.append(procedure(sample, tukey(4), seed=8).num_rejected)
    assert counts == sorted(counts)


def test_dunnett_rejects_at_least_tukey():
    """Fewer contrasts mean a milder adjustment for the shared ones"""
    sample = exponential_sample(16, [1, 1.5, 1.7])
    many_to_one = adjusted_logrank(sample, dunnett(3))
    all_pairs = adjusted_logrank(sample, tukey(3))
    for index in range(2):
        assert many_to_one.pvalues[index] <= all_pairs.pvalues[index]
        assert many_to_one.rejected[index] or not all_pairs.rejected[index]


def test_report_as_dict():
    """Dictionary for JSON output"""
    report = adjusted_logrank(worked_sample(), dunnett(2))
    result = report.as_dict()
    assert result["method"] == "logrank"
    assert result["contrasts"][0]["label"] == "2 - 1"
    assert result["contrasts"][0]["pair"] == [1, 2]
    assert result["global"]["num_rejected"] == 0
    assert result["weights"] == ["fh:0:0"]


def test_contrasts_must_match_groups():
    """Contrast matrix and data need the same number of groups"""
    with pytest.raises(ConfigError, match="groups"):
        adjusted_logrank(worked_sample(), dunnett(3))


@pytest.mark.parametrize("alpha", [0, 1, 1.5, -0.1])
def test_invalid_alpha(alpha):
    """Level must be strictly between 0 and 1"""
    with pytest.raises(ConfigError):
        check_alpha(alpha)
    with pytest.raises(ConfigError):
        adjusted_logrank(worked_sample(), dunnett(2), alpha=alpha)


def test_unknown_method():
    """Factory raises for unknown names"""
    with pytest.raises(ConfigError, match="Unknown test method"):
        get_procedure_function("wilcoxon", {})
    with pytest.raises(ConfigError):
        parse_methods("logrank,wilcoxon")
    with pytest.raises(ConfigError):
        parse_methods(" , ")
    assert parse_methods("mdir, maxwlr") == ["mdir", "maxwlr"]


def test_weights_from_config_strings():
    """Weights may be given as strings"""
    procedure = get_procedure_function("mdir", {"weights": ["fh:0:0", "fh:1:1"]})
    report = procedure(exponential_sample(18, [1, 2]), dunnett(2))
    assert report.weights == ["fh:0:0", "fh:1:1"]


def test_method_streams_are_fixed():
    """A method gets the same stream whatever other methods run"""
    stream = RngStream(5)
    first = method_stream(stream, "maxwlr").random(3)
    second = method_stream(RngStream(5), "maxwlr").random(3)
    other = method_stream(RngStream(5), "casanova-rade").random(3)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)


@pytest.mark.parametrize("iterations", [100, 150, 199, 230])
def test_casanova_critical_value_matches_pvalues(iterations):
    """A statistic exceeds the critical value exactly when its p-value is at most alpha"""
    for seed in range(40):
        sample = exponential_sample(seed, [1, 1.6, 1.3], size=15, censoring=0.2)
        report = multi_casanova(sample, tukey(3), iterations=iterations, seed=seed)
        critical_value = report.critical_value
        assert report.global_rejected == (report.global_statistic > critical_value)
        for statistic, rejected in zip(report.statistics, report.rejected):
            assert rejected == (statistic > critical_value)


def test_casanova_critical_value_unreachable():
    """Without room for a single exceedance nothing is rejected"""
    report = multi_casanova(
        exponential_sample(3, [1, 6, 1]), dunnett(3), alpha=0.005, iterations=100, seed=3
    )
    assert report.critical_value is None
    assert not report.global_rejected
    assert report.global_pvalue >= 1 / 101
