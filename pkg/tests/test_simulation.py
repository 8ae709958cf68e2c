"""Test scenarios, data generation, and simulation studies"""

import textwrap

import numpy as np
import pytest

from survcontrasts.design import ConfigError, dunnett
from survcontrasts.numerics import RngStream
from survcontrasts.procedures import METHODS, adjusted_logrank
from survcontrasts.simulation import (
    Scenario,
    StudyReport,
    binomial_band,
    builtin_scenarios,
    censored_fraction,
    censoring_bound,
    exponential,
    get_scenario,
    law_combinations,
    law_from_config,
    lognormal,
    load_configuration_yaml_from_text,
    run_study,
    run_study_from_config,
    sample_scenario,
    scenario_from_config,
    weibull,
)

FAST_CONFIG = {"bootstrap": {"iterations": 100}, "monte_carlo": {"samples": 2000}}


class CountingReporter:
    """Reporter which counts its calls"""

    # pylint: disable=missing-function-docstring
    def __init__(self):
        self.started = []
        self.finished = 0

    def scenario_started(self, name, runs):
        self.started.append((name, runs))

    def run_finished(self, name, run, runs):
        self.finished += 1


def test_builtin_scenarios():
    """Four alternatives, each followed by its full null"""
    scenarios = builtin_scenarios()
    names = [scenario.name for scenario in scenarios]
    assert names == [
        "prop",
        "prop-null",
        "nprop",
        "nprop-null",
        "cross",
        "cross-null",
        "mix",
        "mix-null",
    ]
    for scenario in scenarios:
        assert scenario.k == 4
        assert scenario.is_null == scenario.name.endswith("-null")
    prop = get_scenario("prop")
    assert prop.laws[2] == exponential(3.5)
    assert get_scenario("cross").laws[3] == weibull(4.5, 2.4)
    assert get_scenario("nprop").laws[0] == lognormal(1.7, 1.7)
    assert get_scenario("mix", null=True).laws == [lognormal(2.3, 1.7)] * 4


def test_unknown_scenario():
    """Only built-in names are known"""
    with pytest.raises(ConfigError, match="Unknown scenario"):
        get_scenario("linear")


def test_true_null_pairs():
    """Contrasts of groups with equal laws are true nulls"""
    scenario = Scenario("pairs", [exponential(1), exponential(1), exponential(2)])
    assert scenario.true_null(1, 2)
    assert not scenario.true_null(1, 3)
    assert not scenario.is_null


def test_scenario_errors():
    """Validation of sizes, censoring, and laws"""
    with pytest.raises(ConfigError):
        Scenario("one", [exponential(1)])
    with pytest.raises(ConfigError):
        Scenario("short", [exponential(1), exponential(2)], n=[10, 10, 10])
    with pytest.raises(ConfigError, match="Censoring"):
        Scenario("heavy", [exponential(1), exponential(2)], censoring=0.5)
    with pytest.raises(ConfigError):
        exponential(-1)
    with pytest.raises(ConfigError, match="Unknown event-time law"):
        law_from_config({"law": "gompertz", "rate": 1})


def test_law_from_config():
    """Laws from dictionaries"""
    assert law_from_config({"law": "weibull", "shape": 2, "scale": 3}) == weibull(2, 3)
    with pytest.raises(ConfigError, match="law"):
        law_from_config({"rate": 1})
    with pytest.raises(ConfigError, match="Missing parameter"):
        law_from_config({"law": "lognormal", "meanlog": 1})


def test_exponential_draws():
    """Sample mean of exponential draws is 1 / rate"""
    draws = exponential(1.5).draw(10**6, RngStream(1))
    assert draws.mean() == pytest.approx(1 / 1.5, abs=0.002)
    assert np.all(draws > 0)


def test_draws_deterministic():
    """Same stream, same draws"""
    law = lognormal(1.7, 1.7)
    assert np.array_equal(law.draw(10, RngStream(3, 4)), law.draw(10, RngStream(3, 4)))


@pytest.mark.parametrize("proportion", [0.1, 0.2, 0.3])
def test_censoring_bound_exponential(proportion):
    """Closed form (1 - exp(-b)) / b for a unit rate"""
    bound = censoring_bound(exponential(1), proportion)
    assert (1 - np.exp(-bound)) / bound == pytest.approx(proportion, abs=1e-6)


@pytest.mark.parametrize("scenario", builtin_scenarios())
def test_censoring_bound_builtin_laws(scenario):
    """Every built-in law can be calibrated to 30 % censoring"""
    for law in scenario.laws:
        bound = censoring_bound(law, 0.3)
        assert censored_fraction(law, bound) == pytest.approx(0.3, abs=1e-6)


def test_censored_fraction_falls_with_bound():
    """Short censoring times censor most subjects, long ones few"""
    law = exponential(1)
    assert censored_fraction(law, 1.0) == pytest.approx(1 - np.exp(-1), abs=1e-8)
    assert censored_fraction(law, 1e-3) > 0.99
    assert censored_fraction(law, 100.0) == pytest.approx(0.01, abs=1e-6)
    assert censoring_bound(exponential(1.5), 0.1) > censoring_bound(exponential(1.5), 0.3)


def test_censoring_bound_invalid():
    """Proportion must be strictly between 0 and 1"""
    with pytest.raises(ConfigError):
        censoring_bound(exponential(1), 0)


def test_sample_censoring_rate():
    """Observed censored fraction is close to the target"""
    scenario = Scenario("big", [exponential(1.5), weibull(2.5, 5)], n=100000, censoring=0.3)
    sample = sample_scenario(scenario, RngStream(11))
    status = np.asarray(sample.status)
    groups = np.asarray(sample.groups)
    for group in (1, 2):
        assert 1 - status[groups == group].mean() == pytest.approx(0.3, abs=0.005)


def test_sample_without_censoring():
    """Zero target means every time is an event"""
    sample = sample_scenario(get_scenario("prop", n=30), RngStream(2))
    assert sample.n == 120
    assert np.all(np.asarray(sample.status) == 1)
    assert list(sample.group_sizes) == [30] * 4


def test_unbalanced_design():
    """Group sizes and censoring per group"""
    scenario = get_scenario("prop").with_design(n=[10, 20, 30, 40], censoring=[0, 0.1, 0.2, 0.3])
    sample = sample_scenario(scenario, RngStream(3))
    assert list(sample.group_sizes) == [10, 20, 30, 40]
    assert scenario.censoring == [0, 0.1, 0.2, 0.3]


def test_law_combinations():
    """Unordered assignments of distinct laws to groups"""
    assert len(law_combinations(get_scenario("prop"))) == 35
    two_laws = Scenario("two", [exponential(1), exponential(1), exponential(2), exponential(2)])
    assert len(law_combinations(two_laws)) == 5
    assert len(law_combinations(get_scenario("prop"), k=2)) == 10


def test_binomial_band():
    """Central interval of rejection counts as rates"""
    low, high = binomial_band(0.05, 10000, level=0.95)
    assert low == pytest.approx(0.0457, abs=2e-4)
    assert high == pytest.approx(0.0543, abs=2e-4)


def test_study_report_rates():
    """Rates, true nulls, and the band check"""
    report = StudyReport(runs=100, seed=1, alpha=0.05)
    scenario = Scenario("pairs", [exponential(1), exponential(1), exponential(2)])
    report.add(scenario, dunnett(3), "logrank", 7, [4, 90])
    result = report.result("pairs", "logrank")
    assert result["global_rate"] == 0.07
    assert result["local_rates"] == [0.04, 0.9]
    assert result["true_null"] == [True, False]
    assert result["local_false_rejection_rate"] == 0.04
    assert result["mean_local_power"] == 0.9
    assert not result["outside_band"]
    assert len(report.rows()) == 2
    with pytest.raises(KeyError):
        report.result("pairs", "mdir")


def test_study_report_outside_band():
    """A full-null rate far from alpha is flagged"""
    report = StudyReport(runs=1000, seed=1, alpha=0.05)
    scenario = get_scenario("prop-null")
    report.add(scenario, dunnett(4), "logrank", 200, [80, 70, 60])
    result = report.result("prop-null", "logrank")
    assert result["outside_band"]
    assert result["mean_local_power"] is None


def test_study_report_frame():
    """Rows as a data frame"""
    report = StudyReport(runs=10, seed=1, alpha=0.05)
    report.add(get_scenario("prop"), dunnett(4), "mdir", 3, [1, 2, 3])
    frame = report.to_frame()
    assert list(frame["contrast"]) == ["2 - 1", "3 - 1", "4 - 1"]
    assert list(frame["local_rate"]) == [0.1, 0.2, 0.3]


def test_run_study_single_run_matches_direct_call():
    """Run r uses data substream 0 of (seed, r)"""
    report = run_study(["prop"], ["logrank"], runs=1, n=20, seed=3)
    scenario = get_scenario("prop", n=20)
    sample = sample_scenario(scenario, RngStream(3, 0).spawn(0))
    direct = adjusted_logrank(sample, dunnett(4))
    result = report.result("prop", "logrank")
    assert result["global_rate"] == float(direct.global_rejected)
    assert result["local_rates"] == [float(rejected) for rejected in direct.rejected]


def test_run_study_deterministic():
    """Same seed, same report"""
    methods = ["logrank", "maxwlr", "casanova-rade"]
    first = run_study(["cross"], methods, runs=4, n=15, config=FAST_CONFIG, seed=21)
    second = run_study(["cross"], methods, runs=4, n=15, config=FAST_CONFIG, seed=21)
    assert first.as_dict() == second.as_dict()


def test_run_study_threads_do_not_change_result():
    """Counts are sums over runs"""
    methods = ["logrank", "casanova-pois"]
    single = run_study(["nprop"], methods, runs=6, n=15, config=FAST_CONFIG, seed=22, threads=1)
    parallel = run_study(["nprop"], methods, runs=6, n=15, config=FAST_CONFIG, seed=22, threads=2)
    assert single.as_dict() == parallel.as_dict()


def test_run_study_methods_are_independent():
    """Adding a method does not change the results of another"""
    alone = run_study(["mix"], ["maxwlr"], runs=5, n=15, config=FAST_CONFIG, seed=23)
    together = run_study(
        ["mix"], ["logrank", "maxwlr"], runs=5, n=15, config=FAST_CONFIG, seed=23
    )
    assert alone.result("mix", "maxwlr") == together.result("mix", "maxwlr")


def test_run_study_reporter():
    """Reporter is told about scenarios and runs"""
    reporter = CountingReporter()
    run_study(["prop", "prop-null"], ["logrank"], runs=3, n=10, seed=1, reporter=reporter)
    assert reporter.started == [("prop", 3), ("prop-null", 3)]
    assert reporter.finished == 6


def test_run_study_requires_runs():
    """At least one run"""
    with pytest.raises(ConfigError, match="runs"):
        run_study(["prop"], ["logrank"], runs=0)


def test_run_study_random_seed_is_reported():
    """A missing seed is drawn and recorded"""
    report = run_study(["prop"], ["logrank"], runs=1, n=10)
    assert isinstance(report.seed, int)


def test_dunnett_rejects_at_least_tukey_in_study():
    """Shared contrasts are rejected at least as often with fewer contrasts"""
    dunnett_report = run_study(["prop"], ["logrank"], contrasts="dunnett", runs=20, n=15, seed=5)
    tukey_report = run_study(["prop"], ["logrank"], contrasts="tukey", runs=20, n=15, seed=5)
    shared = tukey_report.result("prop", "logrank")["local_rates"][:3]
    for dunnett_rate, tukey_rate in zip(
        dunnett_report.result("prop", "logrank")["local_rates"], shared
    ):
        assert dunnett_rate >= tukey_rate


def test_scenario_from_config():
    """Built-in names and custom laws"""
    scenario = scenario_from_config({"name": "cross", "null": True, "n": 25, "censoring": 0.1})
    assert scenario.name == "cross-null"
    assert scenario.sizes == [25] * 4
    custom = scenario_from_config(
        {
            "name": "two",
            "laws": [{"law": "exponential", "rate": 1}, {"law": "exponential", "rate": 2}],
        }
    )
    assert custom.k == 2
    with pytest.raises(ConfigError):
        scenario_from_config({"n": 10})


def test_run_study_from_config():
    """Study section of a YAML configuration"""
    config = load_configuration_yaml_from_text(
        textwrap.dedent(
            """
        study:
          runs: 3
          seed: 4
          methods: [logrank, mdir]
          contrasts: tukey
          alpha: 0.1
        scenario:
          name: prop
          n: 12
            """
        )
    )
    report = run_study_from_config(config)
    assert report.runs == 3
    assert report.seed == 4
    assert report.alpha == 0.1
    assert len(report.result("prop", "mdir")["local_rates"]) == 6
    assert run_study_from_config(config, seed=9).seed == 9


STUDY_CONFIG = {"bootstrap": {"iterations": 500}, "monte_carlo": {"samples": 50000}}


@pytest.mark.slow
@pytest.mark.parametrize("contrasts", ["dunnett", "tukey"])
@pytest.mark.parametrize("name", ["prop-null", "nprop-null", "cross-null", "mix-null"])
def test_familywise_error_under_full_null(name, contrasts):
    """Familywise error of every method lies in the band around 5 %"""
    report = run_study(
        [name],
        METHODS,
        contrasts=contrasts,
        runs=1000,
        n=100,
        config=STUDY_CONFIG,
        seed=31,
        threads=-1,
    )
    for method in METHODS:
        assert 0.030 <= report.result(name, method)["global_rate"] <= 0.070, method


@pytest.mark.slow
def test_crossing_hazards_power_ordering():
    """Methods for crossing hazards beat the log-rank test on groups 1 and 4"""
    methods = ["logrank", "mdir", "casanova-rade", "casanova-pois"]
    report = run_study(
        ["cross"], methods, runs=500, n=100, config=STUDY_CONFIG, seed=32, threads=-1
    )
    index = report.result("cross", "logrank")["contrasts"].index("4 - 1")
    logrank_power = report.result("cross", "logrank")["local_rates"][index]
    for method in methods[1:]:
        assert report.result("cross", method)["local_rates"][index] >= logrank_power + 0.10, method


@pytest.mark.slow
def test_log_rank_most_powerful_under_proportional_hazards():
    """No method is clearly more powerful than the log-rank test"""
    report = run_study(["prop"], METHODS, runs=500, config=STUDY_CONFIG, seed=33, threads=-1)
    logrank_power = report.result("prop", "logrank")["mean_local_power"]
    for method in METHODS[1:]:
        assert logrank_power >= report.result("prop", method)["mean_local_power"] - 0.02, method
