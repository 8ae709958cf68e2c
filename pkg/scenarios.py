from survcontrasts.scenarios import run_scenarios, load_scenario_table
from survcontrasts.simulation import load_configuration
from survcontrasts.outputs import save_scenario_result_to_table


def main():
    basic_config = load_configuration("config.yml")
    scenario_table = load_scenario_table("tests/test_scenarios/scenarios_config.csv")
    results = run_scenarios(
        config=basic_config,
        scenario_table=scenario_table,
        seed=42,
        threads=4,
    )
    assert len(scenario_table) == len(results)
    save_scenario_result_to_table(
        "results.csv",
        results,
        config_columns=[
            "name",
            "scenario/name",
            "scenario/n",
            "scenario/censoring",
            "study/contrasts",
            "study/alpha",
        ],
    )


if __name__ == "__main__":
    main()
