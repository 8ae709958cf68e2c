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
Progress reporters and output formats for test reports, studies, and curves

Test reports are duck-typed, see :class:`survcontrasts.procedures.TestReport`.
"""

import csv
import json
import sys
from functools import reduce
import operator


class PrintReporter:
    """Reporter class which prints a line to standard error for each event"""

    # Reporter objects carry functions, but many not use any attributes.
    # pylint: disable=no-self-use,missing-function-docstring
    def scenario_started(self, name, runs):
        print("Scenario {name}: {runs} runs".format(**locals()), file=sys.stderr)

    def run_finished(self, name, run, runs):
        print("Scenario {name}: run {run} of {runs} done".format(**locals()), file=sys.stderr)

    def degenerate_contrast(self, method, label):
        print(
            "{method}: contrast {label} is degenerate (no information), p = 1".format(
                **locals()
            ),
            file=sys.stderr,
        )


class MuteReporter:
    """Reporter class which is completely silent"""

    # pylint: disable=no-self-use,missing-function-docstring
    def scenario_started(self, name, runs):
        pass

    def run_finished(self, name, run, runs):
        pass

    def degenerate_contrast(self, method, label):
        pass


def get_reporter(verbose):
    """Printing reporter when verbose, silent one otherwise"""
    if verbose:
        return PrintReporter()
    return MuteReporter()


def format_pvalue(pvalue, rejected=False):
    """Three decimals, ``<0.001`` for small values, ``*`` when rejected"""
    if pvalue < 0.001:
        text = "<0.001"
    else:
        text = "{pvalue:.3f}".format(**locals())
    if rejected:
        text += "*"
    return text


def text_table(reports):
    """Adjusted p-values as a plain text table, one column per method

    Significant local tests (adjusted p-value at most alpha) are marked
    with ``*``. The last rows give the number of local rejections and the
    global p-value of each method.
    """
    if not reports:
        return ""
    first = reports[0]
    header = ["Contrast"] + [report.method for report in reports]
    rows = [header]
    for index, label in enumerate(first.labels):
        rows.append(
            [label]
            + [
                format_pvalue(report.pvalues[index], report.rejected[index])
                for report in reports
            ]
        )
    rows.append(["Rejections"] + [str(report.num_rejected) for report in reports])
    rows.append(
        ["Global"]
        + [format_pvalue(report.global_pvalue, report.global_rejected) for report in reports]
    )
    widths = [max(len(row[column]) for row in rows) for column in range(len(header))]
    lines = [
        "alpha = {alpha:g}, Bonferroni level = {level:.4f}, {q} contrasts".format(
            alpha=first.alpha, level=first.alpha / len(first.labels), q=len(first.labels)
        )
    ]
    for number, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [
            cell.rjust(width) for cell, width in zip(row[1:], widths[1:])
        ]
        lines.append("  ".join(cells).rstrip())
        if number == 0 or number == len(first.labels):
            lines.append("  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def reports_to_dict(reports, group_labels=None):
    """Combined JSON-serializable dictionary of several test reports"""
    return {
        "groups": list(group_labels) if group_labels else None,
        "reports": [report.as_dict() for report in reports],
    }


def reports_to_json(reports, group_labels=None):
    """Combined reports as deterministic JSON text"""
    return json.dumps(reports_to_dict(reports, group_labels), indent=2) + "\n"


def reports_to_rows(reports):
    """One row per contrast with statistic, p-value, and decision of each method"""
    rows = []
    first = reports[0]
    for index, (label, pair) in enumerate(zip(first.labels, first.pairs)):
        row = {"contrast": label, "j1": pair[0], "j2": pair[1]}
        for report in reports:
            row["{method}_statistic".format(method=report.method)] = report.statistics[index]
            row["{method}_p".format(method=report.method)] = report.pvalues[index]
            row["{method}_rejected".format(method=report.method)] = report.rejected[index]
        rows.append(row)
    return rows


def reports_to_pandas(reports):
    """Combined reports as a pandas DataFrame, one row per contrast"""
    # We don't want a special dependency to fail import of this file
    # in case this function is not used.
    import pandas as pd  # pylint: disable=import-outside-toplevel

    return pd.DataFrame.from_records(reports_to_rows(reports))


def save_rows_to_table(filename, rows):
    """Save a list of dictionaries as CSV (columns from the first row)"""
    with open(filename, "w", newline="") as file:
        write_rows_to_table(file, rows)


def write_rows_to_table(file, rows):
    """Write a list of dictionaries as CSV to an open text stream"""
    if not rows:
        return
    writer = csv.DictWriter(
        file,
        list(rows[0].keys()),
        delimiter=",",
        quotechar='"',
        lineterminator="\n",
        quoting=csv.QUOTE_MINIMAL,
    )
    writer.writeheader()
    for row in rows:
        writer.writerow(row)


def study_to_json(report):
    """Study report as deterministic JSON text"""
    return json.dumps(report.as_dict(), indent=2) + "\n"


def study_text_table(report):
    """Global and mean local rejection rates per scenario and method"""
    low, high = report.band
    lines = [
        "{runs} runs, seed {seed}, alpha = {alpha:g}, "
        "{level:g}% binomial band [{low:.4f}, {high:.4f}]".format(
            runs=report.runs,
            seed=report.seed,
            alpha=report.alpha,
            level=report.band_level * 100,
            low=low,
            high=high,
        )
    ]
    for result in report.results:
        kind = "FWER" if result["null"] else "global rejection rate"
        flag = " (outside band)" if result["outside_band"] else ""
        lines.append(
            "{scenario} {method}: {kind} {rate:.4f}{flag}".format(
                scenario=result["scenario"],
                method=result["method"],
                kind=kind,
                rate=result["global_rate"],
                flag=flag,
            )
        )
        for label, null, rate in zip(
            result["contrasts"], result["true_null"], result["local_rates"]
        ):
            lines.append(
                "  {label}: {rate:.4f}{null}".format(
                    label=label, rate=rate, null=" (true null)" if null else ""
                )
            )
    return "\n".join(lines) + "\n"


def survival_curve_rows(sample):
    """Kaplan-Meier survivor curve of each group as rows (group, time, survival)

    Each curve starts with time 0 and survival 1 and has one more row
    at each event time of its group.
    """
    # pylint: disable=import-outside-toplevel
    from .estimators import kaplan_meier_pooled
    from .survdata import build_risk_table

    rt = build_risk_table(sample) if sample.num_events else None
    rows = []
    for group, label in enumerate(sample.labels, start=1):
        rows.append({"group": label, "time": 0.0, "survival": 1.0})
        if rt is None:
            continue
        curve = kaplan_meier_pooled(rt, [group])
        for time, value in zip(curve.jump_times, curve.values):
            rows.append({"group": label, "time": float(time), "survival": float(1 - value)})
    return rows


def survival_curves_to_pandas(sample):
    """Kaplan-Meier survivor curves as a pandas DataFrame"""
    # We don't want a special dependency to fail import of this file
    # in case this function is not used.
    import pandas as pd  # pylint: disable=import-outside-toplevel

    return pd.DataFrame.from_records(
        survival_curve_rows(sample), columns=["group", "time", "survival"]
    )


def get_item_from_nested_dict(dictionary, keys):
    """Get value from a nested dictionary by a nested keys-value pair"""
    return reduce(operator.getitem, keys, dictionary)


def _scenario_result_rows(results, config_columns):
    rows = []
    for report, config in results:
        config_values = {}
        for column in config_columns:
            keys = column.split("/")
            config_values[column] = get_item_from_nested_dict(config, keys)
        for row in report.rows():
            combined = dict(config_values)
            combined.update(row)
            rows.append(combined)
    return rows


def save_scenario_result_to_table(filename, results, config_columns):
    """Save study results of all scenario table rows to CSV including configuration

    The results parameter is list of tuples which is output from the run_scenarios()
    function.

    Values from configuration are selected by columns parameter which are
    in format key/subkey/subsubkey.
    """
    save_rows_to_table(filename, _scenario_result_rows(results, config_columns))


def save_scenario_result_to_pandas(results, config_columns):
    """Save study results of all scenario table rows to a pandas DataFrame

    See :func:`save_scenario_result_to_table` for the parameters.
    """
    # We don't want a special dependency to fail import of this file
    # in case this function is not used.
    import pandas as pd  # pylint: disable=import-outside-toplevel

    return pd.DataFrame.from_records(_scenario_result_rows(results, config_columns))
