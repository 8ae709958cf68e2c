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
CLI for multiple contrast tests and simulation studies

Exit status is 0 on success (whatever the test decisions), 2 for usage and
configuration errors, and 3 for data errors.
"""

import argparse
import os
import sys

from .design import ConfigError, check_weights, parse_contrasts, parse_weights
from .numerics import DEFAULT_MC_SAMPLES, RngStream
from .outputs import (
    get_reporter,
    reports_to_json,
    reports_to_rows,
    study_text_table,
    study_to_json,
    survival_curve_rows,
    text_table,
    write_rows_to_table,
)
from .procedures import (
    DEFAULT_BOOTSTRAP_ITERATIONS,
    METHODS,
    check_alpha,
    get_procedure_function,
    method_stream,
    parse_methods,
)
from .simulation import (
    get_scenario,
    load_configuration,
    run_study,
    run_study_from_config,
)
from .survdata import DataError, load_sample

THREADS_VARIABLE = "SURVCONTRASTS_THREADS"
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3


class CustomHelpFormatter(argparse.RawTextHelpFormatter):
    """Help formatter to have uppercase, not lowercase usage"""

    def add_usage(self, usage, actions, groups, prefix=None):
        """Add usage text"""
        if prefix is None:
            prefix = "Usage: "
        return super().add_usage(usage, actions, groups, prefix)


def get_executable_name():
    """Get name of the executable

    Returns "python -m module" if executed with python -m in command line.

    This is a workaround for:
    argparse support for "python -m module" in help
    https://bugs.python.org/issue22240
    """
    if globals().get("__spec__") is None:
        return None
    return "python -m {}".format(__spec__.name.partition(".")[0])


def default_threads():
    """Thread count from the environment, 1 when unset"""
    value = os.environ.get(THREADS_VARIABLE, "1")
    try:
        return int(value)
    except ValueError:
        raise ConfigError(
            "{variable} must be an integer, got '{value}'".format(
                variable=THREADS_VARIABLE, value=value
            )
        )


def joblib_jobs(threads):
    """Translate the thread option (0 = all cores) to joblib n_jobs"""
    if threads < 0:
        raise ConfigError(
            "Number of threads must not be negative, got {threads}".format(**locals())
        )
    if threads == 0:
        return -1
    return threads


def parse_group_sizes(text):
    """Group size as an integer or a comma-separated list of integers"""
    try:
        values = [int(item) for item in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("invalid group size: '{text}'".format(**locals()))
    return values[0] if len(values) == 1 else values


def parse_censoring(text):
    """Censoring target as a number or a comma-separated list of numbers"""
    try:
        values = [float(item) for item in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("invalid censoring: '{text}'".format(**locals()))
    return values[0] if len(values) == 1 else values


def add_column_arguments(group):
    """Options naming the input columns"""
    group.add_argument("--time-column", default="time", help="Column with observed times")
    group.add_argument(
        "--status-column",
        default="status",
        help="Column with event indicators (1 event, 0 censored)",
    )
    group.add_argument("--group-column", default="group", help="Column with group labels")


def add_method_arguments(group, iterations, samples):
    """Options of the test procedures shared by test and simulate"""
    group.add_argument(
        "--methods",
        default=",".join(METHODS),
        help="Comma-separated methods (default: all)\n    " + ", ".join(METHODS),
    )
    group.add_argument(
        "--weights",
        default="fh:0:0,cross",
        help="Comma-separated weights: fh:r:g, cross, tab:u/v;u/v\n"
        "(default: fh:0:0,cross)",
    )
    group.add_argument("--alpha", type=float, default=0.05, help="Familywise level (default: 0.05)")
    group.add_argument(
        "--iterations",
        type=int,
        default=iterations,
        help="Wild bootstrap iterations (default: {iterations})".format(**locals()),
    )
    group.add_argument(
        "--mc-samples",
        type=int,
        default=samples,
        help="Monte Carlo samples for the max test (default: {samples})".format(**locals()),
    )
    group.add_argument(
        "--one-sided", action="store_true", help="One-sided maximum in the max test"
    )


def add_common_arguments(group):
    """Seed, threads, output, and help options"""
    group.add_argument("--seed", type=int, help="Master seed for random streams")
    group.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Worker threads, 0 for all cores\n"
        "(default: ${variable} or 1)".format(variable=THREADS_VARIABLE),
    )
    group.add_argument("--output", help="Output file (default: standard output)")
    group.add_argument(
        "--format", choices=("text", "json", "csv"), default="text", help="Output format"
    )
    group.add_argument("-v", "--verbose", action="store_true", help="Print progress messages")
    group.add_argument(
        "-h",
        "--help",
        action="help",
        default=argparse.SUPPRESS,
        help="Show this help message and exit",
    )


def build_parser():
    """Create the argument parser with test, simulate, and km-export commands"""
    parser = argparse.ArgumentParser(
        description="Multiple contrast tests for right-censored survival data",
        formatter_class=CustomHelpFormatter,
        prog=get_executable_name(),
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    test = subparsers.add_parser(
        "test",
        help="Test pairwise contrasts on a data file",
        formatter_class=CustomHelpFormatter,
        add_help=False,
    )
    data = test.add_argument_group("Data")
    data.add_argument("--input", required=True, help="CSV file with a header row")
    add_column_arguments(data)
    data.add_argument("--reference", help="Group label to use as group 1 (Dunnett reference)")
    procedure = test.add_argument_group("Procedures")
    procedure.add_argument(
        "--contrast", default="dunnett", help="dunnett, tukey, or pairs:1-2,1-3 (default: dunnett)"
    )
    add_method_arguments(procedure, DEFAULT_BOOTSTRAP_ITERATIONS, DEFAULT_MC_SAMPLES)
    add_common_arguments(test.add_argument_group("Output"))

    simulate = subparsers.add_parser(
        "simulate",
        help="Run a Monte Carlo study of familywise error and power",
        formatter_class=CustomHelpFormatter,
        add_help=False,
    )
    study = simulate.add_argument_group("Study")
    study.add_argument(
        "--scenario", default="prop", help="Built-in scenario: prop, nprop, cross, mix"
    )
    study.add_argument("--null", action="store_true", help="All groups use the first law")
    study.add_argument("--config", help="Study configuration file (YAML or JSON)")
    study.add_argument("--contrast", choices=("dunnett", "tukey"), default="dunnett")
    study.add_argument("--runs", type=int, default=1000, help="Simulation runs (default: 1000)")
    study.add_argument("--n", type=parse_group_sizes, default=100, help="Group size or list")
    study.add_argument(
        "--censoring", type=parse_censoring, default=0.0, help="Censoring target in [0, 0.3]"
    )
    add_method_arguments(study.add_argument_group("Procedures"), 500, 50000)
    add_common_arguments(simulate.add_argument_group("Output"))

    export = subparsers.add_parser(
        "km-export",
        help="Export Kaplan-Meier curves of each group",
        formatter_class=CustomHelpFormatter,
        add_help=False,
    )
    data = export.add_argument_group("Data")
    data.add_argument("--input", required=True, help="CSV file with a header row")
    add_column_arguments(data)
    data.add_argument("--reference", help="Group label to list first")
    data.add_argument("--output", help="Output CSV file (default: standard output)")
    data.add_argument(
        "-h",
        "--help",
        action="help",
        default=argparse.SUPPRESS,
        help="Show this help message and exit",
    )
    return parser


def write_output(text, filename):
    """Write text to a file or to standard output"""
    if filename:
        with open(filename, "w", newline="") as file:
            file.write(text)
    else:
        sys.stdout.write(text)


def rows_to_text(rows):
    """CSV text of a list of dictionaries"""
    # pylint: disable=import-outside-toplevel
    import io

    buffer = io.StringIO()
    write_rows_to_table(buffer, rows)
    return buffer.getvalue()


def read_sample(args):
    """Load the input sample and apply the reference group"""
    sample = load_sample(
        args.input,
        time_column=args.time_column,
        status_column=args.status_column,
        group_column=args.group_column,
    )
    if args.reference is not None:
        sample = sample.with_reference(args.reference)
    return sample


def procedure_config(args):
    """Procedure configuration from the command line options"""
    check_alpha(args.alpha)
    weights = parse_weights(args.weights)
    check_weights(weights)
    threads = args.threads if args.threads is not None else default_threads()
    return {
        "alpha": args.alpha,
        "weights": weights,
        "bootstrap": {"iterations": args.iterations},
        "monte_carlo": {"samples": args.mc_samples, "two_sided": not args.one_sided},
        "threads": joblib_jobs(threads),
    }


def cmd_test(args):
    """Run the selected procedures on one sample and write a combined report"""
    config = procedure_config(args)
    methods = parse_methods(args.methods)
    sample = read_sample(args)
    contrasts = parse_contrasts(args.contrast, sample.k)
    reporter = get_reporter(args.verbose)
    stream = RngStream(args.seed)
    reports = []
    for method in methods:
        procedure = get_procedure_function(method, config, reporter=reporter)
        reports.append(procedure(sample, contrasts, method_stream(stream, method)))
    if args.format == "json":
        text = reports_to_json(reports, sample.labels)
    elif args.format == "csv":
        text = rows_to_text(reports_to_rows(reports))
    else:
        text = text_table(reports)
    write_output(text, args.output)
    return 0


def cmd_simulate(args):
    """Run a simulation study and write the study report"""
    config = procedure_config(args)
    threads = config.pop("threads")
    reporter = get_reporter(args.verbose)
    if args.config:
        study_config = load_configuration(args.config)
        study_config.setdefault("study", {})
        report = run_study_from_config(
            study_config, seed=args.seed, threads=threads, reporter=reporter
        )
    else:
        methods = parse_methods(args.methods)
        scenario = get_scenario(args.scenario, null=args.null)
        report = run_study(
            [scenario],
            methods,
            contrasts=args.contrast,
            runs=args.runs,
            n=args.n,
            censoring=args.censoring,
            config=config,
            seed=args.seed,
            threads=threads,
            reporter=reporter,
        )
    if args.format == "json":
        text = study_to_json(report)
    elif args.format == "csv":
        text = rows_to_text(report.rows())
    else:
        text = study_text_table(report)
    write_output(text, args.output)
    return 0


def cmd_km_export(args):
    """Write Kaplan-Meier survivor curves of all groups as CSV"""
    sample = read_sample(args)
    write_output(rows_to_text(survival_curve_rows(sample)), args.output)
    return 0


COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "km-export": cmd_km_export}


def main(argv=None):
    """Process command line parameters and run the selected command"""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except DataError as error:
        print("Data error: {error}".format(**locals()), file=sys.stderr)
        return EXIT_DATA_ERROR
    except ConfigError as error:
        print("Configuration error: {error}".format(**locals()), file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
