#!/usr/bin/env python3

############################################################################
#                                                                          #
#  GradFlow - Gradient flow maximal function toolkit                       #
#  Copyright (C) 2026  GradFlow developers                                 #
#                                                                          #
#  This program is free software: you can redistribute it and/or modify    #
#  it under the terms of the GNU General Public License as published by    #
#  the Free Software Foundation, either version 3 of the License, or       #
#  (at your option) any later version.                                     #
#                                                                          #
#  This program is distributed in the hope that it will be useful,         #
#  but WITHOUT ANY WARRANTY; without even the implied warranty of          #
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the           #
#  GNU General Public License for more details.                            #
#                                                                          #
#  You should have received a copy of the GNU General Public License       #
#  along with this program.  If not, see <https://www.gnu.org/licenses/>.  #
#                                                                          #
############################################################################



import os
import sys
import time

import click
import loguru
import numpy as np

from gf_config import DEFAULTS, PRESETS, parse_config
from gf_energy import RegionMask
from gf_ensemble import SOURCES, bumps, fourier, run_ensemble, summarize
from gf_errors import GradflowError
from gf_heat_kernel import CERTIFICATE_FIELDS
from gf_maximal import MAXIMAL_FIELDS, MaximalResult, detachment_set
from gf_operator import assemble
from gf_pflow import TRACE_FIELDS, solve_flow
from gf_pflow_checks import check_boundedness, check_positivity, support_radii
from gf_report import write_csv, write_json
from gf_verify import REPORT_FIELDS, ContractionReport, contraction_report

logger = loguru.logger.bind(stage="cli")

STATE_FIELDS = ["node_index", "t", "value"]
SUPPORT_THRESHOLD = 1e-8

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


def setup_logging(level):
    """ Single stderr sink carrying the bound stage and scenario """

    loguru.logger.remove()
    loguru.logger.configure(extra={"scenario": "", "stage": ""})
    loguru.logger.add(
        sys.stderr,
        colorize=True,
        level=level.upper(),
        format="<green>{time:YY-MM-DD HH:mm:ss}</green> <level>| {level:7} "
        + "|</level> <level>{extra[stage]:12} | <normal><cyan>{function:28}</cyan></normal> | {extra[scenario]:36} | {message}</level>",
    )


def run_flow(config):
    """ Single flow from generated data with its trace, maximal function and state dumps """

    grid = config.grid()
    rng = np.random.default_rng(config["ensemble"]["seed"])
    f = (bumps if config["ensemble"]["generator"] == "bumps" else fourier)(grid, rng)
    kernel = config.kernel(grid, rng)
    timegrid = config.timegrid()
    name = f"run-flow-{kernel.name}-{grid.dim}d-n{grid.shape[0]}"

    with logger.contextualize(scenario=name):
        trace = solve_flow(f, timegrid, kernel, config.proximal())
        radii = support_radii(trace, RegionMask(grid, f.values > 0), SUPPORT_THRESHOLD)
        result = MaximalResult(f, trace.states, timegrid, "pflow")
        detachment = detachment_set(result, config["solver"]["detachment_tol"])

        reports = [contraction_report(result, kernel, name, config["ensemble"]["seed"], config["solver"]["detachment_tol"], config["solver"]["rel_tol"])]
        for check in (trace.check_energy_estimates(), check_positivity(trace), check_boundedness(trace)):
            reports.append(ContractionReport.from_check(name, config["ensemble"]["seed"], check))

    states = (
        {"node_index": index, "t": float(t), "value": float(value)} for t, state in zip(timegrid, trace.states) for index, value in enumerate(state.flat())
    )

    artifacts = {
        "trace.csv": (TRACE_FIELDS, list(trace.rows(radii))),
        "maximal.csv": (MAXIMAL_FIELDS, list(result.rows(detachment))),
        "states.csv": (STATE_FIELDS, list(states)),
    }
    return reports, artifacts


def verify(config):
    return run_ensemble(config.ensemble(), config["ensemble"]["checks"]), {}


def sweep(config):
    """ Same ensemble replayed for every extension source """

    reports = []
    for source in SOURCES:
        reports.extend(run_ensemble(config.ensemble(source), config["ensemble"]["checks"]))
    return reports, {}


def kernel_check(config):
    """ Heat kernel columns with positivity, mass, symmetry and the Gaussian bound certificate """

    grid = config.grid()
    rng = np.random.default_rng(config["ensemble"]["seed"])
    operator = assemble(grid, config.coefficients(grid, rng), config["solver"]["spectral_cap"])

    times = np.geomspace(grid.h**2, 1.0, 5)
    nodes = sorted({int(np.ravel_multi_index(tuple(_ // 2 for _ in grid.shape), grid.shape)), *(int(_) for _ in rng.integers(0, grid.size, 2))})
    name = f"kernel-check-{config.coefficient_kind()}-{grid.dim}d-n{grid.shape[0]}"

    with logger.contextualize(scenario=name):
        rows, report = operator.gaussian_certificate(times, nodes)

    return [ContractionReport.from_check(name, config["ensemble"]["seed"], report)], {"certificates.csv": (CERTIFICATE_FIELDS, rows)}


COMMANDS = {"run-flow": run_flow, "verify": verify, "kernel-check": kernel_check, "sweep": sweep}


def write_summary(directory, reports, started, error=None):
    summary = summarize(reports, time.perf_counter() - started)

    if error is not None:
        summary["error"] = f"{type(error).__name__}: {error}"

    write_json(os.path.join(directory, "summary.json"), summary)
    return summary


def execute(config):
    """ Run the configured command and write its artifacts, returns the exit status

    0 when every row passed, 1 on any FAIL row or failed secondary check, 2 on an execution error. summary.json is
    written in every case, CSV artifacts only after the whole run succeeded.
    """

    started = time.perf_counter()
    directory = config["output"]["directory"]
    formats = config["output"]["formats"]

    try:
        reports, artifacts = COMMANDS[config.command](config)

        if "csv" in formats:
            for filename, (fields, rows) in artifacts.items():
                write_csv(os.path.join(directory, filename), fields, rows)
            write_csv(os.path.join(directory, "report.csv"), REPORT_FIELDS, [_.row() for _ in reports])

        if "json" in formats:
            write_json(os.path.join(directory, "report.json"), [_.row() for _ in reports])

    except (GradflowError, OSError, ValueError) as error:
        logger.error(f"{config.command} failed: {type(error).__name__}: {error}")
        write_summary(directory, [], started, error)
        return EXIT_ERROR

    summary = write_summary(directory, reports, started)
    logger.info(f"{summary['pass']} of {summary['total']} checks passed, artifacts in {directory}")
    return EXIT_PASS if summary["fail"] == 0 and summary["secondary_fail"] == 0 else EXIT_FAIL


def config_options(command):
    """ One --section-key option per configuration key, --p aliases --kernel-p """

    for section, values in reversed(list(DEFAULTS.items())):
        for key, default in reversed(list(values.items())):
            declarations = [f"--{section}-{key.replace('_', '-')}"] + (["--p"] if (section, key) == ("kernel", "p") else [])
            kind = str if isinstance(default, (list, str)) else type(default)
            command = click.option(*declarations, f"{section}__{key}", type=kind, default=None, help=f"[{section}] {key}, default {default!r}")(command)

    return command


def make_command(name, description):
    @click.option("--config", "config_path", default=None, help="TOML configuration file")
    @click.option("--preset", default=None, type=click.Choice(sorted(PRESETS)), help="Named partial configuration")
    @click.pass_context
    def command(ctx, config_path, preset, **options):
        flags = {tuple(key.split("__")): value for key, value in options.items()}
        started = time.perf_counter()

        try:
            config = parse_config(config_path, flags, preset, name)

        except GradflowError as error:
            logger.error(f"Invalid configuration: {error}")
            directory = flags.get(("output", "directory")) or DEFAULTS["output"]["directory"]
            try:
                write_summary(directory, [], started, error)
            except OSError as write_error:
                logger.error(f"Cannot write summary: {write_error}")
            ctx.exit(EXIT_ERROR)

        ctx.exit(execute(config))

    command.__doc__ = description
    cli.command(name)(config_options(command))


@click.group()
@click.option("--log-level", default="INFO", type=click.Choice(["TRACE", "DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def cli(log_level):
    """ Gradient flow maximal functions, energy contraction checks and artifacts """

    setup_logging(log_level)


make_command("run-flow", "Solve one flow, write trace.csv, maximal.csv and states.csv")
make_command("verify", "Run the contraction ensemble, write report.csv")
make_command("kernel-check", "Certify heat kernel columns, write certificates.csv")
make_command("sweep", "Run the ensemble for the p-flow, heat and Poisson extensions")


if __name__ == "__main__":
    cli()
