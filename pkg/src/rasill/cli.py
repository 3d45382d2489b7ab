"""Command-line interface.

Exit codes: 0 on success, 1 when a check or bound fails, 2 on usage errors
(bad flags, unknown or non-closed main).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .analysis import PRESETS, ClientScript, compare_clients, table
from .core import Metric, Signature
from .errors import MainNotClosed, NoSuchMain, RasillError, RsillSyntaxError
from .monitor import bound_report, check_monotone, deep_check
from .parser import parse_program
from .runtime import RandomScheduler, RoundRobin, run
from .typechecker import check_signature

FAILURE = 1
MAX_LISTED = 5


def _parse_metric(ctx, param, value: str | None) -> Metric:
    if value is None:
        return Metric.standard()
    parts = value.split(",")
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        nums = []
    if len(nums) != 3 or min(nums) < 0:
        raise click.BadParameter("expected three naturals L,C,E", ctx=ctx, param=param)
    return Metric(*nums)


def _load(path: str) -> Signature:
    try:
        return parse_program(Path(path).read_text(encoding="utf-8"), validate=False)
    except RsillSyntaxError as exc:
        click.echo(f"{path}:{exc}", err=True)
        sys.exit(FAILURE)


metric_option = click.option(
    "--metric", callback=_parse_metric, metavar="L,C,E",
    help="Cost of a label, a channel and a close message (default 1,1,1).",
)


@click.group()
@click.version_option(package_name="artifact")
def main() -> None:
    """Typecheck, run and bound resource-annotated session-typed programs."""


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--indices", default=64, show_default=True, type=click.IntRange(min=0),
              help="Check indexed definitions at every index vector up to this bound.")
@metric_option
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON.")
def check(file: str, indices: int, metric: Metric, as_json: bool) -> None:
    """Typecheck every definition of FILE."""
    report = check_signature(_load(file), metric, indices)
    if as_json:
        click.echo(json.dumps(report.to_json(), indent=2))
    else:
        failures = report.failures()
        for e in failures[:MAX_LISTED]:
            click.echo(f"FAIL {e.message}")
        if len(failures) > MAX_LISTED:
            click.echo(f"... {len(failures) - MAX_LISTED} more failures (use --json for all)")
        verdict = "ok" if report.ok else "FAILED"
        click.echo(f"{file}: {len(report.entries)} checked, {len(report.failures())} failed, {verdict}")
    sys.exit(0 if report.ok else FAILURE)


def _run_options(f):
    for opt in reversed([
        click.argument("file", type=click.Path(exists=True, dir_okay=False)),
        click.option("--main", "main_name", required=True, help="Closed definition to run."),
        click.option("--scheduler", type=click.Choice(["rr", "rand"]), default="rr", show_default=True),
        click.option("--seed", type=int, default=0, show_default=True, help="Seed for --scheduler rand."),
        metric_option,
        click.option("--max-steps", type=click.IntRange(min=1), default=100_000, show_default=True),
        click.option("--trace", "trace_out", type=click.Path(dir_okay=False, writable=True),
                     help="Write the trace as JSON lines."),
        click.option("--deep-check", is_flag=True, help="Retype the configuration after every step."),
    ]):
        f = opt(f)
    return f


@main.command("run")
@_run_options
@click.option("--monitor", is_flag=True, help="Check weight monotonicity and the work bound.")
def run_cmd(file, main_name, scheduler, seed, metric, max_steps, trace_out, deep_check, monitor):
    """Run a closed definition of FILE."""
    _execute(file, main_name, scheduler, seed, metric, max_steps, trace_out, deep_check, monitor)


@main.command()
@_run_options
def bound(file, main_name, scheduler, seed, metric, max_steps, trace_out, deep_check):
    """Run a closed definition and compare its initial potential with its work."""
    _execute(file, main_name, scheduler, seed, metric, max_steps, trace_out, deep_check, True)


def _execute(file, main_name, scheduler, seed, metric, max_steps, trace_out, deep, monitor) -> None:
    sig = _load(file)
    try:
        sig.validate()
    except RasillError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(FAILURE)
    sched = RandomScheduler(seed) if scheduler == "rand" else RoundRobin()
    try:
        trace = run(sig, main_name, sched, metric, max_steps)
    except (NoSuchMain, MainNotClosed) as exc:
        raise click.UsageError(str(exc))
    except RasillError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(FAILURE)
    if trace_out:
        Path(trace_out).write_text(trace.to_jsonl(), encoding="utf-8")
    out = trace.summary()
    failed = False
    if monitor:
        mono = check_monotone(trace)
        report = bound_report(trace)
        out["monotone"] = bool(mono)
        if not mono:
            out["violation"] = {"step": mono.step, "before": mono.before, "after": mono.after}
        out["bound"] = report.to_json()
        failed = not mono or not report.holds
    if deep:
        try:
            deep_check(sig, trace, metric)
            out["deepCheck"] = "ok"
        except RasillError as exc:
            out["deepCheck"] = str(exc)
            failed = True
    click.echo(json.dumps(out))
    sys.exit(FAILURE if failed else 0)


@main.command()
@click.argument("scripts", nargs=-1, required=True, metavar="NAME=OPS...")
@click.option("--store", "stores", multiple=True, type=click.Choice(sorted(PRESETS)),
              help="Store preset; repeatable (default: all).")
@click.option("--start", type=click.IntRange(min=0), default=0, show_default=True,
              help="Size of the store before the script runs.")
@click.option("--format", "fmt", type=click.Choice(["tsv", "json"]), default="tsv", show_default=True)
def compare(scripts, stores, start, fmt) -> None:
    """Potential each client script needs against each store.

    Scripts are written NAME=OPS with OPS like iiddd or "ins,del".
    """
    named: dict[str, ClientScript] = {}
    for arg in scripts:
        name, sep, ops = arg.partition("=")
        if not sep or not name:
            raise click.UsageError(f"expected NAME=OPS, got {arg!r}")
        try:
            named[name] = ClientScript.parse(ops, start)
        except ValueError as exc:
            raise click.UsageError(str(exc))
    stores = list(stores) or sorted(PRESETS)
    rows = table(stores, named)
    if fmt == "json":
        out: dict = {"start": start, "rows": rows}
        if len(named) == 2:
            a, b = named.values()
            out["comparisons"] = {s: compare_clients(PRESETS[s](), a, b).to_json() for s in stores}
        click.echo(json.dumps(out, indent=2))
        return
    click.echo("store\tscript\tstart\tpotential")
    for r in rows:
        click.echo(f"{r['store']}\t{r['script']}\t{start}\t{r['potential']}")


if __name__ == "__main__":
    main()
