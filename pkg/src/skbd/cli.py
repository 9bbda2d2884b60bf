"""Command-line front door: decision tables, single-decision queries, batch
simulations, and scenario export.

Exit codes: 2 for unreadable/malformed configuration, 3 for invalid design
parameters (the message names the offending field), 4 for scenario/grid
mismatches. Every output artifact embeds a manifest (command, config hash,
seed, version) so results stay attributable; the manifest deliberately
excludes thread counts and timestamps, keeping outputs byte-identical for a
fixed seed regardless of parallelism.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .core import InvalidDesign, TrialData, decision_table
from .engine import ScenarioMismatch
from .kernels import standardize_doses
from .report import (
    decision_report,
    oc_rows,
    oc_to_csv,
    table_to_csv,
    table_to_rows,
    table_to_text,
)
from .scenarios import (
    Scenario,
    fixed_scenarios,
    insertion_scenarios,
    scenario_from_dict,
    scenario_to_dict,
)

EXIT_CONFIG = 2
EXIT_INVALID = 3
EXIT_MISMATCH = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _manifest(
    command: str,
    config_path: Optional[str],
    seed: Optional[int],
    output_path: Optional[str] = None,
) -> dict:
    manifest = {"command": command, "version": __version__}
    if config_path is not None:
        digest = hashlib.sha256(Path(config_path).read_bytes()).hexdigest()
        manifest["config_path"] = config_path
        manifest["config_sha256"] = digest
    manifest["output_path"] = output_path if output_path is not None else "-"
    if seed is not None:
        manifest["seed"] = seed
    return manifest


def _load_config(path: str) -> RunConfig:
    try:
        return load_config(path)
    except ConfigError as err:
        raise CliError(str(err), EXIT_CONFIG)
    except InvalidDesign as err:
        raise CliError(str(err), EXIT_INVALID)


def _load_trial_data(path: Optional[str], doses: int) -> TrialData:
    if path is None:
        return TrialData.empty(doses)
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise CliError(f"cannot read trial data {path}: {err}", EXIT_CONFIG)
    try:
        return TrialData(n=tuple(payload["n"]), y=tuple(payload["y"]))
    except (KeyError, TypeError, ValueError) as err:
        raise CliError(f"invalid trial data in {path}: {err}", EXIT_CONFIG)


def _resolve_scenarios(specs: Sequence[str]) -> list[Scenario]:
    out: list[Scenario] = []
    for spec in specs:
        if spec == "fixed":
            out.extend(fixed_scenarios())
        elif spec == "insertion":
            out.extend(insertion_scenarios())
        elif spec.startswith("fixed:"):
            out.append(_catalog_entry(fixed_scenarios(), spec))
        elif spec.startswith("insertion:"):
            out.append(_catalog_entry(insertion_scenarios(), spec))
        else:
            out.extend(_scenarios_from_file(spec))
    if not out:
        raise CliError("no scenarios given", EXIT_CONFIG)
    return out


def _catalog_entry(catalog: Sequence[Scenario], spec: str) -> Scenario:
    _, _, index = spec.partition(":")
    try:
        k = int(index)
    except ValueError:
        raise CliError(f"bad scenario reference {spec!r}", EXIT_CONFIG)
    if not 1 <= k <= len(catalog):
        raise CliError(
            f"scenario index {k} outside 1..{len(catalog)} in {spec!r}", EXIT_CONFIG
        )
    return catalog[k - 1]


def _scenarios_from_file(path: str) -> list[Scenario]:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise CliError(f"cannot read scenario file {path}: {err}", EXIT_CONFIG)
    entries = payload if isinstance(payload, list) else [payload]
    stem = Path(path).stem
    try:
        return [
            scenario_from_dict(entry, default_name=f"{stem}-{i + 1}")
            for i, entry in enumerate(entries)
        ]
    except ValueError as err:
        raise CliError(f"invalid scenario in {path}: {err}", EXIT_CONFIG)


def _write_output(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _thread_count(value: Optional[int]) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("SKBD_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"SKBD_THREADS must be an integer, got {env!r}", EXIT_CONFIG)
    return 1


def cmd_table(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    context = _load_trial_data(args.context, args.doses)
    current = args.current - 1
    if not 0 <= current < len(context.n):
        raise CliError(
            f"current dose level {args.current} outside 1..{len(context.n)}",
            EXIT_INVALID,
        )
    grid = standardize_doses(
        [float(j) for j in range(1, len(context.n) + 1)]
    )
    name, kernel = config.designs[0]
    try:
        design = config.design.bind(grid, kernel)
        table = decision_table(
            design, context, current, (args.n_min, args.n_max), grid=grid
        )
    except InvalidDesign as err:
        raise CliError(str(err), EXIT_INVALID)
    except ValueError as err:
        raise CliError(str(err), EXIT_MISMATCH)
    manifest = _manifest("table", args.config, None, args.out)
    if args.format == "text":
        title = f"{name} decision boundaries (phi={design.phi:g})"
        body = table_to_text(table, title)
    elif args.format == "csv":
        body = f"# {json.dumps(manifest, sort_keys=True)}\n" + table_to_csv(table)
    else:
        body = json.dumps(
            {"manifest": manifest, "phi": design.phi, "rows": table_to_rows(table)},
            indent=2,
        ) + "\n"
    _write_output(body, args.out)
    return 0


def cmd_decide(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    data = _load_trial_data(args.data, args.doses)
    current = args.current - 1
    if not 0 <= current < len(data.n):
        raise CliError(
            f"current dose level {args.current} outside 1..{len(data.n)}",
            EXIT_INVALID,
        )
    grid = standardize_doses([float(j) for j in range(1, len(data.n) + 1)])
    name, kernel = config.designs[0]
    from .core import TrialState

    try:
        design = config.design.bind(grid, kernel)
        state = TrialState(grid=grid, data=data, current=current)
        report = decision_report(design, state)
    except InvalidDesign as err:
        raise CliError(str(err), EXIT_INVALID)
    except ValueError as err:
        raise CliError(str(err), EXIT_MISMATCH)
    manifest = _manifest("decide", args.config, None, args.out)
    if args.format == "text":
        pc = report["pseudo_counts"]
        lines = [
            f"design: {name}",
            f"action: {report['action']}",
            f"pseudo-counts: y'={pc['y_prime']:g}, n'={pc['n_prime']:g}",
            f"posterior: Beta({report['posterior']['alpha']:g}, {report['posterior']['beta']:g})",
            f"strongest key: {report['strongest_key']}  target key: {report['target_key']}",
        ]
        body = "\n".join(lines) + "\n"
    else:
        body = json.dumps({"manifest": manifest, "design": name, **report}, indent=2) + "\n"
    _write_output(body, args.out)
    return 0


def _record_line(scenario: str, design: str, replicate: int, record) -> str:
    payload = {
        "scenario": scenario,
        "design": design,
        "replicate": replicate,
        "selected_mtd": record.selected_mtd,
        "selected_dose": record.selected_dose,
        "doses": list(record.doses),
        "inserted": list(record.inserted_flags),
        "allocations": list(record.allocations),
        "dlts": list(record.dlts),
        "path": [list(step) for step in record.path],
        "insertions": [
            {
                "raw_dose": round(event.raw_dose, 1),
                "raw_dose_exact": event.raw_dose,
                "std_dose": event.std_dose,
                "kind": event.kind,
                "cohort": event.cohort,
            }
            for event in record.insertions
        ],
        "terminated_early": record.terminated_early,
        "realized_n": record.realized_n,
    }
    return json.dumps(payload, sort_keys=True)


def simulate_rows(
    config: RunConfig,
    scenarios: Sequence[Scenario],
    replicates: int,
    seed: int,
    threads: int,
    paths_out: Optional[str] = None,
) -> list[dict]:
    from .engine import collect_records, oc_metrics

    results = []
    path_lines: list[str] = []
    for scenario in scenarios:
        grid = standardize_doses(scenario.raw_doses, config.scale)
        for name, kernel in config.designs:
            try:
                design = config.design.bind(grid, kernel)
            except InvalidDesign as err:
                raise CliError(str(err), EXIT_INVALID)
            try:
                records = collect_records(
                    design,
                    scenario,
                    replicates,
                    seed,
                    insertion=config.insertion,
                    tite=config.tite,
                    threads=threads,
                    scale=config.scale,
                )
            except ScenarioMismatch as err:
                raise CliError(str(err), EXIT_MISMATCH)
            oc = oc_metrics(
                records,
                scenario,
                replicates=replicates,
                seed=seed,
                insertion_enabled=config.insertion is not None,
                rod_threshold=config.rod_threshold,
                rod_inclusive=config.rod_inclusive,
            )
            results.append((scenario.name, name, oc))
            if paths_out is not None:
                path_lines.extend(
                    _record_line(scenario.name, name, i, record)
                    for i, record in enumerate(records)
                )
    if paths_out is not None:
        Path(paths_out).write_text("\n".join(path_lines) + "\n")
    return oc_rows(results)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    scenarios = _resolve_scenarios(args.scenario)
    threads = _thread_count(args.threads)
    if args.replicates < 1:
        raise CliError("replicates must be at least 1", EXIT_INVALID)
    rows = simulate_rows(
        config, scenarios, args.replicates, args.seed, threads, paths_out=args.paths
    )
    manifest = _manifest("simulate", args.config, args.seed, args.out)
    manifest["replicates"] = args.replicates
    if args.format == "csv":
        body = oc_to_csv(rows, manifest_line=json.dumps(manifest, sort_keys=True))
    else:
        body = json.dumps({"manifest": manifest, "results": rows}, indent=2) + "\n"
    _write_output(body, args.out)
    return 0


def cmd_scenarios_export(args: argparse.Namespace) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    fixed_path = outdir / "fixed_scenarios.json"
    fixed_path.write_text(
        json.dumps([scenario_to_dict(s) for s in fixed_scenarios()], indent=2) + "\n"
    )
    insertion_path = outdir / "insertion_scenarios.json"
    insertion_path.write_text(
        json.dumps([scenario_to_dict(s) for s in insertion_scenarios()], indent=2) + "\n"
    )
    sys.stdout.write(f"wrote {fixed_path}\nwrote {insertion_path}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skbd",
        description="Keyboard-family dose-finding designs: decision tables, "
        "single decisions, and operating-characteristic simulation.",
    )
    parser.add_argument("--version", action="version", version=f"skbd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    table = sub.add_parser("table", help="render pre-tabulated decision boundaries")
    table.add_argument("--config", required=True)
    table.add_argument("--context", help="JSON file with other-dose interim data {n, y}")
    table.add_argument("--doses", type=int, default=5, help="grid size when no context file is given")
    table.add_argument("--current", type=int, default=1, help="dose level under study (1-based)")
    table.add_argument("--n-min", type=int, default=1)
    table.add_argument("--n-max", type=int, default=18)
    table.add_argument("--format", choices=("text", "csv", "json"), default="text")
    table.add_argument("--out")
    table.set_defaults(func=cmd_table)

    decide_p = sub.add_parser("decide", help="single interim decision for given data")
    decide_p.add_argument("--config", required=True)
    decide_p.add_argument("--data", help="JSON file with per-dose counts {n, y}")
    decide_p.add_argument("--doses", type=int, default=5)
    decide_p.add_argument("--current", type=int, required=True, help="dose level (1-based)")
    decide_p.add_argument("--format", choices=("text", "json"), default="text")
    decide_p.add_argument("--out")
    decide_p.set_defaults(func=cmd_decide)

    sim = sub.add_parser("simulate", help="Monte Carlo operating characteristics")
    sim.add_argument("--config", required=True)
    sim.add_argument(
        "--scenario",
        action="append",
        required=True,
        help="scenario file, or fixed | fixed:N | insertion | insertion:N (repeatable)",
    )
    sim.add_argument("--replicates", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--threads", type=int, default=None, help="defaults to SKBD_THREADS or 1")
    sim.add_argument("--format", choices=("csv", "json"), default="csv")
    sim.add_argument("--out")
    sim.add_argument("--paths", help="dump per-trial paths to this JSON-lines file")
    sim.set_defaults(func=cmd_simulate)

    scen = sub.add_parser("scenarios", help="scenario catalog utilities")
    scen_sub = scen.add_subparsers(dest="scenarios_command", required=True)
    export = scen_sub.add_parser("export", help="write the built-in catalogs as JSON")
    export.add_argument("--out", default=".", help="output directory")
    export.set_defaults(func=cmd_scenarios_export)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code
    except InvalidDesign as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
