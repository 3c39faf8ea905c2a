"""Kommandozeile des Tether-Aware Planners.

    python -m app.main run --scenario scenarios/pipe.env --planner react --out out/react --seed 0
    python -m app.main compare --scenario scenarios/pipe.env --out out

Exit-Codes: 0 = Mission abgeschlossen, 1 = Szenario ungültig, 2 = Mission abgebrochen.
"""
import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from app.models.mission import MissionSummary
from app.models.scenario import Scenario
from app.services.log_writer import SUMMARY_COLUMNS, summary_row, write_log
from app.services.mission_runner import run_mission
from app.services.scenario_loader import ScenarioError, build_world, load_scenario

logger = logging.getLogger(__name__)
console = Console()

PLANNERS = ("react", "baseline")
EXIT_OK, EXIT_INVALID, EXIT_ABORTED = 0, 1, 2

# Spalten der Vergleichstabelle: (Überschrift, Feld, Format)
TABLE_COLUMNS = [
    ("Inspektion (s)", "inspection_time", "{:.1f}"),
    ("Recovery (s)", "recovery_time", "{:.1f}"),
    ("Gesamt (s)", "total_time", "{:.1f}"),
    ("Abdeckung", "final_coverage", "{:.2%}"),
    ("max. Tether (m)", "max_tether_length", "{:.2f}"),
    ("Überschreitung (s)", "exceedance_duration", "{:.1f}"),
    ("max. Latenz (s)", "max_replanning_latency", "{:.3f}"),
]


def configure_logging(verbose: bool = False) -> None:
    """Log-Level aus TAP_LOG_LEVEL (Standard: warning); --verbose erzwingt info"""
    level_name = "info" if verbose else os.getenv("TAP_LOG_LEVEL", "warning")
    level = getattr(logging, level_name.upper(), logging.WARNING)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def compare_workers() -> int:
    try:
        return max(1, int(os.getenv("TAP_COMPARE_WORKERS", "2")))
    except ValueError:
        logger.warning("TAP_COMPARE_WORKERS ist keine Zahl - verwende 2")
        return 2


def run_and_write(scenario: Scenario, out_dir: Path) -> MissionSummary:
    """Eine Mission simulieren und ihr Protokoll schreiben (auch im Worker-Prozess)"""
    log = run_mission(scenario)
    write_log(log, out_dir)
    return log.summary


def summary_table(summaries: List[MissionSummary], title: str) -> Table:
    table = Table(title=title)
    table.add_column("Planer", style="cyan")
    for heading, _, _ in TABLE_COLUMNS:
        table.add_column(heading, justify="right")
    table.add_column("Status")
    for summary in summaries:
        values = [fmt.format(getattr(summary, field)) for _, field, fmt in TABLE_COLUMNS]
        status = "[red]abgebrochen[/red]" if summary.aborted else "[green]ok[/green]"
        table.add_row(summary.planner, *values, status)
    return table


def _load(path: str, seed: Optional[int]) -> Optional[Scenario]:
    try:
        scenario = load_scenario(path)
    except ScenarioError as e:
        console.print(f"[red]✗[/red] {e}")
        return None
    if seed is not None:
        scenario = scenario.model_copy(update={"rng_seed": seed})
    return scenario


def cmd_run(args) -> int:
    scenario = _load(args.scenario, args.seed)
    if scenario is None:
        return EXIT_INVALID
    scenario = scenario.model_copy(update={"planner": args.planner})

    try:
        world = build_world(scenario)
    except ScenarioError as e:
        console.print(f"[red]✗[/red] {e}")
        return EXIT_INVALID

    columns = [
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total} Wegpunkte"),
        TimeElapsedColumn(),
    ]
    with Progress(*columns, console=console, transient=True) as progress:
        task = progress.add_task(
            f"[green]{scenario.name} ({scenario.planner})", total=len(world.waypoints) + 1
        )
        log = run_mission(
            scenario,
            world=world,
            on_tick=lambda tick, reached: progress.update(task, completed=reached),
        )

    files = write_log(log, args.out)
    summary = log.summary
    console.print(summary_table([summary], f"Mission {scenario.name}"))
    console.print(f"[green]✓[/green] Protokoll in {files['mission'].parent}")
    if summary.aborted:
        console.print(f"[red]✗[/red] Mission abgebrochen: {summary.abort_reason}")
        return EXIT_ABORTED
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = _load(args.scenario, args.seed)
    if scenario is None:
        return EXIT_INVALID
    out = Path(args.out)
    jobs = [(scenario.model_copy(update={"planner": name}), out / name) for name in PLANNERS]

    workers = min(compare_workers(), len(jobs))
    try:
        with console.status(f"[green]Simuliere {', '.join(PLANNERS)} ({workers} Prozesse)..."):
            if workers <= 1:
                summaries = [run_and_write(s, d) for s, d in jobs]
            else:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    summaries = list(pool.map(run_and_write, *zip(*jobs)))
    except ScenarioError as e:
        console.print(f"[red]✗[/red] {e}")
        return EXIT_INVALID

    out.mkdir(parents=True, exist_ok=True)
    comparison = out / "comparison.csv"
    with comparison.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for summary in summaries:
            writer.writerow(summary_row(summary))

    console.print(summary_table(summaries, f"Vergleich {scenario.name}"))
    console.print(f"[green]✓[/green] Vergleich in {comparison}")
    if any(s.aborted for s in summaries):
        console.print("[red]✗[/red] Mindestens eine Mission wurde abgebrochen")
        return EXIT_ABORTED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Tether-Aware Planner: Inspektionsmissionen simulieren")
    parser.add_argument("--verbose", "-v", action="store_true", help="Log-Level info (überschreibt TAP_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Eine Mission mit einem Planer simulieren")
    run.add_argument("--scenario", "-s", required=True, help="Szenario-Datei (KEY=VALUE)")
    run.add_argument("--planner", "-p", choices=PLANNERS, default="react", help="Planer (Standard: react)")
    run.add_argument("--out", "-o", required=True, help="Ausgabeverzeichnis für die CSV-Dateien")
    run.add_argument("--seed", type=int, default=None, help="Zufallsseed (überschreibt rng_seed des Szenarios)")
    run.set_defaults(handler=cmd_run)

    compare = sub.add_parser("compare", help="react und baseline auf demselben Szenario vergleichen")
    compare.add_argument("--scenario", "-s", required=True, help="Szenario-Datei (KEY=VALUE)")
    compare.add_argument("--out", "-o", required=True, help="Ausgabeverzeichnis (je Planer ein Unterordner)")
    compare.add_argument("--seed", type=int, default=None, help="Zufallsseed (überschreibt rng_seed des Szenarios)")
    compare.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    # .env vor dem Lesen von TAP_* laden; gesetzte Umgebungsvariablen haben Vorrang
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
