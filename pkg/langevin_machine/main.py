import json
import sys
from typing import List, Optional

import typer
from dotenv import load_dotenv
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from modules import __version__
from modules.config import DEFAULTS, command_defaults, load_config, resolve_seed
from modules.errors import LangevinError
from modules.experiments import COMMANDS, RunContext

app = typer.Typer(help="Discrete Langevin machine and spiking-sampler experiments. Results are written as CSV.")
console = Console(stderr=True)

CONFIG_HELP = "Experiment config file (key = value lines)"
SEED_HELP = "Master seed; overrides LANGEVIN_SEED and the config"
OUT_HELP = "Output CSV path (default: stdout)"
SET_HELP = "Override one config key, e.g. --set epsilons=0.2,0.1 (repeatable)"
THREADS_HELP = "Worker threads for chain blocks; results do not depend on it"


def execute(command: str, config_path: Optional[str], seed: Optional[int], out: Optional[str], overrides: Optional[List[str]], threads: int) -> None:
    """Resolves the config, runs one experiment driver and writes its CSV."""
    load_dotenv()
    console.print(Panel.fit(f"[bold blue]Langevin Machine[/bold blue] {__version__}\n{command}"))

    try:
        config = load_config(command, config_path, overrides or [])
        config["seed"] = resolve_seed(seed, config)
        context = RunContext(seed=config["seed"], threads=threads, chain_block=config["chain_block"])
        report = COMMANDS[command](config, context)
        target = report.write(out, stream=sys.stdout)
    except LangevinError as e:
        console.print(f"[red]Error: {e}[/red]")
        typer.echo(f"error: kind={e.kind} message={json.dumps(str(e))}", err=True)
        raise typer.Exit(code=2)

    table = Table(title=f"{command} summary")
    table.add_column("Item", style="cyan")
    table.add_column("Value")
    table.add_row("Rows", str(len(report.rows)))
    table.add_row("Output", target)
    table.add_row("Seed", str(config["seed"]))
    table.add_row("Config", report.digest)
    console.print(table)
    console.print(f"[green]✔ {command} finished[/green]")


@app.command()
def activation(
    config: Optional[str] = typer.Option(None, help=CONFIG_HELP),
    seed: Optional[int] = typer.Option(None, help=SEED_HELP),
    out: Optional[str] = typer.Option(None, help=OUT_HELP),
    overrides: Optional[List[str]] = typer.Option(None, "--set", help=SET_HELP),
    threads: int = typer.Option(1, help=THREADS_HELP),
):
    """Free-neuron activation curves (b, p, err, deviation from the logistic function)."""
    execute("activation", config, seed, out, overrides, threads)


@app.command()
def clock(
    config: Optional[str] = typer.Option(None, help=CONFIG_HELP),
    seed: Optional[int] = typer.Option(None, help=SEED_HELP),
    out: Optional[str] = typer.Option(None, help=OUT_HELP),
    overrides: Optional[List[str]] = typer.Option(None, "--set", help=SET_HELP),
    threads: int = typer.Option(1, help=THREADS_HELP),
):
    """Clock model magnetization, specific heat and critical-temperature estimates."""
    execute("clock", config, seed, out, overrides, threads)


@app.command()
def ising(
    config: Optional[str] = typer.Option(None, help=CONFIG_HELP),
    seed: Optional[int] = typer.Option(None, help=SEED_HELP),
    out: Optional[str] = typer.Option(None, help=OUT_HELP),
    overrides: Optional[List[str]] = typer.Option(None, "--set", help=SET_HELP),
    threads: int = typer.Option(1, help=THREADS_HELP),
):
    """Ising model absolute magnetization on the lattice and on its Boltzmann machine."""
    execute("ising", config, seed, out, overrides, threads)


@app.command("bm-kl")
def bm_kl(
    config: Optional[str] = typer.Option(None, help=CONFIG_HELP),
    seed: Optional[int] = typer.Option(None, help=SEED_HELP),
    out: Optional[str] = typer.Option(None, help=OUT_HELP),
    overrides: Optional[List[str]] = typer.Option(None, "--set", help=SET_HELP),
    threads: int = typer.Option(1, help=THREADS_HELP),
):
    """KL divergence to the exact Boltzmann distribution versus sampling time."""
    execute("bm-kl", config, seed, out, overrides, threads)


@app.command()
def calibrate(
    config: Optional[str] = typer.Option(None, help=CONFIG_HELP),
    seed: Optional[int] = typer.Option(None, help=SEED_HELP),
    out: Optional[str] = typer.Option(None, help=OUT_HELP),
    overrides: Optional[List[str]] = typer.Option(None, "--set", help=SET_HELP),
    threads: int = typer.Option(1, help=THREADS_HELP),
):
    """Scaling factors r(eps) and refractory shifts tau'(tau_ref)."""
    execute("calibrate", config, seed, out, overrides, threads)


@app.command()
def trajectory(
    config: Optional[str] = typer.Option(None, help=CONFIG_HELP),
    seed: Optional[int] = typer.Option(None, help=SEED_HELP),
    out: Optional[str] = typer.Option(None, help=OUT_HELP),
    overrides: Optional[List[str]] = typer.Option(None, "--set", help=SET_HELP),
    threads: int = typer.Option(1, help=THREADS_HELP),
):
    """Membrane potential trace (t, neuron, u, z) of a continuous process."""
    execute("trajectory", config, seed, out, overrides, threads)


@app.command()
def defaults(command: str = typer.Argument(..., help=f"One of: {', '.join(DEFAULTS)}")):
    """Print the default config of a command as key = value lines."""
    try:
        values = command_defaults(command)
    except LangevinError as e:
        console.print(f"[red]Error: {e}[/red]")
        typer.echo(f"error: kind={e.kind} message={json.dumps(str(e))}", err=True)
        raise typer.Exit(code=2)
    for key, value in values.items():
        if isinstance(value, list):
            value = ",".join(str(item) for item in value)
        elif value is None:
            value = "none"
        typer.echo(f"{key} = {value}")


if __name__ == "__main__":
    app()
