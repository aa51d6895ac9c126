"""Command-line interface: `threshold-lab <command> --config <path>`."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import ThresholdLabError
from .harness import COMMANDS, run_command


@click.group()
def main():
    """Numerical laboratory for threshold dynamics of the focusing NLS."""


def _register(name: str, help_text: str):
    @main.command(name=name, help=help_text)
    @click.option("--config", "config_path", required=True,
                  type=click.Path(exists=True, dir_okay=False))
    @click.option("--no-cache", is_flag=True, default=False,
                  help="Force a re-solve, ignoring the on-disk cache.")
    @click.option("--out", "out_dir", default=None,
                  type=click.Path(file_okay=False),
                  help="Output directory (default: ./runs/<command>).")
    def _cmd(config_path, no_cache, out_dir):
        out = out_dir or str(Path("runs") / name)
        try:
            manifest = run_command(name, config_path, out, use_cache=not no_cache)
        except ThresholdLabError as exc:
            err = {"error": type(exc).__name__, "message": str(exc)}
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(json.dumps(err, sort_keys=True) + "\n")
            click.echo(json.dumps(err, sort_keys=True), err=True)
            sys.exit(2)
        click.echo(json.dumps({"command": name, "out": out,
                               "config_hash": manifest["config_hash"]}, sort_keys=True))

    return _cmd


_register("ground", "Solve and certify the ground state.")
_register("spectrum", "Linearized operators and the unstable eigenpair.")
_register("profiles", "Recursive profile expansion and residual trace.")
_register("evolve", "Time-evolve a configured seed.")
_register("classify", "Evolve and classify a trajectory.")
_register("sweep", "Amplitude sweep with per-cell isolation.")


if __name__ == "__main__":
    main()
