"""Command-line entry point: ``noisecert run`` executes a sweep, ``noisecert stability`` a report."""

from __future__ import annotations

import json
import logging
import os
import sys

import click

from .pipeline import ConfigError, emit, load_config, run_sweep


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase logging verbosity.")
def main(verbose: int) -> None:
    """Certified stationary densities and Lyapunov exponents of noisy interval maps."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


@main.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="TOML or JSON config file.")
@click.option("--map", "map_name", help="Built-in map: bz, doubling, tent, toy, toy:<eps>, identity.")
@click.option("--map-file", type=click.Path(dir_okay=False), help="JSON map definition.")
@click.option("--xi", multiple=True, type=float, help="Noise amplitude (repeatable).")
@click.option("--log2-delta", type=int, help="Fine grid has 2^n cells.")
@click.option("--log2-delta-contr", type=int, help="First contraction grid tried.")
@click.option("--max-log2-delta-contr", type=int, help="Finest contraction grid tried.")
@click.option("--log2-delta-est", type=int, help="Grid of the variation ledgers.")
@click.option("--target-alpha", type=float)
@click.option("--tol", type=float, help="Fixed-point residual tolerance.")
@click.option("--out-dir", type=click.Path(file_okay=False))
@click.option("--workers", type=int)
@click.option("--cache-dir", type=click.Path(file_okay=False), help="Operator and certificate cache.")
def run(config_path, map_name, map_file, xi, log2_delta, log2_delta_contr, max_log2_delta_contr, log2_delta_est,
        target_alpha, tol, out_dir, workers, cache_dir) -> None:
    """Run a sweep and write results.csv, results.json and lyapunov.dat."""
    try:
        cfg = load_config(config_path, map=map_name, map_file=map_file, xi=list(xi) or None,
                          log2_delta=log2_delta, log2_delta_contr=log2_delta_contr,
                          max_log2_delta_contr=max_log2_delta_contr, log2_delta_est=log2_delta_est,
                          target_alpha=target_alpha, tol=tol, out_dir=out_dir, workers=workers,
                          cache_dir=cache_dir)
        cfg.model()
        os.makedirs(cfg.out_dir, exist_ok=True)
        probe = os.path.join(cfg.out_dir, ".write-test")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except (ConfigError, OSError) as exc:
        raise click.UsageError(str(exc)) from None

    done = []

    def flush(row):
        done.append(row)
        emit(done, "csv", os.path.join(cfg.out_dir, "results.csv"))
        emit(done, "json", os.path.join(cfg.out_dir, "results.json"))
        emit(done, "plotdata", os.path.join(cfg.out_dir, "lyapunov.dat"))
        click.echo(f"xi={row.xi!r} verdict={row.verdict} lambda=[{row.lyapunov_lo!r}, {row.lyapunov_hi!r}] "
                   f"l1={row.refined_err!r} ({row.wall_clock:.1f}s)" + (f" {row.diagnostics}" if row.diagnostics
                                                                        else ""))

    rows = run_sweep(cfg, on_row=flush)
    sys.exit(0 if all(r.verdict != "failed" for r in rows) else 1)


@main.command()
@click.option("--sum-ci", type=float, required=True, help="Sum of the iterate bounds C_0..C_{N-1}.")
@click.option("--alpha", type=float, required=True)
@click.option("--n-bar", type=int, required=True)
@click.option("--xi", type=float, required=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write the JSON report here.")
def stability(sum_ci, alpha, n_bar, xi, out) -> None:
    """Stability constants for the BZ map from summary certificate values."""
    from .stability import lyapunov_stability_report, stub_certificate, verify_setting3

    cert = stub_certificate(sum_ci, alpha, n_bar, xi)
    report = lyapunov_stability_report(cert, verify_setting3())
    text = json.dumps(report, indent=1)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    click.echo(text)


if __name__ == "__main__":  # pragma: no cover
    main()
