"""Benchmark command line: generate scenarios, run method comparisons,
calibrate the conditioning-strategy rule, and aggregate reports.

Exit codes: 0 success, 1 computation error, 2 usage error.  All outputs are
deterministic for fixed seeds; wall-clock timings are written to a
``*.timing.json`` sidecar so the main results files stay byte-identical
across reruns.
"""

from __future__ import annotations

import csv
import math
import sys
import time
from pathlib import Path

import click
import numpy as np

from .allocation import (
    exhaustive_search,
    hungarian_assign,
    scenario1_cost,
    scenario1_ground_truth,
    scenario2_cost_matrix,
    scenario2_ground_truth,
    Scenario1Spec,
)
from .artifacts import (
    generate_scenario,
    load_results,
    load_scenario,
    save_results,
    save_scenario,
)
from .conditioning import calibrate_rule, save_rule

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


def _fail(msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(1)


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@click.option("--threads", type=int, default=1, show_default=True, help="Worker threads for independent cost-matrix entries.")
@click.option("--tolerance", type=float, default=1e-4, show_default=True, help="Relative tolerance for order-probability integration.")
@click.pass_context
def main(ctx, seed, threads, tolerance):
    """Contention-model benchmark harness."""
    if threads < 1:
        raise click.UsageError("--threads must be >= 1")
    if tolerance <= 0:
        raise click.UsageError("--tolerance must be positive")
    ctx.obj = {"seed": seed, "threads": threads, "tolerance": tolerance}


@main.command()
@click.argument("kind", type=click.Choice(["scenario1", "scenario2"]))
@click.argument("out", type=click.Path(dir_okay=False, writable=True))
@click.option("--types", type=int, default=None, help="Robot types (scenario 1).")
@click.option("--locations", type=int, default=None, help="Locations / packages.")
@click.option("--robots", type=int, default=None, help="Controlled robots (scenario 2).")
@click.option("--uncontrolled", type=int, default=None, help="Uncontrolled robots per location (scenario 2).")
@click.pass_context
def generate(ctx, kind, out, types, locations, robots, uncontrolled):
    """Write a seeded random scenario file (regeneration is byte-identical)."""
    params = {}
    if kind == "scenario1":
        if robots is not None or uncontrolled is not None:
            raise click.UsageError("--robots/--uncontrolled apply only to scenario2")
        if types is not None:
            params["n_types"] = types
        if locations is not None:
            params["n_locations"] = locations
    else:
        if types is not None:
            raise click.UsageError("--types applies only to scenario1")
        if robots is not None:
            params["n_robots"] = robots
        if locations is not None:
            params["n_locations"] = locations
        if uncontrolled is not None:
            params["n_uncontrolled"] = uncontrolled
    for key, val in params.items():
        if val < 1 or (key == "n_uncontrolled" and val > 6):
            raise click.UsageError(f"{key}={val} out of range")
    seed = ctx.obj["seed"]
    try:
        _, body = generate_scenario(kind, params, seed)
        save_scenario(body, seed, params, out)
    except Exception as exc:  # pragma: no cover - defensive
        _fail(str(exc))
    click.echo(f"wrote {out}")


def _parse_method(token: str):
    """'D' | 'M:k' | 'A:phi' | 'AEst' -> (base, param, canonical tag)."""
    base, _, arg = token.partition(":")
    if base == "D":
        if arg:
            raise click.UsageError("method D takes no parameter")
        return "D", None, "D"
    if base == "M":
        k = int(arg) if arg else 100
        if k < 1:
            raise click.UsageError("M sample count must be >= 1")
        return "M", k, f"M({k})"
    if base == "A":
        phi = float(arg) if arg else 1.0
        if not 0.0 < phi <= 1.0:
            raise click.UsageError("A threshold must be in (0, 1]")
        return "A", phi, f"A({phi:g})"
    if base == "AEst":
        if arg:
            raise click.UsageError("method AEst takes no parameter")
        return "AEst", None, "AEst"
    raise click.UsageError(f"unknown method {token!r}")


@main.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False, writable=True))
@click.option("--methods", default="D,A:1", show_default=True, help="Comma-separated method tags (D, M:k, A:phi, AEst).")
@click.option("--ground-truth-samples", type=int, default=100_000, show_default=True)
@click.pass_context
def run(ctx, scenario, out, methods, ground_truth_samples):
    """Run a method comparison on one scenario and write a results file."""
    tags = [_parse_method(tok.strip()) for tok in methods.split(",") if tok.strip()]
    if not tags:
        raise click.UsageError("no methods given")
    seed = ctx.obj["seed"]
    try:
        spec, _ = load_scenario(scenario)
        records, timings = {}, {}
        for base, param, tag in tags:
            t0 = time.perf_counter()
            if isinstance(spec, Scenario1Spec):
                res = exhaustive_search(
                    spec, base, mc_samples=param or 100, seed=seed
                )
                wall = time.perf_counter() - t0
                gt = scenario1_ground_truth(
                    spec, res.assignment, ground_truth_samples, seed + 1
                )
                assignment = [list(p) for p in res.assignment]
                predicted = res.predicted_cost
            else:
                costs = scenario2_cost_matrix(
                    spec,
                    base,
                    phi=param if base == "A" and param else 1.0,
                    mc_samples=param or 100,
                    seed=seed,
                    threads=ctx.obj["threads"],
                    rel_tol=ctx.obj["tolerance"],
                )
                assign = hungarian_assign(costs)
                wall = time.perf_counter() - t0
                gt = scenario2_ground_truth(
                    spec, assign, ground_truth_samples, seed + 1
                )
                assignment = {str(k): v for k, v in sorted(assign.items())}
                predicted = float(sum(costs[i, j] for i, j in assign.items()))
            records[tag] = {
                "assignment": assignment,
                "predicted_cost": predicted,
                "ground_truth_cost": gt,
            }
            timings[tag] = wall
        best = min(r["ground_truth_cost"] for r in records.values())
        for r in records.values():
            r["regret"] = r["ground_truth_cost"] - best
        save_results(
            out,
            scenario,
            seed,
            records,
            extra={
                "best_known_cost": best,
                "ground_truth_samples": ground_truth_samples,
            },
            timings=timings,
        )
    except click.UsageError:
        raise
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote {out}")


@main.command()
@click.argument("out", type=click.Path(dir_okay=False, writable=True))
@click.option("--samples", type=int, default=20_000, show_default=True)
@click.pass_context
def calibrate(ctx, out, samples):
    """Fit the conditioning-strategy decision rule and save it."""
    if samples < 1000:
        raise click.UsageError("--samples must be >= 1000")
    try:
        rule = calibrate_rule(samples, seed=ctx.obj["seed"])
        save_rule(rule, out)
    except Exception as exc:
        _fail(str(exc))
    click.echo(
        f"wrote {out} (holdout optimal rate {rule.holdout_optimal_rate:.3f}, "
        f"avg KL {rule.holdout_avg_kl:.2e})"
    )


@main.command()
@click.argument("results", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False, writable=True), required=True, help="Summary CSV path.")
@click.option("--figure-data", type=click.Path(dir_okay=False, writable=True), default=None, help="Optional figure-data CSV (x wall time, y mean regret, yerr CI half-width).")
def report(results, csv_out, figure_data):
    """Aggregate results files into per-method regret/runtime summaries."""
    regrets: dict[str, list[float]] = {}
    walls: dict[str, list[float]] = {}
    try:
        for path in results:
            payload = load_results(path)
            timing_path = Path(str(path) + ".timing.json")
            timing = {}
            if timing_path.exists():
                import json

                timing = json.loads(timing_path.read_text()).get("wall_seconds", {})
            for tag, rec in payload["methods"].items():
                regrets.setdefault(tag, []).append(rec["regret"])
                if tag in timing:
                    walls.setdefault(tag, []).append(timing[tag])
        rows = []
        for tag in sorted(regrets):
            r = np.array(regrets[tag])
            n = len(r)
            half = _Z95 * float(r.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0
            w = walls.get(tag)
            rows.append(
                {
                    "method": tag,
                    "instances": n,
                    "mean_regret": float(r.mean()),
                    "ci_half_width": half,
                    "mean_wall_seconds": float(np.mean(w)) if w else "",
                }
            )
        cols = ["method", "instances", "mean_regret", "ci_half_width", "mean_wall_seconds"]
        with open(csv_out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols)
            writer.writeheader()
            writer.writerows(rows)
        if figure_data:
            fcols = ["method", "x_wall_seconds", "y_mean_regret", "yerr_ci_half_width"]
            with open(figure_data, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=fcols)
                writer.writeheader()
                for row in rows:
                    writer.writerow(
                        {
                            "method": row["method"],
                            "x_wall_seconds": row["mean_wall_seconds"],
                            "y_mean_regret": row["mean_regret"],
                            "yerr_ci_half_width": row["ci_half_width"],
                        }
                    )
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote {csv_out}")


if __name__ == "__main__":
    main()
