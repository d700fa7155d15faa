"""Versioned, diff-able scenario and results files.

Scenario and results artifacts are JSON with sorted keys and a fixed header
(format name + schema version), so regenerating with the same seed produces
byte-identical files.  Wall-clock timings are inherently non-reproducible and
therefore live in a separate ``*.timing.json`` sidecar, keeping the primary
results file deterministic.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .allocation import (
    Scenario1Params,
    Scenario1Spec,
    Scenario2Params,
    Scenario2Spec,
    random_scenario1,
    random_scenario2,
)
from .gaussians import Gaussian

__all__ = [
    "SCENARIO_FORMAT",
    "RESULTS_FORMAT",
    "SCHEMA_VERSION",
    "generate_scenario",
    "save_scenario",
    "load_scenario",
    "save_results",
    "load_results",
    "file_sha256",
]

SCENARIO_FORMAT = "contend-scenario"
RESULTS_FORMAT = "contend-results"
SCHEMA_VERSION = 1


def _g(g: Gaussian) -> list[float]:
    return [g.mean, g.variance]


def _ung(pair) -> Gaussian:
    return Gaussian(pair[0], pair[1])


def _spec1_to_dict(spec: Scenario1Spec) -> dict:
    return {
        "kind": "scenario1",
        "n_types": spec.n_types,
        "n_locations": spec.n_locations,
        "travel": [[[_g(g) for g in row] for row in t] for t in spec.travel],
        "duration": [[_g(g) for g in row] for row in spec.duration],
        "deadline": spec.deadline,
        "type_order": list(spec.type_order),
    }


def _spec1_from_dict(d: dict) -> Scenario1Spec:
    return Scenario1Spec(
        n_types=d["n_types"],
        n_locations=d["n_locations"],
        travel=tuple(
            tuple(tuple(_ung(g) for g in row) for row in t) for t in d["travel"]
        ),
        duration=tuple(tuple(_ung(g) for g in row) for row in d["duration"]),
        deadline=d["deadline"],
        type_order=tuple(d["type_order"]),
    )


def _spec2_to_dict(spec: Scenario2Spec) -> dict:
    return {
        "kind": "scenario2",
        "n_robots": spec.n_robots,
        "n_locations": spec.n_locations,
        "arrival": [[_g(g) for g in row] for row in spec.arrival],
        "service": [_g(g) for g in spec.service],
        "delivery": [[_g(g) for g in row] for row in spec.delivery],
        "uncontrolled": [
            [[_g(a), _g(d)] for a, d in loc] for loc in spec.uncontrolled
        ],
        "deadline": list(spec.deadline),
        "cost_rate": spec.cost_rate,
    }


def _spec2_from_dict(d: dict) -> Scenario2Spec:
    return Scenario2Spec(
        n_robots=d["n_robots"],
        n_locations=d["n_locations"],
        arrival=tuple(tuple(_ung(g) for g in row) for row in d["arrival"]),
        service=tuple(_ung(g) for g in d["service"]),
        delivery=tuple(tuple(_ung(g) for g in row) for row in d["delivery"]),
        uncontrolled=tuple(
            tuple((_ung(a), _ung(dd)) for a, dd in loc) for loc in d["uncontrolled"]
        ),
        deadline=tuple(d["deadline"]),
        cost_rate=d["cost_rate"],
    )


def generate_scenario(kind: str, params: dict, seed: int):
    """Build a random scenario spec plus the metadata block for its file."""
    if kind == "scenario1":
        p = Scenario1Params(**params)
        spec = random_scenario1(p, seed)
        body = _spec1_to_dict(spec)
    elif kind == "scenario2":
        p = Scenario2Params(**params)
        spec = random_scenario2(p, seed)
        body = _spec2_to_dict(spec)
    else:
        raise ValueError(f"unknown scenario kind {kind!r}")
    return spec, body


def _dump(payload: dict, path: str | Path) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text)


def save_scenario(body: dict, seed: int, params: dict, path: str | Path) -> None:
    _dump(
        {
            "format": SCENARIO_FORMAT,
            "version": SCHEMA_VERSION,
            "seed": seed,
            "params": params,
            "scenario": body,
        },
        path,
    )


def load_scenario(path: str | Path):
    """Returns (spec object, full payload dict)."""
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != SCENARIO_FORMAT:
        raise ValueError(f"{path} is not a scenario file")
    if payload.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported scenario schema version {payload.get('version')}")
    body = payload["scenario"]
    if body["kind"] == "scenario1":
        return _spec1_from_dict(body), payload
    if body["kind"] == "scenario2":
        return _spec2_from_dict(body), payload
    raise ValueError(f"unknown scenario kind {body.get('kind')!r}")


def save_results(
    path: str | Path,
    scenario_path: str | Path,
    seed: int,
    method_records: dict,
    extra: dict | None = None,
    timings: dict | None = None,
) -> None:
    """Write the deterministic results file and the timing sidecar.

    ``method_records`` maps method tag -> record (assignment, costs, regret);
    ``timings`` maps method tag -> wall seconds and goes to
    ``<path>.timing.json`` only.
    """
    from . import __version__

    payload = {
        "format": RESULTS_FORMAT,
        "version": SCHEMA_VERSION,
        "tool_version": __version__,
        "scenario_file": Path(scenario_path).name,
        "scenario_sha256": file_sha256(scenario_path),
        "seed": seed,
        "methods": method_records,
    }
    if extra:
        payload.update(extra)
    _dump(payload, path)
    if timings is not None:
        _dump({"format": RESULTS_FORMAT + "-timing", "version": SCHEMA_VERSION, "wall_seconds": timings}, str(path) + ".timing.json")


def load_results(path: str | Path) -> dict:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != RESULTS_FORMAT:
        raise ValueError(f"{path} is not a results file")
    return payload


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
