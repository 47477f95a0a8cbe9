"""File formats: graph JSON, parameter JSON, covariance JSON, dataset CSV.

All JSON readers are strict: unknown fields are rejected so that stored
experiment inputs stay honest, and graphs that fail validity are rejected
with a diagnostic naming one offending cycle.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .graphs import ChainGraph, find_semidirected_cycle
from .sem import Dataset, SemParameters

__all__ = [
    "graph_from_dict",
    "graph_hash",
    "graph_to_dict",
    "parameters_from_dict",
    "parameters_to_dict",
    "read_covariance",
    "read_dataset",
    "read_graph",
    "read_parameters",
    "write_covariance",
    "write_dataset",
    "write_graph",
    "write_parameters",
]


def _require_keys(payload: dict, required: set, optional: set, what: str) -> None:
    keys = set(payload)
    unknown = keys - required - optional
    if unknown:
        raise ValueError(f"unknown field(s) in {what}: {sorted(unknown)}")
    missing = required - keys
    if missing:
        raise ValueError(f"missing field(s) in {what}: {sorted(missing)}")


def _render_cycle(g: ChainGraph, cycle: list) -> str:
    parts = [g.node_label(cycle[0])]
    for a, b in zip(cycle, cycle[1:]):
        arrow = "->" if (a, b) in g.directed else "-"
        parts.append(f" {arrow} {g.node_label(b)}")
    return "".join(parts)


def graph_to_dict(g: ChainGraph) -> dict:
    return {
        "p": g.p,
        "labels": [g.node_label(j) for j in range(g.p)],
        "directed": [list(e) for e in sorted(g.directed)],
        "undirected": [list(e) for e in sorted(g.undirected)],
    }


def graph_from_dict(payload: dict) -> ChainGraph:
    _require_keys(payload, {"p", "directed", "undirected"}, {"labels"}, "graph")
    g = ChainGraph(
        p=payload["p"],
        directed=frozenset(tuple(e) for e in payload["directed"]),
        undirected=frozenset(tuple(e) for e in payload["undirected"]),
        labels=tuple(payload["labels"]) if payload.get("labels") is not None else None,
    )
    cycle = find_semidirected_cycle(g)
    if cycle is not None:
        raise ValueError(f"not a chain graph; semidirected cycle: {_render_cycle(g, cycle)}")
    return g


def read_graph(path) -> ChainGraph:
    with open(path, "r", encoding="utf-8") as handle:
        return graph_from_dict(json.load(handle))


def write_graph(g: ChainGraph, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(graph_to_dict(g), handle, indent=2, sort_keys=True)
        handle.write("\n")


def graph_hash(g: ChainGraph) -> str:
    blob = json.dumps(
        {"p": g.p, "directed": sorted(g.directed), "undirected": sorted(g.undirected)},
        sort_keys=True,
    )
    return hashlib.sha1(blob.encode("utf-8")).hexdigest()[:12]


def parameters_to_dict(params: SemParameters) -> dict:
    return {
        "beta": params.beta.tolist(),
        "sigma": params.sigma.tolist(),
        "graph": graph_to_dict(params.graph),
    }


def parameters_from_dict(payload: dict) -> SemParameters:
    _require_keys(payload, {"beta", "sigma", "graph"}, set(), "parameters")
    return SemParameters(
        graph=graph_from_dict(payload["graph"]),
        beta=np.asarray(payload["beta"], dtype=float),
        sigma=np.asarray(payload["sigma"], dtype=float),
    )


def read_parameters(path) -> SemParameters:
    with open(path, "r", encoding="utf-8") as handle:
        return parameters_from_dict(json.load(handle))


def write_parameters(params: SemParameters, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(parameters_to_dict(params), handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_covariance(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    _require_keys(payload, {"cov"}, {"labels"}, "covariance")
    cov = np.asarray(payload["cov"], dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"cov must be square, got shape {cov.shape}")
    return cov


def write_covariance(cov: np.ndarray, path, labels=None) -> None:
    payload = {"cov": np.asarray(cov, dtype=float).tolist()}
    if labels is not None:
        payload["labels"] = list(labels)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            labels = next(reader)
        except StopIteration:
            raise ValueError("dataset file is empty") from None
        rows = [[float(x) for x in row] for row in reader if row]
    if not rows:
        raise ValueError("dataset has a header but no samples")
    values = np.asarray(rows, dtype=float)
    if values.shape[1] != len(labels):
        raise ValueError("row width disagrees with the header")
    return Dataset(values=values, labels=tuple(labels))


def write_dataset(data: Dataset, path) -> None:
    labels = data.labels or tuple(f"X{j + 1}" for j in range(data.p))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(labels)
        for row in data.values:
            writer.writerow([repr(float(x)) for x in row])
