"""Temporal graph data model, ingestion and on-disk format.

A graph directory looks like::

    manifest.json
    edges_0001.txt      # "src dst" rows, 0-based node indices
    attrs_0001.txt      # N x F matrix, omitted when F == 0
    ...

Attributes are stored on disk in their original (unstandardized) units.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

MANIFEST = "manifest.json"
FORMAT_VERSION = 1


class IngestError(ValueError):
    """Raised for malformed or degenerate input files."""


@dataclass(frozen=True)
class Snapshot:
    adjacency: np.ndarray  # (N, N) uint8, a[i, j] = 1 means i -> j
    attributes: np.ndarray  # (N, F) float64

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.sum())


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension z-score transform of node attributes."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, snapshots: Sequence[Snapshot]) -> "Standardizer":
        stacked = np.concatenate([s.attributes for s in snapshots], axis=0)
        mean = stacked.mean(axis=0)
        std = stacked.std(axis=0)
        std = np.where(std > 1e-12, std, 1.0)
        return cls(mean=mean, std=std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return x * self.std + self.mean


@dataclass(frozen=True)
class TemporalGraph:
    snapshots: tuple
    node_labels: Optional[tuple] = None  # node_labels[i] is the external id of node i
    scaler: Optional[Standardizer] = None  # set when attributes are standardized

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        if self.node_labels is not None:
            object.__setattr__(self, "node_labels", tuple(self.node_labels))

    @property
    def num_steps(self) -> int:
        return len(self.snapshots)

    @property
    def num_nodes(self) -> int:
        return self.snapshots[0].adjacency.shape[0] if self.snapshots else 0

    @property
    def attr_dim(self) -> int:
        return self.snapshots[0].attributes.shape[1] if self.snapshots else 0

    @property
    def standardized(self) -> bool:
        return self.scaler is not None

    def label_index(self) -> dict:
        labels = self.node_labels if self.node_labels is not None else range(self.num_nodes)
        return {str(lab): i for i, lab in enumerate(labels)}

    def adjacency_stack(self) -> np.ndarray:
        return np.stack([s.adjacency for s in self.snapshots])

    def attribute_stack(self) -> np.ndarray:
        return np.stack([s.attributes for s in self.snapshots])

    def raw_attributes(self, t: int) -> np.ndarray:
        """Attributes of snapshot ``t`` (0-based) in original units."""
        x = self.snapshots[t].attributes
        return self.scaler.inverse(x) if self.scaler is not None else x


def make_graph(adjacency, attributes=None, node_labels=None) -> TemporalGraph:
    """Build a TemporalGraph from stacked (T, N, N) / (T, N, F) arrays."""
    adjacency = np.asarray(adjacency)
    T, N = adjacency.shape[0], adjacency.shape[1]
    if attributes is None:
        attributes = np.zeros((T, N, 0))
    attributes = np.asarray(attributes, dtype=np.float64)
    snaps = [
        Snapshot(adjacency=np.asarray(adjacency[t], dtype=np.uint8), attributes=attributes[t].copy())
        for t in range(T)
    ]
    return TemporalGraph(snapshots=snaps, node_labels=node_labels)


def standardize(g: TemporalGraph, scaler: Optional[Standardizer] = None) -> TemporalGraph:
    if g.scaler is not None:
        return g
    if g.attr_dim == 0:
        scaler = scaler or Standardizer(mean=np.zeros(0), std=np.ones(0))
    scaler = scaler or Standardizer.fit(g.snapshots)
    snaps = [replace(s, attributes=scaler.transform(s.attributes)) for s in g.snapshots]
    return TemporalGraph(snapshots=snaps, node_labels=g.node_labels, scaler=scaler)


def destandardize(g: TemporalGraph) -> TemporalGraph:
    if g.scaler is None:
        return g
    snaps = [replace(s, attributes=g.scaler.inverse(s.attributes)) for s in g.snapshots]
    return TemporalGraph(snapshots=snaps, node_labels=g.node_labels, scaler=None)


# --------------------------------------------------------------------------- ingestion


@dataclass
class IngestSpec:
    num_bins: int = 1
    # "carry_forward": zeros until an attribute file is ingested.
    # "event_counts": per-bin (in-events, out-events) counts as a 2-dim attribute.
    attribute_policy: str = "carry_forward"
    attr_dim: int = 0

    def __post_init__(self):
        if self.num_bins < 1:
            raise ValueError(f"num_bins must be >= 1, got {self.num_bins}")
        if self.attribute_policy not in ("carry_forward", "event_counts"):
            raise ValueError(f"unknown attribute_policy {self.attribute_policy!r}")


_SPLIT = re.compile(r"[\s,]+")


def _rows(path):
    """Yield (lineno, fields) for non-blank, non-comment lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield lineno, _SPLIT.split(line)


def _sort_labels(labels):
    try:
        return sorted(labels, key=lambda s: (float(s), s))
    except ValueError:
        return sorted(labels)


def bin_timestamps(ts: np.ndarray, num_bins: int) -> np.ndarray:
    """Assign each timestamp to one of ``num_bins`` equal-width windows over [min, max]."""
    ts = np.asarray(ts, dtype=np.float64)
    lo, hi = ts.min(), ts.max()
    if hi == lo:
        if num_bins > 1:
            raise IngestError(f"all timestamps equal ({lo}); cannot split into {num_bins} bins")
        return np.zeros(len(ts), dtype=np.int64)
    width = (hi - lo) / num_bins
    bins = np.floor((ts - lo) / width).astype(np.int64)
    return np.clip(bins, 0, num_bins - 1)


def read_edge_events(path):
    """Parse a "src dst ts" file into (src_labels, dst_labels, timestamps)."""
    src, dst, ts = [], [], []
    for lineno, fields in _rows(path):
        if len(fields) != 3:
            raise IngestError(f"{path}:{lineno}: expected 'src dst ts', got {len(fields)} fields")
        try:
            stamp = float(fields[2])
        except ValueError:
            raise IngestError(f"{path}:{lineno}: bad timestamp {fields[2]!r}") from None
        if not math.isfinite(stamp):
            raise IngestError(f"{path}:{lineno}: non-finite timestamp")
        src.append(fields[0])
        dst.append(fields[1])
        ts.append(stamp)
    if not ts:
        raise IngestError(f"{path}: no edge events")
    return src, dst, np.asarray(ts)


def ingest_edge_list(path, spec: IngestSpec) -> TemporalGraph:
    src, dst, ts = read_edge_events(path)
    labels = _sort_labels(set(src) | set(dst))
    index = {lab: i for i, lab in enumerate(labels)}
    N, T = len(labels), spec.num_bins
    s = np.array([index[x] for x in src])
    d = np.array([index[x] for x in dst])
    b = bin_timestamps(ts, T)

    keep = s != d  # self-loops are dropped
    adj = np.zeros((T, N, N), dtype=np.uint8)
    adj[b[keep], s[keep], d[keep]] = 1

    if spec.attribute_policy == "event_counts":
        attrs = np.zeros((T, N, 2))
        np.add.at(attrs, (b[keep], d[keep], 0), 1.0)
        np.add.at(attrs, (b[keep], s[keep], 1), 1.0)
    else:
        attrs = np.zeros((T, N, spec.attr_dim))
    return make_graph(adj, attrs, node_labels=labels)


def ingest_attributes(g: TemporalGraph, path) -> TemporalGraph:
    """Populate attributes from a long-format "label t v1 .. vF" file (t is 1-based).

    Cells with no observation carry the last observed value forward; before the
    first observation a node's attributes are zero.
    """
    index = g.label_index()
    T, N = g.num_steps, g.num_nodes
    obs = {}
    F = None
    for lineno, fields in _rows(path):
        if len(fields) < 3:
            raise IngestError(f"{path}:{lineno}: expected 'label t v1 ... vF'")
        label = fields[0]
        if label not in index:
            raise KeyError(f"{path}:{lineno}: unknown node label {label!r}")
        try:
            t = int(fields[1])
            vals = [float(v) for v in fields[2:]]
        except ValueError:
            raise IngestError(f"{path}:{lineno}: non-numeric field") from None
        if F is None:
            F = len(vals)
        elif len(vals) != F:
            raise ValueError(f"{path}:{lineno}: attribute dimension {len(vals)} != {F}")
        if not 1 <= t <= T:
            raise IngestError(f"{path}:{lineno}: timestep {t} outside 1..{T}")
        obs[(index[label], t - 1)] = vals
    if F is None:
        F = g.attr_dim

    x = np.zeros((T, N, F))
    seen = np.zeros((T, N), dtype=bool)
    for (i, t), vals in obs.items():
        x[t, i] = vals
        seen[t, i] = True
    for t in range(1, T):
        carry = ~seen[t]
        x[t, carry] = x[t - 1, carry]
    snaps = [replace(s, attributes=x[t]) for t, s in enumerate(g.snapshots)]
    return TemporalGraph(snapshots=snaps, node_labels=g.node_labels)


# --------------------------------------------------------------------------- directory format


def _edge_file(t):
    return f"edges_{t:04d}.txt"


def _attr_file(t):
    return f"attrs_{t:04d}.txt"


def write_graph(g: TemporalGraph, directory) -> None:
    """Write ``g`` as a graph directory; attributes are written in original units."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for t, snap in enumerate(g.snapshots, start=1):
            src, dst = np.nonzero(snap.adjacency)
            with open(directory / _edge_file(t), "w", encoding="utf-8") as fh:
                fh.writelines(f"{i} {j}\n" for i, j in zip(src, dst))
            if g.attr_dim > 0:
                np.savetxt(directory / _attr_file(t), g.raw_attributes(t - 1), fmt="%.17g")
        manifest = {
            "version": FORMAT_VERSION,
            "N": g.num_nodes,
            "T": g.num_steps,
            "F": g.attr_dim,
            "standardized": g.standardized,
            "mean": g.scaler.mean.tolist() if g.scaler is not None else None,
            "std": g.scaler.std.tolist() if g.scaler is not None else None,
            "node_labels": list(g.node_labels) if g.node_labels is not None else None,
        }
        with open(directory / MANIFEST, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
    except OSError as exc:
        raise OSError(f"writing graph to {directory}: {exc}") from exc


def read_graph(directory, standardize_attrs: Optional[bool] = None) -> TemporalGraph:
    """Load a graph directory written by :func:`write_graph`.

    ``standardize_attrs=None`` follows the manifest's ``standardized`` flag; the
    stored mean/std are reused so that a write/read cycle is the identity.
    """
    directory = Path(directory)
    with open(directory / MANIFEST, encoding="utf-8") as fh:
        manifest = json.load(fh)
    N, T, F = manifest["N"], manifest["T"], manifest["F"]
    adj = np.zeros((T, N, N), dtype=np.uint8)
    attrs = np.zeros((T, N, F))
    for t in range(1, T + 1):
        for lineno, fields in _rows(directory / _edge_file(t)):
            if len(fields) != 2:
                raise IngestError(f"{directory / _edge_file(t)}:{lineno}: expected 'src dst'")
            adj[t - 1, int(fields[0]), int(fields[1])] = 1
        if F > 0:
            attrs[t - 1] = np.loadtxt(directory / _attr_file(t), ndmin=2).reshape(N, F)
    g = make_graph(adj, attrs, node_labels=manifest.get("node_labels"))

    if standardize_attrs is None:
        standardize_attrs = bool(manifest.get("standardized"))
    if standardize_attrs:
        scaler = None
        if manifest.get("mean") is not None:
            scaler = Standardizer(np.asarray(manifest["mean"]), np.asarray(manifest["std"]))
        g = standardize(g, scaler)
    return g


# --------------------------------------------------------------------------- validation


def validate(g: TemporalGraph) -> list:
    """Return a list of human-readable invariant violations (empty when valid)."""
    out = []
    if g.num_steps == 0:
        return ["empty sequence: T must be >= 1"]
    N, F = g.num_nodes, g.attr_dim
    for t, s in enumerate(g.snapshots, start=1):
        a, x = s.adjacency, s.attributes
        if a.shape != (N, N):
            out.append(f"shape, t={t}: adjacency {a.shape} != ({N}, {N})")
            continue
        if x.shape != (N, F):
            out.append(f"shape, t={t}: attributes {x.shape} != ({N}, {F})")
        bad = np.argwhere((a != 0) & (a != 1))
        for i, j in bad:
            out.append(f"non-binary, t={t}, entry ({i}, {j}) = {a[i, j]}")
        for i in np.nonzero(np.diag(a))[0]:
            out.append(f"self-loop, t={t}, node {i}")
        if x.ndim == 2:
            for i, k in np.argwhere(~np.isfinite(x)):
                out.append(f"non-finite attribute, t={t}, node {i}, dim {k}")
    if g.node_labels is not None and len(set(g.node_labels)) != N:
        out.append(f"labels: {len(g.node_labels)} labels ({len(set(g.node_labels))} distinct) for N={N}")
    return out
