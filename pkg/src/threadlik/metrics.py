"""Structural and temporal statistics of thread corpora.

Structure side: final-tree degree distribution, subtree-size distribution
over non-root nodes, thread-size histogram and CCDF, and the size-depth
relation.  A node's final degree is one (its birth edge) plus the number
of replies it received from node 3 onward, which equals the plain tree
degree for every thread with at least two nodes and assigns an isolated
root degree 1.

Temporal side: the (width, mean depth) trajectory of every thread after
each node arrival, aggregated over all threads still alive at each size,
with markers at sizes 10, 100, and 1000.  Mean depth averages over all
nodes including the root (depth 0), which keeps the chain and star closed
forms exact: a chain of n nodes has mean depth (n - 1) / 2, a star has
(n - 1) / n.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as kernels
from .thread_core import ThreadDataset

__all__ = [
    "MARKER_SIZES",
    "DepthBySizeRow",
    "StructureReport",
    "EvolutionTrace",
    "OverlayRow",
    "DivergenceSummary",
    "structure_report",
    "evolution_trace",
    "compare_reports",
    "total_variation",
    "log_binned_depth_table",
]

MARKER_SIZES = (10, 100, 1000)


def total_variation(p: Mapping, q: Mapping) -> float:
    """Total-variation distance between two finite probability maps."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def _mass_histogram(values: np.ndarray) -> dict[int, float]:
    values = np.asarray(values)
    if values.size == 0:
        return {}
    support, counts = np.unique(values, return_counts=True)
    total = values.size
    return {int(v): float(c) / total for v, c in zip(support, counts)}


def _ccdf_table(hist: Mapping[int, float]) -> tuple[tuple[int, float], ...]:
    items = sorted(hist.items())
    if not items:
        return ()
    mass = np.asarray([m for _, m in items])
    tail = np.cumsum(mass[::-1])[::-1]
    return tuple((v, float(t)) for (v, _), t in zip(items, tail))


@dataclass(frozen=True)
class DepthBySizeRow:
    """Depth statistics of all threads sharing one final size."""

    size: int
    mean_depth: float
    max_depth: float
    n_threads: int


@dataclass(frozen=True)
class StructureReport:
    """Final-tree structural histograms of one corpus.

    ``subtree_size_histogram`` covers strict-descendant counts of non-root
    nodes only and is empty when the corpus has no non-root nodes.
    ``depth_by_size`` carries both the mean node depth (primary) and the
    max depth (secondary) averaged over threads of each exact size.
    """

    degree_histogram: dict[int, float]
    subtree_size_histogram: dict[int, float]
    size_histogram: dict[int, float]
    size_ccdf: tuple[tuple[int, float], ...]
    degree_ccdf: tuple[tuple[int, float], ...]
    depth_by_size: tuple[DepthBySizeRow, ...]
    n_threads: int
    n_nodes: int

    def export_csv(self, directory, stem: str = "structure") -> list[Path]:
        """Write one CSV per report section; returns the paths written."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []

        def hist_file(name: str, hist, value_col: str) -> None:
            path = directory / f"{stem}_{name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow([value_col, "probability"])
                for v, m in sorted(hist.items()):
                    w.writerow([v, m])
            written.append(path)

        def ccdf_file(name: str, table, value_col: str) -> None:
            path = directory / f"{stem}_{name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow([value_col, "ccdf"])
                for v, t in table:
                    w.writerow([v, t])
            written.append(path)

        hist_file("degree", self.degree_histogram, "degree")
        hist_file("subtree", self.subtree_size_histogram, "descendants")
        hist_file("size", self.size_histogram, "size")
        ccdf_file("size_ccdf", self.size_ccdf, "size")
        ccdf_file("degree_ccdf", self.degree_ccdf, "degree")
        path = directory / f"{stem}_depth_by_size.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["size", "mean_depth", "max_depth", "n_threads"])
            for row in self.depth_by_size:
                w.writerow([row.size, row.mean_depth, row.max_depth, row.n_threads])
        written.append(path)
        return written


def structure_report(data: ThreadDataset) -> StructureReport:
    """Compute every structural histogram of a corpus in one pass."""
    if data.n_threads == 0:
        raise ValueError("empty dataset")
    concat = data.parents_concat
    lengths = data.lengths
    sizes = data.sizes
    n = data.n_threads

    degrees = kernels.final_degrees_flat(concat, lengths)
    depths = kernels.depths_flat(concat, lengths)
    subtree = kernels.subtree_sizes_flat(concat, lengths)

    node_starts = np.zeros(n, dtype=np.int64)
    np.cumsum(sizes[:-1], out=node_starts[1:])
    nonroot = np.ones(len(degrees), dtype=bool)
    nonroot[node_starts] = False

    # per-thread depth summaries; reduceat segments are the node blocks
    depth_sum = np.add.reduceat(depths.astype(np.float64), node_starts)
    depth_max = np.maximum.reduceat(depths, node_starts)
    thread_mean_depth = depth_sum / sizes

    support, inv, counts = np.unique(sizes, return_inverse=True, return_counts=True)
    mean_by_size = np.bincount(inv, weights=thread_mean_depth) / counts
    max_by_size = np.bincount(inv, weights=depth_max.astype(np.float64)) / counts
    depth_rows = tuple(
        DepthBySizeRow(int(s), float(md), float(xd), int(c))
        for s, md, xd, c in zip(support, mean_by_size, max_by_size, counts)
    )

    degree_hist = _mass_histogram(degrees)
    size_hist = _mass_histogram(sizes)
    return StructureReport(
        degree_histogram=degree_hist,
        subtree_size_histogram=_mass_histogram(subtree[nonroot]),
        size_histogram=size_hist,
        size_ccdf=_ccdf_table(size_hist),
        degree_ccdf=_ccdf_table(degree_hist),
        depth_by_size=depth_rows,
        n_threads=int(n),
        n_nodes=int(len(degrees)),
    )


def log_binned_depth_table(report: StructureReport, bins_per_decade: int = 8) -> list[dict]:
    """Aggregate depth_by_size into logarithmic size bins for plotting.

    Bin b spans sizes in [10^(b/bins_per_decade), 10^((b+1)/bins_per_decade));
    means are thread-weighted within each bin.
    """
    if bins_per_decade < 1:
        raise ValueError("bins_per_decade must be >= 1")
    rows: dict[int, list[float]] = {}
    for r in report.depth_by_size:
        b = int(math.floor(math.log10(r.size) * bins_per_decade + 1e-9))
        acc = rows.setdefault(b, [0.0, 0.0, 0.0])
        acc[0] += r.mean_depth * r.n_threads
        acc[1] += r.max_depth * r.n_threads
        acc[2] += r.n_threads
    out = []
    for b in sorted(rows):
        wsum_mean, wsum_max, count = rows[b]
        out.append(
            {
                "bin_lo": 10.0 ** (b / bins_per_decade),
                "bin_hi": 10.0 ** ((b + 1) / bins_per_decade),
                "mean_depth": wsum_mean / count,
                "max_depth": wsum_max / count,
                "n_threads": int(count),
            }
        )
    return out


@dataclass(frozen=True)
class EvolutionTrace:
    """Aggregated (width, mean depth) trajectories over node arrivals.

    Index t - 1 of each array describes trees holding exactly t nodes,
    averaged over the ``alive[t - 1]`` threads whose final size is >= t.
    ``markers`` picks out the standard comparison sizes present in the
    corpus.  ``per_thread`` holds the raw per-thread trajectories when
    requested (memory scales with total node count).
    """

    mean_width: np.ndarray
    mean_depth: np.ndarray
    alive: np.ndarray
    markers: dict[int, tuple[float, float, int]]
    per_thread: tuple[tuple[np.ndarray, np.ndarray], ...] | None = field(
        default=None, repr=False
    )

    @property
    def max_size(self) -> int:
        return len(self.mean_width)

    def at(self, t: int) -> tuple[float, float, int]:
        """(mean width, mean depth, alive count) at exactly t nodes."""
        if not 1 <= t <= self.max_size:
            raise ValueError(f"no thread reaches {t} nodes")
        return (
            float(self.mean_width[t - 1]),
            float(self.mean_depth[t - 1]),
            int(self.alive[t - 1]),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "mean_width", "mean_depth", "alive"])
            for i in range(self.max_size):
                w.writerow([i + 1, self.mean_width[i], self.mean_depth[i], int(self.alive[i])])


def evolution_trace(data: ThreadDataset, keep_threads: bool = False) -> EvolutionTrace:
    """Trace every thread's growth and average over alive threads."""
    if data.n_threads == 0:
        raise ValueError("empty dataset")
    concat = data.parents_concat
    offsets = data.offsets
    max_size = int(data.sizes.max())
    sum_w = np.zeros(max_size, dtype=np.float64)
    sum_d = np.zeros(max_size, dtype=np.float64)
    alive = np.zeros(max_size, dtype=np.int64)
    per: list[tuple[np.ndarray, np.ndarray]] | None = [] if keep_threads else None
    for i in range(data.n_threads):
        w, md = kernels.evolution_thread(concat[offsets[i]:offsets[i + 1]])
        s = len(w)
        sum_w[:s] += w
        sum_d[:s] += md
        alive[:s] += 1
        if per is not None:
            per.append((w, md))
    mean_w = sum_w / alive
    mean_d = sum_d / alive
    markers = {
        m: (float(mean_w[m - 1]), float(mean_d[m - 1]), int(alive[m - 1]))
        for m in MARKER_SIZES
        if m <= max_size
    }
    return EvolutionTrace(
        mean_width=mean_w,
        mean_depth=mean_d,
        alive=alive,
        markers=markers,
        per_thread=tuple(per) if per is not None else None,
    )


@dataclass(frozen=True)
class OverlayRow:
    """One support point of two histograms laid over each other."""

    value: int
    p_real: float
    p_synth: float


@dataclass(frozen=True)
class DivergenceSummary:
    """Distances and overlay tables between two structure reports."""

    tv: dict[str, float]
    overlays: dict[str, tuple[OverlayRow, ...]]

    def to_json_dict(self) -> dict:
        return {
            "tv": dict(self.tv),
            "overlays": {
                name: [
                    {"value": r.value, "p_real": r.p_real, "p_synth": r.p_synth}
                    for r in rows
                ]
                for name, rows in self.overlays.items()
            },
        }

    def export_csv(self, directory, stem: str = "divergence") -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        path = directory / f"{stem}_tv.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["histogram", "total_variation"])
            for name, d in self.tv.items():
                w.writerow([name, d])
        written.append(path)
        for name, rows in self.overlays.items():
            path = directory / f"{stem}_{name}_overlay.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["value", "p_real", "p_synth"])
                for r in rows:
                    w.writerow([r.value, r.p_real, r.p_synth])
            written.append(path)
        return written


def compare_reports(real: StructureReport, synth: StructureReport) -> DivergenceSummary:
    """Quantify how closely a synthetic corpus reproduces a real one."""
    pairs = {
        "degree": (real.degree_histogram, synth.degree_histogram),
        "subtree_size": (real.subtree_size_histogram, synth.subtree_size_histogram),
        "size": (real.size_histogram, synth.size_histogram),
    }
    tv = {name: total_variation(p, q) for name, (p, q) in pairs.items()}
    overlays = {}
    for name, (p, q) in pairs.items():
        support = sorted(set(p) | set(q))
        overlays[name] = tuple(
            OverlayRow(value=v, p_real=p.get(v, 0.0), p_synth=q.get(v, 0.0))
            for v in support
        )
    return DivergenceSummary(tv=tv, overlays=overlays)
