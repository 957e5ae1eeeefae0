"""Growing-tree representation of discussion threads.

A thread is encoded by its parent vector: entry t (1-based) records the id
of the node that comment t+1 replied to.  Node ids equal arrival order, the
root post is node 1, and a parent always precedes its child, so any vector
with ``parents[1] = 1`` and ``parents[t] <= t`` encodes a tree.  A thread's
size is its total node count, root included: ``size = len(parents) + 1``.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParentVector",
    "ThreadDataset",
    "NodeDerived",
    "ValidationReport",
    "validate",
    "degree_at",
    "degrees",
    "depths",
    "subtree_sizes",
    "node_derived",
]


class ParentVector:
    """Immutable parent vector of a single thread.

    Args:
        parents: sequence of 1-based node ids; entry at (1-based) position t
            is the parent of node t+1.  An empty sequence is a root-only
            thread.  Construction does not validate the growth rules; use
            :func:`validate` for untrusted input.
    """

    __slots__ = ("_parents",)

    def __init__(self, parents: Sequence[int] = ()):
        arr = np.array(parents, dtype=np.int32, copy=True)
        if arr.ndim != 1:
            raise ValueError("parent vector must be one-dimensional")
        arr.flags.writeable = False
        self._parents = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "ParentVector":
        # internal no-copy path; arr must be a read-only int32 vector
        pv = object.__new__(cls)
        pv._parents = arr
        return pv

    @property
    def parents(self) -> np.ndarray:
        """Read-only int32 array of parent ids, entry t-1 holding pi_t."""
        return self._parents

    @property
    def size(self) -> int:
        """Node count including the root."""
        return len(self._parents) + 1

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(int(p) for p in self._parents)

    def __len__(self) -> int:
        return len(self._parents)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParentVector):
            return NotImplemented
        return np.array_equal(self._parents, other._parents)

    def __hash__(self) -> int:
        return hash(self._parents.tobytes())

    def __repr__(self) -> str:
        body = ",".join(str(int(p)) for p in self._parents[:8])
        if len(self._parents) > 8:
            body += ",..."
        return f"ParentVector(({body}), size={self.size})"


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking the growth rules on a parent vector.

    ``index`` is the 1-based position of the first offending entry when
    ``ok`` is False.
    """

    ok: bool
    index: int | None = None
    reason: str | None = None


def validate(pv: ParentVector | Sequence[int]) -> ValidationReport:
    """Check the construction rules of a parent vector.

    Rules: the first entry must be 1 (the first comment always replies to
    the root) and entry t may not exceed t (a node only replies to nodes
    already present).  Violations are reported, not raised.
    """
    arr = pv.parents if isinstance(pv, ParentVector) else np.asarray(pv)
    if arr.ndim != 1:
        return ValidationReport(False, None, "parent vector must be one-dimensional")
    if len(arr) == 0:
        return ValidationReport(True)
    if not np.issubdtype(arr.dtype, np.integer):
        fl = np.asarray(arr, dtype=np.float64)
        if not np.all(fl == np.floor(fl)):
            bad = int(np.flatnonzero(fl != np.floor(fl))[0])
            return ValidationReport(False, bad + 1, "parent id is not an integer")
        arr = fl.astype(np.int64)
    if arr[0] != 1:
        return ValidationReport(False, 1, "first entry must be 1 (reply to the root)")
    pos = np.arange(1, len(arr) + 1, dtype=arr.dtype)
    low = arr < 1
    if low.any():
        bad = int(np.flatnonzero(low)[0])
        return ValidationReport(False, bad + 1, f"parent id {int(arr[bad])} is below 1")
    high = arr > pos
    if high.any():
        bad = int(np.flatnonzero(high)[0])
        return ValidationReport(
            False,
            bad + 1,
            f"parent id {int(arr[bad])} exceeds the {int(pos[bad])} nodes present",
        )
    return ValidationReport(True)


def degree_at(pv: ParentVector, k: int, t: int) -> int:
    """Degree of node k in the snapshot holding t nodes.

    A node enters with degree 1 (the link to its parent; the root's
    notional self-link keeps the convention uniform) and gains one per
    reply received.  Nodes not yet present have degree 0.

    Args:
        k: 1-based node id, k >= 1.
        t: snapshot size in nodes, 1 <= t <= pv.size.
    """
    if k < 1:
        raise ValueError("node id must be >= 1")
    if not 1 <= t <= pv.size:
        raise ValueError(f"snapshot size {t} outside [1, {pv.size}]")
    if k > t:
        return 0
    arr = pv.parents
    # replies received by k among nodes 3..t, i.e. entries pi_2..pi_{t-1}
    return 1 + int(np.count_nonzero(arr[1 : t - 1] == k))


def degrees(pv: ParentVector, t: int | None = None) -> np.ndarray:
    """Vector of degrees of nodes 1..t at snapshot size t (default: final)."""
    if t is None:
        t = pv.size
    if not 1 <= t <= pv.size:
        raise ValueError(f"snapshot size {t} outside [1, {pv.size}]")
    arr = pv.parents
    out = np.ones(t, dtype=np.int64)
    if t > 2:
        out += np.bincount(arr[1 : t - 1], minlength=t + 1)[1 : t + 1]
    return out


def depths(pv: ParentVector) -> np.ndarray:
    """Depth of every node (root has depth 0)."""
    arr = pv.parents
    out = np.zeros(len(arr) + 1, dtype=np.int32)
    for i, p in enumerate(arr):
        out[i + 1] = out[p - 1] + 1
    return out


def subtree_sizes(pv: ParentVector) -> np.ndarray:
    """Strict descendant count of every node (self excluded; leaves get 0)."""
    arr = pv.parents
    n = len(arr) + 1
    out = np.zeros(n, dtype=np.int64)
    # children always carry larger ids, so one reverse sweep suffices
    for node in range(n, 1, -1):
        out[arr[node - 2] - 1] += out[node - 1] + 1
    return out


@dataclass(frozen=True)
class NodeDerived:
    """Per-node derived quantities of one thread at its final size."""

    degree: np.ndarray
    depth: np.ndarray
    subtree_descendants: np.ndarray


def node_derived(pv: ParentVector) -> NodeDerived:
    """Bundle final-time degrees, depths, and strict descendant counts."""
    return NodeDerived(
        degree=degrees(pv), depth=depths(pv), subtree_descendants=subtree_sizes(pv)
    )


def _positions_within(lengths: np.ndarray) -> np.ndarray:
    """0-based position of every concatenated entry within its thread."""
    total = int(lengths.sum())
    offsets = np.zeros(len(lengths), dtype=np.int64)
    np.cumsum(lengths[:-1], out=offsets[1:])
    return np.arange(total, dtype=np.int64) - np.repeat(offsets, lengths)


class ThreadDataset:
    """Immutable collection of threads stored as one concatenated vector.

    Iteration yields :class:`ParentVector` views without copying.  The
    ``threads`` property materializes the full list; prefer iteration for
    very large corpora.
    """

    __slots__ = ("_concat", "_lengths", "_offsets", "source_label", "_flat_steps")

    def __init__(
        self,
        threads: Iterable[ParentVector | Sequence[int]],
        *,
        source_label: str = "",
        validate: bool = True,
    ):
        chunks = []
        lengths = []
        for th in threads:
            arr = th.parents if isinstance(th, ParentVector) else np.asarray(th, dtype=np.int32)
            chunks.append(np.asarray(arr, dtype=np.int32).ravel())
            lengths.append(len(chunks[-1]))
        concat = (
            np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int32)
        )
        self._init_from(concat, np.asarray(lengths, dtype=np.int64), source_label, validate)

    @classmethod
    def from_arrays(
        cls,
        parents_concat: np.ndarray,
        lengths: np.ndarray,
        *,
        source_label: str = "",
        validate: bool = True,
    ) -> "ThreadDataset":
        """Build from a pre-concatenated parent array and per-thread lengths."""
        ds = object.__new__(cls)
        ds._init_from(
            np.asarray(parents_concat, dtype=np.int32),
            np.asarray(lengths, dtype=np.int64),
            source_label,
            validate,
        )
        return ds

    def _init_from(
        self, concat: np.ndarray, lengths: np.ndarray, source_label: str, validate: bool
    ) -> None:
        if lengths.ndim != 1 or (len(lengths) and lengths.min() < 0):
            raise ValueError("lengths must be a vector of nonnegative counts")
        if int(lengths.sum()) != len(concat):
            raise ValueError("lengths do not add up to the concatenated array")
        concat = np.ascontiguousarray(concat, dtype=np.int32)
        concat.flags.writeable = False
        lengths = np.ascontiguousarray(lengths, dtype=np.int64)
        lengths.flags.writeable = False
        self._concat = concat
        self._lengths = lengths
        offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        offsets.flags.writeable = False
        self._offsets = offsets
        self.source_label = source_label
        self._flat_steps = None  # lazily filled by likelihood.FlatSteps
        if validate:
            self._validate()

    def _validate(self) -> None:
        if len(self._concat) == 0:
            return
        pos = _positions_within(self._lengths)
        bad = (self._concat < 1) | (self._concat > pos + 1)
        bad |= (pos == 0) & (self._concat != 1)
        if bad.any():
            flat = int(np.flatnonzero(bad)[0])
            th = int(np.searchsorted(self._offsets, flat, side="right")) - 1
            report = validate(self[th])
            raise ValueError(
                f"thread {th}: invalid parent vector at position {report.index}: {report.reason}"
            )

    @property
    def parents_concat(self) -> np.ndarray:
        return self._concat

    @property
    def lengths(self) -> np.ndarray:
        return self._lengths

    @property
    def offsets(self) -> np.ndarray:
        return self._offsets

    @property
    def n_threads(self) -> int:
        return len(self._lengths)

    @property
    def n_nodes(self) -> int:
        """Total node count over all threads, roots included."""
        return int(self._lengths.sum()) + len(self._lengths)

    @property
    def sizes(self) -> np.ndarray:
        """Per-thread node counts."""
        return self._lengths + 1

    @property
    def threads(self) -> list[ParentVector]:
        return list(self)

    def size_histogram(self) -> dict[int, int]:
        """Multiset of thread sizes as a size -> count map."""
        vals, counts = np.unique(self._lengths + 1, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}

    def subset(self, indices: Sequence[int], *, source_label: str | None = None) -> "ThreadDataset":
        """New dataset holding the given threads, repeats allowed."""
        idx = np.asarray(indices, dtype=np.int64)
        lengths = self._lengths[idx]
        take = np.concatenate(
            [self._concat[self._offsets[i] : self._offsets[i + 1]] for i in idx]
        ) if len(idx) else np.empty(0, dtype=np.int32)
        label = self.source_label if source_label is None else source_label
        return ThreadDataset.from_arrays(take, lengths, source_label=label, validate=False)

    def __len__(self) -> int:
        return len(self._lengths)

    def __getitem__(self, i: int) -> ParentVector:
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i = i % len(self) if len(self) else i
        view = self._concat[self._offsets[i] : self._offsets[i + 1]]
        return ParentVector._wrap(view)

    def __iter__(self) -> Iterator[ParentVector]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ThreadDataset):
            return NotImplemented
        return np.array_equal(self._lengths, other._lengths) and np.array_equal(
            self._concat, other._concat
        )

    def __repr__(self) -> str:
        label = f", source={self.source_label!r}" if self.source_label else ""
        return f"ThreadDataset(n_threads={self.n_threads}, n_nodes={self.n_nodes}{label})"
