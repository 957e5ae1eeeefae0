"""Reading and writing thread corpora.

Canonical format is JSON lines: one object per thread with a string "id"
and a "parents" array of 1-based integers (empty array = root-only
thread).  The CSV alternative puts one thread per line as the id followed
by comma-separated parents; a root-only thread is the id followed by a
single comma (empty body).  JSON lines stream well at corpus scale
(hundreds of thousands to millions of threads); CSV is a convenience for
spreadsheet work and cannot hold ids containing commas.

Strict ingestion aborts on the first malformed line with its line number;
lenient ingestion skips malformed lines and reports them.  Duplicate ids
count as malformed.  Writing then re-reading a dataset reproduces it
exactly in either format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .thread_core import ThreadDataset

__all__ = [
    "DatasetFormatError",
    "IngestIssue",
    "IngestResult",
    "detect_format",
    "read_dataset",
    "write_dataset",
]

_FORMATS = ("jsonl", "csv")


class DatasetFormatError(ValueError):
    """A dataset file violates its format contract."""


@dataclass(frozen=True)
class IngestIssue:
    """One skipped line in lenient mode."""

    line_number: int
    message: str


@dataclass(frozen=True)
class IngestResult:
    """Validated corpus plus the per-line ids and any skipped lines."""

    dataset: ThreadDataset
    ids: tuple[str, ...]
    issues: tuple[IngestIssue, ...] = ()

    @property
    def n_skipped(self) -> int:
        return len(self.issues)


def detect_format(path) -> str:
    """Pick jsonl or csv from the extension, else sniff the first line."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return "jsonl"
    if suffix == ".csv":
        return "csv"
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if stripped:
                return "jsonl" if stripped.startswith("{") else "csv"
    return "jsonl"


def _parse_jsonl_line(line: str) -> tuple[str, list[int]]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    if "id" not in obj or "parents" not in obj:
        raise ValueError('object must have "id" and "parents" fields')
    tid = obj["id"]
    parents = obj["parents"]
    if not isinstance(tid, str) or not tid:
        raise ValueError('"id" must be a nonempty string')
    if not isinstance(parents, list):
        raise ValueError('"parents" must be an array')
    for p in parents:
        if isinstance(p, bool) or not isinstance(p, int):
            raise ValueError('"parents" entries must be integers')
    return tid, parents


def _parse_csv_line(line: str) -> tuple[str, list[int]]:
    fields = line.split(",")
    tid = fields[0]
    if not tid:
        raise ValueError("empty thread id")
    body = fields[1:]
    if body == [""]:
        return tid, []
    try:
        return tid, [int(f) for f in body]
    except ValueError:
        raise ValueError("parents must be integers") from None


def _check_parents(parents: list[int]) -> str | None:
    if not parents:
        return None
    if parents[0] != 1:
        return "first parent must be 1"
    for i, p in enumerate(parents):
        if not 1 <= p <= i + 1:
            return f"parent {p} at position {i + 1} exceeds the nodes present"
    return None


def read_dataset(path, *, fmt: str | None = None, strict: bool = True) -> IngestResult:
    """Load a corpus, validating every line.

    Raises DatasetFormatError on the first bad line in strict mode, or on
    a corpus with zero valid threads in either mode.
    """
    path = Path(path)
    fmt = fmt or detect_format(path)
    if fmt not in _FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {_FORMATS}")
    parse = _parse_jsonl_line if fmt == "jsonl" else _parse_csv_line

    chunks: list[list[int]] = []
    lengths: list[int] = []
    ids: list[str] = []
    seen: set[str] = set()
    issues: list[IngestIssue] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            try:
                tid, parents = parse(line)
                if tid in seen:
                    raise ValueError(f"duplicate thread id {tid!r}")
                problem = _check_parents(parents)
                if problem is not None:
                    raise ValueError(problem)
            except ValueError as exc:
                if strict:
                    raise DatasetFormatError(f"{path}:{line_number}: {exc}") from None
                issues.append(IngestIssue(line_number=line_number, message=str(exc)))
                continue
            seen.add(tid)
            ids.append(tid)
            chunks.append(parents)
            lengths.append(len(parents))
    if not ids:
        raise DatasetFormatError(f"{path}: no valid threads")
    concat = np.fromiter(
        (p for chunk in chunks for p in chunk),
        dtype=np.int32,
        count=sum(lengths),
    )
    dataset = ThreadDataset.from_arrays(
        concat,
        np.asarray(lengths, dtype=np.int64),
        validate=False,
        source_label=str(path),
    )
    return IngestResult(dataset=dataset, ids=tuple(ids), issues=tuple(issues))


def write_dataset(dataset: ThreadDataset, path, *, fmt: str | None = None,
                  ids: tuple[str, ...] | None = None) -> None:
    """Emit a corpus; default ids are t0, t1, ... in dataset order."""
    path = Path(path)
    fmt = fmt or detect_format_for_write(path)
    if fmt not in _FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {_FORMATS}")
    if ids is not None and len(ids) != dataset.n_threads:
        raise ValueError("ids and dataset lengths differ")
    concat = dataset.parents_concat
    offsets = dataset.offsets
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for i in range(dataset.n_threads):
            tid = ids[i] if ids is not None else f"t{i}"
            parents = concat[offsets[i]:offsets[i + 1]].tolist()
            if fmt == "jsonl":
                fh.write(json.dumps({"id": tid, "parents": parents},
                                    separators=(",", ":")))
            else:
                if "," in tid or "\n" in tid:
                    raise ValueError(f"id {tid!r} cannot be written as CSV")
                body = ",".join(str(p) for p in parents)
                fh.write(f"{tid},{body}" if body else f"{tid},")
            fh.write("\n")


def detect_format_for_write(path) -> str:
    """Extension-only format choice for output paths (default jsonl)."""
    suffix = Path(path).suffix.lower()
    return "csv" if suffix == ".csv" else "jsonl"
