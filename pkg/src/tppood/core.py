"""Event sequences, transformed sequences and JSONL datasets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import (
    EmptyDataset,
    MarkLengthMismatch,
    MarkOutOfRange,
    NonMonotoneTimes,
    ParseError,
    TimeOutOfRange,
    ValidationError,
)

__all__ = [
    "EventSequence",
    "TransformedSequence",
    "Dataset",
    "validate",
    "load_jsonl",
    "save_jsonl",
]


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EventSequence:
    """Arrival times on ``(0, t_max]`` with optional integer marks in ``[0, num_marks)``.

    Construction does not validate; call :func:`validate` (or use
    :meth:`checked`) when the input is untrusted.
    """

    arrival_times: np.ndarray
    t_max: float
    marks: Optional[np.ndarray] = None
    num_marks: int = 1

    def __post_init__(self):
        object.__setattr__(self, "arrival_times", _frozen(self.arrival_times, np.float64))
        if self.marks is not None:
            object.__setattr__(self, "marks", _frozen(self.marks, np.int64))
        object.__setattr__(self, "t_max", float(self.t_max))
        object.__setattr__(self, "num_marks", int(self.num_marks))

    @classmethod
    def checked(cls, arrival_times, t_max, marks=None, num_marks=1) -> "EventSequence":
        seq = cls(arrival_times, t_max, marks, num_marks)
        validate(seq)
        return seq

    def __len__(self) -> int:
        return len(self.arrival_times)

    @property
    def is_marked(self) -> bool:
        return self.num_marks > 1

    def mark_array(self) -> np.ndarray:
        """Marks as an array, all zeros for unmarked sequences."""
        if self.marks is None:
            return np.zeros(len(self.arrival_times), dtype=np.int64)
        return self.marks

    def times_of_mark(self, k: int) -> np.ndarray:
        if self.marks is None:
            return self.arrival_times if k == 0 else self.arrival_times[:0]
        return self.arrival_times[self.marks == k]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventSequence):
            return NotImplemented
        if self.t_max != other.t_max or self.num_marks != other.num_marks:
            return False
        if not np.array_equal(self.arrival_times, other.arrival_times):
            return False
        if (self.marks is None) != (other.marks is None):
            return False
        return self.marks is None or np.array_equal(self.marks, other.marks)

    __hash__ = None

    def to_record(self) -> dict:
        rec = {"arrival_times": self.arrival_times.tolist()}
        if self.marks is not None:
            rec["marks"] = self.marks.tolist()
        rec["t_max"] = self.t_max
        if self.num_marks > 1:
            rec["num_marks"] = self.num_marks
        return rec


@dataclass(frozen=True, eq=False)
class TransformedSequence:
    """Image of an event sequence under the compensator: points on ``(0, v_max]``."""

    points: np.ndarray
    v_max: float

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(self.points, np.float64))
        object.__setattr__(self, "v_max", float(self.v_max))

    def __len__(self) -> int:
        return len(self.points)

    def spacings(self) -> np.ndarray:
        """The N + 1 gaps including both interval endpoints."""
        return np.diff(np.concatenate(([0.0], self.points, [self.v_max])))

    def validate(self) -> None:
        if not self.v_max > 0:
            raise TimeOutOfRange(f"v_max must be positive, got {self.v_max}")
        if len(self.points):
            if self.points[0] <= 0 or self.points[-1] > self.v_max:
                raise TimeOutOfRange("transformed points must lie in (0, v_max]")
            if np.any(np.diff(self.points) <= 0):
                raise NonMonotoneTimes("transformed points must be strictly increasing")


def validate(seq: EventSequence) -> None:
    """Raise a :class:`ValidationError` subclass unless ``seq`` satisfies its invariants."""
    t = seq.arrival_times
    if not (np.isfinite(seq.t_max) and seq.t_max > 0):
        raise TimeOutOfRange(f"t_max must be a positive finite number, got {seq.t_max}")
    if seq.num_marks < 1:
        raise MarkOutOfRange(f"num_marks must be >= 1, got {seq.num_marks}")
    if len(t):
        if not np.all(np.isfinite(t)):
            raise TimeOutOfRange("arrival times must be finite")
        if np.any(np.diff(t) <= 0):
            raise NonMonotoneTimes("arrival times must be strictly increasing")
        if t[0] <= 0 or t[-1] > seq.t_max:
            raise TimeOutOfRange(f"arrival times must lie in (0, {seq.t_max}]")
    if seq.num_marks > 1:
        if seq.marks is None:
            raise MarkLengthMismatch("marked sequence (num_marks > 1) requires marks")
        if len(seq.marks) != len(t):
            raise MarkLengthMismatch(
                f"{len(seq.marks)} marks for {len(t)} arrival times")
        if len(seq.marks) and (seq.marks.min() < 0 or seq.marks.max() >= seq.num_marks):
            raise MarkOutOfRange(f"marks must lie in [0, {seq.num_marks})")
    elif seq.marks is not None:
        if len(seq.marks) != len(t):
            raise MarkLengthMismatch(
                f"{len(seq.marks)} marks for {len(t)} arrival times")
        if len(seq.marks) and np.any(seq.marks != 0):
            raise MarkOutOfRange("marks present but num_marks is 1")


@dataclass(eq=False)
class Dataset:
    """A collection of event sequences sharing the same number of marks."""

    sequences: list = field(default_factory=list)
    num_marks: int = 1

    def __post_init__(self):
        self.sequences = list(self.sequences)
        for seq in self.sequences:
            if seq.num_marks != self.num_marks:
                raise ValidationError(
                    f"sequence has {seq.num_marks} marks, dataset has {self.num_marks}")

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self) -> Iterator[EventSequence]:
        return iter(self.sequences)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Dataset(self.sequences[i], self.num_marks)
        return self.sequences[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.num_marks == other.num_marks
                and len(self) == len(other)
                and all(a == b for a, b in zip(self.sequences, other.sequences)))

    __hash__ = None

    def require_nonempty(self) -> None:
        if not self.sequences:
            raise EmptyDataset("dataset contains no sequences")

    def event_counts(self) -> np.ndarray:
        return np.array([len(s) for s in self.sequences], dtype=np.int64)


def _parse_record(rec, lineno):
    if not isinstance(rec, dict):
        raise ParseError("record must be a JSON object", lineno)
    try:
        times = rec["arrival_times"]
        t_max = rec["t_max"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}", lineno) from None
    marks = rec.get("marks")
    num_marks = rec.get("num_marks")
    try:
        times = np.asarray(times, dtype=np.float64).reshape(-1)
        t_max = float(t_max)
        if marks is not None:
            marks_arr = np.asarray(marks, dtype=np.float64).reshape(-1)
            if np.any(marks_arr != np.round(marks_arr)):
                raise ParseError("marks must be integers", lineno)
            marks = marks_arr.astype(np.int64)
        if num_marks is not None:
            num_marks = int(num_marks)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc), lineno) from None
    return times, t_max, marks, num_marks


def load_jsonl(path) -> Dataset:
    """Read a dataset written one JSON record per line.

    A line holding only ``{"num_marks": K}`` acts as a header and fixes K;
    otherwise K is the largest of any per-record ``num_marks`` and max mark + 1.
    """
    header_k = None
    parsed = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, lineno) from None
            if isinstance(rec, dict) and set(rec) == {"num_marks"}:
                try:
                    header_k = int(rec["num_marks"])
                except (TypeError, ValueError):
                    raise ParseError("invalid num_marks header", lineno) from None
                continue
            parsed.append((lineno, _parse_record(rec, lineno)))

    if header_k is not None:
        k = header_k
    else:
        k = 1
        for _, (_, _, marks, num_marks) in parsed:
            if num_marks is not None:
                k = max(k, num_marks)
            if marks is not None and len(marks):
                k = max(k, int(marks.max()) + 1)

    sequences = []
    for lineno, (times, t_max, marks, num_marks) in parsed:
        if num_marks is not None and num_marks > k:
            raise ValidationError(f"num_marks {num_marks} exceeds dataset K={k}", lineno)
        if k > 1 and marks is None:
            if len(times):
                raise ValidationError("marks required for a marked dataset", lineno)
            marks = np.zeros(0, dtype=np.int64)
        seq = EventSequence(times, t_max, marks, k)
        if k == 1 and marks is not None:
            try:
                validate(seq)
            except ValidationError as exc:
                raise type(exc)(str(exc), lineno) from None
            seq = EventSequence(times, t_max, None, 1)
        try:
            validate(seq)
        except ValidationError as exc:
            raise type(exc)(str(exc), lineno) from None
        sequences.append(seq)
    return Dataset(sequences, k)


def save_jsonl(data: Dataset, path) -> None:
    """Write ``data`` as JSONL. Floats use shortest round-trip repr, so reload is bit-exact."""
    lines = []
    if data.num_marks > 1 and not data.sequences:
        lines.append(json.dumps({"num_marks": data.num_marks}))
    for seq in data.sequences:
        validate(seq)
        lines.append(json.dumps(seq.to_record(), separators=(",", ":")))
    text = "".join(line + "\n" for line in lines)
    Path(path).write_text(text, encoding="utf-8")
