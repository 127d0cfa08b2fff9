"""Random time change: map an event sequence through a model's compensator."""

from __future__ import annotations

import numpy as np

from .core import EventSequence, TransformedSequence
from .errors import DegenerateCompensator, MarkCountMismatch

TIE_TOLERANCE = 1e-12


def time_rescale(model, seq: EventSequence, strict: bool = True) -> TransformedSequence:
    """Transform ``seq`` into a candidate unit-rate Poisson realization.

    Marked sequences are handled by concatenation in ascending mark order: an
    event of mark k lands at ``Lambda_k(t) + sum_{j<k} Lambda_j(T)``, and the
    interval end is ``sum_k Lambda_k(T)``.

    With ``strict`` (the default) two events landing within 1e-12 of each
    other, or an event landing on 0, raise :class:`DegenerateCompensator`;
    otherwise the non-strict points are returned as they are.
    """
    if model.num_marks != seq.num_marks:
        raise MarkCountMismatch(
            f"model has {model.num_marks} marks, sequence has {seq.num_marks}")
    values, totals = model.rescale(seq)
    values = np.asarray(values, dtype=np.float64)
    totals = np.asarray(totals, dtype=np.float64)
    if seq.num_marks == 1:
        points = values
        v_max = float(totals[0])
    else:
        offsets = np.concatenate(([0.0], np.cumsum(totals)[:-1]))
        marks = seq.mark_array()
        points = values + offsets[marks]
        # events are time-ordered, so a stable sort on mark gives per-mark blocks
        points = points[np.argsort(marks, kind="stable")]
        v_max = float(totals.sum())
    if strict and len(points):
        gaps = np.diff(np.concatenate(([0.0], points)))
        if np.any(gaps <= TIE_TOLERANCE):
            raise DegenerateCompensator(
                "compensator maps distinct events to the same transformed point")
    return TransformedSequence(points, v_max)
