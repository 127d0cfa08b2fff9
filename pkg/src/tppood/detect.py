"""Monte Carlo p-values, ROC AUC, and the GoF / OoD test runners."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
from dataclasses import dataclass, field
from typing import Dict, Iterable, List

import numpy as np

from .core import Dataset
from .errors import EmptyDataset, EmptyInput
from .stats import StatisticKind, compute_many


class ReferenceSource(str, enum.Enum):
    MODEL_SAMPLES = "model-samples"  # GoF test
    TRAINING_DATA = "training-data"  # OoD detection


@dataclass(frozen=True)
class ReferenceDistribution:
    """Sorted statistic values of the reference sequences (the null EDF)."""

    values: np.ndarray
    source: ReferenceSource = ReferenceSource.MODEL_SAMPLES

    def __post_init__(self):
        values = np.sort(np.asarray(self.values, dtype=np.float64).reshape(-1))
        if len(values) == 0:
            raise EmptyDataset("reference distribution needs at least one value")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "source", ReferenceSource(self.source))

    def __len__(self):
        return len(self.values)


def statistic_table(kinds: Iterable, model, data: Dataset) -> Dict[StatisticKind, np.ndarray]:
    """Values of each statistic over a dataset, one time rescaling per sequence."""
    kinds = [StatisticKind.parse(k) for k in kinds]
    data.require_nonempty()
    table = {k: np.empty(len(data)) for k in kinds}
    for i, seq in enumerate(data):
        vals = compute_many(kinds, model, seq)
        for k in kinds:
            table[k][i] = vals[k]
    return table


def statistic_values(kind, model, data: Dataset) -> np.ndarray:
    kind = StatisticKind.parse(kind)
    return statistic_table([kind], model, data)[kind]


def build_reference(kind, model, samples: Dataset,
                    source=ReferenceSource.MODEL_SAMPLES) -> ReferenceDistribution:
    """EDF of ``kind`` over ``samples``. -inf log-likelihoods are kept and sort first."""
    if len(samples) == 0:
        raise EmptyDataset("cannot build a reference from an empty dataset")
    return ReferenceDistribution(statistic_values(kind, model, samples), source)


def p_values(ref: ReferenceDistribution, scores) -> np.ndarray:
    """Vectorized :func:`p_value`."""
    scores = np.asarray(scores, dtype=np.float64)
    m = len(ref.values)
    num_above = m - np.searchsorted(ref.values, scores, side="right")
    num_below = m - num_above
    return np.minimum((num_below + 1) / (m + 1), (num_above + 1) / (m + 1))


def p_value(ref: ReferenceDistribution, s_x: float) -> float:
    """Smaller of the two +1-corrected tail fractions of ``s_x`` against the reference.

    Reference values equal to ``s_x`` count as "not above". The result lies in
    [1/(M+1), 1]; doubling it gives the two-sided p-value, which ranks identically.
    """
    return float(p_values(ref, [s_x])[0])


def two_sided(p) -> np.ndarray:
    """Doubled tail p-value, capped at 1."""
    return np.minimum(1.0, 2.0 * np.asarray(p, dtype=np.float64))


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.concatenate(([True], sorted_x[1:] != sorted_x[:-1])))
    ends = np.concatenate((starts[1:], [len(x)]))
    avg = (starts + ends + 1) / 2.0  # 1-based average rank of each run
    ranks = np.empty(len(x))
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def roc_auc(p_id, p_ood) -> float:
    """P(p_ood < p_id) + 0.5 P(p_ood == p_id): anomalies should get lower p-values."""
    p_id = np.asarray(p_id, dtype=np.float64).reshape(-1)
    p_ood = np.asarray(p_ood, dtype=np.float64).reshape(-1)
    n, m = len(p_id), len(p_ood)
    if n == 0 or m == 0:
        raise EmptyInput("roc_auc needs nonempty ID and OoD inputs")
    ranks = _average_ranks(np.concatenate((p_id, p_ood)))
    u = ranks[:n].sum() - n * (n + 1) / 2.0
    return float(u / (n * m))


@dataclass
class DetectionResult:
    """p-values of both test sets under one statistic, and their AUC."""

    statistic: StatisticKind
    auc: float
    p_id: np.ndarray
    p_ood: np.ndarray
    reference: ReferenceDistribution


def _run(kinds, model, d_ref, d_id, d_ood, source) -> Dict[StatisticKind, DetectionResult]:
    kinds = [StatisticKind.parse(k) for k in kinds]
    for d in (d_ref, d_id, d_ood):
        d.require_nonempty()
    ref_tab = statistic_table(kinds, model, d_ref)
    id_tab = statistic_table(kinds, model, d_id)
    ood_tab = statistic_table(kinds, model, d_ood)
    out = {}
    for k in kinds:
        ref = ReferenceDistribution(ref_tab[k], source)
        p_id = p_values(ref, id_tab[k])
        p_ood = p_values(ref, ood_tab[k])
        out[k] = DetectionResult(k, roc_auc(p_id, p_ood), p_id, p_ood, ref)
    return out


def run_gof_many(kinds, model, d_model, d_test_id, d_test_ood):
    return _run(kinds, model, d_model, d_test_id, d_test_ood, ReferenceSource.MODEL_SAMPLES)


def run_ood_many(kinds, fitted_model, d_train, d_test_id, d_test_ood):
    return _run(kinds, fitted_model, d_train, d_test_id, d_test_ood, ReferenceSource.TRAINING_DATA)


def run_gof(kind, model, d_model: Dataset, d_test_id: Dataset, d_test_ood: Dataset) -> DetectionResult:
    """GoF test: the null EDF comes from sequences sampled from ``model``."""
    kind = StatisticKind.parse(kind)
    return run_gof_many([kind], model, d_model, d_test_id, d_test_ood)[kind]


def run_ood(kind, fitted_model, d_train: Dataset, d_test_id: Dataset,
            d_test_ood: Dataset) -> DetectionResult:
    """OoD detection: statistic from the fitted model, null EDF from the training data."""
    kind = StatisticKind.parse(kind)
    return run_ood_many([kind], fitted_model, d_train, d_test_id, d_test_ood)[kind]


# --- reports -----------------------------------------------------------------

REPORT_HEADER = ["scenario", "delta", "statistic", "auc", "n_id", "n_ood", "seed"]


@dataclass(frozen=True)
class ReportRow:
    scenario: str
    delta: float
    statistic: str
    auc: float
    n_id: int
    n_ood: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.auc <= 1.0:
            raise ValueError(f"AUC must lie in [0, 1], got {self.auc}")

    def as_list(self):
        return [self.scenario, repr(float(self.delta)), self.statistic,
                repr(float(self.auc)), self.n_id, self.n_ood, self.seed]


@dataclass
class ExperimentReport:
    rows: List[ReportRow] = field(default_factory=list)
    metadata: Dict[str, str] = field(default_factory=dict)

    def add(self, row: ReportRow) -> None:
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for row in self.rows:
            writer.writerow(row.as_list())
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "ExperimentReport":
        report = cls()
        with open(path, encoding="utf-8", newline="") as fh:
            for rec in csv.DictReader(fh):
                report.add(ReportRow(rec["scenario"], float(rec["delta"]), rec["statistic"],
                                     float(rec["auc"]), int(rec["n_id"]), int(rec["n_ood"]),
                                     int(rec["seed"])))
        return report


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
