"""Online measurement agreement of sensor types.

Each member's window is mapped into its representative's coordinates,
Yhat_j = T_ij Y_j. An attack-free type then reports nearly identical
vectors, so disagreement localizes attacks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .categorization import Partition, SensorType
from .system_model import MeasurementWindow

TRIVIAL, STAR, DIAMOND = "trivial", "star", "diamond"
MEAN, MEDIAN = "mean", "median"


@dataclass(frozen=True)
class TransformedWindow:
    """Transformed member windows keyed by type representative.

    ``values[rep]`` is a (k, tau) array in the order of the type's members.
    """

    values: Dict[int, np.ndarray]

    def median(self, rep: int) -> np.ndarray:
        return vector_median(self.values[rep])

    def mean(self, rep: int) -> np.ndarray:
        return self.values[rep].mean(axis=0)


@dataclass(frozen=True)
class TypeVerdict:
    members: tuple
    label: str
    agreeable: Optional[bool] = None
    disagreeing: frozenset = frozenset()

    @property
    def representative(self) -> int:
        return self.members[0]

    @property
    def agreeing(self) -> frozenset:
        return frozenset(self.members) - self.disagreeing


@dataclass(frozen=True)
class AgreementReport:
    """Per-type verdicts for one window.

    Trivial types carry no verdict. Star types carry ``agreeable``; diamond
    types carry the disagreeing member split.
    """

    verdicts: tuple
    s_max: int

    @cached_property
    def key(self) -> tuple:
        """Hashable verdict pattern; equal keys prune identically."""
        return tuple((v.members, v.agreeable, v.disagreeing) for v in self.verdicts)

    def _stars(self, agreeable: bool) -> List[frozenset]:
        return [
            frozenset(v.members)
            for v in self.verdicts
            if v.label == STAR and v.agreeable is agreeable
        ]

    @property
    def star_agreeable(self) -> List[frozenset]:
        return self._stars(True)

    @property
    def star_disagreeable(self) -> List[frozenset]:
        return self._stars(False)

    @property
    def agreeable_large(self) -> List[frozenset]:
        """Agreeable star types with more than s_max members."""
        return [t for t in self.star_agreeable if len(t) > self.s_max]

    @property
    def agreeable_small(self) -> List[frozenset]:
        """Agreeable star types with at most s_max members."""
        return [t for t in self.star_agreeable if len(t) <= self.s_max]

    @property
    def diamonds(self) -> List[TypeVerdict]:
        return [v for v in self.verdicts if v.label == DIAMOND]

    def csv_rows(self, t: int) -> List[list]:
        """Rows of (t, representative, class, agreeable, |disagreeing|), 1-based labels."""
        rows = []
        for v in self.verdicts:
            if v.label == TRIVIAL:
                agree = ""
            elif v.label == DIAMOND:
                agree = int(not v.disagreeing)
            else:
                agree = int(bool(v.agreeable))
            rows.append([t, v.representative + 1, v.label, agree, len(v.disagreeing)])
        return rows


def type_label(size: int, s_max: int) -> str:
    if size <= 1:
        return TRIVIAL
    if size < 2 * s_max + 1:
        return STAR
    return DIAMOND


@dataclass(frozen=True)
class AgreementOperators:
    """Offline linear maps from the flattened window to agreement quantities.

    Rows are grouped by non-singleton type, members in type order.
    ``transform`` yields every T_ij Y_j; ``centered`` yields T_ij Y_j minus
    its type's mean. ``slices[rep]`` locates a type's members.
    """

    transform: np.ndarray  # (K*tau, p*tau)
    centered: np.ndarray  # (K*tau, p*tau)
    slices: Dict[int, slice]
    tau: int
    _reports: Dict[tuple, AgreementReport] = field(default_factory=dict, compare=False, repr=False)

    @cached_property
    def _starts(self) -> np.ndarray:
        return np.array([sl.start for sl in self.slices.values()], dtype=int)

    @classmethod
    def build(cls, partition: Partition, tau: int) -> "AgreementOperators":
        p = partition.p
        blocks, centered, slices = [], [], {}
        row = 0
        for t in partition.non_singleton:
            k = len(t)
            block = np.zeros((k * tau, p * tau))
            for a, j in enumerate(t.members):
                block[a * tau:(a + 1) * tau, j * tau:(j + 1) * tau] = t.transforms[j]
            mean = block.reshape(k, tau, p * tau).mean(axis=0)
            blocks.append(block)
            centered.append(block - np.tile(mean, (k, 1)))
            slices[t.representative] = slice(row, row + k)
            row += k
        width = p * tau
        transform = np.vstack(blocks) if blocks else np.zeros((0, width))
        centered_map = np.vstack(centered) if centered else np.zeros((0, width))
        return cls(transform, centered_map, slices, tau)

    def transformed(self, window: MeasurementWindow) -> TransformedWindow:
        vals = (self.transform @ window.Y.reshape(-1)).reshape(-1, self.tau)
        return TransformedWindow({rep: vals[sl] for rep, sl in self.slices.items()})

    def mean_deviations(self, window: MeasurementWindow) -> np.ndarray:
        """||T_ij Y_j - type mean||_2 for every member, in row order."""
        d = (self.centered @ window.Y.reshape(-1)).reshape(-1, self.tau)
        return np.sqrt((d * d).sum(axis=1))

    def type_max_deviations(self, window: MeasurementWindow) -> np.ndarray:
        """Largest member deviation from the type mean, per non-singleton type."""
        dev = self.mean_deviations(window)
        if dev.size == 0:
            return dev
        return np.maximum.reduceat(dev, self._starts)


def transform_windows(
    partition: Partition,
    window: MeasurementWindow,
    ops: Optional[AgreementOperators] = None,
) -> TransformedWindow:
    if ops is not None:
        return ops.transformed(window)
    values = {}
    for t in partition.non_singleton:
        # T_ij Y_j for every member, batched: (k, tau, tau) @ (k, tau)
        Ts, idx = partition.stacked_transforms[t.representative]
        values[t.representative] = np.einsum("kab,kb->ka", Ts, window.Y[idx])
    return TransformedWindow(values)


def vector_median(values) -> np.ndarray:
    """Elementwise median of k vectors; even k averages the two middle values."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape[0] == 0:
        raise ValueError("vector_median of an empty collection")
    return np.median(arr, axis=0)


def _deviations(values: np.ndarray, center: np.ndarray) -> np.ndarray:
    return np.linalg.norm(values - center, axis=1)


def check_median_agreement(
    stype: SensorType, transformed: TransformedWindow, M_T: float, psi_bar: float
):
    """Return (agreeable, disagreeing members) against the vector median.

    Member j disagrees when ||Yhat_j - median||_2 > 2 M_T psi_bar.
    """
    vals = transformed.values[stype.representative]
    dev = _deviations(vals, vector_median(vals))
    bad = frozenset(j for j, d in zip(stype.members, dev) if d > 2.0 * M_T * psi_bar)
    return not bad, bad


def check_mean_agreement(
    stype: SensorType, transformed: TransformedWindow, M_T: float, psi_bar: float
) -> bool:
    vals = transformed.values[stype.representative]
    dev = _deviations(vals, vals.mean(axis=0))
    return bool(np.all(dev <= (1.0 + M_T) * psi_bar))


def classify(
    partition: Partition,
    transformed: TransformedWindow,
    s_max: int,
    M_T: Optional[float],
    psi_bar: float,
    mode: str = MEAN,
) -> AgreementReport:
    """Label every type and run the agreement check that applies to it.

    Diamond types always use the median split; star types use ``mode``.
    """
    if mode not in (MEAN, MEDIAN):
        raise ValueError(f"unknown agreement mode {mode!r}")
    verdicts = []
    for t in partition.types:
        label = type_label(len(t), s_max)
        if label == TRIVIAL:
            verdicts.append(TypeVerdict(t.members, label))
        elif label == DIAMOND:
            _, bad = check_median_agreement(t, transformed, M_T, psi_bar)
            verdicts.append(TypeVerdict(t.members, label, not bad, bad))
        elif mode == MEDIAN:
            ok, _ = check_median_agreement(t, transformed, M_T, psi_bar)
            verdicts.append(TypeVerdict(t.members, label, ok))
        else:
            ok = check_mean_agreement(t, transformed, M_T, psi_bar)
            verdicts.append(TypeVerdict(t.members, label, ok))
    return AgreementReport(tuple(verdicts), s_max)


def classify_window(
    partition: Partition,
    window: MeasurementWindow,
    s_max: int,
    M_T: Optional[float],
    psi_bar: float,
    mode: str = MEAN,
    ops: Optional[AgreementOperators] = None,
) -> AgreementReport:
    """:func:`classify` straight from a window, using precomputed maps if given.

    With ``ops`` the mean check needs a single matrix-vector product; the
    transformed vectors are only formed when a median check is required.
    """
    if ops is None:
        return classify(partition, transform_windows(partition, window), s_max, M_T, psi_bar, mode)
    if mode not in (MEAN, MEDIAN):
        raise ValueError(f"unknown agreement mode {mode!r}")
    if mode == MEAN and all(len(t) < 2 * s_max + 1 for t in partition.types):
        # only trivial and star types: the report is a function of one flag per type
        limit = (1.0 + M_T) * psi_bar if M_T is not None else 0.0
        flags = ops.type_max_deviations(window) <= limit
        key = (s_max, flags.tobytes())
        report = ops._reports.get(key)
        if report is None:
            ok = dict(zip(ops.slices, flags.tolist()))
            report = AgreementReport(
                tuple(
                    TypeVerdict(t.members, type_label(len(t), s_max), ok.get(t.representative))
                    for t in partition.types
                ),
                s_max,
            )
            ops._reports[key] = report
        return report
    dev = ops.mean_deviations(window) if mode == MEAN else None
    mean_limit = (1.0 + M_T) * psi_bar if M_T is not None else 0.0
    transformed = None
    verdicts = []
    for t in partition.types:
        label = type_label(len(t), s_max)
        if label == TRIVIAL:
            verdicts.append(TypeVerdict(t.members, label))
        elif label == STAR and mode == MEAN:
            ok = bool(dev[ops.slices[t.representative]].max() <= mean_limit)
            verdicts.append(TypeVerdict(t.members, label, ok))
        else:
            if transformed is None:
                transformed = ops.transformed(window)
            ok, bad = check_median_agreement(t, transformed, M_T, psi_bar)
            if label == DIAMOND:
                verdicts.append(TypeVerdict(t.members, label, ok, bad))
            else:
                verdicts.append(TypeVerdict(t.members, label, ok))
    return AgreementReport(tuple(verdicts), s_max)


def report_from_labels(
    groups: Sequence[Sequence[int]],
    s_max: int,
    agreeable: Iterable[Sequence[int]] = (),
    disagreeing: Optional[Dict[int, Iterable[int]]] = None,
) -> AgreementReport:
    """Build a report directly from a grouping and the set of agreeable types.

    ``disagreeing`` maps a diamond type's representative to its disagreeing
    members. Used for search-space studies where no measurements exist.
    """
    ok = {frozenset(g) for g in agreeable}
    disagreeing = disagreeing or {}
    verdicts = []
    for g in groups:
        members = tuple(sorted(g))
        label = type_label(len(members), s_max)
        if label == TRIVIAL:
            verdicts.append(TypeVerdict(members, label))
        elif label == DIAMOND:
            bad = frozenset(disagreeing.get(members[0], ()))
            verdicts.append(TypeVerdict(members, label, not bad, bad))
        else:
            verdicts.append(TypeVerdict(members, label, frozenset(members) in ok))
    return AgreementReport(tuple(verdicts), s_max)
