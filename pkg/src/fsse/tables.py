"""Search-space size studies driven purely by type structure and agreement flags."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .agreement import report_from_labels
from .estimator import build_full_sigma, prune_sigma


@dataclass(frozen=True)
class Configuration:
    """A grouping of sensors (0-based) and the subset of groups that agree."""

    groups: Tuple[Tuple[int, ...], ...]
    agreeable: Tuple[Tuple[int, ...], ...] = ()

    def label(self) -> Tuple[str, str]:
        def fmt(g):
            return "{" + ",".join(f"S{i + 1}" for i in g) + "}"

        groups = " ".join(fmt(g) for g in self.groups)
        agree = " ".join(fmt(g) for g in self.agreeable) or "none"
        return groups, agree


@dataclass(frozen=True)
class TableRow:
    config: Configuration
    candidates: Tuple[Tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.candidates)


def _cfg(groups, agreeable=()) -> Configuration:
    shift = lambda gs: tuple(tuple(i - 1 for i in g) for g in gs)  # noqa: E731
    return Configuration(shift(groups), shift(agreeable))


# six sensors, at most two attacked; labels are 1-based here for readability
SIX_SENSOR_ROWS = (
    _cfg([(1, 2, 3), (4, 5, 6)], [(1, 2, 3)]),
    _cfg([(1, 2, 3), (4, 5, 6)]),
    _cfg([(1, 2), (3, 4), (5, 6)], [(1, 2), (3, 4), (5, 6)]),
    _cfg([(1, 2), (3, 4), (5, 6)], [(1, 2), (3, 4)]),
    _cfg([(1, 2), (3, 4), (5, 6)], [(1, 2)]),
    _cfg([(1,), (2,), (3, 4, 5, 6)], [(3, 4, 5, 6)]),
    _cfg([(1,), (2,), (3, 4, 5, 6)]),
    _cfg([(1,), (2,), (3,), (4,), (5, 6)], [(5, 6)]),
    _cfg([(1,), (2,), (3,), (4,), (5, 6)]),
    _cfg([(1,), (2,), (3, 4), (5, 6)], [(3, 4), (5, 6)]),
    _cfg([(1,), (2,), (3, 4), (5, 6)], [(3, 4)]),
    _cfg([(1,), (2,), (3, 4), (5, 6)]),
)


def pruned_candidates(config: Configuration, p: int, s: int) -> Tuple[Tuple[int, ...], ...]:
    report = report_from_labels(config.groups, s, config.agreeable)
    return prune_sigma(build_full_sigma(p, s), report).candidates


def _integer_partitions(total: int, largest: int):
    if total == 0:
        yield ()
        return
    for k in range(min(total, largest), 0, -1):
        for rest in _integer_partitions(total - k, k):
            yield (k,) + rest


def enumerate_configurations(p: int, s: int) -> List[Configuration]:
    """Consecutive groupings without diamond types, every agreeable subset of star types.

    Group sizes run over the integer partitions of p with parts at most 2s,
    listed largest first and filled with sensors in index order.
    """
    configs = []
    for sizes in _integer_partitions(p, 2 * s):
        groups, start = [], 0
        for k in sizes:
            groups.append(tuple(range(start, start + k)))
            start += k
        stars = [g for g in groups if len(g) > 1]
        if not stars:
            continue
        for mask in range(2 ** len(stars) - 1, -1, -1):
            agree = tuple(g for b, g in enumerate(stars) if mask >> b & 1)
            configs.append(Configuration(tuple(groups), agree))
    return configs


def table1(p: int = 6, s: int = 2, configs: Optional[Sequence[Configuration]] = None) -> List[TableRow]:
    """|Sigma_T| for each configuration; defaults to the twelve six-sensor rows."""
    if configs is None:
        configs = SIX_SENSOR_ROWS if (p, s) == (6, 2) else enumerate_configurations(p, s)
    return [TableRow(c, pruned_candidates(c, p, s)) for c in configs]


def table_average(rows: Sequence[TableRow]) -> float:
    return sum(r.size for r in rows) / len(rows)


@dataclass(frozen=True)
class MethodRow:
    p: int
    exhaustive: int
    two_disagree: int
    one_disagree: int
    all_disagree: int
    all_disagree_pruned: int

    @property
    def average(self) -> int:
        """Ceiling of the mean over the three cases."""
        return math.ceil((self.two_disagree + self.one_disagree + self.all_disagree) / 3)

    @property
    def closed_form(self) -> int:
        return math.ceil((10 + self.p) / 6)


def method_row(p: int, s: int = 2) -> MethodRow:
    """Pairwise types {S1,S2}, {S3,S4}, ...; three agreement cases.

    With two or one disagreeing pair the size comes from pruning. When every
    pair disagrees no s-subset meets all of them, so pruning leaves nothing;
    the search then visits one candidate per pair (p/2), and the pruned
    count is reported alongside.
    """
    if p % 2:
        raise ValueError("pairwise types need an even number of sensors")
    groups = tuple((i, i + 1) for i in range(0, p, 2))

    def size(n_bad: int) -> int:
        agree = groups[n_bad:]
        return len(pruned_candidates(Configuration(groups, agree), p, s))

    return MethodRow(
        p=p,
        exhaustive=math.comb(p, s),
        two_disagree=size(2),
        one_disagree=size(1),
        all_disagree=p // 2,
        all_disagree_pruned=size(len(groups)),
    )


def method_table(p_list: Sequence[int] = (10, 12, 14, 16, 18, 20), s: int = 2) -> List[MethodRow]:
    return [method_row(p, s) for p in p_list]
