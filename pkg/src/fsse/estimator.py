"""Combinatorial search over removed-sensor sets, agreement pruning and bounds."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Dict, Optional, Sequence

import numpy as np

from .agreement import MEAN, AgreementOperators, AgreementReport, classify_window
from .categorization import Partition
from .system_model import MeasurementWindow, NoiseBounds, ObservationStack, SystemModel

logger = logging.getLogger(__name__)

FULL, PRUNED = "full", "pruned"


class ObservabilityError(RuntimeError):
    """A required sparse-observability condition does not hold."""


class ExhaustionError(RuntimeError):
    """No candidate passed the residual test."""


@dataclass(frozen=True)
class CandidateSet:
    """Ordered candidates Gamma (sorted 0-based sensor tuples) to be removed."""

    candidates: tuple
    provenance: str = FULL
    pruned_by: Dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


@dataclass(frozen=True)
class BoundConstants:
    Delta_s: float
    delta_2s: float
    M_T: Optional[float]
    m_T: Optional[float]
    eta: Optional[float]
    epsilon: float

    @property
    def kappa_fsse(self) -> float:
        """Residual scale for the pruned search: eta * Delta_s, or Delta_s without types."""
        return self.Delta_s if self.eta is None else self.eta * self.Delta_s

    @property
    def kappa_full(self) -> float:
        return self.Delta_s

    def radius(self, kappa: float, psi_bar: float) -> float:
        """Certified error radius [(kappa + 1) psi_bar + epsilon] / delta_2s."""
        if self.delta_2s <= 0.0:
            return math.inf
        return ((kappa + 1.0) * psi_bar + self.epsilon) / self.delta_2s


@dataclass(frozen=True)
class Estimate:
    x_hat: np.ndarray
    chosen_gamma: tuple
    residual: float
    candidates_evaluated: int
    bound: float
    kappa: float = 0.0
    search_size: int = 0
    fallback: bool = False


def default_epsilon(psi_bar: float) -> float:
    return 1e-9 * max(1.0, psi_bar)


def _kept(p: int, gamma: Sequence[int]) -> np.ndarray:
    removed = set(gamma)
    return np.array([i for i in range(p) if i not in removed], dtype=int)


class SearchOperators:
    """Cached per-candidate operators acting on the flattened window Y.

    For each Gamma this stores (P, R) with P = O_Gamma^+ S_Gamma and
    R = (I - O_Gamma O_Gamma^+) S_Gamma, where S_Gamma selects the kept
    sensors' rows. Building these is offline work; the full and the pruned
    search share one cache so timing comparisons stay fair.
    """

    def __init__(self, stack: ObservationStack):
        self.stack = stack
        self._cache: Dict[tuple, tuple] = {}

    def get(self, gamma: tuple):
        ops = self._cache.get(gamma)
        if ops is None:
            st = self.stack
            keep = _kept(st.p, gamma)
            O_g = st.stacked(keep)
            sv = np.linalg.svd(O_g, compute_uv=False)
            if O_g.shape[0] < st.n or sv[st.n - 1] <= st.rank_tol * sv[0]:
                raise ObservabilityError(
                    f"removing sensors {[g + 1 for g in gamma]} leaves an unobservable pair"
                )
            pinv = np.linalg.pinv(O_g)
            comp = np.eye(O_g.shape[0]) - O_g @ pinv
            select = np.zeros((O_g.shape[0], st.p * st.tau))
            rows = (keep[:, None] * st.tau + np.arange(st.tau)).reshape(-1)
            select[np.arange(rows.size), rows] = 1.0
            ops = (pinv @ select, comp @ select)
            self._cache[gamma] = ops
        return ops

    def warm(self, candidates: CandidateSet) -> "SearchOperators":
        for g in candidates:
            self.get(g)
        return self


def sparse_observability_degree(stack: ObservationStack, up_to: int) -> int:
    """Largest k <= up_to such that removing any k sensors keeps (C, A) observable.

    Returns -1 when the full sensor set is already unobservable.
    """
    if up_to >= stack.p:
        raise ValueError("up_to must be smaller than the number of sensors")
    degree = -1
    for k in range(up_to + 1):
        for gamma in combinations(range(stack.p), k):
            O_g = stack.stacked(_kept(stack.p, gamma))
            sv = np.linalg.svd(O_g, compute_uv=False)
            if O_g.shape[0] < stack.n or sv[stack.n - 1] <= stack.rank_tol * sv[0]:
                return degree
        degree = k
    return degree


def build_full_sigma(p: int, s_max: int) -> CandidateSet:
    if 2 * s_max >= p:
        raise ValueError(f"need 2*s_max < p, got s_max={s_max}, p={p}")
    return CandidateSet(tuple(combinations(range(p), s_max)), FULL)


def prune_sigma(full: CandidateSet, report: AgreementReport) -> CandidateSet:
    """Drop candidates that contradict the agreement evidence.

    A candidate is removed when it
      - misses some disagreeing star type entirely,
      - touches an agreeable star type larger than s_max,
      - splits an agreeable star type of size <= s_max,
      - or, for a diamond type, fails to contain its disagreeing members or
        touches its agreeing members.
    """
    disagree = report.star_disagreeable
    large = report.agreeable_large
    small = report.agreeable_small
    diamonds = [(v.disagreeing, v.agreeing) for v in report.diamonds]

    counts = {"disagreeable": 0, "agreeable_large": 0, "agreeable_small": 0, "diamond": 0}
    kept = []
    for gamma in full:
        g = frozenset(gamma)
        hit = False
        if any(not (g & t) for t in disagree):
            counts["disagreeable"] += 1
            hit = True
        if any(g & t for t in large):
            counts["agreeable_large"] += 1
            hit = True
        if any(g & t and not t <= g for t in small):
            counts["agreeable_small"] += 1
            hit = True
        if any(not bad <= g or (good & g) for bad, good in diamonds):
            counts["diamond"] += 1
            hit = True
        if not hit:
            kept.append(gamma)
    return CandidateSet(tuple(kept), PRUNED, counts)


class Pruner:
    """Memoized :func:`prune_sigma` for one full candidate set.

    The pruned set depends only on the verdict pattern, of which there are
    finitely many, so repeated windows reuse earlier results.
    """

    def __init__(self, full: CandidateSet):
        self.full = full
        self._memo: Dict[tuple, CandidateSet] = {}

    def __call__(self, report: AgreementReport) -> CandidateSet:
        key = report.key
        out = self._memo.get(key)
        if out is None:
            out = self._memo[key] = prune_sigma(self.full, report)
        return out


def ex_search(
    candidates: CandidateSet,
    kappa: float,
    window: MeasurementWindow,
    stack: ObservationStack,
    bounds: NoiseBounds,
    epsilon: Optional[float] = None,
    operators: Optional[SearchOperators] = None,
    delta_2s: Optional[float] = None,
) -> Estimate:
    """Return the first candidate (in order) with residual < kappa * psi_bar + epsilon."""
    if len(candidates) == 0:
        raise ValueError("empty candidate set")
    psi_bar = bounds.psi_bar
    eps = default_epsilon(psi_bar) if epsilon is None else epsilon
    threshold = kappa * psi_bar + eps
    ops = operators if operators is not None else SearchOperators(stack)
    y = window.Y.reshape(-1)
    for count, gamma in enumerate(candidates, start=1):
        estimator, residual_map = ops.get(gamma)
        r = residual_map @ y
        residual = math.sqrt(float(r @ r))
        if residual < threshold:
            if delta_2s is None or delta_2s <= 0.0:
                radius = math.inf
            else:
                radius = ((kappa + 1.0) * psi_bar + eps) / delta_2s
            return Estimate(
                x_hat=estimator @ y,
                chosen_gamma=gamma,
                residual=residual,
                candidates_evaluated=count,
                bound=radius,
                kappa=kappa,
                search_size=len(candidates),
            )
    raise ExhaustionError(
        f"window t={window.t}: none of {len(candidates)} candidates has residual below {threshold:.6g}"
    )


def compute_bound_constants(
    stack: ObservationStack,
    s_max: int,
    partition: Optional[Partition],
    epsilon: float,
    require_observable: bool = True,
) -> BoundConstants:
    """Delta_s, delta_2s and eta for the certified error radii.

    delta_2s is the smallest sigma_min(O_Gamma) over removals of exactly
    2 s_max sensors; removing fewer rows can only raise it. With
    ``require_observable`` a numerically zero delta_2s raises
    :class:`ObservabilityError`; otherwise it is reported as 0.0 and radii
    become infinite.
    """
    p, n = stack.p, stack.n
    delta_big = 0.0
    for gamma in combinations(range(p), s_max):
        O_g = stack.stacked(_kept(p, gamma))
        comp = np.eye(O_g.shape[0]) - O_g @ np.linalg.pinv(O_g, rcond=stack.rank_tol)
        delta_big = max(delta_big, float(np.linalg.norm(comp, 2)))

    scale = np.linalg.norm(stack.stacked(range(p)), 2)
    delta_small = math.inf
    worst = None
    for gamma in combinations(range(p), min(2 * s_max, p - 1)):
        O_g = stack.stacked(_kept(p, gamma))
        sv = np.linalg.svd(O_g, compute_uv=False)
        smin = float(sv[n - 1]) if O_g.shape[0] >= n else 0.0
        if smin < delta_small:
            delta_small, worst = smin, gamma
    if delta_small <= stack.rank_tol * scale:
        if require_observable:
            raise ObservabilityError(
                f"not {2 * s_max}-sparse observable: removing sensors "
                f"{[g + 1 for g in worst]} gives sigma_min = {delta_small:.3e}"
            )
        delta_small = 0.0

    M_T = partition.M_T if partition is not None else None
    m_T = partition.m_T if partition is not None else None
    eta = None
    if M_T is not None and m_T is not None:
        eta = math.sqrt(1.0 + 16.0 * M_T**2 * m_T**2)
    return BoundConstants(delta_big, delta_small, M_T, m_T, eta, float(epsilon))


def fsse(
    model: SystemModel,
    stack: ObservationStack,
    partition: Partition,
    window: MeasurementWindow,
    constants: BoundConstants,
    bounds: NoiseBounds,
    mode: str = MEAN,
    operators: Optional[SearchOperators] = None,
    full: Optional[CandidateSet] = None,
    report_out: Optional[list] = None,
    pruner: Optional[Pruner] = None,
    agreement_ops: Optional[AgreementOperators] = None,
) -> Estimate:
    """Agreement check, pruning and the pruned search for one window.

    Falls back to the full candidate set (with a warning) when pruning
    leaves nothing. When ``report_out`` is a list the agreement report is
    appended to it.
    """
    full = full if full is not None else build_full_sigma(model.p, model.s_max)
    report = classify_window(
        partition, window, model.s_max, partition.M_T, bounds.psi_bar, mode, agreement_ops
    )
    if report_out is not None:
        report_out.append(report)
    pruned = pruner(report) if pruner is not None else prune_sigma(full, report)
    fallback = False
    if len(pruned) == 0:
        logger.warning("window t=%d: pruning left no candidates; searching the full set", window.t)
        pruned, fallback = full, True
    kappa = constants.kappa_fsse
    est = ex_search(
        pruned, kappa, window, stack, bounds, constants.epsilon, operators, constants.delta_2s
    )
    if fallback:
        est = replace(est, fallback=True)
    return est
