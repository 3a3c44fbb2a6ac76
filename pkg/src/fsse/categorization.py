"""Offline partitioning of sensors into analytic types.

Two sensors i, j share a type when some nonsingular T_ij gives
T_ij O_j = O_i. Sensors are first grouped by rank of O_i, then each rank
group is refined with :func:`check_equivalence`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .system_model import DEFAULT_RANK_TOL, ObservationStack, numerical_rank

logger = logging.getLogger(__name__)

DEFAULT_EQUIV_TOL = 1e-8
DEFAULT_SINGULARITY_TOL = 1e-10


class SingularCompletion(ArithmeticError):
    """The completed transform came out numerically singular."""


def _completion(O_i: np.ndarray, O_j: np.ndarray, r: int, rank_tol: float) -> np.ndarray:
    # Orthogonal row compressions: U_i^T O_i = [O_i^1; 0] with O_i^1 of full row rank r.
    U_i = np.linalg.svd(O_i)[0]
    U_j = np.linalg.svd(O_j)[0]
    top_i = U_i[:, :r].T @ O_i
    top_j = U_j[:, :r].T @ O_j
    lam = top_i @ np.linalg.pinv(top_j, rcond=rank_tol)
    tau = O_i.shape[0]
    core = np.eye(tau)
    core[:r, :r] = lam
    # T_ij = U_i diag(Lambda, I) U_j^T; the identity fills the free lower block
    return U_i @ core @ U_j.T


def check_equivalence(
    O_i: np.ndarray,
    O_j: np.ndarray,
    equiv_tol: float = DEFAULT_EQUIV_TOL,
    rank_tol: float = DEFAULT_RANK_TOL,
    singularity_tol: float = DEFAULT_SINGULARITY_TOL,
) -> Optional[np.ndarray]:
    """Return a nonsingular T with T @ O_j ~= O_i, or None.

    Acceptance uses the least-squares residual of T' = O_i O_j^+:
    ||T' O_j - O_i||_2 <= equiv_tol * max(1, ||O_i||_2). The returned matrix
    is the nonsingular completion of T', so it also satisfies the residual
    test.
    """
    O_i = np.asarray(O_i, dtype=float)
    O_j = np.asarray(O_j, dtype=float)
    if O_i.shape != O_j.shape:
        raise ValueError(f"shape mismatch {O_i.shape} vs {O_j.shape}")
    r = numerical_rank(O_i, rank_tol)
    if r != numerical_rank(O_j, rank_tol):
        return None
    tau = O_i.shape[0]
    scale = max(1.0, np.linalg.norm(O_i, 2))
    if r == 0:
        return np.eye(tau)

    T_ls = O_i @ np.linalg.pinv(O_j, rcond=rank_tol)
    if np.linalg.norm(T_ls @ O_j - O_i, 2) > equiv_tol * scale:
        return None

    T = _completion(O_i, O_j, r, rank_tol)
    sv = np.linalg.svd(T, compute_uv=False)
    if sv[-1] <= singularity_tol * sv[0]:
        raise SingularCompletion(f"completed transform has sigma_min/sigma_max = {sv[-1] / sv[0]:.3e}")
    if np.linalg.norm(T @ O_j - O_i, 2) > equiv_tol * scale:
        return None
    return T


def ep_solve(members: Iterable[int], relation: Callable[[int, int], bool]) -> List[List[int]]:
    """Extract equivalence classes one at a time.

    The lowest remaining index becomes the class representative and every
    other remaining member is tested against it only.
    """
    remaining = sorted(members)
    classes = []
    while remaining:
        rep = remaining[0]
        cls = [rep]
        for j in remaining[1:]:
            if relation(rep, j):
                cls.append(j)
        classes.append(cls)
        taken = set(cls)
        remaining = [j for j in remaining if j not in taken]
    return classes


@dataclass(frozen=True)
class SensorType:
    representative: int
    members: tuple
    transforms: Dict[int, np.ndarray]
    rank: int

    def __len__(self) -> int:
        return len(self.members)

    @property
    def member_set(self) -> frozenset:
        return frozenset(self.members)


@dataclass(frozen=True)
class Partition:
    """Analytic sensor types plus the transform norm constants.

    ``M_T`` is the largest ||T_ij||_2 (member to representative) and ``m_T``
    the smallest ||T_ji||_2 (representative to member) over non-singleton
    types. Both are None when every type is a singleton.
    """

    types: tuple
    M_T: Optional[float]
    m_T: Optional[float]
    p: int = field(default=0)

    def type_of(self, sensor: int) -> SensorType:
        for t in self.types:
            if sensor in t.members:
                return t
        raise KeyError(sensor)

    @property
    def non_singleton(self) -> tuple:
        return tuple(t for t in self.types if len(t) > 1)

    @cached_property
    def stacked_transforms(self) -> Dict[int, tuple]:
        """representative -> ((k, tau, tau) transforms, member index array)."""
        return {
            t.representative: (
                np.stack([t.transforms[j] for j in t.members]),
                np.array(t.members),
            )
            for t in self.non_singleton
        }

    def as_sets(self) -> set:
        return {frozenset(t.members) for t in self.types}

    def to_dict(self) -> dict:
        """Serializable form with 1-based sensor labels."""
        return {
            "p": self.p,
            "M_T": self.M_T,
            "m_T": self.m_T,
            "types": [
                {
                    "representative": t.representative + 1,
                    "members": [j + 1 for j in t.members],
                    "rank": t.rank,
                    "transforms": {str(j + 1): T.tolist() for j, T in t.transforms.items()},
                }
                for t in self.types
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Partition":
        types = []
        for entry in doc["types"]:
            transforms = {
                int(k) - 1: np.array(v, dtype=float) for k, v in entry["transforms"].items()
            }
            types.append(
                SensorType(
                    representative=int(entry["representative"]) - 1,
                    members=tuple(int(j) - 1 for j in entry["members"]),
                    transforms=transforms,
                    rank=int(entry["rank"]),
                )
            )
        return cls(tuple(types), doc.get("M_T"), doc.get("m_T"), int(doc.get("p", 0)))


def partition_from_groups(groups: Sequence[Sequence[int]], p: Optional[int] = None) -> Partition:
    """Partition with identity transforms, for pruning studies that need no matrices."""
    types = tuple(
        SensorType(min(g), tuple(sorted(g)), {j: np.eye(1) for j in g}, 0) for g in groups
    )
    has_pairs = any(len(g) > 1 for g in groups)
    total = p if p is not None else sum(len(g) for g in groups)
    return Partition(types, 1.0 if has_pairs else None, 1.0 if has_pairs else None, total)


def de_partition(
    stack: ObservationStack,
    equiv_tol: float = DEFAULT_EQUIV_TOL,
    singularity_tol: float = DEFAULT_SINGULARITY_TOL,
) -> Partition:
    """Double-equivalence partitioning of all p sensors."""
    p = stack.p
    ranks = stack.ranks
    rank_classes = ep_solve(range(p), lambda i, j: ranks[i] == ranks[j])

    witnesses: Dict[tuple, np.ndarray] = {}

    def related(i: int, j: int) -> bool:
        try:
            T = check_equivalence(
                stack.O[i], stack.O[j], equiv_tol, stack.rank_tol, singularity_tol
            )
        except SingularCompletion as exc:
            logger.warning("sensors %d and %d: %s; treating as not equivalent", i + 1, j + 1, exc)
            return False
        if T is None:
            return False
        witnesses[(i, j)] = T
        return True

    classes = []
    for block in rank_classes:
        classes.extend(ep_solve(block, related))
    classes.sort(key=lambda c: c[0])

    types = []
    fwd_norms, back_norms = [], []
    for cls in classes:
        rep = cls[0]
        tau = stack.tau
        transforms = {rep: np.eye(tau)}
        for j in cls[1:]:
            transforms[j] = witnesses[(rep, j)]
        for T in transforms.values():
            T.setflags(write=False)
        types.append(SensorType(rep, tuple(cls), transforms, ranks[rep]))
        if len(cls) > 1:
            for j, T in transforms.items():
                fwd_norms.append(np.linalg.norm(T, 2))
                back_norms.append(np.linalg.norm(np.linalg.inv(T), 2))

    M_T = float(max(fwd_norms)) if fwd_norms else None
    m_T = float(min(back_norms)) if back_norms else None
    return Partition(tuple(types), M_T, m_T, p)
