"""Random plant families and fixture loaders shared by the tests."""

from dataclasses import dataclass

import numpy as np

from fsse.scenario import load_fixture
from fsse.system_model import SystemModel

KINDS = ("block1", "block2", "mixed")


def _stable(rng, k, radius=0.95):
    M = rng.standard_normal((k, k))
    rho = max(abs(np.linalg.eigvals(M)))
    return M * (radius * rng.uniform(0.5, 1.0) / rho)


def _well_conditioned(rng, n, max_cond=20.0):
    while True:
        S = rng.standard_normal((n, n)) + 2 * np.eye(n)
        if np.linalg.cond(S) < max_cond:
            return S


@dataclass
class RandomPlant:
    model: SystemModel
    kinds: tuple  # sensor kind per sensor
    n1: int
    n2: int


def random_plant(rng, p=None, s=None, n1=None, n2=None, with_input=True, require_pair=True):
    """Two-block plant A = S diag(A1, A2) S^-1 with sensors reading block 1, block 2 or both.

    Sensors of one kind observe the same subspace, so they form a type; the
    similarity S hides the block structure from the partitioner.
    """
    p = p if p is not None else int(rng.integers(3, 9))
    s = s if s is not None else int(rng.integers(0, (p - 1) // 2 + 1))
    n1 = n1 if n1 is not None else int(rng.integers(1, 4))
    n2 = n2 if n2 is not None else int(rng.integers(1, 4))
    n = n1 + n2
    A_blk = np.zeros((n, n))
    A_blk[:n1, :n1] = _stable(rng, n1)
    A_blk[n1:, n1:] = _stable(rng, n2)
    S = _well_conditioned(rng, n)
    S_inv = np.linalg.inv(S)
    A = S @ A_blk @ S_inv
    while True:
        kinds = tuple(rng.choice(KINDS, size=p))
        if not require_pair or max(kinds.count(k) for k in KINDS) >= 2:
            break
    C = np.zeros((p, n))
    for i, kind in enumerate(kinds):
        c = rng.standard_normal(n)
        if kind == "block1":
            c[n1:] = 0.0
        elif kind == "block2":
            c[:n1] = 0.0
        C[i] = c @ S_inv
    B = rng.standard_normal((n, 1)) if with_input else np.zeros((n, 1))
    return RandomPlant(SystemModel(A, B, C, s), kinds, n1, n2)


def expected_groups(plant: RandomPlant) -> set:
    """Kind-based grouping; kinds covering the same dimension stay distinct subspaces."""
    groups = {}
    for i, k in enumerate(plant.kinds):
        groups.setdefault(k, []).append(i)
    return {frozenset(g) for g in groups.values()}


def three_inertia(s_max=2):
    doc = load_fixture("three_inertia")
    model = SystemModel(np.array(doc.A), np.array(doc.B), np.array(doc.C), s_max, doc.tau)
    return doc, model
