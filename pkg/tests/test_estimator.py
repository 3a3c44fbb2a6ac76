import itertools
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsse.agreement import report_from_labels
from fsse.categorization import de_partition
from fsse.estimator import (
    BoundConstants,
    CandidateSet,
    ExhaustionError,
    ObservabilityError,
    Pruner,
    SearchOperators,
    build_full_sigma,
    compute_bound_constants,
    ex_search,
    fsse,
    prune_sigma,
    sparse_observability_degree,
)
from fsse.system_model import (
    MeasurementWindow,
    SystemModel,
    build_observation_stack,
    compute_noise_bounds,
)

from systems import random_plant, three_inertia


def _labels(cands):
    return {"".join(str(i + 1) for i in g) for g in cands}


@pytest.mark.parametrize("p, s", [(6, 2), (5, 1), (3, 0), (10, 2)])
def test_full_sigma(p, s):
    full = build_full_sigma(p, s)
    assert len(full) == math.comb(p, s)
    assert list(full) == sorted(full)
    assert all(len(g) == s for g in full)


def test_full_sigma_rejects_large_s():
    with pytest.raises(ValueError):
        build_full_sigma(4, 2)


# three-inertia types {S1,S3}, {S2}, {S4,S6}, {S5}; s = 2
GROUPS = [(0, 2), (1,), (3, 5), (4,)]


@pytest.mark.parametrize("agreeable, expected", [
    ([(0, 2), (3, 5)], {"13", "25", "46"}),
    ([(0, 2)], {"24", "26", "45", "46", "56"}),
    ([(3, 5)], {"12", "13", "15", "23", "35"}),
    ([], {"14", "16", "34", "36"}),
])
def test_three_inertia_search_spaces(agreeable, expected):
    pruned = prune_sigma(build_full_sigma(6, 2), report_from_labels(GROUPS, 2, agreeable))
    assert _labels(pruned) == expected


def test_pruning_rules_individually():
    full = build_full_sigma(6, 2)
    # disagreeing star type: every candidate must touch it
    out = prune_sigma(full, report_from_labels([(0, 1), (2,), (3,), (4,), (5,)], 2))
    assert all(set(g) & {0, 1} for g in out)
    assert out.pruned_by["disagreeable"] == math.comb(4, 2)
    # agreeing type larger than s: untouched
    out = prune_sigma(full, report_from_labels([(0, 1, 2), (3,), (4,), (5,)], 2, [(0, 1, 2)]))
    assert _labels(out) == {"45", "46", "56"}
    # agreeing type of size <= s: whole or nothing
    out = prune_sigma(full, report_from_labels([(0, 1), (2,), (3,), (4,), (5,)], 2, [(0, 1)]))
    assert "12" in _labels(out) and "13" not in _labels(out)
    # diamond: contain the disagreeing members, avoid the agreeing ones
    rep = report_from_labels([(0, 1, 2, 3, 4), (5,)], 2, disagreeing={0: {1}})
    assert _labels(prune_sigma(full, rep)) == {"26"}


def test_pruner_memoizes():
    full = build_full_sigma(6, 2)
    pr = Pruner(full)
    rep = report_from_labels(GROUPS, 2, [(0, 2)])
    first = pr(rep)
    assert pr(report_from_labels(GROUPS, 2, [(0, 2)])) is first
    assert first.candidates == prune_sigma(full, rep).candidates


def _exact_window(model, stack, x, attack=None):
    Y = np.einsum("ptn,n->pt", stack.O, x)
    if attack is not None:
        Y = Y + attack
    return MeasurementWindow(model.tau - 1, Y, np.zeros(0), Y)


def _observable_plant(seed, p=6, s=1):
    rng = np.random.default_rng(seed)
    while True:
        model = SystemModel(
            rng.standard_normal((3, 3)) * 0.5, np.zeros((3, 1)), rng.standard_normal((p, 3)), s
        )
        stack = build_observation_stack(model)
        if sparse_observability_degree(stack, 2 * s) == 2 * s:
            return rng, model, stack


@pytest.mark.parametrize("seed", range(4))
def test_ex_search_recovers_state_noise_free(seed):
    rng, model, stack = _observable_plant(seed)
    bounds = compute_noise_bounds(model, stack, 0.0, 0.0)
    x = rng.standard_normal(model.n)
    attack = np.zeros((model.p, model.tau))
    attack[2] = rng.uniform(1, 5, size=model.tau)
    est = ex_search(build_full_sigma(model.p, 1), 1.0, _exact_window(model, stack, x, attack), stack, bounds)
    assert est.chosen_gamma == (2,)
    np.testing.assert_allclose(est.x_hat, x, atol=1e-8)
    assert est.candidates_evaluated == 3 and est.search_size == model.p


def test_ex_search_exhaustion_and_empty():
    rng, model, stack = _observable_plant(0)
    bounds = compute_noise_bounds(model, stack, 0.0, 0.0)
    attack = rng.uniform(1, 5, size=(model.p, model.tau))
    win = _exact_window(model, stack, rng.standard_normal(model.n), attack)
    with pytest.raises(ExhaustionError):
        ex_search(build_full_sigma(model.p, 1), 1.0, win, stack, bounds)
    with pytest.raises(ValueError):
        ex_search(CandidateSet(()), 1.0, win, stack, bounds)


def test_search_operators_reject_unobservable_candidate():
    C = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    ops = SearchOperators(build_observation_stack(SystemModel(np.eye(2), np.zeros((2, 1)), C, 1)))
    ops.get((0,))
    with pytest.raises(ObservabilityError):
        ops.get((2,))  # only first-coordinate sensors remain


@pytest.mark.parametrize("copies", [1, 2, 3])
def test_sparse_observability_of_repeated_identity(copies):
    A = np.diag(np.ones(3), 1)
    C = np.vstack([np.eye(4)] * copies)
    stack = build_observation_stack(SystemModel(A, np.zeros((4, 1)), C, 0))
    assert sparse_observability_degree(stack, min(3, 4 * copies - 1)) == copies - 1


def test_sparse_observability_unobservable_pair():
    stack = build_observation_stack(SystemModel(np.eye(2), np.zeros((2, 1)), np.array([[1.0, 0.0]]), 0))
    assert sparse_observability_degree(stack, 0) == -1


def _constants_oracle(stack, s):
    """Projector norms via QR bases; sigma_min over every removal of at most 2s sensors."""
    p, n = stack.p, stack.n
    big = 0.0
    for gamma in itertools.combinations(range(p), s):
        keep = [i for i in range(p) if i not in gamma]
        O_g = np.vstack([stack.O[i] for i in keep])
        Q, R = np.linalg.qr(O_g)
        rank = int(np.sum(np.abs(np.diag(R)) > 1e-10 * np.abs(R).max()))
        proj = np.eye(O_g.shape[0]) - Q[:, :rank] @ Q[:, :rank].T
        big = max(big, np.linalg.svd(proj, compute_uv=False)[0])
    small = math.inf
    for k in range(2 * s + 1):
        for gamma in itertools.combinations(range(p), k):
            keep = [i for i in range(p) if i not in gamma]
            O_g = np.vstack([stack.O[i] for i in keep])
            small = min(small, np.linalg.svd(O_g, compute_uv=False)[n - 1])
    return big, small


@pytest.mark.parametrize("seed", range(3))
def test_bound_constants_match_enumeration(seed):
    _, model, stack = _observable_plant(seed)
    P = de_partition(stack)
    c = compute_bound_constants(stack, 1, P, 1e-9)
    big, small = _constants_oracle(stack, 1)
    assert c.Delta_s == pytest.approx(big, rel=1e-9)
    assert c.delta_2s == pytest.approx(small, rel=1e-9)


def test_three_inertia_constants():
    _, model = three_inertia()
    stack = build_observation_stack(model)
    P = de_partition(stack)
    with pytest.raises(ObservabilityError):
        compute_bound_constants(stack, 2, P, 1e-9)
    c = compute_bound_constants(stack, 2, P, 1e-9, require_observable=False)
    assert c.delta_2s == 0.0 and math.isinf(c.radius(c.kappa_fsse, 0.1))
    assert c.Delta_s == pytest.approx(1.0)
    assert c.eta == pytest.approx(math.sqrt(1 + 16 * P.M_T**2 * P.m_T**2))
    c1 = compute_bound_constants(stack, 1, P, 1e-9)
    assert c1.delta_2s == pytest.approx(0.0772, abs=5e-4)


def test_radius_and_kappa():
    c = BoundConstants(Delta_s=1.0, delta_2s=0.5, M_T=2.0, m_T=1.0, eta=3.0, epsilon=0.0)
    assert c.kappa_fsse == 3.0 and c.kappa_full == 1.0
    assert c.radius(3.0, 0.1) == pytest.approx(0.8)
    assert BoundConstants(1.0, 0.5, None, None, None, 0.0).kappa_fsse == 1.0


def test_fsse_falls_back_when_pruning_empties(caplog):
    """Every pair type disagreeing leaves no 2-subset touching all three."""
    _, model = three_inertia()
    stack = build_observation_stack(model)
    P = de_partition(stack)
    bounds = compute_noise_bounds(model, stack, 0.0, 0.0)
    consts = compute_bound_constants(stack, 2, P, 1e-9, require_observable=False)
    x = np.ones(model.n)
    attack = np.zeros((6, 6))
    attack[0] = 3.0  # S1 against S3
    attack[3] = -2.0  # S4 against S6
    win = _exact_window(model, stack, x, attack)
    est = fsse(model, stack, P, win, consts, bounds)
    assert not est.fallback and est.chosen_gamma == (0, 3)
    np.testing.assert_allclose(est.x_hat, x, atol=1e-8)

    from fsse.agreement import AgreementReport, TypeVerdict, STAR

    class AllBad:
        def __call__(self, report):
            bad = AgreementReport(
                tuple(TypeVerdict(g, STAR, False) for g in [(0, 1), (2, 3), (4, 5)]), 2
            )
            return prune_sigma(build_full_sigma(6, 2), bad)

    with caplog.at_level(logging.WARNING, logger="fsse.estimator"):
        est = fsse(model, stack, P, win, consts, bounds, pruner=AllBad())
    assert est.fallback and est.search_size == 15
    assert "full set" in caplog.text


@settings(max_examples=30)
@given(seed=st.integers(0, 2**31 - 1))
def test_noise_free_support_is_a_zero_residual_candidate(seed):
    """With exact data the true support always has residual 0 and survives pruning."""
    rng = np.random.default_rng(seed)
    plant = random_plant(rng, p=int(rng.integers(4, 8)), s=1)
    model = plant.model
    stack = build_observation_stack(model)
    P = de_partition(stack)
    if P.M_T is None:
        return
    bounds = compute_noise_bounds(model, stack, 0.0, 1e-6)
    j = int(rng.integers(model.p))
    attack = np.zeros((model.p, model.tau))
    attack[j] = rng.uniform(5, 10, size=model.tau) * rng.choice([-1, 1])
    win = _exact_window(model, stack, rng.standard_normal(model.n), attack)
    from fsse.agreement import classify_window

    rep = classify_window(P, win, 1, P.M_T, bounds.psi_bar)
    assert (j,) in prune_sigma(build_full_sigma(model.p, 1), rep).candidates
