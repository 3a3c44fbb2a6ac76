import math
from itertools import combinations

import pytest

from fsse.tables import (
    SIX_SENSOR_ROWS,
    Configuration,
    enumerate_configurations,
    method_row,
    method_table,
    pruned_candidates,
    table1,
    table_average,
)


def _brute(config, p, s):
    """Direct reading of the pruning rules on explicit sets (star types only)."""
    agree = {frozenset(g) for g in config.agreeable}
    out = []
    for gamma in combinations(range(p), s):
        g = set(gamma)
        ok = True
        for t in map(frozenset, config.groups):
            if len(t) < 2:
                continue
            if t not in agree:
                ok &= bool(g & t)
            elif len(t) > s:
                ok &= not (g & t)
            else:
                ok &= not (g & t) or t <= g
        if ok:
            out.append(gamma)
    return tuple(out)


def test_six_sensor_rows():
    sizes = [r.size for r in table1(6, 2)]
    # rows 8 and 9 keep Gamma_56 alongside the singleton pairs
    assert sizes == [3, 9, 3, 1, 4, 1, 14, 7, 9, 3, 5, 4]
    assert table_average(table1(6, 2)) == pytest.approx(63 / 12)


@pytest.mark.parametrize("config", SIX_SENSOR_ROWS, ids=lambda c: " ".join(c.label()))
def test_rows_match_brute_force(config):
    assert pruned_candidates(config, 6, 2) == _brute(config, 6, 2)


@pytest.mark.parametrize("p, s", [(5, 1), (7, 2), (8, 3)])
def test_enumerated_configurations_match_brute_force(p, s):
    configs = enumerate_configurations(p, s)
    assert configs
    for c in configs:
        assert all(len(g) <= 2 * s for g in c.groups)
        assert sorted(i for g in c.groups for i in g) == list(range(p))
        assert pruned_candidates(c, p, s) == _brute(c, p, s)


def test_all_agree_large_type_keeps_its_complement():
    c = Configuration(((0, 1, 2), (3, 4, 5)), ((0, 1, 2), (3, 4, 5)))
    assert pruned_candidates(c, 6, 2) == ()


@pytest.mark.parametrize("p, expected", [(10, 4), (12, 4), (14, 4), (16, 5), (18, 5), (20, 5)])
def test_method_table(p, expected):
    row = method_row(p)
    assert (row.two_disagree, row.one_disagree, row.all_disagree) == (4, 1, p // 2)
    assert row.all_disagree_pruned == 0
    assert row.average == row.closed_form == expected
    assert row.exhaustive == math.comb(p, 2)


def test_method_table_odd_p():
    with pytest.raises(ValueError):
        method_row(9)


def test_method_table_default():
    assert [r.p for r in method_table()] == [10, 12, 14, 16, 18, 20]
