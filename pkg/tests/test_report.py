import math

import pytest

from dbnabs import ValidationError, compare

REFERENCE_AKLP_OPS = [2.9e7, 3.1e17, 1.0e30, 1.1e45, 3.7e62, 3.7e82, 1.1e105, 9.5e129]


def test_table_has_every_row():
    text = compare(dims=[1, 2]).table()
    lines = text.splitlines()
    assert len(lines) == 7
    assert lines[0].split()[-2:] == ["1", "2"]
    assert len({len(line) for line in lines}) == 1


def test_per_step_convention_is_default():
    row = compare(dims=[3]).rows[0]
    m = row.aklp.bins_per_dim
    assert row.aklp.operations == pytest.approx(2 * 10 * float(m) ** 6, rel=1e-12)


def test_table_convention_reproduces_reference_chain_costs():
    # counting the n - 1 multiplies that build each joint transition entry
    # lands every reference value at two significant figures
    rows = compare(aklp_convention="table").rows
    for r, reference in zip(rows, REFERENCE_AKLP_OPS):
        exp = math.floor(math.log10(reference))
        assert abs(r.aklp.operations - reference) <= 0.05 * 10**exp


def test_bounds_meet_budget():
    for r in compare(dims=range(1, 5)).rows:
        assert r.dbn.bound <= 0.2
        assert r.aklp.bound <= 0.2


def test_unknown_family():
    with pytest.raises(ValidationError):
        compare(family="ring")
