"""Acceptance criteria at their stated tolerances, one test and one status line each."""

import pytest

from qlsing.acceptance import CRITERIA

pytestmark = pytest.mark.acceptance


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"{i:02d}_{fn.__name__.removeprefix('criterion_')}"
                                                    for i, fn in enumerate(CRITERIA, 1)])
def test_criterion(criterion, capsys):
    result = criterion()
    with capsys.disabled():
        print("\n" + result.line())
        for rec in result.records:
            if not rec.passed:
                print(f"    {rec.metric} = {rec.value!r} (tolerance {rec.tolerance}) {rec.note}")
    assert result.error is None, result.error
    assert result.passed, result.line()
