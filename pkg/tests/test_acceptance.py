"""Acceptance gate: every criterion at its stated size and tolerance.

Each test prints one PASS/FAIL line (visible with ``-s`` or in the summary of
``pytest -v``). The same checks back ``supyao verify``.
"""

import pytest

from supyao import acceptance


def report(results):
    results = results if isinstance(results, list) else [results]
    for r in results:
        print(r.line())
    return results


@pytest.fixture(autouse=True)
def _show(capsys):
    yield
    out = capsys.readouterr().out
    with capsys.disabled():
        print()
        print(out, end="")


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    results = report(acceptance.CRITERIA[number](acceptance.SEED))
    failed = [r.line() for r in results if not r.passed]
    assert not failed, failed
