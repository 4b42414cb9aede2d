"""End-to-end verification: every criterion must pass at its stated
tolerance. One line per criterion is printed so a plain `pytest -s` run
doubles as the acceptance report."""

import pytest

from elastic_flow import acceptance

_RESULTS: dict = {}


def _criterion(label: str) -> acceptance.CriterionResult:
    if label not in _RESULTS:
        for name, tags, func in acceptance.CRITERIA:
            if name == label:
                result = func(seed=0)
                _RESULTS[label] = acceptance.CriterionResult(
                    name, tags, result.passed, result.detail
                )
                break
        else:
            raise KeyError(label)
    return _RESULTS[label]


@pytest.mark.parametrize("label", [name for name, _, _ in acceptance.CRITERIA])
def test_criterion(label):
    result = _criterion(label)
    print(f"[{'PASS' if result.passed else 'FAIL'}] {result.name}  {result.detail}")
    assert result.passed, f"{result.name}: {result.detail}"


def test_criterion_12_determinism():
    results = acceptance.run_acceptance(seed=0)
    final = results[-1]
    assert final.name == "12-determinism"
    print(f"[{'PASS' if final.passed else 'FAIL'}] {final.name}  {final.detail}")
    assert final.passed, final.detail
    assert all(r.passed for r in results), "full suite must be green"


def test_verify_exit_status_zero():
    status, text = acceptance.verify(seed=0)
    assert status == 0
    assert "12/12 criteria passed" in text
