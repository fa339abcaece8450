"""Acceptance suite: every criterion at its stated tolerance.

Each criterion prints one ``[PASS]`` or ``[FAIL]`` line with its measured
values.  Criteria 6 and 9 are not attainable as stated; they run unchanged,
are marked ``xfail(strict=True)`` and have their measured failures pinned
below, so a change in either direction shows up.  Run this file directly
(``python tests/test_acceptance.py``) for the summary lines alone.
"""

import pytest

from ancientflow.acceptance import CRITERIA, SuiteContext, run_criterion

KNOWN_FAILURES = {
    6: "u_5(2) exceeds sqrt(2) - 1/25 by 0.039; the bound holds for a = 10 and a = 20",
    9: "with growing coupling the ratio (U_0 + U_-)/U_+ plateaus near 2e-3 instead of decaying",
}


@pytest.fixture(scope="module")
def ctx():
    return SuiteContext(seed=7)


@pytest.fixture(scope="module")
def results():
    return {}


def _params():
    for n in CRITERIA:
        marks = [pytest.mark.xfail(reason=KNOWN_FAILURES[n], strict=True)] if n in KNOWN_FAILURES else []
        yield pytest.param(n, marks=marks, id=f"criterion-{n:02d}")


@pytest.mark.parametrize("number", list(_params()))
def test_criterion(number, ctx, results, capsys):
    res = results.get(number) or results.setdefault(number, run_criterion(number, ctx))
    with capsys.disabled():
        print("\n" + res.line())
    failed = [f"{c.name}={c.measured:.6g} (needs {c.comparison} {c.tolerance:g})" for c in res.checks if not c.passed]
    assert res.passed, "; ".join(failed)


class TestKnownFailures:
    def test_shrinker_bound_fails_only_at_a5(self, ctx, results):
        res = results.get(6) or results.setdefault(6, run_criterion(6, ctx))
        failing = [c.name for c in res.checks if not c.passed]
        assert failing == ["a=5:u2_excess"]
        excess = next(c for c in res.checks if c.name == "a=5:u2_excess").measured
        assert excess == pytest.approx(0.0388, abs=5e-4)

    def test_mode_system_undecided_count(self, ctx, results):
        res = results.get(9) or results.setdefault(9, run_criterion(9, ctx))
        (check,) = res.checks
        assert check.measured == 96.0
        assert check.details == {"plus_dominant": 4, "undecided": 96}


if __name__ == "__main__":
    shared = SuiteContext(seed=7)
    for n in CRITERIA:
        print(run_criterion(n, shared).line())
