"""Acceptance criteria, each run at its stated size and tolerance.

Every criterion maps to one verification suite; a criterion passes when every
check in the suite passes.  One summary line per criterion is printed at the
end of the session (see ``conftest.pytest_terminal_summary``).
"""

import time

import pytest

from ramgaps.verify import run_suite

SEED = 42

CRITERIA = [
    (1, "gem-gaps", "GEM gaps are independent geometrics"),
    (2, "finite-law", "exact finite-n configuration law"),
    (3, "constructions", "chain, Yule-at-renewal and reversed tail counts agree"),
    (4, "potential", "finite potential converges to 1/(m mu_log)"),
    (5, "moments", "means of G_j, Q_j, K_j and K_0"),
    (6, "growth", "exponential growth of Q"),
    (7, "identities", "pure numeric identities"),
    (8, "yule", "Yule process constructions"),
    (9, "ignatov", "GEM renewal process is Poisson"),
    (10, "records", "record chains and reconstruction"),
]

RESULTS: dict[int, str] = {}


@pytest.mark.slow
@pytest.mark.parametrize("number,suite,title", CRITERIA, ids=[f"criterion-{c[0]}-{c[1]}" for c in CRITERIA])
def test_criterion(number, suite, title):
    start = time.perf_counter()
    result = run_suite(suite, seed=SEED)
    elapsed = time.perf_counter() - start
    failed = [c for c in result.checks if not c.passed]
    status = "PASS" if not failed else "FAIL"
    line = f"criterion {number:2d} [{status}] {title} ({len(result.checks)} checks, {elapsed:.1f}s)"
    RESULTS[number] = line
    print(line)
    for c in result.checks:
        print("   ", c.line())
    assert not failed, "\n".join(c.line() for c in failed)
