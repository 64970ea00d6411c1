"""The eight acceptance criteria at their stated tolerances.

Each criterion prints one PASS/FAIL line (also repeated in the pytest
terminal summary). Packet runs are shared with test_sim through the
session-wide verify context. Run directly with ``python3 tests/test_acceptance.py``.
"""
import pytest

from kleinstep import verify

CRITERIA = [
    verify.criterion_evanescent,
    verify.criterion_klein,
    verify.criterion_worked,
    verify.criterion_packet,
    verify.criterion_conservation,
    verify.criterion_continuity,
    verify.criterion_oracle,
    verify.criterion_pt,
]
RUNTIME_LIMITS = {1: 1.0, 2: 1.0, 3: 0.1, 8: 60.0}


@pytest.mark.parametrize("check", CRITERIA, ids=[f"c{c.criterion}_{c.check_name}" for c in CRITERIA])
def test_criterion(check, verify_ctx, acceptance_log):
    res = check(verify_ctx)
    line = res.line()
    print(line)
    acceptance_log.append(line)
    assert res.passed, line
    limit = RUNTIME_LIMITS.get(res.criterion)
    if limit is not None:
        assert res.seconds < limit, f"criterion {res.criterion} took {res.seconds:.2f}s (limit {limit}s)"


if __name__ == "__main__":
    ctx = verify.VerifyContext()
    results = [c(ctx) for c in CRITERIA]
    for r in results:
        print(r.line())
    raise SystemExit(0 if all(r.passed for r in results) else 1)
