import pytest

from kleinstep import verify
from kleinstep.verify import QUICK_CHECKS, VerifyContext, run_checks

ANALYTIC_CHECKS = [c for c in QUICK_CHECKS if c is not verify.check_packet_smoke]

# with p' taken on the wrong root the matching algebra still balances currents,
# so only the reflectivity and sign checks notice
FLIP_FAILURES = {
    "regime_reflectivity",
    "klein_sign_coherence",
    "klein_reflectivity_and_balance",
    "worked_klein_scenario",
}


def test_quick_checks_pass():
    results = run_checks(VerifyContext(), QUICK_CHECKS)
    assert [r.name for r in results if not r.passed] == []


def test_flipped_branch_failure_set():
    results = run_checks(VerifyContext.with_hooks(["flip-branch"]), ANALYTIC_CHECKS)
    assert {r.name for r in results if not r.passed} == FLIP_FAILURES


def test_doubled_dt_reports_instability():
    res = verify.check_packet_smoke(VerifyContext.with_hooks(["double-dt"]))
    assert not res.passed
    assert "instability abort" in res.detail


def test_unknown_hook():
    with pytest.raises(ValueError):
        VerifyContext.with_hooks(["nope"])


def test_jobs_keep_input_order_and_results():
    serial = run_checks(VerifyContext(seed=7), ANALYTIC_CHECKS)
    threaded = run_checks(VerifyContext(seed=7), ANALYTIC_CHECKS, jobs=3)
    assert [r.name for r in threaded] == [c.check_name for c in ANALYTIC_CHECKS]
    assert [(r.passed, r.value) for r in serial] == [(r.passed, r.value) for r in threaded]


def test_seed_changes_samples():
    a = verify.sample_sweep(VerifyContext(seed=1).rng(3), 5)
    b = verify.sample_sweep(VerifyContext(seed=2).rng(3), 5)
    assert a != b
    assert a == verify.sample_sweep(VerifyContext(seed=1).rng(3), 5)


@pytest.mark.parametrize("regime", [verify.Regime.EVANESCENT, verify.Regime.KLEIN, verify.Regime.ORDINARY])
def test_regime_samplers(regime):
    for E, V0 in verify.sample_regime(VerifyContext().rng(0), regime, 300):
        assert 1 < E <= 10
        assert verify.classify_regime(E, V0, 1.0) is regime
