"""Acceptance suite: each criterion at its stated tolerance and runtime budget.

Run with ``pytest -s tests/test_acceptance.py`` to see one PASS/FAIL line
per criterion.
"""
import pytest

from green_imcf import verify

CHECKS = [
    ("kernel_identities", verify.check_kernel_identities),
    ("capacity_identity", verify.check_capacity_identity),
    ("pole_asymptotics", verify.check_pole_asymptotics),
    ("decay_exponent", verify.check_decay_exponent),
    ("solver_oracle", verify.check_solver_oracle),
    ("obstacle_imcf_limit", verify.check_obstacle_limit),
    ("gradient_estimate", verify.check_gradient_estimate),
    ("barrier_certificates", verify.check_barriers),
    ("constants_ledger", verify.check_constants),
    ("nogo_certificate", verify.check_nogo),
    ("cross_module_consistency", verify.check_cross_module),
]


@pytest.mark.parametrize("name,check", CHECKS, ids=[c[0] for c in CHECKS])
def test_criterion(name, check):
    result = check()
    print(result.line())
    assert result.ok, f"{result.name}: {result.details}"
    assert result.runtime <= result.budget, f"{result.name}: {result.runtime:.2f}s > {result.budget}s"
