"""Shared helpers for the test suite."""

import numpy as np
import pytest


def assert_half_step_monotone(report, y):
    """Residual must not increase across any half step of an unstructured solve.

    Slack is 1e-12 relative to the larger of the previous residual and the
    initial residual ||y||^2: at the numerical floor the computed J is
    dominated by rounding at the problem scale, not by J itself.
    """
    base = float(np.dot(y, y))
    values = [base] + list(report.half_step_residuals)
    for k in range(1, len(values)):
        slack = 1e-12 * max(values[k - 1], base)
        assert values[k] <= values[k - 1] + slack, (
            f"half step {k}: residual rose from {values[k - 1]:.6e} to {values[k]:.6e}"
        )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
