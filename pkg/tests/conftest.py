"""Shared fixtures and frozen reference values.

The reference constants below were computed symbolically (exact
rationals pushed through the reduced-form algebra) and from a
high-precision library for the normal special functions; tests compare
against them at tight absolute tolerances.
"""

import numpy as np
import pytest

from bidiv import (
    GAUSSIAN_IVS,
    ProbitCoefVector,
    RngStream,
    StructuralParams,
    simulate,
)

# Benchmark generative setup used across the statistical tests: moderate
# feedback both ways, equal instrument strengths, independent confounders,
# one weak covariate.
BENCH = StructuralParams(
    beta_xy=-0.25,
    beta_yx=0.45,
    mu_xz=0.65,
    mu_yw=0.65,
    sigma=0.75,
    mu_xq=0.15,
    mu_yq=0.15,
)

# Exact reduced-form values at BENCH (rational arithmetic: c = 80/89,
# theta_xz = theta_yw = 52/89, theta_xw = 117/445, theta_yz = -13/89,
# lambda1 = 4329/7921, lambda2 = 3825/7921).
C_BENCH = 80.0 / 89.0
THETA_XZ = 52.0 / 89.0
THETA_XW = 117.0 / 445.0
THETA_YZ = -13.0 / 89.0
THETA_YW = 52.0 / 89.0
LAMBDA1 = 4329.0 / 7921.0
LAMBDA2 = 3825.0 / 7921.0

XI_BENCH = ProbitCoefVector(
    xi_x0=0.0,
    xi_xz=0.790331971151759,
    xi_xw=0.355649387018291,
    xi_y0=0.0,
    xi_yz=-0.210197541698155,
    xi_yw=0.840790166792621,
)

K1_BENCH = -0.265961076320666
K2_BENCH = 0.422994227412286
T3_BENCH = -3.759948688109206


@pytest.fixture(scope="session")
def bench_params():
    return BENCH


@pytest.fixture(scope="session")
def xi_bench():
    return XI_BENCH


@pytest.fixture(scope="session")
def medium_dataset():
    """One benchmark draw (n=4000, gaussian instruments) shared by tests
    that need real fitted coefficients rather than exact ones."""
    return simulate(BENCH, GAUSSIAN_IVS, 4000, RngStream(77))


@pytest.fixture(scope="session")
def large_dataset():
    return simulate(BENCH, GAUSSIAN_IVS, 20_000, RngStream(78))


def assert_pair_close(pair, expected, atol):
    __tracebackhide__ = True
    assert abs(pair[0] - expected[0]) <= atol and abs(pair[1] - expected[1]) <= atol, (
        f"pair {pair} differs from {expected} beyond atol={atol}"
    )
