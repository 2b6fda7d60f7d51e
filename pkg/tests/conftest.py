"""Shared fixtures.

The two long simulations and the equilibrium chain are expensive, so they
are computed once per session and shared between the unit tests and the
acceptance tests.
"""
from __future__ import annotations

import pytest

from virusfront.equilibrium import build_chain
from virusfront.fbsim import InitialData, run
from virusfront.model import ModelParams

# R0 = 0.5; gentle front response keeps the physical resolution fine for
# the whole run (h stays ~20 at T=200 instead of ~200).
EXTINCTION_KW = dict(
    theta=1.0, a=1.0, b=1.0, c=2.0, k=1.0, q=1.0,
    mu1=0.1, mu2=0.1, mu3=0.1,
)

# R0 = 2 and the strengthened threshold holds.  Full-strength front
# response: a slowly expanding habitat keeps the infection subcritical so
# long that u2, u3 underflow to exact zero before they can rebound.
PERSISTENCE_KW = dict(theta=1.0, a=1.0, b=2.0, c=1.0, k=1.0, q=1.0)


@pytest.fixture(scope="session")
def extinction_params() -> ModelParams:
    return ModelParams(**EXTINCTION_KW)


@pytest.fixture(scope="session")
def persistence_params() -> ModelParams:
    return ModelParams(**PERSISTENCE_KW)


@pytest.fixture(scope="session")
def extinction_run(extinction_params):
    return run(InitialData(), extinction_params, T=200.0, n=400)


@pytest.fixture(scope="session")
def persistence_run(persistence_params):
    return run(InitialData(), persistence_params, T=300.0, n=2000)


@pytest.fixture(scope="session")
def chain_r2(persistence_params):
    return build_chain(persistence_params, window=10.0, n=400)
