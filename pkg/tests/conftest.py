"""Shared fixtures: small pre-built pipelines reused across test modules."""

import pytest

from gkpnet import engine


@pytest.fixture(scope="session")
def toric3_pipeline():
    cfg = engine.SimConfig(
        code="toric", distance=3, epsilons=(0.05,), trials=10, seed=0
    )
    return engine.build_pipeline(cfg), cfg
