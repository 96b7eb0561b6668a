import functools

import pytest

from warpframe import scenarios


@functools.lru_cache(maxsize=None)
def scenario(kind: str, n: int = 200, **params):
    """Scenario builds are pure, so share them across tests."""
    if kind == "example1":
        grid = scenarios.example1_grid(n)
    elif kind == "example2":
        grid = scenarios.example2_grid(n)
    elif kind == "slice":
        grid = scenarios.slice_grid(params.get("fiber", "sphere"), n)
    else:
        grid = scenarios.graph_sphere3_grid(n)
    return scenarios.build(kind, params, grid)


@pytest.fixture(scope="session")
def ex1():
    return scenario("example1")


@pytest.fixture(scope="session")
def ex2():
    return scenario("example2")


@pytest.fixture(scope="session")
def slice_sc():
    return scenario("slice")
