"""Shared scenarios, loose-tolerance quadrature and an in-process HTTP client."""

from __future__ import annotations

import math

import pytest
from httpx import ASGITransport, AsyncClient

from relayfield.main import app
from relayfield.models import (
    NetworkModel,
    ProtocolParams,
    QuadratureSpec,
    SimulationSpec,
    make_geometry,
)
from relayfield.services import interference


@pytest.fixture(autouse=True)
def fresh_coupling_cache():
    """Cache hits from one test must not mask a regression in another."""
    interference.clear_coupling_cache()
    yield
    interference.clear_coupling_cache()


@pytest.fixture
def quad():
    return QuadratureSpec(rel_tol=1e-6, max_evaluations=2_000_000)


@pytest.fixture
def network():
    return NetworkModel(lam=1e-4, alpha=4.0)


@pytest.fixture
def empty_network():
    return NetworkModel(lam=0.0, alpha=4.0)


@pytest.fixture
def geometry():
    """Relay a fifth of the way to the destination, on the line."""
    return make_geometry(10.0, 0.2, 0.0, 4.0)


@pytest.fixture
def midpoint_geometry():
    return make_geometry(10.0, 0.5, 0.0, 4.0)


@pytest.fixture
def equilateral_geometry():
    """Relay as far from the destination as the source is: l_sd == l_rd."""
    return make_geometry(10.0, 1.0, math.pi / 3.0, 4.0)


@pytest.fixture
def params():
    return ProtocolParams(threshold=3.0, rho_mag=0.0, w_c=1.0, partitions=4)


@pytest.fixture
def simulation():
    return SimulationSpec(trials=20_000, seed=7, tail_fraction=1e-3)


@pytest.fixture
async def client():
    transport = ASGITransport(app=app)
    async with AsyncClient(transport=transport, base_url="http://test") as ac:
        yield ac


def scenario_toml(path, **values) -> str:
    """Write a flat TOML scenario file and return its path as a string."""

    def literal(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return f'"{v}"'
        if isinstance(v, list | tuple):
            return "[" + ", ".join(literal(x) for x in v) + "]"
        return repr(v)

    path.write_text("".join(f"{k} = {literal(v)}\n" for k, v in values.items()))
    return str(path)
