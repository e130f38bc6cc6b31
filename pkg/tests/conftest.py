"""Shared fixtures: the seeded default deployment plus hand-placed micro
worlds with known geometry for routing tests."""
import numpy as np
import pytest

from uasnsim.world import (ROLE_CA, ROLE_DR, ROLE_SINK, ROLE_SOURCE, World,
                           WorldConfig)


def micro_config(n, **overrides):
    """Config for hand-placed worlds: no drift, tight radio range."""
    base = dict(node_count=n, allow_nonstandard_size=True,
                comm_range_m=2500.0, range_tolerance=0.0,
                mobility_sigma_m=0.0, initial_energy=100.0,
                failure_corridor_bias=0.0)
    base.update(overrides)
    return WorldConfig(**base)


def _finish(world):
    world.subnet_of[:] = world.ca_ids[0]
    world.bandwidth[:] = 5.0
    np.fill_diagonal(world.bandwidth, 0.0)
    return world


def build_chain_world(n_relays=2, spacing=2000.0, **overrides):
    """source -> relay chain -> sink along x; only adjacent nodes in range.

    The CA is parked out of acoustic range, so it owns the subnet without
    ever being a candidate hop.
    """
    xs = [i * spacing for i in range(n_relays + 2)]
    positions = [[x, 5000.0, 5000.0] for x in xs]
    positions.append([9500.0, 9500.0, 9500.0])
    roles = [ROLE_SOURCE] + [ROLE_DR] * n_relays + [ROLE_SINK, ROLE_CA]
    world = World(micro_config(len(roles), **overrides),
                  np.asarray(positions, dtype=np.float64), roles)
    return _finish(world)


def build_diamond_world(**overrides):
    """Two parallel relays between source and sink.

    Each relay is 2441 m from both endpoints (inside the 2500 m range);
    source-sink (4000 m) and relay-relay (2800 m) links are out of range,
    so killing one relay leaves exactly one alternative path.
    """
    positions = np.array([
        [1000.0, 5000.0, 5000.0],   # 0 source
        [3000.0, 6400.0, 5000.0],   # 1 relay, top
        [3000.0, 3600.0, 5000.0],   # 2 relay, bottom
        [5000.0, 5000.0, 5000.0],   # 3 sink
        [9500.0, 9500.0, 9500.0],   # 4 CA, out of everyone's range
    ])
    roles = [ROLE_SOURCE, ROLE_DR, ROLE_DR, ROLE_SINK, ROLE_CA]
    world = World(micro_config(5, **overrides), positions, roles)
    return _finish(world)


@pytest.fixture
def default_world():
    """Fresh 64-node seeded deployment, safe to mutate."""
    return World.init_scenario(WorldConfig(seed=0))


@pytest.fixture
def chain_world():
    return build_chain_world()


@pytest.fixture
def diamond_world():
    return build_diamond_world()
