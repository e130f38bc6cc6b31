"""Deployment, mobility, energy, failures and serialization of the world."""
import numpy as np
import pytest

from conftest import build_chain_world, micro_config
from uasnsim.noise import total_spl
from uasnsim.world import (ROLE_CA, ROLE_DR, ROLE_SINK, ROLE_SOURCE,
                           StateError, World, WorldConfig, _reflect)

# --------------------------------------------------------------- deployment


def test_init_scenario_is_deterministic():
    a = World.init_scenario(WorldConfig(seed=3))
    b = World.init_scenario(WorldConfig(seed=3))
    assert np.array_equal(a.positions, b.positions)
    assert a.roles == b.roles
    assert np.array_equal(a.bandwidth, b.bandwidth)
    assert np.array_equal(a.spl_db, b.spl_db)
    assert np.array_equal(a.subnet_of, b.subnet_of)


def test_different_seeds_differ():
    a = World.init_scenario(WorldConfig(seed=0))
    b = World.init_scenario(WorldConfig(seed=1))
    assert not np.array_equal(a.positions, b.positions)


def test_grid_64_geometry(default_world):
    cfg = default_world.config
    assert cfg.grid_side == 4
    assert cfg.grid_spacing_m == pytest.approx(10000.0 / 3.0)
    # anchors sit on the grid; jitter stays within a quarter spacing per axis
    offsets = np.abs(default_world.positions - default_world.anchors)
    assert np.all(offsets <= cfg.grid_spacing_m / 4.0 + 1e-9)
    assert np.all(default_world.positions >= 0.0)
    assert np.all(default_world.positions <= cfg.cube_edge_m)


def test_nonstandard_cube_needs_override():
    with pytest.raises(ValueError):
        World.init_scenario(WorldConfig(node_count=27))
    w = World.init_scenario(WorldConfig(node_count=27,
                                        allow_nonstandard_size=True,
                                        min_dr_spacing_m=900.0))
    assert w.n == 27


def test_non_cube_count_always_rejected():
    with pytest.raises(ValueError):
        World.init_scenario(WorldConfig(node_count=50,
                                        allow_nonstandard_size=True))


def test_roles_are_well_formed(default_world):
    roles = default_world.roles
    assert roles.count(ROLE_SOURCE) == 1
    assert roles.count(ROLE_SINK) == 1
    assert roles.count(ROLE_CA) == default_world.config.ca_count
    assert roles.count(ROLE_DR) == 64 - 3


def test_source_sink_separation(default_world):
    d = default_world.distance(default_world.source_id, default_world.sink_id)
    assert d >= default_world.config.source_sink_min_dist_m


def test_subnets_are_nearest_ca():
    w = World.init_scenario(WorldConfig(seed=2, ca_count=2))
    ca_pos = w.positions[w.ca_ids]
    for i in range(w.n):
        d = np.linalg.norm(ca_pos - w.positions[i], axis=1)
        assert w.subnet_of[i] == w.ca_ids[int(np.argmin(d))]


def test_four_cas_record_spacing_warning():
    w = World.init_scenario(WorldConfig(seed=0, ca_count=4))
    # four CAs cannot be 10 km apart inside a 10 km cube
    assert any("min_ca_spacing_m" in msg for msg in w.warnings)


def test_config_validation_errors():
    with pytest.raises(ValueError):
        WorldConfig(ca_count=3)
    with pytest.raises(ValueError):
        WorldConfig(comm_range_m=-1.0)
    with pytest.raises(ValueError):
        WorldConfig(ema_coeff=0.0)
    with pytest.raises(ValueError):
        WorldConfig(bandwidth_low=5.0, bandwidth_high=2.0)


# ----------------------------------------------------------------- mobility


def test_reflect_folds_at_walls():
    got = _reflect(np.array([-1.0, 11.0, 5.0]), 10.0)
    assert np.allclose(got, [1.0, 9.0, 5.0])


def test_mobility_zero_sigma_is_static(default_world):
    w = World.init_scenario(WorldConfig(seed=0, mobility_sigma_m=0.0))
    before = w.positions.copy()
    w.step_mobility(np.random.default_rng(0))
    assert np.array_equal(w.positions, before)


def test_mobility_stays_in_bounds(default_world):
    rng = np.random.default_rng(1)
    for _ in range(50):
        default_world.step_mobility(rng)
    assert np.all(default_world.positions >= 0.0)
    assert np.all(default_world.positions <= default_world.config.cube_edge_m)


def test_mobility_is_deterministic(default_world):
    other = default_world.clone()
    default_world.step_mobility(np.random.default_rng(42))
    other.step_mobility(np.random.default_rng(42))
    assert np.array_equal(default_world.positions, other.positions)


def test_dead_nodes_do_not_move(default_world):
    victim = next(i for i in range(64)
                  if default_world.roles[i] == ROLE_DR)
    default_world.inject_failure(node_ids=[victim])
    before = default_world.positions[victim].copy()
    default_world.step_mobility(np.random.default_rng(5))
    assert np.array_equal(default_world.positions[victim], before)


def test_velocity_equals_displacement(default_world):
    before = default_world.positions.copy()
    default_world.step_mobility(np.random.default_rng(7))
    assert np.allclose(default_world.velocity,
                       default_world.positions - before)


# -------------------------------------------------------------------- links


def test_link_delay_from_distance():
    w = build_chain_world(spacing=1500.0)
    assert w.link_metrics(0, 1).delay_s == pytest.approx(1.0)
    assert w.link_metrics(0, 2).delay_s == pytest.approx(2.0)


def test_link_metrics_rejects_self_link(default_world):
    with pytest.raises(ValueError):
        default_world.link_metrics(3, 3)


def test_signal_spreading_law():
    w = build_chain_world(spacing=1500.0)
    # same receiver, doubled distance: exactly -20 lg 2 dB
    drop = w.signal_db(1, 2) - w.signal_db(0, 2)
    assert drop == pytest.approx(20.0 * np.log10(2.0), abs=1e-9)


def test_delay_triangle_inequality(default_world):
    d = default_world.dist_matrix
    rng = np.random.default_rng(0)
    for _ in range(200):
        i, j, k = rng.integers(0, 64, size=3)
        assert d[i, k] <= d[i, j] + d[j, k] + 1e-6


def test_ambient_spl_is_positive_and_varied(default_world):
    assert np.all(default_world.spl_db > 0.0)
    assert default_world.spl_db.std() > 0.0


# ------------------------------------------------------------------- energy


def test_consume_energy_boundary_kills_node():
    w = build_chain_world(initial_energy=1.0, tx_cost=1.0)
    w.consume_energy(1, "tx")
    assert w.energy[1] == 0.0
    assert not w.alive[1]


def test_consume_energy_rx():
    w = build_chain_world(initial_energy=10.0, rx_cost=0.5)
    w.consume_energy(1, "rx")
    assert w.energy[1] == pytest.approx(9.5)
    assert w.alive[1]


def test_energy_event_on_dead_node_raises():
    w = build_chain_world()
    w.inject_failure(node_ids=[1])
    with pytest.raises(StateError):
        w.consume_energy(1, "tx")


def test_unknown_energy_event_raises():
    w = build_chain_world()
    with pytest.raises(ValueError):
        w.consume_energy(1, "idle")


def test_energy_ledger_matches_event_counts(default_world):
    w = default_world
    rng = np.random.default_rng(0)
    for _ in range(300):
        i = int(rng.integers(0, w.n))
        if not w.alive[i]:
            continue
        w.consume_energy(i, "tx" if rng.random() < 0.5 else "rx")
    spent = w.n * w.config.initial_energy - w.energy.sum()
    expected = (w.tx_count.sum() * w.config.tx_cost
                + w.rx_count.sum() * w.config.rx_cost)
    assert spent == pytest.approx(expected)


def test_energy_is_non_increasing(default_world):
    w = default_world
    before = w.energy.copy()
    w.consume_energy(0, "tx")
    assert np.all(w.energy <= before)


# ----------------------------------------------------------------- failures


def test_inject_failure_rate_zero_is_noop(default_world):
    alive_before = default_world.alive.copy()
    chosen = default_world.inject_failure(rate=0.0,
                                          rng=np.random.default_rng(0))
    assert chosen == []
    assert np.array_equal(default_world.alive, alive_before)


def test_inject_failure_explicit_list(default_world):
    victims = [i for i in range(64)
               if default_world.roles[i] == ROLE_DR][:3]
    chosen = default_world.inject_failure(node_ids=victims)
    assert chosen == victims
    assert not default_world.alive[victims].any()
    assert default_world.failed[victims].all()


def test_inject_failure_protects_roles(default_world):
    with pytest.raises(ValueError):
        default_world.inject_failure(node_ids=[default_world.source_id])
    rng = np.random.default_rng(0)
    for _ in range(50):
        default_world.inject_failure(rate=0.3, rng=rng)
        assert default_world.alive[default_world.source_id]
        assert default_world.alive[default_world.sink_id]
        assert all(default_world.alive[ca] for ca in default_world.ca_ids)
        default_world.revive_failed()


def test_inject_failure_rate_expected_size(default_world):
    counts = []
    rng = np.random.default_rng(123)
    for _ in range(200):
        counts.append(len(default_world.inject_failure(rate=0.1, rng=rng)))
        default_world.revive_failed()
    # 61 eligible nodes at 10%: mean should sit near 6
    assert 4.5 < np.mean(counts) < 7.5


def test_inject_failure_is_seed_deterministic(default_world):
    w2 = default_world.clone()
    a = default_world.inject_failure(rate=0.2, rng=np.random.default_rng(9))
    b = w2.inject_failure(rate=0.2, rng=np.random.default_rng(9))
    assert a == b


def test_failure_draw_prefers_the_corridor(default_world):
    w = default_world
    d_perp = w.corridor_distance()
    eligible = [i for i in range(w.n) if w.roles[i] == ROLE_DR]
    rng = np.random.default_rng(7)
    victim_d, n_victims = 0.0, 0
    for _ in range(300):
        chosen = w.inject_failure(rate=0.1, rng=rng)
        victim_d += sum(d_perp[i] for i in chosen)
        n_victims += len(chosen)
        w.revive_failed()
    mean_eligible = float(np.mean([d_perp[i] for i in eligible]))
    assert n_victims > 0
    assert victim_d / n_victims < mean_eligible


def test_revive_failed_restores_alive(default_world):
    victims = [i for i in range(64) if default_world.roles[i] == ROLE_DR][:5]
    default_world.inject_failure(node_ids=victims)
    default_world.revive_failed()
    assert default_world.alive.all()
    assert not default_world.failed.any()


# ------------------------------------------------------------ graph queries


def test_hops_to_sink_on_chain():
    w = build_chain_world(n_relays=2)
    hops = w.hops_to_sink()
    assert hops[w.sink_id] == 0
    assert hops[2] == 1 and hops[1] == 2 and hops[0] == 3
    assert hops[w.ca_ids[0]] == -1  # CA is out of range of everyone


def test_hops_to_sink_reacts_to_failures():
    w = build_chain_world(n_relays=1)
    assert w.hops_to_sink()[0] == 2
    w.inject_failure(node_ids=[1])
    assert w.hops_to_sink()[0] == -1


def test_delay_bounds_to_sink():
    w = build_chain_world(n_relays=2, spacing=1500.0)
    t_min, t_max = w.delay_bounds_to_sink()
    assert t_min == 0.0  # the sink itself
    assert t_max >= 3.0  # the source, three segments away


def test_in_range_ids_excludes_self_and_far_nodes():
    w = build_chain_world(n_relays=2)
    ids = list(w.in_range_ids(0))
    assert ids == [1]
    w.inject_failure(node_ids=[1])
    assert list(w.in_range_ids(0, include_dead=False)) == []


def test_indicator_bounds_are_ordered(default_world):
    b = default_world.indicator_bounds()
    assert b.s_min <= b.s_max
    assert b.b_min <= b.b_max
    assert b.e_min <= b.e_max
    assert b.d_max == pytest.approx(np.sqrt(3.0) * 10000.0)


def test_node_state_snapshot(default_world):
    s = default_world.node_state(default_world.source_id)
    assert s.role == ROLE_SOURCE
    assert s.alive
    assert s.energy == default_world.config.initial_energy
    assert s.subnet_ca in default_world.ca_ids


# ------------------------------------------------------- clone and IO


def test_clone_is_independent(default_world):
    other = default_world.clone()
    other.energy[0] -= 5.0
    other.positions[0, 0] += 1.0
    assert default_world.energy[0] != other.energy[0]
    assert default_world.positions[0, 0] != other.positions[0, 0]


def test_scenario_roundtrip(tmp_path, default_world):
    w = default_world
    w.inject_failure(node_ids=[next(i for i in range(64)
                                    if w.roles[i] == ROLE_DR)])
    w.record_attempt(0, 1, False)
    path = tmp_path / "scenario.json"
    w.export_scenario(str(path))
    back = World.import_scenario(str(path))
    assert np.array_equal(back.positions, w.positions)
    assert back.roles == w.roles
    assert np.array_equal(back.energy, w.energy)
    assert np.array_equal(back.failed, w.failed)
    assert np.array_equal(back.alive, w.alive)
    assert np.array_equal(back.bandwidth, w.bandwidth)
    assert np.array_equal(back.success_ema, w.success_ema)
    assert np.array_equal(back.subnet_of, w.subnet_of)


def test_record_attempt_ema():
    w = build_chain_world()
    assert w.success_ema[0, 1] == 1.0
    w.record_attempt(0, 1, False)
    assert w.success_ema[0, 1] == pytest.approx(0.7)
    w.record_attempt(0, 1, True)
    assert w.success_ema[0, 1] == pytest.approx(0.79)


def test_reset_for_episode_rejitters_and_restores():
    w = World.init_scenario(WorldConfig(seed=4))
    victims = [i for i in range(64) if w.roles[i] == ROLE_DR][:4]
    w.inject_failure(node_ids=victims)
    w.consume_energy(w.source_id, "tx")
    pos_before = w.positions.copy()
    w.reset_for_episode(np.random.default_rng(11))
    assert w.alive.all()
    assert np.all(w.energy == w.config.initial_energy)
    assert not np.array_equal(w.positions, pos_before)
    # jitter still respects the quarter-spacing envelope
    off = np.abs(w.positions - w.anchors)
    assert np.all(off <= w.config.grid_spacing_m / 4.0 + 1e-9)


def test_spl_matches_power_sum_shape():
    # the stored per-node level behaves like a power sum: strictly above the
    # loudest component of any decomposition it could have come from
    cfg = micro_config(4)
    w = World(cfg, np.zeros((4, 3)), [ROLE_SOURCE, ROLE_DR, ROLE_DR, ROLE_SINK])
    w.spl_db[:] = total_spl([40.0, 45.0])
    assert np.all(w.spl_db > 45.0)
