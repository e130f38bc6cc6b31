"""Packet lifecycle and the per-tick routing engine.

Each tick: scheduled failures land, views refresh on their period, CA
interrupt requests from the previous tick are served, buffered packets try
to resume, new packets inject, then every in-flight packet takes one hop
(holders processed in ascending node id, packets in ascending packet id),
and finally mobility advances. Packet conservation is audited every tick.

Mode contract: in mappo / ma_mappo modes an unreachable chosen hop loses
the packet; in ma_mappo_i the packet buffers, the CA is asked for a view
update, and routing resumes once the view advances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import rewards as rw
from .masking import MaskModel, update_network_view, refresh_all_views
from .rewards import RewardWeights
from .world import World

IN_FLIGHT = "in_flight"
BUFFERED = "buffered_pending"
DELIVERED = "delivered"
ORPHANED = "orphaned"
LOST = "lost"

TERMINAL = (DELIVERED, ORPHANED, LOST)

# sentinel for interrupt requests raised with no viable candidate at all
NO_CANDIDATE = -1


class RoutingError(RuntimeError):
    """Raised when a routing operation is invoked in an illegal state."""


@dataclass
class Packet:
    packet_id: int
    source: int
    sink: int
    holder: int
    status: str = IN_FLIGHT
    hop_trace: List[int] = field(default_factory=list)
    hop_delays: List[float] = field(default_factory=list)
    accumulated_delay_s: float = 0.0
    created_tick: int = 0
    delivered_tick: Optional[int] = None
    buffered_version: Optional[int] = None
    interrupts: int = 0
    pending_request: Optional["InterruptRequest"] = None

    def __post_init__(self):
        if not self.hop_trace:
            self.hop_trace = [self.source]


@dataclass
class InterruptRequest:
    requester: int
    unreachable_next_hop: int
    packet_ids: List[int]
    tick: int

    def __post_init__(self):
        if not self.packet_ids:
            raise ValueError("request must carry at least one packet id")


@dataclass
class TaskMetrics:
    algorithm: str
    seed: int
    created: int
    delivered: int
    lost: int
    orphaned: int
    delivery_ratio: float
    mean_delay_s: Optional[float]
    delays_s: List[float]
    total_ticks: int
    interrupt_count: int
    fine_tune_calls: int
    reward_curve: List[float] = field(default_factory=list)


@dataclass
class EngineResult:
    packets: List[Packet]
    audit_rows: List[Dict[str, int]]
    interrupt_count: int
    fine_tune_calls: int
    ticks_run: int
    all_terminal_tick: Optional[int]


def transmission_ok(world: World, i: int, j: int) -> bool:
    """Ground-truth deliverability of one hop at transmission time."""
    limit = world.config.comm_range_m * (1.0 + world.config.range_tolerance)
    return bool(world.alive[j]) and world.distance(i, j) <= limit


def candidate_ids(world: World, holder: int, packet: Packet, mode: str) -> np.ndarray:
    """Admissible next hops before policy masking; loop guard applied.

    Packets that have been interrupted at least once may backtrack through
    visited nodes: a re-route around a dead region often has no choice but
    to retrace. The hop cap still bounds cycling. Non-interrupted traffic
    keeps the strict no-revisit guard.
    """
    if mode == "mappo":
        ids = [int(j) for j in world.in_range_ids(holder)]
    else:
        view = world.views.get(int(world.subnet_of[holder]))
        if view is None:
            raise RoutingError(f"no network view for subnet of node {holder}")
        in_view = [int(j) for j in view.reachable_from(holder)]
        own = world.subnet_of[holder]
        cross = [int(j) for j in world.in_range_ids(holder)
                 if world.subnet_of[j] != own]
        ids = sorted(set(in_view) | set(cross))
    if mode == "ma_mappo_i" and packet.interrupts > 0:
        blocked = {holder}
        if len(packet.hop_trace) >= 2:
            blocked.add(packet.hop_trace[-2])  # no immediate ping-pong
    else:
        blocked = set(packet.hop_trace)
    return np.array([j for j in ids if j not in blocked], dtype=np.int64)


def step_reward(world: World, weights: RewardWeights, i: int, j: int,
                outcome: str, hop_cap: int) -> float:
    """Four-component reward for one hop attempt.

    On success the shaping terms are evaluated at the receiving node; on
    loss or interrupt the packet is still at the sender, so they are
    evaluated there. Interrupted attempts carry no forwarding term.
    """
    if outcome == "success":
        node = j
        p_fwd = rw.snr_to_probability(world.signal_db(i, j),
                                      weights.snr_midpoint_db, weights.snr_slope)
        r_fwd = rw.forwarding_reward(True, p_fwd, 0.0,
                                     weights.gamma_forward, weights.gamma_loss)
    elif outcome == "cap":
        # hop physically landed but the packet overran its hop budget
        node = j
        r_fwd = rw.forwarding_reward(False, 0.0, 1.0,
                                     weights.gamma_forward, weights.gamma_loss)
    elif outcome == "loss":
        node = i
        r_fwd = rw.forwarding_reward(False, 0.0, 1.0,
                                     weights.gamma_forward, weights.gamma_loss)
    elif outcome == "interrupt":
        node = i
        r_fwd = 0.0
    else:
        raise ValueError(f"unknown outcome {outcome!r}")
    r_noise = rw.noise_reward(world.spl_db[node], weights.chi, weights.varsigma)
    hops = int(world.hops_to_sink()[node])
    r_hop = rw.hop_reward(hops if hops >= 0 else hop_cap, weights.alpha, weights.beta)
    t_min, t_max = world.delay_bounds_to_sink()
    r_delay = rw.delay_reward(world.delay_to_sink(node), t_min, t_max, weights.omega)
    return rw.total_reward([r_fwd, r_noise, r_hop, r_delay], weights)


def handle_unreachable(world: World, packet: Packet, next_hop: int) -> InterruptRequest:
    """Buffer a packet whose chosen hop failed and draft the CA request."""
    if packet.status != IN_FLIGHT:
        raise RoutingError(f"packet {packet.packet_id} is not in flight")
    view = world.views.get(int(world.subnet_of[packet.holder]))
    packet.status = BUFFERED
    packet.buffered_version = view.version if view is not None else 0
    packet.interrupts += 1
    return InterruptRequest(requester=packet.holder,
                            unreachable_next_hop=next_hop,
                            packet_ids=[packet.packet_id],
                            tick=world.tick)


def ca_handle_request(world: World, ca_id: int, request: InterruptRequest,
                      model: MaskModel):
    """Serve an interrupt request: recompute the owning CA's view.

    A request arriving at a CA that does not own the requester's subnet is
    delegated to the owning CA. Returns the refreshed view.
    """
    if ca_id not in world.ca_ids:
        raise RoutingError(f"node {ca_id} is not a CA")
    if not world.alive[request.requester]:
        raise RoutingError(f"requester {request.requester} is not alive")
    owner = int(world.subnet_of[request.requester])
    if owner != ca_id:
        return ca_handle_request(world, owner, request, model)
    return update_network_view(world, owner, model)


def resume_buffered(world: World, packet: Packet, mode: str) -> bool:
    """Try to put a buffered packet back in flight after a view advance."""
    if packet.status != BUFFERED:
        raise RoutingError(f"packet {packet.packet_id} is not buffered")
    view = world.views.get(int(world.subnet_of[packet.holder]))
    if view is None or view.version <= (packet.buffered_version or 0):
        return False
    cands = candidate_ids(world, packet.holder, packet, mode)
    if len(cands) == 0:
        # checked under this version; wait for the next advance
        packet.buffered_version = view.version
        return False
    packet.status = IN_FLIGHT
    packet.buffered_version = None
    return True


def route_step(world: World, packet: Packet, policy, streams: Dict,
               cfg, weights: Optional[RewardWeights] = None,
               collector=None, audit: bool = True) -> str:
    """One hop attempt for one in-flight packet. Returns the outcome string.

    Outcomes: delivered, forwarded, cap_orphaned, lost, interrupted,
    no_candidate_lost, no_candidate_buffered.
    """
    holder = packet.holder
    if packet.status != IN_FLIGHT:
        raise RoutingError(f"packet {packet.packet_id} is not in flight")
    if not world.alive[holder]:
        raise RoutingError(f"holder {holder} of packet {packet.packet_id} is dead")
    mode = policy.mode

    cands = candidate_ids(world, holder, packet, mode)
    if len(cands) == 0:
        if mode == "ma_mappo_i":
            packet.pending_request = handle_unreachable(world, packet, NO_CANDIDATE)
            _collect(collector, world, policy, packet, holder, None, None,
                     "interrupt", cfg, weights)
            return "no_candidate_buffered"
        packet.status = LOST
        _collect(collector, world, policy, packet, holder, None, None,
                 "loss", cfg, weights)
        return "no_candidate_lost"

    decision = policy.decide(world, holder, cands, len(packet.hop_trace) - 1,
                             streams["sampling"])
    j = int(cands[decision.index])

    if audit and mode != "mappo":
        view = world.views.get(int(world.subnet_of[holder]))
        if (view is not None and j in view.index_of
                and not view.is_reachable(holder, j)):
            raise RoutingError(
                f"attempted transmission toward view-unreachable node {j}")

    if transmission_ok(world, holder, j):
        world.consume_energy(holder, "tx")
        world.consume_energy(j, "rx")
        world.record_attempt(holder, j, True)
        delay = world.link_delay(holder, j)
        packet.hop_trace.append(j)
        packet.hop_delays.append(delay)
        packet.accumulated_delay_s += delay
        packet.holder = j
        hops_taken = len(packet.hop_trace) - 1
        if j == packet.sink:
            packet.status = DELIVERED
            packet.delivered_tick = world.tick
            _collect(collector, world, policy, packet, holder, j, decision,
                     "success", cfg, weights, done=True)
            return "delivered"
        if hops_taken >= cfg.hop_cap:
            packet.status = ORPHANED
            _collect(collector, world, policy, packet, holder, j, decision,
                     "cap", cfg, weights, done=True)
            return "cap_orphaned"
        _collect(collector, world, policy, packet, holder, j, decision,
                 "success", cfg, weights, done=False)
        return "forwarded"

    # chosen hop is unreachable in truth
    world.record_attempt(holder, j, False)
    if mode == "ma_mappo_i":
        packet.pending_request = handle_unreachable(world, packet, j)
        _collect(collector, world, policy, packet, holder, j, decision,
                 "interrupt", cfg, weights, done=False)
        return "interrupted"
    packet.status = LOST
    _collect(collector, world, policy, packet, holder, j, decision,
             "loss", cfg, weights, done=True)
    return "lost"


def _collect(collector, world, policy, packet, holder, j, decision, outcome,
             cfg, weights, done: bool = True) -> None:
    """Record a training transition for one hop attempt, if collecting."""
    if collector is None:
        return
    from .mappo import Transition
    if weights is None:
        raise ValueError("reward weights required when collecting transitions")
    reward = step_reward(world, weights, holder, j if j is not None else holder,
                         outcome, cfg.hop_cap)
    if decision is None:
        # degenerate no-candidate step: nothing to train on
        return
    collector.note_policy_sum(float(np.sum(decision.probs)))
    if done:
        next_value, state_next = 0.0, None
    else:
        nxt_holder = packet.holder
        next_value, state_next = policy.state_value(
            world, nxt_holder, len(packet.hop_trace) - 1)
    collector.record(Transition(
        state=decision.state_features,
        cand_features=decision.cand_features,
        mask_binary=np.asarray(decision.mask.binary),
        action=decision.index,
        log_prob=decision.log_prob,
        value=decision.value,
        reward=reward,
        done=done,
        next_value=next_value,
        state_next=state_next,
        packet_id=packet.packet_id,
        agent_id=holder,
        masked_fraction=decision.masked_fraction,
    ))


def _audit_counts(packets: List[Packet]) -> Dict[str, int]:
    counts = {IN_FLIGHT: 0, BUFFERED: 0, DELIVERED: 0, ORPHANED: 0, LOST: 0}
    for p in packets:
        counts[p.status] += 1
    counts["created"] = len(packets)
    return counts


def run_engine(world: World, policy, cfg, weights: Optional[RewardWeights],
               n_packets: int, packets_per_tick: int, tick_cap: int,
               failure_schedule: Dict[int, float],
               streams: Dict[str, np.random.Generator],
               collector=None,
               fine_tune_hook: Optional[Callable[[World, List[int]], None]] = None,
               keep_audit: bool = False,
               inject_origins: Optional[Sequence[int]] = None) -> EngineResult:
    """Run the tick loop until all packets are terminal or the cap hits."""
    mode = policy.mode
    packets: List[Packet] = []
    pending: List[InterruptRequest] = []
    interrupt_count = 0
    fine_tune_calls = 0
    audit_rows: List[Dict[str, int]] = []
    all_terminal_tick: Optional[int] = None
    world.tick = 0

    for tick in range(tick_cap):
        # scheduled failures; packets stranded on dead holders orphan here
        rate = failure_schedule.get(tick, 0.0)
        if rate > 0.0:
            world.inject_failure(rate=rate, rng=streams["failures"])
            for p in packets:
                if p.status in (IN_FLIGHT, BUFFERED) and not world.alive[p.holder]:
                    p.status = ORPHANED
                    if collector is not None:
                        collector.close_packet_chain(p.packet_id)

        if (policy.mask_model is not None and tick > 0
                and tick % cfg.view_interval == 0):
            refresh_all_views(world, policy.mask_model)

        # serve interrupt requests raised last tick; one view rebuild per CA
        if pending:
            served_cas = set()
            served_holders = set()
            for req in pending:
                owner = int(world.subnet_of[req.requester])
                if world.alive[req.requester]:
                    served_holders.add(req.requester)
                    if owner not in served_cas:
                        ca_handle_request(world, owner, req, policy.mask_model)
                        served_cas.add(owner)
            if served_cas and fine_tune_hook is not None:
                fine_tune_hook(world, sorted(served_holders))
                fine_tune_calls += 1
            pending = []

        if mode == "ma_mappo_i":
            buffered = sorted((p for p in packets if p.status == BUFFERED),
                              key=lambda p: (p.holder, p.packet_id))
            for p in buffered:
                resume_buffered(world, p, mode)

        while len(packets) < n_packets and \
                sum(1 for p in packets if p.created_tick == world.tick) < packets_per_tick:
            origin = world.source_id
            if inject_origins:
                origin = int(inject_origins[len(packets) % len(inject_origins)])
            packets.append(Packet(packet_id=len(packets), source=origin,
                                  sink=world.sink_id, holder=origin,
                                  created_tick=world.tick))

        # one hop per in-flight packet, holders in ascending id order
        in_flight = sorted((p for p in packets if p.status == IN_FLIGHT),
                           key=lambda p: (p.holder, p.packet_id))
        new_requests: Dict[Tuple[int, int], InterruptRequest] = {}
        for p in in_flight:
            if not world.alive[p.holder]:
                # holder depleted earlier this tick; the sweep at the top of
                # the next tick orphans the packet
                continue
            outcome = route_step(world, p, policy, streams, cfg, weights,
                                 collector)
            if outcome == "no_candidate_lost" and collector is not None:
                collector.close_packet_chain(p.packet_id)
            if outcome in ("interrupted", "no_candidate_buffered"):
                interrupt_count += 1
                req = p.pending_request
                key = (req.requester, req.unreachable_next_hop)
                if key in new_requests:
                    new_requests[key].packet_ids.extend(req.packet_ids)
                else:
                    new_requests[key] = req
                p.pending_request = None
        pending.extend(new_requests.values())

        counts = _audit_counts(packets)
        total = sum(counts[s] for s in (IN_FLIGHT, BUFFERED, DELIVERED,
                                        ORPHANED, LOST))
        if total != counts["created"]:
            raise RoutingError(f"packet conservation violated at tick {tick}")
        if keep_audit:
            audit_rows.append(dict(counts, tick=tick))

        done_now = (len(packets) == n_packets
                    and counts[IN_FLIGHT] == 0 and counts[BUFFERED] == 0
                    and not pending)
        if done_now:
            all_terminal_tick = tick
            break

        world.step_mobility(streams["episode"])
        world.tick += 1

    # tick budget exhausted: whatever is still moving or waiting orphans
    for p in packets:
        if p.status in (IN_FLIGHT, BUFFERED):
            p.status = ORPHANED
            if collector is not None:
                collector.close_packet_chain(p.packet_id)

    ticks_run = (all_terminal_tick + 1) if all_terminal_tick is not None else tick_cap
    return EngineResult(packets=packets, audit_rows=audit_rows,
                        interrupt_count=interrupt_count,
                        fine_tune_calls=fine_tune_calls,
                        ticks_run=ticks_run,
                        all_terminal_tick=all_terminal_tick)


def run_rollout(world: World, policy, cfg, weights: RewardWeights,
                n_packets: int, packets_per_tick: int, tick_cap: int,
                failure_schedule: Dict[int, float],
                streams: Dict[str, np.random.Generator],
                collector,
                inject_origins: Optional[Sequence[int]] = None) -> EngineResult:
    """Training rollout: same engine, transition collection on."""
    return run_engine(world, policy, cfg, weights, n_packets,
                      packets_per_tick, tick_cap, failure_schedule, streams,
                      collector=collector, inject_origins=inject_origins)


def failure_wave_schedule(n_packets: int, packets_per_tick: int,
                          failure_rate: float, waves: int = 3,
                          align_interval: Optional[int] = None) -> Dict[int, float]:
    """Spread the failure budget over waves inside the injection window.

    With align_interval set, each wave lands one tick after a view push,
    the adversarial moment for stale-view routing: the damage stays
    invisible to CA views for a full refresh period.
    """
    if failure_rate <= 0.0 or waves < 1:
        return {}
    injection_span = max(1, math.ceil(n_packets / packets_per_tick))
    per_wave = failure_rate / waves
    schedule: Dict[int, float] = {}
    for w in range(waves):
        base = max(1, injection_span * 0.9 * (w + 0.5) / waves)
        if align_interval is not None and align_interval > 0:
            tick = align_interval * math.ceil(base / align_interval) + 1
        else:
            tick = round(base)
        schedule[tick] = schedule.get(tick, 0.0) + per_wave
    return schedule


def run_routing_task(world: World, policy, cfg, weights: RewardWeights,
                     n_packets: int, packets_per_tick: int, tick_cap: int,
                     failure_rate: float,
                     streams: Dict[str, np.random.Generator],
                     fine_tune_hook: Optional[Callable[[World, List[int]], None]] = None,
                     failure_waves: int = 3,
                     algorithm: str = "", seed: int = 0,
                     keep_audit: bool = True) -> Tuple[TaskMetrics, EngineResult]:
    """Inject n_packets at the source and drain the network."""
    if policy.mask_model is not None:
        refresh_all_views(world, policy.mask_model)
    schedule = failure_wave_schedule(n_packets, packets_per_tick,
                                     failure_rate, failure_waves,
                                     align_interval=cfg.view_interval)
    hook = fine_tune_hook if policy.mode == "ma_mappo_i" else None
    result = run_engine(world, policy, cfg, None, n_packets, packets_per_tick,
                        tick_cap, schedule, streams, collector=None,
                        fine_tune_hook=hook, keep_audit=keep_audit)
    delivered = [p for p in result.packets if p.status == DELIVERED]
    delays = sorted(p.accumulated_delay_s for p in delivered)
    metrics = TaskMetrics(
        algorithm=algorithm,
        seed=seed,
        created=len(result.packets),
        delivered=len(delivered),
        lost=sum(1 for p in result.packets if p.status == LOST),
        orphaned=sum(1 for p in result.packets if p.status == ORPHANED),
        delivery_ratio=(len(delivered) / len(result.packets)
                        if result.packets else 0.0),
        mean_delay_s=(float(np.mean(delays)) if delays else None),
        delays_s=[float(d) for d in delays],
        total_ticks=result.ticks_run,
        interrupt_count=result.interrupt_count,
        fine_tune_calls=result.fine_tune_calls,
    )
    return metrics, result
