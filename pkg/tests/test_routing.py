from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from anctsim import crypto
from anctsim.core import Packet, PacketKind, seconds_to_us
from anctsim.routing import AnctTable, expected_signers, pr_mac_message, rrep_body, verify_rrep
from conftest import FrameTally, advance, line, static_sim

F = Fraction

# Triangle-ish topology: S reaches D only through A or B, and A hears B.
#        A
#   S         D
#        B
DIAMOND = [(0.0, 0.0), (200.0, 100.0), (200.0, -100.0), (400.0, 0.0)]


def make_rrep(sim, route, p_r, route_id=1, signers=None, mac_key=None):
    """RREP as it would look on arrival at ``route[position]`` for the given signers."""
    keys = sim.keys
    src, dst = route[0], route[-1]
    mac = crypto.mac_compute(mac_key or keys.shared_key(src, dst), pr_mac_message(p_r, route_id))
    rrep = Packet(PacketKind.RREP, 1, src, dst, dst, route_id, route=tuple(route), p_r=p_r, mac_tag=mac)
    body = rrep_body(rrep)
    signers = [dst] if signers is None else signers
    sigs = tuple(crypto.sign(keys.signing_key(s), body) for s in signers)
    return rrep.hop(dst, signatures=sigs)


# -- trust table arithmetic ------------------------------------------------

def test_valid_rrep_raises_trust():
    sim = static_sim(line(3))
    a = sim.nodes[1]
    a.receive(make_rrep(sim, (0, 1, 2), p_r=1), 2)
    assert a.table.entry(2).tc == F("1.1")


def test_forged_mac_drops_and_lowers_trust():
    sim = static_sim(line(3))
    a = sim.nodes[1]
    sent = sim.metrics.control_packets_sent
    a.receive(make_rrep(sim, (0, 1, 2), p_r=1, mac_key=b"x" * 16), 2)
    assert a.table.entry(2).tc == F("0.9")
    assert sim.metrics.control_packets_sent == sent  # not forwarded


def test_low_success_ratio_costs_delta2():
    sim = static_sim(line(3))
    a = sim.nodes[1]
    a.table.count_frame(2)
    a.receive(make_rrep(sim, (0, 1, 2), p_r=10), 2)  # fc = 2 now
    e = a.table.entry(2)
    assert e.sr == F(2, 10)
    assert e.tc == 1 + F("0.1") - F("0.05")


def test_threshold_crossing_marks_malicious():
    t = AnctTable(0)
    t.entry(7).tc = F("0.52")
    e = t.penalise_success_ratio(7)
    assert e.tc == F("0.47") and e.malicious and t.is_malicious(7)


def test_missing_destination_signature_is_a_failure():
    sim = static_sim(line(4))
    b = sim.nodes[2]
    bad = make_rrep(sim, (0, 1, 2, 3), p_r=1, signers=[2])
    assert not verify_rrep(sim.keys, bad, 2)
    b.receive(bad, 3)
    assert b.table.entry(3).tc == F("0.9")


def test_signature_order_is_checked():
    sim = static_sim(line(5))
    route = (0, 1, 2, 3, 4)
    good = make_rrep(sim, route, 1, signers=[4, 3, 2])
    assert verify_rrep(sim.keys, good, 1)
    assert not verify_rrep(sim.keys, make_rrep(sim, route, 1, signers=[4, 2, 3]), 1)
    assert expected_signers(route, 0) == [4, 3, 2, 1]


def test_zero_p_r_skips_penalty():
    t = AnctTable(0)
    up = t.evaluate(1, True, 0)
    assert up.sr is None and not up.penalised and up.entry.tc == F("1.1")


def test_no_entry_for_self():
    with pytest.raises(ValueError):
        AnctTable(3).entry(3)


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 6), st.integers(0, 12)), max_size=40))
def test_trust_matches_closed_form_replay(steps):
    t = AnctTable(0)
    tc, fc, mark, marked = F(1), 0, 0, False
    for ok, frames, p_r in steps:
        for _ in range(frames):
            t.count_frame(1)
        fc += frames
        up = t.evaluate(1, ok, p_r)
        tc += F("0.1") if ok else -F("0.1")
        sr = F(fc - mark, p_r) if p_r else None
        if sr is not None and sr < F("0.5"):
            tc -= F("0.05")
        mark = fc
        marked = marked or tc <= F("0.5")
        assert up.sr == sr and up.entry.tc == tc and up.entry.fc == fc
        assert t.is_malicious(1) == marked


def test_always_failing_neighbor_needs_exactly_five_evaluations():
    t = AnctTable(0)
    for k in range(1, 6):
        t.count_frame(9)
        up = t.evaluate(9, False, 1)
        assert up.entry.tc == 1 - k * F("0.1")
        assert t.is_malicious(9) == (k == 5)


# -- line topology S - A - D ------------------------------------------------

def test_line_discovery_trace():
    sim = static_sim(line(3))
    tally = FrameTally(sim)
    s, a, d = sim.nodes
    state = s.initiate_discovery(2)
    assert state.route_id == 1
    advance(sim, 0.01)
    assert d.p_r[0] == 1
    assert d.pending_reply[(0, 1)] == (0, 1, 2)
    advance(sim, 0.1)
    (rrep_at_a, rrep_at_s) = [r for r in tally.rreps]
    assert rrep_at_a[:4] == (1, 2, 1, (0, 1, 2))
    route = s.routes[2]
    assert route.next_hop == 1 and route.full_path == (0, 1, 2)
    # Omniscient counts agree with every forward counter.
    for (rx, tx), n in tally.frames.items():
        assert sim.nodes[rx].table.entry(tx).fc == n


def test_signature_chain_grows_one_per_hop():
    sim = static_sim(line(5))
    seen = []
    sim.frame_observers.append(lambda now, tx, rx, f: f.kind is PacketKind.RREP and seen.append((rx, f)))
    sim.nodes[0].initiate_discovery(4)
    advance(sim, 0.2)
    at_source = [f for rx, f in seen if rx == 0]
    assert at_source
    f = at_source[0]
    assert len(f.signatures) == len(f.route) - 1
    assert [sig.signer for sig in f.signatures] == [4, 3, 2, 1]
    assert sim.nodes[0].routes[4].full_path == (0, 1, 2, 3, 4)


def test_data_forwarding_counts_and_payload():
    sim = static_sim(line(3))
    sim.record_payloads = True
    s, a, d = sim.nodes
    s.initiate_discovery(2)
    advance(sim, 0.2)
    fc_before = a.table.entry(0).fc
    frame = sim.inject_data(0, 2)
    advance(sim, 0.1)
    assert a.table.entry(0).fc == fc_before + 1
    assert d.p_r[0] == 1
    assert sim.metrics.data_delivered == 1
    assert sim.delivered_payloads[frame.uid] == sim.sent_payloads[frame.uid]


def test_data_frames_are_encrypted_per_hop():
    sim = static_sim(line(3))
    sim.record_payloads = True
    wire = []
    sim.frame_observers.append(lambda now, tx, rx, f: f.kind is PacketKind.DATA and wire.append(f.payload))
    sim.nodes[0].initiate_discovery(2)
    advance(sim, 0.2)
    frame = sim.inject_data(0, 2)
    advance(sim, 0.1)
    assert len(wire) == 2
    assert all(p != sim.sent_payloads[frame.uid] for p in wire)
    assert wire[0] != wire[1]


def test_tampered_frame_mac_is_discarded_but_counted():
    sim = static_sim(line(3))
    s, a, d = sim.nodes
    s.initiate_discovery(2)
    advance(sim, 0.2)
    real_unicast = sim.unicast

    def tamper(sender, to, frame):
        if frame.kind is PacketKind.DATA and sender == 0:
            frame = frame.hop(0, mac_tag=bytes(16))
        return real_unicast(sender, to, frame)

    sim.unicast = tamper
    fc_before = a.table.entry(0).fc
    sim.inject_data(0, 2)
    advance(sim, 0.1)
    assert a.table.entry(0).fc == fc_before + 1
    assert sim.metrics.data_delivered == 0
    assert sim.metrics.data_dropped_by["link_loss"] == 1


# -- triangle / diamond: duplicates and multi-path P_R -----------------------

def test_duplicate_rreq_counted_not_reforwarded():
    sim = static_sim(DIAMOND)
    tally = FrameTally(sim)
    sent_rreq = []
    sim.frame_observers.append(
        lambda now, tx, rx, f: f.kind is PacketKind.RREQ and sent_rreq.append((tx, rx)))
    sim.nodes[0].initiate_discovery(3)
    advance(sim, 0.01)
    a = sim.nodes[1]
    # A heard the request from S and the rebroadcast from B; it relayed once.
    assert a.table.entry(2).fc == tally.frames[(1, 2)] == 1
    assert sorted(rx for tx, rx in sent_rreq if tx == 1) == [0, 2, 3]
    d = sim.nodes[3]
    assert d.p_r[0] == 2


def test_two_copies_reply_with_first_arrival_path():
    sim = static_sim(DIAMOND)
    first = []
    sim.frame_observers.append(
        lambda now, tx, rx, f: rx == 3 and f.kind is PacketKind.RREQ and first.append(f.hop_record))
    sim.nodes[0].initiate_discovery(3)
    advance(sim, 0.2)
    rrep_route = sim.nodes[0].routes[3].full_path
    assert rrep_route == first[0] + (3,)
    assert sim.trust_trace  # S evaluated its downstream
    row = [r for r in sim.trust_trace if r.observer == 0][0]
    assert row.neighbor == rrep_route[1]


def test_p_r_and_sr_match_brute_force_on_diamond():
    sim = static_sim(DIAMOND, flow_pairs=((0, 3),), sim_duration=8.0)
    tally = FrameTally(sim)
    marks = {}
    sim.run()
    trace = iter(sim.trust_trace)
    for rx, tx, p_r, route, count in tally.rreps:
        row = next(trace)
        assert (row.observer, row.neighbor) == (rx, tx)
        assert row.fc == count
        expected = F(count - marks.get((rx, tx), 0), p_r) if p_r else None
        assert row.sr == expected
        marks[(rx, tx)] = count


# -- timeouts and retries ----------------------------------------------------

def test_retry_increments_route_id_then_backs_off():
    sim = static_sim([(0.0, 0.0), (3000.0, 0.0)])
    s = sim.nodes[0]
    sim.inject_data(0, 1)
    assert s.discoveries[1].route_id == 1
    advance(sim, 1.5)
    assert s.discoveries[1].route_id == 2
    advance(sim, 4.0)  # t = 5.5 s, five retries made
    assert s.last_route_id[1] == 6
    advance(sim, 1.0)  # deadline at 6 s: give up, flush, back off 2 s
    assert sim.metrics.data_dropped_by["no_route"] == 1
    assert s.backoff_until[1] == seconds_to_us(8.0)
    advance(sim, 0.5)
    sim.inject_data(0, 1)  # t = 7 s: still backing off
    assert s.last_route_id[1] == 6
    advance(sim, 1.5)
    assert s.last_route_id[1] == 7


def test_timeout_after_resolution_is_noop():
    sim = static_sim(line(3))
    s = sim.nodes[0]
    s.initiate_discovery(2)
    advance(sim, 0.2)
    assert s.handle_timeout(2, 1) == "noop"


def test_late_or_second_rrep_ignored():
    sim = static_sim(line(3))
    s = sim.nodes[0]
    s.initiate_discovery(2)
    advance(sim, 0.2)
    installed = s.routes[2]
    assert s.source_on_rrep(make_rrep(sim, (0, 1, 2), 1)) is None
    assert s.routes[2] is installed

    sim = static_sim(line(3))
    s = sim.nodes[0]
    s.initiate_discovery(2)
    sim.now = seconds_to_us(1.5)
    assert s.source_on_rrep(make_rrep(sim, (0, 1, 2), 1)) is None


def test_isolated_source_discovery_reaches_nobody():
    sim = static_sim(line(3))
    s = sim.nodes[0]
    s.table.entry(1).malicious = True
    s.table.malicious.add(1)
    sent = sim.metrics.control_packets_sent
    s.initiate_discovery(2)
    assert sim.metrics.control_packets_sent == sent + 1
    advance(sim, 0.5)
    assert sim.nodes[1].table.entries == {}


def test_frames_from_marked_neighbor_are_ignored():
    sim = static_sim(line(3))
    a = sim.nodes[1]
    a.table.entry(0).malicious = True
    a.table.malicious.add(0)
    sim.nodes[0].initiate_discovery(2)
    advance(sim, 0.5)
    assert a.table.entry(0).fc == 1  # counted
    assert 2 not in sim.nodes[0].routes  # but never relayed


# -- baseline pairing ----------------------------------------------------------

def test_baseline_and_anct_deliver_same_packets_without_attack():
    from anctsim import ScenarioConfig, Simulation
    cfg = ScenarioConfig(node_count=30, area_width=600, area_height=600, sim_duration=10, flow_count=4,
                         cipher="test", rng_seed=4)
    out = {}
    for proto in ("anct", "baseline_aodv"):
        sim = Simulation(cfg.replace(protocol=proto))
        sim.record_payloads = True
        sim.run()
        out[proto] = (sim.delivered_payloads, sim.metrics.control_bytes_sent, sim.metrics.data_sent)
    assert out["anct"] == out["baseline_aodv"]
    assert out["anct"][0]
