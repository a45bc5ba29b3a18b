"""AODV-style route discovery with the assured-neighbor counter table.

Every node keeps an :class:`AnctTable` with, per observed neighbor, a forward
counter (frames received from that neighbor), a trust counter and the last
success ratio.  RREPs carry a MAC over the destination's packet count under
the source/destination shared key plus a signature chain that each hop
verifies, extends and forwards.  A neighbor whose trust drops to the trusted
threshold is marked malicious and ignored from then on.

:class:`Node` holds one node's protocol state and reacts to frames and
timers handed to it by the engine through a small ``net`` facade.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import crypto
from .core import MAC_TAG_BYTES, Packet, PacketKind, Protocol, RouteEntry, seconds_to_us


def exact(value) -> Fraction:
    """Exact rational for a decimal config value (0.1 -> 1/10)."""
    return Fraction(str(value))


@dataclass
class AnctEntry:
    neighbor: int
    fc: int = 0
    tc: Fraction = Fraction(1)
    sr: Optional[Fraction] = None
    malicious: bool = False
    # fc at the previous evaluation; the success ratio uses the count since.
    fc_mark: int = 0


@dataclass
class TrustUpdate:
    neighbor: int
    verified: bool
    sr: Optional[Fraction]
    penalised: bool
    tc_before: Fraction
    entry: AnctEntry


class AnctTable:
    def __init__(self, owner: int, tc_initial=1.0, delta1=0.1, delta2=0.05, s_min=0.5, t_trust=0.5):
        self.owner = owner
        self.tc_initial = exact(tc_initial)
        self.delta1 = exact(delta1)
        self.delta2 = exact(delta2)
        self.s_min = exact(s_min)
        self.t_trust = exact(t_trust)
        self.entries: dict = {}
        # Neighbors currently marked malicious.
        self.malicious: set = set()

    @classmethod
    def from_config(cls, owner, cfg):
        return cls(owner, cfg.tc_initial, cfg.delta1, cfg.delta2, cfg.s_min, cfg.t_trust)

    def entry(self, neighbor: int) -> AnctEntry:
        if neighbor == self.owner:
            raise ValueError("a node keeps no entry for itself")
        e = self.entries.get(neighbor)
        if e is None:
            e = self.entries[neighbor] = AnctEntry(neighbor, tc=self.tc_initial)
        return e

    def count_frame(self, neighbor: int) -> None:
        """FC := FC + 1 for a frame received from ``neighbor``."""
        e = self.entries.get(neighbor)
        if e is None:
            e = self.entry(neighbor)
        e.fc += 1

    def is_malicious(self, neighbor: int) -> bool:
        return neighbor in self.malicious

    def malicious_set(self) -> set:
        return set(self.malicious)

    def success_ratio(self, neighbor: int, p_r: int) -> Optional[Fraction]:
        if p_r <= 0:
            return None
        e = self.entry(neighbor)
        return Fraction(e.fc - e.fc_mark, p_r)

    def _check_threshold(self, e: AnctEntry) -> None:
        if not e.malicious and e.tc <= self.t_trust:
            e.malicious = True
            self.malicious.add(e.neighbor)

    def evaluate(self, neighbor: int, verified: bool, p_r: int) -> TrustUpdate:
        """Apply one RREP evaluation of ``neighbor``.

        The verification outcome moves trust by delta1; a success ratio
        below s_min costs a further delta2.  With p_r = 0 the ratio is
        undefined and no penalty applies.
        """
        e = self.entry(neighbor)
        before = e.tc
        e.tc += self.delta1 if verified else -self.delta1
        sr = self.success_ratio(neighbor, p_r)
        penalised = sr is not None and sr < self.s_min
        if penalised:
            e.tc -= self.delta2
        if sr is not None:
            e.sr = sr
        e.fc_mark = e.fc
        self._check_threshold(e)
        return TrustUpdate(neighbor, verified, sr, penalised, before, e)

    def penalise_success_ratio(self, neighbor: int) -> AnctEntry:
        """Apply only the success-ratio penalty (no verification step)."""
        e = self.entry(neighbor)
        e.tc -= self.delta2
        self._check_threshold(e)
        return e


@dataclass
class DiscoveryState:
    source: int
    destination: int
    route_id: int
    rreq_seq: int
    deadline: int  # microseconds
    resolved: bool = False
    retries: int = 0


# ---------------------------------------------------------------------------
# RREP authentication helpers


def pr_mac_message(p_r: int, route_id: int) -> bytes:
    return struct.pack(">QQ", p_r, route_id)


def rrep_body(rrep: Packet) -> bytes:
    """Canonical RREP body covered by every signature in the chain."""
    head = struct.pack(">qqqqq", rrep.source, rrep.destination, rrep.route_id, rrep.seq, rrep.p_r)
    path = struct.pack(f">{len(rrep.route)}q", *rrep.route)
    return head + path + (rrep.mac_tag or b"")


def expected_signers(route: tuple, position: int) -> list:
    """Signers an RREP must carry when it reaches ``route[position]``:
    the destination, then every later hop in reverse route order."""
    return [route[-1]] + list(reversed(route[position + 1:-1]))


def verify_rrep(keys: crypto.KeyStore, rrep: Packet, position: int) -> bool:
    route = rrep.route
    if len(route) < 2 or route[0] != rrep.source or route[-1] != rrep.destination:
        return False
    if not rrep.signatures or rrep.signatures[0].signer != rrep.destination:
        return False
    if [s.signer for s in rrep.signatures] != expected_signers(route, position):
        return False
    if not crypto.mac_verify(keys.shared_key(rrep.source, rrep.destination),
                             pr_mac_message(rrep.p_r, rrep.route_id), rrep.mac_tag):
        return False
    body = rrep_body(rrep)
    return all(crypto.verify_sig(keys.verification_key(s.signer), body, s) for s in rrep.signatures)


def data_header(frame: Packet, sender: int) -> bytes:
    return struct.pack(">qqqqq", frame.uid, frame.source, frame.destination, frame.route_id, sender)


# ---------------------------------------------------------------------------


class Node:
    """Honest protocol behavior of one node.

    ``net`` is the engine facade: it exposes ``now`` (microseconds), ``cfg``,
    ``keys`` and the transmit / timer / accounting calls used below.
    """

    def __init__(self, node_id: int, net):
        self.id = node_id
        self.net = net
        cfg = net.cfg
        self.cfg = cfg
        self.secure = cfg.protocol == Protocol.ANCT
        self.table = AnctTable.from_config(node_id, cfg)
        self.routes: dict = {}
        self.discoveries: dict = {}
        self.last_route_id: dict = {}
        self.backoff_until: dict = {}
        self.buffers: dict = {}
        self.seen: set = set()
        self.reverse: dict = {}
        self.p_r: dict = {}
        self.pending_reply: dict = {}
        self.replied: set = set()
        self.dest_seq = 0
        self._seq = 0

    # -- small helpers -------------------------------------------------

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def excluded(self, neighbor: int) -> bool:
        return self.secure and self.table.is_malicious(neighbor)

    # -- frame entry point ---------------------------------------------

    def receive(self, frame: Packet, sender: int) -> None:
        if self.secure:
            self.table.count_frame(sender)
            if self.table.is_malicious(sender):
                if frame.kind is PacketKind.DATA:
                    self.net.data_dropped(frame, "no_route")
                return
        kind = frame.kind
        if kind is PacketKind.RREQ:
            self.handle_rreq(frame, sender)
        elif kind is PacketKind.RREP:
            self.handle_rrep(frame, sender)
        else:
            self.handle_data(frame, sender)

    # -- route discovery: source side ----------------------------------

    def initiate_discovery(self, dest: int) -> DiscoveryState:
        now = self.net.now
        route_id = self.last_route_id.get(dest, 0) + 1
        self.last_route_id[dest] = route_id
        prev = self.discoveries.get(dest)
        retries = prev.retries if prev is not None and not prev.resolved else 0
        seq = self.next_seq()
        state = DiscoveryState(self.id, dest, route_id, seq,
                               now + seconds_to_us(self.cfg.rrep_timeout), retries=retries)
        self.discoveries[dest] = state
        self.seen.add((self.id, route_id, seq))
        rreq = Packet(PacketKind.RREQ, seq, self.id, dest, self.id, route_id, hop_record=(self.id,))
        self.net.broadcast(self.id, rreq)
        self.net.set_timer(state.deadline - now, self.id, "discovery", (dest, route_id))
        return state

    def ensure_discovery(self, dest: int) -> None:
        if self.net.draining:
            return
        state = self.discoveries.get(dest)
        if state is not None and not state.resolved:
            return
        if self.backoff_until.get(dest, -1) > self.net.now:
            return
        self.initiate_discovery(dest)

    def handle_timeout(self, dest: int, route_id: int) -> str:
        state = self.discoveries.get(dest)
        if state is None or state.resolved or state.route_id != route_id:
            return "noop"
        if state.retries < self.cfg.max_retries:
            state.retries += 1
            self.initiate_discovery(dest)
            return "retry"
        # Give up: flush what was waiting and pause the flow.
        state.resolved = True
        for frame in self.buffers.pop(dest, ()):
            self.net.data_dropped(frame, "no_route")
        backoff = seconds_to_us(self.cfg.retry_backoff)
        self.backoff_until[dest] = self.net.now + backoff
        self.net.set_timer(backoff, self.id, "backoff", (dest,))
        return "give_up"

    def handle_backoff_end(self, dest: int) -> None:
        if self.buffers.get(dest):
            self.ensure_discovery(dest)

    def source_on_rrep(self, rrep: Packet) -> Optional[RouteEntry]:
        dest = rrep.destination
        state = self.discoveries.get(dest)
        now = self.net.now
        if state is None or state.resolved or state.route_id != rrep.route_id or now > state.deadline:
            return None
        route = RouteEntry(dest, rrep.route[1], tuple(rrep.route), rrep.route_id, now)
        self.routes[dest] = route
        state.resolved = True
        state.retries = 0
        pending = self.buffers.pop(dest, ())
        for frame in pending:
            self.send_data(frame)
        return route

    # -- route discovery: relays and destination -----------------------

    def handle_rreq(self, rreq: Packet, upstream: int) -> None:
        if rreq.destination == self.id:
            self.destination_on_rreq(rreq, upstream)
            return
        key = (rreq.source, rreq.route_id, rreq.seq)
        if key in self.seen or self.id in rreq.hop_record:
            return
        self.seen.add(key)
        self.reverse[key] = upstream
        self.net.broadcast(self.id, rreq.hop(self.id, hop_record=rreq.hop_record + (self.id,)))

    def destination_on_rreq(self, rreq: Packet, upstream: int) -> None:
        src = rreq.source
        self.p_r[src] = self.p_r.get(src, 0) + 1
        key = (src, rreq.route_id)
        if key in self.replied or key in self.pending_reply:
            return
        self.pending_reply[key] = rreq.hop_record + (self.id,)
        self.net.set_timer(seconds_to_us(self.cfg.rrep_window), self.id, "reply", key)

    def emit_rrep(self, src: int, route_id: int) -> Optional[Packet]:
        route = self.pending_reply.pop((src, route_id), None)
        if route is None or self.net.draining:
            return None
        self.replied.add((src, route_id))
        p_r = self.p_r.pop(src, 0)
        self.dest_seq += 1
        keys = self.net.keys
        mac = crypto.mac_compute(keys.shared_key(src, self.id), pr_mac_message(p_r, route_id))
        rrep = Packet(PacketKind.RREP, self.dest_seq, src, self.id, self.id, route_id,
                      route=route, p_r=p_r, mac_tag=mac)
        sig = crypto.sign(keys.signing_key(self.id), rrep_body(rrep))
        rrep = rrep.hop(self.id, signatures=(sig,))
        self.net.unicast(self.id, route[-2], rrep)
        return rrep

    def handle_rrep(self, rrep: Packet, downstream: int) -> bool:
        """Verify, account trust, then forward toward the source (or install
        the route when this node is the source).  Returns True if accepted."""
        route = rrep.route
        if self.id not in route[:-1]:
            return False
        position = route.index(self.id)
        if self.secure:
            ok = route[position + 1] == downstream and verify_rrep(self.net.keys, rrep, position)
            update = self.table.evaluate(downstream, ok, rrep.p_r)
            self.net.trace_trust(self.id, update)
            if not ok:
                return False
        if position == 0:
            if rrep.source == self.id:
                self.source_on_rrep(rrep)
            return True
        upstream = route[position - 1]
        if self.excluded(upstream):
            return False
        sig = crypto.sign(self.net.keys.signing_key(self.id), rrep_body(rrep))
        self.forward_control(rrep.hop(self.id, signatures=rrep.signatures + (sig,)), upstream)
        return True

    def forward_control(self, frame: Packet, to: int) -> None:
        self.net.unicast(self.id, to, frame)

    # -- data ----------------------------------------------------------

    def route_for(self, dest: int) -> Optional[RouteEntry]:
        route = self.routes.get(dest)
        if route is None or not route.valid:
            return None
        if self.net.now - route.established_at >= seconds_to_us(self.cfg.route_lifetime):
            route.valid = False
            return None
        if self.excluded(route.next_hop) or not self.net.in_range(self.id, route.next_hop):
            route.valid = False
            return None
        return route

    def originate_data(self, frame: Packet) -> None:
        self.send_data(frame)

    def send_data(self, frame: Packet) -> None:
        dest = frame.destination
        route = self.route_for(dest)
        if route is None:
            buf = self.buffers.setdefault(dest, deque())
            if len(buf) >= self.cfg.source_buffer:
                self.net.data_dropped(frame, "queue")
            else:
                buf.append(frame)
            self.ensure_discovery(dest)
            return
        frame = Packet(PacketKind.DATA, frame.seq, frame.source, dest, self.id, route.route_id,
                       route=route.full_path, payload=frame.payload, uid=frame.uid,
                       created_us=frame.created_us)
        self.transmit_data(frame, frame.payload, route.next_hop)

    def transmit_data(self, frame: Packet, plaintext: bytes, nxt: int) -> None:
        if self.secure:
            keys = self.net.keys
            c = crypto.frame_counter(frame.route_id, frame.seq)
            ct = crypto.ctr_encrypt(keys.link_cipher(self.id, nxt), c, plaintext)
            frame = frame.hop(self.id, payload=ct)
            tag = crypto.mac_compute(keys.link_mac_key(self.id, nxt), data_header(frame, self.id) + ct)
            frame = frame.hop(self.id, mac_tag=tag)
        else:
            # Same frame layout, tag left blank.
            frame = frame.hop(self.id, payload=plaintext, mac_tag=bytes(MAC_TAG_BYTES))
        self.net.unicast(self.id, nxt, frame)

    def open_data(self, frame: Packet, sender: int) -> Optional[bytes]:
        """Check the frame MAC and strip this hop's encryption."""
        if not self.secure:
            return frame.payload
        keys = self.net.keys
        if not crypto.mac_verify(keys.link_mac_key(sender, self.id),
                                 data_header(frame, sender) + frame.payload, frame.mac_tag):
            return None
        c = crypto.frame_counter(frame.route_id, frame.seq)
        return crypto.ctr_decrypt(keys.link_cipher(sender, self.id), c, frame.payload)

    def handle_data(self, frame: Packet, upstream: int) -> None:
        plaintext = self.open_data(frame, upstream)
        if plaintext is None:
            self.net.data_dropped(frame, "link_loss")
            return
        if frame.destination == self.id:
            self.p_r[frame.source] = self.p_r.get(frame.source, 0) + 1
            self.net.data_delivered(frame, plaintext)
            return
        self.forward_data(frame, plaintext)

    def forward_data(self, frame: Packet, plaintext: bytes) -> None:
        path = frame.route
        try:
            nxt = path[path.index(self.id) + 1]
        except (ValueError, IndexError):
            self.net.data_dropped(frame, "no_route")
            return
        if self.excluded(nxt) or not self.net.in_range(self.id, nxt):
            self.net.data_dropped(frame, "no_route")
            return
        self.transmit_data(frame, plaintext, nxt)

    # -- timers ----------------------------------------------------------

    def on_timer(self, tag: str, args: tuple) -> None:
        if tag == "discovery":
            self.handle_timeout(*args)
        elif tag == "reply":
            self.emit_rrep(*args)
        elif tag == "backoff":
            self.handle_backoff_end(*args)
        else:
            raise ValueError(f"unknown timer {tag!r}")
