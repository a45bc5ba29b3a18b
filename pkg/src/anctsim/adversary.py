"""Attacker behaviors as overrides of the honest node handlers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import crypto
from .core import AttackKind, Packet, PacketKind, seconds_to_us
from .routing import Node, pr_mac_message, rrep_body

# Forged replies advertise a destination sequence number above anything an
# honest destination reaches in a run.
FORGED_SEQ_BASE = 1 << 30
# Junk flood targets are drawn from ids that no scenario node uses.
JUNK_ID_SPAN = 1_000_000


@dataclass(frozen=True)
class AttackerProfile:
    node: int
    kind: AttackKind
    partner: Optional[int] = None
    flood_rate: float = 0.0

    def __post_init__(self):
        if self.kind is AttackKind.WORMHOLE and self.partner is None:
            raise ValueError("a wormhole attacker needs a partner")
        if self.kind is AttackKind.FLOODING and self.flood_rate <= 0:
            raise ValueError("flood_rate must be > 0")


def build_profiles(kind: AttackKind, attackers, flood_rate: float) -> list:
    """Profiles for the chosen attacker ids; wormholes pair up in order."""
    kind = AttackKind(kind)
    attackers = list(attackers)
    if kind is AttackKind.NONE:
        return []
    if kind is AttackKind.WORMHOLE:
        if len(attackers) % 2:
            raise ValueError("wormhole attackers come in pairs")
        profiles = []
        for a, b in zip(attackers[::2], attackers[1::2]):
            profiles.append(AttackerProfile(a, kind, partner=b))
            profiles.append(AttackerProfile(b, kind, partner=a))
        return profiles
    if kind is AttackKind.FLOODING:
        return [AttackerProfile(a, kind, flood_rate=flood_rate) for a in attackers]
    return [AttackerProfile(a, kind) for a in attackers]


class BlackholeNode(Node):
    """Answers every route request with a forged reply through itself and
    silently discards any data it receives."""

    def __init__(self, node_id, net, profile: AttackerProfile):
        super().__init__(node_id, net)
        self.profile = profile
        self.forged = 0

    def receive(self, frame, sender):
        # Attackers keep no trust state.
        if frame.kind is PacketKind.RREQ:
            self.blackhole_on_rreq(frame, sender)
        elif frame.kind is PacketKind.DATA:
            self.blackhole_on_data(frame)

    def blackhole_on_rreq(self, rreq: Packet, upstream: int) -> Optional[Packet]:
        key = (rreq.source, rreq.route_id, rreq.seq)
        if key in self.seen or rreq.source == self.id:
            return None
        self.seen.add(key)
        self.forged += 1
        route = rreq.hop_record + (self.id, rreq.destination)
        keys = self.net.keys
        own = keys.signing_key(self.id)
        # No access to the source/destination key: the MAC and the
        # destination signature are made with the attacker's own secret.
        mac = crypto.mac_compute(own.secret, pr_mac_message(1, rreq.route_id))
        rrep = Packet(PacketKind.RREP, FORGED_SEQ_BASE + self.forged, rreq.source, rreq.destination,
                      self.id, rreq.route_id, route=route, p_r=1, mac_tag=mac)
        sig = crypto.sign(own, rrep_body(rrep), claimed_signer=rreq.destination)
        rrep = rrep.hop(self.id, signatures=(sig,))
        self.net.unicast(self.id, upstream, rrep)
        return rrep

    def blackhole_on_data(self, frame: Packet) -> None:
        self.net.data_dropped(frame, "attacker", attacker=self.id)


class FloodingNode(Node):
    """Honest relay that also emits junk route requests at ``flood_rate``."""

    def __init__(self, node_id, net, profile: AttackerProfile):
        super().__init__(node_id, net)
        self.profile = profile
        self.junk_sent = 0

    def flood_interval_us(self) -> int:
        return max(seconds_to_us(1.0 / self.profile.flood_rate), 1)

    def flooder_tick(self, rng) -> Packet:
        dest = self.cfg.node_count + rng.randrange(JUNK_ID_SPAN)
        route_id = self.next_seq()
        rreq = Packet(PacketKind.RREQ, route_id, self.id, dest, self.id, route_id, hop_record=(self.id,))
        self.seen.add((self.id, route_id, route_id))
        self.junk_sent += 1
        self.net.broadcast(self.id, rreq)
        return rreq


class WormholeNode(Node):
    """One end of a colluding pair joined by an out-of-band fast tunnel.

    Route requests heard locally are tunnelled to the partner, which
    rebroadcasts them; replies and data crossing the pair use the tunnel.
    """

    def __init__(self, node_id, net, profile: AttackerProfile):
        super().__init__(node_id, net)
        self.profile = profile
        self.partner = profile.partner
        self.drops_data = net.cfg.wormhole_drops_data

    def receive(self, frame, sender):
        # Insiders: they run the protocol but never distrust anyone.
        kind = frame.kind
        if kind is PacketKind.RREQ:
            self.wormhole_relay(frame, sender)
        elif kind is PacketKind.RREP:
            self.handle_rrep(frame, sender)
        elif self.drops_data and frame.destination != self.id:
            self.net.data_dropped(frame, "attacker", attacker=self.id)
        else:
            self.handle_data(frame, sender)

    def wormhole_relay(self, rreq: Packet, upstream: int) -> None:
        if rreq.destination == self.id:
            self.destination_on_rreq(rreq, upstream)
            return
        key = (rreq.source, rreq.route_id, rreq.seq)
        if key in self.seen or self.id in rreq.hop_record:
            return
        self.seen.add(key)
        frame = rreq.hop(self.id, hop_record=rreq.hop_record + (self.id,))
        if upstream == self.partner:
            self.net.broadcast(self.id, frame)
        else:
            self.net.tunnel(self.id, self.partner, frame)

    def forward_control(self, frame, to):
        if to == self.partner:
            self.net.tunnel(self.id, to, frame)
        else:
            super().forward_control(frame, to)

    def handle_rrep(self, rrep, downstream):
        # Insider: signs and relays without judging anyone.
        secure, self.secure = self.secure, False
        try:
            return super().handle_rrep(rrep, downstream)
        finally:
            self.secure = secure

    def open_data(self, frame, sender):
        if sender == self.partner:
            return frame.payload
        return super().open_data(frame, sender)

    def transmit_data(self, frame, plaintext, nxt):
        if nxt == self.partner:
            self.net.tunnel(self.id, nxt, frame.hop(self.id, payload=plaintext))
        else:
            super().transmit_data(frame, plaintext, nxt)

    def forward_data(self, frame, plaintext):
        path = frame.route
        try:
            nxt = path[path.index(self.id) + 1]
        except (ValueError, IndexError):
            self.net.data_dropped(frame, "no_route")
            return
        if nxt != self.partner and not self.net.in_range(self.id, nxt):
            self.net.data_dropped(frame, "no_route")
            return
        self.transmit_data(frame, plaintext, nxt)


ATTACKER_CLASSES = {
    AttackKind.BLACKHOLE: BlackholeNode,
    AttackKind.FLOODING: FloodingNode,
    AttackKind.WORMHOLE: WormholeNode,
}
