"""Deterministic synchronous network simulator.

A protocol is written as a generator function ``prog(net)``. Each ``yield``
hands the simulator one round's outbox (a list of Msg) for all players and
receives back an Inbox with that round's deliveries. Honest-player logic is
evaluated centrally, but by convention each player's messages are computed
only from that player's own state and tape. Sub-protocols compose with
``yield from`` (sequential) and ``parallel`` (lock-step).

Corruption is applied by the simulator between the honest send and delivery,
so protocol code never needs to know who is corrupt.
"""

import hashlib
import json
import random
from dataclasses import dataclass, field as dc_field

BROADCAST = 0

CHANNELS = ("private", "broadcast", "ot", "ot12", "tpe")
FAULT_TYPES = ("passive", "fail-stop", "omission", "byzantine")


class ScriptError(ValueError):
    pass


@dataclass(frozen=True)
class Msg:
    sender: int
    receiver: int
    tag: str
    payload: object
    channel: str = "private"
    # ot12: receiver's choice bit; tpe: the two-party function
    extra: object = None


@dataclass(frozen=True)
class ChannelSpec:
    kind: str
    endpoints: tuple = ()


def send(i, j, tag, payload):
    return Msg(i, j, tag, payload, "private")


def bcast(i, tag, payload):
    return Msg(i, BROADCAST, tag, payload, "broadcast")


class Inbox:
    def __init__(self):
        self._p = {}
        self._b = {}

    def get(self, receiver, sender, tag, default=None):
        return self._p.get((receiver, sender, tag), default)

    def bcast(self, sender, tag, default=None):
        return self._b.get((sender, tag), default)

    def put(self, receiver, sender, tag, payload):
        self._p[(receiver, sender, tag)] = payload

    def put_bcast(self, sender, tag, payload):
        self._b[(sender, tag)] = payload

    def merge(self, other):
        self._p.update(other._p)
        self._b.update(other._b)

    def to_receiver(self, receiver):
        out = [(s, tag, v) for (r, s, tag), v in self._p.items() if r == receiver]
        out += [(s, tag, v) for (s, tag), v in self._b.items()]
        return sorted(out, key=lambda e: (e[0], e[1]))


class Tape(random.Random):
    """Per-party randomness: a Mersenne Twister seeded by SHA-256(seed, label)."""

    def __new__(cls, seed, label):
        return super().__new__(cls)

    def __init__(self, seed, label):
        h = hashlib.sha256(f"{seed}|{label}".encode()).digest()
        super().__init__(int.from_bytes(h, "big"))
        self.label = label


@dataclass
class AdversaryScript:
    fault_type: str = "passive"
    coalition: frozenset = frozenset()
    rushing: bool = False
    halt: dict = dc_field(default_factory=dict)       # player -> first silent round
    omit: object = None                               # (round, msg) -> bool
    tamper: object = None                             # (round, msg, view) -> payload
    inject: object = None                             # (round, view) -> [Msg]
    # protocol-level deviations for Byzantine players, keyed (name, player)
    behavior: dict = dc_field(default_factory=dict)
    max_t: int = None

    def __post_init__(self):
        self.coalition = frozenset(self.coalition)

    def validate(self, n):
        if self.fault_type not in FAULT_TYPES:
            raise ScriptError(f"unknown fault type {self.fault_type!r}")
        bad = [p for p in self.coalition if not 1 <= p <= n]
        if bad:
            raise ScriptError(f"coalition names players outside 1..{n}: {sorted(bad)}")
        if self.max_t is not None and len(self.coalition) > self.max_t:
            raise ScriptError(f"coalition of size {len(self.coalition)} exceeds t={self.max_t}")
        if any(p not in self.coalition for p in self.halt):
            raise ScriptError("halt directives must name coalition members")
        if self.fault_type != "byzantine" and self.behavior:
            raise ScriptError("only Byzantine scripts may deviate from the protocol")
        if self.fault_type == "passive" and (self.halt or self.omit or self.tamper or self.inject):
            raise ScriptError("passive scripts cannot alter messages")
        if self.fault_type == "fail-stop" and (self.omit or self.tamper or self.inject):
            raise ScriptError("fail-stop scripts may only halt players")
        if self.fault_type == "omission" and (self.tamper or self.inject):
            raise ScriptError("omission scripts may only drop messages")


NO_ADVERSARY = AdversaryScript()


@dataclass
class LogEntry:
    round: int
    sender: int
    receiver: int
    channel: str
    tag: str
    payload: object
    bits: int


@dataclass
class ExecutionTrace:
    rounds: list
    outputs: dict
    adversary_view: list
    metrics: tuple
    field_bits: int = 0
    result: object = None   # full protocol return value (honest and corrupt)

    def export_lines(self):
        yield canonical({"field_bits": self.field_bits, "rounds": self.metrics[0]})
        for r in self.rounds:
            for e in r:
                yield canonical({"round": e.round, "sender": e.sender, "receiver": e.receiver,
                                 "channel": e.channel, "tag": e.tag,
                                 "payload": canonical(e.payload).encode().hex()})

    def export(self, path):
        with open(path, "w") as fh:
            for line in self.export_lines():
                fh.write(line + "\n")


def _jsonable(v):
    if isinstance(v, bytes):
        return {"__bytes__": v.hex()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in sorted(v.items(), key=lambda kv: str(kv[0]))}
    if hasattr(v, "coeffs"):
        return [_jsonable(x) for x in v.coeffs]
    if v is None or isinstance(v, (bool, int, str)):
        return v
    if isinstance(v, float):
        return v
    return str(v)


def canonical(v):
    return json.dumps(_jsonable(v), sort_keys=True, separators=(",", ":"))


_INT_ONLY = {int}


def payload_bits(v, field_bits):
    if v is None:
        return 0
    if isinstance(v, bool):
        return 1
    if isinstance(v, int):
        return field_bits
    if isinstance(v, (bytes, str)):
        return 8 * len(v)
    if isinstance(v, dict):
        if set(v) == {"__bytes__"}:
            return 4 * len(v["__bytes__"])
        return sum(payload_bits(x, field_bits) for x in v.values())
    if isinstance(v, (list, tuple)):
        total = 0
        for x in v:
            tx = type(x)
            if tx is int:
                total += field_bits
            elif tx is tuple and x and set(map(type, x)) == _INT_ONLY:
                total += field_bits * len(x)
            else:
                total += payload_bits(x, field_bits)
        return total
    if hasattr(v, "coeffs"):
        return field_bits * len(v.coeffs)
    return 0


def measure(trace):
    """(rounds, bits) recomputed from the message log."""
    if trace is None:
        return (0, 0)
    return (len(trace.rounds), sum(e.bits for r in trace.rounds for e in r))


def measure_exported(lines):
    """Recompute (rounds, bits) from exported JSON lines."""
    it = iter(lines)
    head = json.loads(next(it))
    fb = head["field_bits"]
    bits = 0
    for line in it:
        rec = json.loads(line)
        bits += payload_bits(json.loads(bytes.fromhex(rec["payload"]).decode()), fb)
    return head["rounds"], bits


class Net:
    """What a protocol generator sees: sizes, field, tapes and session ids."""

    def __init__(self, n, field, seed, t=None):
        self.n = n
        self.field = field
        self.seed = seed
        self.t = t
        self.players = list(range(1, n + 1))
        self._tapes = {}
        self._sid = 0
        self.round = 0
        self.adversary = NO_ADVERSARY

    def deviation(self, i, name, default=None):
        """A scripted protocol-level deviation for corrupt player i, if any."""
        if i not in self.adversary.coalition:
            return default
        return self.adversary.behavior.get((name, i), default)

    def tape(self, i):
        if i not in self._tapes:
            self._tapes[i] = Tape(self.seed, f"player{i}")
        return self._tapes[i]

    def shared_tape(self, label):
        if label not in self._tapes:
            self._tapes[label] = Tape(self.seed, label)
        return self._tapes[label]

    def sid(self, prefix="s"):
        self._sid += 1
        return f"{prefix}{self._sid}"


def parallel(*gens):
    """Run sub-protocol generators in lock-step; returns their results."""
    gens = list(gens)
    results = [None] * len(gens)
    pending = {}
    for k, g in enumerate(gens):
        try:
            pending[k] = next(g)
        except StopIteration as stop:
            results[k] = stop.value
    while pending:
        out = []
        for k in sorted(pending):
            out.extend(pending[k])
        inbox = yield out
        nxt = {}
        for k in sorted(pending):
            try:
                nxt[k] = gens[k].send(inbox)
            except StopIteration as stop:
                results[k] = stop.value
        pending = nxt
    return results


def local(value=None):
    """A zero-round protocol step."""
    return value
    yield  # pragma: no cover


class Simulator:
    def __init__(self, n, field, adversary=None, seed=0, t=None, record=True):
        self.adv = adversary or NO_ADVERSARY
        self.adv.validate(n)
        self.n = n
        self.field = field
        self.seed = seed
        self.record = record
        self.net = Net(n, field, seed, t)
        self.net.adversary = self.adv
        self.channel_tape = Tape(seed, "channels")
        self.adv_tape = Tape(seed, "adversary")
        self.net.adversary_tape = self.adv_tape

    def _deliver_one(self, m, inbox, tpe_pending):
        if m.channel == "broadcast" or m.receiver == BROADCAST:
            inbox.put_bcast(m.sender, m.tag, m.payload)
            return m.payload
        if m.channel == "ot":
            v = m.payload if self.channel_tape.random() < 0.5 else None
            inbox.put(m.receiver, m.sender, m.tag, v)
            return v
        if m.channel == "ot12":
            v = None if m.payload is None else m.payload[1 if m.extra else 0]
            inbox.put(m.receiver, m.sender, m.tag, v)
            return v
        if m.channel == "tpe":
            tpe_pending.setdefault(m.tag, {})[m.sender] = m
            return None
        inbox.put(m.receiver, m.sender, m.tag, m.payload)
        return m.payload

    def run(self, prog):
        adv = self.adv
        C = adv.coalition
        fb = self.field.bits if self.field is not None else 0
        gen = prog(self.net)
        rounds, view = [], []
        result = None
        try:
            outbox = next(gen)
        except StopIteration as stop:
            outbox, result = None, stop.value
        r = 0
        while outbox is not None:
            r += 1
            self.net.round = r
            honest, corrupt = [], []
            for m in outbox:
                (corrupt if m.sender in C else honest).append(m)
            # the coalition sees honest traffic addressed to it before it
            # fixes its own messages when rushing
            seen = [(r, m.sender, m.receiver, m.tag, m.payload) for m in honest
                    if m.receiver in C or m.receiver == BROADCAST]
            if adv.rushing:
                view.extend(seen)
            fixed = []
            for m in corrupt:
                halt_at = adv.halt.get(m.sender)
                if halt_at is not None and r >= halt_at:
                    m = Msg(m.sender, m.receiver, m.tag, None, m.channel, m.extra)
                elif adv.omit is not None and adv.omit(r, m):
                    m = Msg(m.sender, m.receiver, m.tag, None, m.channel, m.extra)
                elif adv.tamper is not None:
                    m = Msg(m.sender, m.receiver, m.tag, adv.tamper(r, m, view), m.channel, m.extra)
                fixed.append(m)
            if adv.inject is not None:
                extra = adv.inject(r, view) or []
                for m in extra:
                    if m.sender not in C:
                        raise ScriptError("adversary cannot inject messages for honest players")
                fixed.extend(extra)
            if not adv.rushing:
                view.extend(seen)
            inbox = Inbox()
            tpe_pending = {}
            log = []
            for m in sorted(honest + fixed, key=lambda m: (m.sender, m.receiver, m.tag)):
                delivered = self._deliver_one(m, inbox, tpe_pending)
                if m.receiver in C and m.sender not in C and m.channel in ("ot", "ot12"):
                    view.append((r, m.sender, m.receiver, m.tag, delivered))
                log.append(LogEntry(r, m.sender, m.receiver, m.channel, m.tag,
                                    m.payload if self.record else None,
                                    payload_bits(m.payload, fb)))
            for tag, pair in sorted(tpe_pending.items()):
                self._two_party_eval(tag, pair, inbox, view, r)
            rounds.append(log)
            try:
                outbox = gen.send(inbox)
            except StopIteration as stop:
                outbox, result = None, stop.value
        outputs = {}
        if isinstance(result, dict):
            outputs = {i: (None if i in C else v) for i, v in result.items()}
        bits = sum(e.bits for lg in rounds for e in lg)
        return ExecutionTrace(rounds, outputs, view, (len(rounds), bits), fb, result)

    def _two_party_eval(self, tag, pair, inbox, view, r):
        C = self.adv.coalition
        parties = sorted(pair)
        if len(parties) != 2:
            # a lone participant gets nothing back
            for p, m in pair.items():
                inbox.put(p, m.receiver, tag, None)
            return
        a, b = parties
        ma, mb = pair[a], pair[b]
        fn = ma.extra if ma.extra is not None else mb.extra
        if ma.payload is None or mb.payload is None:
            oa = ob = None
        else:
            oa, ob = fn(ma.payload, mb.payload)
        inbox.put(a, b, tag, oa)
        inbox.put(b, a, tag, ob)
        if a in C:
            view.append((r, b, a, tag, oa))
        if b in C:
            view.append((r, a, b, tag, ob))


def execute(prog, n, field, adversary=None, seed=0, t=None, record=True):
    return Simulator(n, field, adversary, seed, t, record).run(prog)


# -- player-machine adapter ----------------------------------------------------

@dataclass
class PlayerMachine:
    """Pure per-player transition function.

    transition(state, inbound, tape) -> (state, outbound) where inbound is a
    sorted list of (sender, tag, payload) and outbound a list of Msg.
    """
    id: int
    init_state: object
    transition: object
    output_fn: object
    done: object = None      # state -> bool; default: stop after max_rounds


def machines_program(players, max_rounds=64):
    def prog(net):
        states = {p.id: p.init_state for p in players}
        inbound = {p.id: [] for p in players}
        for _ in range(max_rounds):
            out = []
            active = False
            for p in players:
                if p.done is not None and p.done(states[p.id]):
                    continue
                active = True
                states[p.id], msgs = p.transition(states[p.id], inbound[p.id], net.tape(p.id))
                out.extend(msgs)
            if not active or not out:
                break
            inbox = yield out
            inbound = {p.id: inbox.to_receiver(p.id) for p in players}
        return {p.id: p.output_fn(states[p.id]) for p in players}
    return prog


def run_protocol(players, channels=(), adversary=None, seed=0, field=None, max_rounds=64):
    n = max(p.id for p in players)
    ids = sorted(p.id for p in players)
    if ids != list(range(1, n + 1)):
        raise ScriptError("player ids must be 1..n")
    for c in channels:
        kind = c.kind if isinstance(c, ChannelSpec) else c
        if kind not in CHANNELS:
            raise ScriptError(f"unknown channel kind {kind!r}")
        if isinstance(c, ChannelSpec) and any(not 1 <= e <= n for e in c.endpoints):
            raise ScriptError("channel endpoint out of range")
    return execute(machines_program(players, max_rounds), n, field, adversary, seed)
