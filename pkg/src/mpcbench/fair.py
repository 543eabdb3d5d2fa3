"""Computation when most players may be faulty.

Sum-sharing splits a secret into n pieces that add up to it, so nobody
short of the full set learns anything. Products of pieces held by two
different players go through the ideal two-party evaluation channel of
the simulator. A player who halts is noticed by whoever misses its
message; that player broadcasts CHEATING and everyone stops.

Fair disclosure opens the output slowly as F xor c_j for coins c_j that
come up 0 with probability 1/2 + 1/k, so a quitter is never far ahead.

Yao gates let one player hand another an encrypted circuit: a key per wire
value, four tagged entries per gate, and exactly one entry that the holder
of one key per input wire can open.
"""

import hashlib
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from itertools import product

from .mpc_third import BGW
from .netsim import BROADCAST, Msg, bcast, send

CHEATING = "CHEATING"


class Cheating(RuntimeError):
    def __init__(self, detectors, round_no=None):
        super().__init__(f"halt noticed by players {sorted(detectors)}")
        self.detectors = frozenset(detectors)
        self.round_no = round_no


class YaoError(ValueError):
    pass


# -- sum-sharing -------------------------------------------------------------------------

@dataclass
class SumHandle:
    pieces: dict
    ok: bool = True


def mult_su_pair(F, x, r, y, s):
    """The two-party function behind a product of pieces: alpha = xy + r + s
    goes to the holder of x, beta = -r - s to the holder of y."""
    rs = F.add(r, s)
    return F.add(F.mul(x, y), rs), F.neg(rs)


def _tpe_fn(F):
    def fn(pa, pb):
        # payloads are (role, piece, randomness); outputs follow the sorted order
        xa, ya = (pa, pb) if pa[0] == "x" else (pb, pa)
        alpha, beta = mult_su_pair(F, xa[1], xa[2], ya[1], ya[2])
        return (alpha, beta) if pa[0] == "x" else (beta, alpha)
    return fn


class SumSuite:
    """Sum-shared arithmetic for any number of faults, fail-stop detection included.

    Every exchange checks for missing messages; a miss triggers one round of
    CHEATING broadcasts by the players who noticed, then raises Cheating.
    """

    def __init__(self, net):
        self.net = net
        self.P = list(net.players)
        self.n = len(self.P)
        self.F = net.field
        self.round = 0
        self.tpe = _tpe_fn(self.F)

    # -- plumbing

    def _exchange(self, msgs):
        inbox = yield msgs
        self.round += 1
        detectors = set()
        for m in msgs:
            if m.receiver == BROADCAST:
                if inbox.bcast(m.sender, m.tag) is None:
                    detectors |= set(self.P) - {m.sender}
            elif m.channel == "tpe":
                if inbox.get(m.sender, m.receiver, m.tag) is None:
                    detectors.add(m.sender)
            elif inbox.get(m.receiver, m.sender, m.tag) is None:
                detectors.add(m.receiver)
        if detectors:
            sid = self.net.sid("cheat")
            yield [bcast(d, sid, CHEATING) for d in sorted(detectors)]
            raise Cheating(detectors, self.round)
        return inbox

    # -- sharing and local arithmetic

    def constant(self, c):
        c = self.F.reduce(c)
        return SumHandle({i: (c if i == self.P[0] else 0) for i in self.P})

    def lin(self, c0, terms):
        F = self.F
        terms = [(F.reduce(c), h) for c, h in terms]
        pieces = {}
        for i in self.P:
            acc = F.reduce(c0) if i == self.P[0] else 0
            for c, h in terms:
                acc = F.add(acc, F.mul(c, h.pieces[i]))
            pieces[i] = acc
        return SumHandle(pieces)

    def add(self, a, b):
        return self.lin(0, [(1, a), (1, b)])

    def local_bits(self, count):
        """count random sum-shared values whose pieces are private 0/1 bits.

        Over a field of characteristic 2 the sum of the bits is their xor,
        a uniform bit as long as one player is honest.
        """
        hs = []
        for _ in range(count):
            hs.append(SumHandle({i: self.net.tape(i).getrandbits(1) for i in self.P}))
        return hs

    def share_many(self, deals):
        F = self.F
        sid = self.net.sid("ssu")
        msgs, plans = [], []
        for k, (owner, v) in enumerate(deals):
            tape = self.net.tape(owner)
            rest = [p for p in self.P if p != owner]
            pieces = {p: F.random(tape) for p in rest}
            pieces[owner] = F.sub(F.reduce(v), F.sum(pieces.values()))
            for p in rest:
                msgs.append(send(owner, p, f"{sid}.{k}", pieces[p]))
            plans.append((owner, pieces[owner]))
        inbox = yield from self._exchange(msgs)
        out = []
        for k, (owner, own) in enumerate(plans):
            got = {p: inbox.get(p, owner, f"{sid}.{k}") for p in self.P if p != owner}
            got[owner] = own
            out.append(SumHandle(got))
        return out

    def share(self, owner, v):
        return (yield from self.share_many([(owner, v)]))[0]

    # -- products

    def multiply_many(self, pairs):
        if not pairs:
            return []
        F = self.F
        sid = self.net.sid("msu")
        msgs = []
        for k, (a, b) in enumerate(pairs):
            for i in self.P:
                for j in self.P:
                    if i == j:
                        continue
                    tag = f"{sid}.{k}.{i}.{j}"
                    r = F.random(self.net.tape(i))
                    s = F.random(self.net.tape(j))
                    msgs.append(Msg(i, j, tag, ("x", a.pieces[i], r), "tpe", self.tpe))
                    msgs.append(Msg(j, i, tag, ("y", b.pieces[j], s), "tpe", self.tpe))
        inbox = yield from self._exchange(msgs)
        out = []
        for k, (a, b) in enumerate(pairs):
            pieces = {}
            for i in self.P:
                acc = F.mul(a.pieces[i], b.pieces[i])
                for j in self.P:
                    if j == i:
                        continue
                    alpha = inbox.get(i, j, f"{sid}.{k}.{i}.{j}")
                    beta = inbox.get(i, j, f"{sid}.{k}.{j}.{i}")
                    acc = F.add(acc, F.add(alpha, beta))
                pieces[i] = acc
            out.append(SumHandle(pieces))
        return out

    def multiply(self, a, b):
        return (yield from self.multiply_many([(a, b)]))[0]

    def xor_many(self, pairs):
        """x xor y for shared bits: plain addition in characteristic 2,
        x + y - 2xy otherwise."""
        if self.F.char == 2:
            return [self.add(x, y) for x, y in pairs]
        prods = yield from self.multiply_many(pairs)
        return [self.lin(0, [(1, x), (1, y), (-2, xy)]) for (x, y), xy in zip(pairs, prods)]

    # -- opening

    def reveal_many(self, handles):
        sid = self.net.sid("rsu")
        msgs = [bcast(i, f"{sid}.{k}", h.pieces[i]) for k, h in enumerate(handles) for i in self.P]
        inbox = yield from self._exchange(msgs)
        return [self.F.sum(inbox.bcast(i, f"{sid}.{k}") for i in self.P) for k in range(len(handles))]

    def reveal(self, h):
        return (yield from self.reveal_many([h]))[0]

    def reveal_to_many(self, items):
        sid = self.net.sid("rtu")
        msgs = []
        for k, (h, p) in enumerate(items):
            msgs += [send(i, p, f"{sid}.{k}", h.pieces[i]) for i in self.P if i != p]
        inbox = yield from self._exchange(msgs)
        out = []
        for k, (h, p) in enumerate(items):
            got = [inbox.get(p, i, f"{sid}.{k}") for i in self.P if i != p]
            out.append(self.F.sum(got + [h.pieces[p]]))
        return out

    # same level-by-level walk as the threshold suite
    eval_circuit = BGW.eval_circuit
    _lin_gate = BGW._lin_gate


def eval_semi(circuit, inputs, default=0):
    """Program evaluating circuit on sum-shares; a halt makes every honest
    player output (CHEATING, None)."""
    def prog(net):
        c = SumSuite(net)
        try:
            out = yield from c.eval_circuit(circuit, inputs, default)
        except Cheating:
            return {i: (CHEATING, None) for i in net.players}
        return {i: tuple(out[i]) for i in net.players}
    return prog


# -- biased coins and gradual disclosure -------------------------------------------------------

def coin_threshold(k, bits):
    """T with T / 2^bits = 1/2 - 1/k rounded to the nearest integer; exact
    whenever k is a power of two no larger than 2^(bits-1)."""
    return round((1 << bits) * (Fraction(1, 2) - Fraction(1, k)))


def biased_coins(c, count, k, bits=8):
    """count shared coins, each 1 with probability T / 2^bits (about 1/2 - 1/k).

    The uniform bits come from every player's private bits folded by xor.
    The comparison against T walks the bits from the top, batching every
    coin's products into the same rounds.
    """
    F = c.F
    if F.char == 2:
        ubits = [c.local_bits(bits) for _ in range(count)]
    else:
        ubits = []
        raw = yield from c.share_many([(p, c.net.tape(p).getrandbits(1))
                                       for _ in range(count) for _ in range(bits) for p in c.P])
        pos = 0
        rows = []
        for _ in range(count * bits):
            rows.append(raw[pos:pos + c.n])
            pos += c.n
        acc = [r[0] for r in rows]
        for step in range(1, c.n):
            acc = yield from c.xor_many([(a, r[step]) for a, r in zip(acc, rows)])
        ubits = [acc[j * bits:(j + 1) * bits] for j in range(count)]
    T = coin_threshold(k, bits)
    tb = [(T >> (bits - 1 - i)) & 1 for i in range(bits)]
    one_minus = lambda h: c.lin(1, [(F.neg(1), h)])
    eqs = [[s[i] if tb[i] else one_minus(s[i]) for i in range(bits)] for s in ubits]
    # prefix products of the equality literals, one batched round per bit
    prefixes = [[c.constant(1)] for _ in range(count)]
    terms = [[] for _ in range(count)]
    for i in range(bits):
        reqs = []
        for j in range(count):
            if tb[i]:
                reqs.append((prefixes[j][-1], one_minus(ubits[j][i])))
            if i < bits - 1:
                reqs.append((prefixes[j][-1], eqs[j][i]))
        got = yield from c.multiply_many(reqs)
        pos = 0
        for j in range(count):
            if tb[i]:
                terms[j].append(got[pos])
                pos += 1
            if i < bits - 1:
                prefixes[j].append(got[pos])
                pos += 1
    return [c.lin(0, [(1, h) for h in terms[j]]) for j in range(count)]


def majority_guess(values, tie=0):
    ones = sum(1 for v in values if v == 1)
    zeros = len(values) - ones
    if ones == zeros:
        return tie
    return 1 if ones > zeros else 0


def fair_disclose(c, f_handle, k, rounds=None, bits=8):
    """Open the shared bit F slowly; returns {player: report}.

    Coins are drawn and masked with F up front, then F xor c_j is opened one
    per round. A completed run ends with F itself opened. On a halt every
    honest player stops with the majority of what it has seen.
    """
    if k < 3:
        raise ValueError("fairness parameter k must be at least 3")
    R = k ** 3 + 1 if rounds is None else rounds
    seen = []
    try:
        coins = yield from biased_coins(c, R, k, bits)
        masked = yield from c.xor_many([(f_handle, h) for h in coins])
        for h in masked:
            seen.append((yield from c.reveal(h)))
        final = yield from c.reveal(f_handle)
    except Cheating:
        rep = {"status": CHEATING, "guess": majority_guess(seen), "seen": tuple(seen), "value": None}
        return {i: rep for i in c.P}
    rep = {"status": "ok", "guess": majority_guess(seen), "seen": tuple(seen), "value": final}
    return {i: rep for i in c.P}


def ideal_coin(F_value, k, rng, rounds=None):
    """The ideal coin host: the list of F xor c_j it would announce."""
    R = k ** 3 + 1 if rounds is None else rounds
    p1 = 0.5 - 1.0 / k
    return [F_value ^ (1 if rng.random() < p1 else 0) for _ in range(R)]


def chernoff_bound(k):
    return math.exp(-k / 2)


# -- odds -------------------------------------------------------------------------------------------

def odds(p):
    p = Fraction(p)
    if p == 1:
        return math.inf
    return p / (1 - p)


def posterior(seen, k, prior0=Fraction(1, 2)):
    """Pr[F = 0 | announced values] under the biased-coin model, exactly."""
    g0 = Fraction(1, 2) + Fraction(1, k)
    g1 = 1 - g0
    zeros = sum(1 for v in seen if v == 0)
    ones = len(seen) - zeros
    like0 = g0 ** zeros * g1 ** ones
    like1 = g1 ** zeros * g0 ** ones
    prior0 = Fraction(prior0)
    return like0 * prior0 / (like0 * prior0 + like1 * (1 - prior0))


def likelihood_ratio(k):
    """L = (1/2 + 1/k) / (1/2 - 1/k), the most one announcement can move the odds."""
    return (Fraction(1, 2) + Fraction(1, k)) / (Fraction(1, 2) - Fraction(1, k))


@dataclass
class OddsLedger:
    """Running posteriors for players who have seen different prefixes."""
    k: int
    prior0: Fraction = Fraction(1, 2)
    seen: dict = dc_field(default_factory=dict)
    history: dict = dc_field(default_factory=dict)

    def observe(self, player, value):
        self.seen.setdefault(player, []).append(value)
        self.history.setdefault(player, []).append(self.p(player, 0))

    def p(self, player, d):
        p0 = posterior(self.seen.get(player, []), self.k, self.prior0)
        return p0 if d == 0 else 1 - p0

    def odds(self, player, d):
        return odds(self.p(player, d))

    def ratio(self, a, i, d):
        """odds of player a over odds of player i that F = d."""
        oa, oi = self.odds(a, d), self.odds(i, d)
        if oa == math.inf:
            return math.inf
        return oa / oi


def max_step_ratio(k, max_len, prior0=Fraction(1, 2)):
    """Largest factor by which one more announcement raises the odds of
    either output, over every announced prefix of length < max_len."""
    worst = Fraction(0)
    where = None
    for length in range(max_len):
        for seq in product((0, 1), repeat=length):
            base = posterior(seq, k, prior0)
            for nxt in (0, 1):
                after = posterior(seq + (nxt,), k, prior0)
                for b0, b1 in ((base, after), (1 - base, 1 - after)):
                    r = odds(b1) / odds(b0)
                    if r > worst:
                        worst, where = r, (seq, nxt)
    return worst, where


# -- Yao gates -----------------------------------------------------------------------------------------

def prg(seed=b""):
    """Seeded keyed expander standing in for a pseudorandom generator.

    gen(key, k, nbits) returns the first nbits of SHAKE-256 over seed and
    the k-bit key, as an int (first bit most significant).
    """
    def gen(key, k, nbits):
        h = hashlib.shake_256(seed + b"|" + key.to_bytes(k // 8, "big"))
        return int.from_bytes(h.digest(nbits // 8), "big")
    return gen


DEFAULT_PRG = prg(b"mpcbench")


def _gate_fn(g):
    if callable(g):
        return g
    g = tuple(g)
    return lambda u, v: g[2 * u + v]


def _tag_masks(gen, key, k, width=1):
    """(Tag, Mask(0, key), Mask(1, key)) for masks of width*k bits."""
    mw = width * k
    blob = gen(key, k, (1 + 2 * width) * k)
    total = (1 + 2 * width) * k
    tag = blob >> (total - k)
    m0 = (blob >> mw) & ((1 << mw) - 1)
    m1 = blob & ((1 << mw) - 1)
    return tag, m0, m1


@dataclass
class YaoGate:
    entries: list        # index 2a+b -> (tag of X_a, tag of Y_b, masked Z)
    k: int
    width: int = 1       # contributors per key vector
    voided: frozenset = frozenset()


def yao_gate_encode(g, X, Y, Z, omega, k, gen=DEFAULT_PRG):
    """Two-input gate table for keys X=(X0, X1), Y, Z and translations omega."""
    if k % 8:
        raise YaoError("key length must be a multiple of 8")
    fn = _gate_fn(g)
    wx, wy, wz = omega
    tm = {("x", a): _tag_masks(gen, X[a], k) for a in (0, 1)}
    tm.update({("y", b): _tag_masks(gen, Y[b], k) for b in (0, 1)})
    entries = []
    for a in (0, 1):
        for b in (0, 1):
            tx, *mx = tm[("x", a)]
            ty, *my = tm[("y", b)]
            z = Z[fn(a ^ wx, b ^ wy) ^ wz]
            entries.append((tx, ty, mx[b] ^ my[a] ^ z))
    return YaoGate(entries, k)


def yao_gate_decode(gate, X, Y, gen=DEFAULT_PRG):
    """Output key from one key per input wire; also returns the matched (alpha, beta)."""
    k = gate.k
    tx, *mx = _tag_masks(gen, X, k)
    ty, *my = _tag_masks(gen, Y, k)
    for alpha in (0, 1):
        for beta in (0, 1):
            e = gate.entries[2 * alpha + beta]
            if e[0] == tx and e[1] == ty:
                return e[2] ^ mx[beta] ^ my[alpha], (alpha, beta)
    raise YaoError("no entry matches the input keys")


def _vec_tag(gen, vec, k, n, voided):
    out = 0
    for i in range(n):
        t = 0 if (i + 1) in voided else _tag_masks(gen, vec[i], k, n)[0]
        out = (out << k) | t
    return out


def _vec_mask(gen, vec, k, n, voided, a):
    out = 0
    for i in range(n):
        if (i + 1) not in voided:
            out ^= _tag_masks(gen, vec[i], k, n)[1 + a]
    return out


def pack_keys(vec, k):
    out = 0
    for key in vec:
        out = (out << k) | key
    return out


def unpack_keys(v, k, n):
    return tuple((v >> (k * (n - 1 - i))) & ((1 << k) - 1) for i in range(n))


def generalized_gate_encode(g, X, Y, Z, omega, k, voided=(), gen=DEFAULT_PRG):
    """Gate over key vectors with one k-bit component per contributor.

    Contributors listed in voided (numbered from 1) add nothing to tags or
    masks. Z=(Z0, Z1) are vectors; the third segment hides the packed vector.
    """
    if k % 8:
        raise YaoError("key length must be a multiple of 8")
    n = len(X[0])
    voided = frozenset(voided)
    if voided >= set(range(1, n + 1)):
        raise YaoError("every contributor is voided; tags would all be zero")
    fn = _gate_fn(g)
    wx, wy, wz = omega
    entries = []
    for a in (0, 1):
        for b in (0, 1):
            z = pack_keys(Z[fn(a ^ wx, b ^ wy) ^ wz], k)
            entries.append((_vec_tag(gen, X[a], k, n, voided), _vec_tag(gen, Y[b], k, n, voided),
                            _vec_mask(gen, X[a], k, n, voided, b) ^ _vec_mask(gen, Y[b], k, n, voided, a) ^ z))
    return YaoGate(entries, k, n, voided)


def generalized_gate_decode(gate, X, Y, gen=DEFAULT_PRG):
    k, n, S = gate.k, gate.width, gate.voided
    tx, ty = _vec_tag(gen, X, k, n, S), _vec_tag(gen, Y, k, n, S)
    for alpha in (0, 1):
        for beta in (0, 1):
            e = gate.entries[2 * alpha + beta]
            if e[0] == tx and e[1] == ty:
                z = e[2] ^ _vec_mask(gen, X, k, n, S, beta) ^ _vec_mask(gen, Y, k, n, S, alpha)
                return unpack_keys(z, k, n)
    raise YaoError("no entry matches the input key vectors")


# -- layered boolean circuits and two-party evaluation -----------------------------------------------

IDENTITY_X = (0, 0, 1, 1)


@dataclass
class BoolCircuit:
    """Layered two-input boolean circuit.

    Layer 0 is the inputs: m1 bits of player 1 then m2 bits of player 2.
    Each later layer is a list of (table, left, right), where table is
    g(u, v) at index 2u + v and left/right index the previous layer.
    The last layer is the output.
    """
    m1: int
    m2: int
    layers: list

    def evaluate(self, x1, x2):
        vals = list(x1) + list(x2)
        for layer in self.layers:
            vals = [tab[2 * vals[l] + vals[r]] for tab, l, r in layer]
        return vals

    def wire_values(self, x1, x2):
        vals = [list(x1) + list(x2)]
        for layer in self.layers:
            prev = vals[-1]
            vals.append([tab[2 * prev[l] + prev[r]] for tab, l, r in layer])
        return vals

    @classmethod
    def from_gates(cls, m1, m2, gates, outputs):
        """Levelize gates given as (table, a, b) over wire ids, inputs first,
        inserting identity gates so no wire skips a layer."""
        nin = m1 + m2
        depth = {w: 0 for w in range(nin)}
        for idx, (_, a, b) in enumerate(gates):
            depth[nin + idx] = 1 + max(depth[a], depth[b])
        D = max([depth[o] for o in outputs] + [1])
        # the wires needed on each layer
        need = [set() for _ in range(D + 1)]
        need[D] = set(outputs)
        for lvl in range(D, 0, -1):
            for w in need[lvl]:
                if depth[w] == lvl and w >= nin:
                    _, a, b = gates[w - nin]
                    need[lvl - 1] |= {a, b}
                else:
                    need[lvl - 1].add(w)
        order = [list(range(nin))]
        layers = []
        for lvl in range(1, D + 1):
            wires = sorted(need[lvl]) if lvl < D else list(outputs)
            pos = {w: i for i, w in enumerate(order[-1])}
            layer = []
            for w in wires:
                if depth[w] == lvl and w >= nin:
                    tab, a, b = gates[w - nin]
                    layer.append((tuple(tab), pos[a], pos[b]))
                else:
                    layer.append((IDENTITY_X, pos[w], pos[w]))
            layers.append(layer)
            order.append(wires)
        return cls(m1, m2, layers)


@dataclass
class EncryptedCircuit:
    gates: list          # per layer, per position: YaoGate
    out_omega: tuple
    out_tags: tuple      # (Tag(Z0), Tag(Z1)) per output wire
    k: int

    def to_payload(self):
        rows = tuple(tuple(tuple(e) for g in row for e in g.entries) for row in self.gates)
        return (self.k, rows, self.out_omega, self.out_tags)

    @classmethod
    def from_payload(cls, p):
        k, rows, om, tags = p
        gates = [[YaoGate([tuple(e) for e in row[i:i + 4]], k) for i in range(0, len(row), 4)]
                 for row in rows]
        return cls(gates, tuple(om), tuple(tuple(t) for t in tags), k)


def make_circuit(circuit, rng, k=16, gen=DEFAULT_PRG, omega=None):
    """Player 1's wire keys W, translation bits w and the encrypted gates.

    omega, if given, fixes the translation bits as a list per layer.
    """
    widths = [circuit.m1 + circuit.m2] + [len(layer) for layer in circuit.layers]
    W = [[(rng.getrandbits(k), rng.getrandbits(k)) for _ in range(w)] for w in widths]
    for row in W:
        for j, (a, b) in enumerate(row):
            while b == a:
                b = rng.getrandbits(k)
            row[j] = (a, b)
    w = omega or [[rng.getrandbits(1) for _ in range(wd)] for wd in widths]
    gates = []
    for i, layer in enumerate(circuit.layers, 1):
        row = []
        for j, (tab, l, r) in enumerate(layer):
            row.append(yao_gate_encode(tab, W[i - 1][l], W[i - 1][r], W[i][j],
                                       (w[i - 1][l], w[i - 1][r], w[i][j]), k, gen))
        gates.append(row)
    out_tags = tuple(tuple(_tag_masks(gen, key, k)[0] for key in pair) for pair in W[-1])
    return W, w, EncryptedCircuit(gates, tuple(w[-1]), out_tags, k)


def in_keys(W, w, x, start=0):
    """Keys for input bits x on wires start.. : W[0][J][w xor x]."""
    return [W[0][start + i][w[0][start + i] ^ b] for i, b in enumerate(x)]


def decode_circuit(circuit, ec, keys, gen=DEFAULT_PRG):
    """Percolate input keys through the gates; returns (output bits, matched index pairs)."""
    cur = list(keys)
    seen = []
    for layer, row in zip(circuit.layers, ec.gates):
        nxt = []
        for (tab, l, r), gate in zip(layer, row):
            z, ab = yao_gate_decode(gate, cur[l], cur[r], gen)
            seen.append(ab)
            nxt.append(z)
        cur = nxt
    out = []
    for j, z in enumerate(cur):
        t = _tag_masks(gen, z, ec.k)[0]
        if t not in ec.out_tags[j]:
            raise YaoError("output key matches neither output tag")
        out.append(ec.out_tags[j].index(t) ^ ec.out_omega[j])
    return out, seen


def eval2(circuit, x1, x2, k=16, gen=DEFAULT_PRG):
    """Two-player program: player 1 garbles, player 2 fetches its input keys
    by 1-out-of-2 transfer and evaluates. Player 2 outputs F(x1, x2)."""
    def prog(net):
        W, w, ec = make_circuit(circuit, net.tape(1), k, gen)
        sid = net.sid("e2")
        ec1 = (ec.to_payload(), tuple(in_keys(W, w, x1)))
        msgs = [send(1, 2, f"{sid}.ec", ec1)]
        for i, bit in enumerate(x2):
            J = circuit.m1 + i
            # offered in wire-value order so choosing x picks W[0][J][w xor x]
            pair = (W[0][J][w[0][J]], W[0][J][1 ^ w[0][J]])
            msgs.append(Msg(1, 2, f"{sid}.ot.{i}", pair, "ot12", bit))
        inbox = yield msgs
        got, k1 = inbox.get(2, 1, f"{sid}.ec")
        k2 = [inbox.get(2, 1, f"{sid}.ot.{i}") for i in range(len(x2))]
        out, _ = decode_circuit(circuit, EncryptedCircuit.from_payload(got), list(k1) + k2, gen)
        return {1: None, 2: tuple(out)}
    return prog
