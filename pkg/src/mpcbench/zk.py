"""Proofs about shared secrets, envelopes and notarized envelopes.

A predicate proof checks every gate of the prover's circuit at once: the
prover shares each gate's output, the network forms the differences
between claimed outputs and the gates applied to the claimed inputs, and
the verifier sees those differences. An honest prover makes them all
zero, so the verifier learns nothing else.

A notarized envelope commits to x together with a claim F(x) = y. It
runs a locally random reduction from F to G inside envelopes: the claims
about the queries and the interpolation are small and are checked
directly, while the expensive G is checked by opening one random
query/answer pair per repetition.
"""

from dataclasses import dataclass, field as dc_field

from .field import lagrange_weights
from .lrr import boolean_lrr, lrr_query_from_coeffs, lrr_answer, smallest_prime_above
from .field import prime_field
from .mpc_third import ArithmeticCircuit, Gate
from .netsim import bcast, local, send


class EnvelopeError(RuntimeError):
    pass


# -- circuits for predicates ----------------------------------------------------------

def poly_circuit(monomials, nvars, n=1, const=0):
    """Circuit for c0 + sum coef * prod of inputs; monomials are
    (coef, [input index from 1]). Inputs are owned by player 1."""
    gates = [Gate(f"0.{j}", "in", owner=1, layer=0) for j in range(1, nvars + 1)]
    depth = 0
    terms = []
    c0 = const
    for k, (coef, vs) in enumerate(monomials):
        if not vs:
            c0 += coef
            continue
        cur = f"0.{vs[0]}"
        for step, v in enumerate(vs[1:], 1):
            gid = f"{step}.{k + 1}"
            gates.append(Gate(gid, "mul", (), (cur, f"0.{v}"), layer=step))
            cur = gid
        depth = max(depth, len(vs) - 1)
        terms.append((coef, cur))
    top = f"{depth + 1}.1"
    gates.append(Gate(top, "lin", tuple([c0] + [c for c, _ in terms]), tuple(r for _, r in terms),
                      layer=depth + 1))
    return ArithmeticCircuit(gates, [(top, [1])], n)


def monomial_circuit(F, poly, n=1):
    """Circuit for a GroupedPoly or MultiPoly."""
    if hasattr(poly, "psi"):
        mons = [(c, [poly.psi(b, mask) for b, mask in enumerate(masks)]) for masks, c in poly.terms.items()]
        return poly_circuit(mons, poly.nvars, n)
    nv = max((max(m) for m in poly.terms if m), default=0)
    return poly_circuit([(c, list(m)) for m, c in poly.terms.items()], nv, n)


def linear_circuit(c0, coefs, n=1):
    """Single linear gate over len(coefs) inputs."""
    gates = [Gate(f"0.{j}", "in", owner=1, layer=0) for j in range(1, len(coefs) + 1)]
    gates.append(Gate("1.1", "lin", tuple([c0] + list(coefs)),
                      tuple(f"0.{j}" for j in range(1, len(coefs) + 1)), layer=1))
    return ArithmeticCircuit(gates, [("1.1", [1])], n)


def gate_values(F, circuit, in_values):
    """Every gate's value with the circuit inputs taken in order."""
    val = {}
    ins = circuit.inputs()
    if len(ins) != len(in_values):
        raise ValueError(f"circuit has {len(ins)} inputs, got {len(in_values)} values")
    for g, v in zip(ins, in_values):
        val[g.id] = F.reduce(v)
    for g in sorted(circuit.gates, key=lambda g: g.layer):
        if g.kind == "in":
            continue
        if g.kind == "const":
            val[g.id] = F.reduce(g.consts[0])
        elif g.kind == "lin":
            acc = F.reduce(g.consts[0])
            for cc, r in zip(g.consts[1:], g.refs):
                acc = F.add(acc, F.mul(F.reduce(cc), val[r]))
            val[g.id] = acc
        else:
            val[g.id] = F.mul(val[g.refs[0]], val[g.refs[1]])
    return val


# -- proving predicates on secrets ------------------------------------------------------------

def prove_predicates(c, stmts, verifiers=None, vote=True):
    """Run several gate-wise proofs in parallel.

    stmts: list of (prover, circuit, input handles, input values known to
    the prover, claimed output handle). Each verifier accepts a statement
    iff all its gate differences open to zero. With vote=True every
    verifier broadcasts its verdicts and a statement stands when a strict
    majority of the verifiers accepts it; otherwise the verdicts of the
    only verifier are returned.
    """
    F, net = c.F, c.net
    verifiers = list(verifiers) if verifiers is not None else list(c.P)
    if not vote and len(verifiers) != 1:
        raise ValueError("without a vote there must be exactly one verifier")
    deals, layout = [], []
    for prover, circ, hin, vin, hout in stmts:
        vals = gate_values(F, circ, vin)
        gates = [g for g in sorted(circ.gates, key=lambda g: g.layer) if g.kind != "in"]
        off = net.deviation(prover, "zk_gate_offset")
        for k, g in enumerate(gates):
            v = vals[g.id]
            if off and k == 0:
                v = F.add(v, F.reduce(off))
            deals.append((prover, v))
        layout.append(gates)
    hs = yield from c.share_many(deals)
    pos = 0
    claimed, dealt_ok = [], []
    for (prover, circ, hin, vin, hout), gates in zip(stmts, layout):
        val = {g.id: h for g, h in zip(circ.inputs(), hin)}
        ok = True
        for g in gates:
            val[g.id] = hs[pos]
            ok = ok and hs[pos].ok
            pos += 1
        claimed.append(val)
        dealt_ok.append(ok)
    pairs, where = [], []
    for s, ((prover, circ, hin, vin, hout), gates) in enumerate(zip(stmts, layout)):
        for g in gates:
            if g.kind == "mul":
                pairs.append((claimed[s][g.refs[0]], claimed[s][g.refs[1]]))
                where.append((s, g.id))
    prods = yield from c.multiply_many(pairs)
    prod_of = dict(zip(where, prods))
    us = []
    for s, ((prover, circ, hin, vin, hout), gates) in enumerate(zip(stmts, layout)):
        val = claimed[s]
        u = []
        for g in gates:
            if g.kind == "mul":
                u.append(c.sub(val[g.id], prod_of[(s, g.id)]))
            elif g.kind == "const":
                u.append(c.lin(F.neg(g.consts[0]), [(1, val[g.id])]))
            else:
                terms = [(1, val[g.id])] + [(F.neg(cc), val[r]) for cc, r in zip(g.consts[1:], g.refs)]
                u.append(c.lin(F.neg(g.consts[0]), terms))
        out_ref = circ.outputs[0][0]
        u.append(c.sub(val[out_ref], hout))
        us.append(u)
    items = [(h, j) for u in us for h in u for j in verifiers]
    opened = yield from c.reveal_to_many(items)
    views = {j: [[] for _ in stmts] for j in verifiers}
    k = 0
    for s, u in enumerate(us):
        for _ in u:
            for j in verifiers:
                views[j][s].append(opened[k])
                k += 1
    c.last_u = views
    verdicts = {j: [dealt_ok[s] and all(v == 0 for v in views[j][s]) for s in range(len(stmts))]
                for j in verifiers}
    c.last_proof_views = verdicts
    if not vote:
        return verdicts[verifiers[0]]
    sid = net.sid("vote")
    out = []
    for j in verifiers:
        mine = list(verdicts[j])
        if net.deviation(j, "vote_flip"):
            mine = [not v for v in mine]
        out.append(bcast(j, sid, tuple(mine)))
    inbox = yield out
    res = []
    for s in range(len(stmts)):
        yes = 0
        for j in verifiers:
            b = inbox.bcast(j, sid)
            if isinstance(b, (tuple, list)) and len(b) == len(stmts) and b[s] is True:
                yes += 1
        res.append(2 * yes > len(verifiers))
    return res


def prove_secret_predicate(c, prover, verifier, circuit, v_handles, v_values, w_handle):
    """Verifier's verdict on w = P(v_1..v_m) for one prover."""
    res = yield from prove_predicates(c, [(prover, circuit, v_handles, v_values, w_handle)],
                                      [verifier], vote=False)
    return res[0]


# -- generic envelopes ------------------------------------------------------------------

@dataclass
class Envelope:
    ident: int
    sender: int
    value: object = None
    state: str = "sealed"     # sealed | opened | retained | refused


class IdealEnvelopes:
    """In-process envelope functionality with a trusted intermediary."""

    def __init__(self):
        self.boxes = {}

    def commit(self, sender, value):
        if value is None:
            env = Envelope(len(self.boxes), sender, None, "refused")
        else:
            env = Envelope(len(self.boxes), sender, value)
        self.boxes[env.ident] = env
        return env

    def _get(self, env):
        ident = env.ident if isinstance(env, Envelope) else env
        if ident not in self.boxes:
            raise EnvelopeError(f"envelope {ident!r} was never committed")
        return self.boxes[ident]

    def open(self, env):
        box = self._get(env)
        if box.state == "refused":
            return None
        box.state = "opened"
        return box.value

    def retain(self, env):
        box = self._get(env)
        if box.state == "sealed":
            box.state = "retained"
        return None


def net_envelope_commit(c, sender, values):
    """Envelopes backed by shared secrets; returns handles."""
    hs = yield from c.share_many([(sender, v) for v in values])
    return hs


def net_envelope_open(c, sender, handles, receiver, request="open"):
    """The sender asks for its envelopes to be opened to the receiver;
    honest holders release pieces only on that request. Returns the
    receiver's values, or None for a retained batch."""
    net = c.net
    sid = net.sid("env")
    inbox = yield [bcast(sender, sid, request)]
    if inbox.bcast(sender, sid) != "open":
        return (yield from local(None))
    vals = yield from c.reveal_to_many([(h, receiver) for h in handles])
    return vals


# -- notarized envelopes ------------------------------------------------------------------------

@dataclass
class NotaryResult:
    verdict: str          # accept | reject
    y: object
    opened_x: object = None
    checks: dict = dc_field(default_factory=dict)


def _notary_lrr(table, nbits, F):
    spec, g, _ = boolean_lrr(table, nbits, F, d=1)
    lam = lagrange_weights(F, list(range(1, spec.m + 1)), 0)
    return spec, g, lam


def notarized_envelope(table, nbits, x_bits, y_claim, K, F=None, open_x=True):
    """Ideal-envelope realisation. Players: 1 sender, 2 receiver, 3 the
    trusted intermediary holding the envelopes and checking the small
    claims. Returns a protocol generator.

    Per repetition the sender commits r_hat, the receiver replies with
    s_hat, and the blinding coefficients are r = r_hat + s_hat. The
    sender then commits the queries y' = P(x; r) and answers z' = G(y').
    The intermediary checks y' = P(x; r) and Q(z') = y; the receiver asks
    for one (y'_i, z'_i) pair and checks z'_i = G(y'_i) itself.
    The sender deviation "notary_cheat" claims y = 1 - F(x) and fixes one
    answer so that Q still yields y.
    """
    F = F or prime_field(smallest_prime_above(nbits + 2))
    S, R, I = 1, 2, 3

    def prog(net):
        spec, g, lam = _notary_lrr(table, nbits, F)
        m, width = spec.m, spec.nvars
        sid = net.sid("notary")
        ts, tr = net.tape(S), net.tape(R)
        fx = F.reduce(table[sum(b << i for i, b in enumerate(x_bits))])
        cheat = net.deviation(S, "notary_cheat")
        y = F.sub(1, fx) if cheat else F.reduce(y_claim)
        # stage I: commit x and r_hat
        r_hat = [[F.random(ts) for _ in range(width)] for _ in range(K)]
        inbox = yield [send(S, I, f"{sid}.c1", (tuple(x_bits), tuple(map(tuple, r_hat)))),
                       send(S, R, f"{sid}.y", y)]
        c1 = inbox.get(I, S, f"{sid}.c1")
        y_seen = inbox.get(R, S, f"{sid}.y")
        # the receiver's half of the coins
        s_hat = [[F.random(tr) for _ in range(width)] for _ in range(K)]
        inbox = yield [send(R, S, f"{sid}.s", tuple(map(tuple, s_hat))),
                       send(R, I, f"{sid}.s", tuple(map(tuple, s_hat))),
                       send(I, R, f"{sid}.ack1", c1 is not None)]
        s_got = inbox.get(S, R, f"{sid}.s")
        r = [[F.add(a, b) for a, b in zip(ra, sa)] for ra, sa in zip(r_hat, s_got)]
        # commit queries and answers
        reps = []
        for k in range(K):
            ys = lrr_query_from_coeffs(list(x_bits), spec, [[v] for v in r[k]])
            zs = [lrr_answer(g, yy, spec) for yy in ys]
            if cheat:
                # move one answer so that the interpolation gives the false y
                j = net.adversary_tape.randrange(m)
                zs[j] = F.add(zs[j], F.mul(F.sub(y, fx), F.inv(lam[j])))
            reps.append((tuple(ys), tuple(zs)))
        inbox = yield [send(S, I, f"{sid}.c2", tuple(reps))]
        c2 = inbox.get(I, S, f"{sid}.c2")
        # the intermediary checks the small claims
        p_ok, q_ok = [], []
        for k in range(K):
            if c1 is None or c2 is None:
                p_ok.append(False)
                q_ok.append(False)
                continue
            rk = [F.add(a, b) for a, b in zip(c1[1][k], s_hat[k])]
            want = lrr_query_from_coeffs(list(c1[0]), spec, [[v] for v in rk])
            ys, zs = c2[k]
            p_ok.append(list(ys) == list(want))
            q_ok.append(F.sum(F.mul(l, F.reduce(z)) for l, z in zip(lam, zs)) == F.reduce(y_seen))
        # the receiver picks one pair per repetition
        idx = tuple(tr.randrange(m) for _ in range(K))
        inbox = yield [send(I, R, f"{sid}.pq", (tuple(p_ok), tuple(q_ok))),
                       send(R, S, f"{sid}.idx", idx)]
        pq = inbox.get(R, I, f"{sid}.pq")
        got_idx = inbox.get(S, R, f"{sid}.idx")
        inbox = yield [send(S, I, f"{sid}.open", tuple(got_idx))]
        req = inbox.get(I, S, f"{sid}.open")
        pairs = tuple((c2[k][0][i], c2[k][1][i]) for k, i in enumerate(req)) if req and c2 else None
        inbox = yield [send(I, R, f"{sid}.pairs", pairs)]
        got = inbox.get(R, I, f"{sid}.pairs")
        good = pq is not None and all(pq[0]) and all(pq[1]) and got is not None and len(got) == K
        g_ok = []
        if good:
            for yy, z in got:
                g_ok.append(F.reduce(z) == lrr_answer(g, yy, spec))
            good = all(g_ok)
        verdict = "accept" if good else "reject"
        opened = None
        if open_x:
            inbox = yield [send(S, I, f"{sid}.openx", "open")]
            if inbox.get(I, S, f"{sid}.openx") == "open" and c1 is not None:
                inbox = yield [send(I, R, f"{sid}.x", c1[0])]
                opened = inbox.get(R, I, f"{sid}.x")
        res = {S: {"r": r, "r_hat": r_hat}, I: None,
               R: NotaryResult(verdict, y_seen, opened, {"p": pq, "g": g_ok, "idx": idx})}
        return res
    return prog


def notarized_envelope_net(c, table, nbits, x_bits, y_claim, K, sender=1, receiver=2):
    """Network realisation over a sharing suite: envelopes are shared
    secrets dealt by the sender, the small claims are proved gate-wise to
    the receiver, and openings need the sender's request."""
    F, net = c.F, c.net
    spec, g, lam = _notary_lrr(table, nbits, F)
    m, width = spec.m, spec.nvars
    ts, tr = net.tape(sender), net.tape(receiver)
    fx = F.reduce(table[sum(b << i for i, b in enumerate(x_bits))])
    cheat = net.deviation(sender, "notary_cheat")
    y = F.sub(1, fx) if cheat else F.reduce(y_claim)
    r_hat = [[F.random(ts) for _ in range(width)] for _ in range(K)]
    hx_r = yield from net_envelope_commit(c, sender, list(x_bits) + [v for row in r_hat for v in row])
    hx, hr = hx_r[:len(x_bits)], hx_r[len(x_bits):]
    sid = net.sid("notary")
    s_hat = [[F.random(tr) for _ in range(width)] for _ in range(K)]
    inbox = yield [bcast(receiver, sid, tuple(v for row in s_hat for v in row))]
    s_pub = inbox.bcast(receiver, sid)
    s_pub = [list(s_pub[k * width:(k + 1) * width]) for k in range(K)]
    r = [[F.add(a, b) for a, b in zip(ra, sa)] for ra, sa in zip(r_hat, s_pub)]
    hr_full = [[c.lin(s_pub[k][j], [(1, hr[k * width + j])]) for j in range(width)] for k in range(K)]
    vals = []
    for k in range(K):
        ys = lrr_query_from_coeffs(list(x_bits), spec, [[v] for v in r[k]])
        zs = [lrr_answer(g, yy, spec) for yy in ys]
        if cheat:
            jj = net.adversary_tape.randrange(m)
            zs[jj] = F.add(zs[jj], F.mul(F.sub(y, fx), F.inv(lam[jj])))
        vals.append((ys, zs))
    flat = []
    for ys, zs in vals:
        for yy in ys:
            flat += list(yy)
        flat += list(zs)
    hyz = yield from net_envelope_commit(c, sender, flat)
    stmts = []
    per = m * width + m
    for k, (ys, zs) in enumerate(vals):
        base = k * per
        for i in range(m):
            for j in range(width):
                # y'_{i,j} = x_j + r_j * i
                circ = linear_circuit(0, [1, i + 1])
                hin = [hx[j], hr_full[k][j]]
                vin = [x_bits[j], r[k][j]]
                stmts.append((sender, circ, hin, vin, hyz[base + i * width + j]))
        hz = hyz[base + m * width: base + per]
        circ = linear_circuit(0, lam)
        stmts.append((sender, circ, hz, zs, c.constant(y)))
    ok = yield from prove_predicates(c, stmts, [receiver], vote=False)
    idx = [tr.randrange(m) for _ in range(K)]
    isid = net.sid("idx")
    inbox = yield [bcast(receiver, isid, tuple(idx))]
    req = inbox.bcast(receiver, isid)
    want = []
    for k, i in enumerate(req):
        base = k * per
        want += hyz[base + i * width: base + (i + 1) * width] + [hyz[base + m * width + i]]
    opened = yield from net_envelope_open(c, sender, want, receiver)
    g_ok = []
    if opened is not None:
        for k in range(K):
            chunk = opened[k * (width + 1):(k + 1) * (width + 1)]
            g_ok.append(None not in chunk and chunk[-1] == lrr_answer(g, tuple(chunk[:-1]), spec))
    verdict = "accept" if all(ok) and g_ok and all(g_ok) else "reject"
    x_open = yield from net_envelope_open(c, sender, hx, receiver)
    return NotaryResult(verdict, y, x_open, {"proofs": ok, "g": g_ok})
