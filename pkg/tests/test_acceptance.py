"""End-to-end acceptance checks, one test per criterion.

Each test records its checks on a Criterion (see conftest); the terminal
summary prints one PASS/FAIL line per criterion with its wall time
against the budget.
"""
import itertools
import json
import math
import random
from collections import Counter
from fractions import Fraction

import pytest

from mpcbench import apps, cli, fair, lrr, privacy as pv, zk
from mpcbench import constrounds as cr
from mpcbench.field import Poly, prime_field
from mpcbench.mpc_half import HalfSuite, verifiable_time_release
from mpcbench.mpc_third import BGW, ArithmeticCircuit
from mpcbench.netsim import AdversaryScript, execute
from mpcbench.sharing import shamir_reconstruct, shamir_share

from test_privacy import brute_partitionable

F5 = prime_field(5)
F7 = prime_field(7)
F17 = prime_field(17)
F97 = prime_field(97)
AND = [0, 0, 0, 1]


def sigma3(p, N):
    return 3 * math.sqrt(p * (1 - p) / N)


def settle(part):
    bad = [what for ok, what in part.checks if not ok]
    assert not bad, bad


# 1 -------------------------------------------------------------------------------------

def test_shamir_single_piece_distribution(criterion):
    c = criterion(1, 1)
    for holder in (1, 2, 3):
        dists = [Counter(shamir_share(F5, s, 1, 3, None, poly=Poly(F5, [s, a])).pieces[holder]
                         for a in range(5)) for s in range(5)]
        c.check(all(d == dists[0] for d in dists), f"piece {holder} has one distribution for all 5 secrets")
    settle(c)


# 2 -------------------------------------------------------------------------------------

def test_robust_reconstruction_exhaustive(criterion):
    c = criterion(2, 1)
    cases = wrong = 0
    for s, a in itertools.product(range(7), repeat=2):
        sh = shamir_share(F7, s, 1, 4, None, poly=Poly(F7, [s, a]))
        for bad in range(1, 5):
            for delta in range(1, 7):
                pieces = dict(sh.pieces)
                pieces[bad] = (pieces[bad] + delta) % 7
                cases += 1
                wrong += shamir_reconstruct(sh.with_pieces(pieces), robust=True) != s
    c.check(wrong == 0, f"{cases} single-error cases decode")
    settle(c)


# 3 -------------------------------------------------------------------------------------

PAIRS = list(itertools.product(range(5), repeat=2))


def bgw_products(adv=None):
    def prog(net):
        s = BGW(net, 1, mode="byzantine")
        hs = yield from s.share_many([(1, x) for x, _ in PAIRS] + [(2, y) for _, y in PAIRS])
        zs = yield from s.multiply_many(list(zip(hs[:25], hs[25:])))
        vals = yield from s.reveal_many(zs)
        return {i: (vals, s.last_disqualified) for i in net.players}
    return execute(prog, 4, F5, adv, seed=3, record=False).outputs


def skew_reveal(r, m, view):
    # every reconstruction piece the corrupt player broadcasts is shifted
    if m.tag.startswith("rv") and isinstance(m.payload, tuple):
        return tuple((v + 1) % 5 for v in m.payload)
    return m.payload


def test_bgw_multiplication_oracle(criterion):
    c = criterion(3, 10)
    want = [x * y % 5 for x, y in PAIRS]
    outs = bgw_products()
    c.check(all(outs[i][0] == want for i in range(1, 5)), "all 25 products over GF(5)")
    adv = AdversaryScript("byzantine", {3}, tamper=skew_reveal, behavior={("product_offset", 3): 2})
    outs = bgw_products(adv)
    c.check(all(outs[i][0] == want for i in (1, 2, 4)),
            "corrupt reshares and reconstruction pieces leave the outputs unchanged")
    c.check(any(p == 3 for _, p in outs[1][1]), "the cheating reshare is disqualified")
    settle(c)


# 4 -------------------------------------------------------------------------------------

CHAIN4 = """0.1 in 1
0.2 in 2
0.3 in 3
0.4 in 4
1.1 mul 0.1 0.2
2.1 mul 1.1 0.3
3.1 mul 2.1 0.4
4.1 mul 3.1 0.1
out 4.1 all
"""


def passive_run(body, seed):
    def prog(net):
        s = BGW(net, 1, mode="passive")
        v = yield from body(s)
        return {i: v for i in net.players}
    return execute(prog, 4, F7, seed=seed, record=False)


def test_constant_rounds_and_slicing(criterion):
    c = criterion(4, 30)
    inputs = {1: 1, 2: 2, 3: 3}
    rounds, correct = [], True
    for d in range(1, 7):
        f = cr.chain_formula(d, 3)
        tr = passive_run(lambda s, f=f: cr.eval_const(s, f, inputs), d)
        correct &= tr.result[1] == f.evaluate(F7, inputs)
        rounds.append(tr.metrics[0])
    c.check(correct, "eval_const correct at depths 1-6")
    c.check(len(set(rounds)) == 1, f"eval_const rounds {rounds[0]} at every depth 1-6")

    circ = ArithmeticCircuit.loads(CHAIN4, 4)
    ins = {1: 2, 2: 3, 3: 4, 4: 5}
    want = circ.evaluate(F7, ins)
    meas, correct = {}, True
    for sd in range(1, 5):
        def body(s, sd=sd):
            out = yield from cr.eval_sliced(s, circ, sd, ins)
            return out, s.last_slices
        tr = passive_run(body, sd)
        out, slices = tr.result[1]
        correct &= all(out[p] == want[p] for p in range(1, 5))
        meas[sd] = (slices, tr.metrics[0])
    c.check(correct, "eval_sliced correct for slice depths 1-4")
    c.check(all(meas[sd][0] == -(-4 // sd) for sd in meas), "slice counts are ceil(4/slice)")
    # rounds = base + per_slice * slices, in exact integers, for every slice depth
    (s1, r1), (s4, r4) = meas[1], meas[4]
    per = Fraction(r1 - r4, s1 - s4)
    base = r4 - per * s4
    affine = per.denominator == 1 and all(base + per * s == r for s, r in meas.values())
    c.check(affine, f"rounds {[meas[sd][1] for sd in sorted(meas)]} = {base} + {per} * slices")
    settle(c)


# 5 -------------------------------------------------------------------------------------

def formulas_up_to(depth, leaves):
    """Every formula of depth <= depth over the leaves, one of each pair of
    commuted children."""
    levels = [list(leaves)]
    for _ in range(depth):
        seen = [f for lvl in levels for f in lvl]
        fresh = []
        for i, a in enumerate(seen):
            for b in seen[i:]:
                if max(a.depth(), b.depth()) == len(levels) - 1:
                    fresh += [cr.fadd(a, b), cr.fmul(a, b)]
        levels.append(fresh)
    return [f for lvl in levels for f in lvl]


def test_compiler_exhaustive_and_sampled(criterion):
    c = criterion(5, 60)
    asgs = [dict(zip((1, 2), a)) for a in itertools.product(range(7), repeat=2)]
    fs = formulas_up_to(3, [cr.var(1), cr.var(2)])
    seen = {str(f) for f in fs}
    # constant leaves up to depth 2
    fs += [f for f in formulas_up_to(2, [cr.var(1), cr.var(2), cr.const(0), cr.const(1), cr.const(3)])
           if str(f) not in seen]
    bad = 0
    for f in fs:
        P = cr.compile_formula(F7, f)
        bad += sum(P.evaluate(F7, a) != f.evaluate(F7, a) for a in asgs)
    c.check(bad == 0, f"{len(fs)} formulas of depth <= 3 agree on all 49 assignments")
    rng = random.Random(5)
    bad = 0
    for _ in range(200):
        f = cr.random_formula(rng, rng.randint(4, 6), 4, 7)
        P = cr.compile_formula(F7, f)
        for _ in range(10):
            a = {v: rng.randrange(7) for v in range(1, 5)}
            bad += P.evaluate(F7, a) != f.evaluate(F7, a)
    c.check(bad == 0, "200 random formulas of depth 4-6 agree on sampled assignments")
    settle(c)


# 6 -------------------------------------------------------------------------------------

def cutchoose(k0, seed, cut=None, guess=None):
    """A prover with the false claim 2*3 = 5 that bets on the unopened rows."""
    if guess is None:
        guess = random.Random(seed).sample(range(2 * k0), k0)
    adv = AdversaryScript("byzantine", {1}, behavior={("cut_guess", 1): set(guess)})

    def prog(net):
        s = HalfSuite(net, 1, k=4)
        A, B, C = yield from s.share_many([(1, 2), (1, 3), (1, 5)])
        ok = yield from s.prove_product_cutchoose(1, A, B, C, k0=k0, cut=cut)
        return {i: ok for i in net.players}
    return execute(prog, 3, F97, adv, seed=seed, record=False).outputs[2]


def test_cut_and_choose_soundness(criterion):
    c = criterion(6, 60)
    N = 1000
    for k0 in (4, 8):
        rate = sum(cutchoose(k0, s) for s in range(N)) / N
        bound = 2 ** -k0
        c.check(rate <= bound + sigma3(bound, N), f"k0={k0}: cheating accepted at {rate:.4f}")
    idx = list(itertools.combinations(range(4), 2))
    exact = all(cutchoose(2, 0, cut=list(a), guess=b) == (set(a) == set(b)) for a in idx for b in idx)
    c.check(exact, "k0=2: a cheater passes exactly when the cut misses every bad row")
    settle(c)


# 7 -------------------------------------------------------------------------------------

def test_time_release_tamper(criterion):
    c = criterion(7, 30)
    N, k = 1000, 8
    adv = AdversaryScript("byzantine", {2}, behavior={("vtr_forge", 2): True})
    acc = sum(execute(verifiable_time_release(1, 2, 3, 0, k), 3, F7, adv, seed=s,
                      record=False).outputs[3] != "reject" for s in range(N))
    bound = 2 ** -k
    c.check(acc / N <= bound + sigma3(bound, N), f"k={k}: forged release accepted at {acc / N:.4f}")
    settle(c)


# 8 -------------------------------------------------------------------------------------

def test_lrr_pipeline_exhaustive(criterion):
    c = criterion(8, 60)
    rng = random.Random(8)
    bad = 0
    for n, F in ((1, F5), (2, F5), (3, F7)):
        for code in range(1 << (1 << n)):
            tab = lrr.bits_of(code, 1 << n)
            for e in range(1 << n):
                bad += lrr.lrr_pipeline(tab, n, lrr.bits_of(e, n), F, rng)[0] != tab[e]
    c.check(bad == 0, "every function on 1-3 bits, every input, full pipeline")

    # four bits: the oracle's answer g(y) is the sum of f(e) times the
    # indicator polynomial of e at y, so one walk in Gray-code order over all
    # 2^16 tables updates the answers by one indicator each step
    n, F = 4, F7
    spec = lrr.LrrSpec(F, n, n, d=1)
    deltas = [lrr.canonical_poly(F, [int(e == j) for j in range(16)], n) for e in range(16)]
    lam = [lrr.lrr_interpolate([int(i == j) for j in range(spec.m)], spec) for i in range(spec.m)]
    spot = [rng.randrange(1 << 16) for _ in range(40)]
    bad = 0
    for x in range(16):
        bits = lrr.bits_of(x, n)
        ys = lrr.lrr_query(bits, spec, rng)
        D = [[d(list(y)) for y in ys] for d in deltas]
        z = [0] * spec.m
        tab = [0] * 16
        prev = 0
        for step in range(1, 1 << 16):
            gray = step ^ (step >> 1)
            e = (gray ^ prev).bit_length() - 1
            prev = gray
            sign = 1 if gray >> e & 1 else -1
            tab[e] ^= 1
            z = [(zi + sign * de) % 7 for zi, de in zip(z, D[e])]
            q = sum(l * zi for l, zi in zip(lam, z)) % 7
            bad += q != tab[x]
        # the walk's answers are the oracle's own polynomial on sampled tables
        for code in spot:
            t2 = lrr.bits_of(code, 16)
            g = lrr.canonical_poly(F, t2, n)
            want = [sum(t2[e] * D[e][i] for e in range(16)) % 7 for i in range(spec.m)]
            bad += [g(list(y)) for y in ys] != want
    c.check(bad == 0, "every function on 4 bits, every input")

    spec = lrr.LrrSpec(F5, 2, 2, d=1)
    dists = set()
    for x in itertools.product(range(5), repeat=2):
        cnt = [Counter() for _ in range(spec.m)]
        for a in itertools.product(range(5), repeat=2):
            for i, y in enumerate(lrr.lrr_query_from_coeffs(x, spec, [[a[0]], [a[1]]])):
                cnt[i][y] += 1
        dists.add(tuple(tuple(sorted(ci.items())) for ci in cnt))
    c.check(len(dists) == 1, "single-query marginals over GF(5), d=1 identical for all 25 inputs")
    settle(c)


# 9 -------------------------------------------------------------------------------------

# 1% critical value of chi-square with 255 degrees of freedom
CHI2_255_1PCT = 310.46


def test_instance_hiding(criterion):
    c = criterion(9, 30)
    ok = True
    for e in range(4):
        res = lrr.ihs_model1(AND, lrr.bits_of(e, 2), rng=random.Random(e))
        ok &= res.value == AND[e] and len(res.views) == 3
    c.check(ok, "model 1 with three oracles computes AND on all inputs")
    rng = random.Random(9)
    S = {e for e in range(256) if rng.random() < 0.5}
    orc = lrr.model2_setup(lambda x, n: int(n == 8 and x in S), 8, random.Random(10))
    c.check(all(lrr.ihs_model2(orc, x, 8)[0] == (x in S) for x in range(256)),
            "model 2 correct on all 2^8 inputs at n_max=8")
    N = 256 * 20
    for x in (5, 200):
        cnt = Counter(lrr.ihs_model2(lrr.model2_setup(lambda v, n: v & 1, 8, random.Random(s)), x, 8)[3]
                      for s in range(N))
        chi = sum((cnt[y] - N / 256) ** 2 / (N / 256) for y in range(256))
        c.check(chi < CHI2_255_1PCT, f"blinded query for x={x}: chi-square {chi:.1f}")
    settle(c)


# 10 ------------------------------------------------------------------------------------

def test_notary_soundness(criterion):
    c = criterion(10, 60)
    N, K, m = 1000, 24, 3
    adv = AdversaryScript("byzantine", {1}, behavior={("notary_cheat", 1): True})
    acc = sum(execute(zk.notarized_envelope(AND, 2, [1, 1], 1, K), 3, F5, adv, seed=s,
                      record=False).outputs[2].verdict == "accept" for s in range(N))
    bound = (1 - 1 / m) ** K
    c.check(acc / N <= bound + sigma3(bound, N), f"false claims accepted at {acc / N:.4f}")
    honest = 0
    for s in range(200):
        x = lrr.bits_of(s % 4, 2)
        y = AND[s % 4]
        honest += execute(zk.notarized_envelope(AND, 2, x, y, K), 3, F5, seed=s,
                          record=False).outputs[2].verdict == "accept"
    c.check(honest == 200, f"honest runs accepted {honest}/200")
    settle(c)


# 11 ------------------------------------------------------------------------------------

@pytest.mark.xfail(strict=True, reason="the exact per-announcement odds factor at k=4 is 3, above 1+4/k=2")
def test_fairness_odds_ratio_bound(criterion):
    c = criterion(11, 60)
    k = 4
    worst, where = fair.max_step_ratio(k, 11)
    c.check(worst == fair.likelihood_ratio(k), f"enumerated worst factor {worst} is the likelihood ratio")
    c.check(worst <= 1 + Fraction(4, k), f"odds factor {worst} <= 1+4/k={1 + Fraction(4, k)}")
    settle(c)


def test_fairness_majority_error(criterion):
    c = criterion(11, 60)
    N, k = 1000, 8
    rng = random.Random(11)
    wrong = 0
    for _ in range(N):
        F = rng.randrange(2)
        wrong += fair.majority_guess(fair.ideal_coin(F, k, rng)) != F
    bound = fair.chernoff_bound(k)
    c.check(wrong / N <= bound + sigma3(bound, N), f"k={k}: majority wrong at {wrong / N:.4f}")
    settle(c)


# 12 ------------------------------------------------------------------------------------

GATES = {"and": (0, 0, 0, 1), "or": (0, 1, 1, 1), "xor": (0, 1, 1, 0), "idx": fair.IDENTITY_X}


def wire_keys(rng, k=16):
    out = []
    for _ in range(3):
        a = rng.getrandbits(k)
        b = rng.getrandbits(k)
        while b == a:
            b = rng.getrandbits(k)
        out.append((a, b))
    return out


def test_yao_gates_and_eval2(criterion):
    c = criterion(12, 30)
    rng = random.Random(12)
    bad = 0
    for tab in GATES.values():
        for omega in itertools.product((0, 1), repeat=3):
            X, Y, Z = wire_keys(rng)
            gate = fair.yao_gate_encode(tab, X, Y, Z, omega, 16)
            for a, b in itertools.product((0, 1), repeat=2):
                z, _ = fair.yao_gate_decode(gate, X[a], Y[b])
                bad += z != Z[tab[2 * (a ^ omega[0]) + (b ^ omega[1])] ^ omega[2]]
    c.check(bad == 0, "decode over 4 inputs x 8 masks x 4 gates")

    N = 5000
    caught = 0
    for s in range(N):
        r = random.Random(s)
        X, Y, Z = wire_keys(r)
        gen = fair.prg(s.to_bytes(4, "big"))
        gate = fair.yao_gate_encode(GATES["and"], X, Y, Z, (1, 0, 1), 16, gen)
        a, b = r.randrange(2), r.randrange(2)
        e = list(gate.entries[2 * a + b])
        e[r.randrange(2)] ^= 1 << r.randrange(16)
        gate.entries[2 * a + b] = tuple(e)
        try:
            fair.yao_gate_decode(gate, X[a], Y[b], gen)
        except fair.YaoError:
            caught += 1
    p = 2 ** -16
    c.check(caught / N >= 1 - p - sigma3(p, N), f"tampered entries caught {caught}/{N}")

    ok = True
    for code in range(16):
        tab = tuple((code >> e) & 1 for e in range(4))
        circ = fair.BoolCircuit.from_gates(1, 1, [(tab, 0, 1)], [2])
        for a, b in itertools.product((0, 1), repeat=2):
            tr = execute(fair.eval2(circ, [a], [b]), 2, None, seed=code * 4 + 2 * a + b)
            ok &= tr.outputs[2] == (tab[2 * a + b],)
    # two bits each: equality and the carry of a two-bit sum
    xnor, and_, or_ = (1, 0, 0, 1), (0, 0, 0, 1), (0, 1, 1, 1)
    circ = fair.BoolCircuit.from_gates(2, 2, [(xnor, 0, 2), (xnor, 1, 3), (and_, 4, 5),
                                              (and_, 0, 2), (and_, 1, 3), (or_, 1, 3),
                                              (and_, 7, 9), (or_, 8, 10)], [6, 11])
    for x, y in itertools.product(range(4), repeat=2):
        xb, yb = [x & 1, x >> 1], [y & 1, y >> 1]
        tr = execute(fair.eval2(circ, xb, yb), 2, None, seed=x * 4 + y)
        ok &= tr.outputs[2] == (int(x == y), int(x + y >= 4))
    c.check(ok, "Eval2 on all 16 one-bit gates and a two-bit circuit, every input")
    settle(c)


# 13 ------------------------------------------------------------------------------------

def test_partitionability(criterion):
    c = criterion(13, 60)
    c.check(not pv.is_partitionable(pv.AND_TABLE)[0], "AND is not partitionable")
    c.check(pv.is_partitionable(pv.sum_table(7))[0], "x+y mod 7 is partitionable")
    c.check(not pv.is_partitionable(pv.STUCK_TABLE)[0], "the stuck 3x3 table is not partitionable")
    found = agree = private = 0
    for code in range(512):
        tab = [[code >> (3 * x + y) & 1 for y in range(3)] for x in range(3)]
        ok, w = pv.is_partitionable(tab)
        agree += ok == brute_partitionable(tab, [0, 1, 2], [0, 1, 2])
        if ok:
            found += 1
            private += pv.privacy_audit(pv.synthesize_protocol(tab, w), tab).ok
    c.check(agree == 512, "decision matches brute force on all 512 boolean 3x3 tables")
    c.check(private == found, f"{private} of {found} synthesized protocols audit private")
    settle(c)


# 14 ------------------------------------------------------------------------------------

def test_password_scheme(criterion):
    c = criterion(14, 30)

    def auth(pw, attempt, seed, mode):
        prog = apps.password_program(pw, attempt, mode=mode, suite_mode="passive")
        return execute(prog, 4, F17, seed=seed, record=False).result[1].verdicts

    rng = random.Random(14)
    good = 0
    for s in range(500):
        pw = rng.randrange(17)
        v = auth(pw, pw, s, "fast" if s % 2 else "certified")
        good += set(v.values()) == {"accept"}
    c.check(good == 500, f"correct passwords accepted {good}/500")
    N = 10 ** 4
    acc = 0
    for s in range(N):
        pw = rng.randrange(17)
        acc += auth(pw, (pw + 1 + rng.randrange(16)) % 17, s, "fast")[1] == "accept"
    p = 1 / 17
    c.check(abs(acc / N - p) <= sigma3(p, N), f"fast-mode false accepts {acc / N:.4f} vs 1/17")
    settle(c)


# 15 ------------------------------------------------------------------------------------

CONFIGS = [
    {"protocol": "eval_const", "field": "GF(7)", "n": 4, "seed": 1, "mode": "passive",
     "params": {"formula": "(x1+x2)*x3", "inputs": [1, 2, 3]}},
    {"protocol": "password", "field": "GF(17)", "n": 4, "t": 1, "seed": 4,
     "params": {"password": 5, "attempt": 6, "auth_mode": "certified"}},
    {"protocol": "ballot", "field": "GF(5)", "n": 4, "seed": 0,
     "adversary": {"fault_type": "byzantine", "coalition": [2],
                   "behavior": [{"name": "vote_value", "player": 2, "value": 2}]},
     "params": {"votes": [1, 0, 1, 1]}},
    {"protocol": "mail", "field": "GF(31)", "n": 3, "t": 0, "seed": 2,
     "params": {"messages": [10, 20, 30], "destinations": [2, 3, 1]}},
    {"protocol": "fair_coin", "seed": 6, "params": {"k": 6, "quit_after": "random"}},
    {"protocol": "partition", "seed": 0, "params": {"table": [[1, 2], [1, 3]], "x": 1, "y": 1}},
    {"protocol": "notary", "seed": 1, "params": {"table": [0, 0, 0, 1], "nbits": 2, "x": [1, 1], "y": 1, "K": 4}},
]
FILES = ("report.json", "report.txt", "trace.jsonl")


def test_cli_determinism(criterion, tmp_path):
    c = criterion(15, None)
    same = True
    for n, cfg in enumerate(CONFIGS):
        path = tmp_path / f"c{n}.json"
        path.write_text(json.dumps(cfg))
        for tag in "ab":
            cli.main(["run", str(path), "--out", str(tmp_path / f"{n}{tag}")])
        same &= all((tmp_path / f"{n}a" / f).read_bytes() == (tmp_path / f"{n}b" / f).read_bytes()
                    for f in FILES)
    c.check(same, f"{len(CONFIGS)} run configs give byte-identical reports and traces")
    sweep = dict(CONFIGS[4], sweep={"params.k": [4, 6]})
    path = tmp_path / "sw.json"
    path.write_text(json.dumps(sweep))
    for tag in "ab":
        cli.main(["sweep", str(path), "--trials", "40", "--out", str(tmp_path / f"sw{tag}")])
    c.check(all((tmp_path / "swa" / f).read_bytes() == (tmp_path / "swb" / f).read_bytes()
                for f in ("sweep.json", "sweep.txt", "sweep.csv")), "sweep outputs byte-identical")
    settle(c)
