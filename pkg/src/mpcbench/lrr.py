"""Locally random reductions and instance hiding.

A reduction hides an input x = (x_1..x_N) behind random polynomials
p_j(u) of degree d with p_j(0) = x_j. Query i is (p_1(i)..p_N(i)); an
oracle answers g(y_i) for the target polynomial g of degree D, and
g(p_1(u)..p_N(u)) has degree d*D in u, so d*D + 1 answers determine it
and its free term is g(x). Any d queries are uniform whatever x is.

Boolean functions reduce through their canonical polynomial. Grouping
the variables into blocks of q and naming every product inside a block
as a new variable w lowers the degree from n to n/q, which cuts the
number of queries needed.

Truth tables: entry e is f at the input whose bit i-1 is x_i. On disk a
table is a hex string of the 2^n bits packed eight per byte, entry e in
byte e // 8 at bit e % 8 (least significant bit first). Tables with
fewer than eight entries occupy one byte with the high bits zero.
"""

import math
import random
from dataclasses import dataclass, field as dc_field

from .constrounds import canonical_poly, eval_formulas, fmul, var
from .field import interpolate_at, lagrange_weights, is_prime, prime_field
from .netsim import send
from .mpc_third import SuiteError


class LrrError(ValueError):
    pass


# -- truth tables ------------------------------------------------------------------

def tt_dumps(table):
    bits = [1 if b else 0 for b in table]
    nbytes = max(1, (len(bits) + 7) // 8)
    out = bytearray(nbytes)
    for e, b in enumerate(bits):
        if b:
            out[e // 8] |= 1 << (e % 8)
    return out.hex()


def tt_loads(text, n=None):
    """Parse a hex truth table. n defaults to the largest size the bytes hold."""
    raw = bytes.fromhex("".join(text.split()))
    if not raw:
        raise LrrError("empty truth table")
    if n is None:
        size = len(raw) * 8
        n = size.bit_length() - 1
        if 1 << n != size:
            raise LrrError(f"{len(raw)} bytes is not a power-of-two table; give n")
    if max(1, (1 << n) // 8) != len(raw):
        raise LrrError(f"a table on {n} bits needs {max(1, (1 << n) // 8)} bytes, got {len(raw)}")
    table = [raw[e // 8] >> (e % 8) & 1 for e in range(1 << n)]
    if n < 3 and raw[0] >> (1 << n):
        raise LrrError("padding bits must be zero")
    return table


def read_truth_table(path, n=None):
    with open(path) as fh:
        return tt_loads(fh.read(), n)


def write_truth_table(path, table):
    with open(path, "w") as fh:
        fh.write(tt_dumps(table) + "\n")


def bits_of(e, n):
    return [e >> i & 1 for i in range(n)]


# -- change of variables ------------------------------------------------------------------

@dataclass
class GroupedPoly:
    """h(w) over block variables: w index psi(b, mask) = b * 2^q + mask + 1
    (b counted from 0) is the product of the x's of block b picked by mask.
    terms maps a tuple of one mask per block to a coefficient."""
    field: object
    n: int
    q: int
    terms: dict

    @property
    def blocks(self):
        return self.n // self.q

    @property
    def nvars(self):
        return self.blocks << self.q

    @property
    def degree(self):
        return self.blocks if any(self.terms.values()) else 0

    def psi(self, b, mask):
        return (b << self.q) + mask + 1

    def w_of(self, xs):
        """The w values for an assignment of the x's (padded with zeros)."""
        F = self.field
        xs = list(xs) + [0] * (self.n - len(xs))
        w = []
        for b in range(self.blocks):
            blk = xs[b * self.q:(b + 1) * self.q]
            for mask in range(1 << self.q):
                v = 1
                for i in range(self.q):
                    if mask >> i & 1:
                        v = F.mul(v, F.reduce(blk[i]))
                w.append(v)
        return w

    def __call__(self, w):
        F = self.field
        acc = 0
        for masks, coef in self.terms.items():
            t = coef
            for b, mask in enumerate(masks):
                t = F.mul(t, F.reduce(w[self.psi(b, mask) - 1]))
            acc = F.add(acc, t)
        return acc


def change_variables(poly, n, q):
    """Regroup a multilinear polynomial in x_1..x_n into blocks of q."""
    if q < 1:
        raise LrrError("block size must be positive")
    M = -(-n // q) * q
    terms = {}
    for mono, coef in poly.terms.items():
        if not coef:
            continue
        masks = [0] * (M // q)
        for v in mono:
            if not 1 <= v <= n:
                raise LrrError(f"variable x{v} outside x1..x{n}")
            b, i = divmod(v - 1, q)
            if masks[b] >> i & 1:
                raise LrrError("change of variables needs a multilinear polynomial")
            masks[b] |= 1 << i
        key = tuple(masks)
        terms[key] = poly.field.add(terms.get(key, 0), coef)
    return GroupedPoly(poly.field, M, q, {k: c for k, c in terms.items() if c})


def log_block(n):
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


# -- the reduction ------------------------------------------------------------------------

@dataclass
class LrrSpec:
    """(d, m) reduction of inputs of length nvars to a target of degree `degree`.

    With instantiate=True the first coordinate is fixed to 0 and to 1; each
    query then carries both versions, the target degree drops by one and so
    does the query count. Only meaningful when every top-degree monomial of
    the target contains the first coordinate, as for canonical polynomials.
    """
    field: object
    nvars: int
    degree: int
    d: int = 1
    m: int = None
    instantiate: bool = False
    reduced_degree: int = dc_field(init=False)

    def __post_init__(self):
        self.reduced_degree = self.degree - 1 if self.instantiate else self.degree
        if self.instantiate and self.nvars < 1:
            raise LrrError("instantiation needs at least one variable")
        need = self.d * max(0, self.reduced_degree) + 1
        if self.m is None:
            self.m = need
        if self.m < need:
            raise LrrError(f"m={self.m} queries cannot determine a degree-{self.d * self.reduced_degree} interpolant")
        if self.field.order <= self.m:
            raise LrrError(f"field of order {self.field.order} too small for {self.m} evaluation points")


def lrr_query_from_coeffs(x, spec, coeffs):
    """Queries for input x given the blinding coefficients: coeffs[j] lists
    the d higher coefficients of p_j."""
    F = spec.field
    xs = list(x)[1:] if spec.instantiate else list(x)
    if len(coeffs) != len(xs):
        raise LrrError("one coefficient list per blinded coordinate")
    ys = []
    for i in range(1, spec.m + 1):
        y = []
        for xj, cj in zip(xs, coeffs):
            v, pw = F.reduce(xj), 1
            for a in cj:
                pw = F.mul(pw, i)
                v = F.add(v, F.mul(F.reduce(a), pw))
            y.append(v)
        y = tuple(y)
        ys.append(((0,) + y, (1,) + y) if spec.instantiate else y)
    return ys


def lrr_query(x, spec, rng):
    F = spec.field
    width = spec.nvars - 1 if spec.instantiate else spec.nvars
    coeffs = [[F.random(rng) for _ in range(spec.d)] for _ in range(width)]
    return lrr_query_from_coeffs(x, spec, coeffs)


def lrr_answer(g, query, spec):
    """An honest oracle's answer: g on the query (both versions if instantiated)."""
    if spec.instantiate:
        return tuple(g(list(y)) for y in query)
    return g(list(query))


def lrr_interpolate(answers, spec, x_first=None):
    """Free term of the interpolant through (i, z_i). With instantiation,
    x_first picks which of the two interpolants is the answer."""
    F = spec.field
    if len(answers) != spec.m:
        raise LrrError(f"expected {spec.m} answers, got {len(answers)}")
    if spec.instantiate:
        if x_first not in (0, 1):
            raise LrrError("instantiated reductions need the first bit to pick a branch")
        answers = [z[x_first] for z in answers]
    return interpolate_at(F, [(i, F.reduce(z)) for i, z in enumerate(answers, 1)], 0)


def boolean_lrr(table, n, F, d=1, q=1, instantiate=False):
    """(spec, g, encode) for a boolean function: encode maps the input
    bits to the blinded coordinates and g is the oracle's polynomial."""
    poly = canonical_poly(F, table, n)
    if q == 1:
        spec = LrrSpec(F, n, n if poly.terms else 0, d=d, instantiate=instantiate)
        return spec, poly, lambda bits: list(bits)
    if instantiate:
        raise LrrError("instantiation is only offered for ungrouped reductions")
    h = change_variables(poly, n, q)
    spec = LrrSpec(F, h.nvars, h.blocks if h.terms else 0, d=d)
    return spec, h, h.w_of


def lrr_pipeline(table, n, bits, F, rng, d=1, q=1, instantiate=False):
    """Q(g(P(x))) with honest oracles; returns (value, queries)."""
    spec, g, enc = boolean_lrr(table, n, F, d, q, instantiate)
    x = enc(bits)
    ys = lrr_query(x, spec, rng)
    zs = [lrr_answer(g, y, spec) for y in ys]
    return lrr_interpolate(zs, spec, bits[0] if instantiate else None), ys


def smallest_prime_above(k):
    p = k + 1
    while not is_prime(p):
        p += 1
    return p


# -- instance hiding, model 1 ---------------------------------------------------------------

@dataclass
class IhsResult:
    value: object
    views: dict        # oracle index -> list of messages it received
    answers: list


def ihs_model1(table, x_bits, F=None, oracles=None, rng=None, instantiate=False):
    """m-oracle scheme: oracle i receives (n, y_i) and answers c_f(y_i).

    oracles: optional list of callables (n, y) -> answer standing in for
    honest oracles; index k is oracle k+1.
    """
    n = len(x_bits)
    F = F or prime_field(smallest_prime_above(n + 2))
    rng = rng or random.Random(0)
    spec, g, _ = boolean_lrr(table, n, F, instantiate=instantiate)
    ys = lrr_query(list(x_bits), spec, rng)
    views, answers = {}, []
    for i, y in enumerate(ys, 1):
        views[i] = [(n, y)]
        if oracles and oracles[i - 1] is not None:
            answers.append(oracles[i - 1](n, y))
        else:
            answers.append(lrr_answer(g, y, spec))
    value = lrr_interpolate(answers, spec, x_bits[0] if instantiate else None)
    return IhsResult(value, views, answers)


def ihs_model1_protocol(table, x_bits, F, instantiate=False):
    """The scheme as a network run: player 1 queries oracles 2..m+1."""
    n = len(x_bits)

    def prog(net):
        spec, g, _ = boolean_lrr(table, n, F, instantiate=instantiate)
        ys = lrr_query(list(x_bits), spec, net.tape(1))
        sid = net.sid("ihs")
        inbox = yield [send(1, i + 1, f"{sid}.q", (n, y)) for i, y in enumerate(ys, 1)]
        out = []
        for i in range(1, spec.m + 1):
            msg = inbox.get(i + 1, 1, f"{sid}.q")
            out.append(send(i + 1, 1, f"{sid}.a", lrr_answer(g, msg[1], spec) if msg else None))
        inbox = yield out
        zs = [inbox.get(1, i + 1, f"{sid}.a") for i in range(1, spec.m + 1)]
        try:
            v = lrr_interpolate(zs, spec, x_bits[0] if instantiate else None)
        except (TypeError, ValueError):
            v = None
        res = {i: None for i in net.players}
        res[1] = v
        return res
    return prog


# -- instance hiding, model 2 --------------------------------------------------------------

@dataclass
class Model2Oracles:
    """Finite tables up to n_max. o1[n] = (R o V table, b1); o2[n] =
    ((S xor R) o V table, b2) with b1 xor b2 = v_n."""
    n_max: int
    o1: dict
    o2: dict


def model2_setup(member, n_max, rng):
    """member(x, n) -> 0/1 is the set S; tables are built for n = 1..n_max."""
    o1, o2 = {}, {}
    for n in range(1, n_max + 1):
        size = 1 << n
        R = [rng.randrange(2) for _ in range(size)]
        v = rng.randrange(size)
        b1 = rng.randrange(size)
        b2 = v ^ b1
        # chi_{A o V}(y) = chi_A(y xor v)
        o1[n] = ([R[y ^ v] for y in range(size)], b1)
        o2[n] = ([member(y ^ v, n) ^ R[y ^ v] for y in range(size)], b2)
    return Model2Oracles(n_max, o1, o2)


def ihs_model2(oracles, x, n):
    """Returns (chi_S(x), view of B1, view of B2, y)."""
    if not 1 <= n <= oracles.n_max:
        raise LrrError(f"input length {n} outside 1..{oracles.n_max}")
    t1, b1 = oracles.o1[n]
    t2, b2 = oracles.o2[n]
    y = x ^ b1 ^ b2
    return t1[y] ^ t2[y], (n, y), (n, y), y


# -- discrete logarithm ---------------------------------------------------------------------

def brute_dlog(p, g, y):
    acc = 1
    for e in range(p - 1):
        if acc == y % p:
            return e
        acc = acc * g % p
    raise LrrError(f"{y} has no logarithm to base {g} mod {p}")


def dlog_self_reduce(p, g, x, r=None, rng=None):
    """Blind x as y = x g^r; returns (y, r, unblind) with unblind(DLOG(y)) = DLOG(x)."""
    if not 1 <= x % p:
        raise LrrError("x must be a unit mod p")
    if r is None:
        r = (rng or random.Random(0)).randrange(1, p)
    y = x * pow(g, r, p) % p
    return y, r, lambda z: (z - r) % (p - 1)


# -- constant-round evaluation with few faults ------------------------------------------------

def eval_log_params(nbits, n):
    """Block size q = ceil(log n) and padded length M (least multiple of q
    not below nbits)."""
    q = log_block(n)
    M = -(-nbits // q) * q
    return q, M


def eval_log(c, tables, m, inputs, default=0):
    """Evaluate boolean functions of all players' input bits in constant rounds.

    tables: one truth table per output bit over the n*m input bits, bit
    m*(i-1)+k of the joint input being bit k of player i's value (k from 0).
    inputs: {player: int}. Returns {player: [output bits]}.
    """
    from .zk import prove_predicates, monomial_circuit

    F, net = c.F, c.net
    n = net.n
    t = c.t
    nbits = n * m
    q, M = eval_log_params(nbits, n)
    hs_list = [change_variables(canonical_poly(F, tab, nbits), nbits, q) for tab in tables]
    blocks = M // q
    r = blocks << q
    if n < blocks * t + 1:
        raise SuiteError(f"{n} players cannot interpolate degree {blocks * t}; need n > t*M/q")
    c.last_evallog = {"q": q, "M": M, "r": r, "degree": blocks * t}
    # 1. share the bits
    deals = []
    for i in range(1, n + 1):
        v = inputs.get(i, 0)
        for k in range(m):
            deals.append((i, v >> k & 1))
    hs = yield from c.share_many(deals)
    xs = [h if h.ok else c.constant(default) for h in hs] + [c.constant(0)] * (M - nbits)
    # 2. expand the w variables; products of two or more bits go through the formula evaluator
    w = [None] * r
    forms, where = [], []
    for b in range(blocks):
        for mask in range(1 << q):
            idx = (b << q) + mask
            sel = [b * q + i for i in range(q) if mask >> i & 1]
            if not sel:
                w[idx] = c.constant(1)
            elif len(sel) == 1:
                w[idx] = xs[sel[0]]
            else:
                f = var(1)
                for k in range(2, len(sel) + 1):
                    f = fmul(f, var(k))
                forms.append((f, {k: xs[s] for k, s in enumerate(sel, 1)}))
                where.append(idx)
    if forms:
        merged, shifted = {}, []
        for f, vals in forms:
            base = len(merged)
            for k, h in vals.items():
                merged[base + k] = h
            shifted.append(_shift(f, base))
        prods = yield from eval_formulas(c, shifted, merged)
        for idx, h in zip(where, prods):
            w[idx] = h
    # 3. blinding coefficients
    coef = yield from c.rand_secrets(r * t)
    # 4. queries w^i_j = p_j(alpha_i), revealed to player i
    queries = {}
    items = []
    for i in range(1, n + 1):
        a = c.a(i)
        row = []
        for j in range(r):
            terms = [(1, w[j])]
            pw = 1
            for k in range(t):
                pw = F.mul(pw, a)
                terms.append((pw, coef[j * t + k]))
            row.append(c.lin(0, terms))
        queries[i] = row
        items += [(h, i) for h in row]
    vals = yield from c.reveal_to_many(items)
    seen = {i: vals[(i - 1) * r:i * r] for i in range(1, n + 1)}
    c.last_queries = seen
    # 5. local evaluation and resharing
    vdeals = []
    for i in range(1, n + 1):
        q_i = seen[i]
        for hf in hs_list:
            v = hf(q_i) if None not in q_i else 0
            off = net.deviation(i, "evallog_offset")
            if off:
                v = F.add(v, F.reduce(off))
            vdeals.append((i, v))
    V = yield from c.share_many(vdeals)
    N = len(tables)
    # 6. every player proves its values, 7. majority vote
    circuits = [monomial_circuit(F, hf, n) for hf in hs_list]
    stmts = []
    for i in range(1, n + 1):
        for b, hf in enumerate(hs_list):
            vh = V[(i - 1) * N + b]
            if not vh.ok:
                continue
            stmts.append((i, circuits[b], queries[i], seen[i], vh))
    verdicts = yield from prove_predicates(c, stmts)
    bad = {i for i in range(1, n + 1) for b in range(N) if not V[(i - 1) * N + b].ok}
    bad |= {st[0] for st, ok in zip(stmts, verdicts) if not ok}
    bad = sorted(bad)
    c.last_disqualified = bad
    if bad:
        pub = yield from c.reveal_many([h for i in bad for h in queries[i]])
        for k, i in enumerate(bad):
            qv = pub[k * r:(k + 1) * r]
            for b, hf in enumerate(hs_list):
                V[(i - 1) * N + b] = c.constant(hf(qv))
    # 8. interpolate the free terms: a public linear combination
    lam = lagrange_weights(F, [c.a(i) for i in range(1, n + 1)], 0)
    outs = [c.lin(0, [(lam[i - 1], V[(i - 1) * N + b]) for i in range(1, n + 1)]) for b in range(N)]
    res = yield from c.reveal_many(outs)
    return {i: list(res) for i in net.players}


def _shift(f, k):
    from .constrounds import _shift_vars
    return _shift_vars(f, k)
