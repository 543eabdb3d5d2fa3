"""Application protocols: passwords, ballots, unanimous votes, anonymous mail.

Each protocol is a generator over a suite context (BGW or HalfSuite) and
runs under netsim.execute; the *_program helpers wrap them for that.
"""

from dataclasses import dataclass, field as dc_field

from .field import binary_field
from .mpc_half import HalfSuite
from .mpc_third import BGW, SuiteError
from .netsim import bcast

ACCEPT, REJECT = "accept", "reject"
UNANIMOUS, DISAGREED = "unanimous", "disagreed"


class AppError(ValueError):
    pass


def make_suite(net, t, suite="third", mode="byzantine", k=16):
    if suite == "third":
        return BGW(net, t, mode=mode)
    if suite == "half":
        return HalfSuite(net, t, k=k)
    raise SuiteError(f"unknown suite {suite!r}")


def default_password_field():
    return binary_field(16)


def _need_tally_field(F, n):
    if F.kind != "prime" or F.order <= n:
        raise AppError(f"tallies need a prime field larger than n={n}, got {F!r}")


# -- passwords -------------------------------------------------------------------------

@dataclass
class PasswordRecord:
    user: str
    password: object      # handle
    r: object
    s: object
    logins: int = 0


@dataclass
class AuthResult:
    verdicts: dict        # host -> accept/reject
    w: int
    u: int = None
    retries: int = 0
    certified: bool = False


class PasswordStore:
    def __init__(self):
        self.records = {}

    def get(self, user):
        if user not in self.records:
            raise AppError(f"user {user!r} has no initialized password")
        return self.records[user]


def _fresh_pair_deals(c):
    F = c.F
    deals = []
    for i in c.P:
        tape = c.net.tape(i)
        deals += [(i, F.random(tape)), (i, F.random(tape))]
    return deals


def _sum_pairs(c, hs):
    r = c.lin(0, [(1, h) for h in hs[0::2] if h.ok])
    s = c.lin(0, [(1, h) for h in hs[1::2] if h.ok])
    return r, s


def password_init(c, store, user, password, dealer=1):
    """The user (through `dealer`) shares the password; hosts pre-share r and s."""
    hs = yield from c.share_many([(dealer, password)] + _fresh_pair_deals(c))
    r, s = _sum_pairs(c, hs[1:])
    rec = PasswordRecord(user, hs[0], r, s)
    store.records[user] = rec
    return rec


def password_authenticate(c, store, user, attempt, mode="fast", dealer=1, max_retries=8):
    """Reveal w = (password - attempt) * r; accept iff w = 0.

    certified mode also reveals u = r*s and, while u = 0, swaps in the fresh
    pair and multiplies again. After max_retries the decision falls back to w.
    """
    if mode not in ("fast", "certified"):
        raise AppError(f"unknown authentication mode {mode!r}")
    rec = store.get(user)
    F = c.F
    hs = yield from c.share_many([(dealer, attempt)] + _fresh_pair_deals(c))
    v = c.sub(rec.password, hs[0])
    r_new, s_new = _sum_pairs(c, hs[1:])
    r, s = rec.r, rec.s
    retries = 0
    while True:
        if mode == "fast":
            (w,) = yield from c.multiply_many([(v, r)])
            (wv,) = yield from c.reveal_many([w])
            uv, certified = None, False
            break
        w, u = yield from c.multiply_many([(v, r), (r, s)])
        wv, uv = yield from c.reveal_many([w, u])
        certified = uv != 0
        if certified or retries >= max_retries:
            break
        # u = 0: this pair proves nothing; use the fresh pair and share another
        retries += 1
        r, s = r_new, s_new
        more = yield from c.share_many(_fresh_pair_deals(c))
        r_new, s_new = _sum_pairs(c, more)
    rec.r, rec.s = r_new, s_new
    rec.logins += 1
    verdict = ACCEPT if wv == 0 else REJECT
    return AuthResult({i: verdict for i in c.P}, F.reduce(wv) if wv is not None else None,
                      uv, retries, certified)


def password_program(password, attempt, t=1, mode="fast", suite="third", suite_mode="byzantine",
                     user="user", max_retries=8):
    def prog(net):
        c = make_suite(net, t, suite, suite_mode)
        store = PasswordStore()
        yield from password_init(c, store, user, password)
        res = yield from password_authenticate(c, store, user, attempt, mode, max_retries=max_retries)
        return {i: res for i in net.players}
    return prog


# -- ballots ----------------------------------------------------------------------------

@dataclass
class BallotResult:
    tally: int
    z: dict               # voter -> revealed X(X-1)
    disqualified: list


def _cast(c, votes):
    deals = []
    for i in c.P:
        v = votes[i] if isinstance(votes, dict) else votes[i - 1]
        fake = c.net.deviation(i, "vote_value")
        deals.append((i, v if fake is None else fake))
    return (yield from c.share_many(deals))


def valid_tally(c, votes):
    """Share the votes, reveal Z_i = X_i(X_i - 1), and sum the votes with Z_i = 0."""
    F = c.F
    X = yield from _cast(c, votes)
    prods = yield from c.multiply_many([(x, c.lin(F.neg(1), [(1, x)])) for x in X])
    Z = yield from c.reveal_many(prods)
    good = [x for x, z in zip(X, Z) if z == 0 and x.ok]
    bad = [i for i, x, z in zip(c.P, X, Z) if z != 0 or not x.ok]
    return c.lin(0, [(1, x) for x in good]), dict(zip(c.P, Z)), bad


def secret_ballot(c, votes):
    _need_tally_field(c.F, c.n)
    Y, Z, bad = yield from valid_tally(c, votes)
    (y,) = yield from c.reveal_many([Y])
    return BallotResult(y, Z, bad)


def power_chain(c, x, e):
    """x^e by square-and-multiply; the squarings and products share rounds."""
    acc, sq = None, x
    while e:
        bit, e = e & 1, e >> 1
        todo = []
        if bit and acc is not None:
            todo.append((acc, sq))
        if e:
            todo.append((sq, sq))
        out = (yield from c.multiply_many(todo)) if todo else []
        if bit:
            acc = sq if acc is None else out.pop(0)
        if e:
            sq = out.pop(0)
    return acc if acc is not None else c.constant(1)


@dataclass
class UnanimousResult:
    outcome: str
    revealed: int
    disqualified: list


def unanimous_vote(c, votes, either=False):
    """Reveal f = 1 - (Y - n)^(p-1): 1 iff every vote counted is 1.

    either=True also treats an all-zero vote as unanimous by revealing
    1 - (Y (Y - n))^(p-1).
    """
    F = c.F
    _need_tally_field(F, c.n)
    Y, _, bad = yield from valid_tally(c, votes)
    D = c.lin(F.neg(c.n), [(1, Y)])
    if either:
        D = yield from c.multiply(D, Y)
    V = yield from power_chain(c, D, F.order - 1)
    (f,) = yield from c.reveal_many([c.lin(1, [(F.neg(1), V)])])
    return UnanimousResult(UNANIMOUS if f == 1 else DISAGREED, f, bad)


def ballot_program(votes, t=1, suite="third", suite_mode="byzantine", kind="ballot", either=False):
    def prog(net):
        c = make_suite(net, t, suite, suite_mode)
        if kind == "ballot":
            res = yield from secret_ballot(c, votes)
        else:
            res = yield from unanimous_vote(c, votes, either)
        return {i: res for i in net.players}
    return prog


# -- anonymous mail --------------------------------------------------------------------------

@dataclass
class MailResult:
    received: dict        # receiver -> value/None (permutation), list (mailbox)
    invalid: list = dc_field(default_factory=list)
    collisions: list = dc_field(default_factory=list)
    attempts: int = 1
    undelivered: list = dc_field(default_factory=list)


def _indicator(c, i, dest):
    fake = c.net.deviation(i, "mail_indicator")
    if fake is not None:
        return list(fake)
    return [1 if j == dest else 0 for j in c.P]


def _mail_direct(c, messages, destinations, espionage):
    F, P, n = c.F, c.P, c.n
    deals = [(i, messages.get(i, 0)) for i in P]
    for i in P:
        deals += [(i, b) for b in _indicator(c, i, destinations.get(i))]
    hs = yield from c.share_many(deals)
    M = dict(zip(P, hs[:n]))
    d = {(i, j): hs[n + (a * n) + b] for a, i in enumerate(P) for b, j in enumerate(P)}
    keys = [(i, j) for i in P for j in P]
    # espionage: player i reads M(j) where d(i,j) = 1; mail: M(i) travels to j
    pairs = [(d[k], d[k]) for k in keys]
    pairs += [(M[j] if espionage else M[i], d[i, j]) for i, j in keys]
    prods = yield from c.multiply_many(pairs)
    sq, md = prods[:len(keys)], dict(zip(keys, prods[len(keys):]))
    checks = [c.sub(s, d[k]) for s, k in zip(sq, keys)]
    checks += [c.lin(F.neg(1), [(1, d[i, j]) for j in P]) for i in P]
    if not espionage:
        checks += [c.lin(F.neg(1), [(1, d[i, j]) for i in P]) for j in P]
    opened = yield from c.reveal_many(checks)
    z = dict(zip(keys, opened[:len(keys)]))
    rows = opened[len(keys):len(keys) + n]
    invalid = [i for a, i in enumerate(P)
               if rows[a] != 0 or any(z[i, j] != 0 for j in P) or not d[i, P[0]].ok]
    valid = [i for i in P if i not in invalid]
    if espionage:
        items = [(c.lin(0, [(1, md[i, j]) for j in P]), i) for i in valid]
        got = yield from c.reveal_to_many(items)
        received = {i: None for i in P}
        received.update({r: v for (_, r), v in zip(items, got)})
        return MailResult(received, invalid)
    cols = opened[len(keys) + n:]
    collisions = [j for j, s in zip(P, cols) if s != 0]
    items = [(c.lin(0, [(1, md[i, j]) for i in valid]), j) for j in P if j not in collisions]
    got = yield from c.reveal_to_many(items)
    received = {j: None for j in P}
    received.update({r: v for (_, r), v in zip(items, got)})
    return MailResult(received, invalid, [(0, j, None) for j in collisions])


def _mail_boxes(c, messages, destinations, boxes, max_attempts, first_choice):
    F, P, n = c.F, c.P, c.n
    L = boxes or n
    slots = [(j, l) for j in P for l in range(L)]
    pending = {i for i in P if destinations.get(i) is not None}
    received = {j: [] for j in P}
    collisions, invalid = [], set()
    attempt = 0
    while pending and attempt < max_attempts:
        choice = {}
        for i in sorted(pending):
            if attempt == 0 and first_choice and i in first_choice:
                choice[i] = first_choice[i]
            else:
                choice[i] = c.net.tape(i).randrange(L)
        deals = []
        for i in P:
            target = (destinations.get(i), choice[i]) if i in choice else None
            for sl in slots:
                hit = sl == target
                deals.append((i, messages.get(i, 0) if hit else 0))
                deals.append((i, 1 if hit else 0))
        hs = yield from c.share_many(deals)
        B, C = {}, {}
        for a, i in enumerate(P):
            for b, sl in enumerate(slots):
                base = 2 * (a * len(slots) + b)
                B[sl, i], C[sl, i] = hs[base], hs[base + 1]
        keys = [(sl, i) for i in P for sl in slots]
        S = {i: c.lin(0, [(1, C[sl, i]) for sl in slots]) for i in P}
        pairs = [(C[k], C[k]) for k in keys] + [(S[i], S[i]) for i in P]
        pairs += [(B[k], c.lin(1, [(F.neg(1), C[k])])) for k in keys]
        prods = yield from c.multiply_many(pairs)
        m = len(keys)
        checks = [c.sub(p, C[k]) for p, k in zip(prods[:m], keys)]
        checks += [c.sub(p, S[i]) for p, i in zip(prods[m:m + n], P)]
        checks += prods[m + n:]
        opened = dict(zip(range(len(checks)), (yield from c.reveal_many(checks))))
        bad = set()
        for idx, (sl, i) in enumerate(keys):
            if opened[idx] != 0 or opened[m + n + idx] != 0:
                bad.add(i)
        for a, i in enumerate(P):
            if opened[m + a] != 0 or not C[slots[0], i].ok:
                bad.add(i)
        invalid |= bad
        good = [i for i in P if i not in bad]
        items = []
        for sl in slots:
            items.append((c.lin(0, [(1, B[sl, i]) for i in good]), sl[0]))
            items.append((c.lin(0, [(1, C[sl, i]) for i in good]), sl[0]))
        vals = yield from c.reveal_to_many(items)
        flags = {}
        for b, sl in enumerate(slots):
            bv, cv = vals[2 * b], vals[2 * b + 1]
            flags[sl] = cv
            if cv == 1:
                received[sl[0]].append(bv)
        # each receiver announces its colliding boxes; their senders retry
        sid = c.net.sid("mb")
        out = [bcast(j, sid, tuple(l for l in range(L) if flags[j, l] not in (0, 1))) for j in P]
        inbox = yield out
        for i in sorted(pending):
            j = destinations[i]
            told = inbox.bcast(j, sid) or ()
            if i in bad:
                pending.discard(i)
            elif choice[i] in told:
                collisions.append((attempt, j, choice[i]))
            else:
                pending.discard(i)
        attempt += 1
    return MailResult(received, sorted(invalid), sorted(set(collisions)), attempt, sorted(pending))


def anonymous_mail(c, messages, destinations, mode="permutation", boxes=None, max_attempts=4,
                   first_choice=None):
    """messages, destinations: dicts keyed by sender.

    permutation: destinations form a permutation; receiver j gets sum_i M(i) d(i,j).
    espionage: destinations[i] names the player whose secret i reads; no collision check.
    mailbox: each sender drops its message into a random box of the receiver;
    colliding boxes are announced and their senders retry.
    """
    messages = {i: c.F.reduce(v) for i, v in messages.items()}
    if mode == "permutation":
        return (yield from _mail_direct(c, messages, destinations, False))
    if mode == "espionage":
        return (yield from _mail_direct(c, messages, destinations, True))
    if mode == "mailbox":
        return (yield from _mail_boxes(c, messages, destinations, boxes, max_attempts, first_choice))
    raise AppError(f"unknown mail mode {mode!r}")


def mail_program(messages, destinations, mode="permutation", t=1, suite="third",
                 suite_mode="byzantine", **kw):
    def prog(net):
        c = make_suite(net, t, suite, suite_mode)
        res = yield from anonymous_mail(c, messages, destinations, mode, **kw)
        return {i: res for i in net.players}
    return prog
