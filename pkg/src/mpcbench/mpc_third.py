"""Unconditional multiparty computation for t < n/3.

Secrets are held through bivariate sharings: for a dealer polynomial
P(u, v) of degree t in each variable, player i keeps the row
f_i(u) = P(u, alpha_i) and the column g_i(v) = P(alpha_i, v), and its
piece of the secret is f_i(0). The values g_j(alpha_k) held by j form a
Shamir sharing of player k's piece ("pieces of pieces"), which is what
product proofs and public dispute resolution run on.

All operations are generator sub-protocols over netsim; see BGW for the
entry points. In passive mode the same interface runs on plain Shamir
pieces with no verification rounds.
"""

from dataclasses import dataclass, replace

from .field import Poly, DecodeError, FieldError, decode_with_errors, lagrange_basis
from .netsim import send, bcast, local


class SuiteError(ValueError):
    pass


@dataclass
class Handle:
    """A shared value as seen by the whole network.

    pieces[i] is player i's piece; rows/cols are the bivariate projections
    when the handle was produced by verifiable sharing.
    """
    t: int
    pieces: dict
    rows: dict = None
    cols: dict = None
    ok: bool = True
    label: str = ""

    @property
    def verified(self):
        return self.rows is not None


def _as_poly(F, payload, t):
    """Parse a received coefficient list; None when malformed or too long."""
    if not isinstance(payload, (list, tuple)):
        return None
    try:
        cs = [int(c) for c in payload]
    except (TypeError, ValueError):
        return None
    if any(not 0 <= c < F.order for c in cs):
        return None
    p = Poly(F, cs)
    if p.degree > t:
        return None
    return p


def bivariate(F, t, rng, secret=None, base=None, degree=None):
    """Coefficient grid c[a][b] of u^a v^b with P(0, v) = base(v) (or P(0,0) = secret)."""
    d = t if degree is None else degree
    c = [[F.random(rng) for _ in range(d + 1)] for _ in range(d + 1)]
    if base is not None:
        bc = list(base.coeffs) + [0] * (d + 1 - len(base.coeffs))
        for b in range(d + 1):
            c[0][b] = bc[b]
    else:
        c[0][0] = F.reduce(secret)
    return c


def bivariate_row(F, c, y):
    """f(u) = P(u, y)."""
    out = []
    for a in range(len(c)):
        acc, yp = 0, 1
        for b in range(len(c[a])):
            acc = F.add(acc, F.mul(c[a][b], yp))
            yp = F.mul(yp, y)
        out.append(acc)
    return Poly(F, out)


def bivariate_col(F, c, x):
    """g(v) = P(x, v)."""
    out = []
    for b in range(len(c[0])):
        acc, xp = 0, 1
        for a in range(len(c)):
            acc = F.add(acc, F.mul(c[a][b], xp))
            xp = F.mul(xp, x)
        out.append(acc)
    return Poly(F, out)


def truncated_basis(F, xs, t):
    """Lagrange basis on xs, each reduced mod v^(t+1)."""
    return [L.truncate(t + 1) for L in lagrange_basis(F, xs)]


def robust_decode(F, pts, t):
    pts = [(x, y) for x, y in pts if y is not None]
    if len(pts) < t + 1:
        raise DecodeError("too few values")
    e = (len(pts) - t - 1) // 2
    return decode_with_errors(F, pts, t, e)


def _int_or_none(F, v):
    if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < F.order:
        return None
    return v


class BGW:
    """Protocol context for the t < n/3 suite.

    mode "byzantine" uses verifiable sharing and checked multiplication;
    mode "passive" uses plain Shamir sharing and the short degree reduction.
    """

    suite = "third"

    def __init__(self, net, t, mode="byzantine", check_bound=True):
        if check_bound and not 3 * t < net.n:
            raise SuiteError(f"the t<n/3 suite requires 3t<n (t={t}, n={net.n})")
        if t < 0:
            raise SuiteError("t must be non-negative")
        if mode not in ("byzantine", "passive"):
            raise SuiteError(f"unknown mode {mode!r}")
        self.net = net
        self.F = net.field
        self.n = net.n
        self.t = t
        self.mode = mode
        self.alpha = self.F.points(self.n)
        self.P = net.players
        # VSS decisions, kept for reports: label -> accepted
        self.log = []

    def a(self, i):
        return self.alpha[i - 1]

    # -- constants and local operations --------------------------------------

    def constant(self, c):
        F = self.F
        c = F.reduce(c)
        if self.mode == "passive":
            return Handle(self.t, {i: c for i in self.P})
        cp = Poly(F, [c])
        return Handle(self.t, {i: c for i in self.P}, {i: cp for i in self.P}, {i: cp for i in self.P})

    def lin(self, c0, terms):
        """c0 + sum c*X over (c, X) terms; no communication."""
        F = self.F
        terms = [(F.reduce(c), h) for c, h in terms]
        if not terms:
            return self.constant(c0)
        for _, h in terms:
            if h.t != self.t:
                raise SuiteError("handles with different thresholds cannot be combined")
        c0 = F.reduce(c0)
        pieces = {}
        for i in self.P:
            acc = c0
            for c, h in terms:
                acc = F.add(acc, F.mul(c, h.pieces[i]))
            pieces[i] = acc
        verified = terms and all(h.verified for _, h in terms)
        rows = cols = None
        if verified:
            rows, cols = {}, {}
            base = Poly(F, [c0])
            for i in self.P:
                r, q = base, base
                for c, h in terms:
                    r = r + h.rows[i].scale(c)
                    q = q + h.cols[i].scale(c)
                rows[i], cols[i] = r, q
        ok = all(h.ok for _, h in terms)
        return Handle(self.t, pieces, rows, cols, ok)

    def add(self, x, y):
        return self.lin(0, [(1, x), (1, y)])

    def sub(self, x, y):
        return self.lin(0, [(1, x), (self.F.neg(1), y)])

    def scale(self, c, x):
        return self.lin(0, [(c, x)])

    def linear_combine(self, handles, constants):
        """Value c_0 + sum c_j * X_j with constants = (c_0, c_1, ..)."""
        if len(constants) != len(handles) + 1:
            raise SuiteError("need one constant per handle plus the free term")
        return self.lin(constants[0], list(zip(constants[1:], handles)))

    # -- sharing ---------------------------------------------------------------

    def share(self, dealer, value):
        hs = yield from self.share_many([(dealer, value)])
        return hs[0]

    def share_many(self, deals):
        """deals: list of (dealer, value) or (dealer, value, base_poly)."""
        if self.mode == "passive":
            return (yield from self.shamir_many(deals))
        return (yield from self.vss_many(deals))

    def shamir_many(self, deals):
        F, t = self.F, self.t
        sid = self.net.sid("sh")
        out, polys = [], []
        for k, d in enumerate(deals):
            dealer, value = d[0], d[1]
            base = d[2] if len(d) > 2 else None
            rng = self.net.tape(dealer)
            if base is None:
                base = Poly(F, [F.reduce(value)] + [F.random(rng) for _ in range(t)])
            polys.append(base)
            for i in self.P:
                out.append(send(dealer, i, f"{sid}.{k}", base(self.a(i))))
        inbox = yield out
        res = []
        for k, d in enumerate(deals):
            pieces = {}
            for i in self.P:
                v = _int_or_none(F, inbox.get(i, d[0], f"{sid}.{k}"))
                pieces[i] = 0 if v is None else v
            res.append(Handle(t, pieces, label=f"{sid}.{k}"))
        return res

    def vss_many(self, deals, verify=True):
        """Verifiable sharing of many values at once (7 rounds, or 1 unverified).

        Round layout: rows/columns; degree complaints with cross values;
        complaint lists; dealer answers disputes; impeachments; dealer
        publishes impeachers' polynomials; final disqualification votes.
        """
        F, t, P, net = self.F, self.t, self.P, self.net
        sid = net.sid("vss")
        K = len(deals)
        grids = []
        out = []
        for k, d in enumerate(deals):
            dealer, value = d[0], d[1]
            base = d[2] if len(d) > 2 else None
            rng = net.tape(dealer)
            extra = net.deviation(dealer, "vss_degree", 0)
            c = bivariate(F, t, rng, secret=value, base=base, degree=t + extra)
            off = net.deviation(dealer, "vss_offset")
            if off:
                c[0][0] = F.add(c[0][0], F.reduce(off))
            grids.append(c)
            for i in P:
                row = bivariate_row(F, c, self.a(i))
                col = bivariate_col(F, c, self.a(i))
                out.append(send(dealer, i, f"{sid}.{k}.rc", (row.coeffs, col.coeffs)))
        inbox = yield out

        rows = [{} for _ in range(K)]
        cols = [{} for _ in range(K)]
        degbad = [set() for _ in range(K)]
        for k, d in enumerate(deals):
            for i in P:
                m = inbox.get(i, d[0], f"{sid}.{k}.rc")
                r = q = None
                if isinstance(m, (list, tuple)) and len(m) == 2:
                    r, q = _as_poly(F, m[0], t), _as_poly(F, m[1], t)
                if r is None or q is None:
                    degbad[k].add(i)
                rows[k][i] = r if r is not None else Poly(F, [])
                cols[k][i] = q if q is not None else Poly(F, [])

        if not verify:
            res = []
            for k in range(K):
                res.append(Handle(t, {i: rows[k][i](0) for i in P}, rows[k], cols[k],
                                  True, f"{sid}.{k}"))
            return res

        # degree complaints; cross-check values f_i(alpha_j) to j
        out = []
        for k in range(K):
            for i in P:
                out.append(bcast(i, f"{sid}.{k}.deg", i in degbad[k]))
                if i in degbad[k]:
                    continue
                for j in P:
                    if j != i:
                        out.append(send(i, j, f"{sid}.{k}.x", rows[k][i](self.a(j))))
        inbox = yield out
        public_deg = [{i for i in P if inbox.bcast(i, f"{sid}.{k}.deg") is True} for k in range(K)]

        # complaint lists: j names every i whose value disagrees with g_j(alpha_i)
        out = []
        for k in range(K):
            for j in P:
                if j in degbad[k]:
                    lst = ()
                else:
                    lst = tuple(i for i in P if i != j and
                                inbox.get(j, i, f"{sid}.{k}.x") != cols[k][j](self.a(i)))
                out.append(bcast(j, f"{sid}.{k}.L", lst))
        inbox = yield out
        disputes = []
        for k in range(K):
            ds = set()
            for j in P:
                lst = inbox.bcast(j, f"{sid}.{k}.L")
                if isinstance(lst, (list, tuple)):
                    for i in lst:
                        if isinstance(i, int) and i in P and i != j:
                            ds.add((j, i))
            disputes.append(sorted(ds))

        # dealer resolves each dispute (j, i) by publishing P(alpha_j, alpha_i)
        out = []
        for k, d in enumerate(deals):
            if disputes[k]:
                c = grids[k]
                vals = tuple((j, i, bivariate_row(F, c, self.a(i))(self.a(j))) for j, i in disputes[k])
                out.append(bcast(d[0], f"{sid}.{k}.res", vals))
        inbox = yield out
        public_fail = [False] * K
        resolved = []
        for k, d in enumerate(deals):
            got = {}
            m = inbox.bcast(d[0], f"{sid}.{k}.res")
            if isinstance(m, (list, tuple)):
                for e in m:
                    if isinstance(e, (list, tuple)) and len(e) == 3:
                        got[(e[0], e[1])] = _int_or_none(F, e[2])
            if any(got.get(ds) is None for ds in disputes[k]):
                public_fail[k] = True
            resolved.append(got)

        # impeachment: own polynomials bad, or a dispute settled against own values
        out = []
        imp_local = [set() for _ in range(K)]
        for k in range(K):
            for i in P:
                bad = i in degbad[k]
                for (j, l), z in resolved[k].items():
                    if z is None:
                        continue
                    if l == i and z != rows[k][i](self.a(j)):
                        bad = True
                    if j == i and z != cols[k][i](self.a(l)):
                        bad = True
                if bad:
                    imp_local[k].add(i)
                out.append(bcast(i, f"{sid}.{k}.M", bad))
        inbox = yield out
        impeached = [{i for i in P if inbox.bcast(i, f"{sid}.{k}.M") is True} for k in range(K)]

        # dealer publishes the impeachers' polynomials
        out = []
        for k, d in enumerate(deals):
            if impeached[k]:
                c = grids[k]
                polys = tuple((i, bivariate_row(F, c, self.a(i)).coeffs, bivariate_col(F, c, self.a(i)).coeffs)
                              for i in sorted(impeached[k]))
                out.append(bcast(d[0], f"{sid}.{k}.pub", polys))
        inbox = yield out
        published = []
        for k, d in enumerate(deals):
            pub = {}
            m = inbox.bcast(d[0], f"{sid}.{k}.pub")
            if isinstance(m, (list, tuple)):
                for e in m:
                    if isinstance(e, (list, tuple)) and len(e) == 3 and e[0] in impeached[k]:
                        r, q = _as_poly(F, e[1], t), _as_poly(F, e[2], t)
                        if r is not None and q is not None:
                            pub[e[0]] = (r, q)
            if set(pub) != impeached[k]:
                public_fail[k] = True
            # published polynomials must agree with the dealer's own dispute answers
            for (j, l), z in resolved[k].items():
                if j in pub and pub[j][1](self.a(l)) != z:
                    public_fail[k] = True
                if l in pub and pub[l][0](self.a(j)) != z:
                    public_fail[k] = True
            published.append(pub)

        # votes: a non-impeacher checks every published pair against its own
        out = []
        for k in range(K):
            for i in P:
                if i in impeached[k]:
                    rows[k][i], cols[k][i] = published[k].get(i, (Poly(F, []), Poly(F, [])))
                    continue
                vote = False
                for j, (r, q) in published[k].items():
                    if r(self.a(i)) != cols[k][i](self.a(j)) or q(self.a(i)) != rows[k][i](self.a(j)):
                        vote = True
                out.append(bcast(i, f"{sid}.{k}.dq", vote))
        inbox = yield out
        res = []
        for k, d in enumerate(deals):
            votes = {i for i in P if inbox.bcast(i, f"{sid}.{k}.dq") is True}
            against = len(impeached[k] | votes | public_deg[k])
            accepted = not public_fail[k] and against < t + 1
            label = f"{sid}.{k}"
            self.log.append((label, d[0], accepted))
            if accepted:
                res.append(Handle(t, {i: rows[k][i](0) for i in P}, rows[k], cols[k], True, label))
            else:
                h = self.constant(0)
                res.append(replace(h, ok=False, label=label))
        return res

    # -- reconstruction -----------------------------------------------------

    def decode_pieces(self, pieces):
        pts = [(self.a(i), _int_or_none(self.F, v)) for i, v in sorted(pieces.items())]
        return robust_decode(self.F, pts, self.t)(0)

    def reveal(self, h):
        vs = yield from self.reveal_many([h])
        return vs[0]

    def reveal_many(self, handles):
        """Public robust reconstruction; every honest player learns every value."""
        sid = self.net.sid("rv")
        out = [bcast(i, sid, tuple(h.pieces[i] for h in handles)) for i in self.P]
        inbox = yield out
        res = []
        for k in range(len(handles)):
            got = {}
            for i in self.P:
                m = inbox.bcast(i, sid)
                got[i] = m[k] if isinstance(m, (list, tuple)) and len(m) == len(handles) else None
            res.append(self.decode_pieces(got))
        return res

    def reveal_to_many(self, items):
        """Private reconstruction: items = [(handle, receiver)]; returns values."""
        sid = self.net.sid("rt")
        out = []
        for k, (h, r) in enumerate(items):
            for i in self.P:
                out.append(send(i, r, f"{sid}.{k}", h.pieces[i]))
        inbox = yield out
        res = []
        for k, (h, r) in enumerate(items):
            got = {i: inbox.get(r, i, f"{sid}.{k}") for i in self.P}
            res.append(self.decode_pieces(got))
        return res

    # -- multiplication -------------------------------------------------------

    def multiply(self, x, y):
        hs = yield from self.multiply_many([(x, y)])
        return hs[0]

    def multiply_many(self, pairs):
        if not pairs:
            return (yield from local([]))
        if self.t == 0:
            return (yield from local(self._mult_local(pairs)))
        if self.mode == "passive":
            return (yield from self._mult_passive(pairs))
        return (yield from self._mult_byz(pairs))

    def _mult_local(self, pairs):
        # t = 0: every piece is the value itself, so products need no interaction
        F = self.F
        res = []
        for (x, y), pieces in zip(pairs, self._local_products(pairs)):
            rows = cols = None
            if x.verified and y.verified:
                rows = {i: Poly(F, [v]) for i, v in pieces.items()}
                cols = dict(rows)
            res.append(Handle(0, pieces, rows, cols, x.ok and y.ok))
        return res

    def _local_products(self, pairs):
        F = self.F
        return [{i: F.mul(x.pieces[i], y.pieces[i]) for i in self.P} for x, y in pairs]

    def _mult_passive(self, pairs):
        """Randomize, reshare and truncate: 3 rounds, honest-but-curious only."""
        F, t, P = self.F, self.t, self.P
        prods = self._local_products(pairs)
        for k, (x, y) in enumerate(pairs):
            d = self.net.deviation
            for i in P:
                off = d(i, "product_offset")
                if off:
                    prods[k][i] = F.add(prods[k][i], F.reduce(off))
        R = yield from self.shamir_many([(i, F.random(self.net.tape(i))) for _ in pairs for i in P])
        rs = [self.lin(0, [(1, R[k * self.n + (i - 1)]) for i in P]) for k in range(len(pairs))]
        deals = []
        for k in range(len(pairs)):
            for i in P:
                deals.append((i, F.add(prods[k][i], F.mul(self.a(i), rs[k].pieces[i]))))
        G = yield from self.shamir_many(deals)
        S = list(P)
        basis = truncated_basis(F, [self.a(k) for k in S], t)
        sid = self.net.sid("tr")
        out = []
        for p in range(len(pairs)):
            for j in P:
                for i in P:
                    val = F.sum(F.mul(basis[s](self.a(i)), G[p * self.n + (k - 1)].pieces[j])
                                for s, k in enumerate(S))
                    out.append(send(j, i, f"{sid}.{p}", val))
        inbox = yield out
        res = []
        for p in range(len(pairs)):
            pieces = {}
            for i in P:
                pts = [(self.a(j), _int_or_none(F, inbox.get(i, j, f"{sid}.{p}"))) for j in P]
                try:
                    pieces[i] = robust_decode(F, pts, t)(0)
                except DecodeError:
                    pieces[i] = 0
            res.append(Handle(t, pieces))
        return res

    def _helper_polys(self, D, rng, target=None):
        """h_1..h_t of degree t with D - sum x^i h_i of degree <= t.

        With a target polynomial C (same free term as D) the free terms of
        the helpers are fixed so that D - sum x^i h_i equals C exactly.
        """
        F, t = self.F, self.t
        delta = list(D.coeffs) + [0] * (2 * t + 1 - len(D.coeffs))
        h = [[F.random(rng) for _ in range(t + 1)] for _ in range(t + 1)]  # h[i] for i = 1..t
        for i in range(t, 0, -1):
            acc = delta[t + i]
            for i2 in range(i + 1, t + 1):
                acc = F.sub(acc, h[i2][t + i - i2])
            h[i][t] = acc
        if target is not None:
            tc = list(target.coeffs) + [0] * (t + 1 - len(target.coeffs))
            for k in range(1, t + 1):
                acc = F.sub(delta[k], tc[k])
                for i in range(1, k):
                    acc = F.sub(acc, h[i][k - i])
                h[k][0] = acc
        return [Poly(F, h[i]) for i in range(1, t + 1)]

    def _mult_byz(self, pairs):
        F, t, P, n = self.F, self.t, self.P, self.n
        NP = len(pairs)
        # Block 1: randomizer contributions and helper polynomials for the proofs
        Ds, helpers = {}, {}
        deals = []
        for p, (x, y) in enumerate(pairs):
            for k in P:
                deals.append((k, F.random(self.net.tape(k))))
        for p, (x, y) in enumerate(pairs):
            for k in P:
                D = x.rows[k] * y.rows[k]
                Ds[p, k] = D
                hs = self._helper_polys(D, self.net.tape(k))
                helpers[p, k] = hs
                for hp in hs:
                    deals.append((k, hp(0), hp))
        block1 = yield from self.vss_many(deals)
        Rh = block1[:NP * n]
        Hh = block1[NP * n:]

        def helper_handles(p, k):
            base = (p * n + (k - 1)) * t
            return Hh[base:base + t]

        rs = []
        for p in range(NP):
            rs.append(self.lin(0, [(1, Rh[p * n + (k - 1)]) for k in P if Rh[p * n + (k - 1)].ok]))
        # Block 2: each k shares gamma_k = x_k y_k + alpha_k rho_k through
        # the degree-t polynomial D - sum x^i h_i + alpha_k * (its row of r)
        deals = []
        for p in range(NP):
            for k in P:
                E = Ds[p, k]
                for i, hp in enumerate(helpers[p, k], start=1):
                    E = E - hp.shift(i)
                C = E + rs[p].rows[k].scale(self.a(k))
                off = self.net.deviation(k, "product_offset")
                if off:
                    C = C + Poly(F, [F.reduce(off)])
                deals.append((k, C(0), C))
        G = yield from self.vss_many(deals)

        # product check: each j broadcasts d_j = c_j - E(alpha_j) per (p, k)
        def share_terms(p, k, j):
            x, y = pairs[p]
            ak = self.a(k)
            a_j = x.cols[j](ak)
            b_j = y.cols[j](ak)
            r_j = rs[p].cols[j](ak)
            h_j = [hh.pieces[j] for hh in helper_handles(p, k)]
            g_j = G[p * n + (k - 1)].pieces[j]
            return a_j, b_j, r_j, h_j, g_j

        def d_value(p, k, j, terms):
            a_j, b_j, r_j, h_j, g_j = terms
            aj = self.a(j)
            E = F.mul(a_j, b_j)
            for i, hv in enumerate(h_j, start=1):
                E = F.sub(E, F.mul(F.pow(aj, i), hv))
            c = F.sub(g_j, F.mul(self.a(k), r_j))
            return F.sub(c, E)

        live = [(p, k) for p in range(NP) for k in P
                if G[p * n + (k - 1)].ok and all(hh.ok for hh in helper_handles(p, k))]
        sid = self.net.sid("pp")
        out = []
        for j in P:
            out.append(bcast(j, sid, tuple(d_value(p, k, j, share_terms(p, k, j)) for p, k in live)))
        inbox = yield out
        complaints = []
        for j in P:
            m = inbox.bcast(j, sid)
            if isinstance(m, (list, tuple)) and len(m) == len(live):
                for (p, k), dv in zip(live, m):
                    if dv != 0:
                        complaints.append((p, k, j))

        # public resolution: everyone broadcasts the sub-shares of the
        # complainer's values, which are then robustly decoded
        sid = self.net.sid("ppr")
        out = []
        for m in P:
            subs = []
            for p, k, j in complaints:
                x, y = pairs[p]
                aj = self.a(j)
                subs.append((x.rows[m](aj), y.rows[m](aj), rs[p].rows[m](aj),
                             tuple(hh.cols[m](aj) for hh in helper_handles(p, k)),
                             G[p * n + (k - 1)].cols[m](aj)))
            out.append(bcast(m, sid, tuple(subs)))
        inbox = yield out
        bad = set()
        for c_idx, (p, k, j) in enumerate(complaints):
            rows_by_m = {}
            for m in P:
                msg = inbox.bcast(m, sid)
                if isinstance(msg, (list, tuple)) and len(msg) == len(complaints):
                    rows_by_m[m] = msg[c_idx]
            try:
                terms = self._public_terms(rows_by_m, p, k, j)
            except (DecodeError, FieldError, TypeError, ValueError, IndexError):
                continue
            if d_value(p, k, j, terms) != 0:
                bad.add((p, k))

        # truncation with a randomized u * r(u) term, then private row decoding
        sid = self.net.sid("tr")
        out = []
        cols_new = []
        for p in range(NP):
            S = [k for k in P if (p, k) in set(live) and (p, k) not in bad]
            if len(S) < 2 * t + 1:
                raise SuiteError("too few valid product reshares")
            basis = truncated_basis(F, [self.a(k) for k in S], t)
            colp = {}
            for j in P:
                g = Poly(F, [])
                for s, k in enumerate(S):
                    g = g + basis[s].scale(G[p * n + (k - 1)].pieces[j])
                colp[j] = g
                for i in P:
                    out.append(send(j, i, f"{sid}.{p}", g(self.a(i))))
            cols_new.append(colp)
        inbox = yield out
        res = []
        for p in range(NP):
            pieces, rows = {}, {}
            for i in P:
                pts = [(self.a(j), _int_or_none(F, inbox.get(i, j, f"{sid}.{p}"))) for j in P]
                try:
                    f = robust_decode(F, pts, t)
                except DecodeError:
                    f = Poly(F, [])
                rows[i] = f
                pieces[i] = f(0)
            res.append(Handle(t, pieces, rows, cols_new[p], True))
        self.last_disqualified = sorted(bad)
        return res

    def _public_terms(self, rows_by_m, p, k, j):
        F, t = self.F, self.t
        ak = self.a(k)

        def dec(idx, sub=None):
            pts = []
            for m, e in rows_by_m.items():
                v = e[idx] if sub is None else e[idx][sub]
                pts.append((self.a(m), _int_or_none(F, v)))
            return robust_decode(F, pts, t)

        a_j = dec(0)(ak)
        b_j = dec(1)(ak)
        r_j = dec(2)(ak)
        h_j = [dec(3, i)(0) for i in range(t)]
        g_j = dec(4)(0)
        return a_j, b_j, r_j, h_j, g_j

    # -- product proof as a stand-alone step -------------------------------------

    def prove_product(self, alice, A, B, C):
        """Alice, who dealt A, B and C, proves C = A*B. Returns accept flag.

        Helper polynomials are shared verifiably, then every player
        broadcasts its local check value and disputed values are publicly
        recomputed from sub-shares.
        """
        F, t, P = self.F, self.t, self.P
        xs = [self.a(i) for i in P]
        fa = robust_decode(F, list(zip(xs, [A.pieces[i] for i in P])), t)
        fb = robust_decode(F, list(zip(xs, [B.pieces[i] for i in P])), t)
        fc = robust_decode(F, list(zip(xs, [C.pieces[i] for i in P])), t)
        D = fa * fb
        hs = self._helper_polys(D, self.net.tape(alice), target=fc)
        H = yield from self.vss_many([(alice, hp(0), hp) for hp in hs])
        if not all(h.ok for h in H):
            yield from local()
            return False

        def d_value(j, a_j, b_j, h_j, c_j):
            aj = self.a(j)
            E = F.mul(a_j, b_j)
            for i, hv in enumerate(h_j, start=1):
                E = F.sub(E, F.mul(F.pow(aj, i), hv))
            return F.sub(c_j, E)

        sid = self.net.sid("pp")
        out = [bcast(j, sid, d_value(j, A.pieces[j], B.pieces[j], [h.pieces[j] for h in H], C.pieces[j]))
               for j in P]
        inbox = yield out
        complaints = [j for j in P if inbox.bcast(j, sid) not in (0, None)]
        sid = self.net.sid("ppr")
        out = []
        for m in P:
            subs = tuple((A.cols[m](self.a(j)), B.cols[m](self.a(j)),
                          tuple(h.cols[m](self.a(j)) for h in H), C.cols[m](self.a(j)))
                         for j in complaints)
            out.append(bcast(m, sid, subs))
        inbox = yield out
        accept = True
        for c_idx, j in enumerate(complaints):
            def dec(idx, sub=None):
                pts = []
                for m in P:
                    msg = inbox.bcast(m, sid)
                    v = None
                    if isinstance(msg, (list, tuple)) and len(msg) == len(complaints):
                        v = msg[c_idx][idx] if sub is None else msg[c_idx][idx][sub]
                    pts.append((self.a(m), _int_or_none(F, v)))
                return robust_decode(F, pts, t)(0)
            try:
                vals = (dec(0), dec(1), [dec(2, i) for i in range(t)], dec(3))
            except (DecodeError, TypeError, IndexError):
                continue
            if d_value(j, *vals) != 0:
                accept = False
        return accept

    # -- randomness ------------------------------------------------------------

    def rand_secret(self):
        hs = yield from self.share_many([(i, self.F.random(self.net.tape(i))) for i in self.P])
        return self.lin(0, [(1, h) for h in hs if h.ok])

    def rand_secrets(self, count):
        deals = [(i, self.F.random(self.net.tape(i))) for _ in range(count) for i in self.P]
        hs = yield from self.share_many(deals)
        res = []
        for c in range(count):
            chunk = hs[c * self.n:(c + 1) * self.n]
            res.append(self.lin(0, [(1, h) for h in chunk if h.ok]))
        return res

    def rand_bit(self):
        """Uniform shared bit from every player's contribution; bad bits excluded."""
        deals = []
        for i in self.P:
            b = self.net.tape(i).randrange(2)
            fake = self.net.deviation(i, "bit_value")
            deals.append((i, b if fake is None else fake))
        B = yield from self.share_many(deals)
        sq = yield from self.multiply_many([(b, b) for b in B])
        Z = yield from self.reveal_many([self.sub(s, b) for s, b in zip(sq, B)])
        good = [b for b, z, in zip(B, Z) if z == 0 and b.ok]
        self.last_excluded = [i for i, z in zip(self.P, Z) if z != 0]
        return (yield from self.xor_many(good))

    def xor_many(self, bits):
        F = self.F
        if not bits:
            return (yield from local(self.constant(0)))
        if F.char == 2:
            return (yield from local(self.lin(0, [(1, b) for b in bits])))
        level = list(bits)
        while len(level) > 1:
            pairs = [(level[k], level[k + 1]) for k in range(0, len(level) - 1, 2)]
            prods = yield from self.multiply_many(pairs)
            nxt = [self.lin(0, [(1, x), (1, y), (F.neg(2), xy)]) for (x, y), xy in zip(pairs, prods)]
            if len(level) % 2:
                nxt.append(level[-1])
            level = nxt
        return level[0]

    # -- circuits --------------------------------------------------------------

    def eval_circuit(self, circuit, inputs, default=0):
        """Gate-by-gate evaluation; returns {player: [output values]}.

        Inputs of a player whose sharing is rejected default to `default`.
        """
        F = self.F
        deals, ids = [], []
        for g in circuit.inputs():
            ids.append(g.id)
            deals.append((g.owner, F.reduce(circuit.input_value(inputs, g))))
        hs = yield from self.share_many(deals)
        val = {}
        for gid, h in zip(ids, hs):
            val[gid] = h if h.ok else self.constant(default)
        for level in circuit.mult_levels():
            for g in level["lin"]:
                val[g.id] = self._lin_gate(g, val)
            pairs = [(val[g.refs[0]], val[g.refs[1]]) for g in level["mul"]]
            prods = yield from self.multiply_many(pairs)
            for g, h in zip(level["mul"], prods):
                val[g.id] = h
        items = [(val[ref], p) for ref, players in circuit.outputs for p in players]
        vals = yield from self.reveal_to_many(items)
        out = {p: [] for p in self.P}
        for (h, p), v in zip(items, vals):
            out[p].append(v)
        return out

    def _lin_gate(self, g, val):
        if g.kind == "const":
            return self.constant(g.consts[0])
        return self.lin(g.consts[0], [(c, val[r]) for c, r in zip(g.consts[1:], g.refs)])


# -- arithmetic circuits ---------------------------------------------------------

@dataclass
class Gate:
    id: str
    kind: str           # in | const | lin | mul
    consts: tuple = ()
    refs: tuple = ()
    owner: int = 0
    layer: int = 0


class CircuitError(ValueError):
    pass


class ArithmeticCircuit:
    """Layered circuit of input, constant, linear-combination and product gates.

    Text format, one gate per line (``#`` starts a comment)::

        <layer>.<index> in <player>
        <layer>.<index> const <c>
        <layer>.<index> lin <c0> [<c>*<layer>.<index>]...
        <layer>.<index> mul <layer>.<index> <layer>.<index>
        out <layer>.<index> <player>[,<player>...] | all

    References must point to gates on strictly lower layers; inputs sit on
    layer 0.
    """

    def __init__(self, gates, outputs, n):
        self.gates = list(gates)
        self.by_id = {g.id: g for g in self.gates}
        self.outputs = [(ref, tuple(ps)) for ref, ps in outputs]
        self.n = n
        self._validate()

    def _validate(self):
        seen = set()
        for g in sorted(self.gates, key=lambda g: g.layer):
            if g.id in seen:
                raise CircuitError(f"duplicate gate {g.id}")
            for r in g.refs:
                if r not in self.by_id or self.by_id[r].layer >= g.layer:
                    raise CircuitError(f"gate {g.id} references {r} which is not on a lower layer")
            if g.kind == "in" and (g.layer != 0 or not 1 <= g.owner <= self.n):
                raise CircuitError(f"input gate {g.id} must be on layer 0 with a valid owner")
            if g.kind == "mul" and len(g.refs) != 2:
                raise CircuitError(f"product gate {g.id} needs two inputs")
            if g.kind not in ("in", "const", "lin", "mul"):
                raise CircuitError(f"unknown gate kind {g.kind}")
            seen.add(g.id)
        for ref, ps in self.outputs:
            if ref not in self.by_id:
                raise CircuitError(f"output references unknown gate {ref}")
            if any(not 1 <= p <= self.n for p in ps):
                raise CircuitError("output player out of range")

    def inputs(self):
        return [g for g in self.gates if g.kind == "in"]

    def input_value(self, inputs, g):
        mine = [h for h in self.inputs() if h.owner == g.owner]
        v = inputs[g.owner]
        if isinstance(v, (list, tuple)):
            return v[mine.index(g)]
        return v

    def mult_depth(self):
        d = {}
        for g in sorted(self.gates, key=lambda g: g.layer):
            base = max((d[r] for r in g.refs), default=0)
            d[g.id] = base + (1 if g.kind == "mul" else 0)
        return d

    def depth(self):
        d = self.mult_depth()
        return max(d.values(), default=0)

    def mult_levels(self):
        """Groups of gates evaluated together: linear gates then one round of products."""
        d = self.mult_depth()
        order = sorted((g for g in self.gates if g.kind != "in"), key=lambda g: g.layer)
        levels = [{"lin": [], "mul": []} for _ in range(self.depth() + 1)]
        for g in order:
            if g.kind == "mul":
                levels[d[g.id] - 1]["mul"].append(g)
            else:
                levels[d[g.id]]["lin"].append(g)
        # linear gates at the top depth come after the last products
        last = levels.pop()
        if last["lin"]:
            levels.append(last)
        return levels

    def evaluate(self, F, inputs):
        val = {}
        for g in sorted(self.gates, key=lambda g: g.layer):
            if g.kind == "in":
                val[g.id] = F.reduce(self.input_value(inputs, g))
            elif g.kind == "const":
                val[g.id] = F.reduce(g.consts[0])
            elif g.kind == "lin":
                acc = F.reduce(g.consts[0])
                for c, r in zip(g.consts[1:], g.refs):
                    acc = F.add(acc, F.mul(F.reduce(c), val[r]))
                val[g.id] = acc
            else:
                val[g.id] = F.mul(val[g.refs[0]], val[g.refs[1]])
        out = {p: [] for p in range(1, self.n + 1)}
        for ref, ps in self.outputs:
            for p in ps:
                out[p].append(val[ref])
        return out

    def dumps(self):
        lines = []
        for g in sorted(self.gates, key=lambda g: (g.layer, g.id)):
            if g.kind == "in":
                body = f"in {g.owner}"
            elif g.kind == "const":
                body = f"const {g.consts[0]}"
            elif g.kind == "lin":
                body = "lin " + " ".join([str(g.consts[0])] + [f"{c}*{r}" for c, r in zip(g.consts[1:], g.refs)])
            else:
                body = f"mul {g.refs[0]} {g.refs[1]}"
            lines.append(f"{g.id} {body}")
        for ref, ps in self.outputs:
            who = "all" if list(ps) == list(range(1, self.n + 1)) else ",".join(map(str, ps))
            lines.append(f"out {ref} {who}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text, n):
        gates, outputs = [], []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "out":
                    who = parts[2]
                    ps = list(range(1, n + 1)) if who == "all" else [int(x) for x in who.split(",")]
                    outputs.append((parts[1], ps))
                    continue
                gid, kind = parts[0], parts[1]
                layer = int(gid.split(".")[0])
                if kind == "in":
                    gates.append(Gate(gid, "in", owner=int(parts[2]), layer=layer))
                elif kind == "const":
                    gates.append(Gate(gid, "const", (int(parts[2]),), layer=layer))
                elif kind == "lin":
                    consts, refs = [int(parts[2])], []
                    for term in parts[3:]:
                        c, r = term.split("*", 1)
                        consts.append(int(c))
                        refs.append(r)
                    gates.append(Gate(gid, "lin", tuple(consts), tuple(refs), layer=layer))
                elif kind == "mul":
                    gates.append(Gate(gid, "mul", (), (parts[2], parts[3]), layer=layer))
                else:
                    raise CircuitError(f"line {lineno}: unknown gate kind {kind!r}")
            except (IndexError, ValueError) as exc:
                raise CircuitError(f"line {lineno}: cannot parse {raw!r}") from exc
        return cls(gates, outputs, n)


def sum_circuit(n, to_all=True):
    gates = [Gate(f"0.{i}", "in", owner=i, layer=0) for i in range(1, n + 1)]
    gates.append(Gate("1.1", "lin", tuple([0] + [1] * n), tuple(f"0.{i}" for i in range(1, n + 1)), layer=1))
    return ArithmeticCircuit(gates, [("1.1", list(range(1, n + 1)))], n)


def product_circuit(owners, n):
    """Left-deep product of one input per listed owner, output to everyone."""
    gates = [Gate(f"0.{k}", "in", owner=o, layer=0) for k, o in enumerate(owners, 1)]
    cur = "0.1"
    for k in range(2, len(owners) + 1):
        gid = f"{k - 1}.1"
        gates.append(Gate(gid, "mul", (), (cur, f"0.{k}"), layer=k - 1))
        cur = gid
    return ArithmeticCircuit(gates, [(cur, list(range(1, n + 1)))], n)


def random_circuit(rng, n, layers, width, order, mul_prob=0.5):
    """Random layered circuit: one input per player, `width` gates per layer,
    each gate a product or a two-term combination of earlier gates; the last
    gate goes to everyone."""
    gates = [Gate(f"0.{i}", "in", owner=i, layer=0) for i in range(1, n + 1)]
    ids = [g.id for g in gates]
    for layer in range(1, layers + 1):
        new = []
        for k in range(1, width + 1):
            a, b = rng.sample(ids, 2)
            gid = f"{layer}.{k}"
            if rng.random() < mul_prob:
                gates.append(Gate(gid, "mul", (), (a, b), layer=layer))
            else:
                gates.append(Gate(gid, "lin", (rng.randrange(order), rng.randrange(order), 1), (a, b),
                                  layer=layer))
            new.append(gid)
        ids += new
    return ArithmeticCircuit(gates, [(ids[-1], list(range(1, n + 1)))], n)
