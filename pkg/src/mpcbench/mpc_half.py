"""Multiparty computation for t < n/2 with check vectors.

A check vector lets a receiver R verify a value that an intermediary I
passes on later. The issuer S picks a bit row alpha and uniform field rows
beta0, beta1 of length 2k and gives I the masked rows

    gamma0 = beta0 + v * (1 - alpha),   gamma1 = beta1 + v * alpha.

R keeps (alpha, beta0, beta1). Half of the rows are opened to I up front
(cut and choose) so I can check S; the other half later catch an I that
changes v. Because alpha is fixed per (issuer, intermediary, receiver),
vectors from one issuer add up: combining values combines the vectors.

Every piece owner issues vectors for the sub-shares ("pieces of pieces")
of its own piece, so linear combinations of handles stay checkable with no
communication. Dealers also issue vectors for the main pieces.
"""

from dataclasses import dataclass, field as dc_field

from .field import Poly, DecodeError, decode_with_errors, lagrange_weights, interpolate_at
from .netsim import send, bcast, local
from .mpc_third import (Handle, SuiteError, bivariate, bivariate_row, bivariate_col,
                        _as_poly, _int_or_none)


# -- verifiable time release -------------------------------------------------

def _xor_or_add(F, a, b, mode):
    return a ^ b if mode == "bits" else F.add(a, b)


def _mask(F, beta, v, sel, mode):
    if mode == "bits":
        return beta ^ (v & sel)
    return F.add(beta, F.mul(v, sel))


def _vtr_ok(F, g0, g1, a, b0, b1, v, mode):
    return g0 == _mask(F, b0, v, 1 - a, mode) and g1 == _mask(F, b1, v, a, mode)


def verifiable_time_release(S, I, R, b, k, mode="bits", cut=None):
    """Protocol generator; returns {player: output}.

    R outputs the released bit or "reject"; I outputs its phase-one verdict.
    mode "bits" uses exclusive-or over bits; "field" uses field addition
    with uniform beta values.
    """
    def prog(net):
        F = net.field
        ts, ti = net.tape(S), net.tape(I)
        sid = net.sid("vtr")
        # VTR1
        b_I = ts.randrange(2)
        b_R = b ^ b_I
        rows = []
        for _ in range(2 * k):
            a = ts.randrange(2)
            if mode == "bits":
                b0, b1 = ts.randrange(2), ts.randrange(2)
            else:
                b0, b1 = F.random(ts), F.random(ts)
            rows.append((a, b0, b1))
        gam = [(_mask(F, b0, b_I, 1 - a, mode), _mask(F, b1, b_I, a, mode)) for a, b0, b1 in rows]
        cheat = net.deviation(S, "vtr_bad_rows")
        if cheat:
            for i in cheat:
                g0, g1 = gam[i]
                gam[i] = (g0 ^ 1, g1 ^ 1) if mode == "bits" else (F.add(g0, 1), F.add(g1, 1))
        inbox = yield [send(S, R, f"{sid}.r", (b_R, tuple(rows))),
                       send(S, I, f"{sid}.i", (b_I, tuple(gam)))]
        r_msg = inbox.get(R, S, f"{sid}.r")
        i_msg = inbox.get(I, S, f"{sid}.i")
        # VTR2
        idx = tuple(sorted(cut)) if cut is not None else tuple(sorted(ti.sample(range(2 * k), k)))
        inbox = yield [send(I, R, f"{sid}.idx", idx)]
        got_idx = inbox.get(R, I, f"{sid}.idx")
        # VTR3
        reveal = ()
        if r_msg is not None and got_idx is not None:
            reveal = tuple((j, r_msg[1][j]) for j in got_idx if 0 <= j < 2 * k)
        inbox = yield [send(R, I, f"{sid}.rev", reveal)]
        rev = dict(inbox.get(I, R, f"{sid}.rev") or ())
        # VTR4
        verdict = i_msg is not None and len(rev) == k
        if verdict:
            bI, g = i_msg
            for j in idx:
                if j not in rev:
                    verdict = False
                    break
                a, b0, b1 = rev[j]
                if not _vtr_ok(F, g[j][0], g[j][1], a, b0, b1, bI, mode):
                    verdict = False
        inbox = yield [send(I, S, f"{sid}.v", verdict), send(I, R, f"{sid}.v", verdict)]
        # VTR5
        if i_msg is None:
            out_b, out_g = None, None
        else:
            out_b, out_g = i_msg[0], [tuple(x) for x in i_msg[1]]
        forge = net.deviation(I, "vtr_forge")
        if forge and out_g is not None:
            # flip b_I; fix opened rows exactly, guess alpha elsewhere
            adv = net.adversary_tape
            nb = out_b ^ 1
            for j in range(2 * k):
                a = rev[j][0] if j in rev else adv.randrange(2)
                g0, g1 = out_g[j]
                if a == 0:
                    g0 = _mask(F, _xor_or_add(F, g0, _neg(F, out_b, mode), mode), nb, 1, mode)
                else:
                    g1 = _mask(F, _xor_or_add(F, g1, _neg(F, out_b, mode), mode), nb, 1, mode)
                out_g[j] = (g0, g1)
            out_b = nb
        inbox = yield [send(I, R, f"{sid}.rel", (out_b, tuple(out_g) if out_g else None))]
        rel = inbox.get(R, I, f"{sid}.rel")
        out = "reject"
        if rel is not None and rel[1] is not None and r_msg is not None:
            bI, g = rel
            good = all(_vtr_ok(F, g[j][0], g[j][1], *r_msg[1][j], bI, mode) for j in range(2 * k))
            if good:
                out = bI ^ r_msg[0]
        return {S: None, I: "accept" if verdict else "reject", R: out}
    return prog


def _neg(F, v, mode):
    return v if mode == "bits" else F.neg(v)


# -- check vectors for field values ----------------------------------------------

@dataclass
class SharedValue:
    """Shares of one value plus check vectors from a single issuer.

    shares: holder -> share; checks: (holder, receiver) -> (b0, b1, g0, g1).
    """
    t: int
    shares: dict
    issuer: int
    checks: dict
    void: frozenset = frozenset()
    public: dict = dc_field(default_factory=dict)   # holder -> publicly known share


@dataclass
class HalfHandle(Handle):
    dealer: int = 0
    main: dict = None          # (holder, receiver) -> (b0, b1, g0, g1), issuer = dealer
    pops: dict = None          # (owner, holder, receiver) -> (b0, b1, g0, g1), issuer = owner
    void: frozenset = frozenset()
    published: dict = dc_field(default_factory=dict)   # holder -> public piece


class HalfSuite:
    """Protocol context for the t < n/2 suite."""

    suite = "half"

    def __init__(self, net, t, k=16, players=None, check_bound=True):
        P = list(players) if players is not None else list(net.players)
        if check_bound and not 2 * t < len(P):
            raise SuiteError(f"the t<n/2 suite requires 2t<n (t={t}, n={len(P)})")
        self.net = net
        self.F = net.field
        self.t = t
        self.k = k
        self.P = P
        self.n = len(P)
        self._alpha = {}
        self._revealed = {}
        self.mode = "byzantine"
        self.disqualified = []

    def a(self, i):
        return self.F.from_int(i)

    # -- check-vector plumbing ------------------------------------------------

    def _alpha_row(self, issuer, j, m):
        key = (issuer, j, m)
        if key not in self._alpha:
            tape = self.net.tape(issuer)
            self._alpha[key] = tuple(tape.randrange(2) for _ in range(2 * self.k))
        return self._alpha[key]

    def _cut(self, issuer, j, m):
        key = (issuer, j, m)
        if key not in self._revealed:
            self._revealed[key] = frozenset(self.net.tape(j).sample(range(2 * self.k), self.k))
        return self._revealed[key]

    def _make_vector(self, issuer, j, m, v):
        F = self.F
        tape = self.net.tape(issuer)
        al = self._alpha_row(issuer, j, m)
        draw, q = tape.randrange, F.order
        b0 = tuple(draw(q) for _ in range(2 * self.k))
        b1 = tuple(draw(q) for _ in range(2 * self.k))
        # alpha bits are 0 or 1, so v*(1-a) and v*a select v or nothing
        g0 = tuple(x if a else F.add(x, v) for x, a in zip(b0, al))
        g1 = tuple(F.add(x, v) if a else x for x, a in zip(b1, al))
        return b0, b1, g0, g1

    def _check(self, issuer, j, m, v, vec, rows=None):
        """Receiver m verifies value v against the vector on the hidden rows."""
        F = self.F
        b0, b1, g0, g1 = vec
        al = self._alpha_row(issuer, j, m)
        hidden = rows if rows is not None else [r for r in range(2 * self.k)
                                                 if r not in self._cut(issuer, j, m)]
        for r in hidden:
            if al[r]:
                if g0[r] != b0[r] or g1[r] != F.add(b1[r], v):
                    return False
            elif g0[r] != F.add(b0[r], v) or g1[r] != b1[r]:
                return False
        return True

    def issue_vectors(self, items):
        """3 rounds: issue, open the cut rows to the holder, holder complaints.

        items: list of (issuer, holder, value). Every other player is a
        receiver. Returns {(issuer, holder, receiver): vector} plus the set of
        voided (issuer, holder, receiver) keys.
        """
        F, P, net = self.F, self.P, self.net
        sid = net.sid("cv")
        vecs, out = {}, []
        for n_it, (s, j, v) in enumerate(items):
            for m in P:
                if m == j:
                    continue
                b0, b1, g0, g1 = self._make_vector(s, j, m, v)
                off = net.deviation(s, "cv_offset")
                if off:
                    g0 = tuple(F.add(x, F.reduce(off)) for x in g0)
                    g1 = tuple(F.add(x, F.reduce(off)) for x in g1)
                out.append(send(s, m, f"{sid}.{n_it}.{m}.r", (b0, b1)))
                out.append(send(s, j, f"{sid}.{n_it}.{m}.i", (g0, g1)))
                vecs[n_it, m] = (b0, b1, g0, g1)
        inbox = yield out
        got = {}
        for n_it, (s, j, v) in enumerate(items):
            for m in P:
                if m == j:
                    continue
                r = inbox.get(m, s, f"{sid}.{n_it}.{m}.r")
                g = inbox.get(j, s, f"{sid}.{n_it}.{m}.i")
                ok = (isinstance(r, (list, tuple)) and isinstance(g, (list, tuple)) and len(r) == 2
                      and len(g) == 2 and all(len(x) == 2 * self.k for x in (*r, *g)))
                got[n_it, m] = (tuple(r[0]), tuple(r[1]), tuple(g[0]), tuple(g[1])) if ok else None
        # receiver opens the cut rows (alpha and betas) to the holder
        out = []
        for n_it, (s, j, v) in enumerate(items):
            for m in P:
                if m == j:
                    continue
                vec = got[n_it, m]
                cut = sorted(self._cut(s, j, m))
                al = self._alpha_row(s, j, m)
                payload = None if vec is None else tuple((r, al[r], vec[0][r], vec[1][r]) for r in cut)
                out.append(send(m, j, f"{sid}.{n_it}.{m}.o", payload))
        inbox = yield out
        void = set()
        complaints = {j: [] for j in P}
        for n_it, (s, j, v) in enumerate(items):
            for m in P:
                if m == j:
                    continue
                vec = got[n_it, m]
                opened = inbox.get(j, m, f"{sid}.{n_it}.{m}.o")
                fine = vec is not None and isinstance(opened, (list, tuple)) and len(opened) == self.k
                if fine:
                    for e in opened:
                        try:
                            r, a, b0, b1 = e
                            if vec[2][r] != F.add(b0, F.mul(v, 1 - a)) or vec[3][r] != F.add(b1, F.mul(v, a)):
                                fine = False
                        except (TypeError, ValueError, IndexError):
                            fine = False
                if not fine:
                    complaints[j].append((n_it, m))
        out = [bcast(j, f"{sid}.c", tuple(complaints[j])) for j in P]
        inbox = yield out
        for j in P:
            for e in inbox.bcast(j, f"{sid}.c") or ():
                try:
                    n_it, m = e
                    s, holder, _ = items[n_it]
                except (TypeError, ValueError, IndexError):
                    continue
                if holder == j:
                    void.add((n_it, m))
        res = [{} for _ in items]
        for (n_it, m), vec in got.items():
            res[n_it][m] = vec
        return res, frozenset(void)

    # -- local arithmetic ---------------------------------------------------------

    def constant(self, c):
        F = self.F
        c = F.reduce(c)
        cp = Poly(F, [c])
        pops = {(i, j, m): self._combine_vec(i, j, m, c, [])
                for i in self.P for j in self.P for m in self.P if j != i and m != j}
        return HalfHandle(self.t, {i: c for i in self.P}, {i: cp for i in self.P},
                          {i: cp for i in self.P}, True, "", 0, None, pops,
                          frozenset(), {i: c for i in self.P})

    def _combine_vec(self, issuer, j, m, c0, terms):
        """Combine vectors of one issuer: sum c*vec, then shift by constant c0."""
        F = self.F
        al = self._alpha_row(issuer, j, m)
        L = 2 * self.k
        b0 = [F.neg(F.mul(c0, 1 - a)) for a in al]
        b1 = [F.neg(F.mul(c0, a)) for a in al]
        g0 = [0] * L
        g1 = [0] * L
        for c, vec in terms:
            if vec is None:
                return None
            for r in range(L):
                b0[r] = F.add(b0[r], F.mul(c, vec[0][r]))
                b1[r] = F.add(b1[r], F.mul(c, vec[1][r]))
                g0[r] = F.add(g0[r], F.mul(c, vec[2][r]))
                g1[r] = F.add(g1[r], F.mul(c, vec[3][r]))
        return tuple(b0), tuple(b1), tuple(g0), tuple(g1)

    def lin(self, c0, terms):
        F = self.F
        terms = [(F.reduce(c), h) for c, h in terms]
        if not terms:
            return self.constant(c0)
        c0 = F.reduce(c0)
        pieces, rows, cols = {}, {}, {}
        for i in self.P:
            pieces[i] = F.add(c0, F.sum(F.mul(c, h.pieces[i]) for c, h in terms))
            rows[i] = Poly(F, [c0])
            cols[i] = Poly(F, [c0])
            for c, h in terms:
                rows[i] = rows[i] + h.rows[i].scale(c)
                cols[i] = cols[i] + h.cols[i].scale(c)
        pops = None
        void = frozenset()
        if all(h.pops is not None for _, h in terms):
            pops = {}
            for key in terms[0][1].pops:
                owner, j, m = key
                # sub-shares of piece_owner: the constant c0 is part of every piece
                pops[key] = self._combine_vec(owner, j, m, c0, [(c, h.pops.get(key)) for c, h in terms])
            void = frozenset().union(*[h.void for _, h in terms])
        main = None
        published = {}
        dealers = {h.dealer for _, h in terms}
        if len(dealers) == 1 and all(h.main is not None for _, h in terms):
            d = dealers.pop()
            main = {}
            for key in terms[0][1].main:
                j, m = key
                main[key] = self._combine_vec(d, j, m, c0, [(c, h.main.get(key)) for c, h in terms])
            common = set.intersection(*[set(h.published) for _, h in terms])
            published = {i: pieces[i] for i in common}
        else:
            d = 0
        ok = all(h.ok for _, h in terms)
        return HalfHandle(self.t, pieces, rows, cols, ok, "", d, main, pops, void, published)

    def add(self, x, y):
        return self.lin(0, [(1, x), (1, y)])

    def sub(self, x, y):
        return self.lin(0, [(1, x), (self.F.neg(1), y)])

    def linear_combine(self, handles, constants):
        h = self.lin(constants[0], list(zip(constants[1:], handles)))
        if h.pops is None:
            h = yield from self.refresh(h)
        else:
            yield from local()
        return h

    def refresh(self, h):
        """Owners issue fresh vectors for the sub-shares of their pieces."""
        items = [(i, j, h.rows[i](self.a(j))) for i in self.P for j in self.P if j != i]
        vecs, void = yield from self.issue_vectors(items)
        pops, pvoid = self._pop_table(items, vecs, void)
        keep = frozenset(v for v in h.void if len(v) == 2)
        return HalfHandle(h.t, h.pieces, h.rows, h.cols, h.ok, h.label, h.dealer, h.main,
                          pops, keep | pvoid, h.published)

    @staticmethod
    def _pop_table(items, vecs, void, start=0, stop=None):
        stop = len(items) if stop is None else stop
        pops, pvoid = {}, set()
        for n_it in range(start, stop):
            s, j, _ = items[n_it]
            for m, vec in vecs[n_it].items():
                pops[(s, j, m)] = vec
                if (n_it, m) in void:
                    pvoid.add(("pop", s, j, m))
        return pops, frozenset(pvoid)

    # -- sharing ----------------------------------------------------------------

    def share(self, dealer, value):
        hs = yield from self.share_many([(dealer, value)])
        return hs[0]

    def share_many(self, deals, pops=True):
        """Verifiable sharing for 2t<n: bivariate consistency with t+1
        impeachment waves, dealer check vectors on main pieces, then owner
        check vectors on the pieces of pieces."""
        F, t, P, net = self.F, self.t, self.P, self.net
        sid = net.sid("vh")
        K = len(deals)
        grids = []
        out = []
        for k, d in enumerate(deals):
            dealer, value = d[0], d[1]
            base = d[2] if len(d) > 2 else None
            c = bivariate(F, t, net.tape(dealer), secret=value, base=base,
                          degree=t + net.deviation(dealer, "vss_degree", 0))
            grids.append(c)
            for i in P:
                out.append(send(dealer, i, f"{sid}.{k}.rc",
                                (bivariate_row(F, c, self.a(i)).coeffs, bivariate_col(F, c, self.a(i)).coeffs)))
        # dealer check vectors on main pieces run alongside the consistency rounds
        main_items = []
        for k, d in enumerate(deals):
            for j in P:
                main_items.append((d[0], j, bivariate_row(F, grids[k], self.a(j))(0)))
        cv_gen = self.issue_vectors(main_items)
        cv_out = next(cv_gen)
        inbox = yield out + cv_out
        cv_out = cv_gen.send(inbox)

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
        out = []
        for k in range(K):
            for i in P:
                if i in degbad[k]:
                    continue
                for j in P:
                    if j != i:
                        out.append(send(i, j, f"{sid}.{k}.x", rows[k][i](self.a(j))))
        inbox = yield out + cv_out
        cv_out = cv_gen.send(inbox)
        out = []
        for k in range(K):
            for j in P:
                lst = () if j in degbad[k] else tuple(
                    i for i in P if i != j and inbox.get(j, i, f"{sid}.{k}.x") != cols[k][j](self.a(i)))
                out.append(bcast(j, f"{sid}.{k}.L", lst))
        inbox = yield out + cv_out
        try:
            cv_gen.send(inbox)
        except StopIteration as stop:
            main_vecs, main_void = stop.value
        disputes = []
        for k in range(K):
            ds = set()
            for j in P:
                for i in inbox.bcast(j, f"{sid}.{k}.L") or ():
                    if isinstance(i, int) and i in P and i != j:
                        ds.add((j, i))
            disputes.append(sorted(ds))
        out = []
        for k, d in enumerate(deals):
            if disputes[k]:
                vals = tuple((j, i, bivariate_row(F, grids[k], self.a(i))(self.a(j))) for j, i in disputes[k])
                out.append(bcast(d[0], f"{sid}.{k}.res", vals))
        inbox = yield out
        fail = [False] * K
        resolved = []
        for k, d in enumerate(deals):
            got = {}
            for e in inbox.bcast(d[0], f"{sid}.{k}.res") or ():
                if isinstance(e, (list, tuple)) and len(e) == 3:
                    got[(e[0], e[1])] = _int_or_none(F, e[2])
            if any(got.get(x) is None for x in disputes[k]):
                fail[k] = True
            resolved.append(got)
        impeached = [set() for _ in range(K)]
        published = [{} for _ in range(K)]
        # wave 1 impeaches on degree or lost disputes; later waves on
        # disagreement with published polynomials
        for wave in range(t + 1):
            out = []
            for k in range(K):
                for i in P:
                    if i in impeached[k]:
                        continue
                    bad = False
                    if wave == 0:
                        bad = i in degbad[k]
                        for (j, l), z in resolved[k].items():
                            if z is None:
                                continue
                            if l == i and z != rows[k][i](self.a(j)):
                                bad = True
                            if j == i and z != cols[k][i](self.a(l)):
                                bad = True
                    else:
                        for j, (r, q) in published[k].items():
                            if r(self.a(i)) != cols[k][i](self.a(j)) or q(self.a(i)) != rows[k][i](self.a(j)):
                                bad = True
                    out.append(bcast(i, f"{sid}.{k}.M{wave}", bad))
            inbox = yield out
            new = [{i for i in P if i not in impeached[k] and inbox.bcast(i, f"{sid}.{k}.M{wave}") is True}
                   for k in range(K)]
            out = []
            for k, d in enumerate(deals):
                impeached[k] |= new[k]
                if new[k]:
                    polys = tuple((i, bivariate_row(F, grids[k], self.a(i)).coeffs,
                                   bivariate_col(F, grids[k], self.a(i)).coeffs) for i in sorted(new[k]))
                    out.append(bcast(d[0], f"{sid}.{k}.pub{wave}", polys))
            inbox = yield out
            for k, d in enumerate(deals):
                got = {}
                for e in inbox.bcast(d[0], f"{sid}.{k}.pub{wave}") or ():
                    if isinstance(e, (list, tuple)) and len(e) == 3 and e[0] in new[k]:
                        r, q = _as_poly(F, e[1], t), _as_poly(F, e[2], t)
                        if r is not None and q is not None:
                            got[e[0]] = (r, q)
                if set(got) != new[k]:
                    fail[k] = True
                published[k].update(got)
                for i, (r, q) in got.items():
                    rows[k][i], cols[k][i] = r, q
        # published polynomials must be mutually consistent and match disputes
        for k in range(K):
            pub = published[k]
            for i, (ri, qi) in pub.items():
                for j, (rj, qj) in pub.items():
                    if i != j and ri(self.a(j)) != qj(self.a(i)):
                        fail[k] = True
            for (j, l), z in resolved[k].items():
                if j in pub and pub[j][1](self.a(l)) != z:
                    fail[k] = True
                if l in pub and pub[l][0](self.a(j)) != z:
                    fail[k] = True
        handles = []
        for k, d in enumerate(deals):
            accepted = not fail[k] and len(impeached[k]) < t + 1
            if not accepted:
                h = self.constant(0)
                h.ok = False
                h.label = f"{sid}.{k}"
                handles.append(h)
                continue
            main, void = {}, set()
            for n_j, j in enumerate(P):
                n_it = k * len(P) + n_j
                for m, vec in main_vecs[n_it].items():
                    main[(j, m)] = vec
                    if (n_it, m) in main_void:
                        void.add((j, m))
            void = frozenset(void)
            pub = {i: rows[k][i](0) for i in published[k]}
            handles.append(HalfHandle(t, {i: rows[k][i](0) for i in P}, rows[k], cols[k], True,
                                      f"{sid}.{k}", d[0], main, None, void, pub))
        if not pops:
            return handles
        # owner vectors for the pieces of pieces
        items = []
        for h in handles:
            for i in P:
                for j in P:
                    if j != i:
                        items.append((i, j, h.rows[i](self.a(j))))
        vecs, pv = yield from self.issue_vectors(items)
        per = len(P) * (len(P) - 1)
        for hk, h in enumerate(handles):
            h.pops, pvoid = self._pop_table(items, vecs, pv, hk * per, (hk + 1) * per)
            h.void = frozenset(h.void) | pvoid
        return handles

    # -- opening ------------------------------------------------------------------

    def shared_piece_of(self, h, owner):
        """The sub-sharing of owner's piece as a SharedValue issued by the owner."""
        shares = {j: h.cols[j](self.a(owner)) for j in self.P}
        checks = {(j, m): h.pops.get((owner, j, m)) for j in self.P for m in self.P if m != j}
        void = frozenset((j, m) for (tag, s, j, m) in (v for v in h.void if isinstance(v, tuple) and len(v) == 4 and v[0] == "pop") if s == owner)
        return SharedValue(h.t, shares, owner, checks, void)

    def shared_main(self, h):
        checks = {key: v for key, v in (h.main or {}).items()}
        void = frozenset(v for v in h.void if isinstance(v, tuple) and len(v) == 2)
        return SharedValue(h.t, dict(h.pieces), h.dealer, checks, void, dict(h.published))

    def sv_lin(self, c0, terms):
        F = self.F
        terms = [(F.reduce(c), s) for c, s in terms]
        issuer = terms[0][1].issuer
        if any(s.issuer != issuer for _, s in terms):
            raise SuiteError("check vectors from different issuers do not combine")
        shares = {j: F.add(F.reduce(c0), F.sum(F.mul(c, s.shares[j]) for c, s in terms)) for j in self.P}
        checks = {}
        for key in terms[0][1].checks:
            j, m = key
            checks[key] = self._combine_vec(issuer, j, m, F.reduce(c0), [(c, s.checks.get(key)) for c, s in terms])
        void = frozenset().union(*[s.void for _, s in terms])
        common = set.intersection(*[set(s.public) for _, s in terms])
        return SharedValue(terms[0][1].t, shares, issuer, checks, void, {j: shares[j] for j in common})

    def open_values(self, values, published=None):
        """Every holder sends its share with masked rows to every receiver.

        Returns {receiver: [value...]}: receivers keep their own share and the
        shares passing their vectors, topping up with unchecked ones only if
        short of t+1.
        """
        F, P = self.F, self.P
        sid = self.net.sid("op")
        out = []
        for j in P:
            for m in P:
                if m == j:
                    continue
                payload = []
                for sv in values:
                    vec = sv.checks.get((j, m))
                    payload.append((sv.shares[j], None if vec is None else (vec[2], vec[3])))
                out.append(send(j, m, sid, tuple(payload)))
        inbox = yield out
        res = {}
        for m in P:
            vals = []
            for idx, sv in enumerate(values):
                good = [(self.a(m), sv.shares[m])]
                spare = []
                for j in P:
                    if j == m:
                        continue
                    msg = inbox.get(m, j, sid)
                    try:
                        share, masked = msg[idx]
                    except (TypeError, ValueError, IndexError):
                        continue
                    share = _int_or_none(F, share)
                    if share is None:
                        continue
                    if j in sv.public:
                        good.append((self.a(j), sv.public[j]))
                        continue
                    vec = sv.checks.get((j, m))
                    if vec is not None and masked is not None and (j, m) not in sv.void and j != sv.issuer:
                        if self._check(sv.issuer, j, m, share, (vec[0], vec[1], masked[0], masked[1])):
                            good.append((self.a(j), share))
                    else:
                        spare.append((self.a(j), share))
                vals.append(self._interp(sv.t, good, spare))
            res[m] = vals
        return res

    def _interp(self, t, good, spare):
        F = self.F
        pts = good if len(good) >= t + 1 else good + spare[:t + 1 - len(good)]
        if len(pts) < t + 1:
            return None
        return interpolate_at(F, pts[:t + 1], 0)

    def reveal_many(self, handles):
        """Open handles to everyone.

        A handle with dealer vectors on its main pieces opens those;
        otherwise each piece is rebuilt from its checked sub-shares.
        """
        F, P = self.F, self.P
        direct = [h for h in handles if h.main is not None]
        viapop = [h for h in handles if h.main is None]
        svs = [self.shared_main(h) for h in direct]
        for h in viapop:
            svs.extend(self.shared_piece_of(h, i) for i in P)
        opened = yield from self.open_values(svs)
        d_pos = {id(h): k for k, h in enumerate(direct)}
        v_pos = {id(h): k for k, h in enumerate(viapop)}
        # each receiver decides; report the value most receivers agree on
        per_player = {m: [] for m in P}
        for m in P:
            vals = opened[m]
            pos = 0
            for h in handles:
                if h.main is not None:
                    k = d_pos[id(h)]
                    v = vals[k]
                else:
                    base = len(direct) + v_pos[id(h)] * len(P)
                    pts = [(self.a(i), vals[base + n]) for n, i in enumerate(P) if vals[base + n] is not None]
                    v = self._interp(h.t, pts, []) if len(pts) >= h.t + 1 else None
                    if len(pts) > h.t + 1:
                        try:
                            v = decode_with_errors(F, pts, h.t, (len(pts) - h.t - 1) // 2)(0)
                        except DecodeError:
                            pass
                per_player[m].append(v)
                pos += 1
        self.last_views = per_player
        res = []
        for idx in range(len(handles)):
            votes = [per_player[m][idx] for m in P]
            res.append(max(set(votes), key=lambda v: (votes.count(v), v is not None)))
        return res

    def reveal(self, h):
        vs = yield from self.reveal_many([h])
        return vs[0]

    # -- product proof ------------------------------------------------------------

    def _coin_width(self, k0):
        w = 1
        while self.F.order ** w < 4 * k0:
            w += 1
        return w

    def _cut_from_coins(self, coins, k0):
        """Uniform k0-subset of range(2k0) from public coins, by rejection."""
        F = self.F
        w = self._coin_width(k0)
        space = F.order ** w
        # small fields: w public field elements make one draw
        draws = [sum(c * F.order ** e for e, c in enumerate(coins[i:i + w]))
                 for i in range(0, len(coins) - w + 1, w)]
        pool = list(range(2 * k0))
        chosen = []
        it = iter(draws)
        while len(chosen) < k0:
            size = len(pool)
            limit = space - (space % size)
            for c in it:
                if c < limit:
                    chosen.append(pool.pop(c % size))
                    break
            else:
                return None
        return sorted(chosen)

    def prove_products(self, claims, k0=16, cut=None):
        """Cut-and-choose product proofs, run for several provers at once.

        claims: list of (alice, a_sv, b_sv, c_sv, a_val, b_val) with the
        SharedValues issued by alice. Returns the list of accept flags as
        decided by a public majority vote.
        """
        F, P, net = self.F, self.P, self.net
        deals = []
        for alice, a_sv, b_sv, c_sv, av, bv in claims:
            tape = net.tape(alice)
            for _ in range(2 * k0):
                r, s = F.random(tape), F.random(tape)
                d = F.mul(F.add(av, r), F.add(bv, s))
                # a cheating prover may offset d on the rows it expects to be unopened
                deals += [(alice, r), (alice, s), (alice, d)]
        # t+1 contributors always include an honest one; a short draw
        # (too many rejections) deals and opens another batch below
        w = self._coin_width(k0)
        coiners = P[:self.t + 1]
        ncoin = w * (k0 + k0 // 2 + 2) if cut is None else 0
        for i in coiners:
            for _ in range(ncoin):
                deals.append((i, F.random(net.tape(i))))
        # a prover with a false claim fixes d_j on its guessed unopened rows
        for n_c, (alice, a_sv, b_sv, c_sv, av, bv) in enumerate(claims):
            guess = net.deviation(alice, "cut_guess")
            if guess is None:
                continue
            cv = self._value_of(c_sv)
            for j in range(2 * k0):
                if j not in guess:
                    idx = n_c * 6 * k0 + 3 * j + 2
                    d0 = deals[idx]
                    deals[idx] = (d0[0], F.add(d0[1], F.sub(cv, F.mul(av, bv))))
        # the triples and coins are only ever opened under dealer vectors
        hs = yield from self.share_many(deals, pops=False)
        if cut is None:
            coin_h = hs[len(claims) * 6 * k0:]
            coins = []
            while True:
                # contributions are committed before any is opened, so their sum is uniform
                opened = yield from self.reveal_many(coin_h)
                coins += [F.sum(opened[i * ncoin + c] or 0 for i in range(len(coiners)))
                          for c in range(ncoin)]
                cut = self._cut_from_coins(coins, k0)
                if cut is not None:
                    break
                coin_h = yield from self.share_many(
                    [(i, F.random(net.tape(i))) for i in coiners for _ in range(ncoin)], pops=False)
        cut = sorted(cut)
        self.last_cut = cut
        # first opening: a+r_j, b+s_j, d_j on the cut; r_j, s_j elsewhere
        first = []
        for n_c, (alice, a_sv, b_sv, c_sv, av, bv) in enumerate(claims):
            base = n_c * 6 * k0
            for j in range(2 * k0):
                r = self.shared_main(hs[base + 3 * j])
                s = self.shared_main(hs[base + 3 * j + 1])
                d = self.shared_main(hs[base + 3 * j + 2])
                if j in cut:
                    first += [self.sv_lin(0, [(1, a_sv), (1, r)]), self.sv_lin(0, [(1, b_sv), (1, s)]), d]
                else:
                    first += [r, s]
        op1 = yield from self.open_values(first)
        # second opening: c_j = c - d_j + a s_j + b r_j + r_j s_j off the cut
        second = []
        verdict1 = {m: [True] * len(claims) for m in P}
        pos_map = []
        pos = 0
        for n_c, (alice, a_sv, b_sv, c_sv, av, bv) in enumerate(claims):
            base = n_c * 6 * k0
            for j in range(2 * k0):
                if j in cut:
                    pos_map.append((n_c, j, pos, "cut"))
                    pos += 3
                else:
                    pos_map.append((n_c, j, pos, "rest"))
                    pos += 2
        # public r_j, s_j as seen by each receiver; use each receiver's own view
        for m in P:
            vals = op1[m]
            for n_c, j, p0, kind in pos_map:
                if kind == "cut":
                    x, y, d = vals[p0:p0 + 3]
                    if None in (x, y, d) or F.mul(x, y) != d:
                        verdict1[m][n_c] = False
        # second-round values use the majority opening of r_j, s_j
        rs_pub = {}
        for n_c, j, p0, kind in pos_map:
            if kind == "rest":
                rv = [op1[m][p0] for m in P]
                sv_ = [op1[m][p0 + 1] for m in P]
                rs_pub[n_c, j] = (max(set(rv), key=rv.count), max(set(sv_), key=sv_.count))
        for n_c, (alice, a_sv, b_sv, c_sv, av, bv) in enumerate(claims):
            base = n_c * 6 * k0
            for j in range(2 * k0):
                if j in cut:
                    continue
                r, s = rs_pub[n_c, j]
                if r is None or s is None:
                    r, s = 0, 0
                d = self.shared_main(hs[base + 3 * j + 2])
                second.append(self.sv_lin(F.mul(r, s), [(1, c_sv), (F.neg(1), d), (s, a_sv), (r, b_sv)]))
        op2 = yield from self.open_values(second)
        self.last_opened = (op1[P[0]], op2[P[0]])
        for m in P:
            idx = 0
            for n_c in range(len(claims)):
                for j in range(2 * k0):
                    if j in cut:
                        continue
                    if op2[m][idx] != 0:
                        verdict1[m][n_c] = False
                    idx += 1
        sid = net.sid("ppv")
        inbox = yield [bcast(m, sid, tuple(verdict1[m])) for m in P]
        res = []
        for n_c in range(len(claims)):
            yes = sum(1 for m in P if (inbox.bcast(m, sid) or [None] * len(claims))[n_c] is True)
            res.append(2 * yes > len(P))
        return res

    def _value_of(self, sv):
        pts = [(self.a(j), v) for j, v in sorted(sv.shares.items())][:sv.t + 1]
        return interpolate_at(self.F, pts, 0)

    def prove_product_cutchoose(self, alice, A, B, C, k0=16, cut=None):
        """Alice dealt A, B, C (checked by her own vectors) and proves C = A*B."""
        a_sv, b_sv, c_sv = self.shared_main(A), self.shared_main(B), self.shared_main(C)
        av, bv = self._value_of(a_sv), self._value_of(b_sv)
        res = yield from self.prove_products([(alice, a_sv, b_sv, c_sv, av, bv)], k0, cut)
        return res[0]

    # -- multiplication -------------------------------------------------------------

    def multiply(self, x, y, k0=None):
        hs = yield from self.multiply_many([(x, y)], k0)
        return hs[0]

    def multiply_many(self, pairs, k0=None):
        """Each player reshares its local product and proves it; the product
        is the Lagrange combination of the accepted reshares. Provers caught
        cheating are disqualified, the live handles recovered at a lower
        degree, and the step repeated among the survivors."""
        F, P, net = self.F, self.P, self.net
        k0 = self.k if k0 is None else k0
        deals = []
        for x, y in pairs:
            for i in P:
                v = F.mul(x.pieces[i], y.pieces[i])
                off = net.deviation(i, "product_offset")
                if off:
                    v = F.add(v, F.reduce(off))
                deals.append((i, v))
        H = yield from self.share_many(deals)
        claims = []
        rejected = set()
        for p, (x, y) in enumerate(pairs):
            for n_i, i in enumerate(P):
                h = H[p * len(P) + n_i]
                if not h.ok:
                    rejected.add(i)
                    continue
                # alice's pieces of x and y and her reshare, all under her own vectors
                claims.append((i, self.shared_piece_of(x, i), self.shared_piece_of(y, i),
                               self.shared_main(h), x.pieces[i], y.pieces[i]))
        verdicts = yield from self.prove_products(claims, k0)
        bad = sorted({claims[c][0] for c, ok in enumerate(verdicts) if not ok} | rejected)
        if not bad:
            lam = lagrange_weights(F, [self.a(i) for i in P], 0)
            res = []
            for p in range(len(pairs)):
                res.append(self.lin(0, [(lam[n_i], H[p * len(P) + n_i]) for n_i in range(len(P))]))
            return res
        if len(bad) > self.t:
            raise SuiteError("more provers disqualified than the threshold allows")
        self.disqualified.extend(bad)
        flat = [h for pr in pairs for h in pr]
        rec = yield from self.recover_disqualified(flat, bad)
        new_pairs = [(rec[2 * p], rec[2 * p + 1]) for p in range(len(pairs))]
        return (yield from self.multiply_many(new_pairs, k0))

    # -- recovery after disqualification ---------------------------------------------

    def recover_disqualified(self, handles, disqualified):
        """Publicly rebuild the disqualified players' row and column from the
        survivors' values and move every live handle to degree t - tau
        (in both variables) among the survivors.

        For one disqualified j with beta = p(alpha_j) the survivors' new
        pieces are g(alpha_i) = (alpha_j p(alpha_i) - beta alpha_i) / (alpha_j - alpha_i),
        which keeps g(0) = p(0) and drops the degree by one.
        """
        F = self.F
        D = sorted(set(disqualified))
        if not D:
            return (yield from local(list(handles)))
        S = [i for i in self.P if i not in D]
        if len(S) < self.t + 1 - len(D) or len(S) < 1:
            raise SuiteError("too few survivors to recover")
        sid = self.net.sid("rec")
        self.last_recovered = {}
        out = []
        for m in S:
            payload = tuple(tuple((h.cols[m](self.a(j)), h.rows[m](self.a(j))) for j in D) for h in handles)
            out.append(bcast(m, sid, payload))
        inbox = yield out
        out_handles = []
        for hk, h in enumerate(handles):
            rows = {i: h.rows[i] for i in S}
            cols = {i: h.cols[i] for i in S}
            for dj, j in enumerate(D):
                pr, pc = [], []
                for m in S:
                    try:
                        e = inbox.bcast(m, sid)[hk][dj]
                        pr.append((self.a(m), _int_or_none(F, e[0])))
                        pc.append((self.a(m), _int_or_none(F, e[1])))
                    except (TypeError, IndexError):
                        pass
                rows[j] = self._public_decode(pr, h.t)
                cols[j] = self._public_decode(pc, h.t)
                self.last_recovered.setdefault(hk, {})[j] = rows[j](0)
            pops = dict(h.pops) if h.pops is not None else None
            t_cur = h.t
            left = list(D)
            while left:
                j = left.pop(0)
                aj = self.a(j)
                fj, gj = rows.pop(j), cols.pop(j)
                lin_v = Poly(F, [aj, F.neg(1)])          # alpha_j - v
                # step in v
                for x in rows:
                    ax = self.a(x)
                    den = F.inv(F.sub(aj, ax))
                    rows[x] = (rows[x].scale(aj) - fj.scale(ax)).scale(den)
                    cols[x] = (cols[x].scale(aj) - Poly(F, [0, fj(ax)])).divmod(lin_v)[0]
                Gj = (gj.scale(aj) - Poly(F, [0, gj(aj)])).divmod(lin_v)[0]
                # step in u
                for x in rows:
                    ax = self.a(x)
                    den = F.inv(F.sub(aj, ax))
                    cx = Gj(ax)
                    rows[x] = (rows[x].scale(aj) - Poly(F, [0, cx])).divmod(lin_v)[0]
                    cols[x] = (cols[x].scale(aj) - Gj.scale(ax)).scale(den)
                if pops is not None:
                    for (i, jj, m), vec in list(pops.items()):
                        if i not in rows or jj not in rows or m not in rows:
                            continue
                        ai, ajj = self.a(i), self.a(jj)
                        e1 = F.mul(aj, F.inv(F.sub(aj, ajj)))
                        c1 = F.mul(aj, F.inv(F.sub(aj, ai)))
                        c0 = F.neg(F.mul(F.mul(ai, F.inv(F.sub(aj, ai))), fj(ajj)))
                        e0 = F.neg(F.mul(F.mul(ajj, F.inv(F.sub(aj, ajj))), Gj(ai)))
                        pops[(i, jj, m)] = self._combine_vec(i, jj, m, F.add(F.mul(e1, c0), e0),
                                                             [(F.mul(e1, c1), vec)])
                t_cur -= 1
            pieces = {i: rows[i](0) for i in S}
            if pops is not None:
                pops = {k: v for k, v in pops.items() if k[0] in S and k[1] in S and k[2] in S}
            out_handles.append(HalfHandle(t_cur, pieces, {i: rows[i] for i in S}, {i: cols[i] for i in S},
                                          h.ok, h.label, 0, None, pops, h.void, {}))
        self.P = S
        self.n = len(S)
        self.t = self.t - len(D)
        return out_handles

    def _public_decode(self, pts, t):
        pts = [p for p in pts if p[1] is not None]
        e = max(0, (len(pts) - t - 1) // 2)
        return decode_with_errors(self.F, pts, t, e)

    # -- randomness -----------------------------------------------------------------

    def rand_secret(self):
        hs = yield from self.share_many([(i, self.F.random(self.net.tape(i))) for i in self.P])
        return self.lin(0, [(1, h) for h in hs if h.ok])

    def rand_secrets(self, count):
        deals = [(i, self.F.random(self.net.tape(i))) for _ in range(count) for i in self.P]
        hs = yield from self.share_many(deals)
        return [self.lin(0, [(1, h) for h in hs[c * self.n:(c + 1) * self.n] if h.ok]) for c in range(count)]

    def reveal_to_many(self, items):
        """Private opening; built from the public opening of masked values."""
        F = self.F
        masks = []
        for h, r in items:
            masks.append(F.random(self.net.tape(r)))
        # the receiver shares its own mask, then the masked value is public
        M = yield from self.share_many([(r, m) for (h, r), m in zip(items, masks)])
        vals = yield from self.reveal_many([self.add(h, mh) for (h, _), mh in zip(items, M)])
        return [F.sub(v, m) if v is not None else None for v, m in zip(vals, masks)]
