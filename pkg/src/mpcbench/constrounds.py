"""Constant-round primitives on top of a sharing suite.

Secret matrices are grids of handles. Random invertible group elements
come from revealing V = S*R for random secret R, S: when V is invertible
so are R and S, V is uniform over the group whatever R is, and
R^-1 = V^-1 * S costs no extra round. Iterated products blind each factor
between random group elements so that the revealed factors are uniform.

Formulas compile to products of 3x3 matrices M[f] = I + f*E13 with

    M[f+g] = M[f] M[g]
    M[f*g] = J1 M[g] J2 M[f] J3 M[g] J4 M[f] J5

so a formula's value is entry (1,3) of a product whose length does not
affect the number of rounds.
"""

import itertools
import re
from dataclasses import dataclass

from .field import mat_mul, mat_identity, mat_rank, mat_inv
from .netsim import local
from .mpc_third import SuiteError


J1 = ((0, 1, 0), (-1, 0, 0), (0, 0, 1))
J2 = ((0, 0, -1), (1, 0, 0), (0, 1, 0))
J3 = ((0, 1, 0), (0, 0, 1), (1, 0, 0))
J4 = ((0, 0, 1), (-1, 0, 0), (0, 1, 0))
J5 = ((-1, 0, 0), (0, 0, 1), (0, 1, 0))


class FormulaError(ValueError):
    pass


# -- formulas ----------------------------------------------------------------------

@dataclass(frozen=True)
class Formula:
    op: str                 # "c" constant | "x" variable | "+" | "*"
    value: int = 0          # constant, or variable index (1-based)
    left: "Formula" = None
    right: "Formula" = None

    def depth(self):
        if self.op in ("c", "x"):
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def size(self):
        if self.op in ("c", "x"):
            return 1
        return 1 + self.left.size() + self.right.size()

    def variables(self):
        if self.op == "x":
            return {self.value}
        if self.op == "c":
            return set()
        return self.left.variables() | self.right.variables()

    def evaluate(self, F, assignment):
        """assignment maps variable index -> field value."""
        if self.op == "c":
            return F.reduce(self.value)
        if self.op == "x":
            return F.reduce(assignment[self.value])
        a = self.left.evaluate(F, assignment)
        b = self.right.evaluate(F, assignment)
        return F.add(a, b) if self.op == "+" else F.mul(a, b)

    def __str__(self):
        if self.op == "c":
            return str(self.value)
        if self.op == "x":
            return f"x{self.value}"
        return f"({self.left} {self.op} {self.right})"


def const(c):
    return Formula("c", c)


def var(i):
    return Formula("x", i)


def fadd(a, b):
    return Formula("+", 0, a, b)


def fmul(a, b):
    return Formula("*", 0, a, b)


_TOKEN = re.compile(r"\s*(?:(x\d+)|(\d+)|([()+*]))")


def parse_formula(text):
    """Infix grammar: expr = term ('+' term)*, term = factor ('*' factor)*,
    factor = integer | x<index> | '(' expr ')'. Operators associate left."""
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FormulaError(f"unexpected character at offset {pos}: {text[pos:pos + 10]!r}")
        pos = m.end()
        if m.group(1):
            idx = int(m.group(1)[1:])
            if idx < 1:
                raise FormulaError("variables are numbered from x1")
            toks.append(("x", idx))
        elif m.group(2):
            toks.append(("c", int(m.group(2))))
        else:
            toks.append((m.group(3), None))
        while pos < len(text) and text[pos].isspace():
            pos += 1
    toks.append(("end", None))
    k = [0]

    def peek():
        return toks[k[0]][0]

    def take(kind):
        if peek() != kind:
            raise FormulaError(f"expected {kind!r}, found {peek()!r}")
        k[0] += 1
        return toks[k[0] - 1]

    def expr():
        f = term()
        while peek() == "+":
            take("+")
            f = fadd(f, term())
        return f

    def term():
        f = factor()
        while peek() == "*":
            take("*")
            f = fmul(f, factor())
        return f

    def factor():
        kind = peek()
        if kind == "(":
            take("(")
            f = expr()
            take(")")
            return f
        if kind == "x":
            return var(take("x")[1])
        if kind == "c":
            return const(take("c")[1])
        raise FormulaError(f"unexpected token {kind!r}")

    f = expr()
    take("end")
    return f


def random_formula(rng, depth, nvars, order, full=False):
    """Random fan-in-2 formula of depth at most `depth` (exactly, if full)."""
    if depth == 0 or (not full and rng.random() < 0.25):
        if rng.random() < 0.7:
            return var(rng.randint(1, nvars))
        return const(rng.randrange(order))
    op = rng.choice("+*")
    sub = [random_formula(rng, depth - 1, nvars, order, full) for _ in range(2)]
    if full or rng.random() < 0.5:
        return Formula(op, 0, *sub)
    return Formula(op, 0, sub[0], random_formula(rng, rng.randrange(depth), nvars, order, full))


def chain_formula(depth, nvars):
    """Alternating product/sum chain of exactly the given depth."""
    f = var(1)
    for d in range(depth):
        x = var(d % nvars + 1)
        f = fmul(f, x) if d % 2 == 0 else fadd(f, x)
    return f


# -- the matrix compiler ------------------------------------------------------------

@dataclass
class MatrixProgram:
    """Sequence of 3x3 matrices, each ("const", M) or ("var", i) meaning M[x_i]."""
    items: list
    source: Formula = None

    def __len__(self):
        return len(self.items)

    def matrices(self, F, assignment):
        out = []
        for it in self.items:
            out.append(_unit(F, F.reduce(assignment[it[1]])) if it[0] == "var" else it[1])
        return out

    def evaluate(self, F, assignment):
        # only the first row of the product is needed for entry (1, 3)
        row = [1, 0, 0]
        for M in self.matrices(F, assignment):
            row = [F.dot(row, col) for col in zip(*M)]
        return row[2]

    def collapse(self, F):
        """Fold constant runs into their neighbours: a list of (A, B, var)
        factors, each the affine matrix A + x_var * B, plus the constant
        product when there is no variable at all."""
        factors = []
        left = mat_identity(3)
        for it in self.items:
            if it[0] == "const":
                if factors:
                    A, B, v = factors[-1]
                    factors[-1] = (mat_mul(F, A, it[1]), mat_mul(F, B, it[1]), v)
                else:
                    left = mat_mul(F, left, it[1])
            else:
                E = [[0, 0, 0], [0, 0, 0], [0, 0, 0]]
                for r in range(3):
                    E[r][2] = left[r][0]
                # left * (I + x E13) = left + x * (column 0 of left moved to column 2)
                factors.append((left, E, it[1]))
                left = mat_identity(3)
        return factors, left


def _unit(F, f):
    return [[1, 0, F.reduce(f)], [0, 1, 0], [0, 0, 1]]


def _const_matrix(F, J):
    return [[F.reduce(x) for x in row] for row in J]


def compile_formula(F, f):
    Js = [_const_matrix(F, J) for J in (J1, J2, J3, J4, J5)]

    def comp(g):
        if g.op == "c":
            return [("const", _unit(F, g.value))]
        if g.op == "x":
            return [("var", g.value)]
        a, b = comp(g.left), comp(g.right)
        if g.op == "+":
            return a + b
        return ([("const", Js[0])] + b + [("const", Js[1])] + a + [("const", Js[2])] + b
                + [("const", Js[3])] + a + [("const", Js[4])])

    return MatrixProgram(comp(f), f)


# -- secret matrices ----------------------------------------------------------------

def _lin_mat(c, P, S, left=True):
    """Public P times secret S (left) or secret S times public P."""
    F = c.F
    if left:
        return [[c.lin(0, [(P[i][k], S[k][j]) for k in range(len(S)) if F.reduce(P[i][k])])
                 for j in range(len(S[0]))] for i in range(len(P))]
    return [[c.lin(0, [(P[k][j], S[i][k]) for k in range(len(P)) if F.reduce(P[k][j])])
             for j in range(len(P[0]))] for i in range(len(S))]


def affine_matrix(c, A, B, x):
    """Secret A + x*B for public A, B and a secret scalar x."""
    F = c.F
    return [[c.lin(A[i][j], [(B[i][j], x)] if F.reduce(B[i][j]) else []) for j in range(len(A[0]))]
            for i in range(len(A))]


def matrix_multiply_many(c, pairs):
    """Entrywise inner products of secret matrices, one product round."""
    flat = []
    for A, B in pairs:
        for i in range(len(A)):
            for j in range(len(B[0])):
                for k in range(len(B)):
                    flat.append((A[i][k], B[k][j]))
    prods = yield from c.multiply_many(flat)
    out = []
    pos = 0
    for A, B in pairs:
        C = []
        for i in range(len(A)):
            row = []
            for j in range(len(B[0])):
                terms = prods[pos:pos + len(B)]
                pos += len(B)
                row.append(c.lin(0, [(1, h) for h in terms]))
            C.append(row)
        out.append(C)
    return out


def matrix_multiply(c, A, B):
    res = yield from matrix_multiply_many(c, [(A, B)])
    return res[0]


def reveal_matrices(c, mats):
    flat = [h for M in mats for row in M for h in row]
    vals = yield from c.reveal_many(flat)
    out, pos = [], 0
    for M in mats:
        rows = []
        for row in M:
            rows.append(list(vals[pos:pos + len(row)]))
            pos += len(row)
        out.append(rows)
    return out


def random_matrices(c, dim, count):
    hs = yield from c.rand_secrets(count * dim * dim)
    return [[[hs[(k * dim + i) * dim + j] for j in range(dim)] for i in range(dim)] for k in range(count)]


def random_invertible(c, dim, count, slack=None, max_tries=20):
    """count pairs (R, R^-1) of uniform secret invertible matrices.

    Each try draws a pool of (R, S) and reveals V = S R; pairs with V of
    full rank qualify and give R^-1 = V^-1 S. Tries repeat until enough
    pairs qualify.
    """
    F = c.F
    got = []
    tries = 0
    c.last_random_tries = 0
    while len(got) < count:
        tries += 1
        if tries > max_tries:
            raise SuiteError("could not draw enough invertible matrices")
        need = count - len(got)
        pool = 2 * need + 8 if slack is None else need + slack
        mats = yield from random_matrices(c, dim, 2 * pool)
        Rs, Ss = mats[:pool], mats[pool:]
        Vs = yield from matrix_multiply_many(c, list(zip(Ss, Rs)))
        pub = yield from reveal_matrices(c, Vs)
        for R, S, V in zip(Rs, Ss, pub):
            if len(got) == count:
                break
            if any(v is None for row in V for v in row) or mat_rank(F, V) < dim:
                continue
            got.append((R, _lin_mat(c, mat_inv(F, V), S)))
    c.last_random_tries = tries
    return got


def full_rank_random(c, dim, pairs_per_try=1, max_tries=50):
    """RM1-RM2 loop: a uniform secret matrix of full rank."""
    F = c.F
    for tries in range(1, max_tries + 1):
        mats = yield from random_matrices(c, dim, 2 * pairs_per_try)
        Rs, Ss = mats[:pairs_per_try], mats[pairs_per_try:]
        Us = yield from matrix_multiply_many(c, list(zip(Rs, Ss)))
        pub = yield from reveal_matrices(c, Us)
        for R, U in zip(Rs, pub):
            if mat_rank(F, U) == dim:
                c.last_random_tries = tries
                return R
    raise SuiteError("no full-rank pair found")


def invert_group_secret(c, X, dim=None):
    """X^-1 = V^-1 U with V = U X revealed for a random invertible U.

    X may be a scalar handle (dim 1) or a square grid of handles.
    """
    F = c.F
    scalar = not isinstance(X, list)
    M = [[X]] if scalar else X
    d = len(M)
    (U, _), = yield from random_invertible(c, d, 1)
    V = yield from matrix_multiply(c, U, M)
    Vp, = yield from reveal_matrices(c, [V])
    c.last_blinded = Vp
    if mat_rank(F, Vp) < d:
        raise SuiteError("secret is not invertible")
    res = _lin_mat(c, mat_inv(F, Vp), U)
    return res[0][0] if scalar else res


def inverse3(c, M):
    """Closed-form inverse of a secret 3x3 matrix: adjugate over determinant,
    with the determinant inverted by blinding. A fixed number of rounds."""
    F = c.F
    pairs, where = [], []
    for i in range(3):
        for j in range(3):
            r = [a for a in range(3) if a != j]
            s = [b for b in range(3) if b != i]
            # adj[i][j] = (-1)^(i+j) * minor of M without row j, column i
            pairs += [(M[r[0]][s[0]], M[r[1]][s[1]]), (M[r[0]][s[1]], M[r[1]][s[0]])]
            where.append((i, j))
    prods = yield from c.multiply_many(pairs)
    adj = [[None] * 3 for _ in range(3)]
    for n_e, (i, j) in enumerate(where):
        sign = 1 if (i + j) % 2 == 0 else F.neg(1)
        adj[i][j] = c.lin(0, [(sign, prods[2 * n_e]), (F.neg(sign), prods[2 * n_e + 1])])
    # det = sum_j M[0][j] * adj[j][0]
    dets = yield from c.multiply_many([(M[0][j], adj[j][0]) for j in range(3)])
    det = c.lin(0, [(1, h) for h in dets])
    dinv = yield from invert_group_secret(c, det)
    flat = yield from c.multiply_many([(adj[i][j], dinv) for i in range(3) for j in range(3)])
    return [flat[3 * i:3 * i + 3] for i in range(3)]


def invert_field_secret(c, X, batch=None, max_tries=40):
    """Extended inverse (0 -> 0) of a secret field element.

    Pairs (R, S) with R(1-RS) = S(1-RS) = 0 are exactly the pairs of
    extended inverses; the one whose R equals X gives the answer.
    Batches repeat until some pair matches.
    """
    F = c.F
    q = F.order
    B = batch if batch is not None else 2 * q * q
    c.last_field_tries = 0
    for tries in range(1, max_tries + 1):
        hs = yield from c.rand_secrets(2 * B)
        R, S = hs[:B], hs[B:]
        RS = yield from c.multiply_many(list(zip(R, S)))
        one_minus = [c.lin(1, [(F.neg(1), h)]) for h in RS]
        UV = yield from c.multiply_many([(r, m) for r, m in zip(R, one_minus)] +
                                        [(s, m) for s, m in zip(S, one_minus)])
        opened = yield from c.reveal_many(UV)
        good = [i for i in range(B) if opened[i] == 0 and opened[B + i] == 0]
        diffs = yield from c.reveal_many([c.sub(X, R[i]) for i in good])
        c.last_field_tries = tries
        c.last_field_revealed = (opened, diffs)
        for i, d in zip(good, diffs):
            if d == 0:
                return S[i]
    raise SuiteError("field inversion did not find a matching pair")


def normalize_secret(c, X, **kw):
    """|X| = 1 if X != 0 else 0, as X * X^-1 with the extended inverse."""
    inv = yield from invert_field_secret(c, X, **kw)
    res = yield from c.multiply_many([(X, inv)])
    return res[0]


def iterated_multiply_many(c, seqs, dim):
    """Products of several sequences of secret invertible matrices at once.

    Returns one secret matrix per sequence. The round count depends on
    neither the number nor the length of the sequences.
    """
    F = c.F
    total = sum(len(s) + 1 for s in seqs)
    pairs = yield from random_invertible(c, dim, total)
    step = []
    blocks = []
    pos = 0
    for s in seqs:
        blk = pairs[pos:pos + len(s) + 1]
        pos += len(s) + 1
        blocks.append(blk)
        for j, X in enumerate(s, 1):
            step.append((blk[j - 1][1], X))
    left = yield from matrix_multiply_many(c, step)
    rights = []
    k = 0
    for s, blk in zip(seqs, blocks):
        for j in range(1, len(s) + 1):
            rights.append((left[k], blk[j][0]))
            k += 1
    Ss = yield from matrix_multiply_many(c, rights)
    pub = yield from reveal_matrices(c, Ss)
    c.last_blinded = pub
    finals = []
    k = 0
    for s, blk in zip(seqs, blocks):
        P = mat_identity(dim)
        for j in range(len(s)):
            P = mat_mul(F, P, pub[k])
            k += 1
        finals.append((blk[0][0], _lin_mat(c, P, blk[-1][1])))
    out = yield from matrix_multiply_many(c, finals)
    return out


def iterated_multiply(c, Xs):
    """Product of secret group elements; scalars or square matrices."""
    scalar = not isinstance(Xs[0], list)
    mats = [[[x]] for x in Xs] if scalar else Xs
    res = yield from iterated_multiply_many(c, [mats], len(mats[0]))
    return res[0][0][0] if scalar else res[0]


# -- formula evaluation ---------------------------------------------------------------

def eval_formulas(c, formulas, values):
    """Evaluate formulas over secret variables in a constant number of rounds.

    values maps variable index -> handle. Returns one handle per formula.
    """
    F = c.F
    seqs, consts = [], []
    for f in formulas:
        prog = compile_formula(F, f)
        factors, tail = prog.collapse(F)
        if not factors:
            seqs.append(None)
            consts.append(tail)
            continue
        seqs.append([affine_matrix(c, A, B, values[v]) for A, B, v in factors])
        consts.append(None)
    live = [s for s in seqs if s is not None]
    prods = (yield from iterated_multiply_many(c, live, 3)) if live else []
    out, k = [], 0
    for s, tail in zip(seqs, consts):
        if s is None:
            out.append(c.constant(tail[0][2]))
        else:
            out.append(prods[k][0][2])
            k += 1
    return out


def default_owner(i, n):
    return (i - 1) % n + 1


def eval_const(c, formula, inputs, owners=None, reveal=True):
    """Share the inputs, evaluate the formula in constant rounds, and
    reveal the result (or return the handle)."""
    F = c.F
    vs = sorted(formula.variables() | set(inputs))
    deals = []
    for v in vs:
        o = owners[v] if owners else default_owner(v, c.net.n)
        deals.append((o, F.reduce(inputs.get(v, 0))))
    hs = yield from c.share_many(deals)
    values = {v: (h if h.ok else c.constant(0)) for v, h in zip(vs, hs)}
    res, = yield from eval_formulas(c, [formula], values)
    if not reveal:
        return res
    return (yield from c.reveal(res))


# -- slicing circuits -------------------------------------------------------------------

class SliceError(ValueError):
    pass


def slice_formulas(circuit, slice_depth, bound=None):
    """Cut a circuit into slices of multiplicative depth slice_depth.

    Returns a list of slices; each slice is a list of (gate id, formula,
    {variable index: boundary gate id}).
    """
    if slice_depth < 1:
        raise SliceError("slice depth must be positive")
    bound = bound if bound is not None else 64 * 4 ** slice_depth
    d = circuit.mult_depth()
    depth = circuit.depth()
    nslices = max(1, -(-depth // slice_depth))
    by = circuit.by_id
    needed = {ref for ref, _ in circuit.outputs}
    for g in circuit.gates:
        for r in g.refs:
            needed.add(r)

    def slice_of(gid):
        g = by[gid]
        if g.kind == "in":
            return -1
        return max(0, (d[gid] - 1) // slice_depth) if d[gid] > 0 else 0

    # a gate is materialised when a later slice or an output uses it
    later = {ref for ref, _ in circuit.outputs}
    for g in circuit.gates:
        for r in g.refs:
            if slice_of(r) < slice_of(g.id):
                later.add(r)
    slices = []
    for s in range(nslices):
        items = []
        for g in sorted(circuit.gates, key=lambda g: g.layer):
            if g.kind == "in" or slice_of(g.id) != s or g.id not in later:
                continue
            varmap = {}

            def build(gid):
                h = by[gid]
                if h.kind == "in" or slice_of(gid) < s:
                    if gid not in varmap.values():
                        varmap[len(varmap) + 1] = gid
                    idx = [k for k, v in varmap.items() if v == gid][0]
                    return var(idx)
                if h.kind == "const":
                    return const(h.consts[0])
                if h.kind == "mul":
                    return fmul(build(h.refs[0]), build(h.refs[1]))
                f = const(h.consts[0])
                for cc, r in zip(h.consts[1:], h.refs):
                    f = fadd(f, fmul(const(cc), build(r)))
                return f

            f = build(g.id)
            if f.size() > bound:
                raise SliceError(f"slice formula for {g.id} has size {f.size()} > {bound}")
            items.append((g.id, f, dict(varmap)))
        slices.append(items)
    return slices


def eval_sliced(c, circuit, slice_depth, inputs, bound=None, default=0):
    """Evaluate a layered circuit one slice at a time, each slice in
    constant rounds, keeping boundary values shared. Returns
    {player: [output values]} like gate-by-gate evaluation."""
    F = c.F
    slices = slice_formulas(circuit, slice_depth, bound)
    deals, ids = [], []
    for g in circuit.inputs():
        ids.append(g.id)
        deals.append((g.owner, F.reduce(circuit.input_value(inputs, g))))
    hs = yield from c.share_many(deals)
    val = {gid: (h if h.ok else c.constant(default)) for gid, h in zip(ids, hs)}
    c.last_slices = len(slices)
    for items in slices:
        if not items:
            continue
        # each formula has its own variable numbering; evaluate them together
        merged, remapped = {}, []
        for gid, f, vm in items:
            shift = len(merged)
            for k, ref in vm.items():
                merged[shift + k] = val[ref]
            remapped.append(_shift_vars(f, shift))
        res = yield from eval_formulas(c, remapped, merged)
        for (gid, _, _), h in zip(items, res):
            val[gid] = h
    for g in circuit.gates:
        if g.id not in val and g.kind == "const":
            val[g.id] = c.constant(g.consts[0])
    items = [(val[ref], p) for ref, players in circuit.outputs for p in players]
    vals = yield from c.reveal_to_many(items)
    out = {p: [] for p in c.net.players}
    for (h, p), v in zip(items, vals):
        out[p].append(v)
    return out


def _shift_vars(f, k):
    if f.op == "x":
        return var(f.value + k)
    if f.op == "c":
        return f
    return Formula(f.op, 0, _shift_vars(f.left, k), _shift_vars(f.right, k))


# -- canonical representations ------------------------------------------------------------

MAX_CANONICAL_BITS = 12


@dataclass
class MultiPoly:
    """Multilinear polynomial: {tuple of variable indices: coefficient}."""
    field: object
    terms: dict

    @property
    def degree(self):
        return max((len(m) for m, c in self.terms.items() if c), default=0)

    def __call__(self, xs):
        F = self.field
        acc = 0
        for mono, coef in self.terms.items():
            t = coef
            for v in mono:
                t = F.mul(t, F.reduce(xs[v - 1]))
            acc = F.add(acc, t)
        return acc

    def __str__(self):
        parts = []
        for mono, coef in sorted(self.terms.items(), key=lambda kv: (len(kv[0]), kv[0])):
            if not coef:
                continue
            body = "*".join(f"x{v}" for v in mono)
            parts.append(str(coef) if not mono else (body if coef == 1 else f"{coef}*{body}"))
        return " + ".join(parts) or "0"


def canonical_poly(F, table, n):
    """The polynomial sum_e table[e] * prod_i (x_i if e_i else 1 - x_i),
    expanded into monomials. table is indexed by the integer whose bit
    i-1 is x_i."""
    if n > MAX_CANONICAL_BITS:
        raise ValueError(f"canonical forms enumerate 2^n terms; n={n} exceeds {MAX_CANONICAL_BITS}")
    if len(table) != 1 << n:
        raise ValueError(f"truth table needs {1 << n} entries")
    terms = {}
    for e in range(1 << n):
        w = F.reduce(table[e])
        if not w:
            continue
        ones = [i for i in range(1, n + 1) if e >> (i - 1) & 1]
        zeros = [i for i in range(1, n + 1) if not e >> (i - 1) & 1]
        # prod over zeros of (1 - x_i) = sum over subsets T of (-1)^|T| x_T
        for r in range(len(zeros) + 1):
            for T in itertools.combinations(zeros, r):
                mono = tuple(sorted(ones + list(T)))
                coef = w if r % 2 == 0 else F.neg(w)
                terms[mono] = F.add(terms.get(mono, 0), coef)
    return MultiPoly(F, {m: c for m, c in terms.items() if c})


def eval_any_const(c, table, n, bits):
    """Evaluate any function of n secret bits as
    sum_e F(e) * (1 - |sum_i |e_i - x_i||), each normalisation by extended
    inversion; constant rounds, 2^n work. bits: list of n handles."""
    F = c.F
    if n > MAX_CANONICAL_BITS:
        raise ValueError(f"n={n} exceeds the {MAX_CANONICAL_BITS}-bit limit for this path")
    if F.char <= n:
        raise ValueError("the field characteristic must exceed n")
    es = [e for e in range(1 << n) if F.reduce(table[e])]
    diffs = []
    for e in es:
        for i in range(n):
            diffs.append(c.lin(e >> i & 1, [(F.neg(1), bits[i])]))
    norms = yield from _normalize_many(c, diffs)
    sums = [c.lin(0, [(1, h) for h in norms[k * n:(k + 1) * n]]) for k in range(len(es))]
    outer = yield from _normalize_many(c, sums)
    return c.lin(0, [(F.reduce(table[e]), c.lin(1, [(F.neg(1), h)])) for e, h in zip(es, outer)])


def _normalize_many(c, xs):
    """Normalise many secrets; inversions run side by side."""
    from .netsim import parallel
    if not xs:
        return (yield from local([]))
    res = yield from parallel(*[normalize_secret(c, x) for x in xs])
    return res
