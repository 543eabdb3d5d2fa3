"""Which two-argument functions two parties can compute privately.

A table is partitionable when it is constant, or when its rows (or its
columns) split into two blocks whose values never meet in any one column
(or row), with each block partitionable again. Partitionable tables get a
deterministic protocol: whoever owns the split axis says which block its
input lies in, and at a constant block the second party announces the
value. The audit runs a protocol on every input pair and compares
transcript distributions wherever the output alone cannot tell inputs
apart.
"""

import csv
import io
import itertools
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .netsim import PlayerMachine, send


class PartitionError(ValueError):
    pass


# -- tables --------------------------------------------------------------------------------

def check_table(table):
    rows = [list(r) for r in table]
    if not rows or not rows[0]:
        raise PartitionError("table must be nonempty")
    if any(len(r) != len(rows[0]) for r in rows):
        raise PartitionError("table must be rectangular")
    return rows


def _cell(v):
    v = v.strip()
    try:
        return int(v)
    except ValueError:
        return v


def table_loads(text):
    """CSV of output values, one row per x; integers are parsed as ints."""
    rows = [[_cell(v) for v in r] for r in csv.reader(io.StringIO(text)) if r]
    return check_table(rows)


def table_dumps(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in check_table(table):
        w.writerow(r)
    return buf.getvalue()


def read_table(path):
    with open(path) as fh:
        return table_loads(fh.read())


def write_table(path, table):
    with open(path, "w") as fh:
        fh.write(table_dumps(table))


def sum_table(p):
    return [[(x + y) % p for y in range(p)] for x in range(p)]


AND_TABLE = [[0, 0], [0, 1]]
# cannot be split by rows or by columns
STUCK_TABLE = [[0, 0, 1], [3, 4, 1], [3, 2, 2]]


# -- witness trees ----------------------------------------------------------------------------

@dataclass
class Leaf:
    value: object
    rows: tuple
    cols: tuple


@dataclass
class Split:
    axis: str          # "row": party 1 speaks; "col": party 2 speaks
    P: tuple
    Q: tuple
    left: object
    right: object
    rows: tuple
    cols: tuple


def _components(items, others, together):
    """Blocks of items joined whenever together(a, b, o) for some o in others."""
    parent = {a: a for a in items}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for o in others:
        first = {}
        for a in items:
            v = together(a, o)
            if v in first:
                ra, rb = find(a), find(first[v])
                if ra != rb:
                    parent[ra] = rb
            else:
                first[v] = a
    blocks = {}
    for a in items:
        blocks.setdefault(find(a), []).append(a)
    return sorted((tuple(b) for b in blocks.values()), key=lambda b: b[0])


def _split(table, rows, cols, axis):
    if axis == "row":
        comps = _components(rows, cols, lambda x, y: table[x][y])
    else:
        comps = _components(cols, rows, lambda y, x: table[x][y])
    if len(comps) < 2:
        return None
    P = comps[0]
    Q = tuple(sorted(a for b in comps[1:] for a in b))
    return P, Q


def _build(table, rows, cols, order):
    vals = {table[x][y] for x in rows for y in cols}
    if len(vals) == 1:
        return Leaf(next(iter(vals)), rows, cols)
    for axis in order:
        s = _split(table, rows, cols, axis)
        if s is None:
            continue
        P, Q = s
        if axis == "row":
            a, b = _build(table, P, cols, order), _build(table, Q, cols, order)
        else:
            a, b = _build(table, rows, P, order), _build(table, rows, Q, order)
        if a is None or b is None:
            return None
        return Split(axis, P, Q, a, b, rows, cols)
    return None


def is_partitionable(table, prefer="row"):
    """(True, witness tree) or (False, None).

    Rows (or columns) forced into one block are merged with union-find over
    shared values; any split respecting those blocks works, since a
    restriction of a partitionable table is partitionable.
    """
    table = check_table(table)
    order = ("row", "col") if prefer == "row" else ("col", "row")
    tree = _build(table, tuple(range(len(table))), tuple(range(len(table[0]))), order)
    return tree is not None, tree


def check_witness(table, tree):
    """Re-check every split and leaf of a witness without searching."""
    if isinstance(tree, Leaf):
        return all(table[x][y] == tree.value for x in tree.rows for y in tree.cols)
    if not tree.P or not tree.Q or set(tree.P) & set(tree.Q):
        return False
    if tree.axis == "row":
        if set(tree.P) | set(tree.Q) != set(tree.rows):
            return False
        for y in tree.cols:
            if {table[x][y] for x in tree.P} & {table[x][y] for x in tree.Q}:
                return False
        kids = ((tree.left, tree.P, tree.cols), (tree.right, tree.Q, tree.cols))
    else:
        if set(tree.P) | set(tree.Q) != set(tree.cols):
            return False
        for x in tree.rows:
            if {table[x][y] for y in tree.P} & {table[x][y] for y in tree.Q}:
                return False
        kids = ((tree.left, tree.rows, tree.P), (tree.right, tree.rows, tree.Q))
    for kid, r, c in kids:
        if tuple(kid.rows) != tuple(r) or tuple(kid.cols) != tuple(c):
            return False
        if not check_witness(table, kid):
            return False
    return True


def witness_dumps(tree, indent=0):
    """Nested text: one node per line, children indented two spaces."""
    pad = "  " * indent
    ids = lambda t: ",".join(str(v) for v in t)
    if isinstance(tree, Leaf):
        return f"{pad}leaf {tree.value} rows={ids(tree.rows)} cols={ids(tree.cols)}\n"
    head = f"{pad}split {tree.axis} P={ids(tree.P)} Q={ids(tree.Q)} rows={ids(tree.rows)} cols={ids(tree.cols)}\n"
    return head + witness_dumps(tree.left, indent + 1) + witness_dumps(tree.right, indent + 1)


def witness_loads(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    pos = 0

    def ids(field):
        v = field.split("=", 1)[1]
        return tuple(int(a) for a in v.split(",")) if v else ()

    def node(depth):
        nonlocal pos
        if pos >= len(lines):
            raise PartitionError("witness ends early")
        ln = lines[pos]
        if (len(ln) - len(ln.lstrip(" "))) != 2 * depth:
            raise PartitionError(f"bad indentation on line {pos + 1}")
        parts = ln.split()
        pos += 1
        if parts[0] == "leaf":
            return Leaf(_cell(parts[1]), ids(parts[2]), ids(parts[3]))
        if parts[0] == "split" and parts[1] in ("row", "col"):
            P, Q, rows, cols = (ids(p) for p in parts[2:6])
            left = node(depth + 1)
            right = node(depth + 1)
            return Split(parts[1], P, Q, left, right, rows, cols)
        raise PartitionError(f"unknown node on line {pos}")

    tree = node(0)
    if pos != len(lines):
        raise PartitionError("trailing lines after witness")
    return tree


# -- synthesized protocols -------------------------------------------------------------------------

@dataclass
class TwoPartyProtocol:
    """build(x, y) -> (machine for party 1, machine for party 2).

    tape_bits is the number of random bits each party may draw; zero for a
    deterministic protocol.
    """
    build: object
    tape_bits: int = 0
    name: str = ""


def _walk(tree, x, y):
    """The messages a run on (x, y) produces, in order, with their speakers."""
    out = []
    node = tree
    while isinstance(node, Split):
        if node.axis == "row":
            b = 0 if x in node.P else 1
            out.append((1, b))
        else:
            b = 0 if y in node.P else 1
            out.append((2, b))
        node = node.left if b == 0 else node.right
    out.append((2, node.value))
    return out


def _machine(me, tree, mine):
    """Party `me` follows the witness; only its own input decides its bits."""

    def step(state, inbound, tape):
        node, log, out = state
        for _, _, v in inbound:
            log = log + (v,)
            if isinstance(node, Split):
                node = node.left if v == 0 else node.right
            else:
                out = (v,)
        msgs = []
        if out is None:
            if isinstance(node, Split) and (node.axis == "row") == (me == 1):
                b = 0 if mine in node.P else 1
                msgs.append(send(me, 3 - me, f"m{len(log)}", b))
                log = log + (b,)
                node = node.left if b == 0 else node.right
            elif isinstance(node, Leaf) and me == 2:
                msgs.append(send(2, 1, f"m{len(log)}", node.value))
                log = log + (node.value,)
                out = (node.value,)
        return (node, log, out), msgs

    return PlayerMachine(me, (tree, (), None), step, lambda s: s[2][0] if s[2] else None,
                         done=lambda s: s[2] is not None)


def synthesize_protocol(table, tree=None):
    """Deterministic private protocol for a partitionable table."""
    table = check_table(table)
    if tree is None:
        ok, tree = is_partitionable(table)
        if not ok:
            raise PartitionError("table is not partitionable")
    elif not check_witness(table, tree):
        raise PartitionError("witness does not fit the table")
    return TwoPartyProtocol(lambda x, y: (_machine(1, tree, x), _machine(2, tree, y)), 0, "synthesized")


def broadcast_x_protocol(table):
    """Party 1 announces x, party 2 answers with f(x, y)."""
    def build(x, y):
        def p1(state, inbound, tape):
            sent, out = state
            for _, _, v in inbound:
                out = v
            return (True, out), ([] if sent else [send(1, 2, "x", x)])

        def p2(state, inbound, tape):
            _, out = state
            msgs = []
            for _, _, v in inbound:
                out = table[v][y]
                msgs.append(send(2, 1, "f", out))
            return (True, out), msgs
        return (PlayerMachine(1, (False, None), p1, lambda s: s[1], lambda s: s[1] is not None),
                PlayerMachine(2, (False, None), p2, lambda s: s[1], lambda s: s[1] is not None))
    return TwoPartyProtocol(build, 0, "broadcast-x")


def broadcast_y_protocol(table):
    """Party 2 announces y, party 1 answers with f(x, y)."""
    def build(x, y):
        def p2(state, inbound, tape):
            sent, out = state
            for _, _, v in inbound:
                out = v
            return (True, out), ([] if sent else [send(2, 1, "y", y)])

        def p1(state, inbound, tape):
            _, out = state
            msgs = []
            for _, _, v in inbound:
                out = table[x][v]
                msgs.append(send(1, 2, "f", out))
            return (True, out), msgs
        return (PlayerMachine(1, (False, None), p1, lambda s: s[1], lambda s: s[1] is not None),
                PlayerMachine(2, (False, None), p2, lambda s: s[1], lambda s: s[1] is not None))
    return TwoPartyProtocol(build, 0, "broadcast-y")


def silent_protocol(value):
    """Both parties output value without talking."""
    def build(x, y):
        return tuple(PlayerMachine(i, None, lambda s, inb, t: (s, []), lambda s: value, lambda s: True)
                     for i in (1, 2))
    return TwoPartyProtocol(build, 0, "silent")


# -- running and auditing ---------------------------------------------------------------------------

class BitTape:
    """Random tape replaying a fixed bit string; running past its end is an error."""

    def __init__(self, bits=()):
        self.bits = list(bits)
        self.pos = 0

    def getrandbits(self, k):
        if self.pos + k > len(self.bits):
            raise PartitionError("protocol drew more random bits than its declared tape")
        v = 0
        for b in self.bits[self.pos:self.pos + k]:
            v = (v << 1) | b
        self.pos += k
        return v

    def randrange(self, n):
        k = max(1, (n - 1).bit_length())
        v = self.getrandbits(k)
        if v >= n:
            raise PartitionError("randrange needs a power-of-two range on a replayed tape")
        return v


def run_pair(machines, tapes=(None, None), max_rounds=64):
    """Run two machines in lock step; returns (transcript, outputs).

    The transcript is the tuple of (sender, payload) in the order sent.
    """
    states = {m.id: m.init_state for m in machines}
    tp = {m.id: (tapes[m.id - 1] or BitTape()) for m in machines}
    inbound = {m.id: [] for m in machines}
    transcript = []
    for _ in range(max_rounds):
        out = []
        for m in machines:
            if m.done is not None and m.done(states[m.id]) and not inbound[m.id]:
                continue
            states[m.id], msgs = m.transition(states[m.id], inbound[m.id], tp[m.id])
            out.extend(msgs)
        if not out:
            break
        inbound = {m.id: [] for m in machines}
        for msg in out:
            transcript.append((msg.sender, msg.payload))
            inbound[msg.receiver].append((msg.sender, msg.tag, msg.payload))
    return tuple(transcript), {m.id: m.output_fn(states[m.id]) for m in machines}


@dataclass
class Violation:
    kind: str        # "rows": same column, two rows; "cols": same row, two columns; "output"
    fixed: int
    a: int
    b: int

    def __str__(self):
        if self.kind == "output":
            return f"wrong output at x={self.a}, y={self.b}"
        if self.kind == "rows":
            return f"column y={self.fixed}: rows x={self.a} and x={self.b} share an output but not a transcript"
        return f"row x={self.fixed}: columns y={self.a} and y={self.b} share an output but not a transcript"


@dataclass
class AuditReport:
    status: str                  # "private", "leaky" or "unauditable"
    violations: list
    dist: dict = None

    @property
    def ok(self):
        return self.status == "private"


MAX_TAPE = 8


def transcript_dist(protocol, x, y):
    """Exact transcript distribution over both parties' tapes, with outputs."""
    b = protocol.tape_bits
    dist = Counter()
    outs = set()
    total = 0
    for t1 in itertools.product((0, 1), repeat=b):
        for t2 in itertools.product((0, 1), repeat=b):
            tr, out = run_pair(protocol.build(x, y), (BitTape(t1), BitTape(t2)))
            dist[tr] += 1
            outs.add((out[1], out[2]))
            total += 1
    return {t: Fraction(c, total) for t, c in dist.items()}, outs


def privacy_audit(protocol, table):
    """Compare transcript distributions wherever the output cannot separate inputs.

    Transcripts of probability zero appear in neither distribution, so they
    compare equal automatically.
    """
    table = check_table(table)
    if protocol.tape_bits > MAX_TAPE:
        return AuditReport("unauditable", [])
    X, Y = range(len(table)), range(len(table[0]))
    dist = {}
    bad = []
    for x in X:
        for y in Y:
            dist[x, y], outs = transcript_dist(protocol, x, y)
            if outs != {(table[x][y], table[x][y])}:
                bad.append(Violation("output", -1, x, y))
    for y in Y:
        for x, x2 in itertools.combinations(X, 2):
            if table[x][y] == table[x2][y] and dist[x, y] != dist[x2, y]:
                bad.append(Violation("rows", y, x, x2))
    for x in X:
        for y, y2 in itertools.combinations(Y, 2):
            if table[x][y] == table[x][y2] and dist[x, y] != dist[x, y2]:
                bad.append(Violation("cols", x, y, y2))
    return AuditReport("leaky" if bad else "private", bad, dist)


def random_partitionable(rng, nrows, ncols):
    """A random partitionable table, built by random splits with fresh value sets."""
    counter = [0]

    def fill(rows, cols, tab):
        if (len(rows) == 1 and len(cols) == 1) or rng.random() < 0.2:
            v = counter[0]
            counter[0] += 1
            for x in rows:
                for y in cols:
                    tab[x][y] = v
            return
        axis = rng.choice([a for a, s in (("row", rows), ("col", cols)) if len(s) > 1])
        items = list(rows if axis == "row" else cols)
        rng.shuffle(items)
        cut = rng.randrange(1, len(items))
        P, Q = sorted(items[:cut]), sorted(items[cut:])
        if axis == "row":
            fill(P, cols, tab)
            fill(Q, cols, tab)
        else:
            fill(rows, P, tab)
            fill(rows, Q, tab)

    tab = [[None] * ncols for _ in range(nrows)]
    fill(list(range(nrows)), list(range(ncols)), tab)
    return tab
