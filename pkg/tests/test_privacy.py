import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from mpcbench import privacy as pv
from mpcbench.netsim import run_protocol


def brute_partitionable(table, rows, cols):
    """Try every nontrivial split on both axes; no union-find."""
    vals = {table[x][y] for x in rows for y in cols}
    if len(vals) == 1:
        return True
    for axis, items in (("row", rows), ("col", cols)):
        for mask in range(1, (1 << len(items)) - 1):
            P = [a for i, a in enumerate(items) if mask >> i & 1]
            Q = [a for i, a in enumerate(items) if not mask >> i & 1]
            if axis == "row":
                ok = all(not ({table[x][y] for x in P} & {table[x][y] for x in Q}) for y in cols)
                if ok and brute_partitionable(table, P, cols) and brute_partitionable(table, Q, cols):
                    return True
            else:
                ok = all(not ({table[x][y] for y in P} & {table[x][y] for y in Q}) for x in rows)
                if ok and brute_partitionable(table, rows, P) and brute_partitionable(table, rows, Q):
                    return True
    return False


def test_known_tables():
    assert pv.is_partitionable(pv.AND_TABLE) == (False, None)
    assert pv.is_partitionable(pv.sum_table(7))[0]
    assert not pv.is_partitionable(pv.STUCK_TABLE)[0]


def test_union_find_agrees_with_brute_force_on_3x3_ternary_sample():
    rng = random.Random(0)
    for _ in range(400):
        tab = [[rng.randrange(3) for _ in range(3)] for _ in range(3)]
        assert pv.is_partitionable(tab)[0] == brute_partitionable(tab, list(range(3)), list(range(3)))


def test_all_boolean_2x3_tables_agree_with_brute_force():
    for code in range(64):
        tab = [[code >> (3 * x + y) & 1 for y in range(3)] for x in range(2)]
        assert pv.is_partitionable(tab)[0] == brute_partitionable(tab, [0, 1], [0, 1, 2])


def test_witnesses_are_valid_and_round_trip():
    for tab in (pv.sum_table(7), [[1, 2], [1, 3]], [[5]]):
        for prefer in ("row", "col"):
            ok, w = pv.is_partitionable(tab, prefer)
            assert ok and pv.check_witness(tab, w)
            assert pv.witness_loads(pv.witness_dumps(w)) == w


def test_witness_text_shape():
    ok, w = pv.is_partitionable([[1, 2], [1, 3]])
    assert pv.witness_dumps(w) == (
        "split col P=0 Q=1 rows=0,1 cols=0,1\n"
        "  leaf 1 rows=0,1 cols=0\n"
        "  split row P=0 Q=1 rows=0,1 cols=1\n"
        "    leaf 2 rows=0 cols=1\n"
        "    leaf 3 rows=1 cols=1\n")


def test_bad_witness_rejected():
    ok, w = pv.is_partitionable([[1, 2], [1, 3]])
    with pytest.raises(pv.PartitionError):
        pv.synthesize_protocol([[1, 2], [2, 3]], w)
    with pytest.raises(pv.PartitionError):
        pv.witness_loads("leaf 1 rows=0 cols=0\nleaf 2 rows=0 cols=0\n")
    with pytest.raises(pv.PartitionError):
        pv.witness_loads("split row P=0 Q=1 rows=0,1 cols=0\n  leaf 1 rows=0 cols=0\n")


def test_csv_round_trip(tmp_path):
    tab = pv.sum_table(5)
    p = tmp_path / "t.csv"
    pv.write_table(p, tab)
    assert pv.read_table(p) == tab
    assert pv.table_loads("a,b\nc,a\n") == [["a", "b"], ["c", "a"]]
    with pytest.raises(pv.PartitionError):
        pv.table_loads("1,2\n3\n")
    with pytest.raises(pv.PartitionError):
        pv.table_loads("")


def test_constant_table_transcript():
    P = pv.synthesize_protocol([[4, 4], [4, 4]])
    for x, y in itertools.product(range(2), repeat=2):
        tr, out = pv.run_pair(P.build(x, y))
        assert tr == ((2, 4),) and out == {1: 4, 2: 4}


def test_two_by_two_example_transcripts_match_in_first_column():
    P = pv.synthesize_protocol([[1, 2], [1, 3]])
    assert pv.run_pair(P.build(0, 0))[0] == pv.run_pair(P.build(1, 0))[0]
    assert pv.run_pair(P.build(0, 1))[0] != pv.run_pair(P.build(1, 1))[0]


def test_sum_mod_7_correct_and_private():
    tab = pv.sum_table(7)
    P = pv.synthesize_protocol(tab)
    T = {}
    for x, y in itertools.product(range(7), repeat=2):
        T[x, y], out = pv.run_pair(P.build(x, y))
        assert out == {1: tab[x][y], 2: tab[x][y]}
    for x, x2, y in itertools.product(range(7), repeat=3):
        if tab[x][y] == tab[x2][y]:
            assert T[x, y] == T[x2, y]
        if tab[y][x] == tab[y][x2]:
            assert T[y, x] == T[y, x2]
    assert pv.privacy_audit(P, tab).ok


def test_synthesized_protocol_on_the_simulator():
    tab = [[1, 2], [1, 3]]
    P = pv.synthesize_protocol(tab)
    for x, y in itertools.product(range(2), repeat=2):
        tr = run_protocol(list(P.build(x, y)))
        assert tr.outputs == {1: tab[x][y], 2: tab[x][y]}


def test_non_partitionable_cannot_be_synthesized():
    with pytest.raises(pv.PartitionError):
        pv.synthesize_protocol(pv.AND_TABLE)


def test_naive_protocols_leak_on_and():
    rx = pv.privacy_audit(pv.broadcast_x_protocol(pv.AND_TABLE), pv.AND_TABLE)
    assert [(v.kind, v.fixed, v.a, v.b) for v in rx.violations] == [("rows", 0, 0, 1)]
    ry = pv.privacy_audit(pv.broadcast_y_protocol(pv.AND_TABLE), pv.AND_TABLE)
    assert [(v.kind, v.fixed, v.a, v.b) for v in ry.violations] == [("cols", 0, 0, 1)]
    assert "share an output" in str(rx.violations[0])


def test_silent_protocol_on_constant():
    assert pv.privacy_audit(pv.silent_protocol(0), [[0, 0], [0, 0]]).ok
    r = pv.privacy_audit(pv.silent_protocol(0), pv.AND_TABLE)
    assert r.status == "leaky" and r.violations[0].kind == "output"


def test_random_four_by_four_partitionable():
    rng = random.Random(3)
    for _ in range(30):
        tab = pv.random_partitionable(rng, 4, 4)
        ok, w = pv.is_partitionable(tab)
        assert ok
        assert pv.privacy_audit(pv.synthesize_protocol(tab, w), tab).ok


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 5), st.integers(1, 5))
def test_generated_tables_are_partitionable(seed, r, c):
    tab = pv.random_partitionable(random.Random(seed), r, c)
    ok, w = pv.is_partitionable(tab, prefer="col")
    assert ok and pv.check_witness(tab, w)


def randomized_protocol(table, bits):
    """Party 1 sends a random pad bit first, then the synthesized run."""
    inner = pv.synthesize_protocol(table)

    def build(x, y):
        m1, m2 = inner.build(x, y)

        def step1(state, inbound, tape):
            started, s = state
            if not started:
                tape.getrandbits(bits)
                s, msgs = m1.transition(s, inbound, tape)
                return (True, s), msgs
            s, msgs = m1.transition(s, inbound, tape)
            return (True, s), msgs
        w1 = pv.PlayerMachine(1, (False, m1.init_state), step1, lambda st: m1.output_fn(st[1]),
                              lambda st: m1.done(st[1]))
        return w1, m2
    return pv.TwoPartyProtocol(build, bits, "padded")


def test_randomized_audit_and_unauditable():
    tab = [[1, 2], [1, 3]]
    assert pv.privacy_audit(randomized_protocol(tab, 2), tab).ok
    assert pv.privacy_audit(randomized_protocol(tab, 9), tab).status == "unauditable"


def coin_leak_protocol(table):
    """Party 1 sends x xor a coin; the audit sees distributions, not single runs."""
    def build(x, y):
        def p1(state, inbound, tape):
            sent, out = state
            for _, _, v in inbound:
                out = v
            msgs = [] if sent else [pv.send(1, 2, "x", x ^ tape.getrandbits(1))]
            return (True, out), msgs

        def p2(state, inbound, tape):
            _, out = state
            msgs = []
            for _, _, v in inbound:
                out = table[0][y] if table[0][y] == table[1][y] else None
                msgs.append(pv.send(2, 1, "f", out))
            return (True, out), msgs
        return (pv.PlayerMachine(1, (False, None), p1, lambda s: s[1], lambda s: s[1] is not None),
                pv.PlayerMachine(2, (False, None), p2, lambda s: s[1], lambda s: s[1] is not None))
    return pv.TwoPartyProtocol(build, 1, "coin")


def test_one_time_pad_on_x_is_private_for_constant_columns():
    tab = [[0, 1], [0, 1]]
    assert pv.privacy_audit(coin_leak_protocol(tab), tab).ok


def test_bit_tape_guard():
    t = pv.BitTape([1, 0])
    assert t.getrandbits(2) == 2
    with pytest.raises(pv.PartitionError):
        t.getrandbits(1)
