import pytest

from mpcbench.field import prime_field
from mpcbench.netsim import (AdversaryScript, ChannelSpec, Msg, PlayerMachine, ScriptError,
                             bcast, execute, local, measure, measure_exported, parallel,
                             payload_bits, run_protocol, send)

F = prime_field(7)


def ping(net):
    inbox = yield [send(1, 2, "a", 3), bcast(3, "b", (1, 2))]
    got = inbox.get(2, 1, "a")
    heard = inbox.bcast(3, "b")
    inbox = yield [send(2, 1, "c", got)]
    return {1: inbox.get(1, 2, "c"), 2: got, 3: heard}


def test_delivery_and_metrics():
    tr = execute(ping, 3, F)
    assert tr.outputs == {1: 3, 2: 3, 3: (1, 2)}
    assert tr.metrics == (2, 4 * 3)
    assert measure(tr) == tr.metrics


def test_bit_counting_rules():
    assert payload_bits(None, 3) == 0
    assert payload_bits(True, 3) == 1
    assert payload_bits(5, 3) == 3
    assert payload_bits(b"ab", 3) == 16
    assert payload_bits([1, (2, 3), {"k": 4}], 3) == 12


def test_export_recomputes_metrics(tmp_path):
    tr = execute(ping, 3, F)
    path = tmp_path / "trace.jsonl"
    tr.export(path)
    assert measure_exported(path.read_text().splitlines()) == tr.metrics


def test_same_seed_same_trace():
    def prog(net):
        vals = {i: net.tape(i).randrange(1000) for i in net.players}
        yield [send(1, 2, "x", vals[1])]
        return vals
    a, b, c = (execute(prog, 3, F, seed=s) for s in (4, 4, 5))
    assert a.outputs == b.outputs
    assert list(a.export_lines()) == list(b.export_lines())
    assert a.outputs != c.outputs


def test_corrupt_outputs_hidden_and_view_recorded():
    adv = AdversaryScript("passive", {2})
    tr = execute(ping, 3, F, adv)
    assert tr.outputs[2] is None
    assert tr.result[2] == 3
    assert any(e[3] == "a" for e in tr.adversary_view)


def test_halt_and_omit_and_tamper():
    tr = execute(ping, 3, F, AdversaryScript("fail-stop", {1}, halt={1: 1}))
    assert tr.result[2] is None
    tr = execute(ping, 3, F, AdversaryScript("omission", {3}, omit=lambda r, m: True))
    assert tr.result[3] is None
    tr = execute(ping, 3, F, AdversaryScript("byzantine", {1}, tamper=lambda r, m, v: 6))
    assert tr.result[2] == 6


def test_rushing_sees_honest_messages_first():
    seen = []

    def tamper(r, m, view):
        seen.append(len(view))
        return m.payload

    def prog(net):
        yield [send(1, 2, "h", 1), send(2, 1, "c", 2)]
        return {}
    execute(prog, 2, F, AdversaryScript("byzantine", {2}, rushing=True, tamper=tamper))
    execute(prog, 2, F, AdversaryScript("byzantine", {2}, rushing=False, tamper=tamper))
    assert seen == [1, 0]


def test_script_validation():
    with pytest.raises(ScriptError):
        execute(ping, 3, F, AdversaryScript("martian", {1}))
    with pytest.raises(ScriptError):
        execute(ping, 3, F, AdversaryScript("passive", {4}))
    with pytest.raises(ScriptError):
        execute(ping, 3, F, AdversaryScript("passive", {1}, tamper=lambda r, m, v: 0))
    with pytest.raises(ScriptError):
        execute(ping, 3, F, AdversaryScript("fail-stop", {1}, omit=lambda r, m: True))
    with pytest.raises(ScriptError):
        execute(ping, 3, F, AdversaryScript("byzantine", {1, 2}, max_t=1))
    with pytest.raises(ScriptError):
        execute(ping, 3, F, AdversaryScript("passive", {1}, behavior={("x", 1): 1}))

    def inject(r, view):
        return [send(2, 1, "z", 0)]
    with pytest.raises(ScriptError):
        execute(ping, 3, F, AdversaryScript("byzantine", {1}, inject=inject))


def test_deviation_only_for_coalition():
    def prog(net):
        yield from local()
        return {i: net.deviation(i, "flag", 0) for i in net.players}
    adv = AdversaryScript("byzantine", {2}, behavior={("flag", 2): 9, ("flag", 1): 9})
    tr = execute(prog, 2, F, adv)
    assert tr.result == {1: 0, 2: 9}


def test_parallel_lockstep():
    def a():
        inbox = yield [send(1, 2, "a", 1)]
        inbox = yield [send(1, 2, "a2", inbox.get(2, 1, "a"))]
        return "a"

    def b():
        yield [send(2, 1, "b", 2)]
        return "b"

    def prog(net):
        res = yield from parallel(a(), b(), local("c"))
        return {1: res}
    tr = execute(prog, 2, F)
    assert tr.result[1] == ["a", "b", "c"]
    assert tr.metrics[0] == 2


def test_oblivious_transfer_channels():
    def prog(net):
        out = []
        for k in range(400):
            out.append(Msg(1, 2, f"o{k}", k % 7, "ot"))
        out.append(Msg(1, 2, "c", (3, 5), "ot12", 1))
        inbox = yield out
        got = sum(1 for k in range(400) if inbox.get(2, 1, f"o{k}") is not None)
        return {2: (got, inbox.get(2, 1, "c"))}
    got, chosen = execute(prog, 2, F, seed=1).result[2]
    assert chosen == 5
    assert 140 < got < 260


def test_two_party_evaluation_channel():
    fn = lambda a, b: (a + b, a * b)

    def prog(net):
        inbox = yield [Msg(1, 2, "f", 3, "tpe", fn), Msg(2, 1, "f", 4, "tpe", fn)]
        return {1: inbox.get(1, 2, "f"), 2: inbox.get(2, 1, "f")}
    assert execute(prog, 2, F).result == {1: 7, 2: 12}
    tr = execute(prog, 2, F, AdversaryScript("fail-stop", {2}, halt={2: 1}))
    assert tr.result[1] is None


def test_player_machines():
    def make(me):
        def step(state, inbound, tape):
            if me == 1 and state == 0:
                return 1, [send(1, 2, "v", 5)]
            return state + sum(p for _, _, p in inbound), []
        return step
    players = [PlayerMachine(1, 0, make(1), lambda s: s, lambda s: s > 0),
               PlayerMachine(2, 0, make(2), lambda s: s, lambda s: s > 0)]
    tr = run_protocol(players, [ChannelSpec("private")], field=F)
    assert tr.outputs == {1: 1, 2: 5}
    with pytest.raises(ScriptError):
        run_protocol(players, ["carrier pigeon"], field=F)
