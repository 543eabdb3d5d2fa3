import itertools
import math

import pytest

from mpcbench import apps
from mpcbench.field import binary_field, prime_field
from mpcbench.netsim import AdversaryScript, execute, parallel

F5 = prime_field(5)
F7 = prime_field(7)
F17 = prime_field(17)
F31 = prime_field(31)


def auth(pw, attempt, seed=0, n=4, F=F17, **kw):
    kw.setdefault("suite_mode", "passive")
    return execute(apps.password_program(pw, attempt, **kw), n, F, seed=seed, record=False).result[1]


# -- passwords -------------------------------------------------------------------------------

def test_password_completeness_is_exact():
    for mode in ("fast", "certified"):
        for s in range(60):
            res = auth(s % 17, s % 17, seed=s, mode=mode)
            assert set(res.verdicts.values()) == {"accept"}
            assert res.w == 0


def test_password_default_field_and_byzantine_suite():
    F = apps.default_password_field()
    assert F == binary_field(16)
    ok = auth(0xBEEF, 0xBEEF, F=F, suite_mode="byzantine", mode="certified")
    bad = auth(0xBEEF, 0xBEEE, F=F, suite_mode="byzantine", mode="certified")
    assert ok.verdicts[1] == "accept" and ok.certified
    assert bad.verdicts[1] == "reject" and bad.w != 0


def test_password_over_half_suite():
    assert auth(3, 3, n=3, suite="half").verdicts[2] == "accept"
    assert auth(3, 4, n=3, suite="half", seed=1).verdicts[2] == "reject"


def test_authenticate_before_init_rejected():
    def prog(net):
        c = apps.make_suite(net, 1, mode="passive")
        yield from apps.password_authenticate(c, apps.PasswordStore(), "nobody", 1)
    with pytest.raises(apps.AppError):
        execute(prog, 4, F17)


def test_second_login_uses_fresh_pair():
    def prog(net):
        c = apps.make_suite(net, 1, mode="passive")
        store = apps.PasswordStore()
        yield from apps.password_init(c, store, "u", 9)
        first = store.records["u"].r
        a = yield from apps.password_authenticate(c, store, "u", 9)
        b = yield from apps.password_authenticate(c, store, "u", 8)
        rec = store.records["u"]
        return {i: (a.verdicts[1], b.verdicts[1], rec.logins, rec.r is not first) for i in net.players}
    assert execute(prog, 4, F17).result[1] == ("accept", "reject", 2, True)


def test_fast_mode_false_accept_near_one_seventeenth():
    N = 2000
    acc = sum(auth(5, 11, seed=s).verdicts[1] == "accept" for s in range(N))
    p = 1 / 17
    assert abs(acc / N - p) <= 3 * math.sqrt(p * (1 - p) / N)


def test_mismatch_reveals_only_nonzero_uniform_values():
    ws = [auth(2, 9, seed=s, mode="certified").w for s in range(400)]
    assert 0 not in ws
    assert set(ws) == set(range(1, 17))


def test_certified_mode_never_accepts_a_certified_mismatch():
    N = 1500
    results = [auth(5, 11, seed=s, mode="certified") for s in range(N)]
    assert all(r.verdicts[1] == "reject" for r in results if r.certified)
    assert any(r.retries > 0 for r in results)
    assert sum(r.verdicts[1] == "accept" for r in results) / N <= 2 / 17


def test_retry_exhaustion_falls_back_to_w():
    rs = [auth(5, 11, seed=s, mode="certified", max_retries=0) for s in range(300)]
    uncert = [r for r in rs if not r.certified]
    assert uncert and all(r.u == 0 and r.retries == 0 for r in uncert)


# -- ballots --------------------------------------------------------------------------------

def ballot(votes, F=F5, adv=None, t=1, **kw):
    return execute(apps.ballot_program(votes, t=t, **kw), len(votes), F, adv, seed=0).result[1]


def test_secret_ballot_examples():
    res = ballot([1, 0, 1, 1])
    assert res.tally == 3 and res.disqualified == []
    assert all(z == 0 for z in res.z.values())
    assert ballot([0, 0, 0, 0]).tally == 0


def test_ballot_disqualifies_a_two():
    adv = AdversaryScript("byzantine", {2}, behavior={("vote_value", 2): 2})
    res = ballot([1, 0, 1, 1], adv=adv)
    assert res.z[2] == 2 and res.disqualified == [2]
    assert res.tally == 3
    assert [res.z[i] for i in (1, 3, 4)] == [0, 0, 0]


def test_ballot_exhaustive_small():
    for votes in itertools.product((0, 1), repeat=4):
        assert ballot(list(votes), F=F7, suite_mode="passive").tally == sum(votes)


def test_ballot_needs_large_prime_field():
    with pytest.raises(apps.AppError):
        ballot([1, 1, 1, 1], F=binary_field(8))
    with pytest.raises(apps.AppError):
        apps._need_tally_field(F5, 5)


def test_power_chain_oracle():
    def prog(net):
        c = apps.make_suite(net, 1, mode="passive")
        xs = yield from c.share_many([(1, x) for x in range(7)])
        out = {}
        for e in range(11):
            hs = yield from parallel(*[apps.power_chain(c, h, e) for h in xs])
            out[e] = tuple((yield from c.reveal_many(hs)))
        return {i: out for i in net.players}
    got = execute(prog, 4, F7).result[1]
    for e, vals in got.items():
        assert vals == tuple(pow(x, e, 7) for x in range(7))


def test_unanimous_examples():
    assert ballot([1, 1, 1], t=0, kind="u").outcome == "unanimous"
    assert ballot([1, 0, 1], t=0, kind="u").outcome == "disagreed"
    assert ballot([1], t=0, kind="u").outcome == "unanimous"
    assert ballot([0], t=0, kind="u").outcome == "disagreed"
    assert ballot([0], t=0, kind="u", either=True).outcome == "unanimous"
    assert ballot([0, 0, 0, 0], kind="u", either=True).outcome == "unanimous"
    assert ballot([0, 1, 0, 0], kind="u", either=True).outcome == "disagreed"


def test_unanimous_hides_tally():
    seen = {}
    for votes in itertools.product((0, 1), repeat=4):
        res = ballot(list(votes), F=F7, kind="u", suite_mode="passive")
        seen.setdefault(sum(votes) == 4, set()).add(res.revealed)
    assert seen == {True: {1}, False: {0}}


# -- anonymous mail ----------------------------------------------------------------------------

def mail(msgs, dests, F=F31, adv=None, t=1, seed=0, **kw):
    n = len(msgs)
    return execute(apps.mail_program(msgs, dests, t=t, **kw), n, F, adv, seed=seed)


def test_identity_and_three_cycle():
    r = mail({1: 10, 2: 20, 3: 30}, {1: 1, 2: 2, 3: 3}, t=0).result[1]
    assert r.received == {1: 10, 2: 20, 3: 30}
    r = mail({1: 10, 2: 20, 3: 30}, {1: 2, 2: 3, 3: 1}, t=0).result[1]
    assert tuple(r.received[j] for j in (1, 2, 3)) == (30, 10, 20)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_permutation_delivery_exhaustive(n):
    """Every permutation and every message assignment over GF(5)."""
    P = list(range(1, n + 1))
    for perm in itertools.permutations(P):
        dests = dict(zip(P, perm))
        cases = list(itertools.product(range(5), repeat=n))

        def prog(net):
            c = apps.make_suite(net, 0, mode="passive")
            res = yield from parallel(*[apps.anonymous_mail(c, dict(zip(P, m)), dests) for m in cases])
            return {i: res for i in net.players}
        results = execute(prog, n, F5, record=False).result[1]
        for m, r in zip(cases, results):
            assert r.received == {dests[i]: m[i - 1] for i in P}


def test_public_view_independent_of_destinations():
    def public(dests):
        # with t = 0 every broadcast piece is the opened value itself
        tr = mail({1: 3, 2: 4, 3: 5, 4: 6}, dests, seed=7, t=0)
        return [(e.sender, e.tag, e.payload) for r in tr.rounds for e in r if e.channel == "broadcast"]
    assert public({1: 2, 2: 3, 3: 4, 4: 1}) == public({1: 4, 2: 1, 3: 2, 4: 3})


def test_invalid_indicator_excluded():
    adv = AdversaryScript("byzantine", {4}, behavior={("mail_indicator", 4): [1, 1, 0, 0]})
    r = mail({1: 1, 2: 2, 3: 3, 4: 4}, {1: 2, 2: 3, 3: 4, 4: 1}, adv=adv).result[1]
    assert r.invalid == [4]
    assert r.received[3] == 2 and r.received[4] == 3


def test_collision_detected_in_permutation_mode():
    adv = AdversaryScript("byzantine", {4}, behavior={("mail_indicator", 4): [0, 1, 0, 0]})
    r = mail({1: 1, 2: 2, 3: 3, 4: 4}, {1: 2, 2: 3, 3: 4, 4: 1}, adv=adv).result[1]
    assert r.invalid == []
    assert [j for _, j, _ in r.collisions] == [1, 2]
    assert r.received[1] is None and r.received[2] is None
    assert r.received[3] == 2 and r.received[4] == 3


def test_espionage_allows_shared_targets():
    r = mail({1: 10, 2: 20, 3: 30, 4: 40}, {1: 2, 2: 2, 3: 1, 4: 4}, mode="espionage").result[1]
    assert r.received == {1: 20, 2: 20, 3: 10, 4: 9}


def test_mailbox_collision_then_retry():
    tr = mail({1: 10, 2: 20, 3: 30, 4: 40}, {1: 3, 2: 3, 3: 1, 4: None}, mode="mailbox",
              first_choice={1: 0, 2: 0}, suite_mode="passive", boxes=8)
    r = tr.result[1]
    assert (0, 3, 0) in r.collisions
    assert r.attempts >= 2 and r.undelivered == []
    assert sorted(r.received[3]) == [10, 20] and r.received[1] == [30]


def test_mailbox_rejects_double_posting():
    # a sender claiming two boxes fails the per-sender count check
    def prog(net):
        c = apps.make_suite(net, 1, mode="passive")
        res = yield from apps.anonymous_mail(c, {1: 5}, {1: 2}, mode="mailbox", boxes=2)
        return {i: res for i in net.players}
    assert execute(prog, 4, F31).result[1].received[2] == [5]
    with pytest.raises(apps.AppError):
        execute(apps.mail_program({1: 1}, {1: 1}, mode="pigeon", t=0), 1, F31)
