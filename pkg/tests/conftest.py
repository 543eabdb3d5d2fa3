import pytest

from mpcbench.field import prime_field
from mpcbench.netsim import execute


def run_all(body, n, F, adversary=None, seed=0, suite=None, **kw):
    """Run body(suite) as a protocol and return the full result of player 1's view."""
    def prog(net):
        c = suite(net, **kw)
        v = yield from body(c)
        return {i: v for i in net.players}
    return execute(prog, n, F, adversary, seed=seed)


@pytest.fixture
def gf7():
    return prime_field(7)


@pytest.fixture
def gf5():
    return prime_field(5)


# -- acceptance report ------------------------------------------------------------------

ACCEPTANCE = {}


class Criterion:
    """Collects one criterion's checks; a criterion passes when every check
    holds and the summed wall time stays inside its budget."""

    def __init__(self, number, budget):
        self.number = number
        self.budget = budget
        self.checks = []
        self.elapsed = 0.0

    def check(self, ok, what):
        self.checks.append((bool(ok), what))
        return bool(ok)

    @property
    def ok(self):
        return all(ok for ok, _ in self.checks) and (self.budget is None or self.elapsed < self.budget)

    def line(self):
        budget = "" if self.budget is None else f" [{self.elapsed:.1f}s of {self.budget}s]"
        detail = "; ".join(what if ok else f"NOT {what}" for ok, what in self.checks)
        return f"criterion {self.number:2d}: {'PASS' if self.ok else 'FAIL'}{budget} {detail}"


class Part:
    """The checks one test contributes to a criterion."""

    def __init__(self, parent):
        self.parent = parent
        self.checks = []

    def check(self, ok, what):
        self.checks.append((bool(ok), what))
        return self.parent.check(ok, what)


@pytest.fixture
def criterion(request):
    import time

    def open_(number, budget):
        c = ACCEPTANCE.setdefault(number, Criterion(number, budget))
        start = time.perf_counter()
        request.addfinalizer(lambda: setattr(c, "elapsed", c.elapsed + time.perf_counter() - start))
        return Part(c)
    return open_


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n].line())
