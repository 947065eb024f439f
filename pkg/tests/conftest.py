import numpy as np
import pytest

from eventshape.events import EventStream, EventWindow

# criterion number -> (status, title, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        status, title, detail = ACCEPTANCE_RESULTS[n]
        line = f"criterion {n:2d} {status:4s} {title}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_window(xs, ys, ts=None, ps=None, **kw) -> EventWindow:
    n = len(xs)
    ts = np.arange(n) * 10 if ts is None else ts
    ps = np.ones(n, dtype=int) if ps is None else ps
    return EventWindow(xs, ys, ts, ps, **kw)


def random_stream(rng, n, width=128, height=128, tmax=2**31) -> EventStream:
    t = np.sort(rng.integers(0, tmax, n))
    return EventStream(rng.integers(0, width, n), rng.integers(0, height, n), t,
                       rng.choice([-1, 1], n))
