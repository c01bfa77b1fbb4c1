import contextlib
from collections import defaultdict

import numpy as np
import pytest

from leafdx import trainers

# ---------------------------------------------------------------- descent monitor
#
# Every epoch of every training run in the session is checked against its
# algorithm's acceptance rule: the recorded loss may never rise, except for
# GDX, which may rise by at most max_perf_inc. Runs inside worker processes
# forked after the patch are checked too, but their records stay in the child.

DESCENT = {"epochs": defaultdict(int), "violations": defaultdict(list)}


def _allowed(cfg, before):
    return cfg.max_perf_inc * before if cfg.algorithm == "GDX" else before


def _monitored(cls):
    class Monitored(cls):
        def step(self):
            before = self.f
            reason = super().step()
            if reason is None:
                alg = self.cfg.algorithm
                DESCENT["epochs"][alg] += 1
                if self.f > _allowed(self.cfg, before):
                    DESCENT["violations"][alg].append((before, float(self.f)))
            return reason

    Monitored.__name__ = cls.__name__
    return Monitored


@pytest.fixture(scope="session", autouse=True)
def descent_monitor():
    with pytest.MonkeyPatch.context() as mp:
        for name, cls in list(trainers.METHODS.items()):
            mp.setitem(trainers.METHODS, name, _monitored(cls))
        yield DESCENT


def pytest_collection_modifyitems(config, items):
    # suite-wide summaries must see every other test's runs
    last = [it for it in items if it.get_closest_marker("suite_summary")]
    items[:] = [it for it in items if it not in last] + last


def pytest_configure(config):
    config.addinivalue_line("markers", "suite_summary: runs after every other test")


# ---------------------------------------------------------------- acceptance report

CRITERIA: dict[int, dict] = {}


@pytest.fixture
def criterion():
    """``with criterion(n, title):`` records PASS, or FAIL with the error."""

    @contextlib.contextmanager
    def record(n, title, gating=True):
        entry = CRITERIA.setdefault(n, {"title": title, "parts": [], "gating": gating})
        try:
            yield
        except pytest.skip.Exception as exc:
            entry["parts"].append(("NOT RUN", str(exc)))
            raise
        except BaseException as exc:
            entry["parts"].append(("FAIL", f"{type(exc).__name__}: {exc}".splitlines()[0][:160]))
            raise
        else:
            entry["parts"].append(("PASS", ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        e = CRITERIA[n]
        states = [s for s, _ in e["parts"]]
        status = "FAIL" if "FAIL" in states else "NOT RUN" if "NOT RUN" in states else "PASS"
        note = "" if e["gating"] else " (non-gating)"
        detail = "; ".join(msg for s, msg in e["parts"] if msg)
        tr.write_line(f"criterion {n:2d} {status:7s} {e['title']}{note}" + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
