import os
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion -> {"ok": bool, "detail": [str], "seconds": float}
ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(criterion): test belongs to an acceptance criterion")


@pytest.fixture
def note(request):
    """Attach a detail string to the acceptance summary line of this test's criterion."""
    def add(text):
        request.node.user_properties.append(("detail", text))
    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    t0 = time.perf_counter()
    yield
    item.user_properties.append(("seconds", time.perf_counter() - t0))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        entry = ACCEPTANCE.setdefault(marker.args[0], {"ok": True, "detail": [], "seconds": 0.0})
        entry["ok"] = entry["ok"] and rep.passed
        for key, val in item.user_properties:
            if key == "detail" and val not in entry["detail"]:
                entry["detail"].append(val)
        if rep.when == "call":
            entry["seconds"] += dict(item.user_properties).get("seconds", 0.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
        e = ACCEPTANCE[crit]
        detail = "; ".join(e["detail"])
        terminalreporter.write_line(f"{crit}: {'PASS' if e['ok'] else 'FAIL'} ({e['seconds']:.1f} s) {detail}".rstrip())
