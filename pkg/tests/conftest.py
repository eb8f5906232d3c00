import pytest

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance(request):
    """Registry ``criterion -> [(part, ok, detail)]`` printed at the end of the run."""
    return request.config.stash.setdefault(_ACCEPTANCE, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(results):
        parts = results[crit]
        ok = all(p[1] for p in parts)
        detail = "; ".join("%s: %s" % (name, info) for name, _, info in parts)
        terminalreporter.write_line("criterion %2d %s  %s" % (crit, "PASS" if ok else "FAIL", detail))
