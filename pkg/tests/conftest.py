# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}
N_CRITERIA = 8


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    ran = {r.nodeid for reps in terminalreporter.stats.values() for r in reps if hasattr(r, "nodeid")}
    if not any("test_acceptance.py" in nodeid for nodeid in ran):
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        ok, detail = ACCEPTANCE.get(k, (False, "did not complete"))
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
