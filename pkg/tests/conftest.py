from __future__ import annotations

# criterion number -> list of (passed, detail) for each part checked
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}
CRITERIA = range(1, 11)


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in CRITERIA:
        parts = ACCEPTANCE.get(k)
        if not parts:
            terminalreporter.write_line(f"criterion {k:>2}: FAIL  (not reached)")
            continue
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {k:>2}: {verdict}  " + "; ".join(d for _, d in parts))
