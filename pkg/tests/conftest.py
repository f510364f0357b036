import pytest

CRITERIA = {
    1: "oracle equivalence",
    2: "two-level closed form",
    3: "QFI cross-validation",
    4: "Cramer-Rao hierarchy",
    5: "localized universality and alpha",
    6: "super-Heisenberg beta",
    7: "gap exponent z",
    8: "collapse engine",
    9: "scaling relation",
    10: "filling ordering",
    11: "determinism",
}

_outcomes: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    rep = (yield).get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or "criterion" not in mark.kwargs:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        entry = _outcomes.setdefault(mark.kwargs["criterion"], {"ok": True, "notes": []})
        entry["ok"] &= rep.passed
        entry["notes"] += [v for k, v in item.user_properties if k == "measured"]
        if not rep.passed and rep.longrepr is not None:
            msg = getattr(rep.longrepr, "reprcrash", None)
            entry["notes"].append(f"{item.name}: {msg.message.splitlines()[0] if msg else 'error'}")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, name in CRITERIA.items():
        if n not in _outcomes:
            tr.write_line(f"criterion {n:>2} {name:<34} NOT RUN")
            continue
        e = _outcomes[n]
        tr.write_line(f"criterion {n:>2} {name:<34} {'PASS' if e['ok'] else 'FAIL'}  {' | '.join(e['notes'])}")
