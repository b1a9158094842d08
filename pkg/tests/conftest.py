import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_FILE = "test_acceptance.py"


def _acceptance_outcomes(terminalreporter):
    """Latest outcome per acceptance test, with its recorded properties."""
    outcomes = {}
    for reports in terminalreporter.stats.values():
        for rep in reports:
            nodeid = getattr(rep, "nodeid", "")
            if ACCEPTANCE_FILE not in nodeid or not hasattr(rep, "when"):
                continue
            props = dict(getattr(rep, "user_properties", ()))
            if rep.when == "call" or (rep.when == "setup" and not rep.passed):
                outcomes[nodeid] = (rep.outcome, props)
    return outcomes


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = _acceptance_outcomes(terminalreporter)
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(outcomes):
        outcome, props = outcomes[nodeid]
        label = "PASS" if outcome == "passed" else outcome.upper()
        number = props.get("criterion", "?")
        title = props.get("title", nodeid.rsplit("::", 1)[-1])
        terminalreporter.write_line(f"[{label}] criterion {number}: {title}")
        if props.get("detail"):
            for line in str(props["detail"]).splitlines():
                terminalreporter.write_line(f"         {line}")
