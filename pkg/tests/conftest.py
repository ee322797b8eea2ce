import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_acceptance_results: list[tuple[str, str]] = []


def record_criterion(name: str, passed: bool = True) -> None:
    _acceptance_results.append((name, "PASS" if passed else "FAIL"))
    print(f"[acceptance] {name}: {'PASS' if passed else 'FAIL'}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, status in _acceptance_results:
        terminalreporter.write_line(f"{status}  {name}")
