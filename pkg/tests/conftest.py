import acceptlog


def pytest_terminal_summary(terminalreporter):
    if not acceptlog.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptlog.RESULTS):
        terminalreporter.write_line(acceptlog.RESULTS[number])
