import helpers


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not helpers.ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(helpers.ACCEPTANCE_RESULTS):
        status, detail = helpers.ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {status} - {detail}")
