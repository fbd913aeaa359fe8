ACCEPTANCE: dict[int, str] = {}


def record(number: int, ok: bool, text: str) -> None:
    line = f"acceptance {number:2d}: {'PASS' if ok else 'FAIL'}  {text}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
