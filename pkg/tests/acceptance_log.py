"""Pass/fail lines of the acceptance criteria, printed in the pytest summary."""

RESULTS = {}


def record(number: int, passed: bool, detail: str = "") -> bool:
    RESULTS[number] = (bool(passed), detail)
    return bool(passed)


def lines():
    out = []
    for number in sorted(RESULTS):
        passed, detail = RESULTS[number]
        out.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}" + (f"  ({detail})" if detail else ""))
    return out
