import copy
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

SMALL = {
    "name": "small",
    "grid": {"dt": 0.5, "dj": 1.0, "n_t": 8, "n_j": 1, "n_g": 4, "n_v": 120, "n_l": 4800, "thin_k": 12},
    "reward": {"gamma": 0.95},
    "margins": {"rear_hard": "6 m", "rear_caution": "15 m", "front_hard": "6 m", "front_caution": "15 m"},
    "limit": {"mode": "step", "breakpoints": [[0, "36 kph"], [20, "45 kph"]]},
    "ego0": {"pos": "0 m", "vel": "25 kph", "accel": 0},
    "vehicles": [{"id": "1", "pos0": "30 m", "speed": "40 kph"}],
    "merge_end_pos": "90 m",
    "cycle_dt": "0.1 s",
    "sim_duration": "3 s",
    "buffer": {"speed": "0.25 m/s", "distance": "1 m"},
}


@pytest.fixture
def small_raw():
    """A compact scenario dict that plans in a few milliseconds per cycle."""
    return copy.deepcopy(SMALL)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's outcome for the end-of-run summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
