import os
import sys
from functools import lru_cache

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from spreadresponse.synthgen import GeneratorConfig, generate, generate_events  # noqa: E402

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

T0 = 34_800 * 1_000_000_000  # 09:40:00


def short_config(seed=0, seconds=120, **kw):
    """A few minutes of flow with a one-second warmup."""
    base = dict(seed=seed, session=(T0, T0 + seconds * 1_000_000_000), warmup_s=1.0)
    base.update(kw)
    return GeneratorConfig(**base)


@lru_cache(maxsize=None)
def small_day(seed=0, seconds=120, symbols=("AAA",)):
    cfg = short_config(seed, seconds, symbols=list(symbols))
    return cfg, *generate(cfg)


@lru_cache(maxsize=None)
def n_events(seed, n, symbols=("AAA",)):
    cfg = short_config(seed, 60, symbols=list(symbols))
    return cfg, *generate_events(cfg, n)


# acceptance report: one line per criterion at the end of the run

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record(number: int, name: str, ok: bool, detail: str = "") -> None:
    _ACCEPTANCE[number] = (name, bool(ok), detail)


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        name, ok, detail = _ACCEPTANCE[n]
        mark = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{mark}] criterion {n:2d}: {name}" + (f" ({detail})" if detail else ""))
