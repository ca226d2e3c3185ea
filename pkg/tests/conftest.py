from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from preempt.registry import default_registry
from preempt.types import Alert, AlertSequence, AlertSymbol, EntityKey, Severity

T0 = datetime(2024, 8, 1, 0, 0, 0, tzinfo=timezone.utc)


def ts(seconds: float) -> datetime:
    return T0 + timedelta(seconds=seconds)


def make_alert(
    symbol: str,
    seconds: float = 0.0,
    severity: Severity = Severity.INCONCLUSIVE,
    user: str | None = None,
    ip: str | None = None,
    host: str = "node-1",
) -> Alert:
    return Alert(
        timestamp=ts(seconds),
        symbol=AlertSymbol(name=symbol, severity=severity),
        entity=EntityKey(user_account=user, source_ip=ip, host=host),
    )


def make_seq(
    symbols: list[str],
    ip: str = "203.0.113.1",
    severities: dict[str, Severity] | None = None,
    start: float = 0.0,
) -> AlertSequence:
    severities = severities or {}
    return AlertSequence(
        entity=EntityKey(source_ip=ip),
        alerts=[
            make_alert(sym, start + i, severity=severities.get(sym, Severity.INCONCLUSIVE), ip=ip)
            for i, sym in enumerate(symbols)
        ],
    )


@pytest.fixture(scope="session")
def registry():
    return default_registry()
