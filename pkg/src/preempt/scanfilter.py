"""Scan-noise reduction over time-ordered alert streams.

Internet-facing monitors produce floods of repeated inconclusive alerts
(port and vulnerability scans).  Within a window, a (symbol, source IP)
pair that repeats at or above the threshold collapses to its first
occurrence, unless that source also produced a significant or critical
alert in the window, in which case everything is evidence and is kept.
Significant and critical alerts are never dropped.

Windows tumble per (symbol, source IP) group, each window anchored at
the first alert it contains.  Anchors survive filtering, which makes the
filter idempotent.
"""

from __future__ import annotations

from bisect import bisect_left
from collections import defaultdict
from datetime import datetime, timedelta
from typing import Sequence

from .types import Alert, Severity

DEFAULT_WINDOW = timedelta(hours=1)
DEFAULT_REPEAT_THRESHOLD = 10


def filter_scans(
    alerts: Sequence[Alert],
    window: timedelta = DEFAULT_WINDOW,
    repeat_threshold: int = DEFAULT_REPEAT_THRESHOLD,
) -> list[Alert]:
    """Filter a time-ordered stream; returns a new list, input order kept."""
    if repeat_threshold < 2:
        raise ValueError("repeat_threshold below 2 would drop non-repeats")

    escalation_times: dict[str, list[datetime]] = defaultdict(list)
    for alert in alerts:
        if alert.symbol.severity is not Severity.INCONCLUSIVE and alert.entity.source_ip:
            escalation_times[alert.entity.source_ip].append(alert.timestamp)

    groups: dict[tuple[str, str], list[int]] = defaultdict(list)
    for i, alert in enumerate(alerts):
        if alert.symbol.severity is Severity.INCONCLUSIVE and alert.entity.source_ip:
            groups[(alert.symbol.name, alert.entity.source_ip)].append(i)

    dropped: set[int] = set()
    for (_, source_ip), indices in groups.items():
        j = 0
        while j < len(indices):
            start = alerts[indices[j]].timestamp
            end = start + window
            k = j
            while k < len(indices) and alerts[indices[k]].timestamp < end:
                k += 1
            members = indices[j:k]
            if len(members) >= repeat_threshold and not _escalated(
                escalation_times.get(source_ip, []), start, end
            ):
                dropped.update(members[1:])
            j = k

    return [alert for i, alert in enumerate(alerts) if i not in dropped]


def _escalated(times: list[datetime], start: datetime, end: datetime) -> bool:
    # times is sorted (built from a time-ordered stream); [start, end).
    return bisect_left(times, end) > bisect_left(times, start)
