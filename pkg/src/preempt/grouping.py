"""Entity grouping: one alert sequence per attack identity.

Alerts sharing a user account merge across hosts and source IPs; alerts
under distinct accounts never merge even from one IP.  Without an
account, the source IP identifies the attack; failing that, the host.
"""

from __future__ import annotations

from typing import Iterable

from .types import Alert, AlertSequence, EntityKey


def group_by_entity(alerts: Iterable[Alert]) -> list[AlertSequence]:
    """Partition alerts into per-identity sequences.

    Each sequence is sorted by timestamp with ingestion order breaking
    ties; sequences come back ordered by identity for stable output.
    """
    buckets: dict[str, list[tuple[int, Alert]]] = {}
    for i, alert in enumerate(alerts):
        buckets.setdefault(alert.entity.identity_str(), []).append((i, alert))

    sequences = []
    for ident in sorted(buckets):
        members = buckets[ident]
        # Buckets are built in ingestion order, so a stable sort keeps ties that way.
        members.sort(key=lambda pair: pair[1].timestamp)
        sequences.append(
            AlertSequence(
                entity=EntityKey.from_identity_str(ident),
                alerts=[alert for _, alert in members],
            )
        )
    return sequences
