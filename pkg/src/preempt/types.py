"""Core domain types shared across the engine.

Everything downstream (mining, inference, the gateway) operates on these
shapes: raw monitor records, symbolic alerts keyed to attack entities,
per-entity alert sequences, and forensically confirmed incidents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Optional


class Severity(Enum):
    """Criticality class of an alert type.

    INCONCLUSIVE covers high-volume low-signal alerts (scans, failed
    logins); SIGNIFICANT covers alerts worth attention on their own;
    CRITICAL marks alert types whose occurrence implies the damage has
    already happened (privilege escalation, PII egress).
    """

    INCONCLUSIVE = "inconclusive"
    SIGNIFICANT = "significant"
    CRITICAL = "critical"


class Label(Enum):
    """Ground-truth annotation attached to an alert."""

    UNLABELED = "unlabeled"
    BENIGN = "benign"
    MALICIOUS = "malicious"
    AMBIGUOUS = "ambiguous"


class SourceMonitor(Enum):
    """Which monitor family produced a raw record."""

    ZEEK_NOTICE = "zeek_notice"
    SYSLOG = "syslog"
    AUDIT = "audit"


@dataclass(frozen=True)
class AlertSymbol:
    """A registered symbolic alert name with its severity class."""

    name: str
    severity: Severity


@dataclass(frozen=True)
class EntityKey:
    """Attack-identity key for an alert.

    At least one field must be present.  Identity follows account-first
    precedence: activity under the same user account is one attack no
    matter how many hosts or addresses it touches, while activity under
    different accounts is never merged even from a single source IP.
    """

    user_account: Optional[str] = None
    source_ip: Optional[str] = None
    host: Optional[str] = None

    def __post_init__(self) -> None:
        if not (self.user_account or self.source_ip or self.host):
            raise ValueError("EntityKey requires at least one of user_account, source_ip, host")

    def identity(self) -> tuple[str, str]:
        """Canonical (kind, value) identity used for grouping and lookups."""
        if self.user_account:
            return ("user", self.user_account)
        if self.source_ip:
            return ("ip", self.source_ip)
        return ("host", self.host or "")

    def identity_str(self) -> str:
        kind, value = self.identity()
        return f"{kind}:{value}"

    def same_attack(self, other: "EntityKey") -> bool:
        return self.identity() == other.identity()

    @staticmethod
    def from_identity_str(ident: str) -> "EntityKey":
        kind, _, value = ident.partition(":")
        if kind == "user":
            return EntityKey(user_account=value)
        if kind == "ip":
            return EntityKey(source_ip=value)
        if kind == "host":
            return EntityKey(host=value)
        raise ValueError(f"not an identity string: {ident!r}")


@dataclass
class RawLogRecord:
    """One parsed monitor record, timestamp already converted to UTC.

    ``extras`` keeps structured columns that survive parsing (Zeek uid,
    endpoint addresses, notice type) so later stages can consume them
    without re-parsing the message text.
    """

    timestamp: datetime
    source_monitor: SourceMonitor
    host: str
    message: str
    extras: dict[str, str] = field(default_factory=dict)


@dataclass
class Alert:
    """A normalized symbolic event bound to an attack entity.

    Metadata values are sanitized copies of what the symbol rule
    extracted; the timestamp is preserved verbatim from the raw record.
    """

    timestamp: datetime
    symbol: AlertSymbol
    entity: EntityKey
    metadata: dict[str, str] = field(default_factory=dict)
    label: Label = Label.UNLABELED


@dataclass
class AlertSequence:
    """Time-ordered alerts for one attack entity.

    Sorted by timestamp; ties keep ingestion order.  All alerts share the
    entity's identity.
    """

    entity: EntityKey
    alerts: list[Alert] = field(default_factory=list)

    def symbols(self) -> list[str]:
        return [a.symbol.name for a in self.alerts]

    def __len__(self) -> int:
        return len(self.alerts)


@dataclass
class IncidentReport:
    """Ground truth for one confirmed successful attack."""

    incident_id: str
    involved_entities: frozenset[EntityKey]
    time_window: tuple[datetime, datetime]
    narrative: str = ""

    def __post_init__(self) -> None:
        if not self.involved_entities:
            raise ValueError("incident must involve at least one entity")
        start, end = self.time_window
        if not start < end:
            raise ValueError("incident window must satisfy start < end")

    def covers(self, alert: Alert) -> bool:
        """True when the alert falls in this incident's window and entity set."""
        start, end = self.time_window
        if not (start <= alert.timestamp <= end):
            return False
        return any(alert.entity.same_attack(e) for e in self.involved_entities)
