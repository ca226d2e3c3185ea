"""Record-to-alert normalization.

Each raw record is matched against the registry's ordered rules; the
first hit names the symbol and contributes metadata from its capture
groups.  Metadata values are sanitized, the record timestamp is kept
verbatim, and the alert is keyed to an attack entity using account-first
precedence over what the rule extracted.
"""

from __future__ import annotations

from typing import Iterable, Iterator

from .registry import SymbolRegistry
from .types import Alert, EntityKey, RawLogRecord


def normalize(record: RawLogRecord, registry: SymbolRegistry) -> Alert:
    symbol, metadata = registry.match(record.message)
    # The observing host is always part of the alert context.
    metadata.setdefault("host", record.host)
    sanitized = {k: registry.sanitize(v) for k, v in metadata.items()}
    entity = EntityKey(
        user_account=sanitized.get("user"),
        source_ip=sanitized.get("source-ip"),
        host=record.host,
    )
    return Alert(
        timestamp=record.timestamp,
        symbol=symbol,
        entity=entity,
        metadata=sanitized,
    )


def normalize_stream(records: Iterable[RawLogRecord], registry: SymbolRegistry) -> Iterator[Alert]:
    for record in records:
        yield normalize(record, registry)
