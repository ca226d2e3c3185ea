"""Ground-truth annotation from incident reports.

Labels are assigned per symbol, not per alert: a symbol seen only within
confirmed incidents is malicious everywhere, one seen only in ordinary
traffic is benign, and a symbol seen on both sides is ambiguous and goes
to the manual-labeling queue.  Until an operator resolves it, downstream
stages treat an ambiguous symbol like an inconclusive benign one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .types import Alert, IncidentReport, Label


@dataclass
class AnnotationResult:
    alerts: list[Alert]
    ambiguous_symbols: list[str] = field(default_factory=list)

    def queue_document(self) -> str:
        """Manual-label queue as JSON the operator console can edit."""
        doc = {
            "pending": [{"symbol": s, "label": None} for s in self.ambiguous_symbols],
        }
        return json.dumps(doc, indent=2) + "\n"

    def save_queue(self, path: Path | str) -> None:
        Path(path).write_text(self.queue_document(), encoding="utf-8")


def annotate(alerts: Iterable[Alert], reports: Sequence[IncidentReport]) -> AnnotationResult:
    """Label alerts by symbol-level incident membership.

    Deterministic in the input order: membership sets are computed over
    the whole corpus before any label is written.
    """
    alerts = list(alerts)
    inside: set[str] = set()
    outside: set[str] = set()
    for alert in alerts:
        name = alert.symbol.name
        if any(report.covers(alert) for report in reports):
            inside.add(name)
        else:
            outside.add(name)

    ambiguous = inside & outside
    for alert in alerts:
        name = alert.symbol.name
        if name in ambiguous:
            alert.label = Label.AMBIGUOUS
        elif name in inside:
            alert.label = Label.MALICIOUS
        else:
            alert.label = Label.BENIGN
    return AnnotationResult(alerts=alerts, ambiguous_symbols=sorted(ambiguous))


def apply_manual_labels(result: AnnotationResult, resolved: dict[str, Label]) -> None:
    """Apply operator decisions from the queue back onto ambiguous alerts."""
    for alert in result.alerts:
        if alert.label is Label.AMBIGUOUS and alert.symbol.name in resolved:
            alert.label = resolved[alert.symbol.name]
    result.ambiguous_symbols = [s for s in result.ambiguous_symbols if s not in resolved]
