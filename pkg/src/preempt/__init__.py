"""Streaming attack-preemption engine for open HPC networks.

The pipeline: raw monitor records are normalized into symbolic alerts,
grouped per attack entity, mined for recurring attack patterns, scored
by a chain factor model, and acted on by a black-hole-router responder.
A streaming gateway ties the stages together behind an HTTP API.
"""

__version__ = "0.1.0"

from .types import (
    Alert,
    AlertSequence,
    AlertSymbol,
    EntityKey,
    IncidentReport,
    Label,
    RawLogRecord,
    Severity,
    SourceMonitor,
)

__all__ = [
    "Alert",
    "AlertSequence",
    "AlertSymbol",
    "EntityKey",
    "IncidentReport",
    "Label",
    "RawLogRecord",
    "Severity",
    "SourceMonitor",
    "__version__",
]
