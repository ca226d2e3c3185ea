"""End-to-end assembly: raw streams to labeled corpora and fitted models.

The stages compose in one canonical order: parse, normalize, scan-filter,
annotate, group.  Training runs the same pipeline over a simulated
multi-incident scenario so the fitted potentials reflect exactly the
traffic mix the detector will see.
"""

from __future__ import annotations

from datetime import date, timedelta
from typing import Iterable, Optional, Sequence

from .annotate import AnnotationResult, annotate, apply_manual_labels
from .grouping import group_by_entity
from .inference import FactorModel, learn
from .normalize import normalize
from .parsing import parse_record
from .registry import SymbolRegistry, default_registry
from .scanfilter import DEFAULT_REPEAT_THRESHOLD, DEFAULT_WINDOW, filter_scans
from .scenario import Scenario, training_scenario
from .simulate import SimulationResult, run
from .types import Alert, AlertSequence, IncidentReport, Label


def stream_to_alerts(
    wire: Iterable[tuple[str, str]],
    registry: SymbolRegistry,
    base_date: Optional[date] = None,
) -> list[Alert]:
    """Parse and normalize a stream of (format, line) pairs."""
    return [normalize(parse_record(line, fmt, base_date=base_date), registry) for fmt, line in wire]


def result_to_alerts(result: SimulationResult, registry: SymbolRegistry) -> list[Alert]:
    return [normalize(record, registry) for record in result.records]


def label_corpus(
    alerts: Sequence[Alert],
    incidents: Sequence[IncidentReport],
    ambiguous_default: Optional[Label] = Label.BENIGN,
) -> AnnotationResult:
    """Annotate against incident ground truth, then close the review queue.

    A symbol seen both inside and outside incidents is not
    incident-specific evidence; unless a caller wants to hold those for
    manual review (ambiguous_default=None), they resolve to benign.
    """
    annotated = annotate(alerts, incidents)
    if ambiguous_default is not None and annotated.ambiguous_symbols:
        apply_manual_labels(
            annotated, {name: ambiguous_default for name in annotated.ambiguous_symbols}
        )
    return annotated


def incident_sequences(
    alerts: Iterable[Alert], incidents: Sequence[IncidentReport]
) -> list[AlertSequence]:
    """One chronological alert sequence per incident, for catalog mining."""
    out = []
    for incident in incidents:
        covered = sorted(
            (a for a in alerts if incident.covers(a)), key=lambda a: a.timestamp
        )
        if covered:
            out.append(AlertSequence(entity=covered[0].entity, alerts=covered))
    return out


def train_model(
    scenario: Optional[Scenario] = None,
    registry: Optional[SymbolRegistry] = None,
    alpha: float = 1.0,
    scan_window: timedelta = DEFAULT_WINDOW,
    repeat_threshold: int = DEFAULT_REPEAT_THRESHOLD,
) -> FactorModel:
    """Fit the chain model from a simulated labeled scenario.

    Scan filtering runs before fitting so repeat probe floods do not
    drown the benign transition row.
    """
    scenario = scenario or training_scenario()
    registry = registry or default_registry()
    result = run(scenario)
    alerts = result_to_alerts(result, registry)
    alerts = filter_scans(alerts, window=scan_window, repeat_threshold=repeat_threshold)
    annotated = label_corpus(alerts, result.incidents)
    sequences = group_by_entity(annotated.alerts)
    return learn(sequences, alpha=alpha)
