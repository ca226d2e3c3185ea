"""Chain factor-graph inference over per-entity alert sequences.

One hidden state per alert (benign < suspicious < malicious), a unary
factor per position keyed by the alert symbol, and a shared transition
factor between neighbors.  Chains admit exact inference: max-product for
the MAP assignment, sum-product (forward-backward) for marginals.  All
computation runs in log space with per-step renormalization so long
post-filter sequences cannot underflow.

The decision policy turns inference output into a verdict: preempt once
the MAP walk says malicious with at least two alerts observed, unless a
critical-severity alert already happened, which means the damage
predates the decision (too late).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .types import AlertSequence, Label, Severity


class HiddenState(IntEnum):
    """Escalation-ordered hidden states."""

    BENIGN = 0
    SUSPICIOUS = 1
    MALICIOUS = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @staticmethod
    def from_label(text: str) -> "HiddenState":
        return HiddenState[text.upper()]


STATES = (HiddenState.BENIGN, HiddenState.SUSPICIOUS, HiddenState.MALICIOUS)


class Decision(Enum):
    NO_ACTION = "no_action"
    WATCH = "watch"
    PREEMPT = "preempt"


class DegenerateCorpus(Exception):
    """Learning needs both benign- and malicious-labeled alerts."""


class EmptySequence(Exception):
    """A factor graph needs at least one alert."""


@dataclass
class FactorModel:
    """Learned potentials; immutable after learning, shareable."""

    unary: dict[str, tuple[float, float, float]]
    transition: tuple[tuple[float, float, float], ...]
    alpha: float = 1.0

    def unary_row(self, symbol: str) -> tuple[float, float, float]:
        """Known symbols get their learned row; unseen ones are uniform
        so an unknown alert cannot bias the chain either way."""
        return self.unary.get(symbol, (1.0, 1.0, 1.0))

    def knows(self, symbol: str) -> bool:
        return symbol in self.unary

    def dump(self) -> str:
        lines = ["# preempt-factor-model v1", f"alpha\t{self.alpha!r}"]
        for symbol in sorted(self.unary):
            row = self.unary[symbol]
            for state in STATES:
                lines.append(f"unary\t{symbol}\t{state.label}\t{row[state]!r}")
        for s in STATES:
            for t in STATES:
                lines.append(f"transition\t{s.label}\t{t.label}\t{self.transition[s][t]!r}")
        return "\n".join(lines) + "\n"

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.dump(), encoding="utf-8")

    @staticmethod
    def parse(text: str) -> "FactorModel":
        lines = [l for l in text.splitlines() if l.strip()]
        if not lines or not lines[0].startswith("# preempt-factor-model v1"):
            raise ValueError("not a v1 factor model document")
        alpha = 1.0
        unary: dict[str, list[float]] = {}
        transition = [[0.0] * 3 for _ in range(3)]
        for line in lines[1:]:
            parts = line.split("\t")
            if parts[0] == "alpha":
                alpha = float(parts[1])
            elif parts[0] == "unary":
                _, symbol, state, value = parts
                unary.setdefault(symbol, [0.0, 0.0, 0.0])[HiddenState.from_label(state)] = float(value)
            elif parts[0] == "transition":
                _, s, t, value = parts
                transition[HiddenState.from_label(s)][HiddenState.from_label(t)] = float(value)
            else:
                raise ValueError(f"unknown model row {parts[0]!r}")
        return FactorModel(
            unary={k: (v[0], v[1], v[2]) for k, v in unary.items()},
            transition=tuple(tuple(row) for row in transition),  # type: ignore[arg-type]
            alpha=alpha,
        )

    @staticmethod
    def load(path: Path | str) -> "FactorModel":
        return FactorModel.parse(Path(path).read_text(encoding="utf-8"))


@dataclass
class ChainFactorGraph:
    """Chain over one alert sequence: n unary factors, n-1 transitions."""

    sequence: AlertSequence
    log_unary: list[tuple[float, float, float]]
    log_transition: tuple[tuple[float, float, float], ...]
    oov_positions: list[int] = field(default_factory=list)

    @property
    def n_variables(self) -> int:
        return len(self.log_unary)

    @property
    def n_factors(self) -> int:
        return 2 * self.n_variables - 1


@dataclass
class Verdict:
    map_states: list[HiddenState]
    marginals: list[tuple[float, float, float]]
    decision: Decision
    decided_at_index: Optional[int] = None
    too_late: bool = False


@dataclass
class DecisionPolicy:
    """Preemption policy knobs.

    ``min_alerts`` is the least evidence the policy will act on; the MAP
    walk drives decisions unless ``marginal_threshold`` is set, in which
    case the malicious marginal is compared against it instead.
    """

    min_alerts: int = 2
    marginal_threshold: Optional[float] = None


def _state_of(alert) -> Optional[HiddenState]:
    """Label-to-state mapping used for learning.

    Benign labels train the benign state.  Malicious labels train
    suspicious when the alert type is inconclusive on its own, and
    malicious when the type is significant or critical.  Unlabeled and
    ambiguous alerts carry no training signal.
    """
    if alert.label is Label.BENIGN:
        return HiddenState.BENIGN
    if alert.label is Label.MALICIOUS:
        if alert.symbol.severity is Severity.INCONCLUSIVE:
            return HiddenState.SUSPICIOUS
        return HiddenState.MALICIOUS
    return None


def learn(corpus: Iterable[AlertSequence], alpha: float = 1.0) -> FactorModel:
    """Estimate unary and transition potentials from labeled sequences.

    Unary potentials follow the two-class add-alpha estimate per symbol:
    (state count + alpha) / (symbol total + 2*alpha), so the suspicious
    row keeps smoothing mass even when only benign/malicious evidence
    exists.  Transitions are add-alpha row-normalized over the three
    successor states.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive to keep potentials nonzero")
    sequences = list(corpus)
    unary_counts: dict[str, list[int]] = {}
    transition_counts = [[0] * 3 for _ in range(3)]
    have_benign = have_malicious = False

    for seq in sequences:
        previous: Optional[HiddenState] = None
        for alert in seq.alerts:
            state = _state_of(alert)
            if state is None:
                previous = None
                continue
            if alert.label is Label.BENIGN:
                have_benign = True
            else:
                have_malicious = True
            counts = unary_counts.setdefault(alert.symbol.name, [0, 0, 0])
            counts[state] += 1
            if previous is not None:
                transition_counts[previous][state] += 1
            previous = state

    if not (have_benign and have_malicious):
        raise DegenerateCorpus(
            "corpus must contain at least one benign- and one malicious-labeled alert"
        )

    unary: dict[str, tuple[float, float, float]] = {}
    for symbol, counts in unary_counts.items():
        total = sum(counts)
        denom = total + 2 * alpha
        unary[symbol] = tuple((c + alpha) / denom for c in counts)  # type: ignore[assignment]

    transition_rows = []
    for s in STATES:
        row_total = sum(transition_counts[s])
        denom = row_total + 3 * alpha
        transition_rows.append(tuple((c + alpha) / denom for c in transition_counts[s]))
    return FactorModel(unary=unary, transition=tuple(transition_rows), alpha=alpha)


def build(sequence: AlertSequence, model: FactorModel) -> ChainFactorGraph:
    if not sequence.alerts:
        raise EmptySequence("cannot build a factor graph over zero alerts")
    log_unary = []
    oov = []
    for i, alert in enumerate(sequence.alerts):
        if not model.knows(alert.symbol.name):
            oov.append(i)
        row = model.unary_row(alert.symbol.name)
        log_unary.append(tuple(math.log(v) for v in row))
    log_transition = tuple(
        tuple(math.log(v) for v in row) for row in model.transition
    )
    return ChainFactorGraph(
        sequence=sequence,
        log_unary=log_unary,  # type: ignore[arg-type]
        log_transition=log_transition,  # type: ignore[arg-type]
        oov_positions=oov,
    )


def infer_map(graph: ChainFactorGraph) -> list[HiddenState]:
    """Exact MAP by max-product; ties resolve to the lexicographically
    smallest assignment in the benign < suspicious < malicious order.

    ``best[i][s]`` is the best completion score from position i in state
    s; the forward walk then takes the first argmax at each step, which
    realizes the earliest-position lowest-state tie-break.
    """
    n = graph.n_variables
    u, T = graph.log_unary, graph.log_transition
    best = [[0.0] * 3 for _ in range(n)]
    for s in STATES:
        best[n - 1][s] = u[n - 1][s]
    for i in range(n - 2, -1, -1):
        for s in STATES:
            best[i][s] = u[i][s] + max(T[s][t] + best[i + 1][t] for t in STATES)

    states: list[HiddenState] = []
    prev: Optional[HiddenState] = None
    for i in range(n):
        scored = []
        for s in STATES:
            incoming = 0.0 if prev is None else T[prev][s]
            scored.append(incoming + best[i][s])
        target = max(scored)
        pick = next(s for s in STATES if scored[s] == target)
        states.append(pick)
        prev = pick
    return states


def infer_marginals(graph: ChainFactorGraph) -> list[tuple[float, float, float]]:
    """Exact per-position marginals via forward-backward.

    Messages renormalize at every step, which keeps values in range on
    arbitrarily long chains without changing the normalized marginals.
    """
    n = graph.n_variables
    u = [tuple(math.exp(v) for v in row) for row in graph.log_unary]
    T = [tuple(math.exp(v) for v in row) for row in graph.log_transition]

    forward = [[0.0] * 3 for _ in range(n)]
    forward[0] = list(u[0])
    _renorm(forward[0])
    for i in range(1, n):
        for s in STATES:
            forward[i][s] = u[i][s] * sum(forward[i - 1][t] * T[t][s] for t in STATES)
        _renorm(forward[i])

    backward = [[1.0] * 3 for _ in range(n)]
    for i in range(n - 2, -1, -1):
        for s in STATES:
            backward[i][s] = sum(T[s][t] * u[i + 1][t] * backward[i + 1][t] for t in STATES)
        _renorm(backward[i])

    marginals = []
    for i in range(n):
        joint = [forward[i][s] * backward[i][s] for s in STATES]
        _renorm(joint)
        marginals.append(tuple(joint))
    return marginals  # type: ignore[return-value]


def _renorm(row: list[float]) -> None:
    total = sum(row)
    if total <= 0.0:
        raise ValueError("all-zero message; potentials must be positive")
    for i in range(len(row)):
        row[i] /= total


def decide(
    sequence: AlertSequence,
    map_states: Sequence[HiddenState],
    marginals: Sequence[tuple[float, float, float]],
    policy: DecisionPolicy | None = None,
) -> Verdict:
    """Turn inference output into an actionable verdict.

    A critical-severity alert means compromise already happened, so it
    forces a retroactive preempt at its own position flagged too_late.
    Otherwise the first position where the policy sees malicious with at
    least ``min_alerts`` observed wins.  Reaching only suspicious (or
    malicious too early to act) downgrades to watch.
    """
    policy = policy or DecisionPolicy()
    alerts = sequence.alerts
    first_critical = next(
        (i for i, a in enumerate(alerts) if a.symbol.severity is Severity.CRITICAL), None
    )

    def malicious_at(i: int) -> bool:
        if policy.marginal_threshold is not None:
            return marginals[i][HiddenState.MALICIOUS] >= policy.marginal_threshold
        return map_states[i] is HiddenState.MALICIOUS

    preempt_at: Optional[int] = None
    for i in range(len(alerts)):
        if i + 1 >= policy.min_alerts and malicious_at(i):
            preempt_at = i
            break

    if preempt_at is not None and (first_critical is None or first_critical > preempt_at):
        return Verdict(
            map_states=list(map_states),
            marginals=list(marginals),
            decision=Decision.PREEMPT,
            decided_at_index=preempt_at,
            too_late=False,
        )
    if first_critical is not None:
        return Verdict(
            map_states=list(map_states),
            marginals=list(marginals),
            decision=Decision.PREEMPT,
            decided_at_index=first_critical,
            too_late=True,
        )
    if any(s is not HiddenState.BENIGN for s in map_states):
        return Verdict(
            map_states=list(map_states),
            marginals=list(marginals),
            decision=Decision.WATCH,
        )
    return Verdict(map_states=list(map_states), marginals=list(marginals), decision=Decision.NO_ACTION)


def infer_verdict(
    sequence: AlertSequence, model: FactorModel, policy: DecisionPolicy | None = None
) -> Verdict:
    """Build, infer, decide: the full chain for one entity sequence."""
    graph = build(sequence, model)
    return decide(sequence, infer_map(graph), infer_marginals(graph), policy)
