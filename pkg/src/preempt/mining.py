"""Pattern mining over labeled incident alert sequences.

Recurring attack behavior shows up as common subsequences across
incidents.  The miner computes pairwise longest common subsequences,
keeps the distinct results of length two or more as the pattern catalog,
and counts how many incidents contain each pattern.  Companion
statistics: pairwise Jaccard similarity with its CDF, pattern length
histogram, and critical-alert counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .types import AlertSequence, Severity


class InsufficientCorpus(Exception):
    """Mining needs at least two incidents."""


@dataclass(frozen=True)
class Pattern:
    id: str
    symbols: tuple[str, ...]
    occurrence_count: int

    def __post_init__(self) -> None:
        if len(self.symbols) < 2:
            raise ValueError("catalog patterns have at least two symbols")
        if self.occurrence_count < 1:
            raise ValueError("occurrence_count must be positive")


@dataclass
class PatternCatalog:
    patterns: list[Pattern]
    corpus_size: int

    def by_id(self, pattern_id: str) -> Pattern:
        for p in self.patterns:
            if p.id == pattern_id:
                return p
        raise KeyError(pattern_id)


@dataclass
class SimilarityReport:
    pairwise_scores: dict[tuple[int, int], float]
    cdf_points: list[tuple[float, float]]

    def score(self, i: int, j: int) -> float:
        if i == j:
            raise KeyError("self-pairs are not scored")
        return self.pairwise_scores[(min(i, j), max(i, j))]

    def cdf(self, threshold: float) -> float:
        """Fraction of pairs with similarity <= threshold."""
        total = len(self.pairwise_scores)
        if total == 0:
            return 1.0
        hits = sum(1 for s in self.pairwise_scores.values() if s <= threshold)
        return hits / total


@dataclass
class LengthStats:
    counts: dict[int, int]
    short_fraction: float  # patterns of length 2..4 over all patterns


@dataclass
class CriticalStats:
    unique_critical: int
    total_occurrences: int
    # incident index -> alert index of the first critical alert, if any
    first_positions: dict[int, Optional[int]] = field(default_factory=dict)


def lcs(a: Sequence[str], b: Sequence[str]) -> list[str]:
    """One longest common subsequence of a and b.

    Among all maximal-length results, the one whose match positions in
    ``a`` are lexicographically earliest is returned (then earliest in
    ``b``), which makes mining deterministic.
    """
    n, m = len(a), len(b)
    # L[i][j] = LCS length of a[i:], b[j:]
    L = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, nxt = L[i], L[i + 1]
        for j in range(m - 1, -1, -1):
            if a[i] == b[j]:
                row[j] = 1 + nxt[j + 1]
            else:
                row[j] = max(nxt[j], row[j + 1])
    out: list[str] = []
    i = j = 0
    while L[i][j] > 0:
        k = L[i][j]
        # Earliest a-position that can start an optimal remainder, then
        # its earliest valid b-position.
        picked = False
        for i2 in range(i, n):
            if L[i2][j] < k:
                break
            for j2 in range(j, m):
                if L[i2][j2] < k:
                    break
                if a[i2] == b[j2] and 1 + L[i2 + 1][j2 + 1] == k:
                    out.append(a[i2])
                    i, j = i2 + 1, j2 + 1
                    picked = True
                    break
            if picked:
                break
        assert picked, "an optimal first match always exists while L > 0"
    return out


def jaccard(a: Sequence[str], b: Sequence[str]) -> float:
    """Set similarity over distinct symbols; 0.0 for two empty inputs."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def is_subsequence(pattern: Sequence[str], haystack: Sequence[str]) -> bool:
    it = iter(haystack)
    return all(any(sym == h for h in it) for sym in pattern)


def _symbol_lists(incidents: Sequence[AlertSequence]) -> list[list[str]]:
    return [inc.symbols() for inc in incidents]


def mine_catalog(incidents: Sequence[AlertSequence]) -> PatternCatalog:
    """Mine the pattern catalog from >= 2 incident sequences.

    Candidate patterns are the deduplicated pairwise LCS results of
    length >= 2; each is counted over the whole corpus by subsequence
    containment.  Ids S1, S2, ... follow the sort order: occurrence
    count descending, then symbol tuple ascending, so the ranking is
    insensitive to incident order.
    """
    if len(incidents) < 2:
        raise InsufficientCorpus(f"need >= 2 incidents, got {len(incidents)}")
    seqs = _symbol_lists(incidents)
    candidates: set[tuple[str, ...]] = set()
    for i in range(len(seqs)):
        for j in range(i + 1, len(seqs)):
            # The tie-break favors the first argument, so order each pair
            # canonically to keep the result independent of incident order.
            first, second = sorted((seqs[i], seqs[j]))
            common = tuple(lcs(first, second))
            if len(common) >= 2:
                candidates.add(common)

    counted = [
        (sum(1 for s in seqs if is_subsequence(pat, s)), pat) for pat in candidates
    ]
    counted.sort(key=lambda item: (-item[0], item[1]))
    patterns = [
        Pattern(id=f"S{rank}", symbols=pat, occurrence_count=count)
        for rank, (count, pat) in enumerate(counted, start=1)
    ]
    return PatternCatalog(patterns=patterns, corpus_size=len(incidents))


def similarity_report(incidents: Sequence[AlertSequence]) -> SimilarityReport:
    if len(incidents) < 2:
        raise InsufficientCorpus(f"need >= 2 incidents, got {len(incidents)}")
    seqs = _symbol_lists(incidents)
    scores: dict[tuple[int, int], float] = {}
    for i in range(len(seqs)):
        for j in range(i + 1, len(seqs)):
            scores[(i, j)] = jaccard(seqs[i], seqs[j])
    points: list[tuple[float, float]] = []
    total = len(scores)
    seen = 0
    for value in sorted(set(scores.values())):
        seen += sum(1 for s in scores.values() if s == value)
        points.append((value, seen / total))
    return SimilarityReport(pairwise_scores=scores, cdf_points=points)


def length_histogram(catalog: PatternCatalog) -> LengthStats:
    counts: dict[int, int] = {}
    for p in catalog.patterns:
        counts[len(p.symbols)] = counts.get(len(p.symbols), 0) + 1
    total = len(catalog.patterns)
    short = sum(c for length, c in counts.items() if 2 <= length <= 4)
    return LengthStats(counts=counts, short_fraction=(short / total) if total else 0.0)


def critical_alert_stats(incidents: Sequence[AlertSequence]) -> CriticalStats:
    """Distinct critical symbols, their occurrence total, and how late
    the first critical alert appears per incident."""
    unique: set[str] = set()
    occurrences = 0
    first_positions: dict[int, Optional[int]] = {}
    for idx, inc in enumerate(incidents):
        first: Optional[int] = None
        for pos, alert in enumerate(inc.alerts):
            if alert.symbol.severity is Severity.CRITICAL:
                unique.add(alert.symbol.name)
                occurrences += 1
                if first is None:
                    first = pos
        first_positions[idx] = first
    return CriticalStats(
        unique_critical=len(unique),
        total_occurrences=occurrences,
        first_positions=first_positions,
    )
