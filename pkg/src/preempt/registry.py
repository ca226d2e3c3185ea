"""Symbol registry: alert vocabulary, matching rules, and PII sanitizers.

A registry is an ordered list of symbols, each carrying a severity class
and zero or more message rules.  A rule is a regular expression whose
named capture groups become alert metadata (group names use ``_`` where
the metadata key uses ``-``, since regex groups cannot contain hyphens).
Matching is first-match-wins over the flattened (symbol, rule) order, so
specific rules must precede generic ones.

Sanitizers are (pattern, placeholder) pairs applied to metadata values
until no pattern matches; they are configuration, not discovery.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .types import AlertSymbol, Severity

UNCLASSIFIED = "alert_unclassified"

# Bound on sanitizer fixpoint iterations before giving up on a value.
_SANITIZE_MAX_PASSES = 10
_SANITIZE_FALLBACK = "<REDACTED>"


@dataclass(frozen=True)
class SymbolRule:
    """One compiled message rule bound to its symbol."""

    symbol: AlertSymbol
    pattern: re.Pattern[str]

    def metadata_from(self, message: str) -> Optional[dict[str, str]]:
        m = self.pattern.search(message)
        if m is None:
            return None
        return {
            name.replace("_", "-"): value
            for name, value in m.groupdict().items()
            if value is not None
        }


@dataclass(frozen=True)
class Sanitizer:
    pattern: re.Pattern[str]
    placeholder: str


@dataclass
class SymbolRegistry:
    """Immutable after load; shareable across threads."""

    symbols: dict[str, AlertSymbol] = field(default_factory=dict)
    rules: list[SymbolRule] = field(default_factory=list)
    sanitizers: list[Sanitizer] = field(default_factory=list)
    version: int = 1

    def add_symbol(self, name: str, severity: Severity, rule_patterns: Iterable[str] = ()) -> None:
        if name in self.symbols:
            raise ValueError(f"duplicate symbol {name!r}")
        symbol = AlertSymbol(name=name, severity=severity)
        self.symbols[name] = symbol
        for pat in rule_patterns:
            self.rules.append(SymbolRule(symbol=symbol, pattern=re.compile(pat)))

    def add_sanitizer(self, pattern: str, placeholder: str) -> None:
        compiled = re.compile(pattern)
        if compiled.search(placeholder):
            raise ValueError(f"placeholder {placeholder!r} matches its own pattern")
        self.sanitizers.append(Sanitizer(pattern=compiled, placeholder=placeholder))

    @property
    def unclassified(self) -> AlertSymbol:
        return self.symbols[UNCLASSIFIED]

    def match(self, message: str) -> tuple[AlertSymbol, dict[str, str]]:
        """First matching rule wins; no match falls back to unclassified."""
        for rule in self.rules:
            md = rule.metadata_from(message)
            if md is not None:
                return rule.symbol, md
        return self.unclassified, {}

    def sanitize(self, value: str) -> str:
        """Replace configured PII patterns until none match.

        Substitution can in principle re-expose a pattern (overlapping
        matches), so iterate to a fixpoint with a hard bound.
        """
        current = value
        for _ in range(_SANITIZE_MAX_PASSES):
            nxt = current
            for s in self.sanitizers:
                nxt = s.pattern.sub(s.placeholder, nxt)
            if nxt == current:
                return current
            current = nxt
        return _SANITIZE_FALLBACK

    def to_json(self) -> str:
        doc = {
            "version": self.version,
            "sanitizers": [
                {"pattern": s.pattern.pattern, "placeholder": s.placeholder}
                for s in self.sanitizers
            ],
            "symbols": [
                {
                    "name": sym.name,
                    "severity": sym.severity.value,
                    "rules": [r.pattern.pattern for r in self.rules if r.symbol.name == sym.name],
                }
                for sym in self.symbols.values()
            ],
        }
        return json.dumps(doc, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "SymbolRegistry":
        doc = json.loads(text)
        reg = SymbolRegistry(version=int(doc.get("version", 1)))
        for s in doc.get("sanitizers", []):
            reg.add_sanitizer(s["pattern"], s["placeholder"])
        for sym in doc["symbols"]:
            reg.add_symbol(sym["name"], Severity(sym["severity"]), sym.get("rules", ()))
        if UNCLASSIFIED not in reg.symbols:
            reg.add_symbol(UNCLASSIFIED, Severity.INCONCLUSIVE)
        return reg

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @staticmethod
    def load(path: Path | str) -> "SymbolRegistry":
        return SymbolRegistry.from_json(Path(path).read_text(encoding="utf-8"))


def default_registry() -> SymbolRegistry:
    """Registry covering the monitor vocabulary the simulator emits.

    Severity policy: broad recon and ordinary session activity is
    inconclusive; concrete attack steps are significant; alert types that
    imply damage already done (escalation, PII egress) are critical.
    """
    reg = SymbolRegistry()
    reg.add_sanitizer(r"/(?:[\w.\-]+/)*[\w.\-]+", "<FILE>")
    reg.add_sanitizer(r"[\w.+\-]+@[\w\-]+(?:\.[\w\-]+)+", "<EMAIL>")

    reg.add_symbol(
        "alert_port_probe",
        Severity.INCONCLUSIVE,
        [
            r"(?P<source_ip>[\d.]+) scanned at least \d+ unique ports of host (?P<dest_ip>[\d.]+)",
            r"(?P<source_ip>[\d.]+) attempted \d+ connections? to (?P<dest_ip>[\d.]+) on port \d+/tcp",
        ],
    )
    reg.add_symbol(
        "alert_web_probe",
        Severity.INCONCLUSIVE,
        [r"GET (?P<resource>/\S*) from (?P<source_ip>[\d.]+) returned (?:301|403|404)"],
    )
    reg.add_symbol(
        "alert_failed_login",
        Severity.INCONCLUSIVE,
        [
            r"Failed password for (?:invalid user )?(?P<attempted_user>\S+) from (?P<source_ip>[\d.]+)"
        ],
    )
    reg.add_symbol(
        "alert_login",
        Severity.INCONCLUSIVE,
        [r"Accepted (?:password|publickey) for (?P<user>\S+) from (?P<source_ip>[\d.]+)"],
    )
    reg.add_symbol(
        "alert_compute_job",
        Severity.INCONCLUSIVE,
        [r"job \d+ submitted by (?P<user>\S+)"],
    )
    reg.add_symbol(
        "alert_logout",
        Severity.INCONCLUSIVE,
        [r"session closed for user (?P<user>\S+)"],
    )
    reg.add_symbol(
        "alert_version_recon",
        Severity.SIGNIFICANT,
        [r"client (?P<source_ip>[\d.]+) executed: SHOW server_version_num"],
    )
    reg.add_symbol(
        "alert_payload_staging",
        Severity.SIGNIFICANT,
        [r"client (?P<source_ip>[\d.]+) wrote largeobject with header 7F454C46"],
    )
    reg.add_symbol(
        "alert_file_drop",
        Severity.SIGNIFICANT,
        [r"client (?P<source_ip>[\d.]+) executed: SELECT (?:io|lo)_export\(\d+, '(?P<path>[^']+)'\)"],
    )
    reg.add_symbol(
        "alert_c2_beacon",
        Severity.SIGNIFICANT,
        [r"(?P<source_ip>[\d.]+) established periodic outbound connection to (?P<dest_ip>[\d.]+):\d+"],
    )
    reg.add_symbol(
        "alert_key_harvest",
        Severity.SIGNIFICANT,
        [r"process \d+ read ssh private key (?P<path>\S+)"],
    )
    reg.add_symbol(
        "alert_ssh_lateral",
        Severity.SIGNIFICANT,
        [r"ssh lateral movement from (?P<source_ip>[\d.]+) to (?P<dest_ip>[\d.]+)"],
    )
    reg.add_symbol(
        "alert_download_sensitive",
        Severity.SIGNIFICANT,
        # Tolerates masked octets like 64.215.xxx.yyy in exported logs.
        [r"wget (?P<source_ip>\d+\.\d+\.[\w]+\.[\w]+)/\S+"],
    )
    reg.add_symbol(
        "alert_compile_kernel_module",
        Severity.SIGNIFICANT,
        [r"(?:gcc|cc|make)\b.* (?:kernel module|\S+\.ko\b)"],
    )
    reg.add_symbol(
        "alert_erase_forensic",
        Severity.SIGNIFICANT,
        [r"(?:shred|rm) .*(?:/var/log/\S+|\.bash_history)"],
    )
    reg.add_symbol(
        "alert_privilege_escalation",
        Severity.CRITICAL,
        [r"session opened for user root by (?P<user>\S+)"],
    )
    reg.add_symbol(
        "alert_pii_http_egress",
        Severity.CRITICAL,
        [r"outbound HTTP POST from (?P<source_ip>[\d.]+) carried \d+ (?:SSN|account) records"],
    )
    reg.add_symbol(UNCLASSIFIED, Severity.INCONCLUSIVE)
    return reg
