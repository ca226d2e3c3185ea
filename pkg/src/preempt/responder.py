"""Black-hole-router control plane: blocklist CRUD plus scanner auto-blocking.

The service keeps an authoritative in-memory blocklist with per-target
sequence numbers (acknowledgement order defines the linearization), a
sliding-window distinct-destination counter per traffic source, and a
mandatory allowlist of internal ranges that can never be blocked.  An
HTTP app exposes the same operations for remote callers.
"""

from __future__ import annotations

import ipaddress
import threading
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Callable, Optional

SYSTEM_PRINCIPAL = "system"

# Exact distinct tracking up to a full /16 sweep; beyond that, approximate.
DISTINCT_CAP = 1 << 16

DEFAULT_SCAN_THRESHOLD = 256
DEFAULT_SCAN_WINDOW = timedelta(minutes=10)
DEFAULT_BLOCK_TTL = timedelta(hours=24)


class BlockReason(Enum):
    MASS_SCAN_AUTO = "mass_scan_auto"
    PREEMPTION_OPERATOR = "preemption_operator"
    PREEMPTION_AUTO = "preemption_auto"


class Unauthorized(Exception):
    pass


class NotFound(Exception):
    pass


class InvalidTarget(Exception):
    pass


@dataclass(frozen=True)
class BlockDecision:
    target: str
    reason: BlockReason
    ttl: timedelta
    created_at: datetime
    created_by: str
    seq: int

    def __post_init__(self) -> None:
        if self.ttl <= timedelta(0):
            raise ValueError("ttl must be positive")
        if self.reason is BlockReason.MASS_SCAN_AUTO and self.created_by != SYSTEM_PRINCIPAL:
            raise ValueError("mass-scan blocks are system-created")

    @property
    def expires_at(self) -> datetime:
        return self.created_at + self.ttl

    def active_at(self, now: datetime) -> bool:
        return now < self.expires_at

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "reason": self.reason.value,
            "ttl_seconds": self.ttl.total_seconds(),
            "created_at": self.created_at.isoformat(),
            "created_by": self.created_by,
            "expires_at": self.expires_at.isoformat(),
            "seq": self.seq,
        }


def _canonical_target(target: str) -> str:
    """Validate and canonicalize an IP or CIDR target."""
    try:
        if "/" in target:
            return str(ipaddress.ip_network(target, strict=False))
        return str(ipaddress.ip_address(target))
    except ValueError as exc:
        raise InvalidTarget(str(exc)) from None


class ScanCounter:
    """Sliding-window distinct destinations for one source.

    Exact via a hash set up to DISTINCT_CAP entries; past the cap each
    new unseen destination bumps an overflow tally that cannot dedupe,
    so the total is an upper-bound approximation (the cap covers a full
    /16 sweep exactly).  Window eviction is amortized O(1) through an
    event queue with lazy deletion.
    """

    def __init__(self, source_ip: str, window: timedelta = DEFAULT_SCAN_WINDOW):
        self.source_ip = source_ip
        self.window = window
        self._last_seen: dict[str, datetime] = {}
        self._events: deque[tuple[datetime, Optional[str]]] = deque()
        self._overflow = 0

    def record(self, dst: str, ts: datetime) -> None:
        self._evict(ts)
        if dst in self._last_seen:
            self._last_seen[dst] = ts
            self._events.append((ts, dst))
        elif len(self._last_seen) < DISTINCT_CAP:
            self._last_seen[dst] = ts
            self._events.append((ts, dst))
        else:
            self._overflow += 1
            self._events.append((ts, None))

    def distinct_destinations(self, now: Optional[datetime] = None) -> int:
        if now is not None:
            self._evict(now)
        return len(self._last_seen) + self._overflow

    def _evict(self, now: datetime) -> None:
        horizon = now - self.window
        while self._events and self._events[0][0] <= horizon:
            ts, dst = self._events.popleft()
            if dst is None:
                self._overflow -= 1
            elif self._last_seen.get(dst) == ts:
                del self._last_seen[dst]


@dataclass
class AuditRecord:
    seq: int
    at: datetime
    principal: str
    action: str
    target: str


class Blocklist:
    """Active block store; one lock makes every operation atomic, so the
    acknowledgement sequence numbers define a valid linearization."""

    def __init__(self, now_fn: Callable[[], datetime] = lambda: datetime.now(timezone.utc)):
        self._entries: dict[str, BlockDecision] = {}
        self._lock = threading.Lock()
        self._seq = 0
        self._now = now_fn
        self.audit: list[AuditRecord] = []

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def request_block(
        self,
        target: str,
        reason: BlockReason,
        ttl: timedelta,
        principal: str,
        now: Optional[datetime] = None,
    ) -> tuple[BlockDecision, bool]:
        """Returns (decision, created).  A second add while the block is
        active acknowledges the existing entry instead of replacing it."""
        if reason is BlockReason.PREEMPTION_OPERATOR and principal == SYSTEM_PRINCIPAL:
            raise Unauthorized("operator-reason blocks need a human principal")
        canonical = _canonical_target(target)
        with self._lock:
            at = now or self._now()
            existing = self._entries.get(canonical)
            if existing is not None and existing.active_at(at):
                self.audit.append(AuditRecord(existing.seq, at, principal, "add_noop", canonical))
                return existing, False
            decision = BlockDecision(
                target=canonical,
                reason=reason,
                ttl=ttl,
                created_at=at,
                created_by=principal,
                seq=self._next_seq(),
            )
            self._entries[canonical] = decision
            self.audit.append(AuditRecord(decision.seq, at, principal, "add", canonical))
            return decision, True

    def release_block(self, target: str, principal: str, now: Optional[datetime] = None) -> int:
        canonical = _canonical_target(target)
        with self._lock:
            at = now or self._now()
            existing = self._entries.get(canonical)
            if existing is None or not existing.active_at(at):
                self._entries.pop(canonical, None)
                raise NotFound(canonical)
            del self._entries[canonical]
            seq = self._next_seq()
            self.audit.append(AuditRecord(seq, at, principal, "release", canonical))
            return seq

    def list_blocks(self, now: Optional[datetime] = None) -> list[BlockDecision]:
        with self._lock:
            at = now or self._now()
            return sorted(
                (d for d in self._entries.values() if d.active_at(at)),
                key=lambda d: d.target,
            )

    def is_blocked(self, target: str, now: Optional[datetime] = None) -> bool:
        canonical = _canonical_target(target)
        with self._lock:
            at = now or self._now()
            entry = self._entries.get(canonical)
            return entry is not None and entry.active_at(at)


class ResponderService:
    """Blocklist + scan tracking + auto-block policy behind one facade."""

    def __init__(
        self,
        allowlist: list[str],
        tokens: Optional[dict[str, str]] = None,
        scan_threshold: int = DEFAULT_SCAN_THRESHOLD,
        scan_window: timedelta = DEFAULT_SCAN_WINDOW,
        block_ttl: timedelta = DEFAULT_BLOCK_TTL,
        now_fn: Callable[[], datetime] = lambda: datetime.now(timezone.utc),
    ):
        # Refusing to start without an allowlist is deliberate: auto-blocking
        # an internal range is the catastrophic failure mode.
        if not allowlist:
            raise ValueError("allowlist of internal CIDRs is mandatory")
        self.allowlist = [ipaddress.ip_network(c, strict=False) for c in allowlist]
        self.tokens = tokens or {}
        self.scan_threshold = scan_threshold
        self.scan_window = scan_window
        self.block_ttl = block_ttl
        self.blocklist = Blocklist(now_fn=now_fn)
        self._counters: dict[str, ScanCounter] = {}
        self._counter_lock = threading.Lock()

    def principal_for(self, token: Optional[str]) -> str:
        if token is None or token not in self.tokens:
            raise Unauthorized("unknown bearer token")
        return self.tokens[token]

    def is_internal(self, ip: str) -> bool:
        addr = ipaddress.ip_address(ip)
        return any(addr in net for net in self.allowlist)

    def record_flow(self, src: str, dst: str, ts: datetime) -> Optional[BlockDecision]:
        """Feed one flow; returns a new auto-block decision if one fired."""
        with self._counter_lock:
            counter = self._counters.get(src)
            if counter is None:
                counter = self._counters[src] = ScanCounter(src, window=self.scan_window)
        counter.record(dst, ts)
        return self.auto_block(counter, ts)

    def auto_block(self, counter: ScanCounter, now: datetime) -> Optional[BlockDecision]:
        if counter.distinct_destinations(now) < self.scan_threshold:
            return None
        if self.is_internal(counter.source_ip):
            return None
        if self.blocklist.is_blocked(counter.source_ip, now):
            return None
        decision, created = self.blocklist.request_block(
            counter.source_ip,
            BlockReason.MASS_SCAN_AUTO,
            self.block_ttl,
            SYSTEM_PRINCIPAL,
            now=now,
        )
        return decision if created else None

    def top_scanners(self, limit: int = 20, now: Optional[datetime] = None) -> list[dict]:
        with self._counter_lock:
            counters = list(self._counters.values())
        rows = [
            {"source_ip": c.source_ip, "distinct_destinations": c.distinct_destinations(now)}
            for c in counters
        ]
        rows.sort(key=lambda r: (-r["distinct_destinations"], r["source_ip"]))
        return rows[:limit]


def create_responder_router(service: ResponderService):
    """Router with the responder control plane, embeddable in a larger app."""
    from fastapi import APIRouter, Body, Header, HTTPException, Query

    app = APIRouter()

    def principal(authorization: Optional[str]) -> str:
        token = None
        if authorization and authorization.startswith("Bearer "):
            token = authorization.removeprefix("Bearer ")
        try:
            return service.principal_for(token)
        except Unauthorized as exc:
            raise HTTPException(status_code=401, detail=str(exc)) from None

    @app.post("/blocks")
    def add_block(
        payload: dict = Body(...),
        authorization: Optional[str] = Header(default=None),
    ):
        who = principal(authorization)
        target = payload.get("target", "")
        reason = BlockReason(payload.get("reason", BlockReason.PREEMPTION_OPERATOR.value))
        ttl = timedelta(seconds=float(payload.get("ttl_seconds", service.block_ttl.total_seconds())))
        try:
            decision, created = service.blocklist.request_block(target, reason, ttl, who)
        except InvalidTarget as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        except Unauthorized as exc:
            raise HTTPException(status_code=401, detail=str(exc)) from None
        body = decision.to_json()
        body["created"] = created
        return body

    @app.delete("/blocks/{target:path}")
    def remove_block(target: str, authorization: Optional[str] = Header(default=None)):
        who = principal(authorization)
        try:
            seq = service.blocklist.release_block(target, who)
        except NotFound:
            raise HTTPException(status_code=404, detail=f"no active block for {target}") from None
        except InvalidTarget as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return {"released": target, "seq": seq}

    @app.get("/blocks")
    def get_blocks(authorization: Optional[str] = Header(default=None)):
        principal(authorization)
        return {"blocks": [d.to_json() for d in service.blocklist.list_blocks()]}

    @app.get("/scanners")
    def get_scanners(
        limit: int = Query(default=20, ge=1, le=1000),
        authorization: Optional[str] = Header(default=None),
    ):
        principal(authorization)
        return {"scanners": service.top_scanners(limit)}

    return app


def create_responder_app(service: ResponderService):
    """Standalone FastAPI app exposing the responder control plane."""
    from fastapi import FastAPI

    app = FastAPI(title="preempt responder")
    app.include_router(create_responder_router(service))
    return app
