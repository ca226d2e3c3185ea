"""Streaming detection gateway.

Ties the pipeline together as a long-running service: wire records come
in, per-entity timelines grow, the chain model re-runs on every append,
and preemption verdicts become operator notifications.  State changes
are event-sourced to an append-only JSONL log with periodic snapshots,
so a restarted gateway converges to exactly the state a fresh replay of
the same input would produce.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Optional

from .inference import Decision, DecisionPolicy, FactorModel, Verdict, infer_verdict
from .normalize import normalize
from .parsing import MalformedRecord, UnknownFormat, parse_record
from .registry import SymbolRegistry
from .responder import BlockReason, ResponderService
from .scanfilter import DEFAULT_REPEAT_THRESHOLD, DEFAULT_WINDOW
from .types import Alert, AlertSequence, EntityKey, Severity

ACTIONS = ("confirm_block", "dismiss", "escalate")
_STATUS_RANK = {"normal": 0, "watch": 1, "preempted": 2}
_DECISION_STATUS = {
    Decision.NO_ACTION: "normal",
    Decision.WATCH: "watch",
    Decision.PREEMPT: "preempted",
}


class UnknownEntity(Exception):
    pass


class InvalidAction(Exception):
    pass


@dataclass
class GatewayConfig:
    registry: SymbolRegistry
    model: FactorModel
    base_date: Optional[date] = None
    policy: DecisionPolicy = field(default_factory=DecisionPolicy)
    scan_window: timedelta = DEFAULT_WINDOW
    repeat_threshold: int = DEFAULT_REPEAT_THRESHOLD
    quiet_period: timedelta = timedelta(hours=24)
    tokens: dict[str, str] = field(default_factory=dict)
    data_dir: Optional[Path] = None
    snapshot_every: int = 1000


class StreamScanFilter:
    """Prospective per-(symbol, source) repeat suppression.

    The batch filter sees whole windows before deciding; a stream
    cannot, so this variant admits the first ``threshold - 1`` repeats
    in each tumbling window and drops the rest.  Significant and
    critical alerts are never touched.
    """

    def __init__(self, window: timedelta, threshold: int) -> None:
        if threshold < 2:
            raise ValueError("repeat threshold below 2 would drop every alert")
        self.window = window
        self.threshold = threshold
        self._state: dict[tuple[str, str], list] = {}  # key -> [window_start, count]

    def admit(self, alert: Alert) -> bool:
        if alert.symbol.severity is not Severity.INCONCLUSIVE or not alert.entity.source_ip:
            return True
        key = (alert.symbol.name, alert.entity.source_ip)
        slot = self._state.get(key)
        if slot is None or alert.timestamp >= slot[0] + self.window:
            self._state[key] = [alert.timestamp, 1]
            return True
        slot[1] += 1
        return slot[1] < self.threshold

    def dump(self) -> list[list]:
        return [
            [symbol, ip, start.isoformat(), count]
            for (symbol, ip), (start, count) in sorted(self._state.items())
        ]

    def restore(self, rows: Iterable[list]) -> None:
        self._state = {
            (symbol, ip): [datetime.fromisoformat(start), count]
            for symbol, ip, start, count in rows
        }


@dataclass
class EntityTimeline:
    entity: EntityKey
    alerts: list[Alert] = field(default_factory=list)
    status: str = "normal"
    episode: int = 0
    episode_start: int = 0
    notified_episodes: set[int] = field(default_factory=set)
    frozen_states: list[str] = field(default_factory=list)
    frozen_marginals: list[tuple[float, float, float]] = field(default_factory=list)
    escalated: bool = False
    verdict: Optional[Verdict] = None

    def chain(self) -> AlertSequence:
        return AlertSequence(entity=self.entity, alerts=self.alerts[self.episode_start :])

    def close_episode(self) -> None:
        """Freeze the current episode's inferred states and start a new one."""
        if self.verdict is not None:
            self.frozen_states.extend(s.label for s in self.verdict.map_states)
            self.frozen_marginals.extend(self.verdict.marginals)
        else:
            self.frozen_states.extend("benign" for _ in self.alerts[self.episode_start :])
            self.frozen_marginals.extend((1.0, 0.0, 0.0) for _ in self.alerts[self.episode_start :])
        self.episode += 1
        self.episode_start = len(self.alerts)
        self.verdict = None


class Gateway:
    def __init__(self, config: GatewayConfig, responder: Optional[ResponderService] = None) -> None:
        self.config = config
        self.responder = responder
        self._lock = threading.RLock()
        self._notify_cond = threading.Condition(self._lock)
        self._filter = StreamScanFilter(config.scan_window, config.repeat_threshold)
        self.timelines: dict[str, EntityTimeline] = {}
        self.notifications: list[dict] = []
        self.audit: list[dict] = []
        self.malformed_count = 0
        self._log_path: Optional[Path] = None
        self._snapshot_path: Optional[Path] = None
        self._log_fh = None
        self._log_count = 0
        if config.data_dir is not None:
            config.data_dir.mkdir(parents=True, exist_ok=True)
            self._log_path = config.data_dir / "events.jsonl"
            self._snapshot_path = config.data_dir / "snapshot.json"
            self._recover()
            self._log_fh = open(self._log_path, "a", encoding="utf-8")

    # -- ingest ----------------------------------------------------------

    def ingest_line(self, format: str, line: str) -> Optional[Alert]:
        """Parse, normalize, filter, append, infer.  Returns the appended
        alert, or None when the line was filtered out as scan noise.

        Raises MalformedRecord/UnknownFormat after counting the failure;
        batch ingest turns that into a counter, not an abort.
        """
        with self._lock:
            try:
                record = parse_record(line, format, base_date=self.config.base_date)
            except (MalformedRecord, UnknownFormat):
                self.malformed_count += 1
                raise
            self._append_log({"t": "e", "format": format, "line": line})
            return self._ingest_record(record)

    def ingest_batch(self, events: Iterable[dict]) -> dict:
        accepted = malformed = filtered = 0
        for event in events:
            try:
                alert = self.ingest_line(event["format"], event["line"])
            except (MalformedRecord, UnknownFormat):
                malformed += 1
                continue
            if alert is None:
                filtered += 1
            else:
                accepted += 1
        return {"accepted": accepted, "filtered": filtered, "malformed": malformed}

    def _ingest_record(self, record) -> Optional[Alert]:
        alert = normalize(record, self.config.registry)
        if not self._filter.admit(alert):
            return None
        ident = alert.entity.identity_str()
        timeline = self.timelines.get(ident)
        if timeline is None:
            timeline = self.timelines[ident] = EntityTimeline(entity=alert.entity)
        elif timeline.alerts:
            quiet = alert.timestamp - timeline.alerts[-1].timestamp
            if quiet > self.config.quiet_period:
                timeline.close_episode()
                timeline.status = "normal"
        timeline.alerts.append(alert)
        verdict = infer_verdict(timeline.chain(), self.config.model, self.config.policy)
        timeline.verdict = verdict
        new_status = _DECISION_STATUS[verdict.decision]
        if _STATUS_RANK[new_status] > _STATUS_RANK[timeline.status]:
            timeline.status = new_status
        if verdict.decision is Decision.PREEMPT and timeline.episode not in timeline.notified_episodes:
            timeline.notified_episodes.add(timeline.episode)
            self._push_notification(timeline, verdict)
        return alert

    def _push_notification(self, timeline: EntityTimeline, verdict: Verdict) -> None:
        chain = timeline.alerts[timeline.episode_start :]
        decided_abs = timeline.episode_start + (verdict.decided_at_index or 0)
        self.notifications.append(
            {
                "id": len(self.notifications) + 1,
                "entity": timeline.entity.identity_str(),
                "episode": timeline.episode,
                "decided_at_index": decided_abs,
                "too_late": verdict.too_late,
                "timestamp": chain[-1].timestamp.isoformat(),
                "alerts": [
                    {
                        "ts": a.timestamp.isoformat(),
                        "symbol": a.symbol.name,
                        "severity": a.symbol.severity.value,
                    }
                    for a in chain
                ],
            }
        )
        self._notify_cond.notify_all()

    # -- reads -----------------------------------------------------------

    def entity_summaries(self) -> list[dict]:
        with self._lock:
            rows = []
            for ident in sorted(self.timelines):
                t = self.timelines[ident]
                rows.append(
                    {
                        "id": ident,
                        "status": t.status,
                        "alert_count": len(t.alerts),
                        "last_ts": t.alerts[-1].timestamp.isoformat() if t.alerts else None,
                        "decision": t.verdict.decision.value if t.verdict else None,
                        "escalated": t.escalated,
                    }
                )
            return rows

    def timeline_view(self, ident: str) -> dict:
        with self._lock:
            t = self.timelines.get(ident)
            if t is None:
                raise UnknownEntity(ident)
            states = list(t.frozen_states)
            margins = [list(m) for m in t.frozen_marginals]
            if t.verdict is not None:
                states.extend(s.label for s in t.verdict.map_states)
                margins.extend(list(m) for m in t.verdict.marginals)
            return {
                "id": ident,
                "status": t.status,
                "episode": t.episode,
                "escalated": t.escalated,
                "alerts": [
                    {
                        "ts": a.timestamp.isoformat(),
                        "symbol": a.symbol.name,
                        "severity": a.symbol.severity.value,
                    }
                    for a in t.alerts
                ],
                "map_states": states,
                "marginals": margins,
                "decision": t.verdict.decision.value if t.verdict else None,
                "decided_at_index": (
                    t.episode_start + t.verdict.decided_at_index
                    if t.verdict and t.verdict.decided_at_index is not None
                    else None
                ),
                "too_late": bool(t.verdict and t.verdict.too_late),
            }

    def notifications_since(self, since: int = 0, wait: float = 0.0) -> dict:
        deadline = time.monotonic() + wait
        with self._notify_cond:
            while True:
                fresh = [n for n in self.notifications if n["id"] > since]
                remaining = deadline - time.monotonic()
                if fresh or remaining <= 0:
                    break
                self._notify_cond.wait(timeout=remaining)
            last = self.notifications[-1]["id"] if self.notifications else since
            return {"notifications": fresh, "next": max(since, last)}

    # -- operator actions --------------------------------------------------

    def principal_for(self, token: Optional[str]) -> str:
        who = self.config.tokens.get(token or "")
        if who is None:
            raise PermissionError("unknown or missing bearer token")
        return who

    def act(self, ident: str, action: str, principal: str) -> dict:
        wall = datetime.now().astimezone()
        with self._lock:
            result = self._apply_action(ident, action, principal, wall=wall)
            self._append_log(
                {
                    "t": "a",
                    "entity": ident,
                    "action": action,
                    "principal": principal,
                    "wall": wall.isoformat(),
                }
            )
            return result

    def _apply_action(self, ident: str, action: str, principal: str, wall: datetime) -> dict:
        if action not in ACTIONS:
            raise InvalidAction(f"unknown action {action!r}")
        timeline = self.timelines.get(ident)
        if timeline is None:
            raise UnknownEntity(ident)
        detail: dict = {"entity": ident, "action": action}
        if action == "confirm_block":
            if self.responder is None:
                raise InvalidAction("no responder configured")
            target = timeline.entity.source_ip
            if not target:
                raise InvalidAction("entity has no source address to block")
            decision, created = self.responder.blocklist.request_block(
                target, BlockReason.PREEMPTION_OPERATOR, self.responder.block_ttl, principal
            )
            timeline.close_episode()
            detail.update(target=target, created=created, seq=decision.seq)
        elif action == "dismiss":
            timeline.close_episode()
            timeline.status = "normal"
        elif action == "escalate":
            timeline.escalated = True
        self.audit.append(
            {
                "wall": wall.isoformat(),
                "principal": principal,
                "entity": ident,
                "action": action,
            }
        )
        detail["status"] = timeline.status
        return detail

    # -- persistence -------------------------------------------------------

    def _append_log(self, entry: dict) -> None:
        if self._log_fh is None:
            return
        self._log_fh.write(json.dumps(entry) + "\n")
        self._log_fh.flush()
        self._log_count += 1
        if self._log_count % self.config.snapshot_every == 0:
            self._write_snapshot()

    def _write_snapshot(self) -> None:
        state = {
            "version": 1,
            "log_position": self._log_count,
            "malformed": self.malformed_count,
            "filter": self._filter.dump(),
            "notifications": self.notifications,
            "audit": self.audit,
            "timelines": {
                ident: {
                    "alerts": [
                        {
                            "ts": a.timestamp.isoformat(),
                            "symbol": a.symbol.name,
                            "metadata": a.metadata,
                        }
                        for a in t.alerts
                    ],
                    "status": t.status,
                    "episode": t.episode,
                    "episode_start": t.episode_start,
                    "notified": sorted(t.notified_episodes),
                    "frozen_states": t.frozen_states,
                    "frozen_marginals": [list(m) for m in t.frozen_marginals],
                    "escalated": t.escalated,
                }
                for ident, t in sorted(self.timelines.items())
            },
        }
        tmp = self._snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(state) + "\n", encoding="utf-8")
        os.replace(tmp, self._snapshot_path)

    def _load_snapshot(self) -> int:
        doc = json.loads(self._snapshot_path.read_text(encoding="utf-8"))
        self.malformed_count = doc["malformed"]
        self._filter.restore(doc["filter"])
        self.notifications = doc["notifications"]
        self.audit = doc["audit"]
        registry = self.config.registry
        for ident, row in doc["timelines"].items():
            entity = EntityKey.from_identity_str(ident)
            alerts = [
                Alert(
                    timestamp=datetime.fromisoformat(a["ts"]),
                    symbol=registry.symbols.get(a["symbol"], registry.unclassified),
                    entity=entity,
                    metadata=a["metadata"],
                )
                for a in row["alerts"]
            ]
            timeline = EntityTimeline(
                entity=entity,
                alerts=alerts,
                status=row["status"],
                episode=row["episode"],
                episode_start=row["episode_start"],
                notified_episodes=set(row["notified"]),
                frozen_states=row["frozen_states"],
                frozen_marginals=[tuple(m) for m in row["frozen_marginals"]],
                escalated=row["escalated"],
            )
            if timeline.alerts[timeline.episode_start :]:
                timeline.verdict = infer_verdict(
                    timeline.chain(), self.config.model, self.config.policy
                )
            self.timelines[ident] = timeline
        return doc["log_position"]

    def _recover(self) -> None:
        position = 0
        if self._snapshot_path.exists():
            position = self._load_snapshot()
        if not self._log_path.exists():
            self._log_count = position
            return
        with open(self._log_path, encoding="utf-8") as fh:
            for i, raw in enumerate(fh):
                if i < position:
                    continue
                entry = json.loads(raw)
                if entry["t"] == "e":
                    try:
                        record = parse_record(
                            entry["line"], entry["format"], base_date=self.config.base_date
                        )
                    except (MalformedRecord, UnknownFormat):
                        self.malformed_count += 1
                        continue
                    self._ingest_record(record)
                elif entry["t"] == "a":
                    self._apply_action(
                        entry["entity"],
                        entry["action"],
                        entry["principal"],
                        wall=datetime.fromisoformat(entry["wall"]),
                    )
                position = i + 1
        self._log_count = position

    def close(self) -> None:
        with self._lock:
            if self._log_fh is not None:
                self._log_fh.close()
                self._log_fh = None


def create_gateway_app(gateway: Gateway):
    """FastAPI app over one gateway, embedding the responder routes when
    the gateway has a responder attached."""
    from fastapi import Body, FastAPI, Header, HTTPException, Query

    from .responder import create_responder_router

    app = FastAPI(title="preempt gateway")

    def principal(authorization: Optional[str]) -> str:
        token = None
        if authorization and authorization.startswith("Bearer "):
            token = authorization.removeprefix("Bearer ")
        try:
            return gateway.principal_for(token)
        except PermissionError as exc:
            raise HTTPException(status_code=401, detail=str(exc)) from None

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "entities": len(gateway.timelines),
            "malformed": gateway.malformed_count,
        }

    @app.post("/events")
    def post_events(
        payload: dict = Body(...), authorization: Optional[str] = Header(default=None)
    ):
        principal(authorization)
        events = payload.get("events", [])
        return gateway.ingest_batch(events)

    @app.get("/entities")
    def get_entities(authorization: Optional[str] = Header(default=None)):
        principal(authorization)
        return {"entities": gateway.entity_summaries()}

    @app.get("/entities/{ident}/timeline")
    def get_timeline(ident: str, authorization: Optional[str] = Header(default=None)):
        principal(authorization)
        try:
            return gateway.timeline_view(ident)
        except UnknownEntity:
            raise HTTPException(status_code=404, detail=f"unknown entity {ident}") from None

    @app.get("/notifications")
    def get_notifications(
        since: int = Query(default=0, ge=0),
        wait: float = Query(default=0.0, ge=0.0, le=30.0),
        authorization: Optional[str] = Header(default=None),
    ):
        principal(authorization)
        return gateway.notifications_since(since, wait)

    @app.post("/entities/{ident}/actions")
    def post_action(
        ident: str,
        payload: dict = Body(...),
        authorization: Optional[str] = Header(default=None),
    ):
        who = principal(authorization)
        try:
            return gateway.act(ident, payload.get("action", ""), who)
        except UnknownEntity:
            raise HTTPException(status_code=404, detail=f"unknown entity {ident}") from None
        except InvalidAction as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None

    if gateway.responder is not None:
        app.include_router(create_responder_router(gateway.responder))

    return app
