from __future__ import annotations

import threading
from datetime import timedelta

import pytest
from fastapi.testclient import TestClient

from preempt.responder import (
    DISTINCT_CAP,
    BlockReason,
    Blocklist,
    InvalidTarget,
    NotFound,
    ResponderService,
    ScanCounter,
    Unauthorized,
    create_responder_app,
)

from conftest import ts

ALLOW = ["10.150.0.0/16", "141.142.0.0/16"]


def service(**kwargs) -> ResponderService:
    kwargs.setdefault("allowlist", ALLOW)
    kwargs.setdefault("tokens", {"tok-op": "operator-1"})
    return ResponderService(**kwargs)


# --- scan counting ------------------------------------------------------

def test_counter_basics():
    c = ScanCounter("203.0.113.9")
    c.record("10.150.0.1", ts(0))
    assert c.distinct_destinations(ts(0)) == 1
    for _ in range(100):
        c.record("10.150.0.1", ts(1))
    assert c.distinct_destinations(ts(1)) == 1


def test_counter_full_slash16_hits_cap_exactly():
    c = ScanCounter("203.0.113.9", window=timedelta(hours=2))
    seen = set()
    for a in range(256):
        for b in range(256):
            dst = f"10.150.{a}.{b}"
            seen.add(dst)
            c.record(dst, ts(a))
    # 4,464 repeat flows on top of the full sweep change nothing.
    for i in range(4464):
        c.record(f"10.150.0.{i % 256}", ts(300))
    assert len(seen) == DISTINCT_CAP
    assert c.distinct_destinations(ts(300)) == len(seen)


def test_counter_window_slides():
    c = ScanCounter("203.0.113.9", window=timedelta(minutes=10))
    c.record("10.150.0.1", ts(0))
    c.record("10.150.0.2", ts(300))
    assert c.distinct_destinations(ts(300)) == 2
    assert c.distinct_destinations(ts(660)) == 1  # first one aged out
    assert c.distinct_destinations(ts(1000)) == 0


def test_counter_overflow_ages_out():
    c = ScanCounter("203.0.113.9", window=timedelta(minutes=10))
    for i in range(DISTINCT_CAP):
        c.record(f"x{i}", ts(0))
    c.record("fresh-1", ts(1))
    c.record("fresh-2", ts(1))
    assert c.distinct_destinations(ts(1)) == DISTINCT_CAP + 2
    # Only the two overflow events remain in-window later on.
    assert c.distinct_destinations(ts(600)) == 2


# --- auto blocking ------------------------------------------------------

def test_auto_block_threshold_and_idempotence():
    svc = service(scan_threshold=5, block_ttl=timedelta(hours=1))
    decisions = []
    for i in range(4):
        decisions.append(svc.record_flow("203.0.113.9", f"10.150.0.{i}", ts(i)))
    assert decisions == [None] * 4

    fired = svc.record_flow("203.0.113.9", "10.150.0.99", ts(5))
    assert fired is not None
    assert fired.reason is BlockReason.MASS_SCAN_AUTO
    assert fired.created_by == "system"

    # Still scanning while blocked: no second decision.
    for i in range(20):
        assert svc.record_flow("203.0.113.9", f"10.150.1.{i}", ts(6 + i)) is None


def test_auto_block_reissues_after_expiry():
    svc = service(scan_threshold=3, block_ttl=timedelta(minutes=30), scan_window=timedelta(hours=6))
    for i in range(3):
        svc.record_flow("203.0.113.9", f"10.150.0.{i}", ts(i))
    assert len(svc.blocklist.list_blocks(ts(10))) == 1

    # TTL passes; the scanner keeps going and earns a fresh block.
    later = 31 * 60
    assert svc.blocklist.list_blocks(ts(later)) == []
    fired = svc.record_flow("203.0.113.9", "10.150.0.200", ts(later))
    assert fired is not None and fired.seq > 1


def test_internal_sources_never_auto_blocked():
    svc = service(scan_threshold=2)
    for i in range(50):
        assert svc.record_flow("10.150.9.40", f"10.150.1.{i}", ts(i)) is None
    assert svc.blocklist.list_blocks(ts(60)) == []


def test_allowlist_is_mandatory():
    with pytest.raises(ValueError):
        ResponderService(allowlist=[])


# --- blocklist CRUD -----------------------------------------------------

def test_add_then_list_then_release():
    bl = Blocklist(now_fn=lambda: ts(0))
    decision, created = bl.request_block("203.0.113.9", BlockReason.PREEMPTION_OPERATOR, timedelta(hours=1), "op-1")
    assert created and decision.seq == 1
    listed = bl.list_blocks(ts(10))
    assert [d.target for d in listed] == ["203.0.113.9"]

    seq = bl.release_block("203.0.113.9", "op-1", now=ts(20))
    assert seq == 2
    assert bl.list_blocks(ts(21)) == []


def test_release_unknown_target_is_not_found():
    bl = Blocklist()
    with pytest.raises(NotFound):
        bl.release_block("203.0.113.9", "op-1")


def test_invalid_target_rejected():
    bl = Blocklist()
    for bad in ("not-an-ip", "300.1.2.3", "10.0.0.0/99"):
        with pytest.raises(InvalidTarget):
            bl.request_block(bad, BlockReason.PREEMPTION_OPERATOR, timedelta(hours=1), "op-1")


def test_cidr_targets_canonicalized():
    bl = Blocklist()
    decision, _ = bl.request_block("203.0.113.9/24", BlockReason.PREEMPTION_AUTO, timedelta(hours=1), "system", now=ts(0))
    assert decision.target == "203.0.113.0/24"
    assert bl.is_blocked("203.0.113.0/24", ts(1))


def test_double_add_acknowledges_existing():
    bl = Blocklist()
    first, created1 = bl.request_block("203.0.113.9", BlockReason.PREEMPTION_OPERATOR, timedelta(hours=1), "op-1", now=ts(0))
    second, created2 = bl.request_block("203.0.113.9", BlockReason.PREEMPTION_OPERATOR, timedelta(hours=1), "op-2", now=ts(1))
    assert created1 and not created2
    assert second == first


def test_expired_entries_never_visible():
    bl = Blocklist()
    bl.request_block("203.0.113.9", BlockReason.MASS_SCAN_AUTO, timedelta(minutes=5), "system", now=ts(0))
    assert bl.is_blocked("203.0.113.9", ts(299))
    assert not bl.is_blocked("203.0.113.9", ts(300))
    assert bl.list_blocks(ts(301)) == []
    with pytest.raises(NotFound):
        bl.release_block("203.0.113.9", "op-1", now=ts(301))


def test_operator_reason_requires_human_principal():
    bl = Blocklist()
    with pytest.raises(Unauthorized):
        bl.request_block("203.0.113.9", BlockReason.PREEMPTION_OPERATOR, timedelta(hours=1), "system")


def test_concurrent_adds_single_entry():
    bl = Blocklist(now_fn=lambda: ts(0))
    results = []

    def add():
        results.append(bl.request_block("203.0.113.9", BlockReason.PREEMPTION_OPERATOR, timedelta(hours=1), "op-1"))

    threads = [threading.Thread(target=add) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sum(1 for _, created in results if created) == 1
    assert len(bl.list_blocks(ts(1))) == 1


# --- HTTP surface -------------------------------------------------------

@pytest.fixture()
def client():
    svc = service(scan_threshold=3, now_fn=lambda: ts(0))
    app = create_responder_app(svc)
    return TestClient(app), svc


AUTH = {"Authorization": "Bearer tok-op"}


def test_http_requires_token(client):
    http, _ = client
    assert http.get("/blocks").status_code == 401
    assert http.post("/blocks", json={"target": "203.0.113.9"}).status_code == 401
    assert http.get("/blocks", headers={"Authorization": "Bearer nope"}).status_code == 401


def test_http_block_lifecycle(client):
    http, _ = client
    created = http.post(
        "/blocks",
        json={"target": "203.0.113.9", "reason": "preemption_operator", "ttl_seconds": 3600},
        headers=AUTH,
    )
    assert created.status_code == 200
    body = created.json()
    assert body["created"] is True
    assert body["target"] == "203.0.113.9"
    assert body["created_by"] == "operator-1"
    assert body["ttl_seconds"] == 3600.0

    listed = http.get("/blocks", headers=AUTH).json()
    assert [b["target"] for b in listed["blocks"]] == ["203.0.113.9"]

    gone = http.delete("/blocks/203.0.113.9", headers=AUTH)
    assert gone.status_code == 200
    assert http.get("/blocks", headers=AUTH).json()["blocks"] == []
    assert http.delete("/blocks/203.0.113.9", headers=AUTH).status_code == 404


def test_http_cidr_path_and_errors(client):
    http, _ = client
    resp = http.post("/blocks", json={"target": "198.51.100.0/24"}, headers=AUTH)
    assert resp.status_code == 200
    # CIDR targets contain a slash, hence the path-typed route parameter.
    assert http.delete("/blocks/198.51.100.0/24", headers=AUTH).status_code == 200
    assert http.post("/blocks", json={"target": "bogus"}, headers=AUTH).status_code == 400


def test_http_scanners_view(client):
    http, svc = client
    for i in range(6):
        svc.record_flow("203.0.113.9", f"10.150.0.{i}", ts(i))
    for i in range(2):
        svc.record_flow("198.51.100.7", f"10.150.0.{i}", ts(i))
    rows = http.get("/scanners", headers=AUTH).json()["scanners"]
    assert rows[0]["source_ip"] == "203.0.113.9"
    assert rows[0]["distinct_destinations"] == 6
    assert {r["source_ip"] for r in rows} == {"203.0.113.9", "198.51.100.7"}
