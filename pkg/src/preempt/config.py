"""Server configuration: one JSON file wires up the whole gateway.

Relative paths inside the file resolve against the file's own directory,
so a config directory can be moved or mounted wholesale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Optional

from .gateway import Gateway, GatewayConfig
from .inference import DecisionPolicy, FactorModel
from .registry import SymbolRegistry, default_registry
from .responder import (
    DEFAULT_BLOCK_TTL,
    DEFAULT_SCAN_THRESHOLD,
    DEFAULT_SCAN_WINDOW,
    ResponderService,
)
from .scanfilter import DEFAULT_REPEAT_THRESHOLD, DEFAULT_WINDOW


class BadConfig(Exception):
    pass


@dataclass
class ServerConfig:
    gateway_config: GatewayConfig
    responder: Optional[ResponderService]
    host: str = "127.0.0.1"
    port: int = 8420

    def build_gateway(self) -> Gateway:
        return Gateway(self.gateway_config, responder=self.responder)


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _minutes(doc: dict, key: str, default: timedelta) -> timedelta:
    return timedelta(minutes=doc[key]) if key in doc else default


def load_config(path: Path | str) -> ServerConfig:
    """Parse a server config file and load everything it points at."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BadConfig(f"cannot read config {path}: {exc}") from exc
    base = path.parent

    # Structural checks first so a bad file fails before any path loads.
    if "model" not in doc:
        raise BadConfig("config needs a 'model' path")
    if "responder" in doc and "allowlist" not in doc["responder"]:
        raise BadConfig("responder section needs an 'allowlist' of internal CIDRs")

    model = FactorModel.load(_resolve(base, doc["model"]))
    if "rules" in doc:
        registry = SymbolRegistry.load(_resolve(base, doc["rules"]))
    else:
        registry = default_registry()

    base_date: Optional[date] = None
    ingest = doc.get("ingest", {})
    if "base_date" in ingest:
        base_date = date.fromisoformat(ingest["base_date"])

    gw = doc.get("gateway", {})
    policy = DecisionPolicy(
        min_alerts=gw.get("min_alerts", 2),
        marginal_threshold=gw.get("marginal_threshold"),
    )
    data_dir = _resolve(base, gw["data_dir"]) if "data_dir" in gw else None
    gateway_config = GatewayConfig(
        registry=registry,
        model=model,
        base_date=base_date,
        policy=policy,
        scan_window=_minutes(gw, "scan_window_minutes", DEFAULT_WINDOW),
        repeat_threshold=gw.get("repeat_threshold", DEFAULT_REPEAT_THRESHOLD),
        quiet_period=timedelta(hours=gw.get("quiet_period_hours", 24)),
        tokens=dict(gw.get("tokens", {})),
        data_dir=data_dir,
        snapshot_every=gw.get("snapshot_every", 1000),
    )

    responder = None
    if "responder" in doc:
        rs = doc["responder"]
        responder = ResponderService(
            allowlist=list(rs["allowlist"]),
            tokens=dict(gw.get("tokens", {})),
            scan_threshold=rs.get("scan_threshold", DEFAULT_SCAN_THRESHOLD),
            scan_window=_minutes(rs, "scan_window_minutes", DEFAULT_SCAN_WINDOW),
            block_ttl=timedelta(hours=rs["block_ttl_hours"]) if "block_ttl_hours" in rs else DEFAULT_BLOCK_TTL,
        )

    return ServerConfig(
        gateway_config=gateway_config,
        responder=responder,
        host=doc.get("host", "127.0.0.1"),
        port=doc.get("port", 8420),
    )
