"""Command-line front end.

Subcommands cover the whole workflow: simulate traffic, ingest logs,
train and inspect the chain model, mine incident patterns, render
reports and connection graphs, drive the blocklist, and run the gateway
server.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import date
from pathlib import Path
from typing import Optional

from .inference import DecisionPolicy, FactorModel, infer_verdict
from .grouping import group_by_entity
from .normalize import normalize
from .mining import critical_alert_stats, length_histogram, mine_catalog, similarity_report
from .parsing import SYSLOG_FORMAT, ZEEK_FORMAT, MalformedRecord, UnknownFormat, parse_record
from .pipeline import incident_sequences, stream_to_alerts, train_model
from .registry import SymbolRegistry, default_registry
from .reports import (
    write_catalog,
    write_critical_report,
    write_length_report,
    write_similarity_report,
    write_volume_report,
)
from .scenario import Scenario, demo_scenario, production_scenario, training_scenario
from .simulate import load_incidents, replay, run
from .viz import build_graph, export, sample_top_flows

BUILTIN_SCENARIOS = {
    "demo": demo_scenario,
    "production": production_scenario,
    "training": training_scenario,
}


def _registry_from(args) -> SymbolRegistry:
    if getattr(args, "rules", None):
        return SymbolRegistry.load(args.rules)
    return default_registry()


def _base_date_from(args) -> Optional[date]:
    raw = getattr(args, "base_date", None)
    return date.fromisoformat(raw) if raw else None


def _read_stream(path: Path) -> list[tuple[str, str]]:
    """stream.jsonl: one {"format", "line"} object per line."""
    pairs = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        doc = json.loads(raw)
        pairs.append((doc["format"], doc["line"]))
    return pairs


def _load_sim_dir(args) -> tuple[list, list]:
    """Alerts and incident sequences from a simulator output directory."""
    root = Path(args.incidents)
    scenario = Scenario.load(root / "scenario.json")
    registry = _registry_from(args)
    wire = _read_stream(root / "stream.jsonl")
    alerts = stream_to_alerts(wire, registry, base_date=scenario.start.date())
    incidents = load_incidents(root / "truth.json")
    return alerts, incident_sequences(alerts, incidents)


# --- subcommand handlers --------------------------------------------------


def cmd_ingest(args) -> int:
    registry = _registry_from(args)
    base_date = _base_date_from(args)
    out = sys.stdout
    print("ts\tentity\tsymbol\tseverity", file=out)
    bad = 0
    for name in args.files:
        for line in Path(name).read_text(encoding="utf-8").splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            try:
                record = parse_record(line, args.format, base_date=base_date)
            except (MalformedRecord, UnknownFormat):
                bad += 1
                continue
            alert = normalize(record, registry)
            print(
                f"{alert.timestamp.isoformat()}\t{alert.entity.identity_str()}"
                f"\t{alert.symbol.name}\t{alert.symbol.severity.value}",
                file=out,
            )
    if bad:
        print(f"skipped {bad} malformed lines", file=sys.stderr)
    return 0


def cmd_mine(args) -> int:
    _, sequences = _load_sim_dir(args)
    catalog = mine_catalog(sequences)
    path = write_catalog(catalog, args.out)
    print(f"wrote {len(catalog.patterns)} patterns from {catalog.corpus_size} incidents to {path}")
    return 0


def cmd_stats(args) -> int:
    alerts, sequences = _load_sim_dir(args)
    out_dir = Path(args.out)
    wanted = [name for name in ("similarity", "lengths", "critical", "volume") if getattr(args, name)]
    if not wanted:
        wanted = ["similarity", "lengths", "critical", "volume"]
    written: list[Path] = []
    if "similarity" in wanted:
        written += write_similarity_report(similarity_report(sequences), out_dir)
    if "lengths" in wanted:
        written += write_length_report(length_histogram(mine_catalog(sequences)), out_dir)
    if "critical" in wanted:
        written += write_critical_report(critical_alert_stats(sequences), out_dir)
    if "volume" in wanted:
        written += write_volume_report(alerts, out_dir)
    for path in written:
        print(path)
    return 0


def cmd_train(args) -> int:
    scenario = Scenario.load(args.scenario) if args.scenario else None
    model = train_model(scenario=scenario, alpha=args.alpha)
    model.save(args.out)
    print(f"wrote model with {len(model.unary)} symbols to {args.out}")
    return 0


def cmd_infer(args) -> int:
    model = FactorModel.load(args.model)
    registry = _registry_from(args)
    wire = _read_stream(Path(args.sequence))
    alerts = stream_to_alerts(wire, registry, base_date=_base_date_from(args))
    policy = DecisionPolicy(min_alerts=args.min_alerts)
    for sequence in group_by_entity(alerts):
        verdict = infer_verdict(sequence, model, policy)
        print(f"entity\t{sequence.entity.identity_str()}")
        print("n\tts\tsymbol\tstate\tp_benign\tp_suspicious\tp_malicious")
        for i, alert in enumerate(sequence.alerts):
            state = verdict.map_states[i].name.lower()
            pb, ps, pm = verdict.marginals[i]
            print(
                f"{i}\t{alert.timestamp.isoformat()}\t{alert.symbol.name}"
                f"\t{state}\t{pb:.6f}\t{ps:.6f}\t{pm:.6f}"
            )
        print(f"decision\t{verdict.decision.value}")
        if verdict.decided_at_index is not None:
            print(f"decided_at\t{verdict.decided_at_index}")
        print(f"too_late\t{str(verdict.too_late).lower()}")
        print()
    return 0


def cmd_sim(args) -> int:
    if args.replay:
        return _replay_dir(args)
    if args.scenario:
        scenario = Scenario.load(args.scenario)
    else:
        scenario = BUILTIN_SCENARIOS[args.builtin]()
    if not args.out:
        print("--out is required when generating", file=sys.stderr)
        return 2
    result = run(scenario)
    result.write(args.out)
    print(
        f"wrote {len(result.records)} records, {len(result.incidents)} incidents to {args.out}"
    )
    return 0


def _replay_dir(args) -> int:
    import httpx

    root = Path(args.replay)
    scenario = Scenario.load(root / "scenario.json")
    pairs = _read_stream(root / "stream.jsonl")
    stamps = [
        parse_record(line, fmt, base_date=scenario.start.date()).timestamp
        for fmt, line in pairs
    ]
    headers = {"Authorization": f"Bearer {args.token}"} if args.token else {}
    totals = {"accepted": 0, "filtered": 0, "malformed": 0}
    buffer: list[dict] = []

    with httpx.Client(base_url=args.target, headers=headers, timeout=30.0) as client:
        def flush():
            if not buffer:
                return
            resp = client.post("/events", json={"events": buffer})
            resp.raise_for_status()
            for key, value in resp.json().items():
                totals[key] = totals.get(key, 0) + value
            buffer.clear()

        for fmt, line in replay(pairs, stamps, speed=args.speed):
            buffer.append({"format": fmt, "line": line})
            # Paced replay trickles records one at a time, like a live feed.
            if args.speed != math.inf or len(buffer) >= args.batch:
                flush()
        flush()
    print(f"replayed {len(pairs)} records: {json.dumps(totals, sort_keys=True)}")
    return 0


def cmd_viz(args) -> int:
    rows = Path(args.flows).read_text(encoding="utf-8").splitlines()
    flows = []
    for row in rows:
        if not row.strip() or row.startswith("src\t"):
            continue
        src, dst = row.split("\t")
        flows.append((src, dst))
    if args.top_k:
        by = args.sample_source
        if by is None and flows:
            # Default to thinning the noisiest source (the mass scanner).
            from collections import Counter

            by = Counter(src for src, _ in flows).most_common(1)[0][0]
        if by is not None:
            flows = sample_top_flows(flows, args.top_k, by)
    graph = build_graph(
        flows,
        attackers=args.attacker,
        scanners=args.scanner,
        legit=args.legit,
    )
    text = export(graph, args.format)
    Path(args.out).write_text(text, encoding="utf-8")
    print(f"wrote {graph.node_count()} nodes, {graph.edge_count()} edges to {args.out}")
    return 0


def cmd_block(args) -> int:
    import httpx

    headers = {"Authorization": f"Bearer {args.token}"} if args.token else {}
    with httpx.Client(base_url=args.url, headers=headers, timeout=30.0) as client:
        if args.action == "add":
            body = {"target": args.target}
            if args.ttl_seconds is not None:
                body["ttl_seconds"] = args.ttl_seconds
            if args.reason:
                body["reason"] = args.reason
            resp = client.post("/blocks", json=body)
        elif args.action == "rm":
            resp = client.delete(f"/blocks/{args.target}")
        else:
            resp = client.get("/blocks")
        if resp.status_code >= 400:
            print(f"error {resp.status_code}: {resp.json().get('detail', resp.text)}", file=sys.stderr)
            return 1
        doc = resp.json()
        if args.action == "ls":
            print("target\treason\tcreated_by\tcreated_at\texpires_at\tseq")
            for block in doc["blocks"]:
                print(
                    f"{block['target']}\t{block['reason']}\t{block['created_by']}"
                    f"\t{block['created_at']}\t{block['expires_at']}\t{block['seq']}"
                )
        else:
            print(json.dumps(doc, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .config import load_config
    from .gateway import create_gateway_app

    server_config = load_config(args.config)
    gateway = server_config.build_gateway()
    app = create_gateway_app(gateway)
    host = args.host or server_config.host
    port = args.port or server_config.port
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    finally:
        gateway.close()
    return 0


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="preempt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse raw logs into symbolic alerts")
    p.add_argument("--format", required=True, choices=[ZEEK_FORMAT, SYSLOG_FORMAT])
    p.add_argument("--rules", help="symbol registry file (default: built-in rules)")
    p.add_argument("--base-date", help="ISO date for formats without one")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("mine", help="mine recurring patterns from an incident corpus")
    p.add_argument("--incidents", required=True, help="simulator output directory")
    p.add_argument("--rules")
    p.add_argument("--out", required=True, help="catalog.tsv destination")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("stats", help="corpus reports: tables plus rendered figures")
    p.add_argument("--incidents", required=True, help="simulator output directory")
    p.add_argument("--rules")
    p.add_argument("--out", default="reports", help="output directory")
    p.add_argument("--similarity", action="store_true")
    p.add_argument("--lengths", action="store_true")
    p.add_argument("--critical", action="store_true")
    p.add_argument("--volume", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="fit the chain model from a labeled scenario")
    p.add_argument("--out", required=True, help="model file destination")
    p.add_argument("--scenario", help="scenario file (default: built-in training set)")
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="run chain inference over a recorded stream")
    p.add_argument("--model", required=True)
    p.add_argument("--sequence", required=True, help="stream.jsonl-style file")
    p.add_argument("--rules")
    p.add_argument("--base-date")
    p.add_argument("--min-alerts", type=int, default=2)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("sim", help="generate a scenario or replay one into a gateway")
    p.add_argument("--scenario", help="scenario file to run")
    p.add_argument("--builtin", choices=sorted(BUILTIN_SCENARIOS), default="demo")
    p.add_argument("--out", help="output directory when generating")
    p.add_argument("--replay", help="previously generated directory to replay")
    p.add_argument("--speed", type=float, default=math.inf, help="replay speed multiple")
    p.add_argument("--target", default="http://127.0.0.1:8420", help="gateway base URL")
    p.add_argument("--token", help="bearer token for the gateway")
    p.add_argument("--batch", type=int, default=500, help="events per request at full speed")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("viz", help="export a connection graph from a flow table")
    p.add_argument("--flows", required=True, help="tsv with src/dst columns")
    p.add_argument("--top-k", type=int, default=10000, help="keep this many flows from the sampled source")
    p.add_argument("--sample-source", help="source to downsample (default: busiest)")
    p.add_argument("--format", choices=["dot", "gexf"], default="dot")
    p.add_argument("--out", required=True)
    p.add_argument("--attacker", action="append", default=[], help="mark an address as attacker")
    p.add_argument("--scanner", action="append", default=[], help="mark an address as scanner")
    p.add_argument("--legit", action="append", default=[], help="mark an address as legitimate")
    p.set_defaults(func=cmd_viz)

    p = sub.add_parser("block", help="manage the responder blocklist over HTTP")
    p.add_argument("action", choices=["add", "rm", "ls"])
    p.add_argument("target", nargs="?", help="address or CIDR for add/rm")
    p.add_argument("--url", default="http://127.0.0.1:8420")
    p.add_argument("--token")
    p.add_argument("--ttl-seconds", type=float)
    p.add_argument("--reason")
    p.set_defaults(func=cmd_block)

    p = sub.add_parser("serve", help="run the gateway HTTP server")
    p.add_argument("--config", required=True)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "block" and args.action in ("add", "rm") and not args.target:
        print("block add/rm needs a target", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
