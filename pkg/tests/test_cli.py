"""End-to-end runs of each CLI subcommand against temp directories."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from preempt.cli import main
from preempt.config import BadConfig, load_config
from preempt.inference import FactorModel
from preempt.viz import parse_dot


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("simout")
    assert main(["sim", "--builtin", "demo", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["sim", "--builtin", "training", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def model_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "model.txt"
    assert main(["train", "--out", str(path)]) == 0
    return path


def test_sim_writes_full_directory(sim_dir):
    for name in ("stream.jsonl", "notices.tsv", "syslog.log", "truth.json", "scenario.json", "flows.tsv"):
        assert (sim_dir / name).exists(), name


def test_sim_requires_out_when_generating(capsys):
    assert main(["sim", "--builtin", "demo"]) == 2
    assert "--out" in capsys.readouterr().err


def test_ingest_prints_alert_table(sim_dir, capsys):
    scenario = json.loads((sim_dir / "scenario.json").read_text())
    base = scenario["start"][:10]
    rc = main([
        "ingest", "--format", "syslog_line", "--base-date", base,
        str(sim_dir / "syslog.log"),
    ])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "ts\tentity\tsymbol\tseverity"
    assert len(lines) > 10
    symbols = {l.split("\t")[2] for l in lines[1:]}
    assert "alert_failed_login" in symbols or "alert_login" in symbols


def test_ingest_zeek_skips_header_lines(sim_dir, capsys):
    rc = main(["ingest", "--format", "zeek_notice_tsv", str(sim_dir / "notices.tsv")])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    # every wire line except the #fields header becomes an alert row
    wire = (sim_dir / "notices.tsv").read_text().splitlines()
    assert len(lines) - 1 == len(wire) - 1


def test_mine_writes_catalog(corpus_dir, tmp_path, capsys):
    out = tmp_path / "catalog.tsv"
    assert main(["mine", "--incidents", str(corpus_dir), "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "id\tlength\toccurrence_count\tsymbols"
    assert len(rows) > 1
    first = rows[1].split("\t")
    assert first[0].startswith("S")
    assert int(first[1]) == len(first[3].split(","))


def test_stats_renders_tables_and_figures(corpus_dir, tmp_path):
    out = tmp_path / "reports"
    assert main(["stats", "--incidents", str(corpus_dir), "--out", str(out)]) == 0
    for stem in ("similarity_cdf", "length_histogram", "critical_alerts", "alert_volume"):
        tsv, png = out / f"{stem}.tsv", out / f"{stem}.png"
        assert tsv.exists(), tsv
        assert png.exists(), png
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        header = tsv.read_text().splitlines()[0]
        assert "\t" in header


def test_stats_subset_flag(corpus_dir, tmp_path):
    out = tmp_path / "only-volume"
    assert main(["stats", "--incidents", str(corpus_dir), "--out", str(out), "--volume"]) == 0
    assert (out / "alert_volume.tsv").exists()
    assert not (out / "similarity_cdf.tsv").exists()


def test_train_then_infer_flags_the_attacker(sim_dir, model_file, capsys):
    model = FactorModel.parse(model_file.read_text())
    assert "alert_ssh_lateral" in model.unary

    scenario = json.loads((sim_dir / "scenario.json").read_text())
    rc = main([
        "infer", "--model", str(model_file),
        "--sequence", str(sim_dir / "stream.jsonl"),
        "--base-date", scenario["start"][:10],
    ])
    assert rc == 0
    out = capsys.readouterr().out
    blocks = [b for b in out.strip().split("\n\n") if b]
    by_entity = {b.splitlines()[0].split("\t")[1]: b for b in blocks}
    attacker = by_entity["ip:203.0.113.77"]
    assert "decision\tpreempt" in attacker
    assert "too_late\tfalse" in attacker
    # benign users never trip the policy
    for ident, block in by_entity.items():
        if ident.startswith("user_account:"):
            assert "decision\tpreempt" not in block


def test_viz_dot_export(sim_dir, tmp_path, capsys):
    out = tmp_path / "graph.dot"
    rc = main([
        "viz", "--flows", str(sim_dir / "flows.tsv"), "--out", str(out),
        "--attacker", "203.0.113.77", "--scanner", "103.102.4.9",
    ])
    assert rc == 0
    graph = parse_dot(out.read_text())
    assert graph.node_count() > 2
    assert graph.role_of("203.0.") .value == "attacker"
    assert graph.role_of("103.102.").value == "scanner"


def test_viz_top_k_thins_the_scanner(sim_dir, tmp_path):
    full, thin = tmp_path / "full.dot", tmp_path / "thin.dot"
    flows = str(sim_dir / "flows.tsv")
    assert main(["viz", "--flows", flows, "--out", str(full)]) == 0
    assert main(["viz", "--flows", flows, "--out", str(thin), "--top-k", "5"]) == 0
    g_full, g_thin = parse_dot(full.read_text()), parse_dot(thin.read_text())
    # labels truncate to two octets, so thinning shows up as edge weight
    scan_edge = ("103.102.", "10.150.")
    assert g_thin.edges[scan_edge] < g_full.edges[scan_edge]
    assert g_thin.edges[("192.0.", "10.150.")] == g_full.edges[("192.0.", "10.150.")]


def test_viz_gexf_export(sim_dir, tmp_path):
    out = tmp_path / "graph.gexf"
    rc = main(["viz", "--flows", str(sim_dir / "flows.tsv"), "--format", "gexf", "--out", str(out)])
    assert rc == 0
    text = out.read_text()
    assert text.startswith("<?xml")
    assert "<gexf" in text


def test_block_requires_target(capsys):
    assert main(["block", "add"]) == 2
    assert "target" in capsys.readouterr().err


def test_load_config_builds_a_working_gateway(model_file, tmp_path):
    config = {
        "model": str(model_file),
        "ingest": {"base_date": "2026-03-02"},
        "gateway": {
            "tokens": {"tok-a": "op"},
            "quiet_period_hours": 12,
            "repeat_threshold": 8,
            "min_alerts": 3,
        },
        "responder": {"allowlist": ["10.150.0.0/16"], "block_ttl_hours": 2},
        "port": 9999,
    }
    path = tmp_path / "server.json"
    path.write_text(json.dumps(config))
    server = load_config(path)
    assert server.port == 9999
    assert server.gateway_config.tokens == {"tok-a": "op"}
    assert server.gateway_config.policy.min_alerts == 3
    assert server.gateway_config.quiet_period.total_seconds() == 12 * 3600
    assert server.responder is not None
    assert server.responder.block_ttl.total_seconds() == 2 * 3600

    gateway = server.build_gateway()
    line = "00:01:00 [pg-db-1] sshd[100]: Failed password for user eve from 198.51.100.9 port 2222 ssh2"
    alert = gateway.ingest_line("syslog_line", line)
    assert alert is not None
    assert alert.timestamp.date().isoformat() == "2026-03-02"
    gateway.close()


def test_load_config_relative_paths_resolve_against_file(model_file, tmp_path):
    (tmp_path / "m.txt").write_bytes(model_file.read_bytes())
    path = tmp_path / "server.json"
    path.write_text(json.dumps({"model": "m.txt", "gateway": {"data_dir": "state"}}))
    server = load_config(path)
    assert server.gateway_config.data_dir == tmp_path / "state"


def test_load_config_errors(tmp_path):
    with pytest.raises(BadConfig):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    with pytest.raises(BadConfig):
        load_config(bad)
    no_allow = tmp_path / "noallow.json"
    no_allow.write_text(json.dumps({"model": "m.txt", "responder": {}}))
    with pytest.raises(BadConfig):
        load_config(no_allow)


def test_replay_drives_a_live_gateway(sim_dir, model_file, tmp_path, monkeypatch):
    """Full loop: generated stream replayed over HTTP ends in a preemption."""
    import httpx

    from preempt.config import load_config
    from preempt.gateway import create_gateway_app

    config = {
        "model": str(model_file),
        "ingest": {"base_date": json.loads((sim_dir / "scenario.json").read_text())["start"][:10]},
        "gateway": {"tokens": {"tok-a": "op"}},
        "responder": {"allowlist": ["10.150.0.0/16"]},
    }
    path = tmp_path / "server.json"
    path.write_text(json.dumps(config))
    gateway = load_config(path).build_gateway()
    app = create_gateway_app(gateway)

    from fastapi.testclient import TestClient

    def patched(*args, **kwargs):
        return TestClient(app, headers=kwargs.get("headers"))

    monkeypatch.setattr(httpx, "Client", patched)
    rc = main([
        "sim", "--replay", str(sim_dir),
        "--target", "http://gateway.test", "--token", "tok-a",
    ])
    assert rc == 0
    assert len(gateway.notifications) >= 1
    assert gateway.notifications[0]["entity"] == "ip:203.0.113.77"

    with TestClient(app, headers={"Authorization": "Bearer tok-a"}) as c:
        summary = c.get("/entities").json()["entities"]
        attacker = [e for e in summary if e["id"] == "ip:203.0.113.77"]
        assert attacker and attacker[0]["status"] == "preempted"
    gateway.close()


def test_block_cli_against_live_responder(model_file, tmp_path, monkeypatch, capsys):
    import httpx

    from preempt.responder import ResponderService, create_responder_app

    from fastapi.testclient import TestClient

    service = ResponderService(allowlist=["10.150.0.0/16"], tokens={"tok-a": "op"})
    app = create_responder_app(service)

    def patched(*args, **kwargs):
        return TestClient(app, headers=kwargs.get("headers"))

    monkeypatch.setattr(httpx, "Client", patched)
    base = ["--url", "http://responder.test", "--token", "tok-a"]

    assert main(["block", "add", "203.0.113.7", *base]) == 0
    created = json.loads(capsys.readouterr().out)
    assert created["target"] == "203.0.113.7"
    assert created["created"] is True

    assert main(["block", "ls", *base]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0].startswith("target\t")
    assert any(r.startswith("203.0.113.7\t") for r in rows[1:])

    assert main(["block", "rm", "203.0.113.7", *base]) == 0
    capsys.readouterr()
    assert main(["block", "ls", *base]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert len(rows) == 1

    assert main(["block", "add", "not-an-address", *base]) == 1
    assert "error 400" in capsys.readouterr().err
