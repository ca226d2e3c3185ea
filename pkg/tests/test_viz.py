"""Connection-graph building, sampling, and export formats."""

from __future__ import annotations

import io
import re

import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from preempt.pipeline import result_to_alerts
from preempt.scenario import demo_scenario
from preempt.simulate import run
from preempt.viz import (
    ConnGraph,
    Role,
    build_graph,
    export,
    export_dot,
    export_gexf,
    flows_from_records,
    parse_dot,
    sample_top_flows,
    truncate_label,
)

FULL_IP = re.compile(r"\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}")

PREFIX_LISTING = """digraph {
    194.28. -> 143.219.
    71.201. -> 143.219.
    72.21. -> 141.142.
    64.39. -> 141.142.
    103.102. -> 141.142.
    103.102. -> 141.142.
    ...
    103.102. -> 141.142.
    103.102. -> 141.142.
    216.158. -> 141.142.
    91.247. -> 143.219.
}
"""


def test_truncate_label():
    assert truncate_label("194.28.61.7") == "194.28."
    assert truncate_label("10.150.9.40") == "10.150."
    assert truncate_label("194.28.") == "194.28."
    assert truncate_label("pg-db-1") == "pg-db-1"


def test_flows_merge_under_truncation():
    g = ConnGraph()
    g.add_flow("103.102.4.9", "141.142.1.1")
    g.add_flow("103.102.77.1", "141.142.9.9")
    assert g.node_count() == 2
    assert g.edge_count() == 1
    assert g.edges[("103.102.", "141.142.")] == 2


def test_parse_hand_listed_digraph():
    g = parse_dot(PREFIX_LISTING)
    assert {"143.219.", "141.142."} <= set(g.nodes)
    assert g.node_count() == 9
    assert g.edge_count() == 7
    assert g.edges[("103.102.", "141.142.")] == 4


def test_two_node_dot_shape():
    g = ConnGraph()
    g.add_flow("194.28.61.7", "143.219.1.2")
    doc = export_dot(g)
    assert doc.startswith("digraph {")
    assert '"194.28." -> "143.219."' in doc
    assert doc.rstrip().endswith("}")


def test_dot_round_trip_with_roles_and_isolated_nodes():
    g = ConnGraph()
    g.add_flow("103.102.4.9", "141.142.1.1")
    g.add_flow("203.0.113.77", "10.150.9.40", multiplicity=3)
    g.annotate("103.102.4.9", Role.SCANNER)
    g.annotate("203.0.113.77", Role.ATTACKER)
    g.add_node("198.51.100.23")  # isolated, unannotated
    back = parse_dot(export_dot(g))
    assert back == g


def test_parse_dot_rejects_garbage():
    with pytest.raises(ValueError):
        parse_dot('digraph {\n  "a" -> \n}')


def test_exports_are_deterministic_across_insertion_order():
    flows = [("1.2.3.4", "5.6.7.8"), ("9.9.9.9", "5.6.7.8"), ("1.2.3.4", "9.9.9.9")]
    a = build_graph(flows, scanners=["1.2.3.4"])
    b = build_graph(list(reversed(flows)), scanners=["1.2.3.4"])
    assert export_dot(a) == export_dot(b)
    assert export_gexf(a) == export_gexf(b)


def test_exports_never_leak_full_addresses():
    result = run(demo_scenario())
    flows = flows_from_records(result.records)
    graph = build_graph(flows, attackers=["203.0.113.77"], scanners=["103.102.4.9"])
    for doc in (export_dot(graph), export_gexf(graph)):
        assert not FULL_IP.search(doc)


def test_role_precedence_on_merged_labels():
    # Two addresses sharing a /16 prefix collapse to one node; the
    # stronger annotation must win regardless of argument order.
    flows = [("9.9.1.1", "8.8.1.1")]
    g = build_graph(flows, attackers=["9.9.2.2"], scanners=["9.9.3.3"], legit=["9.9.4.4"])
    assert g.role_of("9.9.1.1") is Role.ATTACKER


def test_sample_top_flows_basics():
    flows = (
        [("s", "a")] * 5
        + [("s", "b")] * 3
        + [("s", "c")]
        + [("other", "x"), ("other", "y")]
    )
    sampled = sample_top_flows(flows, k=2, by="s")
    assert ("s", "c") not in sampled
    assert sampled.count(("s", "a")) == 5
    assert sampled.count(("s", "b")) == 3
    assert ("other", "x") in sampled and ("other", "y") in sampled

    assert sample_top_flows(flows, k=99, by="s") == flows
    with pytest.raises(ValueError):
        sample_top_flows(flows, k=0, by="s")


def test_sample_top_flows_tie_break_is_lexicographic():
    flows = [("s", "b"), ("s", "a"), ("s", "c")]
    sampled = sample_top_flows(flows, k=2, by="s")
    assert set(sampled) == {("s", "a"), ("s", "b")}


@given(
    st.lists(
        st.tuples(st.sampled_from(["scan", "u1", "u2"]), st.sampled_from("abcdefg")),
        min_size=1,
        max_size=60,
    ),
    st.integers(min_value=1, max_value=8),
)
def test_sampling_soundness(flows, k):
    from collections import Counter

    sampled = sample_top_flows(flows, k, by="scan")
    counts = Counter(f for f in flows if f[0] == "scan")
    kept = {f for f in sampled if f[0] == "scan"}
    excluded = set(counts) - kept
    if kept and excluded:
        assert min(counts[f] for f in kept) >= max(counts[f] for f in excluded)
    # non-scanner traffic is untouched, order preserved
    assert [f for f in sampled if f[0] != "scan"] == [f for f in flows if f[0] != "scan"]


def test_gexf_read_back_by_independent_reader(tmp_path):
    result = run(demo_scenario())
    flows = flows_from_records(result.records)
    graph = build_graph(flows, attackers=["203.0.113.77"], scanners=["103.102.4.9"])
    doc = export_gexf(graph)

    g2 = nx.read_gexf(io.BytesIO(doc.encode("utf-8")))
    assert g2.number_of_nodes() == graph.node_count()
    assert g2.number_of_edges() == graph.edge_count()
    assert g2.nodes["103.102."]["role"] == "scanner"
    assert g2.nodes["203.0."]["role"] == "attacker"
    for (src, dst), weight in graph.edges.items():
        assert g2.edges[src, dst]["weight"] == weight


def test_scenario_attacker_annotation_flows_from_ground_truth(registry):
    result = run(demo_scenario())
    attacker_ips = {
        e.source_ip
        for inc in result.incidents
        for e in inc.involved_entities
        if e.source_ip and not e.source_ip.startswith("10.150.")
    }
    graph = build_graph(flows_from_records(result.records), attackers=attacker_ips)
    assert graph.role_of("203.0.113.77") is Role.ATTACKER


def test_empty_graph_exports_minimal_documents():
    g = ConnGraph()
    assert parse_dot(export_dot(g)) == g
    g2 = nx.read_gexf(io.BytesIO(export_gexf(g).encode("utf-8")))
    assert g2.number_of_nodes() == 0
    with pytest.raises(ValueError):
        export(g, "svg")
