"""Scenario definitions for the traffic/attack simulator.

A scenario fixes a seed, a simulated time span, a topology (internal
range plus a honeypot /24 with a fixed number of entry-point hosts), and
a list of agents.  Everything an agent does derives from the seed, so a
scenario file pins the whole record stream byte for byte.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

AGENT_KINDS = ("mass_scanner", "noise_attacker", "legit_user", "ransomware")

# Agents whose records count as attack traffic in the ground truth.
ATTACK_KINDS = frozenset({"mass_scanner", "noise_attacker", "ransomware"})

DEFAULT_START = datetime(2024, 8, 1, 0, 0, 0, tzinfo=timezone.utc)


class InvalidScenario(Exception):
    pass


@dataclass
class Topology:
    internal_cidr: str = "10.150.0.0/16"
    honeypot_cidr: str = "10.150.9.0/24"
    entry_points: int = 16
    # Hosts an intruder would find in harvested known_hosts files.
    known_hosts: list[str] = field(
        default_factory=lambda: ["10.150.2.21", "10.150.2.22", "10.150.3.31", "10.150.4.41"]
    )

    def __post_init__(self) -> None:
        self.internal_net = ipaddress.ip_network(self.internal_cidr)
        self.honeypot_net = ipaddress.ip_network(self.honeypot_cidr)
        if not self.honeypot_net.subnet_of(self.internal_net):
            raise InvalidScenario("honeypot range must sit inside the internal range")
        if not 1 <= self.entry_points <= 128:
            raise InvalidScenario("entry_points out of range")

    def entry_host_ip(self, index: int) -> str:
        if not 0 <= index < self.entry_points:
            raise InvalidScenario(f"entry point {index} outside 0..{self.entry_points - 1}")
        base = int(self.honeypot_net.network_address)
        return str(ipaddress.ip_address(base + 40 + index))

    def entry_host_name(self, index: int) -> str:
        if not 0 <= index < self.entry_points:
            raise InvalidScenario(f"entry point {index} outside 0..{self.entry_points - 1}")
        return f"pg-db-{index + 1}"

    def to_json(self) -> dict:
        return {
            "internal_cidr": self.internal_cidr,
            "honeypot_cidr": self.honeypot_cidr,
            "entry_points": self.entry_points,
            "known_hosts": list(self.known_hosts),
        }


@dataclass
class AgentSpec:
    kind: str
    params: dict

    def __post_init__(self) -> None:
        if self.kind not in AGENT_KINDS:
            raise InvalidScenario(f"unknown agent kind {self.kind!r}")
        for key, value in self.params.items():
            if key.startswith("rate") and not value > 0:
                raise InvalidScenario(f"{self.kind}.{key} must be positive")


@dataclass
class Scenario:
    seed: str
    duration: timedelta
    agents: list[AgentSpec]
    topology: Topology = field(default_factory=Topology)
    start: datetime = DEFAULT_START

    def __post_init__(self) -> None:
        if not self.agents:
            raise InvalidScenario("a scenario needs at least one agent")
        if self.duration <= timedelta(0):
            raise InvalidScenario("duration must be positive")
        # Syslog lines carry time-of-day only; staying inside one calendar
        # day keeps the stream round-trippable against a single base date.
        if self.duration > timedelta(hours=24):
            raise InvalidScenario("duration beyond 24h breaks time-of-day timestamps")

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "start": self.start.isoformat(),
            "duration_seconds": self.duration.total_seconds(),
            "topology": self.topology.to_json(),
            "agents": [{"kind": a.kind, "params": a.params} for a in self.agents],
        }

    def save(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @staticmethod
    def from_json(doc: dict) -> "Scenario":
        topo = Topology(**doc.get("topology", {}))
        return Scenario(
            seed=doc["seed"],
            duration=timedelta(seconds=float(doc["duration_seconds"])),
            agents=[AgentSpec(kind=a["kind"], params=a.get("params", {})) for a in doc["agents"]],
            topology=topo,
            start=datetime.fromisoformat(doc["start"]) if "start" in doc else DEFAULT_START,
        )

    @staticmethod
    def load(path: Path | str) -> "Scenario":
        return Scenario.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def ransomware_agent(
    attacker_ip: str = "203.0.113.77",
    entry_point: int = 0,
    start_offset: float = 1200.0,
    fan_out: int = 4,
    c2_ip: str = "198.51.100.23",
) -> AgentSpec:
    return AgentSpec(
        kind="ransomware",
        params={
            "attacker_ip": attacker_ip,
            "entry_point": entry_point,
            "start_offset_seconds": start_offset,
            "fan_out": fan_out,
            "c2_ip": c2_ip,
            "gap_mu": 3.5,  # lognormal parameters for manual-phase pacing
            "gap_sigma": 0.8,
        },
    )


def demo_scenario() -> Scenario:
    """Small two-hour scenario with one scripted intrusion; the fixture
    behind the end-to-end preemption checks and console demos."""
    return Scenario(
        seed="demo-1",
        duration=timedelta(hours=2),
        agents=[
            AgentSpec(kind="mass_scanner", params={"source_ip": "103.102.4.9", "rate_per_hour": 600}),
            AgentSpec(
                kind="noise_attacker",
                params={"rate_per_hour": 120, "source_pool": 8, "pool_cidr": "192.0.2.0/24"},
            ),
            AgentSpec(
                kind="legit_user",
                params={"user": "alice", "source_ip": "10.150.2.11", "host": "login-1", "sessions": 4, "jobs_per_session": 3},
            ),
            AgentSpec(
                kind="legit_user",
                params={"user": "bob", "source_ip": "10.150.2.12", "host": "login-2", "sessions": 3, "jobs_per_session": 2},
            ),
            ransomware_agent(start_offset=1500.0),
        ],
    )


def production_scenario() -> Scenario:
    """One simulated hour at 1:1000 of production traffic volumes."""
    return Scenario(
        seed="prod-1",
        duration=timedelta(hours=1),
        agents=[
            AgentSpec(kind="mass_scanner", params={"source_ip": "103.102.4.9", "rate_per_hour": 26850}),
            AgentSpec(
                kind="noise_attacker",
                params={"rate_per_hour": 2100, "source_pool": 20, "pool_cidr": "192.0.2.0/24"},
            ),
            AgentSpec(
                kind="noise_attacker",
                params={"rate_per_hour": 2100, "source_pool": 20, "pool_cidr": "198.51.100.0/24"},
            ),
        ]
        + [
            AgentSpec(
                kind="legit_user",
                params={
                    "user": f"user{i:02d}",
                    "source_ip": f"10.150.2.{10 + i}",
                    "host": f"login-{1 + i % 4}",
                    "sessions": 2,
                    "jobs_per_session": 2,
                },
            )
            for i in range(55)
        ]
        + [ransomware_agent(start_offset=900.0)],
    )


def training_scenario() -> Scenario:
    """Multi-incident corpus for fitting the factor model.

    Twelve scripted intrusions at different entry points, spread across
    six hours over ordinary traffic.  A dozen incidents is enough for
    the attack-step potentials to dominate their smoothing floor, which
    four is not.
    """
    return Scenario(
        seed="train-1",
        duration=timedelta(hours=6),
        agents=[
            AgentSpec(kind="mass_scanner", params={"source_ip": "103.102.4.9", "rate_per_hour": 400}),
            AgentSpec(
                kind="noise_attacker",
                params={"rate_per_hour": 200, "source_pool": 10, "pool_cidr": "198.51.100.0/24"},
            ),
        ]
        + [
            AgentSpec(
                kind="legit_user",
                params={
                    "user": user,
                    "source_ip": f"10.150.2.{20 + i}",
                    "host": f"login-{1 + i}",
                    "sessions": 6,
                    "jobs_per_session": 4,
                },
            )
            for i, user in enumerate(["alice", "bob", "carol"])
        ]
        + [
            ransomware_agent(
                attacker_ip=f"203.0.113.{60 + i}",
                entry_point=i,
                start_offset=1500.0 + 1500.0 * i,
                fan_out=2 + i % 3,
            )
            for i in range(12)
        ],
    )
