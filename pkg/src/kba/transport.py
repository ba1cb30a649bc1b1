"""Simulated message bus: concurrent probe fan-out under a joint deadline.

Latency and loss are drawn from a seeded generator keyed by
``(seed, agent_id, query)``, so a fan-out is reproducible regardless of call
history or thread scheduling. Handlers really run concurrently in a thread
pool; whether an answer counts is decided by its simulated latency.
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from .agent import DEFAULT_DEADLINE_MS, ProbeRequest, ProbeResponse, Probeable
from .knowledge_base import Verdict

log = logging.getLogger(__name__)

# guard against hung handlers; simulated latency decides timeouts
_REAL_TIME_GUARD_S = 30.0


@dataclass(frozen=True)
class NetworkModel:
    base_ms: float = 20.0
    jitter_ms: float = 10.0
    seed: int = 0
    drop_prob: float = 0.0
    per_agent: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.base_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latencies must be non-negative")
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError(f"drop_prob must lie in [0, 1], got {self.drop_prob}")

    @classmethod
    def zero_latency(cls, seed: int = 0) -> "NetworkModel":
        return cls(base_ms=0.0, jitter_ms=0.0, seed=seed)

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkModel":
        unknown = set(data) - {"base_ms", "jitter_ms", "seed", "drop_prob", "per_agent"}
        if unknown:
            raise ValueError(f"unknown NetworkModel fields: {sorted(unknown)}")
        data = dict(data)
        if "per_agent" in data:
            data["per_agent"] = {k: tuple(v) for k, v in data["per_agent"].items()}
        return cls(**data)

    def to_dict(self) -> dict:
        out = {
            "base_ms": self.base_ms,
            "jitter_ms": self.jitter_ms,
            "seed": self.seed,
            "drop_prob": self.drop_prob,
        }
        if self.per_agent:
            out["per_agent"] = {k: list(v) for k, v in self.per_agent.items()}
        return out

    def sample(self, agent_id: str, query: str) -> tuple[float, bool]:
        """Return ``(latency_ms, dropped)`` for one probe."""
        rng = random.Random(f"{self.seed}|{agent_id}|{query}")
        dropped = rng.random() < self.drop_prob
        base, jitter = self.per_agent.get(agent_id, (self.base_ms, self.jitter_ms))
        return base + rng.uniform(0.0, jitter), dropped


@dataclass(frozen=True)
class ProbeTimeout:
    agent_id: str
    dropped: bool = False


ProbeOutcome = Union[ProbeResponse, ProbeTimeout]


@dataclass
class FanOutResult:
    responses: dict[str, ProbeOutcome]
    elapsed_ms: float
    latencies_ms: dict[str, float]

    @property
    def answered(self) -> list[ProbeResponse]:
        return [r for r in self.responses.values() if isinstance(r, ProbeResponse)]


def parallel_probe(
    query: str,
    agents: Sequence[Probeable],
    deadline_ms: float = DEFAULT_DEADLINE_MS,
    model: NetworkModel = NetworkModel(),
    requestor_id: str = "orchestrator",
    now: float = 0.0,
) -> FanOutResult:
    """Probe every agent concurrently and join them by ``deadline_ms``.

    Every agent appears in the result, as a response or a ``ProbeTimeout``.
    Answers whose simulated latency exceeds the deadline are discarded;
    dropped requests never reach the agent. ``elapsed_ms`` is the max
    latency, capped at the deadline.
    """
    if not agents:
        raise ValueError("parallel_probe needs at least one agent")
    if deadline_ms <= 0:
        raise ValueError("deadline must be positive")
    req = ProbeRequest(query, requestor_id, int(max(1, round(deadline_ms))))
    schedule = {a.agent_id: model.sample(a.agent_id, query) for a in agents}
    if len(schedule) != len(agents):
        raise ValueError("agent ids must be unique within one fan-out")

    responses: dict[str, ProbeOutcome] = {}
    with ThreadPoolExecutor(max_workers=len(agents)) as pool:
        futures = {
            a.agent_id: pool.submit(a.handle_probe, req, now)
            for a in agents
            if not schedule[a.agent_id][1]
        }
        wait(futures.values(), timeout=_REAL_TIME_GUARD_S)
        for agent in agents:
            aid = agent.agent_id
            latency, dropped = schedule[aid]
            fut = futures.get(aid)
            if dropped:
                responses[aid] = ProbeTimeout(aid, dropped=True)
            elif latency > deadline_ms or not fut.done():
                responses[aid] = ProbeTimeout(aid)
            elif fut.exception() is not None:
                log.warning("probe handler of %s failed: %r", aid, fut.exception())
                responses[aid] = ProbeTimeout(aid)
            else:
                responses[aid] = fut.result()

    latencies = {aid: lat for aid, (lat, _) in schedule.items()}
    if any(isinstance(r, ProbeTimeout) for r in responses.values()):
        elapsed = float(deadline_ms)
    else:
        elapsed = max(latencies.values())
    return FanOutResult(responses, elapsed, latencies)


# -- wire format -------------------------------------------------------------

WireMessage = Union[ProbeRequest, ProbeResponse]

_REQUEST_FIELDS = ("type", "query", "requestor", "deadline_ms")
_RESPONSE_FIELDS = ("type", "agent_id", "verdict", "confidence")


class WireError(ValueError):
    """Raised for undecodable messages; ``field`` names the offending field."""

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


def _canonical(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def encode(message: WireMessage) -> bytes:
    if isinstance(message, ProbeRequest):
        return _canonical(
            {
                "type": "probe",
                "query": message.query,
                "requestor": message.requestor_id,
                "deadline_ms": int(message.deadline_ms),
            }
        )
    if isinstance(message, ProbeResponse):
        return _canonical(
            {
                "type": "ack",
                "agent_id": message.agent_id,
                "verdict": message.verdict.value,
                "confidence": None if message.confidence is None else float(message.confidence),
            }
        )
    raise TypeError(f"cannot encode {type(message).__name__}")


def _no_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise WireError(key, "duplicate field")
        out[key] = value
    return out


def _check_fields(obj: dict, expected: tuple[str, ...]) -> None:
    for name in sorted(set(obj) - set(expected)):
        raise WireError(name, "unknown field")
    for name in expected:
        if name not in obj:
            raise WireError(name, "missing field")


def _string(obj: dict, name: str, allow_empty: bool = True) -> str:
    value = obj[name]
    if not isinstance(value, str):
        raise WireError(name, f"expected string, got {type(value).__name__}")
    if not allow_empty and not value:
        raise WireError(name, "must be non-empty")
    return value


def decode(data: bytes) -> WireMessage:
    try:
        obj = json.loads(data.decode("utf-8"), object_pairs_hook=_no_duplicates)
    except UnicodeDecodeError as exc:
        raise WireError("$", f"not UTF-8: {exc}") from None
    except json.JSONDecodeError as exc:
        raise WireError("$", f"malformed JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise WireError("$", "message must be a JSON object")
    if "type" not in obj:
        raise WireError("type", "missing field")
    kind = obj["type"]
    if kind == "probe":
        _check_fields(obj, _REQUEST_FIELDS)
        deadline = obj["deadline_ms"]
        if isinstance(deadline, bool) or not isinstance(deadline, int):
            raise WireError("deadline_ms", "expected integer")
        if deadline <= 0:
            raise WireError("deadline_ms", "must be positive")
        return ProbeRequest(
            _string(obj, "query"), _string(obj, "requestor", allow_empty=False), deadline
        )
    if kind == "ack":
        _check_fields(obj, _RESPONSE_FIELDS)
        agent_id = _string(obj, "agent_id", allow_empty=False)
        raw = obj["verdict"]
        try:
            verdict = Verdict(raw)
        except ValueError:
            raise WireError("verdict", f"unknown verdict {raw!r}") from None
        conf = obj["confidence"]
        if conf is not None:
            if isinstance(conf, bool) or not isinstance(conf, (int, float)):
                raise WireError("confidence", "expected number or null")
            conf = float(conf)
            if not 0.0 <= conf <= 1.0:
                raise WireError("confidence", "must lie in [0, 1]")
            if verdict is Verdict.NOT_AUTHORIZED:
                raise WireError("confidence", "NOT_AUTHORIZED carries no confidence")
        return ProbeResponse(verdict, agent_id, conf)
    raise WireError("type", f"unknown message type {kind!r}")
