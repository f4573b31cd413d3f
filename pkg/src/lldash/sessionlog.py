"""Ordered event record of one playback session.

Events are plain dicts with a `type` and a wall-clock time `t`; the log
serialises to line-delimited JSON (one event per line) and is the substrate
for all metrics, QoE export and plotting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterator


class LogCorruptionError(ValueError):
    """Event stream violates its structural invariants."""


@dataclass
class SessionLog:
    meta: dict[str, Any] = field(default_factory=dict)
    events: list[dict[str, Any]] = field(default_factory=list)

    def add(self, event_type: str, t: float, **fields: Any) -> None:
        event = {"type": event_type, "t": t}
        event.update(fields)
        self.events.append(event)

    def iter_type(self, *event_types: str) -> Iterator[dict[str, Any]]:
        wanted = set(event_types)
        return (e for e in self.events if e["type"] in wanted)

    @property
    def t0(self) -> float:
        return float(self.meta["t0"])

    @property
    def budget_s(self) -> float:
        return float(self.meta["budget_s"])

    @property
    def target_latency_s(self) -> float:
        return float(self.meta["target_latency_s"])

    def to_jsonl(self) -> str:
        lines = [json.dumps({"type": "meta", **self.meta}, separators=(",", ":"))]
        lines.extend(json.dumps(e, separators=(",", ":")) for e in self.events)
        return "\n".join(lines) + "\n"

    def write_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, path: str) -> "SessionLog":
        log = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if obj.get("type") == "meta":
                    obj.pop("type")
                    log.meta = obj
                else:
                    log.events.append(obj)
        if not log.meta:
            raise LogCorruptionError(f"{path}: missing meta line")
        return log
