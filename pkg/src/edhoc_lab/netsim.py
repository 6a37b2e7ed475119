"""Deterministic in-process network with mirror/redirect/drop path rules.

Frames are delivered one per :meth:`Network.step`, in send order.  Path
rules stand in for a reconfigured radio environment: a Mirror rule copies a
frame to an extra endpoint without touching the original delivery, a
Redirect rule delivers it somewhere else instead, a Drop rule swallows it.
Rules are snapshotted when a frame is sent, so adding or removing a rule
never changes frames already in flight.
"""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable

from .errors import ErrorCode, NetError

ANY = "*"
MAX_PAYLOAD = 4096


class RuleKind(str, enum.Enum):
    MIRROR = "Mirror"
    REDIRECT = "Redirect"
    DROP = "Drop"


@dataclass(frozen=True)
class PathRule:
    kind: RuleKind
    match_from: str = ANY
    match_to: str = ANY
    target: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        if self.kind is not RuleKind.DROP and not self.target:
            raise ValueError(f"{self.kind.value} rule needs a target")

    def matches(self, src: str, dst: str) -> bool:
        return self.match_from in (ANY, src) and self.match_to in (ANY, dst)

    @property
    def specificity(self) -> int:
        return (self.match_from != ANY) + (self.match_to != ANY)


@dataclass(frozen=True)
class Frame:
    seq: int
    src: str
    dst: str
    payload: bytes


@dataclass(frozen=True)
class Delivery:
    at: str
    frame: Frame
    rule: str  # "none", "redirect:<id>", "mirror:<id>"

    @property
    def payload(self) -> bytes:
        return self.frame.payload


class Network:
    def __init__(self, frame_hook: Callable[[Frame], Frame] | None = None):
        self._endpoints: set[str] = set()
        self._queue: deque[tuple[Frame, tuple[tuple[int, PathRule], ...]]] = deque()
        self._rules: dict[int, PathRule] = {}
        self._next_rule = 0
        self._next_seq = 0
        self._step_index = 0
        # Applied to each frame as it leaves the queue; the seam for delay or
        # corruption models.
        self.frame_hook = frame_hook
        self.inboxes: dict[str, list[Delivery]] = {}
        self.log: list[dict] = []

    # -- topology ---------------------------------------------------------

    def attach(self, endpoint: str) -> None:
        self._endpoints.add(endpoint)
        self.inboxes.setdefault(endpoint, [])

    def detach(self, endpoint: str) -> None:
        self._endpoints.discard(endpoint)

    @property
    def endpoints(self) -> frozenset[str]:
        return frozenset(self._endpoints)

    def _known(self, endpoint: str) -> None:
        if endpoint not in self._endpoints:
            raise NetError(ErrorCode.UNKNOWN_ENDPOINT, endpoint)

    def add_rule(self, rule: PathRule) -> int:
        if rule.target is not None:
            self._known(rule.target)
        if rule.kind is not RuleKind.MIRROR:
            for other in self._rules.values():
                if (
                    other.kind is not RuleKind.MIRROR
                    and (other.match_from, other.match_to) == (rule.match_from, rule.match_to)
                ):
                    raise NetError(
                        ErrorCode.RULE_CONFLICT, f"path rule already set for {rule.match_from}->{rule.match_to}"
                    )
        rule_id = self._next_rule
        self._next_rule += 1
        self._rules[rule_id] = rule
        return rule_id

    def remove_rule(self, rule_id: int) -> None:
        self._rules.pop(rule_id, None)

    @property
    def rules(self) -> dict[int, PathRule]:
        return dict(self._rules)

    # -- traffic ----------------------------------------------------------

    def send(self, src: str, dst: str, payload: bytes) -> int:
        self._known(src)
        self._known(dst)
        if len(payload) > MAX_PAYLOAD:
            raise NetError(ErrorCode.PAYLOAD_TOO_LARGE, f"{len(payload)} bytes")
        seq = self._next_seq
        self._next_seq += 1
        self._queue.append((Frame(seq, src, dst, bytes(payload)), tuple(self._rules.items())))
        return seq

    def pending(self) -> int:
        return len(self._queue)

    def step(self) -> list[Delivery]:
        if not self._queue:
            return []
        frame, rules = self._queue.popleft()
        if self.frame_hook is not None:
            frame = self.frame_hook(frame)
        step_index = self._step_index
        self._step_index += 1

        matching = [(rid, r) for rid, r in rules if r.matches(frame.src, frame.dst)]
        path = [(rid, r) for rid, r in matching if r.kind is not RuleKind.MIRROR]
        # most specific wins; ties go to the earliest rule
        path.sort(key=lambda item: (-item[1].specificity, item[0]))
        deliveries: list[Delivery] = []
        if path and path[0][1].kind is RuleKind.DROP:
            self._record(step_index, frame, None, f"drop:{path[0][0]}")
            return deliveries
        if path:
            rid, rule = path[0]
            deliveries.append(Delivery(rule.target, frame, f"redirect:{rid}"))
        else:
            deliveries.append(Delivery(frame.dst, frame, "none"))
        for rid, rule in matching:
            if rule.kind is RuleKind.MIRROR:
                deliveries.append(Delivery(rule.target, frame, f"mirror:{rid}"))

        delivered = []
        for d in deliveries:
            if d.at not in self._endpoints:
                self._record(step_index, frame, None, f"unreachable:{d.at}")
                continue
            self.inboxes[d.at].append(d)
            self._record(step_index, frame, d.at, d.rule)
            delivered.append(d)
        return delivered

    def _record(self, step_index: int, frame: Frame, at: str | None, rule: str) -> None:
        self.log.append(
            {
                "step": step_index,
                "seq": frame.seq,
                "from": frame.src,
                "to": frame.dst,
                "delivered_at": at,
                "rule": rule,
                "payload": frame.payload.hex(),
            }
        )

    def log_lines(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.log)

    def run(self, handlers: dict[str, Callable[[Delivery], None]], max_steps: int = 64) -> int:
        """Step until the queue drains or ``max_steps`` frames were processed.

        Handlers may send further frames.  Returns the number of steps taken.
        """
        steps = 0
        while self._queue and steps < max_steps:
            for delivery in self.step():
                handler = handlers.get(delivery.at)
                if handler is not None:
                    handler(delivery)
            steps += 1
        return steps


def delivered_payloads(deliveries: Iterable[Delivery]) -> list[bytes]:
    return [d.frame.payload for d in deliveries]
