"""Positions in R^d, unit-speed message timing, and a deterministic event engine.

Messages travel at speed 1, so flight time equals Euclidean distance.  Local
computation takes zero time: a handler may emit new messages at (or after)
the instant it was triggered, never before.  Simultaneous deliveries are
ordered by (time, receiver id, sequence number) so runs are reproducible.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

TIME_EPS = 1e-9


class SpacetimeError(ValueError):
    pass


class DimensionMismatch(SpacetimeError):
    pass


class DegenerateLayoutError(SpacetimeError):
    """Verifier positions do not span the ambient dimension."""


class CausalityError(RuntimeError):
    """A handler tried to emit a message into the past."""


class PlacementError(SpacetimeError):
    """A party position violates the scenario constraints (e.g. the exclusion radius)."""


@dataclass(frozen=True)
class Position:
    coords: tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if len(coords) < 1 or not all(math.isfinite(c) for c in coords):
            raise SpacetimeError(f"bad coordinates {self.coords}")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords)


def pos(*coords) -> Position:
    return Position(tuple(coords))


def distance(a: Position, b: Position) -> float:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension mismatch: {a.dim} vs {b.dim}")
    return math.dist(a.coords, b.coords)


@dataclass(frozen=True)
class TimingConfig:
    T: float
    delta: float = 0.0
    slack: float = 0.0

    def __post_init__(self):
        if self.delta < 0 or self.slack < 0:
            raise SpacetimeError("delta and slack must be nonnegative")


@dataclass(frozen=True)
class SpacetimeEvent:
    sender: str
    receiver: str
    payload: object
    emit_time: float
    arrival_time: float


def is_enclosed(verifiers, position: Position) -> bool:
    """Convex hull membership, solved as a small linear feasibility problem.

    Boundary points count as enclosed.  Raises DegenerateLayoutError when the
    verifier positions do not affinely span the ambient dimension (e.g. four
    coplanar verifiers in 3-D); the caller decides what to do then.
    """
    verifiers = list(verifiers)
    d = position.dim
    if any(v.dim != d for v in verifiers):
        raise DimensionMismatch("verifier/prover dimensions differ")
    if len(verifiers) < d + 1:
        raise SpacetimeError(f"need at least {d + 1} verifiers in dimension {d}")
    vmat = np.array([v.coords for v in verifiers], dtype=float)
    span = vmat[1:] - vmat[0]
    if np.linalg.matrix_rank(span, tol=1e-9) < d:
        raise DegenerateLayoutError("verifier positions are affinely degenerate")
    if d == 1:
        xs = vmat[:, 0]
        return xs.min() - 1e-9 <= position.coords[0] <= xs.max() + 1e-9

    from scipy.optimize import linprog

    a_eq = np.vstack([vmat.T, np.ones(len(verifiers))])
    b_eq = np.append(np.array(position.coords, dtype=float), 1.0)
    res = linprog(
        c=np.zeros(len(verifiers)),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(0, None)] * len(verifiers),
        method="highs",
    )
    return bool(res.status == 0)


def schedule_challenges(verifiers, prover_pos: Position, cfg: TimingConfig) -> list[float]:
    """Emit times T - d(V_i, pos) so every challenge reaches pos at time T."""
    if not is_enclosed(verifiers, prover_pos):
        raise PlacementError("prover position is not enclosed by the verifiers")
    return [cfg.T - distance(v, prover_pos) for v in verifiers]


def in_time(arrival: float, verifier: Position, prover_pos: Position, cfg: TimingConfig) -> bool:
    return arrival <= cfg.T + distance(verifier, prover_pos) + cfg.slack + TIME_EPS


@dataclass
class Note:
    """Zero-duration local action recorded for transcript assertions."""

    time: float
    party: str
    tag: str
    data: dict = field(default_factory=dict)


class EventEngine:
    """Single-threaded discrete-event replay over a fixed set of positions."""

    def __init__(self, positions: dict[str, Position]):
        self.positions = dict(positions)
        self._heap: list[tuple[float, str, int, SpacetimeEvent]] = []
        self._seq = 0
        self.now = -math.inf
        self.transcript: list[SpacetimeEvent] = []
        self.notes: list[Note] = []
        self._handlers: dict[str, object] = {}

    def on(self, party: str, handler) -> None:
        self._handlers[party] = handler

    def emit(self, sender: str, receiver: str, payload, emit_time: float | None = None) -> SpacetimeEvent:
        if emit_time is None:
            emit_time = self.now if self.now > -math.inf else 0.0
        if emit_time < self.now - TIME_EPS:
            raise CausalityError(
                f"{sender} tried to emit at {emit_time} while the clock reads {self.now}"
            )
        flight = distance(self.positions[sender], self.positions[receiver])
        ev = SpacetimeEvent(sender, receiver, payload, emit_time, emit_time + flight)
        heapq.heappush(self._heap, (ev.arrival_time, ev.receiver, self._seq, ev))
        self._seq += 1
        return ev

    def note(self, party: str, tag: str, **data) -> None:
        self.notes.append(Note(max(self.now, 0.0), party, tag, data))

    def run(self) -> list[SpacetimeEvent]:
        while self._heap:
            _, _, _, ev = heapq.heappop(self._heap)
            self.now = ev.arrival_time
            self.transcript.append(ev)
            handler = self._handlers.get(ev.receiver)
            if handler is not None:
                handler(self, ev)
        return self.transcript


def run_events(events, handlers, positions) -> list[SpacetimeEvent]:
    """Replay pre-scheduled events through per-party handlers.

    Each event is (sender, receiver, payload, emit_time).  Handlers may emit
    further messages via the engine; emissions into the past are rejected.
    """
    engine = EventEngine(positions)
    for party, handler in handlers.items():
        engine.on(party, handler)
    for sender, receiver, payload, emit_time in events:
        engine.emit(sender, receiver, payload, emit_time)
    return engine.run()


def describe_payload(payload) -> object:
    from .registers import QubitRef

    if isinstance(payload, QubitRef):
        return {"kind": "qubit", "id": payload.uid}
    if isinstance(payload, dict):
        return {k: describe_payload(v) for k, v in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [describe_payload(v) for v in payload]
    if isinstance(payload, (str, int, float, bool)) or payload is None:
        return payload
    return repr(payload)


def transcript_to_jsonl(transcript) -> str:
    """One delivery per line: sender, receiver, payload, emit and arrival times."""
    lines = []
    for ev in transcript:
        lines.append(
            json.dumps(
                {
                    "sender": ev.sender,
                    "receiver": ev.receiver,
                    "payload": describe_payload(ev.payload),
                    "emit_time": ev.emit_time,
                    "arrival_time": ev.arrival_time,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")
