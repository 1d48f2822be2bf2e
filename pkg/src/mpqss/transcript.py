"""Run record: ordered public events plus derived results, in a diffable text form.

Serialized layout (stable field order, one record per line):

    mpqss-transcript v1
    config <key>=<value> ...
    event <seq> <kind> <party> <payload>
    adversary <key>=<value> ...     (optional trailing section)

Bit-sequence payloads are '0'/'1' strings, with '?' marking positions that
carry no usable outcome; index lists are comma separated; '-' is the empty
payload. Receiver indices and qubit positions are 1-based, block indices
0-based, matching the position arithmetic k = n*j + l.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Mapping

from .errors import TranscriptParseError

FORMAT_HEADER = "mpqss-transcript v1"

# Event kinds, in the order they normally appear in a run.
KIND_LOSS = "loss"                # payload: bitmap, 1 = lost position (announced deletion)
KIND_ACK = "ack"                  # receiver confirms reception of its qubits
KIND_EARLY_MEASURE = "premeasure" # receiver measured before announcements (no quantum memory)
KIND_BASES = "bases"              # a sender's basis string, published
KIND_GUESS = "guess-bases"        # receiver's guessed bases, published after KIND_BASES
KIND_SIFT = "sift"                # bitmap of positions kept after basis comparison
KIND_MEASURED = "measured"        # receiver's outcomes, one char per block ('?' = unusable)
KIND_CHECK_SELECT = "check-select"  # comma list of checked block indices
KIND_CHECK_SENDER = "check-sender"  # a sender's revealed bits at checked positions
KIND_CHECK_RECV = "check-receiver"  # a receiver's revealed outcomes at checked positions
KIND_CHECK_RESULT = "check-result"  # compared/disagree/rate/pass summary
KIND_KEY_CONTRIB = "key-contrib"  # one receiver's share of the joint key computation
KIND_RAW_KEY = "raw-key"          # combined key (joint computation, no mechanism prescribed)
KIND_ABORT = "abort"


def bits_to_str(bits) -> str:
    return "".join("?" if b is None else str(int(b)) for b in bits)


def str_to_bits(s: str) -> tuple:
    if s == "-":
        return ()
    return tuple(None if c == "?" else int(c) for c in s)


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    party: str
    payload: str = "-"

    def line(self) -> str:
        return f"event {self.seq} {self.kind} {self.party} {self.payload}"


@dataclass
class AdversaryRecord:
    """What an attached adversary measured and inferred, for post-hoc analysis."""

    kind: str
    positions: tuple[int, ...]      # 0-based qubit positions it touched
    bases: tuple[int, ...]          # basis it measured each position in
    bits: tuple[int, ...]           # best-guess inferred bit per position
    certain: tuple[bool, ...]       # True where the measurement basis provably matched

    def lines(self) -> list[str]:
        return [
            f"adversary kind={self.kind}",
            f"adversary positions={','.join(str(p) for p in self.positions) or '-'}",
            f"adversary bases={bits_to_str(self.bases) or '-'}",
            f"adversary bits={bits_to_str(self.bits) or '-'}",
            f"adversary certain={''.join('1' if c else '0' for c in self.certain) or '-'}",
        ]


class Transcript:
    """Everything one run announced, measured, checked, and derived."""

    def __init__(self, config: Mapping[str, str]):
        self.config = dict(config)
        self.events: list[Event] = []
        self._seq = 0

        # Typed mirrors of the event log, filled in by the protocol driver.
        self.announced_bases: dict[int, tuple[int, ...]] = {}
        self.ack_seqs: dict[int, int] = {}
        self.bases_seqs: dict[int, int] = {}
        self.guesses: dict[int, tuple[int, ...]] = {}
        self.chosen_bases: dict[int, tuple[int, ...]] = {}
        self.outcomes: dict[int, list] = {}
        self.usable: dict[int, list] = {}
        self.check_blocks: tuple[int, ...] = ()
        self.compared: int = 0
        self.disagreements: int = 0
        self.qber: float | None = None
        self.key_blocks: tuple[int, ...] = ()
        self.raw_key: tuple[int, ...] | None = None
        self.reference_key: tuple[int, ...] | None = None
        self.efficiency: float | None = None
        self.sift_rate: float | None = None
        self.abort_reason: str | None = None
        self.adversary: AdversaryRecord | None = None
        self._secrets = None  # simulator-side introspection, never serialized

    def record(self, kind: str, party: str, payload: str = "-") -> Event:
        self._seq += 1
        ev = Event(self._seq, kind, party, payload if payload else "-")
        self.events.append(ev)
        return ev

    @property
    def detected(self) -> bool:
        """At least one revealed check position disagreed."""
        return self.disagreements > 0

    @property
    def completed(self) -> bool:
        return self.abort_reason is None and self.raw_key is not None

    def ordering_respected(self) -> bool:
        """Every basis announcement came after every reception acknowledgment."""
        if not self.bases_seqs:
            return True
        if not self.ack_seqs:
            return False
        return min(self.bases_seqs.values()) > max(self.ack_seqs.values())

    def serialize(self) -> str:
        lines = [FORMAT_HEADER]
        cfg = " ".join(f"{k}={v}" for k, v in self.config.items())
        lines.append(f"config {cfg}")
        lines.extend(ev.line() for ev in self.events)
        if self.adversary is not None:
            lines.extend(self.adversary.lines())
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.serialize())


@dataclass
class ParsedTranscript:
    """Structural parse of the text format; semantic checks live in the harness."""

    config: dict[str, str]
    events: list[Event] = field(default_factory=list)
    adversary: dict[str, str] = field(default_factory=dict)

    def events_of(self, kind: str) -> list[Event]:
        return [ev for ev in self.events if ev.kind == kind]


def parse(text: str) -> ParsedTranscript:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_HEADER:
        raise TranscriptParseError(1, f"expected header {FORMAT_HEADER!r}")
    if len(lines) < 2 or not lines[1].startswith("config "):
        raise TranscriptParseError(2, "expected a config record")
    config: dict[str, str] = {}
    for item in lines[1][len("config "):].split():
        if "=" not in item:
            raise TranscriptParseError(2, f"malformed config item {item!r}")
        key, _, value = item.partition("=")
        config[key] = value
    parsed = ParsedTranscript(config=config)
    last_seq = 0
    for no, raw in enumerate(lines[2:], start=3):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("adversary "):
            item = line[len("adversary "):]
            if "=" not in item:
                raise TranscriptParseError(no, f"malformed adversary item {item!r}")
            key, _, value = item.partition("=")
            parsed.adversary[key] = value
            continue
        if not line.startswith("event "):
            raise TranscriptParseError(no, f"unknown record {line.split()[0]!r}")
        parts = line.split(" ")
        if len(parts) != 5:
            raise TranscriptParseError(no, "event records need: seq kind party payload")
        try:
            seq = int(parts[1])
        except ValueError:
            raise TranscriptParseError(no, f"bad sequence number {parts[1]!r}") from None
        if seq <= last_seq:
            raise TranscriptParseError(no, f"sequence numbers must increase ({seq} after {last_seq})")
        last_seq = seq
        parsed.events.append(Event(seq, parts[2], parts[3], parts[4]))
    return parsed
