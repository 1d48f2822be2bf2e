"""Multi-sender, multi-receiver secret-sharing protocol over single qubits.

One run: the first sender prepares a block of n*N qubits from her two random
strings; each later sender chains value flips and basis swaps driven by her
own strings; the last sender deals one qubit per block to each of the n
receivers; receivers acknowledge, senders publish their basis strings (never
earlier), receivers measure in the combined basis, everyone compares a random
subset of blocks, and the surviving blocks' XOR-across-receivers becomes the
raw key. Every inter-party hop goes through a channel model that may lose
qubits, add Pauli noise, or host an adversary.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, replace
from typing import Sequence

from .channel import (
    IDEAL,
    AttackResult,
    ChannelModel,
    ColluderInsider,
    InterceptResend,
    LossStrategy,
    OrderingAttack,
    PreparerInsider,
    collusion_attack,
    ordering_attack,
    preparer_attack,
    transmit,
)
from .errors import ConfigError, OrderingError, ProtocolStateError
from .qubits import Qubit, apply_hadamard, apply_value_flip, encode, measure
from .transcript import (
    KIND_ABORT,
    KIND_ACK,
    KIND_BASES,
    KIND_CHECK_RECV,
    KIND_CHECK_RESULT,
    KIND_CHECK_SELECT,
    KIND_CHECK_SENDER,
    KIND_EARLY_MEASURE,
    KIND_GUESS,
    KIND_KEY_CONTRIB,
    KIND_LOSS,
    KIND_MEASURED,
    KIND_RAW_KEY,
    KIND_SIFT,
    AdversaryRecord,
    Transcript,
    bits_to_str,
)


class Variant(enum.Enum):
    """How value and basis bits are laid out across the block.

    MAIN: every sender draws n*N value bits and n*N basis bits, one of each
    per qubit. BLOCK_BASIS: n*N value bits but only N basis bits, one basis
    per n-qubit block. BLOCK_SHARED: N bits of each kind per sender; the
    first sender splits each value bit into n single-qubit shares whose XOR
    reproduces it (receivers must be odd in number or later senders' bits
    cancel out of the key).
    """

    MAIN = "main"
    BLOCK_BASIS = "block_basis"
    BLOCK_SHARED = "block_shared"

    @classmethod
    def parse(cls, text: str) -> "Variant":
        aliases = {
            "main": cls.MAIN,
            "block_basis": cls.BLOCK_BASIS,
            "block-basis": cls.BLOCK_BASIS,
            "a": cls.BLOCK_BASIS,
            "block_shared": cls.BLOCK_SHARED,
            "block-shared": cls.BLOCK_SHARED,
            "b": cls.BLOCK_SHARED,
        }
        try:
            return aliases[text.strip().lower()]
        except KeyError:
            raise ConfigError("variant", f"unknown variant {text!r}") from None


@dataclass(frozen=True)
class ProtocolConfig:
    senders: int
    receivers: int
    blocks: int
    variant: Variant = Variant.MAIN
    check_fraction: float = 0.5
    qber_abort_threshold: float = 0.11
    quantum_memory: bool = True
    seed: int = 0
    enforce_ordering: bool = True
    omit_hadamard: frozenset[int] = frozenset()
    unsafe_skip_validation: bool = False  # diagnostics only; documented failure modes apply

    def __post_init__(self):
        if not self.unsafe_skip_validation:
            self.validate()

    def validate(self, path: str = "") -> None:
        p = f"{path}." if path else ""
        if self.senders < 2:
            raise ConfigError(f"{p}senders", "need at least two senders")
        if self.receivers < 2:
            raise ConfigError(f"{p}receivers", "need at least two receivers")
        if self.blocks < 1:
            raise ConfigError(f"{p}blocks", "need at least one block")
        if not 0.0 < self.check_fraction < 1.0:
            raise ConfigError(f"{p}check_fraction", "must be in (0, 1)")
        if not 0.0 < self.qber_abort_threshold < 1.0:
            raise ConfigError(f"{p}qber_abort_threshold", "must be in (0, 1)")
        if self.variant is Variant.BLOCK_SHARED and self.receivers % 2 == 0:
            raise ConfigError(
                f"{p}receivers",
                "the shared-block variant needs an odd receiver count or the key "
                "collapses to the first sender's bits",
            )
        if self.checked_block_count >= self.blocks:
            raise ConfigError(
                f"{p}check_fraction",
                f"checking ceil({self.check_fraction} * {self.blocks}) blocks leaves "
                "no unchecked block to carry key bits",
            )
        for i in self.omit_hadamard:
            if not 2 <= i <= self.senders:
                raise ConfigError(f"{p}omit_hadamard", f"sender {i} cannot skip basis mixing")

    @property
    def total_qubits(self) -> int:
        return self.receivers * self.blocks

    @property
    def checked_block_count(self) -> int:
        # round() guards against 0.3 * 10 = 3.0000000000000004 style float dust
        return math.ceil(round(self.check_fraction * self.blocks, 9))

    def snapshot(self) -> dict[str, str]:
        omit = ",".join(str(i) for i in sorted(self.omit_hadamard)) or "-"
        return {
            "senders": str(self.senders),
            "receivers": str(self.receivers),
            "blocks": str(self.blocks),
            "variant": self.variant.value,
            "check_fraction": repr(self.check_fraction),
            "qber_abort_threshold": repr(self.qber_abort_threshold),
            "quantum_memory": "1" if self.quantum_memory else "0",
            "seed": str(self.seed),
            "enforce_ordering": "1" if self.enforce_ordering else "0",
            "omit_hadamard": omit,
        }


def position(block: int, receiver: int, receivers: int) -> int:
    """0-based qubit index of 0-based ``block`` and 1-based ``receiver``."""
    return block * receivers + (receiver - 1)


def block_of(k: int, receivers: int) -> int:
    return k // receivers


def receiver_of(k: int, receivers: int) -> int:
    return k % receivers + 1


@dataclass(frozen=True)
class PartySecrets:
    """One sender's random strings for a run; sizes depend on the variant."""

    party: str
    value_bits: tuple[int, ...]
    basis_bits: tuple[int, ...]
    value_shares: tuple[int, ...] | None = None  # first sender, shared-block variant


def _rand_bits(rng: random.Random, count: int) -> tuple[int, ...]:
    return tuple(rng.getrandbits(1) for _ in range(count))


def _expand_shares(value_bits: Sequence[int], receivers: int, rng: random.Random) -> tuple[int, ...]:
    """Split each bit into ``receivers`` single-qubit shares with matching XOR.

    Uniform over the 2^(n-1) satisfying assignments per block: the first n-1
    shares are free and the last absorbs the parity.
    """
    shares: list[int] = []
    for bit in value_bits:
        free = [rng.getrandbits(1) for _ in range(receivers - 1)]
        parity = bit
        for f in free:
            parity ^= f
        shares.extend(free)
        shares.append(parity)
    return tuple(shares)


def secret_lengths(cfg: ProtocolConfig) -> tuple[int, int]:
    """(value string length, basis string length) for one sender."""
    if cfg.variant is Variant.MAIN:
        return cfg.total_qubits, cfg.total_qubits
    if cfg.variant is Variant.BLOCK_BASIS:
        return cfg.total_qubits, cfg.blocks
    return cfg.blocks, cfg.blocks


def generate_secrets(cfg: ProtocolConfig, rng: random.Random) -> list[PartySecrets]:
    """Fresh random strings for every sender, never reused across runs.

    A sender listed in ``omit_hadamard`` skips the basis-mixing step, which is
    the same as using (and later publishing) an all-zero basis string.
    """
    out = []
    n_value, n_basis = secret_lengths(cfg)
    for i in range(1, cfg.senders + 1):
        value_bits = _rand_bits(rng, n_value)
        if i in cfg.omit_hadamard:
            basis_bits = (0,) * n_basis
        else:
            basis_bits = _rand_bits(rng, n_basis)
        shares = None
        if cfg.variant is Variant.BLOCK_SHARED and i == 1:
            shares = _expand_shares(value_bits, cfg.receivers, rng)
        out.append(PartySecrets(f"alice{i}", value_bits, basis_bits, shares))
    return out


def _check_secret_sizes(secrets: PartySecrets, cfg: ProtocolConfig, first: bool) -> None:
    n_value, n_basis = secret_lengths(cfg)
    if len(secrets.value_bits) != n_value or len(secrets.basis_bits) != n_basis:
        raise ConfigError(
            "secrets",
            f"{secrets.party}: expected {n_value} value bits and {n_basis} basis bits, "
            f"got {len(secrets.value_bits)} and {len(secrets.basis_bits)}",
        )
    if cfg.variant is Variant.BLOCK_SHARED and first:
        if secrets.value_shares is None or len(secrets.value_shares) != cfg.total_qubits:
            raise ConfigError("secrets", f"{secrets.party}: needs {cfg.total_qubits} value shares")


def expanded_bit_vectors(
    secrets: Sequence[PartySecrets], cfg: ProtocolConfig
) -> tuple[list[list[int]], list[list[int]]]:
    """Per-position value and basis bit vectors for every sender.

    Expands block-granular strings so position arithmetic is uniform across
    variants: the bit governing qubit k of sender i lands at [i-1][k].
    """
    values: list[list[int]] = []
    bases: list[list[int]] = []
    n = cfg.receivers
    for s in secrets:
        if cfg.variant is Variant.MAIN:
            v = list(s.value_bits)
            b = list(s.basis_bits)
        elif cfg.variant is Variant.BLOCK_BASIS:
            v = list(s.value_bits)
            b = [s.basis_bits[block_of(k, n)] for k in range(cfg.total_qubits)]
        else:
            # Only the first sender carries per-position shares of her bits.
            if s.value_shares is not None:
                v = list(s.value_shares)
            else:
                v = [s.value_bits[block_of(k, n)] for k in range(cfg.total_qubits)]
            b = [s.basis_bits[block_of(k, n)] for k in range(cfg.total_qubits)]
        values.append(v)
        bases.append(b)
    return values, bases


@dataclass
class QubitBlock:
    """The n*N-qubit product state as it travels the sender chain."""

    qubits: list  # Qubit | None per position
    origin: int  # 1-based index of the sender it last left

    def __len__(self) -> int:
        return len(self.qubits)


def prepare_block(secrets: PartySecrets, cfg: ProtocolConfig) -> QubitBlock:
    """First sender turns her strings into the initial qubit block."""
    _check_secret_sizes(secrets, cfg, first=True)
    values, bases = expanded_bit_vectors([secrets], cfg)
    qubits = [encode(v, b) for v, b in zip(values[0], bases[0])]
    return QubitBlock(qubits, origin=1)


def encode_block(
    block: QubitBlock, secrets: PartySecrets, sender_index: int, cfg: ProtocolConfig
) -> QubitBlock:
    """Sender ``sender_index`` chains her value flips, then her basis swaps.

    The net effect on position k is to XOR her governing bits into the state's
    (value, basis) pair, so the final block carries the running XOR of every
    sender's bits.
    """
    if sender_index < 2 or sender_index > cfg.senders:
        raise ConfigError("secrets", f"sender index {sender_index} out of range")
    if len(block.qubits) != cfg.total_qubits:
        raise ConfigError("secrets", f"block has {len(block.qubits)} qubits, expected {cfg.total_qubits}")
    _check_secret_sizes(secrets, cfg, first=False)
    values, bases = expanded_bit_vectors([secrets], cfg)
    out = []
    for k, q in enumerate(block.qubits):
        if q is None:
            out.append(None)
            continue
        if values[0][k]:
            q = apply_value_flip(q)
        if bases[0][k]:
            q = apply_hadamard(q)
        out.append(q)
    return QubitBlock(out, origin=sender_index)


def split_for_receivers(block: QubitBlock, cfg: ProtocolConfig) -> list[list]:
    """Round-robin deal: receiver l takes positions n*j + l, order preserved."""
    if len(block.qubits) != cfg.total_qubits:
        raise ConfigError("secrets", f"block has {len(block.qubits)} qubits, expected {cfg.total_qubits}")
    n = cfg.receivers
    return [
        [block.qubits[position(j, l, n)] for j in range(cfg.blocks)]
        for l in range(1, n + 1)
    ]


def announce_bases(
    tr: Transcript, sender_index: int, basis_bits: Sequence[int], cfg: ProtocolConfig
) -> None:
    """Publish one sender's basis string.

    With ordering enforcement on, this refuses to run until every receiver has
    acknowledged reception; announcing earlier hands the whole encoding to
    anyone holding the transiting qubits.
    """
    if cfg.enforce_ordering and len(tr.ack_seqs) < cfg.receivers:
        missing = [l for l in range(1, cfg.receivers + 1) if l not in tr.ack_seqs]
        raise OrderingError(
            f"sender {sender_index} tried to announce bases before receivers "
            f"{missing} acknowledged reception"
        )
    ev = tr.record(KIND_BASES, f"alice{sender_index}", bits_to_str(basis_bits))
    tr.announced_bases[sender_index] = tuple(int(b) for b in basis_bits)
    tr.bases_seqs[sender_index] = ev.seq


def combined_bases(tr: Transcript, cfg: ProtocolConfig) -> list[int]:
    """Per-position XOR of all announced basis strings (the decoding basis)."""
    if len(tr.announced_bases) < cfg.senders:
        raise ProtocolStateError("not every sender has announced a basis string")
    combined = [0] * cfg.total_qubits
    n = cfg.receivers
    for bits in tr.announced_bases.values():
        if len(bits) == cfg.total_qubits:
            per_position = bits
        else:
            per_position = [bits[block_of(k, n)] for k in range(cfg.total_qubits)]
        combined = [c ^ int(b) for c, b in zip(combined, per_position)]
    return combined


def checked_positions(blocks: Sequence[int], cfg: ProtocolConfig) -> list[int]:
    """Canonical reveal order: checked blocks ascending, receivers ascending."""
    return [position(j, l, cfg.receivers) for j in sorted(blocks) for l in range(1, cfg.receivers + 1)]


def run_check(
    tr: Transcript,
    cfg: ProtocolConfig,
    values: Sequence[Sequence[int]],
    rng: random.Random,
    check_blocks: Sequence[int] | None = None,
) -> bool:
    """Reveal a random subset of blocks and compare outcomes against the XOR.

    Aborts the run when the disagreement rate among comparable revealed
    positions exceeds the configured threshold. Returns True on pass.
    """
    want = cfg.checked_block_count
    if check_blocks is None:
        blocks = tuple(sorted(rng.sample(range(cfg.blocks), want)))
    else:
        blocks = tuple(sorted(int(j) for j in check_blocks))
        if len(set(blocks)) != want or any(not 0 <= j < cfg.blocks for j in blocks):
            raise ConfigError("check_blocks", f"need {want} distinct block indices in [0, {cfg.blocks})")
    tr.check_blocks = blocks
    tr.record(KIND_CHECK_SELECT, "all", ",".join(str(j) for j in blocks) or "-")

    positions = checked_positions(blocks, cfg)
    for i in range(1, cfg.senders + 1):
        revealed = [values[i - 1][k] for k in positions]
        tr.record(KIND_CHECK_SENDER, f"alice{i}", bits_to_str(revealed))
    compared = 0
    disagree = 0
    for l in range(1, cfg.receivers + 1):
        revealed = []
        for j in sorted(blocks):
            if tr.usable[l][j]:
                revealed.append(tr.outcomes[l][j])
            else:
                revealed.append(None)
        tr.record(KIND_CHECK_RECV, f"bob{l}", bits_to_str(revealed))
        for j, outcome in zip(sorted(blocks), revealed):
            if outcome is None:
                continue
            k = position(j, l, cfg.receivers)
            expected = 0
            for sender_bits in values:
                expected ^= sender_bits[k]
            compared += 1
            if outcome != expected:
                disagree += 1
    rate = disagree / compared if compared else 0.0
    tr.compared = compared
    tr.disagreements = disagree
    tr.qber = rate
    passed = rate <= cfg.qber_abort_threshold
    tr.record(
        KIND_CHECK_RESULT,
        "all",
        f"compared={compared};disagree={disagree};rate={rate:.6f};"
        f"threshold={cfg.qber_abort_threshold:.6f};pass={1 if passed else 0}",
    )
    if not passed:
        tr.abort_reason = f"error rate {rate:.6f} above threshold {cfg.qber_abort_threshold:.6f}"
        tr.record(KIND_ABORT, "all", "error-rate")
    return passed


def extract_raw_key(tr: Transcript, cfg: ProtocolConfig, values: Sequence[Sequence[int]]) -> None:
    """XOR each surviving unchecked block across receivers into one key bit.

    A block survives when every receiver holds a usable outcome for it. Each
    receiver's contribution and the combined key are both recorded; combining
    them is a joint computation, with no aggregation mechanism prescribed.
    """
    if tr.qber is None:
        raise ProtocolStateError("raw key requested before the check ran")
    if tr.abort_reason is not None:
        raise ProtocolStateError("raw key requested after an abort")
    checked = set(tr.check_blocks)
    key_blocks = [
        j
        for j in range(cfg.blocks)
        if j not in checked and all(tr.usable[l][j] for l in range(1, cfg.receivers + 1))
    ]
    tr.key_blocks = tuple(key_blocks)
    key = []
    for j in key_blocks:
        bit = 0
        for l in range(1, cfg.receivers + 1):
            bit ^= tr.outcomes[l][j]
        key.append(bit)
    for l in range(1, cfg.receivers + 1):
        contrib = [tr.outcomes[l][j] for j in key_blocks]
        tr.record(KIND_KEY_CONTRIB, f"bob{l}", bits_to_str(contrib))
    tr.raw_key = tuple(key)
    tr.record(KIND_RAW_KEY, "all", bits_to_str(key))

    reference = []
    for j in key_blocks:
        bit = 0
        for l in range(1, cfg.receivers + 1):
            k = position(j, l, cfg.receivers)
            for sender_bits in values:
                bit ^= sender_bits[k]
        reference.append(bit)
    tr.reference_key = tuple(reference)


def _finalize_rates(tr: Transcript, cfg: ProtocolConfig) -> None:
    n = cfg.receivers
    received = usable = 0
    for l in range(1, n + 1):
        for j in range(cfg.blocks):
            if tr.outcomes.get(l) is not None and tr.outcomes[l][j] is not None:
                received += 1
                if tr.usable[l][j]:
                    usable += 1
    tr.sift_rate = usable / received if received else 0.0
    checked = set(tr.check_blocks)
    non_check = [j for j in range(cfg.blocks) if j not in checked]
    total = len(non_check) * n
    if total and tr.usable:
        good = sum(1 for j in non_check for l in range(1, n + 1) if tr.usable[l][j])
        tr.efficiency = good / total
    else:
        tr.efficiency = 0.0


def _attack_record(result: AttackResult) -> AdversaryRecord:
    return AdversaryRecord(result.kind, result.positions, result.bases, result.bits, result.certain)


def run_protocol(
    cfg: ProtocolConfig,
    channel: ChannelModel | None = None,
    *,
    secrets: Sequence[PartySecrets] | None = None,
    check_blocks: Sequence[int] | None = None,
) -> Transcript:
    """Execute one full run and return its transcript.

    Deterministic given (cfg.seed, channel). ``secrets`` and ``check_blocks``
    inject fixed strings and a fixed check selection for reproducing known
    vectors; normally both are drawn from the run's seeded generator.
    """
    channel = channel if channel is not None else IDEAL
    channel.validate()
    if isinstance(channel.adversary, ColluderInsider) and channel.adversary.target > cfg.senders:
        raise ConfigError(
            "channel.adversary.target",
            f"sender {channel.adversary.target} does not exist in a {cfg.senders}-sender run",
        )
    rng = random.Random(cfg.seed)
    tr = Transcript(cfg.snapshot())
    m, n = cfg.senders, cfg.receivers

    alices = list(secrets) if secrets is not None else generate_secrets(cfg, rng)
    if len(alices) != m:
        raise ConfigError("secrets", f"need {m} senders' secrets, got {len(alices)}")
    tr._secrets = alices
    values, basis_vectors = expanded_bit_vectors(alices, cfg)
    adv = channel.adversary

    def hop(qubits: list, leaving: int) -> list:
        eve = adv if isinstance(adv, InterceptResend) and leaving == m else None
        res = transmit(qubits, replace(channel, adversary=eve), rng)
        qubits = res.qubits
        if res.lost and channel.loss_strategy is LossStrategy.REMOVE and leaving < m:
            bitmap = ["0"] * cfg.total_qubits
            for k in res.lost:
                bitmap[k] = "1"
            tr.record(KIND_LOSS, f"alice{leaving + 1}", "".join(bitmap))
        if res.intercept is not None:
            tr.adversary = _attack_record(res.intercept)
        if isinstance(adv, PreparerInsider) and leaving == 2:
            result, qubits = preparer_attack(values[0], basis_vectors[0], qubits, rng)
            tr.adversary = _attack_record(result)
        elif isinstance(adv, ColluderInsider) and leaving == adv.target:
            colluders = adv.colluders if adv.colluders is not None else frozenset(range(1, adv.target))
            known_values = {i: values[i - 1] for i in colluders}
            known_bases = {
                i: basis_vectors[i - 1] for i in colluders if i not in adv.withheld_bases
            }
            result, qubits = collusion_attack(known_values, known_bases, qubits, rng)
            tr.adversary = _attack_record(result)
        elif isinstance(adv, OrderingAttack) and leaving == m:
            if adv.use_announced_bases and len(tr.announced_bases) == m:
                announced = basis_vectors  # announced strings, expanded per position
                result, qubits = ordering_attack(announced, qubits, rng)
            else:
                result, qubits = ordering_attack(None, qubits, rng)
            tr.adversary = _attack_record(result)
        return qubits

    block = prepare_block(alices[0], cfg)
    qubits = block.qubits
    for i in range(2, m + 1):
        qubits = hop(qubits, leaving=i - 1)
        block = encode_block(QubitBlock(qubits, origin=i - 1), alices[i - 1], i, cfg)
        qubits = block.qubits

    # An ordering attack relies on the senders broadcasting before reception.
    announce_early = isinstance(adv, OrderingAttack) and adv.use_announced_bases
    if announce_early:
        try:
            for i in range(1, m + 1):
                announce_bases(tr, i, alices[i - 1].basis_bits, cfg)
        except OrderingError as err:
            tr.abort_reason = f"ordering violation: {err}"
            tr.record(KIND_ABORT, "all", "ordering-violation")
            _finalize_rates(tr, cfg)
            return tr

    qubits = hop(qubits, leaving=m)
    per_receiver = split_for_receivers(QubitBlock(qubits, origin=m), cfg)

    for l in range(1, n + 1):
        received = per_receiver[l - 1]
        if channel.loss_strategy is LossStrategy.REMOVE and any(q is None for q in received):
            bitmap = "".join("1" if q is None else "0" for q in received)
            tr.record(KIND_LOSS, f"bob{l}", bitmap)
        ev = tr.record(KIND_ACK, f"bob{l}")
        tr.ack_seqs[l] = ev.seq

    if not cfg.quantum_memory:
        # No storage: measure in guessed bases before any announcement.
        for l in range(1, n + 1):
            guesses = tuple(rng.getrandbits(1) for _ in range(cfg.blocks))
            tr.guesses[l] = guesses
            tr.chosen_bases[l] = guesses
            outcomes = []
            for j, q in enumerate(per_receiver[l - 1]):
                outcomes.append(None if q is None else measure(q, guesses[j], rng))
            tr.outcomes[l] = outcomes
            tr.record(KIND_EARLY_MEASURE, f"bob{l}")

    if not announce_early:
        for i in range(1, m + 1):
            announce_bases(tr, i, alices[i - 1].basis_bits, cfg)

    required = combined_bases(tr, cfg)
    if cfg.quantum_memory:
        for l in range(1, n + 1):
            outcomes = []
            usable = []
            chosen = []
            for j, q in enumerate(per_receiver[l - 1]):
                basis = required[position(j, l, n)]
                chosen.append(basis)
                if q is None:
                    outcomes.append(None)
                    usable.append(False)
                else:
                    outcomes.append(measure(q, basis, rng))
                    usable.append(True)
            tr.outcomes[l] = outcomes
            tr.usable[l] = usable
            tr.chosen_bases[l] = tuple(chosen)
            tr.record(KIND_MEASURED, f"bob{l}", bits_to_str(outcomes))
    else:
        for l in range(1, n + 1):
            tr.record(KIND_GUESS, f"bob{l}", bits_to_str(tr.guesses[l]))
            usable = []
            for j in range(cfg.blocks):
                ok = (
                    tr.outcomes[l][j] is not None
                    and tr.guesses[l][j] == required[position(j, l, n)]
                )
                usable.append(ok)
            tr.usable[l] = usable
            tr.record(KIND_SIFT, f"bob{l}", "".join("1" if u else "0" for u in usable))
            tr.record(KIND_MEASURED, f"bob{l}", bits_to_str(tr.outcomes[l]))

    if run_check(tr, cfg, values, rng, check_blocks=check_blocks):
        extract_raw_key(tr, cfg, values)
    _finalize_rates(tr, cfg)
    return tr
