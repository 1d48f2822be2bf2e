"""Channel imperfections and adversary behaviours.

Covers per-qubit loss with the two loss-handling policies (publicly deleting
the position, or substituting a random state), Pauli noise, intercept-resend
eavesdropping, insider interception of a partially encoded block, and the
interception enabled by announcing basis strings too early.

Attack results carry two honest accuracy notions per touched position:

* best guess   -- fraction of inferred bits that happen to equal the truth,
* certain      -- fraction measured in a provably matching basis (knowable
                  once basis strings become public), which is the fraction
                  recovered with certainty rather than by coin flips.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Sequence, Union

from .errors import ConfigError
from .qubits import Pauli, Qubit, apply_pauli, encode, measure


@dataclass(frozen=True)
class InterceptResend:
    """Measure each transiting qubit in a fresh random basis and forward the collapse."""

    fraction: float = 1.0  # per-qubit interception probability

    def validate(self, path: str = "adversary") -> None:
        if not 0.0 < self.fraction <= 1.0:
            raise ConfigError(f"{path}.fraction", "must be in (0, 1]")


@dataclass(frozen=True)
class OrderingAttack:
    """Intercept the distributed block after basis strings went public too early.

    With ``use_announced_bases`` the interceptor measures every position in
    the combined announced basis and reads the whole encoding; without it she
    is reduced to random guessing.
    """

    use_announced_bases: bool = True

    def validate(self, path: str = "adversary") -> None:  # nothing to check
        return


@dataclass(frozen=True)
class PreparerInsider:
    """The first sender intercepts the block leaving the second sender.

    She measures each qubit in the basis she prepared it in and strips her own
    value bits, which reads the second sender's bits exactly whenever the
    second sender skipped the basis-mixing step.
    """

    def validate(self, path: str = "adversary") -> None:
        return


@dataclass(frozen=True)
class ColluderInsider:
    """Senders below ``target`` pool their strings and intercept the block leaving it.

    ``colluders`` defaults to everyone below the target. Colluders listed in
    ``withheld_bases`` contributed their value strings but not their basis
    strings, degrading the interceptor's basis knowledge.
    """

    target: int
    colluders: frozenset[int] | None = None
    withheld_bases: frozenset[int] = frozenset()

    def validate(self, path: str = "adversary") -> None:
        if self.target < 3:
            raise ConfigError(f"{path}.target", "collusion targets the third sender or later")
        if self.colluders is not None:
            bad = [c for c in self.colluders if not 1 <= c < self.target]
            if bad:
                raise ConfigError(f"{path}.colluders", f"must lie below the target, got {sorted(bad)}")
        if self.withheld_bases and self.colluders is not None:
            if not self.withheld_bases <= self.colluders:
                raise ConfigError(f"{path}.withheld_bases", "must be a subset of the colluders")


Adversary = Union[InterceptResend, OrderingAttack, PreparerInsider, ColluderInsider]


class LossStrategy(enum.Enum):
    REMOVE = "remove"          # lost positions are announced and publicly deleted
    SUBSTITUTE = "substitute"  # a random four-state qubit stands in for a lost one


@dataclass(frozen=True)
class ChannelModel:
    """Per-qubit loss and Pauli noise, with an optional attached adversary."""

    loss_prob: float = 0.0
    p_x: float = 0.0
    p_y: float = 0.0
    p_z: float = 0.0
    loss_strategy: LossStrategy = LossStrategy.REMOVE
    adversary: Adversary | None = None

    def validate(self, path: str = "channel") -> None:
        for name in ("loss_prob", "p_x", "p_y", "p_z"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{path}.{name}", "must be in [0, 1]")
        if self.p_x + self.p_y + self.p_z > 1.0 + 1e-12:
            raise ConfigError(f"{path}.p_x", "p_x + p_y + p_z must not exceed 1")
        if self.adversary is not None:
            self.adversary.validate(f"{path}.adversary")


IDEAL = ChannelModel()


@dataclass
class AttackResult:
    """Per-position record of an interception."""

    kind: str
    positions: tuple[int, ...]
    bases: tuple[int, ...]
    bits: tuple[int, ...]
    certain: tuple[bool, ...]

    def guess_accuracy(self, truth: Sequence[int]) -> float:
        """Fraction of inferred bits equal to the truth (lucky guesses count)."""
        if not self.positions:
            return 0.0
        hits = sum(1 for p, b in zip(self.positions, self.bits) if b == truth[p])
        return hits / len(self.positions)

    def certain_accuracy(self, truth: Sequence[int]) -> float:
        """Fraction of positions decoded in a valid basis and equal to the truth."""
        if not self.positions:
            return 0.0
        hits = sum(
            1
            for p, b, ok in zip(self.positions, self.bits, self.certain)
            if ok and b == truth[p]
        )
        return hits / len(self.positions)

    def certain_fraction(self) -> float:
        if not self.certain:
            return 0.0
        return sum(self.certain) / len(self.certain)


@dataclass
class TransmitResult:
    qubits: list  # Qubit | None per position; None marks a deleted (lost) qubit
    lost: tuple[int, ...] = ()
    intercept: AttackResult | None = None


def _random_state(rng: random.Random) -> Qubit:
    return encode(rng.getrandbits(1), rng.getrandbits(1))


def transmit(qubits: Sequence[Qubit | None], ch: ChannelModel, rng: random.Random) -> TransmitResult:
    """Push a qubit sequence through one hop of the channel.

    Each position independently: lost with ``loss_prob`` (then deleted or
    substituted per the loss strategy); survivors suffer X/Y/Z noise with the
    configured probabilities and are finally exposed to an attached
    intercept-resend adversary. Already-deleted positions pass through as None.
    """
    out: list[Qubit | None] = []
    lost: list[int] = []
    for k, q in enumerate(qubits):
        if q is None:
            out.append(None)
            continue
        if ch.loss_prob > 0.0 and rng.random() < ch.loss_prob:
            lost.append(k)
            if ch.loss_strategy is LossStrategy.SUBSTITUTE:
                out.append(_random_state(rng))
            else:
                out.append(None)
            continue
        u = rng.random()
        if u < ch.p_x:
            q = apply_pauli(q, Pauli.X)
        elif u < ch.p_x + ch.p_y:
            q = apply_pauli(q, Pauli.Y)
        elif u < ch.p_x + ch.p_y + ch.p_z:
            q = apply_pauli(q, Pauli.Z)
        out.append(q)
    intercept = None
    if isinstance(ch.adversary, InterceptResend):
        out, intercept = intercept_resend(out, rng, fraction=ch.adversary.fraction)
    return TransmitResult(out, tuple(lost), intercept)


def intercept_resend(
    qubits: Sequence[Qubit | None], rng: random.Random, fraction: float = 1.0
) -> tuple[list, AttackResult]:
    """Standard intercept-resend: random basis per qubit, forward the collapsed state."""
    out: list[Qubit | None] = []
    positions: list[int] = []
    bases: list[int] = []
    bits: list[int] = []
    certain: list[bool] = []
    for k, q in enumerate(qubits):
        if q is None or (fraction < 1.0 and rng.random() >= fraction):
            out.append(q)
            continue
        basis = rng.getrandbits(1)
        matched = basis == q.basis
        outcome = measure(q, basis, rng)
        out.append(encode(outcome, basis))
        positions.append(k)
        bases.append(basis)
        bits.append(outcome)
        certain.append(matched)
    result = AttackResult("intercept-resend", tuple(positions), tuple(bases), tuple(bits), tuple(certain))
    return out, result


def _measure_and_strip(
    kind: str,
    qubits: Sequence[Qubit | None],
    basis_plan: Sequence[int],
    mask: Sequence[int],
    rng: random.Random,
) -> tuple[AttackResult, list]:
    """Measure every position in a planned basis and XOR off a known mask."""
    out: list[Qubit | None] = []
    positions, bases, bits, certain = [], [], [], []
    for k, q in enumerate(qubits):
        if q is None:
            out.append(None)
            continue
        basis = basis_plan[k]
        matched = basis == q.basis
        outcome = measure(q, basis, rng)
        out.append(encode(outcome, basis))
        positions.append(k)
        bases.append(basis)
        bits.append(outcome ^ mask[k])
        certain.append(matched)
    return AttackResult(kind, tuple(positions), tuple(bases), tuple(bits), tuple(certain)), out


def preparer_attack(
    prep_values: Sequence[int],
    prep_bases: Sequence[int],
    qubits: Sequence[Qubit | None],
    rng: random.Random,
) -> tuple[AttackResult, list]:
    """First sender reads the second sender's bits out of the intercepted block.

    She measures position k in the basis she prepared it in and XORs off her
    own value bit. Exact whenever the second sender applied no basis mixing;
    otherwise only the half of the positions left in her basis decode.
    """
    return _measure_and_strip("preparer-insider", qubits, prep_bases, prep_values, rng)


def collusion_attack(
    known_values: dict[int, Sequence[int]],
    known_bases: dict[int, Sequence[int]],
    qubits: Sequence[Qubit | None],
    rng: random.Random,
) -> tuple[AttackResult, list]:
    """Pooled-knowledge interception of the block leaving the targeted sender.

    ``known_values``/``known_bases`` map sender index to that sender's
    per-position bit vector as shared with the interceptor. Missing strings
    are treated as all zeros (the interceptor's best standing guess), which
    degrades accuracy exactly as the missing randomness dictates.
    """
    length = len(qubits)
    basis_plan = [0] * length
    for bits in known_bases.values():
        basis_plan = [b ^ int(x) for b, x in zip(basis_plan, bits)]
    mask = [0] * length
    for bits in known_values.values():
        mask = [m ^ int(x) for m, x in zip(mask, bits)]
    return _measure_and_strip("colluder-insider", qubits, basis_plan, mask, rng)


def ordering_attack(
    announced_bases: Sequence[Sequence[int]] | None,
    qubits: Sequence[Qubit | None],
    rng: random.Random,
) -> tuple[AttackResult, list]:
    """Read the fully encoded block once every basis string is public.

    With all announcements in hand the interceptor measures each position in
    the combined basis and recovers the joint encoding bit everywhere, hence
    the whole raw key; with the strings withheld she can only guess bases.
    """
    length = len(qubits)
    if announced_bases is not None:
        basis_plan = [0] * length
        for bits in announced_bases:
            basis_plan = [b ^ int(x) for b, x in zip(basis_plan, bits)]
        kind = "ordering-violation"
    else:
        basis_plan = [rng.getrandbits(1) for _ in range(length)]
        kind = "ordering-violation-blind"
    result, out = _measure_and_strip(kind, qubits, basis_plan, [0] * length, rng)
    return result, out
