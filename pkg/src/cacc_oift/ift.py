"""Information flow topologies, degeneration scenarios and receiver status.

An IFT is the on/off pattern of the "send" function of every vehicle in a
platoon of ``N + 1`` vehicles, leader first.  Bit vectors are stored as
tuples of ints and serialize to compact ``'0'/'1'`` strings, e.g.
``"111000111000110"``.

Internally the optimizer works on integer bitmasks where bit ``i`` is
vehicle ``i``; :func:`to_mask` and :func:`from_mask` convert.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

CACC1, CACC2, CACC3, ACC = 1, 2, 3, 4
MODE_NAMES = {CACC1: "CACC1", CACC2: "CACC2", CACC3: "CACC3", ACC: "ACC"}


def _as_bits(bits) -> tuple:
    if isinstance(bits, str):
        if not bits or set(bits) - {"0", "1"}:
            raise ValidationError(f"bit string must contain only '0'/'1': {bits!r}")
        return tuple(int(c) for c in bits)
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ValidationError(f"bits must be 0 or 1: {bits!r}")
    return out


def to_mask(bits: Sequence[int]) -> int:
    """Little-endian bitmask: bit ``i`` is vehicle ``i``."""
    return sum(1 << i for i, b in enumerate(bits) if b)


def from_mask(mask: int, n_plus_1: int) -> tuple:
    return tuple((mask >> i) & 1 for i in range(n_plus_1))


def bits_to_str(bits: Iterable[int]) -> str:
    return "".join(str(int(b)) for b in bits)


@dataclass(frozen=True)
class Ift:
    """Send-function activation vector over the whole platoon."""

    activation: tuple

    def __post_init__(self):
        bits = _as_bits(self.activation)
        if len(bits) < 2:
            raise ValidationError("an IFT needs at least 2 vehicles (N >= 1)")
        object.__setattr__(self, "activation", bits)

    @classmethod
    def from_string(cls, s: str) -> "Ift":
        return cls(_as_bits(s.strip()))

    @classmethod
    def from_mask(cls, mask: int, n_plus_1: int) -> "Ift":
        return cls(from_mask(mask, n_plus_1))

    @property
    def n_plus_1(self) -> int:
        return len(self.activation)

    @property
    def mask(self) -> int:
        return to_mask(self.activation)

    @property
    def popcount(self) -> int:
        return sum(self.activation)

    @property
    def is_candidate(self) -> bool:
        """Leader sends and the last vehicle does not."""
        return self.activation[0] == 1 and self.activation[-1] == 0

    def __str__(self):
        return bits_to_str(self.activation)

    def __len__(self):
        return len(self.activation)


@dataclass(frozen=True)
class DegenerationScenario:
    """Realized sender outcomes for one control instant of ``parent``."""

    outcome: tuple
    parent: Ift

    def __post_init__(self):
        bits = _as_bits(self.outcome)
        if len(bits) != self.parent.n_plus_1:
            raise ValidationError("scenario and parent IFT differ in length")
        if any(o > p for o, p in zip(bits, self.parent.activation)):
            raise ValidationError(
                f"scenario {bits_to_str(bits)} is not a degeneration of {self.parent}"
            )
        object.__setattr__(self, "outcome", bits)

    @property
    def mask(self) -> int:
        return to_mask(self.outcome)

    def __str__(self):
        return bits_to_str(self.outcome)


@dataclass(frozen=True)
class ReceiverStatusVector:
    """Controller mode of every vehicle: 1..3 are CACC1..3, 4 is ACC."""

    status: tuple

    def __post_init__(self):
        status = tuple(int(z) for z in self.status)
        if any(z not in (1, 2, 3, 4) for z in status):
            raise ValidationError(f"receiver status entries must be in 1..4: {status}")
        if status[0] != ACC:
            raise ValidationError("the leader always runs in ACC status (4)")
        if len(status) > 1 and status[1] not in (CACC2, ACC):
            raise ValidationError("vehicle 1 can only be in status 2 or 4")
        object.__setattr__(self, "status", status)

    def __len__(self):
        return len(self.status)

    def __iter__(self):
        return iter(self.status)

    def __getitem__(self, i):
        return self.status[i]


def submasks(mask: int) -> np.ndarray:
    """All submasks of ``mask`` in canonical order.

    The activated bit positions, lowest first, are driven by a little-endian
    counter, so the first entry is always 0 and the last is ``mask`` itself.
    """
    positions = [i for i in range(mask.bit_length()) if (mask >> i) & 1]
    b = len(positions)
    codes = np.arange(1 << b, dtype=np.int64)
    out = np.zeros(1 << b, dtype=np.int64)
    for j, pos in enumerate(positions):
        out |= ((codes >> j) & 1) << pos
    return out


def enumerate_degenerations(ift: Ift) -> list:
    """Every degeneration scenario of ``ift`` exactly once, canonical order."""
    n = ift.n_plus_1
    return [
        DegenerationScenario(from_mask(int(m), n), ift) for m in submasks(ift.mask)
    ]


def status_array(masks, n_plus_1: int) -> np.ndarray:
    """Receiver status for an array of sender bitmasks, shape ``(S, N+1)``.

    Closed form of the sender-to-receiver map: a successful sender ``i``
    lowers the status of follower ``i+1`` by 2 and of follower ``i+2`` by 1.
    """
    masks = np.atleast_1d(np.asarray(masks, dtype=np.int64))
    bits = (masks[:, None] >> np.arange(n_plus_1)) & 1
    zeta = np.full((masks.size, n_plus_1), 4, dtype=np.int64)
    zeta[:, 1:] -= 2 * bits[:, :-1]
    zeta[:, 2:] -= bits[:, :-2]
    return zeta


def receiver_status(scenario) -> ReceiverStatusVector:
    """Controller mode of each vehicle under a realized sender outcome.

    Accepts a :class:`DegenerationScenario` or a plain bit sequence.
    """
    bits = scenario.outcome if isinstance(scenario, DegenerationScenario) else _as_bits(scenario)
    zeta = status_array([to_mask(bits)], len(bits))[0]
    return ReceiverStatusVector(tuple(int(z) for z in zeta))


def candidate_ifts(n_plus_1: int) -> list:
    """IFTs with the leader sending and the tail silent, interior bits free.

    Ordered by a little-endian counter over the interior positions.
    """
    if n_plus_1 < 2:
        raise ValidationError("platoon size must be at least 2")
    interior = (1 << (n_plus_1 - 1)) - 2  # bits 1..N-1
    return [Ift.from_mask(1 | int(m), n_plus_1) for m in submasks(interior)]


def candidate_masks(n_plus_1: int) -> np.ndarray:
    if n_plus_1 < 2:
        raise ValidationError("platoon size must be at least 2")
    return 1 | submasks((1 << (n_plus_1 - 1)) - 2)
