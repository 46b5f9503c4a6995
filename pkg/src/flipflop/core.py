"""Shared vocabulary: signs, members, chains, potentials and sign patterns."""

from __future__ import annotations

import abc
import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Hashable, Sequence

import numpy as np

from .enclosure import Interval, as_fraction

PLUS = 1
MINUS = -1


def sign_char(s: int) -> str:
    return "+" if s > 0 else "-"


def parse_sign(s) -> int:
    if s in (1, "+", "p", "plus"):
        return PLUS
    if s in (-1, "-", "m", "minus"):
        return MINUS
    raise ValueError(f"not a sign: {s!r}")


class FlipFlopError(Exception):
    """Base class for construction and certification failures."""


class RefinementUnavailable(FlipFlopError):
    pass


class TargetOvershoot(FlipFlopError):
    pass


class BudgetExceeded(FlipFlopError):
    def __init__(self, predicted: int, budget: int, scale: int | None = None):
        self.predicted = predicted
        self.budget = budget
        self.scale = scale
        where = f" at scale {scale}" if scale is not None else ""
        super().__init__(f"predicted length {predicted} exceeds budget {budget}{where}")


class ModulusTooWeak(FlipFlopError):
    pass


class DomainEscape(FlipFlopError):
    pass


class AmbiguousClassification(FlipFlopError):
    pass


class ToleranceUnreachable(FlipFlopError):
    pass


class NotContained(FlipFlopError):
    def __init__(self, predicate: str, deficit):
        self.predicate = predicate
        self.deficit = deficit
        super().__init__(f"{predicate} fails by {float(deficit):.6g}")


class InvalidConfiguration(FlipFlopError):
    pass


@dataclass(frozen=True)
class MemberRef:
    """Lightweight handle of a family member."""

    model: str
    handle: Hashable
    sign: int


@dataclass(frozen=True)
class Potential:
    """Bounds attached to a potential on a flip-flop family.

    ``alpha`` is a lower bound for ``phi`` on plus members (and for ``-phi``
    on minus members), ``beta1`` an upper bound for ``|phi|`` and ``modulus``
    maps a radius to a bound on the variation of ``phi`` at that scale.
    ``chi`` is the constant already subtracted from the underlying function.
    """

    alpha: Fraction
    beta1: Fraction
    modulus: Callable[[float], float]
    chi: Fraction = Fraction(0)

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidConfiguration(f"alpha must be positive, got {self.alpha}")
        if self.beta1 < self.alpha:
            raise InvalidConfiguration("beta1 below alpha")

    def shifted(self, chi) -> "Potential":
        """Bounds for ``phi - chi``; requires ``|chi| < alpha``."""
        chi = as_fraction(chi)
        if abs(chi) >= self.alpha:
            raise InvalidConfiguration(
                f"|chi| = {float(abs(chi)):.6g} must stay below alpha = {float(self.alpha):.6g}"
            )
        return replace(
            self,
            alpha=self.alpha - abs(chi),
            beta1=self.beta1 + abs(chi),
            chi=self.chi + chi,
        )


class Pattern(abc.ABC):
    """Infinite sign sequence indexed by block number."""

    @abc.abstractmethod
    def prefix(self, n: int) -> np.ndarray:
        """First ``n`` signs as an int8 array."""

    def __getitem__(self, b: int) -> int:
        return int(self.prefix(b + 1)[b])

    def horizon(self, L: int, limit: int = 1 << 20) -> int:
        """Shortest prefix (in blocks) containing every sign word of length ``L``."""
        need = 1 << L
        n = max(64, L)
        while n <= limit:
            seen = set()
            bits = (self.prefix(n) > 0).astype(np.int64)
            code = 0
            mask = need - 1
            for i, b in enumerate(bits):
                code = ((code << 1) | int(b)) & mask
                if i >= L - 1:
                    seen.add(code)
                    if len(seen) == need:
                        return i + 1
            n *= 2
        raise ValueError(f"pattern does not contain all words of length {L} within {limit} blocks")


class ChampernownePattern(Pattern):
    """All sign words listed by increasing length, plus before minus."""

    def __init__(self):
        self._cache = np.zeros(0, dtype=np.int8)

    def prefix(self, n: int) -> np.ndarray:
        if n > self._cache.size:
            out: list[int] = []
            L = 1
            while len(out) < max(n, 2 * self._cache.size):
                for w in itertools.product((PLUS, MINUS), repeat=L):
                    out.extend(w)
                L += 1
            self._cache = np.asarray(out, dtype=np.int8)
        return self._cache[:n]

    def __repr__(self):
        return "ChampernownePattern()"


class FixedPattern(Pattern):
    """A finite sign word repeated forever."""

    def __init__(self, signs: Sequence):
        s = [parse_sign(x) for x in signs]
        if not s:
            raise ValueError("empty pattern")
        self.word = np.asarray(s, dtype=np.int8)

    def prefix(self, n: int) -> np.ndarray:
        reps = -(-n // self.word.size)
        return np.tile(self.word, max(reps, 1))[:n]

    def __repr__(self):
        return f"FixedPattern({''.join(sign_char(x) for x in self.word)!r})"


@dataclass
class Chain:
    """A segment ``m_0, ..., m_T`` of a flip-flop family.

    Members are stored by label (one integer per position); the start and
    exit members are kept as full objects so long chains can be replayed.
    ``schedules`` maps a scale to its control times, ``block_pattern`` lists
    the pattern signs consulted, starting at block ``block_offset``.
    ``total`` encloses the Birkhoff sum over the entrance set.
    """

    model: str
    start: Any
    exit: Any
    labels: np.ndarray
    signs: np.ndarray
    total: Interval
    schedules: dict[int, np.ndarray] = field(default_factory=dict)
    block_pattern: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    block_offset: int = 0
    scale: int = 0

    @property
    def T(self) -> int:
        return int(self.labels.size) - 1

    @property
    def control_times(self) -> np.ndarray:
        if self.scale in self.schedules:
            return self.schedules[self.scale]
        return np.asarray([0, self.T], dtype=np.int64)

    def members(self) -> list[MemberRef]:
        return [MemberRef(self.model, int(a), int(s)) for a, s in zip(self.labels, self.signs)]

    def average(self) -> Interval:
        if self.T == 0:
            raise ValueError("empty chain has no average")
        return self.total / self.T


class Accumulator(abc.ABC):
    """Running certified sum over the cylinder of a growing chain."""

    @abc.abstractmethod
    def push(self, labels: np.ndarray) -> None:
        """Append positions (labels after the current last one)."""

    @abc.abstractmethod
    def total(self) -> Interval:
        """Enclosure of the Birkhoff sum over every point whose orbit follows the chain."""

    @property
    @abc.abstractmethod
    def length(self) -> int:
        ...


class FlipFlopFamily(abc.ABC):
    """A flip-flop family together with its potential.

    Members are identified by integer labels; the full member object can
    carry extra state (a graph disc, say) that evolves along a chain.
    """

    model_id: str
    potential: Potential
    expansion: float
    base_diameter: float

    @abc.abstractmethod
    def sign_of(self, member) -> int:
        ...

    @abc.abstractmethod
    def label_of(self, member) -> int:
        ...

    @abc.abstractmethod
    def canonical_member(self, sign: int):
        ...

    @abc.abstractmethod
    def extend_many(self, member, signs: Sequence[int]) -> tuple[np.ndarray, Any]:
        """Extend ``member`` along the target signs; returns (new labels, exit member)."""

    @abc.abstractmethod
    def accumulator(self, member) -> Accumulator:
        ...

    @abc.abstractmethod
    def entrance_point(self, chain: Chain, tail_rule: str = "repeat_last"):
        ...

    @abc.abstractmethod
    def orbit_values(self, point, T: int) -> tuple[np.ndarray, np.ndarray]:
        """Enclosures of ``phi`` at the first ``T`` orbit points."""

    def constants(self) -> tuple[float, float]:
        """Expansion factor on refined parts and a bound on member diameters."""
        return self.expansion, self.base_diameter

    def member_sign_label(self, member) -> tuple[int, int]:
        return self.sign_of(member), self.label_of(member)

    def label_signs(self, labels: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def trivial_chain(family: FlipFlopFamily, member) -> Chain:
    acc = family.accumulator(member)
    return Chain(
        model=family.model_id,
        start=member,
        exit=member,
        labels=np.asarray([family.label_of(member)], dtype=np.int64),
        signs=np.asarray([family.sign_of(member)], dtype=np.int8),
        total=acc.total(),
        schedules={},
    )


def extend(family: FlipFlopFamily, chain: Chain, target_sign) -> Chain:
    """Append one member of the requested sign to ``chain``."""
    s = parse_sign(target_sign)
    labels, exit_member = family.extend_many(chain.exit, [s])
    acc = family.accumulator(chain.start)
    all_labels = np.concatenate([chain.labels, labels])
    acc.push(all_labels[1:])
    return Chain(
        model=chain.model,
        start=chain.start,
        exit=exit_member,
        labels=all_labels,
        signs=np.concatenate([chain.signs, family.label_signs(labels)]),
        total=acc.total(),
        schedules={},
        block_pattern=np.concatenate([chain.block_pattern, np.asarray([s], dtype=np.int8)]),
        block_offset=chain.block_offset,
        scale=0,
    )
