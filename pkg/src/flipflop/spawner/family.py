"""The spawner as a flip-flop family: discs of D1, D2 are plus members, discs of D3 minus members."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..core import (
    Accumulator,
    Chain,
    FlipFlopFamily,
    InvalidConfiguration,
    NotContained,
    Potential,
    RefinementUnavailable,
    parse_sign,
)
from ..enclosure import FixedInterval, as_fraction, Interval, down, log_interval, sqrt_interval, up
from .blender import cone_check, image_margins, strict_invariance_probe
from .discs import GraphDisc, family_spec, induced_apply, is_member, restrict_to_family
from .params import LEGS, SpawnerParams, validate

_PAD = Fraction(1, 2 ** 32)
_SIGN = np.asarray([0, 1, 1, -1], dtype=np.int8)


@dataclass(frozen=True)
class SpawnerMember:
    disc: GraphDisc
    family: str

    @property
    def leg(self) -> int:
        return int(self.family[1])

    def to_record(self) -> dict:
        return {"family": self.family, "disc": self.disc.to_record()}

    @classmethod
    def from_record(cls, rec) -> "SpawnerMember":
        return cls(GraphDisc.from_record(rec["disc"]), rec["family"])


@dataclass
class CubePoint:
    """A cube point together with the leg itinerary its orbit is certified to follow.

    ``xu``, ``xc``, ``xs`` are float coordinates; :meth:`exact` rebuilds the
    exact rational point from the exit anchor ``anchor_u`` by pulling back
    along the legs.
    """

    xu: tuple
    xc: float
    xs: tuple
    legs: np.ndarray
    anchor_u: tuple
    start: SpawnerMember

    def exact(self, params: SpawnerParams) -> tuple:
        x = list(self.anchor_u)
        for leg in self.legs[-2::-1]:
            a, c = params.au[leg - 1], params.cu[leg - 1]
            x = [ci + xi / ai for xi, ai, ci in zip(x, a, c)]
        return self.start.disc.point(x)

    def to_record(self) -> dict:
        return {
            "xu": list(self.xu), "xc": self.xc, "xs": list(self.xs),
            "anchor_u": [str(x) for x in self.anchor_u],
            "start": self.start.to_record(),
        }


def apply_map(params: SpawnerParams, point: tuple) -> tuple:
    """One induced step of an exact cube point; the leg is read off ``x^u``."""
    xu, xc, xs = point
    leg = leg_at(params, xu)
    a, c = params.au[leg - 1], params.cu[leg - 1]
    b, e = params.as_[leg - 1], params.es[leg - 1]
    yu = tuple(ai * (x - ci) for x, ai, ci in zip(xu, a, c))
    yc = params.center_slope(leg) * xc + params.center_offset(leg)
    ys = tuple(bi * x + ei for x, bi, ei in zip(xs, b, e))
    return yu, yc, ys


def leg_at(params: SpawnerParams, xu) -> int:
    for i in LEGS:
        box = params.leg_box(i)
        if all(lo <= x <= hi for x, lo, hi in zip(xu, box.lo, box.hi)):
            return i
    raise NotContained("leg", 0)


def disc_contains(disc: GraphDisc, point: tuple) -> bool:
    """Exact test that ``point`` lies on the graph ``disc``."""
    xu, xc, xs = point
    if not all(lo <= x <= hi for x, lo, hi in zip(xu, disc.domain.lo, disc.domain.hi)):
        return False
    yu, yc, ys = disc.point(xu)
    return yc == xc and tuple(ys) == tuple(xs)


class _LegAccumulator(Accumulator):
    """Counts plus and minus positions; the sum is ``(n+ - n-) log(lam) - n chi``."""

    def __init__(self, family: "SpawnerFamily", leg: int):
        self.f = family
        self.last = leg
        self.plus = 0
        self.n = 0

    def push(self, labels):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            return
        self.plus += int(self.last != 3)
        if labels.size > 1:
            self.plus += int(np.count_nonzero(labels[:-1] != 3))
        self.last = int(labels[-1])
        self.n += labels.size

    @property
    def length(self) -> int:
        return self.n

    def total(self) -> Interval:
        return self.f.sum_enclosure(2 * self.plus - self.n, self.n)


class SpawnerFamily(FlipFlopFamily):
    """Flip-flop adapter of the affine spawner with ``phi = +-log(lam) - chi`` per induced step.

    ``precision`` selects the disc arithmetic: ``None`` for exact rationals,
    an integer for a fixed-point grid of that many bits, or ``"auto"`` to size
    the grid from the predicted chain length (center errors grow by at most
    ``lam`` per step).
    """

    model_id = "spawner"

    def __init__(self, params: SpawnerParams, chi=0, precision="auto"):
        self.params = validate(params)
        cone = cone_check(params)
        if not cone.passed:
            raise InvalidConfiguration(f"configuration not flip-flop: cone margin {float(cone.min_margin):.6g}")
        im = image_margins(params)
        if not im.passed:
            raise InvalidConfiguration(
                f"configuration not flip-flop: image center margin {float(min(im.center_margin, im.saddle_margin)):.6g}"
            )
        self.log_lam = log_interval(params.lam)
        # padded so that float enclosures of all-plus averages stay strictly inside
        alpha = Fraction(self.log_lam.lo) * (1 - _PAD)
        beta1 = Fraction(self.log_lam.hi) * (1 + _PAD)
        self.gap = params.leg_gap()
        base = Potential(alpha=alpha, beta1=beta1, modulus=self.modulus)
        chi = as_fraction(chi)
        self.potential = base.shifted(chi) if chi != 0 else base
        self.chi = self.potential.chi
        m = min(params.min_expansion(i) for i in LEGS)
        self.expansion = (Interval(m) / sqrt_interval(Interval(1 + params.alpha1 ** 2))).lo
        diam = 0.0
        for name in ("D1", "D2", "D3"):
            box = family_spec(params, name).domain
            diam = max(diam, up(sum(w * w for w in box.widths)))
        self.base_diameter = sqrt_interval(Interval(diam) * Interval(1 + params.alpha0 ** 2)).hi
        self.precision = precision
        self.k = None if precision is None else (256 if precision == "auto" else int(precision))
        self._plus = self.log_lam - Interval(self.chi)
        self._minus = -self.log_lam - Interval(self.chi)

    # potential -------------------------------------------------------------

    def modulus(self, r: float) -> float:
        """``phi`` is constant on each leg, so it cannot vary below the gap between legs."""
        if r < float(self.gap):
            return 0.0
        return up(2 * Fraction(log_interval(self.params.lam).hi))

    def sum_enclosure(self, net_plus: int, n: int) -> Interval:
        """Enclosure of ``net_plus * log(lam) - n * chi``."""
        return self.log_lam * net_plus - Interval(self.chi) * n

    # bookkeeping -----------------------------------------------------------

    def prepare(self, T: int) -> None:
        if self.precision == "auto":
            bits = math.ceil(T * math.log2(float(self.params.lam)) * 1.001) + 2 * max(T, 1).bit_length() + 64
            self.k = max(128, bits)

    def describe(self) -> dict:
        return {"model": "spawner", "params": self.params.describe(), "chi": str(self.chi),
                "precision": self.precision if self.precision != "auto" else f"auto:{self.k}"}

    def sign_of(self, member: SpawnerMember) -> int:
        return 1 if member.family in ("D1", "D2") else -1

    def label_of(self, member: SpawnerMember) -> int:
        return member.leg

    def label_signs(self, labels) -> np.ndarray:
        return _SIGN[np.asarray(labels, dtype=np.int64)]

    def canonical_member(self, sign) -> SpawnerMember:
        name = "D1" if parse_sign(sign) > 0 else "D3"
        spec = family_spec(self.params, name)
        return SpawnerMember(GraphDisc.flat(spec.domain, 0, [0] * self.params.s, name), name)

    def _backend(self, disc: GraphDisc) -> GraphDisc:
        if self.k is None:
            return disc
        if isinstance(disc.c0, FixedInterval) and disc.c0.k == self.k:
            return disc
        return disc.lift(self.k)

    def step(self, member: SpawnerMember, sign: int) -> SpawnerMember:
        """Image of ``member`` cut down to a member of the requested sign."""
        p = self.params
        img = induced_apply(p, self._backend(member.disc), member.leg)
        for name in (("D1", "D2") if sign > 0 else ("D3",)):
            spec = family_spec(p, name)
            if is_member(p, img, name, spec):
                return SpawnerMember(img.with_domain(spec.domain, name), name)
        raise RefinementUnavailable(
            f"image of a {member.family} disc contains no certified {'plus' if sign > 0 else 'minus'} member; "
            "raise the precision"
        )

    def extend_many(self, member: SpawnerMember, signs):
        labels = np.empty(len(signs), dtype=np.int64)
        m = member
        for j, s in enumerate(signs):
            m = self.step(m, int(s))
            labels[j] = m.leg
        return labels, m

    def follow(self, member: SpawnerMember, legs) -> list:
        """Members along a prescribed leg sequence; raises :class:`NotContained` if one is missing."""
        p = self.params
        out = [member]
        m = member
        for leg in legs:
            name = f"D{int(leg)}"
            img = induced_apply(p, self._backend(m.disc), m.leg)
            res = restrict_to_family(p, img, name)
            m = SpawnerMember(res.disc, name)
            out.append(m)
        return out

    def replay(self, chain: Chain) -> list:
        """All members of ``chain``, recomputed from its entrance member and labels."""
        if self.label_of(chain.start) != int(chain.labels[0]):
            raise NotContained("start label", 1)
        return self.follow(chain.start, chain.labels[1:])

    def contains(self, outer: SpawnerMember, inner: SpawnerMember) -> bool:
        a, b = outer.disc, inner.disc
        if not b.domain.inside(a.domain):
            return False
        key = lambda x: (x.a, x.b, x.k) if isinstance(x, FixedInterval) else x  # noqa: E731
        flat = lambda d: [key(d.c0)] + [key(x) for x in d.cb] + [key(x) for x in d.s0] + [  # noqa: E731
            key(x) for r in d.S for x in r]
        return flat(a) == flat(b)

    def accumulator(self, member: SpawnerMember) -> Accumulator:
        return _LegAccumulator(self, member.leg)

    # points ----------------------------------------------------------------

    def entrance_point(self, chain: Chain, tail_rule: str = "repeat_last") -> CubePoint:
        p = self.params
        box = chain.exit.disc.domain
        last = chain.exit.leg
        if tail_rule == "repeat_last":
            a, c = p.au[last - 1], p.cu[last - 1]
            fixed = tuple(ai * ci / (ai - 1) for ai, ci in zip(a, c))
            anchor = fixed if all(lo <= x <= hi for x, lo, hi in zip(fixed, box.lo, box.hi)) else box.center
        elif tail_rule == "fixed_point":
            anchor = box.center
        else:
            raise ValueError(f"unknown tail rule {tail_rule!r}")
        legs = np.asarray(chain.labels, dtype=np.int8)
        x = np.asarray([float(v) for v in anchor])
        inv = {i: np.asarray([1 / float(a) for a in p.au[i - 1]]) for i in LEGS}
        cen = {i: np.asarray([float(c) for c in p.cu[i - 1]]) for i in LEGS}
        for leg in legs[-2::-1]:
            x = cen[int(leg)] + x * inv[int(leg)]
        c0, cb, s0, S = chain.start.disc.float_coefficients()
        xc = float(c0 + x @ cb)
        xs = tuple(float(v) for v in s0 + S @ x)
        return CubePoint(tuple(float(v) for v in x), xc, xs, legs, tuple(anchor), chain.start)

    def distance(self, a: CubePoint, b: CubePoint) -> float:
        pa = np.asarray(list(a.xu) + [a.xc] + list(a.xs))
        pb = np.asarray(list(b.xu) + [b.xc] + list(b.xs))
        return float(np.linalg.norm(pa - pb))

    def orbit_values(self, point: CubePoint, T: int) -> tuple[np.ndarray, np.ndarray]:
        legs = np.asarray(point.legs[:T], dtype=np.int64)
        if legs.size < T:
            raise ValueError("point itinerary shorter than the requested orbit")
        plus = legs != 3
        lo = np.where(plus, float(self._plus.lo), float(self._minus.lo))
        hi = np.where(plus, float(self._plus.hi), float(self._minus.hi))
        return lo, hi

    def certified_prefix(self, point: CubePoint, T: int):
        """Sums ``phi_n`` from the exact net count of plus steps, enclosed once per ``n``."""
        legs = np.asarray(point.legs[:T], dtype=np.int64)
        if legs.size < T:
            raise ValueError("point itinerary shorter than the requested orbit")
        net = np.concatenate([[0], np.cumsum(np.where(legs != 3, 1, -1))]).astype(np.float64)
        n = np.arange(T + 1, dtype=np.float64)
        L_lo, L_hi = float(self.log_lam.lo), float(self.log_lam.hi)
        chi_lo, chi_hi = down(self.chi), up(self.chi)
        a = np.where(net >= 0, net * L_lo, net * L_hi)
        b = np.where(net >= 0, net * L_hi, net * L_lo)
        # products of small integers with floats round once, then one subtraction
        a = np.nextafter(np.nextafter(a, -np.inf) - np.nextafter(n * chi_hi, np.inf), -np.inf)
        b = np.nextafter(np.nextafter(b, np.inf) - np.nextafter(n * chi_lo, -np.inf), np.inf)
        return a, b, net.astype(np.int64)


@dataclass(frozen=True)
class CenterExponent:
    coefficient: Fraction
    enclosure: Interval
    steps: int
    weight: int


def center_lyapunov(params: SpawnerParams, itinerary, weighted: bool = False) -> CenterExponent:
    """Average of ``+-log(lam)`` along a leg itinerary, per induced step or per base-map step."""
    legs = np.asarray(itinerary, dtype=np.int64)
    if legs.size == 0:
        raise ValueError("empty itinerary")
    net = int(np.count_nonzero(legs != 3)) * 2 - int(legs.size)
    weight = int(sum(params.returns[int(i) - 1] for i in legs)) if weighted else int(legs.size)
    coef = Fraction(net, weight)
    return CenterExponent(coef, log_interval(params.lam) * coef, int(legs.size), weight)


def as_flipflop_family(params: SpawnerParams, chi=0, precision="auto", probe_trials: int = 64,
                       seed: int = 0) -> SpawnerFamily:
    """Check cone invariance and family invariance at eps = 0, then build the adapter."""
    for name in ("D", "D3"):
        rep = strict_invariance_probe(params, name, 0, probe_trials, seed)
        if not rep.ok:
            raise InvalidConfiguration(f"configuration not flip-flop: {name} is not invariant ({rep.failures[:1]})")
    return SpawnerFamily(params, chi, precision)
