"""Full shift over a finite alphabet with step and long-range potentials.

The potential is ``phi(x) = v(x_0) + sum_{n>=1} c_n u(x_n) - chi``.  Plus
members are the 1-cylinders with ``v > 0``, minus members those with
``v < 0``; every member maps onto every other one, the shift doubles
distances in the metric ``2**-n`` and the 1-cylinders have diameter 1/2.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .core import (
    MINUS,
    PLUS,
    Accumulator,
    Chain,
    DomainEscape,
    FlipFlopFamily,
    InvalidConfiguration,
    Potential,
    RefinementUnavailable,
    ToleranceUnreachable,
    parse_sign,
)
from .enclosure import UNIT_ROUNDOFF, Interval, as_fraction, down, up

_MP_DPS = 40


def _mp_interval(z) -> Interval:
    f = float(z)
    return Interval(math.nextafter(math.nextafter(f, -math.inf), -math.inf),
                    math.nextafter(math.nextafter(f, math.inf), math.inf))


class Coefficients(abc.ABC):
    """Nonnegative summable weights ``c_1, c_2, ...``."""

    rel_err: float = 8 * UNIT_ROUNDOFF

    @abc.abstractmethod
    def array(self, M: int) -> np.ndarray:
        """Floats ``c_1..c_M`` (each within ``rel_err`` relative error)."""

    @abc.abstractmethod
    def tail(self, N: int) -> Interval:
        """Enclosure of ``sum_{n >= N} c_n`` for ``N >= 1``."""

    def progression(self, n0: int, step: int) -> Interval | None:
        """Enclosure of ``sum_k c_{n0 + k*step}``, or None if no closed form."""
        return None

    @property
    def total(self) -> Interval:
        return self.tail(1)

    def describe(self) -> dict:
        raise NotImplementedError


class PowerLawCoefficients(Coefficients):
    """``c_n = scale * (n + 1) ** -exponent``."""

    def __init__(self, exponent=2, scale=1):
        self.exponent = as_fraction(exponent)
        self.scale = as_fraction(scale)
        if self.exponent <= 1:
            raise InvalidConfiguration("power-law exponent must exceed 1")
        if self.scale < 0:
            raise InvalidConfiguration("negative coefficient scale")

    def array(self, M: int) -> np.ndarray:
        n = np.arange(2, M + 2, dtype=np.float64)
        return float(self.scale) * n ** (-float(self.exponent))

    def _zeta(self, a) -> Interval:
        with mpmath.workdps(_MP_DPS):
            p = mpmath.mpf(self.exponent.numerator) / self.exponent.denominator
            s = mpmath.mpf(self.scale.numerator) / self.scale.denominator
            return _mp_interval(s * mpmath.zeta(p, a))

    def tail(self, N: int) -> Interval:
        if N < 1:
            raise ValueError("tail index starts at 1")
        return self._zeta(N + 1)

    def progression(self, n0: int, step: int) -> Interval:
        with mpmath.workdps(_MP_DPS):
            p = mpmath.mpf(self.exponent.numerator) / self.exponent.denominator
            s = mpmath.mpf(self.scale.numerator) / self.scale.denominator
            a = mpmath.mpf(n0 + 1) / step
            return _mp_interval(s * mpmath.power(step, -p) * mpmath.zeta(p, a))

    def describe(self) -> dict:
        return {"kind": "power", "exponent": str(self.exponent), "scale": str(self.scale)}


class FiniteCoefficients(Coefficients):
    """Finitely many nonzero weights ``c_1..c_L``."""

    def __init__(self, values: Sequence = ()):
        self.values = tuple(as_fraction(c) for c in values)
        if any(c < 0 for c in self.values):
            raise InvalidConfiguration("coefficients must be nonnegative")

    def array(self, M: int) -> np.ndarray:
        out = np.zeros(M)
        k = min(M, len(self.values))
        out[:k] = [float(c) for c in self.values[:k]]
        return out

    def tail(self, N: int) -> Interval:
        s = sum(self.values[N - 1:], Fraction(0))
        return Interval(s, s)

    def progression(self, n0: int, step: int) -> Interval:
        s = sum(self.values[n0 - 1::step], Fraction(0)) if n0 >= 1 else None
        return Interval(s, s)

    def describe(self) -> dict:
        return {"kind": "finite", "values": [str(c) for c in self.values]}


def coefficients_from_record(rec: dict | None) -> Coefficients | None:
    if not rec:
        return None
    kind = rec.get("kind")
    if kind == "power":
        return PowerLawCoefficients(Fraction(rec["exponent"]), Fraction(rec.get("scale", "1")))
    if kind == "finite":
        return FiniteCoefficients([Fraction(c) for c in rec["values"]])
    raise InvalidConfiguration(f"unknown coefficient kind {kind!r}")


@dataclass(frozen=True)
class Word:
    """Eventually periodic sequence ``head`` followed by ``period`` repeated."""

    head: tuple
    period: tuple

    def __post_init__(self):
        if not self.period:
            raise ValueError("empty period")

    def symbol(self, n: int) -> int:
        h = len(self.head)
        if n < h:
            return self.head[n]
        return self.period[(n - h) % len(self.period)]

    def materialize(self, n: int) -> np.ndarray:
        h = np.asarray(self.head[:n], dtype=np.int64)
        if n <= len(self.head):
            return h
        rest = n - len(self.head)
        p = np.asarray(self.period, dtype=np.int64)
        reps = -(-rest // p.size)
        return np.concatenate([h, np.tile(p, reps)[:rest]])

    def shift(self, k: int = 1) -> "Word":
        h = len(self.head)
        if k <= h:
            return Word(self.head[k:], self.period)
        r = (k - h) % len(self.period)
        return Word((), self.period[r:] + self.period[:r])


def word_distance(a: Word, b: Word) -> float:
    n = max(len(a.head), len(b.head)) + math.lcm(len(a.period), len(b.period))
    x, y = a.materialize(n), b.materialize(n)
    diff = np.nonzero(x != y)[0]
    if diff.size == 0:
        return 0.0
    return 2.0 ** (-int(diff[0]))


class ShiftModel(FlipFlopFamily):
    """Shift-space flip-flop family.  Members and labels are symbol indices."""

    expansion = 2.0
    base_diameter = 0.5

    def __init__(self, symbols, v, u=None, coefficients: Coefficients | None = None,
                 chi=0, window: int = 1024):
        self.symbols = tuple(str(s) for s in symbols)
        self.v = tuple(as_fraction(x) for x in v)
        if len(self.v) != len(self.symbols):
            raise InvalidConfiguration("one step value per symbol required")
        if len(set(self.symbols)) != len(self.symbols):
            raise InvalidConfiguration("duplicate symbols")
        self.u = tuple(as_fraction(x) for x in (u if u is not None else [0] * len(self.v)))
        if len(self.u) != len(self.v):
            raise InvalidConfiguration("one long-range value per symbol required")
        if coefficients is not None and all(x == 0 for x in self.u):
            coefficients = None
        self.coefficients = coefficients
        self.window = int(window)
        if any(x == 0 for x in self.v):
            raise InvalidConfiguration("step values must be nonzero to assign signs")
        if not any(x > 0 for x in self.v) or not any(x < 0 for x in self.v):
            raise InvalidConfiguration("both signs must occur among the step values")
        self.umax = max(abs(x) for x in self.u)
        if self.coefficients is not None:
            spread = Interval(self.umax) * self.coefficients.total
        else:
            spread = Interval(Fraction(0))
        self.spread = spread
        vmin = min(abs(x) for x in self.v)
        vmax = max(abs(x) for x in self.v)
        alpha = Interval(vmin) - spread
        beta1 = Interval(vmax) + spread
        alpha_lo = alpha.lo if alpha.exact else Fraction(alpha.lo)
        beta_hi = beta1.hi if beta1.exact else Fraction(beta1.hi)
        if not alpha_lo > 0:
            raise InvalidConfiguration(
                "configuration is not a flip-flop: long-range weight exceeds the step gap "
                f"(alpha = {float(alpha_lo):.6g})"
            )
        base = Potential(alpha=alpha_lo, beta1=beta_hi, modulus=self.modulus)
        self.potential = base.shifted(chi) if as_fraction(chi) != 0 else base
        self.chi = self.potential.chi
        self.signs = np.asarray([PLUS if x > 0 else MINUS for x in self.v], dtype=np.int8)
        self._canonical = {PLUS: int(np.argmax(self.signs > 0)), MINUS: int(np.argmax(self.signs < 0))}
        self.local = self.coefficients is None
        self._lut = np.zeros(3, dtype=np.int64)
        self._lut[PLUS] = self._canonical[PLUS]
        self._lut[MINUS] = self._canonical[MINUS]
        self._cum_cache: tuple | None = None
        self._vals_f = np.asarray([float(x - self.chi) for x in self.v])
        self._vals_err = np.asarray([max(abs(float(x - self.chi) - (x - self.chi)), 0) for x in self.v], dtype=float)
        self._u_f = np.asarray([float(x) for x in self.u])

    model_id = "symbolic"

    def describe(self) -> dict:
        return {
            "model": "symbolic",
            "symbols": list(self.symbols),
            "v": [str(x) for x in self.v],
            "u": [str(x) for x in self.u],
            "coefficients": self.coefficients.describe() if self.coefficients else None,
            "chi": str(self.chi),
            "window": self.window,
        }

    def modulus(self, r: float) -> float:
        if r >= 1:
            return float(up(2 * self.potential.beta1)) if hasattr(self, "potential") else math.inf
        if self.coefficients is None:
            return 0.0
        if r <= 0:
            return 0.0
        N = max(1, math.ceil(-math.log2(r) - 1e-12))
        while 2.0 ** (-N) > r:
            N += 1
        return (Interval(2 * self.umax) * self.coefficients.tail(N)).hi

    def sign_of(self, member) -> int:
        return int(self.signs[member])

    def label_of(self, member) -> int:
        return int(member)

    def label_signs(self, labels: np.ndarray) -> np.ndarray:
        return self.signs[np.asarray(labels, dtype=np.int64)]

    def canonical_member(self, sign: int) -> int:
        return self._canonical[parse_sign(sign)]

    def member_by_symbol(self, name: str) -> int:
        try:
            return self.symbols.index(name)
        except ValueError:
            raise RefinementUnavailable(f"unknown symbol {name!r}") from None

    def extend_many(self, member, signs):
        s = np.asarray(signs, dtype=np.int64)
        if s.size == 0:
            return np.zeros(0, dtype=np.int64), member
        labels = self._lut[s]
        return labels, int(labels[-1])

    def contains(self, outer, inner) -> bool:
        return int(outer) == int(inner)

    def witness(self, chain: Chain, i: int) -> tuple[int, int]:
        """Two-cylinder inside ``m_i`` that the shift maps onto ``m_{i+1}``."""
        return int(chain.labels[i]), int(chain.labels[i + 1])

    # sums ------------------------------------------------------------------

    def accumulator(self, member) -> Accumulator:
        if self.local:
            return _LocalAccumulator(self, int(member))
        return _LongRangeAccumulator(self, int(member))

    def exact_values(self) -> tuple[np.ndarray, int] | None:
        """Integer numerators and common denominator of ``v - chi``, if local."""
        if not self.local:
            return None
        vals = [x - self.chi for x in self.v]
        den = math.lcm(*[x.denominator for x in vals])
        nums = np.asarray([int(x * den) for x in vals], dtype=np.int64)
        return nums, den

    def cumulative(self, M: int):
        """Floats ``C[m] = c_1 + ... + c_m`` (``C[0] = 0``), weighted sums and a uniform error."""
        if self._cum_cache is None or self._cum_cache[0].size < M + 1:
            size = max(M + 1, 2 * (self._cum_cache[0].size if self._cum_cache else 1024))
            c = self.coefficients.array(size - 1)
            C = np.concatenate([[0.0], np.cumsum(c)])
            n = np.arange(1, size, dtype=np.float64)
            W = np.concatenate([[0.0], np.cumsum(c * (n - 1))])
            tot = self.coefficients.total.hi
            errC = (size + 8) * UNIT_ROUNDOFF * 1.01 * tot
            errW = (size + 8) * UNIT_ROUNDOFF * 1.01 * float(W[-1]) + 1e-300
            self._cum_cache = (C, W, errC, errW)
        return self._cum_cache

    def uncertain_width(self, S: int) -> float:
        """Upper bound for ``sum_{j=2}^{S+1} tail(j)`` (unknown future beyond a cylinder)."""
        if S <= 0:
            return 0.0
        _, W, _, errW = self.cumulative(S)
        tailS = self.coefficients.tail(S + 1).hi
        return math.nextafter(float(W[S]) + errW + S * tailS * (1 + 4 * UNIT_ROUNDOFF), math.inf)

    # points ------------------------------------------------------------------

    def entrance_point(self, chain: Chain, tail_rule: str = "repeat_last") -> Word:
        head = tuple(int(a) for a in chain.labels[:-1])
        last = int(chain.labels[-1])
        if tail_rule == "repeat_last":
            return Word(head + (last,), (last,))
        if tail_rule == "fixed_point":
            return Word(head + (last,), (0,))
        raise ValueError(f"unknown tail rule {tail_rule!r}")

    def distance(self, a: Word, b: Word) -> float:
        return word_distance(a, b)

    def in_member(self, point: Word, member) -> bool:
        return point.symbol(0) == int(member)

    def step(self, point: Word) -> Word:
        return point.shift(1)

    def evaluate(self, point: Word, tol: float = 1e-12) -> Interval:
        return phi_eval(self, point, tol)

    def orbit_values(self, point: Word, T: int) -> tuple[np.ndarray, np.ndarray]:
        x = point.materialize(T + (self.window if not self.local else 0) + 1)
        base = self._vals_f[x[:T]]
        err = self._vals_err[x[:T]]
        if self.local:
            return np.nextafter(base - err, -np.inf), np.nextafter(base + err, np.inf)
        M = self.window
        c = self.coefficients.array(M)
        uv = self._u_f[x]
        conv = np.correlate(uv[1:T + M], c, mode="valid")[:T]
        tot = self.coefficients.total.hi
        rem = (Interval(self.umax) * self.coefficients.tail(M + 1)).hi if M > 0 else float(self.umax) * tot
        round_err = (M + 16) * UNIT_ROUNDOFF * 1.01 * float(self.umax) * tot
        mid = base + conv
        half = rem + round_err + err + 4 * UNIT_ROUNDOFF * np.abs(mid)
        lo = np.nextafter(mid - half, -np.inf)
        hi = np.nextafter(mid + half, np.inf)
        # every value also obeys the sign bounds of its cylinder
        v_lo = np.asarray([down(x - self.chi) for x in self.v])[x[:T]] - self.spread.hi
        v_hi = np.asarray([up(x - self.chi) for x in self.v])[x[:T]] + self.spread.hi
        return np.maximum(lo, np.nextafter(v_lo, -np.inf)), np.minimum(hi, np.nextafter(v_hi, np.inf))

    def exact_orbit_values(self, point: Word, T: int) -> tuple[np.ndarray, int] | None:
        ev = self.exact_values()
        if ev is None:
            return None
        nums, den = ev
        return nums[point.materialize(T)], den


class _LocalAccumulator(Accumulator):
    def __init__(self, model: ShiftModel, start: int):
        self.model = model
        self.counts = np.zeros(len(model.symbols), dtype=np.int64)
        self.last = start
        self._len = 0

    def push(self, labels):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            return
        self.counts[self.last] += 1
        if labels.size > 1:
            self.counts += np.bincount(labels[:-1], minlength=self.counts.size)
        self.last = int(labels[-1])
        self._len += labels.size

    @property
    def length(self) -> int:
        return self._len

    def total(self) -> Interval:
        s = sum((int(n) * (x - self.model.chi) for n, x in zip(self.counts, self.model.v)), Fraction(0))
        return Interval(s, s)


class _LongRangeAccumulator(Accumulator):
    """Cylinder sum ``sum_i v(x_i) + sum_m u(x_m) C(m)`` plus the unknown-future width."""

    def __init__(self, model: ShiftModel, start: int):
        self.model = model
        self.counts = np.zeros(len(model.symbols), dtype=np.int64)
        self.last = start
        self._len = 0
        self.dot = 0.0
        self.dot_err = 0.0

    def push(self, labels):
        labels = np.asarray(labels, dtype=np.int64)
        k = labels.size
        if k == 0:
            return
        self.counts[self.last] += 1
        if k > 1:
            self.counts += np.bincount(labels[:-1], minlength=self.counts.size)
        self.last = int(labels[-1])
        m0 = self._len + 1
        m1 = self._len + k
        C, _, errC, _ = self.model.cumulative(m1)
        uv = self.model._u_f[labels]
        seg = C[m0:m1 + 1]
        part = float(np.dot(uv, seg))
        mag = float(np.dot(np.abs(uv), seg))
        self.dot_err += (k + 2) * UNIT_ROUNDOFF * 1.01 * mag + float(self.model.umax) * k * errC
        self.dot += part
        self.dot_err += abs(self.dot) * UNIT_ROUNDOFF
        self._len = m1

    @property
    def length(self) -> int:
        return self._len

    def total(self) -> Interval:
        S = self._len
        steps = sum((int(n) * (x - self.model.chi) for n, x in zip(self.counts, self.model.v)), Fraction(0))
        if S == 0:
            return Interval(steps, steps)
        unc = float(self.model.umax) * self.model.uncertain_width(S) * (1 + 4 * UNIT_ROUNDOFF)
        half = unc + self.dot_err
        known = Interval(steps) + Interval.around(self.dot, half)
        clamp = Interval(steps) + Interval(-S * self.model.spread.hi, S * self.model.spread.hi)
        return known.to_float().intersect(clamp.to_float())


def make_shift_model(symbols=("p", "q"), v=(1, -1), u=None, coefficients=None,
                     chi=0, window: int = 1024) -> ShiftModel:
    """Build a shift flip-flop family; see :class:`ShiftModel`."""
    if isinstance(coefficients, dict):
        coefficients = coefficients_from_record(coefficients)
    return ShiftModel(symbols, v, u, coefficients, chi, window)


def phi_eval(model: ShiftModel, point: Word, tol: float = 1e-12) -> Interval:
    """Enclosure of ``phi`` at an eventually periodic point, of width at most ``tol``."""
    x0 = point.symbol(0)
    step = Interval(model.v[x0] - model.chi)
    if model.coefficients is None:
        return step
    coeffs = model.coefficients
    n1 = max(len(point.head), 1)
    p = len(point.period)
    head_terms = []
    cs = coeffs.array(n1)
    for n in range(1, n1):
        head_terms.append(float(cs[n - 1]) * float(model.u[point.symbol(n)]))
    head_sum = math.fsum(head_terms)
    head_err = (4 * coeffs.rel_err + 2 * UNIT_ROUNDOFF) * math.fsum(abs(t) for t in head_terms)
    total = Interval.around(head_sum, head_err)
    closed = [coeffs.progression(n1 + r, p) for r in range(p)]
    if all(c is not None for c in closed):
        for r in range(p):
            total = total + Interval(model.u[point.symbol(n1 + r)]) * closed[r]
    else:
        M = n1
        while (Interval(2 * model.umax) * coeffs.tail(M)).hi > tol / 2:
            M *= 2
            if M > 1 << 26:
                raise ToleranceUnreachable("coefficients decay too slowly for the requested tolerance")
        cm = coeffs.array(M)
        terms = [float(cm[n - 1]) * float(model.u[point.symbol(n)]) for n in range(n1, M)]
        s = math.fsum(terms)
        err = (4 * coeffs.rel_err + 2 * UNIT_ROUNDOFF) * math.fsum(abs(t) for t in terms)
        total = total + Interval.around(s, err) + Interval(model.umax) * coeffs.tail(M) * Interval(-1, 1)
    out = step + total
    if out.width > tol:
        raise ToleranceUnreachable(f"enclosure width {out.width:.3g} exceeds {tol:.3g}")
    return out


def check_membership(model: ShiftModel, point: Word, chain: Chain) -> None:
    """Raise if the orbit of ``point`` leaves the chain's members."""
    x = point.materialize(chain.T + 1)
    bad = np.nonzero(x != chain.labels)[0]
    if bad.size:
        raise DomainEscape(f"orbit leaves member at position {int(bad[0])}")
