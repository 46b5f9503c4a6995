"""Certified Birkhoff sums, schedule checks, exponent envelopes and word counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import AmbiguousClassification, FlipFlopFamily
from .enclosure import Interval, as_fraction, down, enclosed_cumsum


@dataclass
class PrefixSums:
    """Enclosures of ``phi_n`` for ``n = 0..T``.

    Exact sums are kept as integer numerators over ``den``; otherwise
    ``lo``/``hi`` are float bounds.
    """

    lo: np.ndarray
    hi: np.ndarray
    num: np.ndarray | None = None
    den: int | None = None

    @property
    def T(self) -> int:
        return self.lo.size - 1

    @property
    def exact(self) -> bool:
        return self.num is not None

    def value(self, n: int) -> Interval:
        if self.exact:
            q = Fraction(int(self.num[n]), self.den)
            return Interval(q, q)
        return Interval(float(self.lo[n]), float(self.hi[n]))

    @classmethod
    def from_exact(cls, num: np.ndarray, den: int) -> "PrefixSums":
        num = np.asarray(num, dtype=np.int64)
        lo = num / den
        return cls(np.nextafter(lo, -np.inf), np.nextafter(lo, np.inf), num, den)


def birkhoff_prefix(family: FlipFlopFamily, point, T: int) -> PrefixSums:
    """Running sums ``phi_n`` along the orbit of ``point`` for ``n <= T``."""
    exact = getattr(family, "exact_orbit_values", None)
    ev = exact(point, T) if exact is not None else None
    if ev is not None:
        vals, den = ev
        if vals.size and int(np.abs(vals).max()) * max(T, 1) >= 2 ** 62:
            raise OverflowError("exact sums would overflow 64-bit integers")
        num = np.concatenate([[0], np.cumsum(vals, dtype=np.int64)])
        return PrefixSums.from_exact(num, den)
    counted = getattr(family, "certified_prefix", None)
    if counted is not None:
        lo, hi, _ = counted(point, T)
        return PrefixSums(lo, hi)
    lo, hi = family.orbit_values(point, T)
    slo, shi = enclosed_cumsum(lo, hi)
    return PrefixSums(slo, shi)


@dataclass
class ControlReport:
    scale: int | None
    beta: Fraction
    t: int
    times: np.ndarray
    avg_lo: np.ndarray
    avg_hi: np.ndarray
    passed: bool
    failures: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "scale": self.scale,
            "beta": float(self.beta),
            "t": int(self.t),
            "gaps": int(max(self.times.size - 1, 0)),
            "max_gap": int(np.diff(self.times).max()) if self.times.size > 1 else 0,
            "max_abs_average": float(max(np.abs(self.avg_lo).max(), np.abs(self.avg_hi).max()))
            if self.avg_lo.size else 0.0,
            "passed": bool(self.passed),
            "failures": [list(map(str, f)) for f in self.failures[:20]],
        }


def verify_gap_control(sums: PrefixSums, times, beta, t: int, scale: int | None = None) -> ControlReport:
    """Check gaps ``<= t`` and every gap average enclosure inside ``[-beta, beta]``."""
    beta = beta if isinstance(beta, Fraction) else as_fraction(beta)
    P = np.asarray(times, dtype=np.int64)
    failures: list = []
    if P.size == 0 or P[0] != 0:
        failures.append((0, 0, "control times must start at 0"))
    if P.size and (P[-1] > sums.T or P.min() < 0):
        failures.append((int(P.min()), int(P[-1]), "control time outside the orbit"))
        P = P[(P >= 0) & (P <= sums.T)]
    if np.any(np.diff(P) <= 0):
        failures.append((0, 0, "control times not strictly increasing"))
        P = np.unique(P)
    gaps = np.diff(P)
    for j in np.nonzero(gaps > t)[0][:50]:
        failures.append((int(P[j]), int(P[j + 1]), f"gap {int(gaps[j])} exceeds t = {t}"))
    k, l = P[:-1], P[1:]
    if sums.exact:
        d = sums.num[l] - sums.num[k]
        avg = d / (sums.den * np.maximum(gaps, 1))
        avg_lo = np.nextafter(avg, -np.inf)
        avg_hi = np.nextafter(avg, np.inf)
        bn, bd, den = beta.numerator, beta.denominator, sums.den
        for j in range(d.size):
            if abs(int(d[j])) * bd > bn * den * int(gaps[j]):
                failures.append((int(k[j]), int(l[j]), "gap average exceeds beta"))
                if len(failures) > 100:
                    break
    else:
        g = np.maximum(gaps, 1).astype(np.float64)
        dlo = np.nextafter(sums.lo[l] - sums.hi[k], -np.inf)
        dhi = np.nextafter(sums.hi[l] - sums.lo[k], np.inf)
        avg_lo = np.nextafter(dlo / g, -np.inf)
        avg_hi = np.nextafter(dhi / g, np.inf)
        b = down(beta)
        bad = np.nonzero((avg_lo < -b) | (avg_hi > b))[0]
        for j in bad[:50]:
            failures.append((int(k[j]), int(l[j]), "gap average enclosure not inside [-beta, beta]"))
    return ControlReport(scale, beta, int(t), P, avg_lo, avg_hi, not failures, failures)


def _deepest_scale(ladder, n: int) -> int:
    k = 0
    for i in range(1, ladder.depth + 1):
        if ladder.t(i) <= n:
            k = i
    return k


def exponent_envelope(report, n: int) -> Fraction:
    """``beta_k + t_k * beta_1 / n`` with ``k`` the deepest scale having ``t_k <= n``."""
    if not 1 <= n <= report.T:
        raise ValueError("n must lie in [1, T]")
    ladder = report.ladder
    k = min(_deepest_scale(ladder, n), report.k_max)
    b1 = ladder.beta(1)
    bk = ladder.beta(k) if k >= 1 else b1
    return bk + Fraction(ladder.t(k)) * b1 / n


def schedule_envelope(report, n: int) -> Fraction:
    """Sharper bound using the recorded control times: ``min_i beta_i + (n - last_i(n)) beta_1 / n``."""
    if not 1 <= n <= report.T:
        raise ValueError("n must lie in [1, T]")
    b1 = report.ladder.beta(1)
    best = b1
    for i, sch in report.schedules.items():
        idx = int(np.searchsorted(sch.times, n, side="right")) - 1
        last = int(sch.times[idx])
        best = min(best, sch.beta + Fraction(n - last) * b1 / n)
    return best


def tau_itinerary(values, tau: int, alpha) -> np.ndarray:
    """Signs of the orbit at times ``0, tau, 2 tau, ...`` from per-step enclosures.

    ``values`` is either ``(lo, hi)`` float arrays or ``(numerators, den)``.
    """
    a = alpha if isinstance(alpha, Fraction) else as_fraction(alpha)
    first, second = values
    if isinstance(second, (int, np.integer)):
        num = np.asarray(first)[::tau]
        plus = num * a.denominator >= a.numerator * second
        minus = -num * a.denominator >= a.numerator * second
    else:
        lo = np.asarray(first)[::tau]
        hi = np.asarray(second)[::tau]
        af = float(a)
        # x >= a for a float x reduces to one float comparison
        if Fraction(af) < a:
            plus, minus = lo > af, -hi > af
        else:
            plus, minus = lo >= af, -hi >= af
    amb = np.nonzero(~(plus | minus))[0]
    if amb.size:
        raise AmbiguousClassification(f"orbit step {int(amb[0]) * tau} straddles the sign threshold")
    return np.where(plus, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class Census:
    L: int
    count: int
    complete: bool
    estimate: float


def word_census(itinerary, L: int, tau: int = 1) -> Census:
    """Distinct sign words of length ``L`` (sliding window) and ``log(count) / (tau L)``."""
    if L < 1:
        raise ValueError("L must be positive")
    bits = (np.asarray(itinerary) > 0).astype(np.int64)
    if bits.size < L:
        return Census(L, 0, False, 0.0)
    if L <= 62:
        w = np.lib.stride_tricks.sliding_window_view(bits, L)
        codes = w @ (1 << np.arange(L - 1, -1, -1, dtype=np.int64))
        count = int(np.unique(codes).size)
    else:
        count = len({tuple(bits[i:i + L]) for i in range(bits.size - L + 1)})
    est = math.log(count) / (tau * L) if count else 0.0
    return Census(L, count, count == 2 ** L, est)
