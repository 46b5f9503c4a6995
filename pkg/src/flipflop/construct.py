"""Controlled segments: block length, distortion horizon, the recursive builder."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import (
    MINUS,
    PLUS,
    BudgetExceeded,
    Chain,
    ChampernownePattern,
    FlipFlopError,
    FlipFlopFamily,
    InvalidConfiguration,
    ModulusTooWeak,
    Pattern,
    Potential,
    RefinementUnavailable,
    TargetOvershoot,
    parse_sign,
)
from .enclosure import Interval, as_fraction, up


class NotPositive(FlipFlopError):
    pass


class ContainmentViolation(FlipFlopError):
    pass


def _floor_plus_one(x: Fraction) -> int:
    """Smallest integer strictly greater than ``x``."""
    return math.floor(x) + 1


def choose_tau(beta1, alpha, alpha1) -> int:
    """Smallest integer ``tau > 1`` with ``alpha1 < (alpha*(tau-1) - beta1) / tau``."""
    b, a, a1 = as_fraction(beta1), as_fraction(alpha), as_fraction(alpha1)
    if not (0 < a1 < a <= b):
        raise InvalidConfiguration("need 0 < alpha1 < alpha <= beta1")
    return max(2, _floor_plus_one((a + b) / (a - a1)))


def tau_inequality(beta1, alpha, alpha1, tau: int) -> bool:
    b, a, a1 = as_fraction(beta1), as_fraction(alpha), as_fraction(alpha1)
    return a1 * tau < a * (tau - 1) - b


def contraction_index(eta, lam, d0, modulus: Callable[[float], float], limit: int = 1 << 20) -> int:
    """Smallest ``n >= 0`` with ``modulus(lam**-n * d0) < eta/2`` (modulus assumed monotone)."""
    eta = as_fraction(eta)
    lam_f, d0_f = float(lam), float(d0)
    if lam_f <= 1:
        raise InvalidConfiguration("expansion must exceed 1")

    def radius(n: int) -> float:
        r = d0_f * lam_f ** (-n)
        return math.nextafter(math.nextafter(r, math.inf), math.inf)

    def ok(n: int) -> bool:
        return Fraction(modulus(radius(n))) < eta / 2

    if ok(0):
        return 0
    hi = 1
    while not ok(hi):
        hi *= 2
        if hi > limit or radius(hi) == 0.0:
            raise ModulusTooWeak(f"no radius brings the modulus below {float(eta) / 2:.3g}")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def distortion_horizon(eta, lam, d0, beta1, modulus: Callable[[float], float]) -> int:
    """Segment length beyond which entrance averages spread by less than ``eta``."""
    eta_f = as_fraction(eta)
    if eta_f <= 0:
        raise InvalidConfiguration("eta must be positive")
    n0 = contraction_index(eta_f, lam, d0, modulus)
    b = as_fraction(beta1)
    return max(n0 + 1, _floor_plus_one(4 * b * n0 / eta_f))


def block_constant(N: int, Nq: int, NGamma: int, m: int, alpha_q, alpha_gamma, C) -> Fraction:
    """``min{(N-Nq-m) a_q - (Nq+m) C, (N-NG-m) a_G - (NG+m) C}``; must be positive."""
    aq, ag, c = as_fraction(alpha_q), as_fraction(alpha_gamma), as_fraction(C)
    if N < max(Nq, NGamma) + m:
        raise InvalidConfiguration("N must be at least max(Nq, NGamma) + m")
    if aq <= 0 or ag <= 0:
        raise InvalidConfiguration("rates must be positive")
    a = min((N - Nq - m) * aq - (Nq + m) * c, (N - NGamma - m) * ag - (NGamma + m) * c)
    if a <= 0:
        raise NotPositive(f"block constant {a} is not positive; enlarge N")
    return a


def smallest_block_length(Nq, NGamma, m, alpha_q, alpha_gamma, C, limit: int = 10 ** 6) -> int:
    N = max(Nq, NGamma) + m
    while N <= limit:
        try:
            block_constant(N, Nq, NGamma, m, alpha_q, alpha_gamma, C)
            return N
        except NotPositive:
            N += 1
    raise NotPositive("no block length within limit")


RULES = ("sharp", "length", "count")


@dataclass(frozen=True)
class ScalePlan:
    """Constants of one scale.

    ``threshold`` is the first-run length to exceed, ``m_count``/``ell0`` and
    ``t_paper`` are the run counts and length bound of the counting recursion,
    ``t`` the gap bound actually certified at this scale.
    """

    k: int
    beta: Fraction
    alpha: Fraction
    t: int
    eta: Fraction | None = None
    horizon: int | None = None
    threshold: Fraction | None = None
    m_count: int | None = None
    ell0: int | None = None
    t_paper: int | None = None


@dataclass(frozen=True)
class ScaleLadder:
    tau: int
    betas: tuple
    alphas: tuple
    plans: tuple
    rule: str = "sharp"

    @property
    def depth(self) -> int:
        return len(self.plans)

    @property
    def ts(self) -> tuple:
        return (1,) + tuple(p.t for p in self.plans)

    def beta(self, k: int) -> Fraction:
        return self.betas[k - 1]

    def alpha(self, k: int) -> Fraction:
        return self.alphas[k - 1]

    def t(self, k: int) -> int:
        return self.ts[k]

    def plan(self, k: int) -> ScalePlan:
        return self.plans[k - 1]

    def describe(self) -> dict:
        return {
            "tau": self.tau,
            "rule": self.rule,
            "scales": [
                {
                    "k": p.k,
                    "beta": str(p.beta),
                    "alpha": str(p.alpha),
                    "t": p.t,
                    "eta": str(p.eta) if p.eta is not None else None,
                    "horizon": p.horizon,
                    "threshold": str(p.threshold) if p.threshold is not None else None,
                    "m_count": p.m_count,
                    "ell0": p.ell0,
                    "t_paper": p.t_paper,
                }
                for p in self.plans
            ],
        }


def _second_run_bound(Sm: int, bprev, aprev, bk, eta) -> int:
    """Length of opposite-sign runs after which the average has certainly fallen to ``bk - eta``."""
    return math.ceil(Sm * (bprev - bk + eta) / (aprev + bk - eta))


def make_ladder(potential: Potential, betas, alphas, expansion, diameter, rule: str = "sharp") -> ScaleLadder:
    """Validate a (beta_k, alpha_k) ladder and derive tau, eta_k and the per-scale run constants.

    ``rule`` selects how long the first run of a segment is and which gap
    bound is certified:

    * ``count``: ``m`` sub-segments with ``m > max(N, t, 3 t beta/(beta_k - alpha_k))``
      and ``t_k = (m + l0) t_{k-1}``;
    * ``length``: same ``t_k``, but the first run stops once its length exceeds
      that threshold (each sub-segment is at least one step, so this is never longer);
    * ``sharp``: length threshold, and ``t_k`` is the certified bound on the
      segment length (rounded up to a multiple of ``t_{k-1}``).
    """
    if rule not in RULES:
        raise InvalidConfiguration(f"unknown rule {rule!r}")
    betas = tuple(Fraction(b) if isinstance(b, float) else as_fraction(b) for b in betas)
    alphas = tuple(Fraction(a) if isinstance(a, float) else as_fraction(a) for a in alphas)
    if not betas or len(betas) != len(alphas):
        raise InvalidConfiguration("ladder needs matching beta and alpha sequences")
    if betas[0] < potential.beta1:
        raise InvalidConfiguration("beta_1 must bound |phi|")
    if not alphas[0] < potential.alpha:
        raise InvalidConfiguration("alpha_1 must be below the separation constant")
    seq = [x for pair in zip(betas, alphas) for x in pair]
    if any(not a > b for a, b in zip(seq, seq[1:])) or seq[-1] <= 0:
        raise InvalidConfiguration("ladder must satisfy beta_1 > alpha_1 > beta_2 > ... > 0")
    tau = choose_tau(betas[0], potential.alpha, alphas[0])
    plans = [ScalePlan(1, betas[0], alphas[0], tau, t_paper=tau)]
    for k in range(2, len(betas) + 1):
        bk, ak = betas[k - 1], alphas[k - 1]
        bprev, aprev = betas[k - 2], alphas[k - 2]
        tprev = plans[-1].t
        eta = (bk - ak) / 4
        N = distortion_horizon(eta, expansion, diameter, betas[0], potential.modulus)
        theta = max(Fraction(N), Fraction(tprev), 3 * tprev * bprev / (bk - ak))
        m = _floor_plus_one(theta)
        ell0 = _floor_plus_one(m * tprev * bprev / aprev)
        t_paper = (m + ell0) * tprev
        if rule == "sharp":
            Sm = math.floor(theta) + tprev
            L = Sm + _second_run_bound(Sm, bprev, aprev, bk, eta) + tprev
            t = min(t_paper, -(-L // tprev) * tprev)
        else:
            t = t_paper
        plans.append(ScalePlan(k, bk, ak, t, eta, N, theta, m, ell0, t_paper))
    return ScaleLadder(tau, betas, alphas, tuple(plans), rule)


def default_ladder(potential: Potential, k_max: int, expansion, diameter, rule: str = "sharp") -> ScaleLadder:
    """beta_1 = sup|phi|, alpha_1 = min(beta_1, alpha)/2, then beta_{k+1} = alpha_k/2, alpha_k = beta_k/2."""
    betas = [potential.beta1]
    alphas = [min(potential.beta1, potential.alpha) / 2]
    for _ in range(1, k_max):
        betas.append(alphas[-1] / 2)
        alphas.append(betas[-1] / 2)
    return make_ladder(potential, betas, alphas, expansion, diameter, rule)


def predicted_length(ladder: ScaleLadder, k: int) -> int:
    """Upper bound on the length of a scale-``k`` segment built from ``ladder``."""
    if ladder.rule == "sharp":
        return ladder.t(k)
    L = ladder.tau
    for j in range(2, k + 1):
        p = ladder.plan(j)
        if ladder.rule == "count":
            Sm = p.m_count * L
        else:
            Sm = math.floor(p.threshold) + L
        X = _second_run_bound(Sm, ladder.beta(j - 1), ladder.alpha(j - 1), p.beta, p.eta)
        L = min(p.t, Sm + X + L)
    return L


@dataclass
class CandidateLog:
    """Averages tried while hitting the target at one segment (first entry: end of the first run)."""

    k: int
    sign: int
    start: int
    lengths: list = field(default_factory=list)
    totals: list = field(default_factory=list)
    ell: int = 0
    m: int = 0


class _Builder:
    def __init__(self, family: FlipFlopFamily, pattern: Pattern, ladder: ScaleLadder,
                 member, offset: int, top: int, budget: int | None, logs: list | None):
        self.f = family
        self.pattern = pattern
        self.ladder = ladder
        self.tau = ladder.tau
        self.m_rule = ladder.rule
        self.budget = budget
        self.logs = logs
        self.top = top
        self.exit = member
        self.block = offset
        self.pos = 0
        self.chunks: list[np.ndarray] = []
        self.stack: list = []
        self.bounds = {i: [0] for i in range(2, top)}
        self._signs = pattern.prefix(offset + 1024)
        self.alpha1 = ladder.alpha(1)
        first = self._sign(offset)
        if family.sign_of(member) != first:
            raise InvalidConfiguration(
                f"start member has sign {family.sign_of(member)} but the pattern begins with {first}"
            )

    def _sign(self, b: int) -> int:
        if b >= self._signs.size:
            self._signs = self.pattern.prefix(2 * b + 2)
        return int(self._signs[b])

    def tau_block(self, body: int) -> tuple[Interval, int]:
        tau = self.tau
        nxt = self._sign(self.block + 1)
        signs = [body] * (tau - 1) + [nxt]
        acc = self.f.accumulator(self.exit)
        labels, ex = self.f.extend_many(self.exit, signs)
        acc.push(labels)
        tot = acc.total()
        bound = self.alpha1 * tau
        if (body > 0 and not tot.lo >= bound) or (body < 0 and not tot.hi <= -bound):
            raise TargetOvershoot(f"tau-block average not certified beyond alpha_1 at position {self.pos}")
        for a in self.stack:
            a.push(labels)
        self.chunks.append(labels)
        self.pos += tau
        self.block += 1
        self.exit = ex
        if self.budget is not None and self.pos > self.budget:
            raise BudgetExceeded(self.pos, self.budget)
        return tot, tau

    def segment(self, k: int, sign: int) -> tuple[Interval, int]:
        if k == 1:
            return self.tau_block(sign)
        plan = self.ladder.plan(k)
        acc = self.f.accumulator(self.exit)
        self.stack.append(acc)
        start = self.pos
        log = CandidateLog(k, sign, start) if self.logs is not None else None
        m = 0
        while True:
            self.segment(k - 1, sign)
            m += 1
            S = self.pos - start
            if self.m_rule == "count":
                if m >= plan.m_count:
                    break
            elif S > plan.threshold:
                break
        if sign > 0:
            tlo, thi = plan.alpha + plan.eta, plan.beta - plan.eta
            wlo, whi = plan.alpha, plan.beta
        else:
            tlo, thi = -plan.beta + plan.eta, -plan.alpha - plan.eta
            wlo, whi = -plan.beta, -plan.alpha
        if log is not None:
            log.m = m
            t0 = acc.total()
            log.lengths.append(self.pos - start)
            log.totals.append(t0)
        ell = 0
        while True:
            self.segment(k - 1, -sign)
            ell += 1
            S = self.pos - start
            if S > plan.t or (self.m_rule == "count" and ell > plan.ell0):
                raise TargetOvershoot(f"scale {k}: no target hit within the length bound {plan.t}")
            tot = acc.total()
            avg = tot / S
            if log is not None:
                log.lengths.append(S)
                log.totals.append(tot)
            if avg.intersects(tlo, thi):
                if avg.subset_of(wlo, whi):
                    break
                raise TargetOvershoot(
                    f"scale {k}: average enclosure [{float(avg.lo):.6g}, {float(avg.hi):.6g}] "
                    "meets the target but is not certified inside the window; tighten the arithmetic"
                )
            beyond = avg.lo > thi if sign > 0 else avg.hi < tlo
            if not beyond:
                raise TargetOvershoot(f"scale {k}: average jumped across the target window")
        self.stack.pop()
        if log is not None:
            log.ell = ell
            self.logs.append(log)
        if k < self.top:
            self.bounds[k].append(self.pos)
        return acc.total(), self.pos - start

    def chain(self, start_member, total: Interval, offset: int) -> Chain:
        f = self.f
        labels = np.concatenate([np.asarray([f.label_of(start_member)], dtype=np.int64)] + self.chunks)
        T = self.pos
        schedules = {1: np.arange(0, T + 1, self.tau, dtype=np.int64)}
        for i, b in self.bounds.items():
            schedules[i] = np.asarray(b, dtype=np.int64)
        schedules[self.top] = np.asarray([0, T], dtype=np.int64)
        nblocks = T // self.tau
        return Chain(
            model=f.model_id,
            start=start_member,
            exit=self.exit,
            labels=labels,
            signs=f.label_signs(labels),
            total=total,
            schedules=schedules,
            block_pattern=self.pattern.prefix(offset + nblocks)[offset:].copy(),
            block_offset=offset,
            scale=self.top,
        )


def tau_block(family: FlipFlopFamily, member, first_sign, body_sign, exit_sign=None,
              ladder: ScaleLadder | None = None, tau: int | None = None,
              alpha1=None) -> Chain:
    """A block of ``tau`` steps: entrance sign ``first_sign``, then ``tau - 1`` steps of ``body_sign``.

    The last appended member takes ``exit_sign`` (default: ``body_sign``) so
    the next block can start with the sign its pattern asks for.
    """
    first, body = parse_sign(first_sign), parse_sign(body_sign)
    ex = body if exit_sign is None else parse_sign(exit_sign)
    if family.sign_of(member) != first:
        raise ValueError("member sign differs from the requested first sign")
    if ladder is not None:
        tau, a1 = ladder.tau, ladder.alpha(1)
    else:
        if tau is None:
            raise ValueError("need a ladder or an explicit tau")
        a1 = as_fraction(alpha1) if alpha1 is not None else None
    acc = family.accumulator(member)
    labels, exit_member = family.extend_many(member, [body] * (tau - 1) + [ex])
    acc.push(labels)
    tot = acc.total()
    if a1 is not None:
        bound = a1 * tau
        if (body > 0 and not tot.lo >= bound) or (body < 0 and not tot.hi <= -bound):
            raise TargetOvershoot("tau-block average is not certified beyond alpha_1")
    all_labels = np.concatenate([[family.label_of(member)], labels]).astype(np.int64)
    return Chain(
        model=family.model_id,
        start=member,
        exit=exit_member,
        labels=all_labels,
        signs=family.label_signs(all_labels),
        total=tot,
        schedules={1: np.asarray([0, tau], dtype=np.int64)},
        block_pattern=np.asarray([first], dtype=np.int8),
        scale=1,
    )


def concatenate(family: FlipFlopFamily, a: Chain, b: Chain) -> Chain:
    """Join ``a`` and ``b``; the entrance member of ``b`` must sit inside the exit of ``a``."""
    if not family.contains(a.exit, b.start):
        raise ContainmentViolation("entrance of the second chain is not inside the exit of the first")
    Ta = a.T
    schedules = {}
    for i in sorted(set(a.schedules) & set(b.schedules)):
        schedules[i] = np.union1d(a.schedules[i], b.schedules[i] + Ta).astype(np.int64)
    scales = set(schedules)
    scale = min(a.scale, b.scale)
    if scale not in scales and scales:
        scale = min(scales)
    return Chain(
        model=a.model,
        start=a.start,
        exit=b.exit,
        labels=np.concatenate([a.labels, b.labels[1:]]),
        signs=np.concatenate([a.signs, b.signs[1:]]),
        total=a.total + b.total,
        schedules=schedules,
        block_pattern=np.concatenate([a.block_pattern, b.block_pattern]),
        block_offset=a.block_offset,
        scale=scale,
    )


def build_controlled_segment(family: FlipFlopFamily, member, pattern: Pattern, ladder: ScaleLadder,
                             k: int, sign=PLUS, offset: int = 0, budget: int | None = None,
                             logs: list | None = None) -> Chain:
    """Scale-``k`` segment of the given sign following ``pattern`` from block ``offset``."""
    sign = parse_sign(sign)
    if not 1 <= k <= ladder.depth:
        raise InvalidConfiguration(f"scale {k} outside the ladder (depth {ladder.depth})")
    if budget is not None:
        pred = predicted_length(ladder, k)
        if pred > budget:
            raise BudgetExceeded(pred, budget, k)
    prepare = getattr(family, "prepare", None)
    if prepare is not None:
        prepare(predicted_length(ladder, k))
    b = _Builder(family, pattern, ladder, member, offset, k, budget, logs)
    total, _ = b.segment(k, sign)
    return b.chain(member, total, offset)


@dataclass
class ScaleSchedule:
    scale: int
    beta: Fraction
    t: int
    times: np.ndarray


@dataclass
class ControlledOrbitReport:
    chain: Chain
    ladder: ScaleLadder
    schedules: dict
    point: object
    certified: bool
    reports: dict
    k_max: int
    logs: list = field(default_factory=list)

    @property
    def T(self) -> int:
        return self.chain.T


def build_all_scales(family: FlipFlopFamily, member, pattern: Pattern | None, ladder: ScaleLadder,
                     k_max: int, budget: int | None = None, tail_rule: str = "repeat_last", keep_logs: bool = False,
                     certify: bool = True) -> ControlledOrbitReport:
    """Plus segment at scale ``k_max`` with its entrance point certified at every scale."""
    from .analysis import birkhoff_prefix, verify_gap_control

    pattern = pattern or ChampernownePattern()
    if member is None:
        member = family.canonical_member(pattern[0])
    logs = [] if keep_logs else None
    chain = build_controlled_segment(family, member, pattern, ladder, k_max, PLUS, 0, budget, logs)
    point = family.entrance_point(chain, tail_rule)
    schedules = {
        i: ScaleSchedule(i, ladder.beta(i), ladder.t(i), chain.schedules[i]) for i in range(1, k_max + 1)
    }
    reports = {}
    certified = False
    if certify:
        sums = birkhoff_prefix(family, point, chain.T)
        for i, sch in schedules.items():
            reports[i] = verify_gap_control(sums, sch.times, sch.beta, sch.t, scale=i)
        certified = all(r.passed for r in reports.values())
    return ControlledOrbitReport(chain, ladder, schedules, point, certified, reports, k_max, logs or [])
