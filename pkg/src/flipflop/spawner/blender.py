"""Blender certification: cone invariance, image margins, invariance probes, safety domains."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..core import FlipFlopError, NotContained
from .discs import (
    GraphDisc,
    delta_upper_bound,
    family_spec,
    induced_apply,
    leg_of,
    restrict,
    restrict_to_family,
)
from .params import LEGS, Box, SpawnerParams, center_map, validate


class ConeNotInvariant(FlipFlopError):
    def __init__(self, leg: int, margin: Fraction):
        self.leg = leg
        self.margin = margin
        super().__init__(f"cone field not strictly invariant on leg {leg} (margin {float(margin):.6g})")


def cone_ratio(lam, au_min, as_norm, alpha1) -> Fraction:
    """``max(lam, ||A^s||) alpha1 / m(A^u)``: slope bound of an image of the alpha1-cone."""
    return max(Fraction(lam), Fraction(as_norm)) * Fraction(alpha1) / Fraction(au_min)


@dataclass
class ConeReport:
    ratios: dict
    margins: dict
    min_margin: Fraction
    passed: bool
    uniform_margin: Fraction

    def summary(self) -> dict:
        return {
            "ratios": {str(k): str(v) for k, v in self.ratios.items()},
            "margins": {str(k): str(v) for k, v in self.margins.items()},
            "min_margin": str(self.min_margin),
            "min_margin_float": float(self.min_margin),
            "uniform_margin": str(self.uniform_margin),
            "passed": self.passed,
        }


def cone_check(p: SpawnerParams, raise_on_failure: bool = False) -> ConeReport:
    """Certify that each leg maps the alpha1-cone strictly into the alpha0-cone.

    The per-leg ratio uses the actual center derivative (``lam`` or ``1/lam``);
    ``uniform_margin`` is the cruder bound with ``lam`` on every leg.
    """
    ratios, margins = {}, {}
    for i in LEGS:
        r = max(p.center_slope(i), p.s_norm(i)) * p.alpha1 / p.min_expansion(i)
        ratios[i] = r
        margins[i] = p.alpha0 - r
    uni = min(p.alpha0 - cone_ratio(p.lam, p.min_expansion(i), p.s_norm(i), p.alpha1) for i in LEGS)
    low = min(margins.values())
    passed = low > 0
    if raise_on_failure and not passed:
        leg = min(margins, key=margins.get)
        raise ConeNotInvariant(leg, margins[leg])
    return ConeReport(ratios, margins, low, passed, uni)


@dataclass
class ImageMargins:
    images: dict
    lower: dict
    upper: dict
    center_margin: Fraction
    saddle_margin: Fraction
    stated_formula: Fraction
    printed_interval: tuple

    @property
    def passed(self) -> bool:
        return self.center_margin > 0 and self.saddle_margin > 0

    def summary(self) -> dict:
        return {
            "images": {k: [str(a), str(b)] for k, (a, b) in self.images.items()},
            "lower_margin": {k: str(v) for k, v in self.lower.items()},
            "upper_margin": {k: str(v) for k, v in self.upper.items()},
            "center_margin": str(self.center_margin),
            "saddle_margin": str(self.saddle_margin),
            "min((lam-1)/2, (6-5lam)/8)": str(self.stated_formula),
            "printed_image_interval": [str(x) for x in self.printed_interval],
            "passed": self.passed,
        }


def image_margins(p: SpawnerParams) -> ImageMargins:
    """Exact center images of D1, D2 (blender legs) and D3 (saddle leg) and their margins in [-1/4, 1/4]."""
    q = Fraction(1, 4)
    images, lower, upper = {}, {}, {}
    for name in ("D1", "D2", "D3"):
        spec = family_spec(p, name)
        i = leg_of(name)
        a, b = (center_map(i, p.lam, x) for x in spec.center)
        images[name] = (min(a, b), max(a, b))
        lower[name] = images[name][0] + q
        upper[name] = q - images[name][1]
    blender = min(min(lower[n], upper[n]) for n in ("D1", "D2"))
    lam = p.lam
    stated = min((lam - 1) / 2, (6 - 5 * lam) / 8)
    printed = (-q + (lam - 1) / 2, q - (6 - 3 * lam) / 8)
    return ImageMargins(images, lower, upper, blender, min(lower["D3"], upper["D3"]), stated, printed)


# invariance probes ----------------------------------------------------------


def _rat(x: float, den: int = 1 << 24) -> Fraction:
    return Fraction(int(round(x * den)), den)


def _random_slopes(rng, p: SpawnerParams, budget: Fraction) -> tuple[tuple, tuple]:
    """Random linear part with squared Frobenius norm at most ``budget**2``."""
    n = p.u * (1 + p.s)
    while True:
        v = rng.normal(size=n)
        v *= rng.uniform() ** (1 / n) / max(np.linalg.norm(v), 1e-300) * float(budget) * 0.999
        r = [_rat(x) for x in v]
        if sum(x * x for x in r) <= budget ** 2:
            cb = tuple(r[: p.u])
            S = tuple(tuple(r[p.u * (k + 1): p.u * (k + 2)]) for k in range(p.s))
            return cb, S


def random_member(rng, p: SpawnerParams, name: str) -> GraphDisc:
    """A random affine member of family ``name``."""
    spec = family_spec(p, name)
    cb, S = _random_slopes(rng, p, spec.lipschitz)
    box = spec.domain
    mid = box.center
    half = [w / 2 for w in box.widths]

    def height(coeffs, lo, hi):
        w = sum((abs(a) * h for a, h in zip(coeffs, half)), Fraction(0))
        a, b = lo + w, hi - w
        t = _rat(rng.uniform())
        v = a + t * (b - a)
        return v - sum((x * m for x, m in zip(coeffs, mid)), Fraction(0))

    c0 = height(cb, *spec.center)
    s0 = tuple(height(S[k], spec.s_box.lo[k], spec.s_box.hi[k]) for k in range(p.s))
    return GraphDisc(box, c0, cb, s0, S, name)


def perturb(rng, p: SpawnerParams, disc: GraphDisc, size: float) -> GraphDisc:
    """Move, tilt (within the alpha1-cone) and dilate ``disc`` by amounts of order ``size``."""
    f = lambda: _rat(rng.uniform(-1, 1) * size)  # noqa: E731
    box = disc.domain
    mid = box.center
    rho = 1 + f()
    dom = Box(tuple(m + rho * (a - m) for a, m in zip(box.lo, mid)),
              tuple(m + rho * (b - m) for b, m in zip(box.hi, mid)))
    while True:
        cb = tuple(x + f() for x in disc.cb)
        S = tuple(tuple(x + f() for x in row) for row in disc.S)
        if sum(x * x for x in cb) + sum(x * x for r in S for x in r) < p.alpha1 ** 2:
            break
        size /= 2
    # heights shift so the value at the domain center moves by a small offset
    c_mid = disc.c0 + sum((a * m for a, m in zip(disc.cb, mid)), Fraction(0))
    c0 = c_mid + f() - sum((a * m for a, m in zip(cb, mid)), Fraction(0))
    s0 = []
    for k in range(disc.s):
        v = disc.s0[k] + sum((a * m for a, m in zip(disc.S[k], mid)), Fraction(0))
        s0.append(v + f() - sum((a * m for a, m in zip(S[k], mid)), Fraction(0)))
    return GraphDisc(dom, c0, cb, tuple(s0), S, None)


def _image_in_family(p: SpawnerParams, disc: GraphDisc, legs) -> tuple[bool, Fraction | None, str]:
    """Best margin of ``F(disc cut to the leg domain)`` in the family ``D`` over the given legs."""
    best, why = None, ""
    for i in legs:
        dom = disc.domain.intersect(family_spec(p, f"D{i}").domain)
        if dom is None:
            why = f"leg {i}: disc misses the leg"
            continue
        try:
            piece = restrict(disc, dom)
            res = restrict_to_family(p, induced_apply(p, piece, i), "D")
        except NotContained as e:
            why = f"leg {i}: {e}"
            continue
        m = res.min_margin
        if res.margins["lipschitz_sq"] < 0:
            continue
        if best is None or m > best:
            best = m
    return best is not None, best, why


@dataclass
class ProbeReport:
    family: str
    eps: Fraction
    trials: int
    passed: int
    min_margin: Fraction | None
    max_delta: float
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed == self.trials

    def summary(self) -> dict:
        return {
            "family": self.family,
            "eps": str(self.eps),
            "eps_float": float(self.eps),
            "trials": self.trials,
            "passed": self.passed,
            "min_margin": str(self.min_margin) if self.min_margin is not None else None,
            "min_margin_float": float(self.min_margin) if self.min_margin is not None else None,
            "max_delta": self.max_delta,
            "failures": self.failures[:10],
            "ok": self.ok,
        }


def strict_invariance_probe(p: SpawnerParams, family: str, eps, trials: int = 1000, seed: int = 0) -> ProbeReport:
    """Sample discs within disc distance ``eps`` of ``family`` and check their images contain a D-member.

    For ``D`` the image may go through leg 1 or leg 2 (whichever contains);
    for ``Di`` only through leg ``i``.  Each perturbation is shrunk until an
    upper bound of its disc distance is at most ``eps``.
    """
    eps = Fraction(eps)
    rng = np.random.default_rng(seed)
    legs = (1, 2) if family == "D" else (leg_of(family),)
    ok, low, worst_delta, fails = 0, None, 0.0, []
    for t in range(trials):
        base = random_member(rng, p, family)
        disc = base
        if eps > 0:
            size = float(eps) / 2
            while True:
                disc = perturb(rng, p, base, size)
                d = delta_upper_bound(base, disc)
                if d <= float(eps):
                    break
                size /= 2
            worst_delta = max(worst_delta, d)
        good, m, why = _image_in_family(p, disc, legs)
        if good:
            ok += 1
            low = m if low is None else min(low, m)
        else:
            fails.append({"trial": t, "reason": why})
    return ProbeReport(family, eps, trials, ok, low, worst_delta, fails)


def perturbed_params(rng, p: SpawnerParams, mu) -> SpawnerParams:
    """Move lambda and every affine coefficient by at most ``mu``."""
    mu = float(mu)
    f = lambda x: Fraction(x) + _rat(rng.uniform(-1, 1) * mu)  # noqa: E731
    rows = lambda t: tuple(tuple(f(x) for x in r) for r in t)  # noqa: E731
    return p.with_(lam=f(p.lam), au=rows(p.au), cu=rows(p.cu), as_=rows(p.as_), es=rows(p.es))


@dataclass
class RobustnessReport:
    mu: Fraction
    eps: Fraction
    samples: list
    ok: bool

    def summary(self) -> dict:
        return {"mu": str(self.mu), "eps": str(self.eps), "ok": self.ok, "samples": self.samples}


def robustness_probe(p: SpawnerParams, mu=None, eps=None, samples: int = 8, trials: int = 125,
                     seed: int = 0) -> RobustnessReport:
    """Perturb the parameters by ``mu`` and rerun the cone check and the invariance probe at ``eps - mu``."""
    mu = Fraction(mu) if mu is not None else (p.lam - 1) / 16
    eps = Fraction(eps) if eps is not None else (p.lam - 1) / 8
    rng = np.random.default_rng(seed)
    out, good = [], True
    for k in range(samples):
        q = perturbed_params(rng, p, mu)
        entry = {"lambda": float(q.lam)}
        try:
            validate(q)
        except FlipFlopError as e:
            entry.update(valid=False, reason=str(e))
            out.append(entry)
            good = False
            continue
        cone = cone_check(q)
        probe = strict_invariance_probe(q, "D", eps - mu, trials, seed=seed + 1 + k)
        entry.update(valid=True, cone_margin=float(cone.min_margin), probe_passed=probe.passed,
                     probe_trials=probe.trials, min_margin=float(probe.min_margin or 0))
        good = good and cone.passed and probe.ok
        out.append(entry)
    return RobustnessReport(mu, eps, out, good)


# safety domains ---------------------------------------------------------------


def apply_leg_to_box(p: SpawnerParams, i: int, box: Box) -> Box:
    """Image of a (u, c, s) box under leg ``i`` (exact, coordinatewise monotone)."""
    u, s = p.u, p.s
    ub = Box(box.lo[:u], box.hi[:u])
    cb = (center_map(i, p.lam, box.lo[u]), center_map(i, p.lam, box.hi[u]))
    sb = Box(box.lo[u + 1:], box.hi[u + 1:])
    return p.u_image(i, ub).product(Box((min(cb),), (max(cb),)), p.s_image(i, sb))


@dataclass
class SafetyReport:
    passed: bool
    violations: list

    def summary(self) -> dict:
        return {"passed": self.passed, "violations": self.violations}


def safety_domain_check(p: SpawnerParams, boxes: dict) -> SafetyReport:
    """Check the four safety-domain axioms for candidate open boxes ``V[(i, j)]``, ``0 <= j < n_i``.

    Boxes with ``j = 0`` live in the cube; each ``(i, j)`` with ``j >= 1``
    has its own chart in which the intermediate iterates act as the
    identity, and the last one is followed by leg ``i``.
    """
    bad = []
    for i in LEGS:
        for j in range(p.returns[i - 1]):
            if (i, j) not in boxes:
                bad.append({"axiom": "indexing", "where": [i, j], "detail": "missing box"})
    if bad:
        return SafetyReport(False, bad)
    U = p.U
    first = [(i, boxes[(i, 0)]) for i in LEGS]
    for a in range(3):
        for b in range(a + 1, 3):
            if not first[a][1].disjoint(first[b][1]):
                bad.append({"axiom": "disjoint", "where": [first[a][0], first[b][0]]})
    for i in LEGS:
        V0 = boxes[(i, 0)]
        if not p.leg(i).inside_interior(V0):
            bad.append({"axiom": "contains leg", "where": [i, 0],
                        "deficit": str(-p.leg(i).containment_margin(V0))})
        if not V0.inside(U):
            bad.append({"axiom": "inside U", "where": [i, 0]})
        n = p.returns[i - 1]
        for j in range(n - 1):
            if not boxes[(i, j)].inside_interior(boxes[(i, j + 1)]):
                bad.append({"axiom": "forward nesting", "where": [i, j],
                            "deficit": str(-boxes[(i, j)].containment_margin(boxes[(i, j + 1)]))})
        last = apply_leg_to_box(p, i, boxes[(i, n - 1)])
        if not last.inside_interior(U):
            bad.append({"axiom": "return inside U", "where": [i, n - 1],
                        "deficit": str(-last.containment_margin(U))})
    return SafetyReport(not bad, bad)


def inflated_legs(p: SpawnerParams, r=Fraction(1, 32)) -> dict:
    """Candidate with every ``V[(i, j)]`` the leg inflated by ``r (j+1)/n_i``: boxes grow along the return."""
    r = Fraction(r)
    out = {}
    for i in LEGS:
        n = p.returns[i - 1]
        for j in range(n):
            out[(i, j)] = p.leg(i).inflate(r * (j + 1) / n)
    return out


def shrinking_candidate(p: SpawnerParams, r=Fraction(1, 32)) -> dict:
    """Candidate ``V[(i, j)] = f^j(V^{k+j})`` from a decreasing neighbourhood basis ``V^n`` (identity charts)."""
    r = Fraction(r)
    out = {}
    for i in LEGS:
        n = p.returns[i - 1]
        for j in range(n):
            out[(i, j)] = p.leg(i).inflate(r * (n - j) / n)
    return out


@dataclass
class BlenderReport:
    cone: ConeReport
    margins: ImageMargins
    probes: dict
    robustness: RobustnessReport
    safety: SafetyReport

    @property
    def passed(self) -> bool:
        return (self.cone.passed and self.margins.passed and all(r.ok for r in self.probes.values())
                and self.robustness.ok and self.safety.passed)

    def summary(self) -> dict:
        return {
            "cone": self.cone.summary(),
            "image_margins": self.margins.summary(),
            "invariance": {k: v.summary() for k, v in self.probes.items()},
            "robustness": self.robustness.summary(),
            "safety_domain": self.safety.summary(),
            "passed": self.passed,
        }


def certify_blender(p: SpawnerParams, trials: int = 1000, seed: int = 0) -> BlenderReport:
    """Cone margins, exact image margins, probes at eps = 0 and (lam-1)/8, robustness and safety domain."""
    validate(p)
    cone = cone_check(p)
    margins = image_margins(p)
    probes = {}
    for eps in (Fraction(0), (p.lam - 1) / 8):
        for fam in ("D", "D3"):
            probes[f"{fam}@{eps}"] = strict_invariance_probe(p, fam, eps, trials, seed)
    rob = robustness_probe(p, seed=seed, trials=max(1, trials // 8))
    safety = safety_domain_check(p, inflated_legs(p))
    return BlenderReport(cone, margins, probes, rob, safety)
