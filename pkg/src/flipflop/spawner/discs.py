"""Affine graph discs, their families, the induced map on discs and the disc distance."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np
from scipy.linalg import subspace_angles
from scipy.spatial.distance import cdist

from ..core import DomainEscape, NotContained
from ..enclosure import FixedInterval, Interval
from .params import Box, SpawnerParams

FAMILIES = ("D", "D1", "D2", "D3")


@dataclass(frozen=True)
class GraphDisc:
    """Graph of ``x^u -> (c0 + cb.x^u, s0 + S x^u)`` over ``domain``.

    Coefficients are either exact :class:`Fraction` values or
    :class:`FixedInterval` enclosures on a common grid.
    """

    domain: Box
    c0: object
    cb: tuple
    s0: tuple
    S: tuple
    tag: str | None = None

    @property
    def u(self) -> int:
        return self.domain.dim

    @property
    def s(self) -> int:
        return len(self.s0)

    @property
    def exact(self) -> bool:
        return not isinstance(self.c0, FixedInterval)

    @classmethod
    def flat(cls, domain: Box, center, s_values, tag=None) -> "GraphDisc":
        """Disc of constant height ``center`` and constant strong-stable coordinates."""
        u = domain.dim
        sv = tuple(Fraction(x) for x in s_values)
        return cls(domain, Fraction(center), (Fraction(0),) * u, sv,
                   tuple((Fraction(0),) * u for _ in sv), tag)

    def with_domain(self, box: Box, tag=None) -> "GraphDisc":
        return GraphDisc(box, self.c0, self.cb, self.s0, self.S, tag)

    def retagged(self, tag) -> "GraphDisc":
        return GraphDisc(self.domain, self.c0, self.cb, self.s0, self.S, tag)

    def lift(self, k: int | None) -> "GraphDisc":
        """Same disc with coefficients on the ``k``-bit grid (``None``: keep exact)."""
        if k is None:
            if not self.exact:
                raise ValueError("cannot make an enclosure exact")
            return self
        conv = lambda x: _to_fixed(x, k)  # noqa: E731
        return GraphDisc(self.domain, conv(self.c0), tuple(map(conv, self.cb)), tuple(map(conv, self.s0)),
                         tuple(tuple(map(conv, r)) for r in self.S), self.tag)

    # evaluation -----------------------------------------------------------

    def center_range(self, box: Box | None = None):
        return _affine_range(self.c0, self.cb, box or self.domain)

    def s_range(self, r: int, box: Box | None = None):
        return _affine_range(self.s0[r], self.S[r], box or self.domain)

    def lipschitz_sq(self) -> Fraction:
        """Upper bound for the squared Frobenius norm of the graph's linear part."""
        return sum((_mag_sq(x) for x in self.cb), Fraction(0)) + sum(
            (_mag_sq(x) for row in self.S for x in row), Fraction(0))

    def point(self, xu) -> tuple:
        """Exact cube point above ``xu`` (exact discs only)."""
        xu = tuple(Fraction(x) for x in xu)
        c = self.c0 + sum((a * x for a, x in zip(self.cb, xu)), Fraction(0))
        s = tuple(s0 + sum((a * x for a, x in zip(row, xu)), Fraction(0)) for s0, row in zip(self.s0, self.S))
        return xu, c, s

    def float_coefficients(self) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        f = lambda x: float(x.mid) if isinstance(x, FixedInterval) else float(x)  # noqa: E731
        return (f(self.c0), np.array([f(x) for x in self.cb]), np.array([f(x) for x in self.s0]),
                np.array([[f(x) for x in r] for r in self.S]).reshape(self.s, self.u))

    def tangent_basis(self) -> np.ndarray:
        """Columns spanning the tangent plane, in (u, c, s) coordinates."""
        _, cb, _, S = self.float_coefficients()
        return np.vstack([np.eye(self.u), cb[None, :], S])

    def to_record(self) -> dict:
        g = lambda x: [str(x.lo), str(x.hi)] if isinstance(x, FixedInterval) else str(x)  # noqa: E731
        return {
            "domain": self.domain.to_record(),
            "c0": g(self.c0), "cb": [g(x) for x in self.cb],
            "s0": [g(x) for x in self.s0], "S": [[g(x) for x in r] for r in self.S],
            "tag": self.tag,
        }

    @classmethod
    def from_record(cls, rec) -> "GraphDisc":
        q = Fraction
        return cls(Box.from_record(rec["domain"]), q(rec["c0"]), tuple(q(x) for x in rec["cb"]),
                   tuple(q(x) for x in rec["s0"]), tuple(tuple(q(x) for x in r) for r in rec["S"]),
                   rec.get("tag"))


def _to_fixed(x, k: int) -> FixedInterval:
    if isinstance(x, FixedInterval):
        if x.k == k:
            return x
        if x.k < k:
            d = k - x.k
            return FixedInterval(x.a << d, x.b << d, k)
        d = x.k - k
        return FixedInterval(x.a >> d, -((-x.b) >> d), k)
    return FixedInterval.from_rational(x, k)


def _mag_sq(x) -> Fraction:
    if isinstance(x, FixedInterval):
        return x.mag_squared_upper()
    return x * x


def _affine_range(c0, coeffs, box: Box):
    """Enclosure of ``c0 + coeffs.x`` over ``box``."""
    if isinstance(c0, FixedInterval):
        acc = c0
        for a, lo, hi in zip(coeffs, box.lo, box.hi):
            if a.a == 0 and a.b == 0:
                continue
            acc = acc + (a * lo).hull(a * hi)
        return acc
    lo = hi = c0
    for a, l, h in zip(coeffs, box.lo, box.hi):
        p, q = a * l, a * h
        lo += min(p, q)
        hi += max(p, q)
    return Interval(lo, hi)


# families ------------------------------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    name: str
    domain: Box
    center: tuple
    s_box: Box
    lipschitz: Fraction


@lru_cache(maxsize=256)
def family_spec(p: SpawnerParams, name: str) -> FamilySpec:
    """Domain box, center window, s-window and Lipschitz budget of a disc family."""
    q = Fraction
    if name == "D":
        return FamilySpec(name, p.Ju, (q(-1, 4), q(1, 4)), p.Js, p.alpha0)
    if name == "D1":
        return FamilySpec(name, p.u_preimage(1, p.Ju0), (q(-1, 4), q(1, 8)), p.Js, p.alpha0)
    if name == "D2":
        return FamilySpec(name, p.u_preimage(2, p.Ju0), (q(-1, 8), q(1, 4)), p.Js, p.alpha0)
    if name == "D3":
        return FamilySpec(name, p.u_preimage(3, p.Ju0), (-p.rho, p.rho), p.Js, p.alpha0)
    raise ValueError(f"unknown disc family {name!r}")


def leg_of(name: str) -> int:
    return {"D1": 1, "D2": 2, "D3": 3}[name]


def _within(x, lo, hi) -> bool:
    if isinstance(x, FixedInterval):
        return x.subset_of(lo, hi)
    return lo <= x.lo and x.hi <= hi


def _lower(x) -> Fraction:
    return x.lo if isinstance(x.lo, Fraction) else Fraction(x.lo)


def _upper(x) -> Fraction:
    return x.hi if isinstance(x.hi, Fraction) else Fraction(x.hi)


def is_member(p: SpawnerParams, disc: GraphDisc, name: str, spec: FamilySpec | None = None) -> bool:
    """Fast membership test of ``disc`` restricted to the family domain (no margins)."""
    spec = spec or family_spec(p, name)
    if not spec.domain.inside(disc.domain):
        return False
    if not _within(disc.center_range(spec.domain), *spec.center):
        return False
    for r in range(disc.s):
        if not _within(disc.s_range(r, spec.domain), spec.s_box.lo[r], spec.s_box.hi[r]):
            return False
    return disc.lipschitz_sq() <= spec.lipschitz ** 2


@dataclass
class Restriction:
    """A disc restricted to a family domain, with exact (or certified lower) margins."""

    disc: GraphDisc
    family: str
    spec: FamilySpec

    @cached_property
    def margins(self) -> dict:
        d, spec = self.disc, self.spec
        cr = d.center_range()
        out = {
            "center_lo": _lower(cr) - spec.center[0],
            "center_hi": spec.center[1] - _upper(cr),
        }
        for r in range(d.s):
            sr = d.s_range(r)
            out[f"s{r}_lo"] = _lower(sr) - spec.s_box.lo[r]
            out[f"s{r}_hi"] = spec.s_box.hi[r] - _upper(sr)
        out["lipschitz_sq"] = spec.lipschitz ** 2 - d.lipschitz_sq()
        return out

    @property
    def center_margin(self) -> Fraction:
        m = self.margins
        return min(m["center_lo"], m["center_hi"])

    @property
    def min_margin(self) -> Fraction:
        """Smallest range margin (center and strong-stable)."""
        return min(v for k, v in self.margins.items() if k != "lipschitz_sq")


def restrict(disc: GraphDisc, box: Box, tag=None) -> GraphDisc:
    if not box.inside(disc.domain):
        raise NotContained("domain", -box.containment_margin(disc.domain))
    return disc.with_domain(box, tag)


def restrict_to_family(p: SpawnerParams, disc: GraphDisc, name: str, strict: bool = False) -> Restriction:
    """Restrict ``disc`` to the domain of family ``name`` and certify every predicate.

    Raises :class:`NotContained` carrying the violated predicate and its
    deficit.  ``strict`` additionally demands positive margins.
    """
    spec = family_spec(p, name)
    if not spec.domain.inside(disc.domain):
        raise NotContained("domain", -spec.domain.containment_margin(disc.domain))
    res = Restriction(disc.with_domain(spec.domain, name), name, spec)
    if is_member(p, disc, name, spec) and not strict:
        return res
    bad = [(k, v) for k, v in res.margins.items() if v < 0 or (strict and v == 0)]
    if bad:
        k, v = min(bad, key=lambda kv: kv[1])
        raise NotContained(k, -v)
    return res


def induced_apply(p: SpawnerParams, disc: GraphDisc, leg: int) -> GraphDisc:
    """Image of ``disc`` under the induced map of leg ``leg`` (exact affine formula)."""
    scope = p.u_preimage(leg, Box.cube(p.u, p.cube_radius))
    if not disc.domain.inside(scope):
        raise DomainEscape(f"disc domain leaves the scope of leg {leg}")
    a, cu = p.au[leg - 1], p.cu[leg - 1]
    b, e = p.as_[leg - 1], p.es[leg - 1]
    lam_i, kap = p.center_slope(leg), p.center_offset(leg)
    inv_a = tuple(1 / x for x in a)
    c = disc.c0
    for cbj, cj in zip(disc.cb, cu):
        if cj != 0:
            c = c + cbj * cj
    c0 = c * lam_i + kap
    cb = tuple(x * (lam_i * ia) for x, ia in zip(disc.cb, inv_a))
    s0, S = [], []
    for r in range(disc.s):
        v = disc.s0[r]
        for Sj, cj in zip(disc.S[r], cu):
            if cj != 0:
                v = v + Sj * cj
        s0.append(v * b[r] + e[r])
        S.append(tuple(x * (b[r] * ia) for x, ia in zip(disc.S[r], inv_a)))
    return GraphDisc(p.u_image(leg, disc.domain), c0, cb, tuple(s0), tuple(S), None)


def lipschitz_factor(p: SpawnerParams, leg: int) -> Fraction:
    """``max(|g'|, ||A^s||) / m(A^u)``: factor by which a leg shrinks graph slopes."""
    return max(p.center_slope(leg), p.s_norm(leg)) / p.min_expansion(leg)


# distance -----------------------------------------------------------------


def _grid(box: Box, n: int) -> np.ndarray:
    axes = [np.linspace(float(a), float(b), n) for a, b in zip(box.lo, box.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _embed(disc: GraphDisc, xu: np.ndarray) -> np.ndarray:
    c0, cb, s0, S = disc.float_coefficients()
    c = c0 + xu @ cb
    s = s0[None, :] + xu @ S.T
    return np.hstack([xu, c[:, None], s])


def _angle(A: np.ndarray, B: np.ndarray) -> float:
    if A.shape[1] == 0 and B.shape[1] == 0:
        return 0.0
    if A.shape[1] == 1 and B.shape[1] == 1:
        # angle between lines, in the cancellation-free half-angle form
        a = A[:, 0] / np.linalg.norm(A[:, 0])
        b = B[:, 0] / np.linalg.norm(B[:, 0])
        if a @ b < 0:
            b = -b
        return float(2 * np.arctan2(np.linalg.norm(a - b), np.linalg.norm(a + b)))
    return float(np.max(subspace_angles(A, B)))


def _boundary(disc: GraphDisc, n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Faces of the disc boundary as (sampled points, tangent basis)."""
    u, box = disc.u, disc.domain
    basis = disc.tangent_basis()
    faces = []
    for j in range(u):
        for side in (box.lo[j], box.hi[j]):
            lo = list(box.lo)
            hi = list(box.hi)
            lo[j] = hi[j] = side
            pts = _embed(disc, _grid(Box(tuple(lo), tuple(hi)), n))
            faces.append((pts, np.delete(basis, j, axis=1)))
    return faces


def _hausdorff(pa, pb, extra=None) -> float:
    d = cdist(pa, pb)
    if extra is not None:
        d = d + extra
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def delta_distance(d1: GraphDisc, d2: GraphDisc, grid: int = 9) -> float:
    """Sampled disc distance: Hausdorff distance of tangent lifts plus that of boundary lifts.

    Lifted points are compared with base distance plus the largest principal
    angle between tangent planes.  Affine discs have constant tangent planes,
    so the tangent term is exact.
    """
    if grid < 2:
        raise ValueError("need at least two sample points per axis")
    if d1.u != d2.u or d1.s != d2.s:
        raise ValueError("discs live in different dimensions")
    pa = _embed(d1, _grid(d1.domain, grid))
    pb = _embed(d2, _grid(d2.domain, grid))
    interior = _hausdorff(pa, pb) + _angle(d1.tangent_basis(), d2.tangent_basis())
    fa, fb = _boundary(d1, grid), _boundary(d2, grid)
    blocks = []
    for xa, ta in fa:
        row = []
        for xb, tb in fb:
            row.append(cdist(xa, xb) + _angle(ta, tb))
        blocks.append(np.hstack(row))
    D = np.vstack(blocks)
    boundary = max(D.min(axis=1).max(), D.min(axis=0).max())
    return float(interior + boundary)


def delta_upper_bound(d1: GraphDisc, d2: GraphDisc) -> float:
    """Upper bound (up to float rounding) on the continuous disc distance.

    Matches points through the affine bijection between the two domains;
    the displacement is convex, so its maximum sits at a domain corner.
    Faces are matched to faces, giving the boundary term.
    """
    if d1.u != d2.u:
        raise ValueError("dimension mismatch")
    b1, b2 = d1.domain, d2.domain
    corners = _grid(Box((0,) * d1.u, (1,) * d1.u), 2)
    lo1, w1 = np.array([float(x) for x in b1.lo]), np.array([float(x) for x in b1.widths])
    lo2, w2 = np.array([float(x) for x in b2.lo]), np.array([float(x) for x in b2.widths])
    p1 = _embed(d1, lo1 + corners * w1)
    p2 = _embed(d2, lo2 + corners * w2)
    disp = float(np.max(np.linalg.norm(p1 - p2, axis=1)))
    t1, t2 = d1.tangent_basis(), d2.tangent_basis()
    tangent = _angle(t1, t2)
    face = 0.0
    for j in range(d1.u):
        face = max(face, _angle(np.delete(t1, j, axis=1), np.delete(t2, j, axis=1)))
    slack = 1e-12 * (1 + disp)
    return 2 * disp + tangent + face + slack
