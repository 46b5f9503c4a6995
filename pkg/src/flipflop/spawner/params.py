"""Parameters of the affine three-leg spawner and exact box arithmetic."""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from ..core import InvalidConfiguration
from ..enclosure import as_fraction


def _q(x) -> Fraction:
    return as_fraction(x)


@dataclass(frozen=True)
class Box:
    """Closed axis-parallel box with rational corners."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(_q(x) for x in self.lo)
        hi = tuple(_q(x) for x in self.hi)
        if len(lo) != len(hi):
            raise ValueError("corner dimensions differ")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("empty box")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, dim: int, r) -> "Box":
        r = _q(r)
        return cls((-r,) * dim, (r,) * dim)

    @classmethod
    def around(cls, center, radius) -> "Box":
        c = [_q(x) for x in center]
        r = [_q(x) for x in radius] if isinstance(radius, (tuple, list)) else [_q(radius)] * len(c)
        return cls(tuple(a - b for a, b in zip(c, r)), tuple(a + b for a, b in zip(c, r)))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> tuple:
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    @property
    def widths(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def inside(self, other: "Box") -> bool:
        """Closed containment ``self ⊂ other``."""
        return all(o <= a and b <= p for a, b, o, p in zip(self.lo, self.hi, other.lo, other.hi))

    def inside_interior(self, other: "Box") -> bool:
        return all(o < a and b < p for a, b, o, p in zip(self.lo, self.hi, other.lo, other.hi))

    def containment_margin(self, other: "Box") -> Fraction:
        """Smallest distance from a face of ``self`` to the matching face of ``other`` (negative if outside)."""
        return min(min(a - o, p - b) for a, b, o, p in zip(self.lo, self.hi, other.lo, other.hi))

    def disjoint(self, other: "Box") -> bool:
        return any(b < o or p < a for a, b, o, p in zip(self.lo, self.hi, other.lo, other.hi))

    def intersect(self, other: "Box") -> "Box | None":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(a > b for a, b in zip(lo, hi)):
            return None
        return Box(lo, hi)

    def inflate(self, r) -> "Box":
        r = _q(r)
        return Box(tuple(a - r for a in self.lo), tuple(b + r for b in self.hi))

    def product(self, *others: "Box") -> "Box":
        lo, hi = list(self.lo), list(self.hi)
        for o in others:
            lo += o.lo
            hi += o.hi
        return Box(tuple(lo), tuple(hi))

    def affine_image(self, scale, shift) -> "Box":
        """Image under ``x -> scale * x + shift`` (coordinatewise, scale may be negative)."""
        lo, hi = [], []
        for a, b, s, t in zip(self.lo, self.hi, scale, shift):
            u, v = s * a + t, s * b + t
            lo.append(min(u, v))
            hi.append(max(u, v))
        return Box(tuple(lo), tuple(hi))

    def to_record(self) -> dict:
        return {"lo": [str(x) for x in self.lo], "hi": [str(x) for x in self.hi]}

    @classmethod
    def from_record(cls, rec) -> "Box":
        return cls(tuple(rec["lo"]), tuple(rec["hi"]))


LEGS = (1, 2, 3)


@dataclass(frozen=True)
class SpawnerParams:
    """Affine spawner in normal form.

    Leg ``i`` is ``I_i^u x [-1,1] x [-1,1]^s`` and acts after ``n_i`` steps by
    ``(x^u, x^c, x^s) -> (au_i (x^u - cu_i), g_i(x^c), as_i x^s + es_i)``
    with ``I_i^u = cu_i + [-1/au_i, 1/au_i]``, so that ``A_i^u(I_i^u) = [-1,1]^u``.
    All coefficients are diagonal and rational.
    """

    u: int = 1
    s: int = 1
    lam: Fraction = Fraction(21, 20)
    au: tuple = ((4,), (4,), (4,))
    cu: tuple = ((Fraction(-5, 8),), (Fraction(5, 8),), (0,))
    as_: tuple = ((Fraction(1, 4),), (Fraction(1, 4),), (Fraction(1, 4),))
    es: tuple = ((Fraction(-5, 8),), (Fraction(5, 8),), (0,))
    ju: Fraction = Fraction(15, 16)
    ju0: Fraction = Fraction(31, 32)
    js: Fraction = Fraction(15, 16)
    js0: Fraction = Fraction(31, 32)
    alpha0: Fraction = Fraction(1, 50)
    alpha1: Fraction = Fraction(1, 25)
    returns: tuple = (1, 1, 1)
    cube_radius: Fraction = Fraction(5, 4)
    rho: Fraction = Fraction(1, 4)

    def __post_init__(self):
        conv = lambda rows: tuple(tuple(_q(x) for x in r) for r in rows)  # noqa: E731
        for name in ("au", "cu", "as_", "es"):
            object.__setattr__(self, name, conv(getattr(self, name)))
        for name in ("lam", "ju", "ju0", "js", "js0", "alpha0", "alpha1", "cube_radius", "rho"):
            object.__setattr__(self, name, _q(getattr(self, name)))
        object.__setattr__(self, "returns", tuple(int(n) for n in self.returns))

    # legs ---------------------------------------------------------------

    def leg_box(self, i: int) -> Box:
        return Box.around(self.cu[i - 1], tuple(1 / a for a in self.au[i - 1]))

    def leg(self, i: int) -> Box:
        """The full leg ``I_i^u x [-1,1] x [-1,1]^s``."""
        return self.leg_box(i).product(Box.cube(1, 1), Box.cube(self.s, 1))

    def u_preimage(self, i: int, box: Box) -> Box:
        """``(A_i^u)^{-1}(box)``."""
        a, c = self.au[i - 1], self.cu[i - 1]
        return box.affine_image(tuple(1 / x for x in a), c)

    def u_image(self, i: int, box: Box) -> Box:
        a, c = self.au[i - 1], self.cu[i - 1]
        return box.affine_image(a, tuple(-x * y for x, y in zip(a, c)))

    def s_image(self, i: int, box: Box) -> Box:
        return box.affine_image(self.as_[i - 1], self.es[i - 1])

    def center_slope(self, i: int) -> Fraction:
        return self.lam if i in (1, 2) else 1 / self.lam

    def center_offset(self, i: int) -> Fraction:
        if i == 1:
            return (self.lam - 1) / 2
        if i == 2:
            return -(self.lam - 1) / 2
        return Fraction(0)

    def min_expansion(self, i: int) -> Fraction:
        return min(abs(x) for x in self.au[i - 1])

    def s_norm(self, i: int) -> Fraction:
        return max(abs(x) for x in self.as_[i - 1])

    @property
    def Ju(self) -> Box:
        return Box.cube(self.u, self.ju)

    @property
    def Ju0(self) -> Box:
        return Box.cube(self.u, self.ju0)

    @property
    def Js(self) -> Box:
        return Box.cube(self.s, self.js)

    @property
    def Js0(self) -> Box:
        return Box.cube(self.s, self.js0)

    @property
    def U(self) -> Box:
        """Closure of the open cube ``U`` containing the legs and their images."""
        return Box.cube(self.u + 1 + self.s, self.cube_radius)

    def leg_gap(self) -> Fraction:
        """Smallest gap between distinct u-boxes (``phi`` is constant on smaller scales)."""
        gaps = []
        for i in LEGS:
            for j in LEGS:
                if i < j:
                    a, b = self.leg_box(i), self.leg_box(j)
                    gaps.append(max(max(o - y, x - p) for x, y, o, p in zip(a.lo, a.hi, b.lo, b.hi)))
        return min(gaps)

    def with_(self, **kw) -> "SpawnerParams":
        return replace(self, **kw)

    def describe(self) -> dict:
        rows = lambda t: [[str(x) for x in r] for r in t]  # noqa: E731
        return {
            "u": self.u, "s": self.s, "lambda": str(self.lam),
            "au": rows(self.au), "cu": rows(self.cu), "as": rows(self.as_), "es": rows(self.es),
            "ju": str(self.ju), "ju0": str(self.ju0), "js": str(self.js), "js0": str(self.js0),
            "alpha0": str(self.alpha0), "alpha1": str(self.alpha1), "returns": list(self.returns),
            "cube_radius": str(self.cube_radius), "rho": str(self.rho),
        }


def center_map(i: int, lam, x):
    """``g_{lam,1}(x) = lam x + (lam-1)/2``, ``g_{lam,2}(x) = lam x - (lam-1)/2``, ``g_{lam,3}(x) = x/lam``."""
    lam = _q(lam) if not isinstance(lam, Fraction) else lam
    if i == 1:
        return lam * x + (lam - 1) / 2
    if i == 2:
        return lam * x - (lam - 1) / 2
    if i == 3:
        return x / lam
    raise ValueError(f"no leg {i}")


def center_map_inverse(i: int, lam, y):
    lam = _q(lam) if not isinstance(lam, Fraction) else lam
    if i == 1:
        return (y - (lam - 1) / 2) / lam
    if i == 2:
        return (y + (lam - 1) / 2) / lam
    if i == 3:
        return y * lam
    raise ValueError(f"no leg {i}")


def validate(p: SpawnerParams) -> SpawnerParams:
    """Check every structural constraint; raises :class:`InvalidConfiguration` naming the first failure."""
    def need(cond, msg):
        if not cond:
            raise InvalidConfiguration(msg)

    need(p.u >= 1 and p.s >= 1, "dimensions u, s must be at least 1")
    need(p.lam > 1, "lambda must exceed 1")
    need(len(p.au) == len(p.cu) == len(p.as_) == len(p.es) == len(p.returns) == 3, "exactly three legs")
    for i in LEGS:
        need(len(p.au[i - 1]) == p.u and len(p.cu[i - 1]) == p.u, f"leg {i}: u-block has wrong dimension")
        need(len(p.as_[i - 1]) == p.s and len(p.es[i - 1]) == p.s, f"leg {i}: s-block has wrong dimension")
        need(all(a > 1 for a in p.au[i - 1]), f"leg {i}: A^u must expand (entries > 1)")
        need(all(0 < b < 1 for b in p.as_[i - 1]), f"leg {i}: A^s must contract (entries in (0,1))")
        need(p.returns[i - 1] >= 1, f"leg {i}: return time must be positive")
    need(0 < p.alpha0 < p.alpha1, "need 0 < alpha0 < alpha1")
    # alpha1 < 1/(8 sqrt(u))  <=>  64 u alpha1^2 < 1
    need(64 * p.u * p.alpha1 ** 2 < 1, f"alpha1 = {p.alpha1} must be below 1/(8 sqrt(u))")
    need(0 < p.ju < p.ju0 <= 1, "need J^u inside the interior of J^u_0 inside [-1,1]^u")
    need(0 < p.js < p.js0 <= 1, "need J^s inside the interior of J^s_0 inside [-1,1]^s")
    for i in LEGS:
        need(p.leg_box(i).inside_interior(p.Ju), f"I_{i}^u must lie in the interior of J^u")
        need(p.s_image(i, Box.cube(p.s, 1)).inside_interior(p.Js), f"A_{i}^s([-1,1]^s) must lie in the interior of J^s")
        need(p.u_preimage(i, p.Ju0).inside(p.Ju), f"(A_{i}^u)^-1(J^u_0) must lie in J^u")
    for i in LEGS:
        for j in LEGS:
            if i < j:
                need(p.leg_box(i).disjoint(p.leg_box(j)), f"legs {i} and {j} overlap")
    need(Fraction(1, 4) <= p.rho <= p.lam / 4, "rho must lie in [1/4, lambda/4]")
    need(p.cube_radius > 1, "U must contain the unit cube")
    return p


def default_params(u: int = 1, s: int = 1, lam=Fraction(21, 20)) -> SpawnerParams:
    """Three legs of width 1/2 per axis at -5/8, 5/8, 0; A^u = 4, A^s = 1/4."""
    q = Fraction(5, 8)
    p = SpawnerParams(
        u=u, s=s, lam=_q(lam),
        au=((4,) * u,) * 3,
        cu=((-q,) * u, (q,) * u, (0,) * u),
        as_=((Fraction(1, 4),) * s,) * 3,
        es=((-q,) * s, (q,) * s, (0,) * s),
    )
    return validate(p)


def params_from_record(rec: dict) -> SpawnerParams:
    """Build parameters from a config mapping; scalars broadcast over legs and axes."""
    u = int(rec.get("u", 1))
    s = int(rec.get("s", 1))
    q = Fraction(5, 8)
    defaults = {
        "au": ((4,) * u,) * 3,
        "cu": ((-q,) * u, (q,) * u, (0,) * u),
        "as": ((Fraction(1, 4),) * s,) * 3,
        "es": ((-q,) * s, (q,) * s, (0,) * s),
    }

    def block(name, dim):
        v = rec.get(name)
        if v is None:
            return defaults[name]
        if isinstance(v, (int, float, str)):
            return ((v,) * dim,) * 3
        if len(v) != 3:
            raise InvalidConfiguration(f"{name} needs one entry per leg")
        return tuple(((x,) * dim) if isinstance(x, (int, float, str)) else tuple(x) for x in v)

    kw = dict(
        u=u, s=s,
        au=block("au", u), cu=block("cu", u), as_=block("as", s), es=block("es", s),
    )
    for key, name in (("lambda", "lam"), ("ju", "ju"), ("ju0", "ju0"), ("js", "js"), ("js0", "js0"),
                      ("alpha0", "alpha0"), ("alpha1", "alpha1"), ("cube_radius", "cube_radius"),
                      ("rho", "rho")):
        if key in rec:
            kw[name] = rec[key]
    if "returns" in rec:
        r = rec["returns"]
        kw["returns"] = (r,) * 3 if isinstance(r, int) else tuple(r)
    try:
        p = SpawnerParams(**kw)
    except (TypeError, ValueError) as e:
        raise InvalidConfiguration(str(e)) from None
    return validate(p)
