"""Acceptance suite: one pass/fail line per criterion, each at its stated tolerance."""

import json
import math
import time
from fractions import Fraction as F
from pathlib import Path

import mpmath
import numpy as np

from flipflop import cli
from flipflop.analysis import exponent_envelope, tau_itinerary, word_census
from flipflop.construct import (
    build_all_scales,
    build_controlled_segment,
    choose_tau,
    default_ladder,
    distortion_horizon,
    make_ladder,
    tau_inequality,
)
from flipflop.core import ChampernownePattern
from flipflop.enclosure import enclosed_cumsum
from flipflop.spawner import blender
from flipflop.spawner.discs import GraphDisc, delta_distance
from flipflop.spawner.family import as_flipflop_family
from flipflop.spawner.params import Box, SpawnerParams, default_params
from flipflop.symbolic import Word, make_shift_model


def _exact_log(lam: F) -> mpmath.mpf:
    with mpmath.workdps(60):
        return mpmath.log(mpmath.mpf(lam.numerator) / lam.denominator)


def test_criterion_01_tau_selection(criterion):
    cases = {F(1, 2): 5, F(1, 10): 3, F(9, 10): 21}
    results = []
    t0 = time.perf_counter()
    got = {a1: choose_tau(1, 1, a1) for a1 in cases}
    elapsed = time.perf_counter() - t0
    for a1, want in cases.items():
        # minimality by integer scan of (tau - 2)/tau > alpha_1
        scan = next(t for t in range(2, 1000) if F(t - 2, t) > a1)
        results.append(got[a1] == want == scan and tau_inequality(1, 1, a1, want)
                       and not tau_inequality(1, 1, a1, want - 1))
    ok = all(results) and elapsed < 1e-3
    criterion(1, ok, f"tau = {[got[a] for a in cases]} (want 5, 3, 21), {elapsed * 1e3:.3f} ms")
    assert ok


def test_criterion_02_scale_two_segments(criterion):
    m = make_shift_model()
    lad = make_ladder(m.potential, [1, F(1, 4)], [F(1, 2), F(1, 8)], *m.constants())
    t0 = time.perf_counter()
    out = {}
    pat = ChampernownePattern()
    for sign in (1, -1):
        c = build_controlled_segment(m, m.canonical_member(pat[0]), pat, lad, 2, sign)
        # exact re-summation straight from the output word
        word = c.labels[: c.T].tolist()
        total = sum(F(1) if s == 0 else F(-1) for s in word)
        out[sign] = total / c.T
    elapsed = time.perf_counter() - t0
    ok = (F(1, 8) <= out[1] <= F(1, 4)) and (-F(1, 4) <= out[-1] <= -F(1, 8)) and elapsed < 1
    criterion(2, ok, f"averages + {out[1]}, - {out[-1]}, {elapsed:.3f} s")
    assert ok


def test_criterion_03_all_scales(criterion, tmp_path):
    t0 = time.perf_counter()
    code = cli.main(["construct", "--kmax", "3", "--out", str(tmp_path / "run")])
    vcode = cli.main(["verify", str(tmp_path / "run")])
    elapsed = time.perf_counter() - t0
    orbit = json.loads((tmp_path / "run" / "orbit.json").read_text())
    labels = cli._decode_labels(orbit["labels"])
    T = orbit["T"]
    exact = F(int(np.count_nonzero(labels[:T] == 0)) - int(np.count_nonzero(labels[:T] == 1)), T)
    m = make_shift_model()
    lad = default_ladder(m.potential, 3, *m.constants())
    bound = lad.beta(3) + F(lad.t(3)) * lad.beta(1) / T
    ok = code == 0 and vcode == 0 and abs(exact) <= bound and T <= 10 ** 7 and elapsed < 60
    criterion(3, ok, f"T = {T}, avg = {float(exact):.6f}, bound = {float(bound):.6f}, "
                     f"verify exit {vcode}, {elapsed:.1f} s")
    assert ok


def test_criterion_04_distortion(criterion):
    m = make_shift_model(u=(1, -1), coefficients={"kind": "power", "exponent": 2})
    eta = F(1, 20)
    N = distortion_horizon(eta, *m.constants(), m.potential.beta1, m.modulus)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        T = N + int(rng.integers(0, 200))
        signs = rng.choice([1, -1], size=T)
        start = m.canonical_member(int(signs[0]))
        labels, _ = m.extend_many(start, signs[1:].tolist())
        head = (start,) + tuple(int(x) for x in labels)
        lo_all, hi_all = [], []
        for _ in range(10):
            tail = tuple(int(x) for x in rng.integers(0, 2, size=int(rng.integers(1, 9))))
            lo, hi = m.orbit_values(Word(head, tail), T)
            slo, shi = enclosed_cumsum(lo, hi)
            lo_all.append(slo[-1] / T)
            hi_all.append(shi[-1] / T)
        worst = max(worst, max(hi_all) - min(lo_all))
    ok = worst < float(eta)
    criterion(4, ok, f"N = {N}, max spread over 100 x 10 variants = {worst:.3e} (< 0.05)")
    assert ok


def test_criterion_05_entropy_factor(criterion):
    m = make_shift_model()
    lad = default_ladder(m.potential, 3, *m.constants())
    pat = ChampernownePattern()
    rep = build_all_scales(m, None, pat, lad, 3)
    horizon = pat.horizon(6)
    it = tau_itinerary(m.exact_orbit_values(rep.point, rep.T), lad.tau, m.potential.alpha)
    census = word_census(it[:horizon], 6, lad.tau)
    ok = (it.size >= horizon and census.complete and census.count == 64
          and math.isclose(census.estimate, math.log(2) / lad.tau, rel_tol=1e-15))
    criterion(5, ok, f"horizon {horizon} blocks of {it.size}, count {census.count}, "
                     f"estimate {census.estimate:.6f} = log 2/{lad.tau}")
    assert ok


def test_criterion_06_blender(criterion):
    t0 = time.perf_counter()
    lam = F(21, 20)
    # the stated defaults: A^u = 3, A^s = 1/3
    literal = SpawnerParams(
        u=1, s=1, lam=lam,
        au=((F(3),),) * 3, cu=((F(-5, 8),), (F(5, 8),), (F(0),)),
        as_=((F(1, 3),),) * 3, es=((F(-5, 8),), (F(5, 8),), (F(0),)),
    )
    cone = blender.cone_check(literal)
    p = default_params()
    margins = blender.image_margins(p)
    stated = min((lam - 1) / 2, (6 - 5 * lam) / 8)
    probe = blender.strict_invariance_probe(p, "D", (lam - 1) / 8, trials=1000, seed=0)
    robust = blender.robustness_probe(p, mu=(lam - 1) / 16, seed=0)
    elapsed = time.perf_counter() - t0
    parts = {
        "cone >= 0.006": cone.min_margin >= F(6, 1000),
        "center margin = 1/40": margins.center_margin == stated == F(1, 40),
        "probe 1000/1000": probe.passed == 1000,
        "robustness": robust.ok,
        "< 10 s": elapsed < 10,
    }
    detail = (f"cone {cone.min_margin}, center margin {margins.center_margin} (stated {stated}), "
              f"probe {probe.passed}/1000, robustness {robust.ok}, {elapsed:.1f} s; "
              f"failing: {[k for k, v in parts.items() if not v]}")
    ok = all(parts.values())
    criterion(6, ok, detail)
    assert ok, detail


def test_criterion_07_zero_center_exponent(criterion):
    p = default_params()
    fam = as_flipflop_family(p)
    lad = default_ladder(fam.potential, 3, *fam.constants())
    rep = build_all_scales(fam, None, None, lad, 3)
    T = rep.T
    legs = rep.chain.labels[:T]
    net = int(np.count_nonzero(legs != 3)) - int(np.count_nonzero(legs == 3))
    with mpmath.workdps(60):
        avg = mpmath.mpf(net) / T * _exact_log(p.lam)
        env = exponent_envelope(rep, T)
        tight = lad.beta(3)
        ok = rep.certified and abs(avg) <= mpmath.mpf(env.numerator) / env.denominator
        within_beta3 = abs(avg) <= mpmath.mpf(tight.numerator) / tight.denominator
    criterion(7, bool(ok), f"T = {T}, center average {float(avg):.6e}, envelope {float(env):.6e}, "
                           f"within beta_3 = {float(tight):.6e}: {bool(within_beta3)}")
    assert ok


def test_criterion_08_chi_sweep(criterion, tmp_path):
    cfg = cli.load_config(None, {"model": "spawner", "k_max": 3})
    chis = ["-1/50", "0", "1/50", "1/20"]
    rows = cli.run_sweep(cfg, chis, Path(tmp_path), jobs=1)
    inside = [r["pass"] == "true" for r in rows[:3]]
    rejected = rows[3]["status"].startswith("rejected")
    ok = all(inside) and rejected
    criterion(8, ok, "; ".join(f"chi {r['chi']}: [{r['exponent_lo']}, {r['exponent_hi']}] {r['status']}"
                               for r in rows))
    assert ok


def _random_disc(rng, lo=-0.9, hi=0.9):
    a, b = sorted(rng.uniform(lo, hi, size=2))
    if b - a < 0.05:
        b = a + 0.05
    q = lambda x: F(x).limit_denominator(1 << 20)  # noqa: E731
    return GraphDisc(Box((q(a),), (q(b),)), q(rng.uniform(-0.2, 0.2)), (q(rng.uniform(-0.02, 0.02)),),
                     (q(rng.uniform(-0.5, 0.5)),), ((q(rng.uniform(-0.02, 0.02)),),))


def test_criterion_09_metric_axioms(criterion):
    rng = np.random.default_rng(9)
    slack = 1e-10
    worst_id = worst_sym = worst_tri = 0.0
    for _ in range(1000):
        a, b, c = (_random_disc(rng) for _ in range(3))
        ab, ba = delta_distance(a, b), delta_distance(b, a)
        bc, ac = delta_distance(b, c), delta_distance(a, c)
        worst_id = max(worst_id, delta_distance(a, a))
        worst_sym = max(worst_sym, abs(ab - ba))
        worst_tri = max(worst_tri, ac - ab - bc)
    worst_h = 0.0
    for _ in range(20):
        d = _random_disc(rng)
        h = F(float(rng.uniform(1e-3, 0.3))).limit_denominator(1 << 20)
        # parallel flat discs over one domain: both Hausdorff terms equal h
        flat = GraphDisc(d.domain, d.c0, (F(0),), d.s0, ((F(0),),))
        moved = GraphDisc(d.domain, d.c0 + h, (F(0),), d.s0, ((F(0),),))
        worst_h = max(worst_h, abs(delta_distance(flat, moved) - 2 * float(h)))
    ok = worst_id <= slack and worst_sym <= slack and worst_tri <= slack and worst_h <= slack
    criterion(9, ok, f"identity {worst_id:.1e}, symmetry {worst_sym:.1e}, triangle excess {worst_tri:.1e}, "
                     f"translate-vs-2h {worst_h:.1e} (slack 1e-10)")
    assert ok


def test_criterion_10_round_trip_determinism(criterion, tmp_path):
    runs = {
        "symbolic": ["--model", "symbolic", "--kmax", "2"],
        "symbolic-exact": ["--model", "symbolic", "--kmax", "2", "--exact"],
        "spawner": ["--model", "spawner", "--kmax", "2"],
        "spawner-exact": ["--model", "spawner", "--kmax", "2", "--exact"],
    }
    verdicts = {}
    identical = {}
    for name, flags in runs.items():
        outs = []
        for rep in range(2):
            d = tmp_path / f"{name}-{rep}"
            assert cli.main(["construct", *flags, "--seed", "7", "--out", str(d)]) == 0
            outs.append(d)
        verdicts[name] = cli.main(["verify", str(outs[0])])
        files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
        identical[name] = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)
    ok = all(v == 0 for v in verdicts.values()) and all(identical.values())
    criterion(10, ok, f"verify exit codes {verdicts}, byte-identical {identical}")
    assert ok
