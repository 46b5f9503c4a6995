"""Batch front-end: construct, verify, blender and chi-sweep runs with CSV/JSON artifacts.

Exit codes: 0 pass, 1 verification or certification failure, 2 budget,
3 invalid configuration, 4 unreadable or unparsable input.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .analysis import PrefixSums, exponent_envelope, verify_gap_control
from .construct import RULES, build_all_scales, default_ladder, make_ladder, predicted_length
from .core import (
    BudgetExceeded,
    ChampernownePattern,
    Chain,
    FixedPattern,
    FlipFlopError,
    InvalidConfiguration,
    NotContained,
    sign_char,
)
from .enclosure import Interval, as_fraction, down, enclosed_cumsum, log_interval, up

SCHEMA_VERSION = 1
CSV_COLUMNS = ("n", "phi_n_lo", "phi_n_hi", "avg_lo", "avg_hi", "scale_marks")
SWEEP_COLUMNS = ("chi", "exponent_lo", "exponent_hi", "T", "pass", "envelope", "status")

_RUN_ONLY = ("chis", "jobs", "trials", "seed")

EXIT_OK, EXIT_FAIL, EXIT_BUDGET, EXIT_CONFIG, EXIT_PARSE = 0, 1, 2, 3, 4

DEFAULTS = {
    "model": "symbolic",
    "symbolic": {"symbols": ["p", "q"], "v": ["1", "-1"], "u": None, "coefficients": None, "window": 1024},
    "spawner": {"params": {}},
    "ladder": {"rule": "sharp", "betas": None, "alphas": None},
    "k_max": 2,
    "pattern": {"kind": "champernowne"},
    "chi": "0",
    "chis": ["-1/50", "0", "1/50"],
    "budget": 10_000_000,
    "seed": 0,
    "exact": False,
    "tail_rule": "repeat_last",
    "trials": 1000,
    "jobs": 1,
}


class ParseFailure(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved run configuration; ``record`` is the canonical JSON form written next to every artifact."""

    record: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.record[key]

    @property
    def model(self) -> str:
        return self.record["model"]


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _q(x, name: str) -> Fraction:
    try:
        return as_fraction(x)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise InvalidConfiguration(f"{name}: cannot read {x!r} as a rational") from e


def load_config(path: str | None, overrides: dict | None = None, build_family: bool = True) -> RunConfig:
    """Read a JSON config (or start from defaults), apply overrides and validate.

    With ``build_family=False`` the model itself is not instantiated, so a
    spawner that fails its flip-flop checks can still be certified and
    reported on.
    """
    rec = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as e:
            raise ParseFailure(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ParseFailure(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(user, dict):
            raise ParseFailure("config must be a JSON object")
        rec = _merge(rec, user)
    rec = _merge(rec, overrides or {})
    cfg = RunConfig(rec)
    validate_config(cfg, build_family)
    return cfg


def validate_config(cfg: RunConfig, build_family: bool = True) -> None:
    r = cfg.record
    if r["model"] not in ("symbolic", "spawner"):
        raise InvalidConfiguration(f"model must be 'symbolic' or 'spawner', got {r['model']!r}")
    if not isinstance(r["k_max"], int) or r["k_max"] < 1:
        raise InvalidConfiguration(f"k_max must be a positive integer, got {r['k_max']!r}")
    if r["budget"] is not None and (not isinstance(r["budget"], int) or r["budget"] < 1):
        raise InvalidConfiguration("budget must be a positive integer")
    if r["ladder"].get("rule", "sharp") not in RULES:
        raise InvalidConfiguration(f"ladder rule must be one of {RULES}")
    if r["tail_rule"] not in ("repeat_last", "fixed_point"):
        raise InvalidConfiguration("tail_rule must be 'repeat_last' or 'fixed_point'")
    if not isinstance(r["seed"], int):
        raise InvalidConfiguration("seed must be an integer")
    _q(r["chi"], "chi")
    for c in r["chis"]:
        _q(c, "chis")
    make_pattern(r["pattern"])
    if not build_family:
        from .spawner.params import params_from_record, validate

        validate(params_from_record(r["spawner"].get("params", {})))
        return
    # building the family and ladder checks every model invariant
    fam = make_family(cfg, _q(r["chi"], "chi"))
    make_run_ladder(cfg, fam)
    if r["exact"] and r["model"] == "symbolic" and fam.exact_values() is None:
        raise InvalidConfiguration("exact arithmetic needs a local symbolic model (no long-range coefficients)")


def make_pattern(rec: dict):
    kind = rec.get("kind", "champernowne")
    if kind == "champernowne":
        return ChampernownePattern()
    if kind == "fixed":
        try:
            return FixedPattern(list(rec["signs"]))
        except (KeyError, ValueError) as e:
            raise InvalidConfiguration(f"fixed pattern needs a nonempty 'signs' word: {e}") from e
    raise InvalidConfiguration(f"unknown pattern kind {kind!r}")


def make_family(cfg: RunConfig, chi):
    r = cfg.record
    if r["model"] == "symbolic":
        from .symbolic import make_shift_model

        s = r["symbolic"]
        return make_shift_model(s["symbols"], s["v"], s.get("u"), s.get("coefficients"), chi, s.get("window", 1024))
    from .spawner.family import SpawnerFamily
    from .spawner.params import params_from_record

    params = params_from_record(r["spawner"].get("params", {}))
    precision = None if r["exact"] else r["spawner"].get("precision", "auto")
    return SpawnerFamily(params, chi, precision)


def make_run_ladder(cfg: RunConfig, family):
    lad = cfg.record["ladder"]
    rule = lad.get("rule", "sharp")
    expansion, diameter = family.constants()
    if lad.get("betas") is None:
        return default_ladder(family.potential, cfg.record["k_max"], expansion, diameter, rule)
    betas = [_q(b, "ladder.betas") for b in lad["betas"]]
    alphas = [_q(a, "ladder.alphas") for a in lad["alphas"]]
    if len(betas) < cfg.record["k_max"]:
        raise InvalidConfiguration("ladder has fewer scales than k_max")
    return make_ladder(family.potential, betas, alphas, expansion, diameter, rule)


# artifacts ---------------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _encode_labels(labels: np.ndarray) -> dict:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and labels.min() >= 0 and labels.max() < 10:
        return {"encoding": "digits", "data": "".join(map(str, labels.tolist()))}
    return {"encoding": "list", "data": labels.tolist()}


def _decode_labels(rec: dict) -> np.ndarray:
    if rec["encoding"] == "digits":
        return np.frombuffer(rec["data"].encode("ascii"), dtype=np.uint8).astype(np.int64) - 48
    if rec["encoding"] == "list":
        return np.asarray(rec["data"], dtype=np.int64)
    raise ParseFailure(f"unknown label encoding {rec['encoding']!r}")


def _member_record(family, member):
    if family.model_id == "spawner":
        return member.to_record()
    return int(member)


def _member_from_record(family, rec):
    if family.model_id == "spawner":
        from .spawner.family import SpawnerMember

        return SpawnerMember.from_record(rec)
    return int(rec)


def _fmt(x: float) -> str:
    return repr(float(x))


def prefix_csv(sums: PrefixSums, schedules: dict) -> str:
    """Rows ``n = 1..T``; ``scale_marks`` lists the scales having ``n`` as a control time."""
    T = sums.T
    marks: dict[int, list[int]] = {}
    for k in sorted(schedules):
        for n in schedules[k]:
            marks.setdefault(int(n), []).append(k)
    n = np.arange(1, T + 1, dtype=np.float64)
    avg_lo = np.nextafter(sums.lo[1:] / n, -np.inf)
    avg_hi = np.nextafter(sums.hi[1:] / n, np.inf)
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    lo, hi = sums.lo.tolist(), sums.hi.tolist()
    alo, ahi = avg_lo.tolist(), avg_hi.tolist()
    for i in range(1, T + 1):
        m = ";".join(str(k) for k in marks.get(i, ()))
        buf.write(f"{i},{lo[i]!r},{hi[i]!r},{alo[i - 1]!r},{ahi[i - 1]!r},{m}\n")
    return buf.getvalue()


def run_construct(cfg: RunConfig, out: Path, chi=None) -> dict:
    """Build the all-scales segment and write orbit, schedules, prefix CSV and a report into ``out``."""
    r = cfg.record
    chi = _q(r["chi"] if chi is None else chi, "chi")
    family = make_family(cfg, chi)
    ladder = make_run_ladder(cfg, family)
    k_max = r["k_max"]
    T_pred = predicted_length(ladder, k_max)
    if r["budget"] is not None and T_pred > r["budget"]:
        raise BudgetExceeded(T_pred, r["budget"], k_max)
    rep = build_all_scales(family, None, make_pattern(r["pattern"]), ladder, k_max, r["budget"], r["tail_rule"])
    from .analysis import birkhoff_prefix

    sums = birkhoff_prefix(family, rep.point, rep.T)
    chain = rep.chain
    # only the fields that shape the orbit, so a sweep row matches a plain construct run
    resolved = {k: v for k, v in _merge(r, {"chi": str(chi)}).items() if k not in _RUN_ONLY}
    orbit = {
        "schema_version": SCHEMA_VERSION,
        "kind": "orbit",
        "config": resolved,
        "family": family.describe(),
        "ladder": ladder.describe(),
        "k_max": k_max,
        "T": rep.T,
        "predicted_T": T_pred,
        "tail_rule": r["tail_rule"],
        "start": _member_record(family, chain.start),
        "labels": _encode_labels(chain.labels),
        "block_pattern": "".join(sign_char(int(s)) for s in chain.block_pattern),
        "total": [_fmt(chain.total.lo), _fmt(chain.total.hi)],
    }
    _write(out / "orbit.json", _dump(orbit))
    times = {}
    for k, sch in rep.schedules.items():
        times[k] = sch.times
        _write(out / "schedules" / f"scale_{k}.json", _dump({
            "schema_version": SCHEMA_VERSION, "kind": "schedule", "scale": k,
            "beta": str(sch.beta), "t": int(sch.t), "times": [int(x) for x in sch.times],
        }))
    _write(out / "prefix.csv", prefix_csv(sums, times))
    env = exponent_envelope(rep, rep.T)
    avg = sums.value(rep.T) / rep.T
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "construct",
        "model": family.model_id,
        "chi": str(chi),
        "T": rep.T,
        "predicted_T": T_pred,
        "certified": bool(rep.certified),
        "scales": {str(k): v.summary() for k, v in rep.reports.items()},
        "average_at_T": [_fmt(down(avg.lo)), _fmt(up(avg.hi))],
        "envelope_at_T": str(env),
    }
    _write(out / "report.json", _dump(report))
    return {"report": report, "run": rep, "sums": sums, "family": family}


# verification ------------------------------------------------------------


def _read_json(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as e:
        raise ParseFailure(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseFailure(f"{path} is not valid JSON: {e}") from e
    if not isinstance(obj, dict) or obj.get("schema_version") != SCHEMA_VERSION:
        raise ParseFailure(f"{path}: missing or unsupported schema_version")
    return obj


def _read_prefix_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise ParseFailure(f"cannot read {path}: {e}") from e
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ParseFailure(f"{path}: header must be {','.join(CSV_COLUMNS)}")
    try:
        n = np.asarray([int(x[0]) for x in rows[1:]], dtype=np.int64)
        lo = np.asarray([float(x[1]) for x in rows[1:]])
        hi = np.asarray([float(x[2]) for x in rows[1:]])
    except (ValueError, IndexError) as e:
        raise ParseFailure(f"{path}: malformed row: {e}") from e
    if not np.array_equal(n, np.arange(1, n.size + 1)):
        raise ParseFailure(f"{path}: rows must list n = 1..T in order")
    return lo, hi


def resum(family, labels: np.ndarray, point, T: int) -> PrefixSums:
    """Birkhoff sums recomputed from the label word, without the construction's accumulators."""
    x = np.asarray(labels[:T], dtype=np.int64)
    if family.model_id == "spawner":
        net = np.concatenate([[0], np.cumsum(np.where(x != 3, 1, -1))])
        L = log_interval(family.params.lam)
        chi = Fraction(family.chi)
        lo = np.empty(T + 1)
        hi = np.empty(T + 1)
        # one exact enclosure per distinct net count keeps this cheap and independent
        cache: dict = {}
        for n in range(T + 1):
            d = int(net[n])
            if d not in cache:
                cache[d] = L * d
            v = cache[d] - Interval(chi * n)
            lo[n], hi[n] = v.lo, v.hi
        return PrefixSums(lo, hi)
    if family.local:
        vals = [v - family.chi for v in family.v]
        den = math.lcm(*(v.denominator for v in vals))
        nums = np.asarray([int(v * den) for v in vals], dtype=np.int64)
        return PrefixSums.from_exact(np.concatenate([[0], np.cumsum(nums[x])]), den)
    lo, hi = family.orbit_values(point, T)
    slo, shi = enclosed_cumsum(lo, hi)
    return PrefixSums(slo, shi)


def verify_run(orbit_path: Path, schedule_paths: list[Path] | None = None) -> dict:
    """Re-sum the recorded orbit and check every schedule; raises ParseFailure on unreadable input."""
    orbit_path = Path(orbit_path)
    if orbit_path.is_dir():
        orbit_path = orbit_path / "orbit.json"
    orbit = _read_json(orbit_path)
    base = orbit_path.parent
    if schedule_paths is None:
        schedule_paths = sorted((base / "schedules").glob("scale_*.json"))
    try:
        cfg = RunConfig(_merge(DEFAULTS, orbit["config"]))
        validate_config(cfg)
        family = make_family(cfg, _q(orbit["config"]["chi"], "chi"))
        ladder = make_run_ladder(cfg, family)
        labels = _decode_labels(orbit["labels"])
        T = int(orbit["T"])
        start = _member_from_record(family, orbit["start"])
    except (KeyError, TypeError, ValueError) as e:
        raise ParseFailure(f"{orbit_path}: malformed orbit record: {e}") from e
    failures = []
    if labels.size != T + 1:
        raise ParseFailure(f"{orbit_path}: {labels.size} labels for T = {T}")
    if family.model_id == "spawner":
        family.prepare(int(orbit.get("predicted_T", T)))
    if family.label_of(start) != int(labels[0]):
        failures.append("start member does not carry the first label")
    # membership: the chain must be realizable by the family
    exit_member = start
    try:
        if family.model_id == "spawner":
            members = family.replay(Chain(family.model_id, start, start, labels, family.label_signs(labels),
                                          Interval(0.0)))
            exit_member = members[-1]
        else:
            if labels.min() < 0 or labels.max() >= len(family.symbols):
                raise NotContained("symbol", 1)
            exit_member = int(labels[-1])
    except FlipFlopError as e:
        failures.append(f"chain not realizable: {e}")
        return {"schema_version": SCHEMA_VERSION, "kind": "verify", "passed": False, "failures": failures,
                "scales": {}}
    chain = Chain(family.model_id, start, exit_member, labels, family.label_signs(labels), Interval(0.0))
    point = family.entrance_point(chain, orbit["tail_rule"])
    sums = resum(family, labels, point, T)
    # recorded sums must agree with the recomputation
    csv_path = base / "prefix.csv"
    if csv_path.exists():
        lo, hi = _read_prefix_csv(csv_path)
        if lo.size != T:
            failures.append(f"prefix.csv has {lo.size} rows, expected {T}")
        else:
            bad = np.nonzero((lo > sums.hi[1:]) | (hi < sums.lo[1:]) | (lo > hi))[0]
            if bad.size:
                failures.append(f"recorded phi_n disagrees with the recomputed sum at n = {int(bad[0]) + 1}")
    scales = {}
    seen = set()
    for sp in schedule_paths:
        sch = _read_json(Path(sp))
        try:
            k = int(sch["scale"])
            times = np.asarray(sch["times"], dtype=np.int64)
            beta_rec, t_rec = Fraction(sch["beta"]), int(sch["t"])
        except (KeyError, TypeError, ValueError) as e:
            raise ParseFailure(f"{sp}: malformed schedule: {e}") from e
        if not 1 <= k <= ladder.depth:
            failures.append(f"scale {k} is not part of the ladder")
            continue
        seen.add(k)
        beta, t = ladder.beta(k), ladder.t(k)
        if (beta_rec, t_rec) != (beta, t):
            failures.append(f"scale {k}: recorded (beta, t) = ({beta_rec}, {t_rec}) differs from the ladder")
        if times.size == 0 or times[-1] != T:
            failures.append(f"scale {k}: schedule must end at T = {T}")
        rep = verify_gap_control(sums, times, beta, t, scale=k)
        scales[str(k)] = rep.summary()
        if not rep.passed:
            failures.append(f"scale {k}: control check failed")
    missing = set(range(1, int(orbit["k_max"]) + 1)) - seen
    if missing:
        failures.append(f"missing schedules for scales {sorted(missing)}")
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "verify",
        "T": T,
        "passed": not failures,
        "failures": failures,
        "scales": scales,
    }


# sweep -------------------------------------------------------------------


def _sweep_row(record: dict, chi: str, out: str) -> dict:
    cfg = RunConfig(record)
    row = {"chi": chi, "exponent_lo": "", "exponent_hi": "", "T": "", "pass": "false", "envelope": "",
           "status": ""}
    try:
        q = _q(chi, "chi")
        res = run_construct(cfg, Path(out), q)
    except InvalidConfiguration as e:
        row["status"] = f"rejected: {e}"
        return row
    except BudgetExceeded as e:
        row["status"] = f"budget: {e}"
        return row
    except FlipFlopError as e:
        row["status"] = f"failed: {e}"
        return row
    rep, family, sums = res["run"], res["family"], res["sums"]
    T = rep.T
    if family.model_id == "spawner":
        from .spawner.family import center_lyapunov

        ex = center_lyapunov(family.params, rep.chain.labels[:T]).enclosure
    else:
        ex = sums.value(T) / T + Interval(q)
    env = exponent_envelope(rep, T)
    dev = max(abs(Fraction(ex.lo) - q), abs(Fraction(ex.hi) - q))
    ok = rep.certified and dev <= env
    row.update({
        "exponent_lo": _fmt(ex.lo), "exponent_hi": _fmt(ex.hi), "T": str(T),
        "pass": "true" if ok else "false", "envelope": repr(float(env)),
        "status": "ok" if ok else ("uncertified" if not rep.certified else "outside envelope"),
    })
    return row


def run_sweep(cfg: RunConfig, chis, out: Path, jobs: int = 1) -> list[dict]:
    """One construct run per chi, each in its own directory; rows come back in input order."""
    chis = [str(c) for c in chis]
    dirs = [str(out / f"chi_{i}") for i in range(len(chis))]
    if jobs > 1 and len(chis) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(chis))) as ex:
            rows = list(ex.map(_sweep_row, [cfg.record] * len(chis), chis, dirs))
    else:
        rows = [_sweep_row(cfg.record, c, d) for c, d in zip(chis, dirs)]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _write(out / "chi_sweep.csv", buf.getvalue())
    return rows


# entry points ------------------------------------------------------------


def _overrides(args) -> dict:
    o: dict = {}
    if getattr(args, "model", None):
        o["model"] = args.model
    if getattr(args, "kmax", None) is not None:
        o["k_max"] = args.kmax
    if getattr(args, "lam", None) is not None:
        o["spawner"] = {"params": {"lambda": args.lam}}
    if getattr(args, "chi", None) is not None:
        parts = [c.strip() for c in args.chi.split(",") if c.strip()]
        if len(parts) == 1:
            o["chi"] = parts[0]
        o["chis"] = parts
    if getattr(args, "seed", None) is not None:
        o["seed"] = args.seed
    if getattr(args, "budget", None) is not None:
        o["budget"] = args.budget
    if getattr(args, "exact", False):
        o["exact"] = True
    if getattr(args, "trials", None) is not None:
        o["trials"] = args.trials
    if getattr(args, "jobs", None) is not None:
        o["jobs"] = args.jobs
    return o


def cmd_construct(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    res = run_construct(cfg, Path(args.out))
    sys.stdout.write(_dump(res["report"]))
    return EXIT_OK if res["report"]["certified"] else EXIT_FAIL


def cmd_verify(args) -> int:
    result = verify_run(Path(args.orbit), [Path(p) for p in args.schedules] if args.schedules else None)
    if args.report:
        _write(Path(args.report), _dump(result))
    sys.stdout.write(_dump(result))
    return EXIT_OK if result["passed"] else EXIT_FAIL


def cmd_blender(args) -> int:
    from .spawner.blender import certify_blender
    from .spawner.params import params_from_record

    ov = _overrides(args)
    ov["model"] = "spawner"
    cfg = load_config(args.config, ov, build_family=False)
    params = params_from_record(cfg["spawner"].get("params", {}))
    rep = certify_blender(params, trials=cfg["trials"], seed=cfg["seed"])
    out = {"schema_version": SCHEMA_VERSION, "kind": "blender", "params": params.describe(), **rep.summary()}
    text = _dump(out)
    if args.out:
        _write(Path(args.out) / "blender.json", text)
    sys.stdout.write(text)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_chi_sweep(args) -> int:
    ov = _overrides(args)
    ov.pop("chi", None)
    cfg = load_config(args.config, ov)
    rows = run_sweep(cfg, cfg["chis"], Path(args.out), cfg["jobs"])
    sys.stdout.write((Path(args.out) / "chi_sweep.csv").read_text(encoding="utf-8"))
    accepted = [r for r in rows if not r["status"].startswith("rejected")]
    if not accepted:
        return EXIT_CONFIG
    return EXIT_OK if all(r["pass"] == "true" for r in accepted) else EXIT_FAIL


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--model", choices=("symbolic", "spawner"))
    p.add_argument("--kmax", type=int)
    p.add_argument("--lambda", dest="lam", help="spawner center multiplier, e.g. 21/20")
    p.add_argument("--chi", help="shift constant; a comma list sets the sweep values")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--exact", action="store_true", help="exact rational arithmetic")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flipflop", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    c = sub.add_parser("construct", help="build a segment controlled at all scales")
    _common(c)
    c.add_argument("--out", default="out", help="output directory")
    c.set_defaults(func=cmd_construct)
    v = sub.add_parser("verify", help="re-sum an orbit record and check its schedules")
    v.add_argument("orbit", help="orbit.json or the directory holding it")
    v.add_argument("schedules", nargs="*", help="schedule files (default: all next to the orbit)")
    v.add_argument("--report", help="also write the report here")
    v.set_defaults(func=cmd_verify)
    b = sub.add_parser("blender", help="certify the spawner blender conditions")
    _common(b)
    b.add_argument("--trials", type=int)
    b.add_argument("--out", help="directory for blender.json")
    b.set_defaults(func=cmd_blender)
    s = sub.add_parser("chi-sweep", help="construct once per chi and compare the achieved exponent")
    _common(s)
    s.add_argument("--jobs", type=int, help="parallel runs")
    s.add_argument("--out", default="out", help="output directory")
    s.set_defaults(func=cmd_chi_sweep)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse uses 2 for usage errors, which is the budget code here
        return EXIT_PARSE if e.code else EXIT_OK
    try:
        return args.func(args)
    except ParseFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except BudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except InvalidConfiguration as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FlipFlopError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
