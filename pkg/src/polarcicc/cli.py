"""Command-line entry point: ``polarcicc construct|simulate|region|leakage-oracle``.

Every flag can also be set through an environment variable named
``POLARCICC_<FLAG>`` (upper case, dashes as underscores); explicit flags win.
"""

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from .construction import RateInfeasible, build_chaining_plan
from .dist import MarkovViolation
from .harness import (
    ExperimentConfig, cached_construction, metrics_csv, run_experiment,
)
from .instance_io import InstanceFormatError, bundled_names, bundled_path, load_instance
from .leakage import ExactSizeError, adversarial_plan, exact_leakage
from .polarizer import ExactLimitError
from .region import evaluate_region, region_csv, projected_region

ENV_PREFIX = "POLARCICC_"


class CliError(Exception):
    pass


def _env(name, conv, default):
    v = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if v is None:
        return default
    try:
        return conv(v)
    except ValueError:
        raise CliError(f"environment variable {ENV_PREFIX}{name.upper()}={v!r} is not a valid value") from None


def _resolve_instance(ref):
    if ref is None:
        raise CliError("no instance given (--instance PATH or a bundled name such as 'bsc-pair')")
    p = Path(ref)
    if p.is_file():
        return load_instance(p)
    if ref in bundled_names():
        return load_instance(bundled_path(ref))
    raise CliError(f"instance {ref!r} is neither a file nor a bundled name ({', '.join(bundled_names())})")


def _write(path, text):
    """Atomic write: the file appears complete or not at all."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _common(p, n_default=None):
    p.add_argument("--instance", help="instance file or bundled instance name")
    p.add_argument("--n", type=int, nargs="+", help="block length(s), powers of two")
    p.add_argument("--m", type=int, help="blocks per frame")
    p.add_argument("--delta", type=float, help="threshold for H/L sets")
    p.add_argument("--beta", type=float, help="use the threshold 2^(-N^beta) instead of --delta")
    p.add_argument("--backoff", type=float, help="fraction of reliable indices used")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--mode", choices=["exact", "mc"], help="entropy profile estimator")
    p.add_argument("--samples", type=int, help="Monte Carlo samples per profile")
    p.add_argument("--out", help="output directory")


def _settings(a, defaults):
    conv = {"instance": str, "n": lambda v: [int(t) for t in v.split(",")], "m": int, "delta": float,
            "beta": float, "backoff": float, "seed": int, "mode": str, "samples": int, "out": str,
            "frames": int, "workers": int}
    s = {}
    for k, d in defaults.items():
        v = getattr(a, k, None)
        s[k] = v if v is not None else _env(k, conv.get(k, str), d)
    if s.get("mode") not in (None, "exact", "mc"):
        raise CliError(f"mode must be 'exact' or 'mc', got {s['mode']!r}")
    return s


DEFAULTS = {"instance": None, "n": [256], "m": 1, "delta": 0.05, "beta": None, "backoff": 1.0,
            "seed": 0, "mode": "mc", "samples": 4000, "out": "polarcicc-out"}


def cmd_construct(a):
    s = _settings(a, DEFAULTS)
    inst = _resolve_instance(s["instance"])
    out = Path(s["out"])
    for N in s["n"]:
        con, hit = cached_construction(inst, N, s["delta"], s["mode"], s["samples"], s["seed"],
                                       beta=s["beta"], cache_dir=out / "cache")
        plan = build_chaining_plan(con, m=s["m"], backoff=s["backoff"],
                                   secrecy=_secrecy_ok(con, s))
        summary = {"instance": inst.name, "N": N, "m": s["m"], "case": plan.case, "weak": plan.weak,
                   "secrecy": plan.secrecy, "construction": con.digest(), "plan": plan.digest(),
                   "sets": {L: {k: len(v) for k, v in st.items()} for L, st in plan.sets.items()},
                   "rates_symbols": plan.rates()}
        _write(out / f"plan-{inst.name}-N{N}-m{s['m']}.json", json.dumps(summary, indent=2, sort_keys=True))
        print(f"{inst.name} N={N}: case {plan.case}, construction {con.digest()} "
              f"({'cache hit' if hit else 'computed'})")
    return 0


def _secrecy_ok(con, s):
    try:
        build_chaining_plan(con, m=s["m"], backoff=s["backoff"], secrecy=True)
        return True
    except RateInfeasible as e:
        if "secrecy" in str(e):
            return False
        raise


def cmd_simulate(a):
    s = _settings(a, dict(DEFAULTS, frames=100, workers=1))
    inst = _resolve_instance(s["instance"])
    out = Path(s["out"])
    reports = []
    for N in s["n"]:
        cfg = ExperimentConfig(
            instance=inst, N=N, m=s["m"], frames=s["frames"], delta=s["delta"], beta=s["beta"],
            backoff=s["backoff"], seed=s["seed"], mode=s["mode"], samples=s["samples"],
            metrics=("error", "rates", "randomness") + (("leakage",) if a.leakage else ()),
            leak_frames=a.leak_frames, workers=s["workers"], cache_dir=str(out / "cache"))
        reports.append(run_experiment(cfg))
    _write(out / "metrics.csv", metrics_csv(reports))
    _write(out / "summary.txt", "\n\n".join(r.summary() for r in reports) + "\n")
    print("\n\n".join(r.summary() for r in reports))
    failed = []
    if a.assert_max_pe is not None:
        failed += [f"N={r.N}: joint frame error {r.Pe} > {a.assert_max_pe}" for r in reports
                   if r.Pe > a.assert_max_pe]
    if a.assert_in_region:
        failed += [f"N={r.N}: achieved rates outside the region ({r.violations})" for r in reports
                   if not r.in_region]
    for f in failed:
        print(f"assertion failed: {f}", file=sys.stderr)
    return 1 if failed else 0


def cmd_region(a):
    ref = a.instance or [_env("instance", str, None)]
    rows, text = [], []
    from .polarizer import classify_case
    for name in ref:
        inst = _resolve_instance(name)
        b = evaluate_region(inst)
        rows.append((inst.name, classify_case(inst), b))
        t1 = projected_region(b)
        text.append(f"{inst.name}: R1 <= {t1.r1_max:.6f}, R2 <= {t1.r2_max:.6f}, "
                    f"R1 + R2 <= {t1.sum_max:.6f}, R2s <= {t1.r2s_max:.6f}")
    out = a.out or _env("out", str, None)
    csv_text = region_csv(rows)
    if out:
        _write(Path(out) / "region.csv", csv_text)
    sys.stdout.write(csv_text)
    print("\n".join(text))
    return 0


def cmd_leakage(a):
    s = _settings(a, dict(DEFAULTS, n=[8], m=2, mode="exact", delta=0.2))
    inst = _resolve_instance(s["instance"])
    N = s["n"][0]
    con, _ = cached_construction(inst, N, s["delta"], s["mode"], s["samples"], s["seed"], beta=s["beta"])
    plan = build_chaining_plan(con, m=s["m"], backoff=s["backoff"], secrecy=True)
    adv = adversarial_plan(plan, con)
    proper, bad = exact_leakage(inst, plan), exact_leakage(inst, adv)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schema_version", "instance_id", "N", "m", "delta", "construction", "leak_bits"])
    w.writerow([1, inst.name, N, s["m"], repr(con.delta), "proper", repr(proper)])
    w.writerow([1, inst.name, N, s["m"], repr(con.delta), "adversarial", repr(bad)])
    if a.out or os.environ.get(ENV_PREFIX + "OUT"):
        _write(Path(s["out"]) / "leakage.csv", buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="polarcicc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)
    c = sub.add_parser("construct", help="build and cache a code construction")
    _common(c)
    c.set_defaults(func=cmd_construct)
    s = sub.add_parser("simulate", help="simulate frames and report metrics")
    _common(s)
    s.add_argument("--frames", type=int, help="frames per block length")
    s.add_argument("--workers", type=int, help="worker processes")
    s.add_argument("--leakage", action="store_true", help="add the plug-in leakage estimate")
    s.add_argument("--leak-frames", type=int, default=1000)
    s.add_argument("--assert-max-pe", type=float, help="fail if the joint frame error exceeds this")
    s.add_argument("--assert-in-region", action="store_true", help="fail if achieved rates leave the region")
    s.set_defaults(func=cmd_simulate)
    r = sub.add_parser("region", help="evaluate the rate-region bounds")
    r.add_argument("--instance", nargs="+")
    r.add_argument("--out")
    r.set_defaults(func=cmd_region)
    lk = sub.add_parser("leakage-oracle", help="exact leakage at tiny block length")
    _common(lk)
    lk.set_defaults(func=cmd_leakage)
    return p


def main(argv=None):
    a = build_parser().parse_args(argv)
    try:
        return a.func(a)
    except (CliError, InstanceFormatError, RateInfeasible, ExactLimitError, ExactSizeError,
            MarkovViolation, ValueError) as e:
        print(f"polarcicc {a.cmd}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
