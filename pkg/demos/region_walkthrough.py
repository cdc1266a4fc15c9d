"""Rate-region bounds of the bundled instances and the rates one
construction actually reaches.

Run from the repository root:  python3 demos/region_walkthrough.py
"""

from polarcicc.harness import achieved_rates
from polarcicc.construction import RateInfeasible, build_chaining_plan, build_construction
from polarcicc.instance_io import bundled_names, bundled_path, load_instance
from polarcicc.polarizer import classify_case
from polarcicc.region import evaluate_region, membership


def main():
    for name in bundled_names():
        inst = load_instance(bundled_path(name))
        b = evaluate_region(inst)
        print(f"{name:14s} case {classify_case(inst):4s} "
              + " ".join(f"{k}={v:+.4f}" for k, v in b.as_dict().items()))
    inst = load_instance(bundled_path("case-4"))
    con = build_construction(inst, 256, 0.01, samples=1000)
    try:
        plan = build_chaining_plan(con, m=8, backoff=0.9, secrecy=True)
    except RateInfeasible:
        plan = build_chaining_plan(con, m=8, backoff=0.9, secrecy=False)
    t = achieved_rates(plan)
    b = evaluate_region(inst)
    _, bad = membership(t, b)
    upper = [v for v in bad if ">=" not in v]
    print(f"\ncase-4 at N=256, m=8: {t}")
    print("message-rate bounds hold" if not upper else f"message-rate bounds broken: {', '.join(upper)}")
    # fresh randomness only reaches the limiting lower bounds as N grows
    print(f"randomness short of its limiting bound by {max(b.b6 - t.Rr, b.b5 - t.R2p - t.Rr, 0):.4f}")


if __name__ == "__main__":
    main()
