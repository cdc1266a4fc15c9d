"""Exact leakage of the confidential chain versus a construction that puts
the confidential symbols on the indices receiver 1 sees best.

Run from the repository root:  python3 demos/secrecy_oracle.py
"""

from polarcicc.construction import build_chaining_plan, build_construction
from polarcicc.fixtures import near_degraded_fixture
from polarcicc.leakage import adversarial_plan, exact_leakage


def main():
    inst = near_degraded_fixture()
    for delta in (0.1, 0.2):
        con = build_construction(inst, 8, delta, mode="exact")
        for m in (1, 2):
            plan = build_chaining_plan(con, m=m, secrecy=True)
            good = exact_leakage(inst, plan)
            bad = exact_leakage(inst, adversarial_plan(plan, con))
            print(f"delta={delta} m={m}: {plan.part_count('M2s')} confidential bit(s), "
                  f"leakage {good:.4f} bits (adversarial placement {bad:.4f})")


if __name__ == "__main__":
    main()
