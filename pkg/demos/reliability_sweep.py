"""Joint frame error of the four case fixtures as the block length grows.

Run from the repository root:  python3 demos/reliability_sweep.py
"""

from polarcicc.fixtures import case_fixture
from polarcicc.harness import ExperimentConfig, run_experiment


def main():
    print(f"{'case':>5} {'N':>5} {'delta':>9} {'Pe':>6} {'R1':>7} {'R2p':>7} {'R2s':>7}")
    for c in "1234":
        for N in (64, 256):
            rep = run_experiment(ExperimentConfig(case_fixture(c), N, m=4, frames=100, beta=1 / 3,
                                                  backoff=0.85, samples=1000))
            print(f"{rep.case:>5} {N:>5} {rep.delta:9.2e} {rep.Pe:6.3f} "
                  f"{rep.R1:7.4f} {rep.R2p:7.4f} {rep.R2s:7.4f}")


if __name__ == "__main__":
    main()
