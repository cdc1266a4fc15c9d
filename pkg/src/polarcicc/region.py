"""Rate-region bounds at a fixed design distribution and membership tests."""

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dist import CiccInstance, mutual_information
from .polarizer import classify_case

__all__ = [
    "RateTuple",
    "RegionBounds",
    "evaluate_region",
    "membership",
    "projected_region",
    "grid_sweep",
    "region_csv",
    "REGION_SCHEMA_VERSION",
    "ProjectedRegion",
    "region_report",
]

REGION_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RateTuple:
    """Rates in bits per channel use."""

    Rr: float
    R1: float
    R2p: float
    R2s: float

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"rate {k}={v} must be finite and non-negative")


@dataclass(frozen=True)
class RegionBounds:
    """Right-hand sides of the six region inequalities (bits).

    b1 = min{I(U,X1;Y1), I(U,X1;Y2)}, b2 = I(U,V;Y2|X1),
    b3 = I(V;Y2|U,X1) + b1, b4 = I(V;Y2|U,X1) - I(V;Y1|U,X1),
    b5 = I(X2;Y1|U,X1), b6 = I(X2;Y1|U,V,X1).
    """

    b1: float
    b2: float
    b3: float
    b4: float
    b5: float
    b6: float

    def as_dict(self):
        return asdict(self)


def evaluate_region(instance, base=2):
    """Evaluate all six bounds on the instance's full joint table."""
    d = instance.full
    mi = lambda a, b, c=(): mutual_information(d, a, b, c, base=base)  # noqa: E731
    b1 = min(mi(["U", "X1"], ["Y1"]), mi(["U", "X1"], ["Y2"]))
    iv2 = mi(["V"], ["Y2"], ["U", "X1"])
    iv1 = mi(["V"], ["Y1"], ["U", "X1"])
    return RegionBounds(
        b1=b1,
        b2=mi(["U", "V"], ["Y2"], ["X1"]),
        b3=iv2 + b1,
        b4=iv2 - iv1,
        b5=mi(["X2"], ["Y1"], ["U", "X1"]),
        b6=mi(["X2"], ["Y1"], ["U", "V", "X1"]),
    )


def membership(t, b, tol=1e-12):
    """Check a rate quadruple against the bounds.

    Returns ``(inside, violations)`` where ``violations`` lists the failed
    inequalities as readable strings.  The secrecy bound is clamped at 0.
    """
    checks = [
        ("R1 <= b1", t.R1 <= b.b1 + tol),
        ("R2p + R2s <= b2", t.R2p + t.R2s <= b.b2 + tol),
        ("R1 + R2p + R2s <= b3", t.R1 + t.R2p + t.R2s <= b.b3 + tol),
        ("R2s <= max(b4, 0)", t.R2s <= max(b.b4, 0.0) + tol),
        ("R2p + Rr >= b5", t.R2p + t.Rr >= b.b5 - tol),
        ("Rr >= b6", t.Rr >= b.b6 - tol),
    ]
    bad = [name for name, ok in checks if not ok]
    return not bad, bad


@dataclass(frozen=True)
class ProjectedRegion:
    """Region in (R1, R2, R2s) with R2 the total rate of transmitter 2."""

    r1_max: float
    r2_max: float
    sum_max: float
    r2s_max: float

    def contains(self, R1, R2, R2s, tol=1e-12):
        return (0 <= R1 <= self.r1_max + tol and 0 <= R2 <= self.r2_max + tol
                and R1 + R2 <= self.sum_max + tol and 0 <= R2s <= self.r2s_max + tol
                and R2s <= R2 + tol)


def projected_region(b):
    """Drop the randomness coordinate and merge R2p + R2s into R2."""
    return ProjectedRegion(r1_max=b.b1, r2_max=b.b2, sum_max=b.b3, r2s_max=max(b.b4, 0.0))


def grid_sweep(channel, q=2, steps=5, rng=None):
    """Heuristic search over small binary designs V -> X2 with U, X1 uniform.

    Only a coarse grid of the crossover parameters is visited; the result is
    the list of ``(params, RegionBounds)`` pairs, not an optimum.
    """
    from .fixtures import layered_design

    out = []
    grid = np.linspace(0.0, 0.5, steps)
    for rho in grid:
        for tau in grid:
            inst = CiccInstance(channel, layered_design(q, rho, tau), name=f"grid-{rho:.2f}-{tau:.2f}")
            out.append(({"rho": float(rho), "tau": float(tau)}, evaluate_region(inst)))
    return out


REGION_COLUMNS = ["schema_version", "instance_id", "case", "b1", "b2", "b3", "b4", "b5", "b6"]


def region_csv(rows):
    """CSV text for ``(instance_id, case, RegionBounds)`` rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REGION_COLUMNS)
    for iid, case, b in rows:
        w.writerow([REGION_SCHEMA_VERSION, iid, case] + [repr(float(v)) for v in
                                                         (b.b1, b.b2, b.b3, b.b4, b.b5, b.b6)])
    return buf.getvalue()


def region_report(instance):
    """Bounds, case label and the projected region of one instance."""
    b = evaluate_region(instance)
    return {"instance": instance.name, "case": classify_case(instance), "bounds": b,
            "projected": projected_region(b)}
