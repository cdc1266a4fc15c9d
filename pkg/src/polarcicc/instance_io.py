"""Plain-text instance files.

Format (``#`` starts a comment, blank lines ignored)::

    name bsc-pair
    alphabet U 2
    alphabet V 2
    alphabet X1 2
    alphabet X2 2
    alphabet Y1 4
    alphabet Y2 4
    design
      0.1 0.2 ...        # P(u, v, x1, x2), row-major, may span lines
    end
    channel
      0.9 0.1 ...        # one row per (x1, x2), row-major: P(y1, y2 | x1, x2)
    end

Channel rows are read in row-major order of ``(x1, x2)``; each row holds
``|Y1| * |Y2|`` numbers in row-major order of ``(y1, y2)``.
"""

import math
from importlib import resources
from pathlib import Path

import numpy as np

from .dist import CiccInstance, JointDist, MarkovViolation

__all__ = [
    "InstanceFormatError",
    "parse_instance",
    "load_instance",
    "dump_instance",
    "bundled_path",
    "bundled_names",
    "ROW_TOL",
]

ROW_TOL = 1e-9
REQUIRED = ("U", "V", "X1", "X2", "Y1", "Y2")


class InstanceFormatError(ValueError):
    """Parse or validation failure, located by source and line."""

    def __init__(self, source, line, msg):
        self.source, self.line = source, line
        loc = f"{source}:{line}" if line else str(source)
        super().__init__(f"{loc}: {msg}")


def _numbers(tok, source, lineno):
    out = []
    for t in tok:
        try:
            v = float(t)
        except ValueError:
            raise InstanceFormatError(source, lineno, f"expected a number, got {t!r}") from None
        if not math.isfinite(v) or v < 0:
            raise InstanceFormatError(source, lineno, f"probability {t} is negative or not finite")
        out.append(v)
    return out


def parse_instance(text, source="<string>"):
    """Parse instance text into a validated :class:`CiccInstance`."""
    name = None
    alph = {}
    blocks = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if current is not None:
            if tok == ["end"]:
                current = None
                continue
            blocks[current][1].extend((lineno, v) for v in _numbers(tok, source, lineno))
            continue
        key = tok[0]
        if key == "name" and len(tok) == 2:
            name = tok[1]
        elif key == "alphabet":
            if len(tok) != 3 or not tok[2].isdigit():
                raise InstanceFormatError(source, lineno, "expected 'alphabet NAME SIZE'")
            if tok[1] not in REQUIRED:
                raise InstanceFormatError(source, lineno,
                                          f"unknown variable {tok[1]!r}; expected one of {REQUIRED}")
            if tok[1] in alph:
                raise InstanceFormatError(source, lineno, f"alphabet {tok[1]} declared twice")
            alph[tok[1]] = (int(tok[2]), lineno)
        elif key in ("design", "channel") and len(tok) == 1:
            if key in blocks:
                raise InstanceFormatError(source, lineno, f"second '{key}' block")
            blocks[key] = (lineno, [])
            current = key
        else:
            raise InstanceFormatError(source, lineno, f"unrecognized statement {line!r}")
    if current is not None:
        raise InstanceFormatError(source, blocks[current][0], f"'{current}' block has no 'end'")
    for v in REQUIRED:
        if v not in alph:
            raise InstanceFormatError(source, 0, f"missing 'alphabet {v} SIZE' declaration")
    for b in ("design", "channel"):
        if b not in blocks:
            raise InstanceFormatError(source, 0, f"missing '{b}' block")
    q = {v: alph[v][0] for v in REQUIRED}

    dline, dvals = blocks["design"]
    nd = q["U"] * q["V"] * q["X1"] * q["X2"]
    if len(dvals) != nd:
        raise InstanceFormatError(source, dline, f"design block has {len(dvals)} numbers, expected {nd} "
                                  f"(|U||V||X1||X2|)")
    dp = np.array([v for _, v in dvals])
    if abs(dp.sum() - 1.0) > ROW_TOL:
        raise InstanceFormatError(source, dline, f"design probabilities sum to {dp.sum()!r}, not 1")

    cline, cvals = blocks["channel"]
    rows = q["X1"] * q["X2"]
    width = q["Y1"] * q["Y2"]
    if len(cvals) != rows * width:
        raise InstanceFormatError(source, cline, f"channel block has {len(cvals)} numbers, expected "
                                  f"{rows} rows of {width}")
    ch = np.array([v for _, v in cvals]).reshape(rows, width)
    for r in range(rows):
        s = ch[r].sum()
        if abs(s - 1.0) > ROW_TOL:
            x1, x2 = divmod(r, q["X2"])
            first = cvals[r * width][0]
            raise InstanceFormatError(
                source, first, f"channel row (x1={x1}, x2={x2}) sums to {s!r}, not 1")
    try:
        design = JointDist([(v, q[v]) for v in ("U", "V", "X1", "X2")], dp)
        inst = CiccInstance(ch.reshape(q["X1"], q["X2"], q["Y1"], q["Y2"]), design,
                            name=name or Path(str(source)).stem)
    except MarkovViolation as e:
        raise InstanceFormatError(source, dline, f"design violates the required Markov chain: {e}") from e
    except ValueError as e:
        raise InstanceFormatError(source, 0, str(e)) from e
    return inst


def load_instance(path):
    """Read and validate an instance file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise InstanceFormatError(p, 0, f"cannot read instance file: {e.strerror}") from e
    return parse_instance(text, source=str(p))


def _fmt(v):
    return repr(float(v))


def dump_instance(inst):
    """Serialize an instance to the text format (exact float round trip)."""
    q = inst.q
    lines = [f"name {inst.name}"]
    lines += [f"alphabet {v} {q[v]}" for v in REQUIRED]
    lines.append("design  # rows (u, v, x1), columns x2")
    d = inst.design.probs.reshape(-1, q["X2"])
    lines += ["  " + " ".join(_fmt(v) for v in row) for row in d]
    lines.append("end")
    lines.append("channel  # rows (x1, x2), columns (y1, y2)")
    ch = inst.channel.reshape(q["X1"] * q["X2"], -1)
    lines += ["  " + " ".join(_fmt(v) for v in row) for row in ch]
    lines.append("end")
    return "\n".join(lines) + "\n"


def bundled_names():
    base = resources.files("polarcicc") / "data"
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".cicc"))


def bundled_path(name):
    """Filesystem path of a bundled instance (``name`` without extension)."""
    p = resources.files("polarcicc") / "data" / f"{name}.cicc"
    if not p.is_file():
        raise FileNotFoundError(f"no bundled instance {name!r}; have {bundled_names()}")
    return Path(str(p))
