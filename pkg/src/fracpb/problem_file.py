"""TOML problem files for the command-line tool.

A problem file looks like::

    alpha = 0.5
    t0 = 0.0
    horizon = 1.0
    x0 = [0.0, 1.0]      # weighted initial value J^(1-alpha) x at t0

    [[A]]                # A(t) = sum of matrix * (t - t0)^power
    power = 1
    matrix = [[0.0, 1.0], [0.0, 0.0]]

    [[u]]                # optional, u(t) = sum of vector * (t - t0)^(exponent - 1)
    exponent = 1.0
    vector = [1.0, 0.0]

``grid`` (interval count) and ``tol`` are optional.  Matrices may be nested
rows or a flat row-major list.  Unknown keys are rejected.
"""

from __future__ import annotations

import math
import re
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from .errors import FracError, ProblemFileError
from .frac_core import FracPowerSeries, MatrixPolynomial
from .solver import IvpProblem

TOP_KEYS = {"alpha", "t0", "horizon", "x0", "grid", "tol", "A", "u"}
REQUIRED = ("alpha", "t0", "horizon", "x0", "A")
TABLE_KEYS = {"A": {"power", "matrix"}, "u": {"exponent", "vector"}}


class _Locator:
    """Maps keys back to source lines for error messages."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def _find(self, pattern: str, start: int = 0, stop: int | None = None) -> int | None:
        rx = re.compile(pattern)
        for i in range(start, len(self.lines) if stop is None else stop):
            if rx.match(self.lines[i]):
                return i
        return None

    def _headers(self) -> list[int]:
        return [i for i, ln in enumerate(self.lines) if re.match(r"\s*\[", ln)]

    def key(self, key: str, table: str | None = None, index: int = 0) -> int | None:
        """1-based line of ``key``, top level or inside the ``index``-th ``[[table]]``."""
        headers = self._headers()
        if table is None:
            stop = headers[0] if headers else None
            i = self._find(rf'\s*"?{re.escape(key)}"?\s*=', 0, stop)
            return None if i is None else i + 1
        blocks = [i for i in headers if re.match(rf"\s*\[\[\s*{re.escape(table)}\s*\]\]", self.lines[i])]
        if index >= len(blocks):
            return None
        start = blocks[index]
        stop = next((h for h in headers if h > start), None)
        if key is None:
            return start + 1
        i = self._find(rf'\s*"?{re.escape(key)}"?\s*=', start + 1, stop)
        return start + 1 if i is None else i + 1


def _number(value, what: str, line: int | None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFileError(f"{what} must be a number, got {value!r}", line)
    value = float(value)
    if not math.isfinite(value):
        raise ProblemFileError(f"{what} must be finite", line)
    return value


def _vector(value, n: int | None, what: str, line: int | None) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ProblemFileError(f"{what} must be a non-empty list of numbers", line)
    vec = np.array([_number(v, what, line) for v in value])
    if n is not None and vec.size != n:
        raise ProblemFileError(f"{what} has {vec.size} entries, expected {n}", line)
    return vec


def _matrix(value, n: int, what: str, line: int | None) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ProblemFileError(f"{what} must be a list", line)
    if all(isinstance(row, list) for row in value):
        if len(value) != n or any(len(row) != n for row in value):
            raise ProblemFileError(f"{what} must be {n}x{n}", line)
        flat = [x for row in value for x in row]
    else:
        flat = value
        if len(flat) != n * n:
            raise ProblemFileError(f"{what} has {len(flat)} entries, expected {n * n} ({n}x{n} row-major)", line)
    return np.array([_number(x, what, line) for x in flat]).reshape(n, n)


def _tables(doc: dict, name: str, where: _Locator) -> list[dict]:
    blocks = doc.get(name, [])
    if not isinstance(blocks, list) or not all(isinstance(b, dict) for b in blocks):
        raise ProblemFileError(f"{name} must be written as [[{name}]] tables", where.key(name))
    for i, block in enumerate(blocks):
        extra = set(block) - TABLE_KEYS[name]
        if extra:
            key = sorted(extra)[0]
            raise ProblemFileError(f"unknown key {key!r} in [[{name}]] block {i + 1}", where.key(key, name, i))
        for key in sorted(TABLE_KEYS[name]):
            if key not in block:
                raise ProblemFileError(f"[[{name}]] block {i + 1} is missing {key!r}", where.key(None, name, i))
    return blocks


def parse_problem(text: str) -> IvpProblem:
    """Parse problem-file text into an :class:`IvpProblem`.

    Raises
    ------
    ProblemFileError
        With the offending line number whenever it can be located.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ProblemFileError(f"invalid syntax: {exc}", int(m.group(1)) if m else None) from None
    where = _Locator(text)

    extra = set(doc) - TOP_KEYS
    if extra:
        key = sorted(extra)[0]
        raise ProblemFileError(f"unknown key {key!r}", where.key(key) or where.key(None, key))
    for key in REQUIRED:
        if key not in doc:
            raise ProblemFileError(f"missing required key {key!r}")

    alpha = _number(doc["alpha"], "alpha", where.key("alpha"))
    t0 = _number(doc["t0"], "t0", where.key("t0"))
    T = _number(doc["horizon"], "horizon", where.key("horizon"))
    x0 = _vector(doc["x0"], None, "x0", where.key("x0"))
    n = x0.size

    coeffs = {}
    for i, block in enumerate(_tables(doc, "A", where)):
        line = where.key("power", "A", i)
        power = block["power"]
        if isinstance(power, bool) or not isinstance(power, int) or power < 0:
            raise ProblemFileError(f"power must be a non-negative integer, got {power!r}", line)
        if power in coeffs:
            raise ProblemFileError(f"power {power} given twice in [[A]]", line)
        coeffs[power] = _matrix(block["matrix"], n, f"A matrix for power {power}", where.key("matrix", "A", i))
    if not coeffs:
        raise ProblemFileError("at least one [[A]] block is required")

    u = None
    if "u" in doc:
        terms = []
        for i, block in enumerate(_tables(doc, "u", where)):
            gamma = _number(block["exponent"], "u exponent", where.key("exponent", "u", i))
            vec = _vector(block["vector"], n, "u vector", where.key("vector", "u", i))
            terms.append((gamma, vec))
        u = FracPowerSeries.column(terms, t0, n)

    grid = doc.get("grid")
    if grid is not None and (isinstance(grid, bool) or not isinstance(grid, int)):
        raise ProblemFileError(f"grid must be an integer, got {grid!r}", where.key("grid"))
    tol = doc.get("tol")
    if tol is not None:
        tol = _number(tol, "tol", where.key("tol"))

    try:
        return IvpProblem(alpha, t0, T, MatrixPolynomial(coeffs, t0, n), x0, u, tol=tol, grid=grid)
    except FracError as exc:
        raise ProblemFileError(str(exc)) from None


def load_problem(path: str | Path) -> IvpProblem:
    return parse_problem(Path(path).read_text(encoding="utf-8"))


def dump_problem(p: IvpProblem) -> str:
    """Serialize an exact-path problem; ``parse_problem`` inverts this."""
    if not isinstance(p.A, MatrixPolynomial):
        raise TypeError("only polynomial A can be written to a problem file")
    if p.u is not None and not isinstance(p.u, FracPowerSeries):
        raise TypeError("only series inputs can be written to a problem file")
    doc: dict = {"alpha": p.alpha, "t0": p.t0, "horizon": p.T, "x0": p.x0.tolist()}
    if p.grid is not None:
        doc["grid"] = int(p.grid)
    if p.tol is not None:
        doc["tol"] = p.tol
    coeffs = p.A.reanchor(p.t0).coeffs or {0: np.zeros((p.dim, p.dim))}
    doc["A"] = [{"power": m, "matrix": A.tolist()} for m, A in coeffs.items()]
    if p.u is not None and p.u.terms:
        doc["u"] = [{"exponent": g, "vector": C[:, 0].tolist()} for g, C in p.u.terms]
    return tomli_w.dumps(doc)
