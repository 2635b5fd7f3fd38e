"""Text syntax for measures, as accepted on the command line.

::

    semicircle(var=<r>)        mp(lambda=<r>)        cauchy(gamma=<r>)
    atoms(<x>:<w>, ...)        scale(<spec>, <a>)    shift(<spec>, <b>)
    quantize(<spec>, <n>)      empirical(@<path>)

Whitespace is ignored between tokens.  ``empirical`` reads a text file with
one real per line.  :func:`format_measure` prints the canonical form, which
parses back to an equal measure.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import FreeConvError, InvalidParameter, ParseError
from .measures import (
    AffineImage,
    Atoms,
    Cauchy,
    Empirical,
    MarchenkoPastur,
    MeasureSpec,
    Semicircle,
    quantize,
    scale,
    shift,
)

__all__ = ["parse_measure_spec", "format_measure", "read_reals"]

_REAL = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_INT = re.compile(r"\d+")
_NAME = re.compile(r"[A-Za-z_]+")
_NAMES = ("semicircle", "mp", "cauchy", "atoms", "scale", "shift", "quantize", "empirical")


def read_reals(path) -> np.ndarray:
    """Reals from a text file, one per line; blank lines are skipped."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise InvalidParameter(f"{path}:{lineno}: not a real number: {line!r}") from None
    if not values:
        raise InvalidParameter(f"{path}: no values")
    return np.array(values)


class _Parser:
    def __init__(self, text: str, base_dir):
        self.text = text
        self.pos = 0
        self.base_dir = Path(base_dir) if base_dir is not None else None

    def offset(self, pos=None) -> int:
        """Byte offset of a character position."""
        return len(self.text[: self.pos if pos is None else pos].encode("utf-8"))

    def fail(self, expected: str, pos=None):
        where = self.pos if pos is None else pos
        found = self.text[where : where + 10] or "end of input"
        raise ParseError(f"expected {expected}, found {found!r}", self.offset(where), expected)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, char) -> bool:
        self.skip()
        return self.text.startswith(char, self.pos)

    def expect(self, char):
        if not self.peek(char):
            self.fail(repr(char))
        self.pos += len(char)

    def match(self, regex, expected):
        self.skip()
        m = regex.match(self.text, self.pos)
        if not m:
            self.fail(expected)
        self.pos = m.end()
        return m.group()

    def real(self) -> float:
        return float(self.match(_REAL, "a real number"))

    def keyword_arg(self, key) -> float:
        start = self.pos
        self.skip()
        if self.match(_NAME, f"{key!r}") != key:
            self.fail(f"{key!r}", start)
        self.expect("=")
        return self.real()

    def spec(self) -> MeasureSpec:
        self.skip()
        start = self.pos
        name = self.match(_NAME, "a measure name").lower()
        if name not in _NAMES:
            self.fail("one of " + ", ".join(_NAMES), start)
        self.expect("(")
        try:
            m = getattr(self, "_" + name)()
        except ParseError:
            raise
        except FreeConvError as exc:
            raise ParseError(f"invalid {name}(...): {exc}", self.offset(start), "valid parameters") from exc
        self.expect(")")
        return m

    def _semicircle(self):
        return Semicircle(self.keyword_arg("var"))

    def _mp(self):
        return MarchenkoPastur(self.keyword_arg("lambda"))

    def _cauchy(self):
        return Cauchy(self.keyword_arg("gamma"))

    def _atoms(self):
        pairs = []
        while True:
            x = self.real()
            self.expect(":")
            pairs.append((x, self.real()))
            if not self.peek(","):
                break
            self.pos += 1
        return Atoms.from_pairs(pairs)

    def _scale(self):
        inner = self.spec()
        self.expect(",")
        return scale(inner, self.real())

    def _shift(self):
        inner = self.spec()
        self.expect(",")
        return shift(inner, self.real())

    def _quantize(self):
        inner = self.spec()
        self.expect(",")
        return quantize(inner, int(self.match(_INT, "a positive integer")))

    def _empirical(self):
        self.expect("@")
        end = self.text.find(")", self.pos)
        if end < 0:
            self.fail("')'", len(self.text))
        raw = self.text[self.pos : end].strip()
        if not raw:
            self.fail("a file path")
        self.pos = end
        path = Path(raw)
        if self.base_dir is not None and not path.is_absolute():
            path = self.base_dir / path
        try:
            values = read_reals(path)
        except OSError as exc:
            raise InvalidParameter(f"cannot read {raw}: {exc.strerror}") from exc
        return Empirical(tuple(values), source=raw)


def parse_measure_spec(text: str, base_dir=None) -> MeasureSpec:
    """Parse one measure from ``text``.

    Parameters
    ----------
    text : str
        Source text, e.g. ``"shift(semicircle(var=1), 0.5)"``.
    base_dir : path-like, optional
        Directory against which relative ``empirical(@...)`` paths resolve.

    Raises
    ------
    ParseError
        On a syntax error or invalid parameters; ``offset`` is the byte
        offset of the offending token.

    Examples
    --------
    >>> parse_measure_spec("atoms(-1:0.5, 1:0.5)")
    Atoms(positions=(-1.0, 1.0), weights=(0.5, 0.5))
    """
    if not text or not text.strip():
        raise ParseError("empty measure spec", 0, "a measure name")
    p = _Parser(text, base_dir)
    m = p.spec()
    p.skip()
    if p.pos != len(text):
        p.fail("end of input")
    return m


def format_measure(m: MeasureSpec) -> str:
    """Canonical text of ``m``; ``parse_measure_spec(format_measure(m)) == m``."""
    if isinstance(m, Semicircle):
        return f"semicircle(var={m.variance!r})"
    if isinstance(m, MarchenkoPastur):
        return f"mp(lambda={m.lam!r})"
    if isinstance(m, Cauchy):
        return f"cauchy(gamma={m.gamma!r})"
    if isinstance(m, Empirical) and m.source is not None:
        return f"empirical(@{m.source})"
    if isinstance(m, Atoms):
        return "atoms(" + ",".join(f"{x!r}:{w!r}" for x, w in zip(m.positions, m.weights)) + ")"
    if isinstance(m, Empirical):
        return "atoms(" + ",".join(f"{float(x)!r}:{float(w)!r}" for x, w in zip(m.positions, m.weights)) + ")"
    if isinstance(m, AffineImage):
        out = format_measure(m.inner)
        if m.scale != 1.0:
            out = f"scale({out},{m.scale!r})"
        if m.shift != 0.0 or m.scale == 1.0:
            out = f"shift({out},{m.shift!r})"
        return out
    raise InvalidParameter(f"no text form for {type(m).__name__}")
