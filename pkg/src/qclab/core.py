"""Partial functions, exact distributions, restriction cells and likelihood ratios.

Strings over an alphabet of size q are written with the digits ``0..q-1``; a
cell is a string over the same digits plus ``*`` for unqueried positions.
All probability arithmetic is done with :class:`fractions.Fraction`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

from mpmath import iv

STAR = "*"


class QclabError(Exception):
    """Base class for all errors raised by this package."""


class ZeroMass(QclabError):
    pass


class Untrimmed(QclabError):
    """Both hypotheses give zero mass to a cell, so its likelihood ratio is undefined."""


class ParseError(QclabError):
    def __init__(self, source: str, line: int, message: str):
        super().__init__(f"{source}:{line}: {message}")
        self.source = source
        self.line = line


@dataclass(frozen=True)
class Alphabet:
    size: int = 2

    def __post_init__(self):
        if not 2 <= self.size <= 10:
            raise ValueError(f"alphabet size must be in [2, 10], got {self.size}")

    @property
    def symbols(self) -> str:
        return "0123456789"[: self.size]

    def strings(self, n: int) -> Iterator[str]:
        for t in itertools.product(self.symbols, repeat=n):
            yield "".join(t)


BINARY = Alphabet(2)


# --- cells -----------------------------------------------------------------

def full_cell(n: int) -> str:
    return STAR * n


def in_cell(x: str, cell: str) -> bool:
    return all(c == STAR or c == s for s, c in zip(x, cell))


def restrict(cell: str, i: int, sym: str) -> str:
    if cell[i] != STAR:
        raise ValueError(f"position {i} already fixed in {cell!r}")
    return cell[:i] + sym + cell[i + 1:]


def free_positions(cell: str) -> list[int]:
    return [i for i, c in enumerate(cell) if c == STAR]


def fixed_count(cell: str) -> int:
    return sum(c != STAR for c in cell)


def intersect(c1: str, c2: str) -> str | None:
    out = []
    for a, b in zip(c1, c2):
        if a == STAR:
            out.append(b)
        elif b == STAR or a == b:
            out.append(a)
        else:
            return None
    return "".join(out)


# --- functions -------------------------------------------------------------

@dataclass(frozen=True)
class PartialFunction:
    """Truth table of f: Sigma^n -> {0, 1, None}; missing keys are undefined."""

    n: int
    table: Mapping[str, int | None]
    alphabet: Alphabet = BINARY

    def __post_init__(self):
        table = {}
        for x, v in self.table.items():
            if len(x) != self.n or any(s not in self.alphabet.symbols for s in x):
                raise ValueError(f"bad input string {x!r} for n={self.n}")
            if v not in (0, 1, None):
                raise ValueError(f"bad output {v!r} at {x!r}")
            table[x] = v
        for x in self.alphabet.strings(self.n):
            table.setdefault(x, None)
        object.__setattr__(self, "table", table)

    def __call__(self, x: str) -> int | None:
        return self.table[x]

    def inputs(self, value: int | None = ...) -> list[str]:
        if value is ...:
            return [x for x, v in self.table.items() if v is not None]
        return [x for x, v in self.table.items() if v == value]

    @classmethod
    def from_callable(cls, n, fn, alphabet: Alphabet = BINARY) -> "PartialFunction":
        return cls(n, {x: fn(x) for x in alphabet.strings(n)}, alphabet)

    def is_total(self) -> bool:
        return all(v is not None for v in self.table.values())


def xor_fn(n: int) -> PartialFunction:
    return PartialFunction.from_callable(n, lambda x: x.count("1") % 2)


def and_fn(n: int) -> PartialFunction:
    return PartialFunction.from_callable(n, lambda x: int("0" not in x))


def or_fn(n: int) -> PartialFunction:
    return PartialFunction.from_callable(n, lambda x: int("1" in x))


def dictator_fn(n: int, i: int = 0) -> PartialFunction:
    return PartialFunction.from_callable(n, lambda x: int(x[i]))


def constant_fn(n: int, b: int) -> PartialFunction:
    return PartialFunction.from_callable(n, lambda x: b)


# --- distributions ---------------------------------------------------------

@dataclass(frozen=True)
class Dist:
    n: int
    mass: Mapping[str, Fraction]
    alphabet: Alphabet = BINARY
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        mass = {}
        for x, p in self.mass.items():
            p = Fraction(p)
            if len(x) != self.n or any(s not in self.alphabet.symbols for s in x):
                raise ValueError(f"bad support string {x!r} for n={self.n}")
            if p < 0:
                raise ValueError(f"negative mass at {x!r}")
            if p:
                mass[x] = p
        if not mass:
            raise ValueError("distribution has empty support")
        total = sum(mass.values())
        if total != 1:
            raise ValueError(f"masses sum to {total}, not 1")
        object.__setattr__(self, "mass", dict(sorted(mass.items())))

    def __call__(self, x: str) -> Fraction:
        return self.mass.get(x, Fraction(0))

    @property
    def support(self) -> list[str]:
        return list(self.mass)

    @classmethod
    def uniform(cls, strings: Iterable[str], alphabet: Alphabet = BINARY) -> "Dist":
        strings = list(strings)
        p = Fraction(1, len(strings))
        return cls(len(strings[0]), {x: p for x in strings}, alphabet)

    @classmethod
    def from_weights(cls, weights: Mapping[str, int | Fraction], alphabet: Alphabet = BINARY) -> "Dist":
        if not weights:
            raise ValueError("empty distribution")
        total = sum(Fraction(w) for w in weights.values())
        n = len(next(iter(weights)))
        return cls(n, {x: Fraction(w) / total for x, w in weights.items()}, alphabet)


def cell_mass(d: Dist, c: str) -> Fraction:
    if len(c) != d.n:
        raise ValueError(f"cell {c!r} does not have arity {d.n}")
    cache = d._cache
    hit = cache.get(c)
    if hit is None:
        hit = sum((p for x, p in d.mass.items() if in_cell(x, c)), Fraction(0))
        cache[c] = hit
    return hit


def conditional(d: Dist, c: str) -> Dist:
    m = cell_mass(d, c)
    if m == 0:
        raise ZeroMass(f"cell {c!r} has zero mass")
    return Dist(d.n, {x: p / m for x, p in d.mass.items() if in_cell(x, c)}, d.alphabet)


def product(dists: Iterable[Dist]) -> Dist:
    """Distribution of the concatenation of independent samples."""
    dists = list(dists)
    mass = {}
    for combo in itertools.product(*(d.mass.items() for d in dists)):
        x = "".join(s for s, _ in combo)
        mass[x] = math.prod((p for _, p in combo), start=Fraction(1))
    return Dist(sum(d.n for d in dists), mass, dists[0].alphabet)


def mixture(weighted: Iterable[tuple[Fraction, Dist]]) -> Dist:
    weighted = list(weighted)
    mass: dict[str, Fraction] = {}
    for w, d in weighted:
        for x, p in d.mass.items():
            mass[x] = mass.get(x, Fraction(0)) + Fraction(w) * p
    return Dist(weighted[0][1].n, mass, weighted[0][1].alphabet)


@dataclass(frozen=True)
class DistPair:
    d0: Dist
    d1: Dist
    f: PartialFunction | None = None

    def __post_init__(self):
        if self.d0.n != self.d1.n:
            raise ValueError("D0 and D1 have different arity")
        if self.f is not None:
            for b, d in ((0, self.d0), (1, self.d1)):
                bad = [x for x in d.support if self.f(x) != b]
                if bad:
                    raise ValueError(f"D{b} puts mass on {bad[0]!r} where f != {b}")

    @property
    def n(self) -> int:
        return self.d0.n

    @property
    def alphabet(self) -> Alphabet:
        return self.d0.alphabet

    def dist(self, b: int) -> Dist:
        return self.d1 if b else self.d0

    def balanced(self) -> Dist:
        return mixture([(Fraction(1, 2), self.d0), (Fraction(1, 2), self.d1)])

    def conditioned(self, c: str) -> "DistPair":
        return DistPair(conditional(self.d0, c), conditional(self.d1, c), self.f)

    @classmethod
    def from_dist(cls, f: PartialFunction, d: Dist) -> "DistPair":
        """Split d into its conditional distributions on f^-1(0) and f^-1(1)."""
        parts = []
        for b in (0, 1):
            w = {x: p for x, p in d.mass.items() if f(x) == b}
            if not w:
                raise ValueError(f"distribution has no mass on f^-1({b})")
            parts.append(Dist.from_weights(w, d.alphabet))
        return cls(parts[0], parts[1], f)


# --- likelihood ratios -----------------------------------------------------

def _log_fraction(r: Fraction) -> float:
    return math.log(r.numerator) - math.log(r.denominator)


def cmp_exp(r: Fraction, tau) -> int:
    """Sign of r - e**tau for rational r > 0 and rational tau, decided exactly."""
    r = Fraction(r)
    tau = Fraction(tau)
    if r <= 0:
        return -1
    if tau == 0:
        return (r > 1) - (r < 1)
    gap = _log_fraction(r) - float(tau)
    if abs(gap) > 1e-6 * max(1.0, abs(float(tau))):
        return 1 if gap > 0 else -1
    old = iv.prec
    try:
        prec = 80
        while prec <= 1 << 16:
            iv.prec = prec
            e = iv.exp(iv.mpf(tau.numerator) / tau.denominator)
            x = iv.mpf(r.numerator) / r.denominator
            if x.b < e.a:
                return -1
            if x.a > e.b:
                return 1
            prec *= 2
    finally:
        iv.prec = old
    raise ArithmeticError(f"could not separate {r} from exp({tau})")


@dataclass(frozen=True)
class ExpThreshold:
    """The irrational threshold e**tau, compared against ratios exactly."""

    tau: Fraction

    def __post_init__(self):
        object.__setattr__(self, "tau", Fraction(self.tau))

    def __float__(self):
        return math.exp(self.tau)

    def __repr__(self):
        return f"exp({self.tau})"


@dataclass(frozen=True)
class LikelihoodRatio:
    numerator: Fraction
    denominator: Fraction

    def __post_init__(self):
        if self.numerator == 0 and self.denominator == 0:
            raise Untrimmed("likelihood ratio 0/0")
        if self.numerator < 0 or self.denominator < 0:
            raise ValueError("negative mass")

    @property
    def is_infinite(self) -> bool:
        return self.denominator == 0

    @property
    def is_zero(self) -> bool:
        return self.numerator == 0

    @property
    def value(self) -> Fraction | float:
        if self.is_infinite:
            return math.inf
        return Fraction(self.numerator) / self.denominator

    def log(self) -> float:
        if self.is_infinite:
            return math.inf
        if self.is_zero:
            return -math.inf
        return _log_fraction(self.value)

    def ge(self, threshold) -> bool:
        """Exact test lr >= threshold (a rational, an ExpThreshold, or math.inf)."""
        if isinstance(threshold, ExpThreshold):
            if self.is_infinite:
                return True
            if self.is_zero:
                return False
            return cmp_exp(self.value, threshold.tau) >= 0
        if threshold == math.inf:
            return self.is_infinite
        return self.numerator >= Fraction(threshold) * self.denominator

    def le(self, threshold) -> bool:
        if isinstance(threshold, ExpThreshold):
            if self.is_zero:
                return True
            if self.is_infinite:
                return False
            return cmp_exp(self.value, threshold.tau) <= 0
        return self.numerator <= Fraction(threshold) * self.denominator

    def __mul__(self, other: "LikelihoodRatio") -> "LikelihoodRatio":
        if (self.is_zero and other.is_infinite) or (self.is_infinite and other.is_zero):
            raise Untrimmed("product 0 * inf is undefined")
        return LikelihoodRatio(self.numerator * other.numerator, self.denominator * other.denominator)

    def __eq__(self, other):
        if isinstance(other, LikelihoodRatio):
            return self.numerator * other.denominator == other.numerator * self.denominator
        if other == math.inf:
            return self.is_infinite
        try:
            return not self.is_infinite and self.value == Fraction(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash(self.value)

    def __repr__(self):
        return f"lr({self.value})"


def lr(pair: DistPair, c: str) -> LikelihoodRatio:
    return LikelihoodRatio(cell_mass(pair.d1, c), cell_mass(pair.d0, c))


# --- text formats ----------------------------------------------------------

def _parse_lines(text: str, source: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_function(text: str, source: str = "<function>", alphabet: Alphabet = BINARY) -> PartialFunction:
    """One line per input: ``<string> <0|1|*>``; unlisted inputs are undefined."""
    table: dict[str, int | None] = {}
    n = None
    for lineno, parts in _parse_lines(text, source):
        if len(parts) != 2:
            raise ParseError(source, lineno, "expected '<string> <0|1|*>'")
        x, v = parts
        if n is None:
            n = len(x)
        if len(x) != n or any(s not in alphabet.symbols for s in x):
            raise ParseError(source, lineno, f"bad input string {x!r}")
        if v not in ("0", "1", "*"):
            raise ParseError(source, lineno, f"bad output {v!r}")
        if x in table:
            raise ParseError(source, lineno, f"duplicate input {x!r}")
        table[x] = None if v == "*" else int(v)
    if n is None:
        raise ParseError(source, 0, "empty truth table")
    return PartialFunction(n, table, alphabet)


def parse_dist(text: str, source: str = "<dist>", alphabet: Alphabet = BINARY) -> Dist:
    """One line per support point: ``<string> <p>/<q>``; masses must sum to exactly 1."""
    mass: dict[str, Fraction] = {}
    n = None
    last = 0
    for lineno, parts in _parse_lines(text, source):
        last = lineno
        if len(parts) != 2:
            raise ParseError(source, lineno, "expected '<string> <p>/<q>'")
        x, p = parts
        if n is None:
            n = len(x)
        if len(x) != n or any(s not in alphabet.symbols for s in x):
            raise ParseError(source, lineno, f"bad support string {x!r}")
        if x in mass:
            raise ParseError(source, lineno, f"duplicate support point {x!r}")
        try:
            mass[x] = Fraction(p)
        except (ValueError, ZeroDivisionError):
            raise ParseError(source, lineno, f"bad probability {p!r}") from None
        if mass[x] < 0:
            raise ParseError(source, lineno, f"negative probability {p!r}")
    if n is None:
        raise ParseError(source, 0, "empty distribution")
    total = sum(mass.values())
    if total != 1:
        raise ParseError(source, last, f"masses sum to {total}, not 1")
    return Dist(n, mass, alphabet)


def format_function(f: PartialFunction) -> str:
    return "".join(f"{x} {'*' if v is None else v}\n" for x, v in sorted(f.table.items()))


def format_dist(d: Dist) -> str:
    return "".join(f"{x} {p.numerator}/{p.denominator}\n" for x, p in d.mass.items())


def parse_pair(text: str, source: str = "<pair>", f: PartialFunction | None = None,
               alphabet: Alphabet = BINARY) -> DistPair:
    """One line per support point: ``<0|1> <string> <p>/<q>``; each side sums to exactly 1."""
    sides: dict[str, list] = {"0": [], "1": []}
    for lineno, parts in _parse_lines(text, source):
        if len(parts) != 3 or parts[0] not in sides:
            raise ParseError(source, lineno, "expected '<0|1> <string> <p>/<q>'")
        # keep line numbers aligned for error messages
        sides[parts[0]].append((lineno, f"{parts[1]} {parts[2]}"))
    dists = []
    for b in "01":
        if not sides[b]:
            raise ParseError(source, 0, f"no lines for D{b}")
        width = max(ln for ln, _ in sides[b])
        lines = [""] * width
        for ln, body in sides[b]:
            lines[ln - 1] = body
        dists.append(parse_dist("\n".join(lines), source, alphabet))
    try:
        return DistPair(dists[0], dists[1], f)
    except ValueError as e:
        raise ParseError(source, 0, str(e)) from None


def format_pair(pair: DistPair) -> str:
    return "".join(f"{b} {x} {p.numerator}/{p.denominator}\n"
                   for b in (0, 1) for x, p in pair.dist(b).mass.items())
