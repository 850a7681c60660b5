"""Exact group algebra of the free group on generators ``g_i``, ``i`` in Z.

Words are reduced tuples of ``(index, sign)`` letters. Group-algebra elements
map words to exact Gaussian-rational coefficients, so the squared l2 norms of
Cesaro averages along the free shift come out as exact rationals.

The reduced C*-norm is never computed. What is reported is the sandwich

    |f|_2  <=  |lambda(f)|  <=  Haagerup bound,

with the lower end exact and the upper end either the homogeneous free-group
bound ``sum_p (p + 1) |f_p|_2`` or a rapid-decay bound ``C (1 + L)^s |f|_2``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from .errors import DomainError

Letter = tuple[int, int]


# exact complex rationals ----------------------------------------------------

@dataclass(frozen=True)
class QQi:
    """Gaussian rational ``re + i im`` with Fraction parts."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", Fraction(self.re))
        object.__setattr__(self, "im", Fraction(self.im))

    @classmethod
    def coerce(cls, x) -> "QQi":
        if isinstance(x, QQi):
            return x
        if isinstance(x, (int, Rational)):
            return cls(Fraction(x))
        if isinstance(x, float):
            return cls(Fraction(x))
        if isinstance(x, complex):
            return cls(Fraction(x.real), Fraction(x.imag))
        raise TypeError(f"cannot coerce {type(x).__name__} to QQi")

    def __add__(self, other):
        o = QQi.coerce(other)
        return QQi(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return QQi(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-QQi.coerce(other))

    def __mul__(self, other):
        o = QQi.coerce(other)
        return QQi(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def conj(self) -> "QQi":
        return QQi(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if not self.im:
            return str(self.re)
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


# words ----------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class GroupWord:
    """Reduced word; ``letters[i] = (generator index, +1 or -1)``."""

    letters: tuple[Letter, ...] = ()

    def __post_init__(self):
        letters = tuple((int(i), int(e)) for i, e in self.letters)
        for _, e in letters:
            if e not in (1, -1):
                raise DomainError(f"exponent sign must be +1 or -1, got {e}")
        for (i, e), (j, f) in zip(letters, letters[1:]):
            if i == j and e == -f:
                raise DomainError("word is not reduced; build it with reduce()")
        object.__setattr__(self, "letters", letters)

    def __len__(self):
        return len(self.letters)

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        return reduce(self.letters + other.letters)

    def inverse(self) -> "GroupWord":
        return GroupWord(tuple((i, -e) for i, e in reversed(self.letters)))

    def __str__(self):
        if not self.letters:
            return "e"
        return " ".join(f"g{i}" if e == 1 else f"g{i}^-1" for i, e in self.letters)


EMPTY = GroupWord()


def reduce(letters: Iterable[Letter]) -> GroupWord:
    """Free reduction by a single stack pass."""
    out: list[Letter] = []
    for i, e in letters:
        if out and out[-1][0] == i and out[-1][1] == -e:
            out.pop()
        else:
            out.append((int(i), int(e)))
    return GroupWord(tuple(out))


def generator(i: int, sign: int = 1) -> GroupWord:
    return GroupWord(((i, sign),))


_TOKEN = re.compile(r"^g(-?\d+)(\^(-?1))?$")


def parse_word(text: str) -> GroupWord:
    """Parse ``"g0 g3^-1 g0"``; ``"e"`` or blank is the identity."""
    tokens = text.split()
    if tokens == ["e"]:
        return EMPTY
    letters = []
    for tok in tokens:
        m = _TOKEN.match(tok)
        if not m:
            raise DomainError(f"bad word token {tok!r}")
        letters.append((int(m.group(1)), int(m.group(3) or 1)))
    return reduce(letters)


def length(w: GroupWord) -> int:
    return len(w)


def shift(w: GroupWord, k: int) -> GroupWord:
    """Free shift ``g_i -> g_{i+k}`` on every letter."""
    return GroupWord(tuple((i + k, e) for i, e in w.letters))


def orbit_type(w: GroupWord) -> str:
    """``"Fixed"`` iff the free shift leaves ``w`` unchanged, else ``"Infinite"``."""
    return "Fixed" if shift(w, 1) == w else "Infinite"


# group algebra --------------------------------------------------------------

class GroupAlgebraElement:
    """Finitely supported function on the free group with exact coefficients."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[GroupWord, object] | None = None):
        clean: dict[GroupWord, QQi] = {}
        for w, c in (terms or {}).items():
            c = QQi.coerce(c)
            if c:
                clean[w] = c
        self._terms = clean

    @classmethod
    def delta(cls, w: GroupWord, c=1) -> "GroupAlgebraElement":
        return cls({w: c})

    @property
    def terms(self) -> Mapping[GroupWord, QQi]:
        return dict(self._terms)

    def support(self) -> list[GroupWord]:
        return list(self._terms)

    def __len__(self):
        return len(self._terms)

    def coefficient(self, w: GroupWord) -> QQi:
        return self._terms.get(w, QQi())

    def __add__(self, other: "GroupAlgebraElement") -> "GroupAlgebraElement":
        out = dict(self._terms)
        for w, c in other._terms.items():
            out[w] = out[w] + c if w in out else c
        return GroupAlgebraElement(out)

    def scale(self, c) -> "GroupAlgebraElement":
        c = QQi.coerce(c)
        return GroupAlgebraElement({w: c * v for w, v in self._terms.items()})

    def __mul__(self, other: "GroupAlgebraElement") -> "GroupAlgebraElement":
        """Convolution product."""
        out: dict[GroupWord, QQi] = {}
        for u, a in self._terms.items():
            for v, b in other._terms.items():
                w = u * v
                out[w] = out.get(w, QQi()) + a * b
        return GroupAlgebraElement(out)

    def adjoint(self) -> "GroupAlgebraElement":
        return GroupAlgebraElement({w.inverse(): c.conj() for w, c in self._terms.items()})

    def shift(self, k: int) -> "GroupAlgebraElement":
        return GroupAlgebraElement({shift(w, k): c for w, c in self._terms.items()})

    def homogeneous_parts(self) -> dict[int, "GroupAlgebraElement"]:
        parts: dict[int, dict] = {}
        for w, c in self._terms.items():
            parts.setdefault(len(w), {})[w] = c
        return {p: GroupAlgebraElement(t) for p, t in sorted(parts.items())}

    def max_length(self) -> int:
        return max((len(w) for w in self._terms), default=0)

    def __eq__(self, other):
        return isinstance(other, GroupAlgebraElement) and self._terms == other._terms

    def __repr__(self):
        body = " + ".join(f"{c}*[{w}]" for w, c in sorted(self._terms.items()))
        return f"GroupAlgebraElement({body or '0'})"


class L2Norm(NamedTuple):
    square: Fraction
    value: float


def l2_norm(f: GroupAlgebraElement) -> L2Norm:
    sq = sum((c.abs2() for c in f.terms.values()), Fraction(0))
    return L2Norm(sq, math.sqrt(sq))


@dataclass(frozen=True)
class RDConstants:
    """Rapid-decay constants in ``|lambda(f)| <= C (1 + L)^s |f|_2``."""

    C: float
    s: float

    def __post_init__(self):
        if self.C < 1:
            raise DomainError("RD constant C must be >= 1")
        if self.s < 0:
            raise DomainError("RD exponent s must be >= 0")


class FreeGroupSharp:
    """Marker for the homogeneous Haagerup bound ``sum_p (p + 1) |f_p|_2``."""

    def __repr__(self):
        return "FreeGroupSharp()"


SHARP = FreeGroupSharp()


def haagerup_bound(f: GroupAlgebraElement, constants: RDConstants | FreeGroupSharp = SHARP) -> float:
    if isinstance(constants, FreeGroupSharp):
        return sum((p + 1) * l2_norm(fp).value for p, fp in f.homogeneous_parts().items())
    return constants.C * (1 + f.max_length()) ** constants.s * l2_norm(f).value


def constants_mode(constants: RDConstants | FreeGroupSharp) -> str:
    if isinstance(constants, FreeGroupSharp):
        return "free_group_sharp"
    return f"rd(C={constants.C!r},s={constants.s!r})"


def subsequence_shift_average(g: GroupWord, ks: Sequence[int]) -> GroupAlgebraElement:
    """``(1/n) sum_j lambda_{shift(g, k_j)}`` over the given shift amounts."""
    n = len(ks)
    if n == 0:
        raise DomainError("need at least one shift")
    w = Fraction(1, n)
    out: dict[GroupWord, QQi] = {}
    for k in ks:
        h = shift(g, k)
        out[h] = out.get(h, QQi()) + w
    return GroupAlgebraElement(out)


def cesaro_shift_average(g: GroupWord, n: int) -> GroupAlgebraElement:
    """``(1/n) sum_{k=1}^{n} lambda_{shift(g, k)}``."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    return subsequence_shift_average(g, range(1, n + 1))


def fixed_subgroup_projection(f: GroupAlgebraElement,
                              member: Callable[[GroupWord], bool]) -> GroupAlgebraElement:
    """Restrict coefficients to a subgroup ``H`` (the trace-preserving expectation onto it)."""
    return GroupAlgebraElement({w: c for w, c in f.terms.items() if member(w)})


def is_identity(w: GroupWord) -> bool:
    return len(w) == 0


@dataclass(frozen=True)
class DecayRecord:
    """One row of a decay experiment: the exact lower end and the analytic upper end."""

    label: str
    n: int
    lower_exact: Fraction | None
    lower_float: float
    upper_float: float
    constants_mode: str
    p: int | None = None


def decay_experiment(g: GroupWord, n_values: Sequence[int],
                     constants: RDConstants | FreeGroupSharp = SHARP) -> list[DecayRecord]:
    if len(g) == 0:
        raise DomainError("the identity word is fixed by the shift; nothing decays")
    rows = []
    for n in n_values:
        f = cesaro_shift_average(g, n)
        lo = l2_norm(f)
        rows.append(DecayRecord(str(g), n, lo.square, lo.value, haagerup_bound(f, constants),
                                constants_mode(constants)))
    return rows
