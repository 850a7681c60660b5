"""Word-level computations in a reduced free product of copies of ``(M_d, phi_d)``.

The amalgam is scalar: every copy carries the same state ``phi_d``. A word
``lambda^{m(1)}_{a_1} ... lambda^{m(p)}_{a_p}`` with centered letters and
alternating indices sends the vacuum to the elementary tensor
``a_1 (x) ... (x) a_p``, so two words have vacuum inner product

    <w Omega, v Omega> = prod_i phi_d(b_i^* a_i)

when their index patterns coincide and zero otherwise. No general word
multiplication is implemented; elements are linear combinations of words plus
a scalar, which is all the Cesaro-of-shifts computations need.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError, ShapeError, StructuralError
from .free_group import DecayRecord
from .matrix_core import AlgebraElement, State, operator_norm

CENTER_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AmalgamState:
    """The common state ``phi_d`` on ``M_d`` defining every free factor."""

    phi_d: State

    def __post_init__(self):
        if len(self.phi_d.shape) != 1:
            raise StructuralError("free factors are full matrix algebras M_d")

    @property
    def d(self) -> int:
        return self.phi_d.shape[0]

    @property
    def faithful(self) -> bool:
        return self.phi_d.is_faithful()

    def __call__(self, a) -> complex:
        return self.phi_d(AlgebraElement.from_matrix(a))

    @classmethod
    def trace(cls, d: int) -> "AmalgamState":
        return cls(State(AlgebraElement.from_matrix(np.eye(d) / d)))

    @classmethod
    def from_density(cls, rho) -> "AmalgamState":
        return cls(State(AlgebraElement.from_matrix(rho)))


def center(a, st: AmalgamState) -> np.ndarray:
    """``a - phi_d(a) 1``."""
    a = np.asarray(a, dtype=complex)
    if a.shape != (st.d, st.d):
        raise StructuralError(f"expected a {st.d}x{st.d} matrix, got {a.shape}")
    return a - st(a) * np.eye(st.d)


@dataclass(frozen=True, eq=False)
class CenteredLetter:
    index: int
    element: np.ndarray

    def __post_init__(self):
        a = np.array(self.element, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise StructuralError("letter must be a square matrix")
        if not np.any(a):
            raise DomainError("letter must be nonzero")
        a.setflags(write=False)
        object.__setattr__(self, "element", a)
        object.__setattr__(self, "index", int(self.index))

    def is_centered(self, st: AmalgamState, tol: float = CENTER_TOL) -> bool:
        return abs(st(self.element)) <= tol

    @property
    def norm(self) -> float:
        return operator_norm(self.element)


def letter(index: int, a, st: AmalgamState) -> CenteredLetter:
    """Centered letter from an arbitrary matrix; raises if it centers to zero."""
    return CenteredLetter(index, center(a, st))


@dataclass(frozen=True, eq=False)
class ProductWord:
    letters: tuple[CenteredLetter, ...]

    def __post_init__(self):
        letters = tuple(self.letters)
        if not letters:
            raise DomainError("a word needs at least one letter")
        d = letters[0].element.shape[0]
        if any(l.element.shape != (d, d) for l in letters):
            raise StructuralError("all letters must come from the same M_d")
        for a, b in zip(letters, letters[1:]):
            if a.index == b.index:
                raise DomainError(f"adjacent letters share index {a.index}")
        object.__setattr__(self, "letters", letters)

    @property
    def p(self) -> int:
        return len(self.letters)

    @property
    def pattern(self) -> tuple[int, ...]:
        return tuple(l.index for l in self.letters)

    def same_letters(self, other: "ProductWord") -> bool:
        return self.p == other.p and all(
            a.element is b.element or np.array_equal(a.element, b.element)
            for a, b in zip(self.letters, other.letters))

    def __repr__(self):
        return f"ProductWord(pattern={self.pattern})"


def shift_word(w: ProductWord, k: int) -> ProductWord:
    """Free shift: every index ``m(i)`` becomes ``m(i) + k``."""
    if k == 0:
        return w
    return ProductWord(tuple(CenteredLetter(l.index + k, l.element) for l in w.letters))


@dataclass(frozen=True, eq=False)
class FreeProductElement:
    """``scalar * 1 + sum_t coeff_t * word_t``; coefficients may be Fractions."""

    scalar: complex = 0
    terms: tuple[tuple[ProductWord, object], ...] = ()

    def shift(self, k: int) -> "FreeProductElement":
        return FreeProductElement(self.scalar, tuple((shift_word(w, k), c) for w, c in self.terms))

    def __add__(self, other: "FreeProductElement") -> "FreeProductElement":
        return FreeProductElement(self.scalar + other.scalar, self.terms + other.terms)

    def scale(self, c) -> "FreeProductElement":
        return FreeProductElement(c * self.scalar, tuple((w, c * a) for w, a in self.terms))


def as_element(w: ProductWord, coeff=1) -> FreeProductElement:
    return FreeProductElement(0, ((w, coeff),))


def phi(x: FreeProductElement) -> complex:
    """Vacuum expectation; every word of length >= 1 has expectation 0."""
    return complex(x.scalar)


def _check_centered(w: ProductWord, st: AmalgamState):
    for l in w.letters:
        if l.element.shape != (st.d, st.d):
            raise StructuralError(f"letter is {l.element.shape[0]}x{l.element.shape[0]}, state is on M_{st.d}")
        if not l.is_centered(st):
            raise DomainError(f"letter at index {l.index} is not centered: phi = {st(l.element):.3e}")


def word_inner(w: ProductWord, v: ProductWord, st: AmalgamState) -> complex:
    """``<w Omega, v Omega>``, linear in ``w``."""
    _check_centered(w, st)
    _check_centered(v, st)
    if w.pattern != v.pattern:
        return 0j
    out = 1 + 0j
    for a, b in zip(w.letters, v.letters):
        out *= st(b.element.conj().T @ a.element)
    return out


def gram_matrix(words: Sequence[ProductWord], st: AmalgamState) -> np.ndarray:
    """``G[i, j] = <w_j Omega, w_i Omega>`` so that ``|sum c_j w_j Omega|^2 = c^* G c``."""
    n = len(words)
    g = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            g[i, j] = word_inner(words[j], words[i], st)
    return g


def _float(c) -> complex:
    return complex(float(c)) if isinstance(c, Fraction) else complex(c)


def gns_norm_squared(x: FreeProductElement, st: AmalgamState) -> float:
    """``|x Omega|^2``; only words sharing an index pattern interact."""
    groups: dict[tuple[int, ...], list] = defaultdict(list)
    for w, c in x.terms:
        groups[w.pattern].append((w, _float(c)))
    total = abs(complex(x.scalar)) ** 2
    for members in groups.values():
        words = [w for w, _ in members]
        c = np.array([c for _, c in members])
        total += float(np.real(c.conj() @ gram_matrix(words, st) @ c))
    return total


def gns_norm(x: FreeProductElement, st: AmalgamState) -> float:
    """Vacuum (GNS) norm, a lower bound for the reduced C*-norm."""
    return math.sqrt(max(0.0, gns_norm_squared(x, st)))


def cesaro_of_shifts(w: ProductWord, ks: Sequence[int]) -> FreeProductElement:
    """``(1/n) sum_j alpha^{k_j}(w)`` with exact weights ``1/n``."""
    n = len(ks)
    if n == 0:
        raise DomainError("need at least one shift")
    c = Fraction(1, n)
    return FreeProductElement(0, tuple((shift_word(w, k), c) for k in ks))


def _cesaro_shape(x: FreeProductElement) -> tuple[ProductWord, int]:
    """Return (base word, n) if ``x`` is a uniform average of distinct shifts of one word."""
    if x.scalar != 0 or not x.terms:
        raise ShapeError("expected a Cesaro average of shifted words with no scalar part")
    n = len(x.terms)
    base = x.terms[0][0]
    patterns = set()
    for w, c in x.terms:
        cf = _float(c)
        if c != Fraction(1, n) and (cf.imag or not math.isclose(cf.real, 1 / n, rel_tol=1e-15)):
            raise ShapeError("coefficients are not the uniform weight 1/n")
        if not w.same_letters(base):
            raise ShapeError("terms are not shifts of a single word")
        offsets = {a - b for a, b in zip(w.pattern, base.pattern)}
        if len(offsets) != 1:
            raise ShapeError("terms are not shifts of a single word")
        patterns.add(w.pattern)
    if len(patterns) != n:
        raise ShapeError("shifts are not distinct")
    return base, n


def ad_norm_bound(x: FreeProductElement) -> float:
    """``(2p + 1) / sqrt(n) * prod |a_i|`` for a uniform average of ``n`` distinct shifts."""
    w, n = _cesaro_shape(x)
    prod = math.prod(l.norm for l in w.letters)
    return (2 * w.p + 1) / math.sqrt(n) * prod


def word_label(w: ProductWord) -> str:
    return "-".join(str(i) for i in w.pattern)


def product_decay_experiment(w: ProductWord, n_values: Sequence[int], st: AmalgamState,
                             label: str | None = None) -> list[DecayRecord]:
    """Per ``n``: GNS norm of the Cesaro average of shifts against the ``(2p+1)/sqrt(n)`` bound.

    ``lower_exact`` is the exact rational factor ``sum |c|^2 = 1/n`` that
    multiplies ``|w Omega|^2`` once the shifts are orthogonal.
    """
    _check_centered(w, st)
    label = label or word_label(w)
    rows = []
    for n in n_values:
        x = cesaro_of_shifts(w, range(1, n + 1))
        rows.append(DecayRecord(label, n, Fraction(1, n), gns_norm(x, st), ad_norm_bound(x),
                                "free_product", w.p))
    return rows
