"""Finite direct sums of full matrix algebras, their norms, spectra and states.

An :class:`AlgebraElement` is an element of ``M_{d_1} + ... + M_{d_m}``. Elements
are vectorized by flattening each block row-major and concatenating, so the
total vector length is ``D = sum(d_j**2)`` and matrix units form an orthonormal
basis for the Hilbert-Schmidt inner product.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericalError, StructuralError

DEFAULT_TOL = 1e-9

Shape = tuple[int, ...]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """Block-diagonal complex matrix; ``blocks[j]`` is ``d_j x d_j``."""

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        blocks = tuple(_frozen(b) for b in self.blocks)
        if not blocks:
            raise StructuralError("an algebra needs at least one block")
        for b in blocks:
            if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape[0] == 0:
                raise StructuralError(f"block of shape {b.shape} is not square")
        object.__setattr__(self, "blocks", blocks)

    # construction -----------------------------------------------------------

    @classmethod
    def from_matrix(cls, m) -> "AlgebraElement":
        return cls((np.asarray(m),))

    @classmethod
    def from_vec(cls, shape: Sequence[int], v) -> "AlgebraElement":
        v = np.asarray(v, dtype=complex).reshape(-1)
        shape = tuple(shape)
        if v.size != total_dim(shape):
            raise StructuralError(f"vector of length {v.size} does not fit shape {shape}")
        out, pos = [], 0
        for d in shape:
            out.append(v[pos:pos + d * d].reshape(d, d))
            pos += d * d
        return cls(tuple(out))

    # structure --------------------------------------------------------------

    @property
    def shape(self) -> Shape:
        return tuple(b.shape[0] for b in self.blocks)

    @property
    def dim(self) -> int:
        return total_dim(self.shape)

    def vec(self) -> np.ndarray:
        return np.concatenate([b.reshape(-1) for b in self.blocks])

    def _check(self, other: "AlgebraElement"):
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        if other.shape != self.shape:
            raise StructuralError(f"shape mismatch: {self.shape} vs {other.shape}")
        return None

    # arithmetic -------------------------------------------------------------

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def __neg__(self):
        return AlgebraElement(tuple(-a for a in self.blocks))

    def __mul__(self, c):
        if isinstance(c, AlgebraElement):
            raise TypeError("use @ for the algebra product")
        return AlgebraElement(tuple(c * a for a in self.blocks))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return AlgebraElement(tuple(a / c for a in self.blocks))

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(tuple(a @ b for a, b in zip(self.blocks, other.blocks)))

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(tuple(a.conj().T for a in self.blocks))

    @property
    def H(self) -> "AlgebraElement":
        return self.adjoint()

    def trace(self) -> complex:
        return complex(sum(np.trace(b) for b in self.blocks))

    def inner(self, other: "AlgebraElement") -> complex:
        """Hilbert-Schmidt pairing ``sum_j tr(x_j^* y_j)``."""
        self._check(other)
        return complex(np.vdot(self.vec(), other.vec()))

    def allclose(self, other: "AlgebraElement", tol: float = DEFAULT_TOL) -> bool:
        self._check(other)
        return operator_norm(self - other) <= tol

    def __repr__(self):
        return f"AlgebraElement(shape={self.shape})"


def total_dim(shape: Sequence[int]) -> int:
    return int(sum(d * d for d in shape))


def identity(shape: Sequence[int]) -> AlgebraElement:
    return AlgebraElement(tuple(np.eye(d) for d in shape))


def zeros(shape: Sequence[int]) -> AlgebraElement:
    return AlgebraElement(tuple(np.zeros((d, d)) for d in shape))


def matrix_unit(shape: Sequence[int], block: int, a: int, b: int) -> AlgebraElement:
    blocks = [np.zeros((d, d), dtype=complex) for d in shape]
    blocks[block][a, b] = 1.0
    return AlgebraElement(tuple(blocks))


def matrix_units(shape: Sequence[int]) -> list[AlgebraElement]:
    """All matrix units, in vectorization order."""
    return [matrix_unit(shape, j, a, b)
            for j, d in enumerate(shape) for a in range(d) for b in range(d)]


def random_element(shape: Sequence[int], rng: np.random.Generator) -> AlgebraElement:
    return AlgebraElement(tuple(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
                                for d in shape))


def as_element(x) -> AlgebraElement:
    if isinstance(x, AlgebraElement):
        return x
    return AlgebraElement.from_matrix(x)


# norms and spectra ----------------------------------------------------------

def operator_norm(x) -> float:
    """C*-norm: the largest singular value over all blocks."""
    x = as_element(x)
    return max(float(np.linalg.norm(b, 2)) for b in x.blocks)


def is_self_adjoint(x, tol: float = DEFAULT_TOL) -> bool:
    x = as_element(x)
    return all(np.max(np.abs(b - b.conj().T), initial=0.0) <= tol for b in x.blocks)


def min_eigenvalue(x, tol: float = DEFAULT_TOL) -> float:
    x = as_element(x)
    if not is_self_adjoint(x, tol):
        raise DomainError("element is not self-adjoint")
    return min(float(np.linalg.eigvalsh((b + b.conj().T) / 2)[0]) for b in x.blocks)


def is_psd(x, tol: float = DEFAULT_TOL) -> bool:
    """True iff every block has smallest eigenvalue >= -tol.

    Raises DomainError when ``x`` is not self-adjoint within ``tol``.
    """
    return min_eigenvalue(x, tol) >= -tol


def eig(x, tol: float = 1e-8) -> list[tuple[complex, np.ndarray]]:
    """Eigenpairs of a (possibly non-normal) matrix or of each algebra block.

    Plain 2-D arrays (superoperators) are accepted as a single block. For a
    block-diagonal element, eigenvectors are returned in the block's own
    coordinates, blocks in order. Each pair is checked for
    ``|x v - lam v| <= tol * |x|``.
    """
    mats = x.blocks if isinstance(x, AlgebraElement) else (np.asarray(x, dtype=complex),)
    pairs = []
    for m in mats:
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StructuralError(f"eig needs square input, got {m.shape}")
        try:
            vals, vecs = np.linalg.eig(m)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigensolver failed: {exc}") from exc
        scale = max(float(np.linalg.norm(m, 2)), 1.0)
        for k, lam in enumerate(vals):
            v = vecs[:, k]
            resid = float(np.linalg.norm(m @ v - lam * v))
            if resid > tol * scale:
                raise NumericalError(f"eigenpair residual {resid:.3e} exceeds {tol * scale:.3e}")
            pairs.append((complex(lam), v))
    return pairs


# states ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class State:
    """Density element ``rho``; pairs with the algebra via ``psi(x) = sum tr(rho_j x_j)``."""

    rho: AlgebraElement
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        rho = as_element(self.rho)
        object.__setattr__(self, "rho", rho)
        if not is_psd(rho, self.tol):
            raise DomainError("density is not positive semidefinite")
        if abs(rho.trace() - 1) > self.tol:
            raise DomainError(f"density has trace {rho.trace():.6g}, expected 1")

    @property
    def shape(self) -> Shape:
        return self.rho.shape

    def __call__(self, x: AlgebraElement) -> complex:
        if x.shape != self.shape:
            raise StructuralError(f"shape mismatch: {self.shape} vs {x.shape}")
        return complex(sum(np.sum(r.T * b) for r, b in zip(self.rho.blocks, x.blocks)))

    def row(self) -> np.ndarray:
        """Row vector ``r`` with ``psi(x) = r @ x.vec()``."""
        return np.concatenate([r.T.reshape(-1) for r in self.rho.blocks])

    def is_faithful(self, tol: float = DEFAULT_TOL) -> bool:
        return min_eigenvalue(self.rho, tol) > tol


def vector_state(v, shape: Sequence[int] | None = None, block: int = 0) -> State:
    """Pure state ``x -> <v, x v>`` supported on one block."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    shape = tuple(shape) if shape is not None else (v.size,)
    blocks = [np.zeros((d, d), dtype=complex) for d in shape]
    blocks[block] = np.outer(v, v.conj())
    return State(AlgebraElement(tuple(blocks)))


def maximally_mixed(shape: Sequence[int]) -> State:
    """Normalized trace, ``tr(x) / sum(d_j)``."""
    n = sum(shape)
    return State(AlgebraElement(tuple(np.eye(d) / n for d in shape)))


def random_pure_state(shape: Sequence[int], rng: np.random.Generator) -> State:
    """Haar-like pure state on a block chosen with probability proportional to its size."""
    shape = tuple(shape)
    block = int(rng.choice(len(shape), p=np.array(shape) / sum(shape)))
    d = shape[block]
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return vector_state(v, shape, block)


# literals -------------------------------------------------------------------

def parse_matrix(literal) -> np.ndarray:
    """Parse a nested list whose entries are numbers or ``[re, im]`` pairs."""
    def entry(e):
        if isinstance(e, (list, tuple)):
            if len(e) != 2:
                raise ValueError(f"complex entry must be [re, im], got {e!r}")
            return complex(float(e[0]), float(e[1]))
        return complex(e)

    try:
        rows = [[entry(e) for e in row] for row in literal]
    except TypeError as exc:
        raise ValueError(f"not a matrix literal: {literal!r}") from exc
    m = np.array(rows, dtype=complex)
    if m.ndim != 2:
        raise ValueError("matrix literal rows have unequal lengths")
    return m
