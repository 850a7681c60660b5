"""Unital completely positive maps on block matrix algebras.

Maps act in the Heisenberg picture on algebra elements. A map is stored as its
superoperator ``S`` acting on ``x.vec()`` (see :mod:`swmix.matrix_core`), so
``T(x) = from_vec(S @ x.vec())`` and a state ``psi`` evolves as the row vector
``psi.row() @ S``.

The Markov projection ``F`` is the spectral projection of ``S`` at eigenvalue
1, i.e. the projection onto ``ker(S - 1)`` along ``range(S - 1)``. For a
contraction this is the exact limit of the Cesaro means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import DiagnosticError, DomainError, NumericalError, PreconditionError, StructuralError, ValidationError
from .matrix_core import (
    DEFAULT_TOL,
    AlgebraElement,
    State,
    identity,
    matrix_units,
    maximally_mixed,
    min_eigenvalue,
    operator_norm,
    random_pure_state,
    total_dim,
)

SPECTRAL_TOL = 1e-8
PERIPHERAL_BAND = 1e-7
ANGLE_TOL = 1e-6
DEFECT_THRESHOLD = 1e-2
N_PROBE_STATES = 8


@dataclass(frozen=True, eq=False)
class MarkovOperator:
    """Linear map on ``M_{d_1} + ... + M_{d_m}`` stored as a superoperator."""

    super: np.ndarray
    shape: tuple[int, ...]
    kraus: tuple[np.ndarray, ...] | None = None
    name: str = ""

    def __post_init__(self):
        shape = tuple(int(d) for d in self.shape)
        D = total_dim(shape)
        s = np.array(self.super, dtype=complex)
        if s.shape != (D, D):
            raise StructuralError(f"superoperator of shape {s.shape} does not act on algebra {shape} (D={D})")
        s.setflags(write=False)
        object.__setattr__(self, "super", s)
        object.__setattr__(self, "shape", shape)
        if self.kraus is not None:
            object.__setattr__(self, "kraus", tuple(np.array(k, dtype=complex) for k in self.kraus))

    @property
    def dim(self) -> int:
        return self.super.shape[0]

    def __call__(self, x: AlgebraElement) -> AlgebraElement:
        if x.shape != self.shape:
            raise StructuralError(f"shape mismatch: map on {self.shape}, element {x.shape}")
        return AlgebraElement.from_vec(self.shape, self.super @ x.vec())

    def compose(self, other: "MarkovOperator") -> "MarkovOperator":
        """``self o other``."""
        if other.shape != self.shape:
            raise StructuralError("cannot compose maps on different algebras")
        return MarkovOperator(self.super @ other.super, self.shape)

    # constructors -----------------------------------------------------------

    @classmethod
    def from_map(cls, f: Callable[[AlgebraElement], AlgebraElement], shape: Sequence[int],
                 name: str = "") -> "MarkovOperator":
        shape = tuple(shape)
        cols = [f(e).vec() for e in matrix_units(shape)]
        return cls(np.column_stack(cols), shape, name=name)

    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray], shape: Sequence[int] | None = None,
                   name: str = "") -> "MarkovOperator":
        """``T(x) = P(sum_i K_i^* x K_i)`` where ``P`` keeps the diagonal blocks.

        Each ``K_i`` is ``N x N`` with ``N = sum(shape)``; for a single block
        ``P`` is the identity.
        """
        kraus = [np.asarray(k, dtype=complex) for k in kraus]
        if not kraus:
            raise StructuralError("empty Kraus family")
        N = kraus[0].shape[0]
        shape = tuple(shape) if shape is not None else (N,)
        if sum(shape) != N or any(k.shape != (N, N) for k in kraus):
            raise StructuralError(f"Kraus matrices must be {sum(shape)}x{sum(shape)} for shape {shape}")

        def apply(x: AlgebraElement) -> AlgebraElement:
            full = scipy.linalg.block_diag(*x.blocks)
            y = sum(k.conj().T @ full @ k for k in kraus)
            return AlgebraElement(tuple(_diagonal_blocks(y, shape)))

        op = cls.from_map(apply, shape, name=name)
        return cls(op.super, shape, kraus=tuple(kraus), name=name)


def _diagonal_blocks(m: np.ndarray, shape: Sequence[int]) -> list[np.ndarray]:
    out, pos = [], 0
    for d in shape:
        out.append(m[pos:pos + d, pos:pos + d])
        pos += d
    return out


# gallery --------------------------------------------------------------------

def identity_map(shape: Sequence[int] = (2,)) -> MarkovOperator:
    shape = tuple(shape)
    return MarkovOperator(np.eye(total_dim(shape)), shape, name="identity")


def unitary_conjugation(u) -> MarkovOperator:
    """``T(x) = U x U^*``."""
    u = np.asarray(u, dtype=complex)
    return MarkovOperator.from_kraus([u.conj().T], name="unitary_conjugation")


def depolarizing(lam: float, d: int = 2) -> MarkovOperator:
    """``T(x) = (1 - lam) x + lam tr(x)/d 1``."""
    one = identity((d,))
    return MarkovOperator.from_map(lambda x: (1 - lam) * x + (lam * x.trace() / d) * one, (d,),
                                   name="depolarizing")


def transpose_map(d: int = 2) -> MarkovOperator:
    """Unital and positive but not completely positive."""
    return MarkovOperator.from_map(lambda x: AlgebraElement((x.blocks[0].T,)), (d,), name="transpose")


def random_markov(shape: Sequence[int], rng: np.random.Generator, n_kraus: int = 2) -> MarkovOperator:
    """Gaussian Kraus family rescaled so that ``sum K_i^* K_i = 1``."""
    shape = tuple(shape)
    N = sum(shape)
    ks = [rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)) for _ in range(n_kraus)]
    s = sum(k.conj().T @ k for k in ks)
    w, v = np.linalg.eigh(s)
    s_inv_half = (v / np.sqrt(w)) @ v.conj().T
    return MarkovOperator.from_kraus([k @ s_inv_half for k in ks], shape, name="random")


def random_markov_family(count: int = 100, seed: int = 2024) -> list[MarkovOperator]:
    """Reproducible family: ``d`` alternates 2, 3 and the Kraus rank cycles 1..4.

    Rank-1 members are unitary conjugations, so both mixing verdicts occur.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        op = random_markov((2 + i % 2,), rng, 1 + i % 4)
        out.append(MarkovOperator(op.super, op.shape, op.kraus, f"random_{i}"))
    return out


# validation -----------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    unital_defect: float
    min_choi_eigenvalue: float
    choi_hermitian_defect: float
    tol: float

    @property
    def unital(self) -> bool:
        return self.unital_defect <= self.tol

    @property
    def completely_positive(self) -> bool:
        return self.choi_hermitian_defect <= self.tol and self.min_choi_eigenvalue >= -self.tol

    @property
    def passed(self) -> bool:
        return self.unital and self.completely_positive

    def failures(self) -> list[str]:
        out = []
        if not self.unital:
            out.append(f"unitality violated: |T(1) - 1| = {self.unital_defect:.3e}")
        if not self.completely_positive:
            out.append(f"complete positivity violated: min Choi eigenvalue = {self.min_choi_eigenvalue:.6g}")
        return out


def choi_blocks(T: MarkovOperator) -> list[np.ndarray]:
    """Choi matrices ``sum_ab E_ab (x) T_ji(E_ab)`` of every block component ``i -> j``.

    A map on a direct sum is CP iff each component is.
    """
    out = []
    offsets = np.cumsum([0] + [d * d for d in T.shape])
    for i, di in enumerate(T.shape):
        for j, dj in enumerate(T.shape):
            c = np.zeros((di * dj, di * dj), dtype=complex)
            for a in range(di):
                for b in range(di):
                    col = T.super[:, offsets[i] + a * di + b]
                    img = col[offsets[j]:offsets[j + 1]].reshape(dj, dj)
                    c[a * dj:(a + 1) * dj, b * dj:(b + 1) * dj] = img
            out.append(c)
    return out


def validate(T: MarkovOperator, tol: float = DEFAULT_TOL) -> ValidationReport:
    one = identity(T.shape)
    unital_defect = operator_norm(T(one) - one)
    herm, lo = 0.0, math.inf
    for c in choi_blocks(T):
        herm = max(herm, float(np.max(np.abs(c - c.conj().T))))
        lo = min(lo, float(np.linalg.eigvalsh((c + c.conj().T) / 2)[0]))
    return ValidationReport(unital_defect, lo, herm, tol)


def require_markov(T: MarkovOperator, tol: float = DEFAULT_TOL) -> ValidationReport:
    report = validate(T, tol)
    if not report.passed:
        label = f"{T.name}: " if T.name else ""
        raise ValidationError(label + "; ".join(report.failures()))
    return report


# linear algebra helpers -----------------------------------------------------

def _null_space(m: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal columns spanning ``{v : |m v| small}``."""
    _, s, vh = np.linalg.svd(m)
    cutoff = tol * max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    return vh[rank:].conj().T


def _rank(m: np.ndarray, tol: float) -> int:
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))


def _to_elements(shape, cols: np.ndarray) -> list[AlgebraElement]:
    return [AlgebraElement.from_vec(shape, cols[:, k]) for k in range(cols.shape[1])]


# Cesaro means and the Markov projection -------------------------------------

def cesaro_mean(T: MarkovOperator, x: AlgebraElement, n: int) -> AlgebraElement:
    """``(1/n) sum_{k<n} T^k(x)`` by repeated application."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    if x.shape != T.shape:
        raise StructuralError("element and map live on different algebras")
    y = x.vec()
    acc = np.zeros_like(y)
    for _ in range(n):
        acc += y
        y = T.super @ y
    return AlgebraElement.from_vec(T.shape, acc / n)


@dataclass(frozen=True, eq=False)
class ProjectionMap:
    super: np.ndarray
    range_basis: tuple[AlgebraElement, ...]
    shape: tuple[int, ...]

    def __call__(self, x: AlgebraElement) -> AlgebraElement:
        return AlgebraElement.from_vec(self.shape, self.super @ x.vec())

    @property
    def rank(self) -> int:
        return len(self.range_basis)

    def as_operator(self) -> MarkovOperator:
        return MarkovOperator(self.super, self.shape, name="F")


def markov_projection(T: MarkovOperator, tol: float = SPECTRAL_TOL) -> ProjectionMap:
    """Spectral projection onto ``ker(T - 1)`` along ``range(T - 1)``."""
    D = T.dim
    m = T.super - np.eye(D)
    right = _null_space(m, tol)
    left = _null_space(m.conj().T, tol)
    if right.shape[1] != left.shape[1]:
        raise NumericalError(f"left/right fixed spaces disagree ({left.shape[1]} vs {right.shape[1]})")
    if right.shape[1] == 0:
        raise NumericalError("no fixed points found; the map cannot be unital")
    pairing = left.conj().T @ right
    if np.linalg.cond(pairing) > 1 / tol:
        raise NumericalError("eigenvalue 1 is not semisimple to working precision")
    f = right @ np.linalg.solve(pairing, left.conj().T)
    f.setflags(write=False)
    return ProjectionMap(f, tuple(_to_elements(T.shape, right)), T.shape)


def fixed_point_space(T: MarkovOperator, tol: float = SPECTRAL_TOL) -> list[AlgebraElement]:
    return eigenspace(T, 1.0, tol)


def eigenspace(T: MarkovOperator, z: complex, tol: float = SPECTRAL_TOL) -> list[AlgebraElement]:
    """Orthonormal basis of ``{x : T(x) = z x}``; empty when that space is zero."""
    if abs(z) > 1 + tol:
        raise DomainError(f"|z| = {abs(z):.6g} exceeds 1; a Markov map has no such eigenvalues")
    return _to_elements(T.shape, _null_space(T.super - z * np.eye(T.dim), tol))


def spectrum(T: MarkovOperator) -> np.ndarray:
    return np.linalg.eigvals(T.super)


def peripheral_eigenvalues(T: MarkovOperator, band: float = PERIPHERAL_BAND) -> list[complex]:
    """Distinct eigenvalues with ``|z| >= 1 - band``, sorted by argument."""
    vals = [complex(z) for z in spectrum(T) if abs(z) >= 1 - band]
    distinct: list[complex] = []
    for z in sorted(vals, key=lambda z: (np.angle(z), abs(z))):
        if not any(abs(z - w) <= 10 * band for w in distinct):
            distinct.append(z)
    return distinct


# strict weak mixing ---------------------------------------------------------

def swm_defect(T: MarkovOperator, x: AlgebraElement, psi: State, n: int,
               F: ProjectionMap | None = None) -> float:
    """``(1/n) sum_{k<n} |psi(T^k x) - psi(F x)|``."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    F = markov_projection(T) if F is None else F
    target = psi(F(x))
    r = psi.row()
    total = 0.0
    for _ in range(n):
        total += abs(r @ x.vec() - target)
        x = T(x)
    return total / n


def probe_states(shape: Sequence[int], seed: int = 0) -> list[State]:
    """Seeded pure states plus the maximally mixed state."""
    rng = np.random.default_rng(seed)
    return [random_pure_state(shape, rng) for _ in range(N_PROBE_STATES)] + [maximally_mixed(shape)]


def defect_table(T: MarkovOperator, states: Sequence[State], checkpoints: Sequence[int],
                 F: ProjectionMap | None = None) -> dict[int, np.ndarray]:
    """``swm_defect`` for every (state, matrix unit) pair at each checkpoint ``n``.

    Returns ``{n: array[n_states, D]}``. All pairs share one pass: the row
    ``psi.row() @ S^k`` holds ``psi(T^k e)`` for every matrix unit ``e``.
    """
    F = markov_projection(T) if F is None else F
    rows = np.array([s.row() for s in states])
    target = rows @ F.super
    checkpoints = sorted(set(int(n) for n in checkpoints))
    acc = np.zeros(rows.shape)
    w = rows.copy()
    out = {}
    for k in range(1, checkpoints[-1] + 1):
        acc += np.abs(w - target)
        w = w @ T.super
        if k in checkpoints:
            out[k] = acc / k
    return out


@dataclass(frozen=True)
class DecompositionReport:
    kernel_dim: int
    range_rank: int
    total_dim: int
    min_angle: float
    angle_tol: float

    @property
    def passed(self) -> bool:
        return self.kernel_dim + self.range_rank == self.total_dim and self.min_angle > self.angle_tol


def ergodic_decomposition_check(T: MarkovOperator, tol: float = SPECTRAL_TOL,
                                angle_tol: float = ANGLE_TOL) -> DecompositionReport:
    """Check ``A = ker(1 - T) (+) range(1 - T)`` with a positive principal angle."""
    m = np.eye(T.dim) - T.super
    u, s, vh = np.linalg.svd(m)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    kernel = vh[rank:].conj().T
    rng_basis = u[:, :rank]
    if kernel.shape[1] == 0 or rank == 0:
        angle = math.pi / 2
    else:
        angle = float(np.min(scipy.linalg.subspace_angles(kernel, rng_basis)))
    return DecompositionReport(kernel.shape[1], rank, T.dim, angle, angle_tol)


@dataclass(frozen=True, eq=False)
class MixingReport:
    uniquely_ergodic: bool
    strictly_weak_mixing: bool
    peripheral_eigenvalues: list[complex]
    defect_trace: list[tuple[int, float]]
    projection: ProjectionMap = field(repr=False)
    decomposition: DecompositionReport = field(repr=False)
    name: str = ""

    @property
    def max_defect(self) -> float:
        return self.defect_trace[-1][1]

    @property
    def n_probe(self) -> int:
        return self.defect_trace[-1][0]


def _semisimple_at_one(T: MarkovOperator, tol: float, band: float = PERIPHERAL_BAND) -> bool:
    # algebraic multiplicity near 1 against the kernel dimension; squaring S - I
    # would push eigenvalues like 1 - 1e-4 under the rank cutoff
    algebraic = int(np.sum(np.abs(np.linalg.eigvals(T.super) - 1) <= 10 * band))
    return algebraic == _null_space(T.super - np.eye(T.dim), tol).shape[1]


def classify(T: MarkovOperator, tol: float = DEFAULT_TOL, n_probe: int = 2000, seed: int = 0,
             threshold: float = DEFECT_THRESHOLD, band: float = PERIPHERAL_BAND) -> MixingReport:
    """Spectral verdict on strict weak mixing, guarded by an empirical defect sweep.

    The map is strictly weakly mixing iff 1 is its only peripheral eigenvalue
    and is semisimple. The probe set is every matrix unit against
    ``probe_states(shape, seed)``; the largest defect at ``n_probe`` must be
    below ``threshold`` exactly when the spectral verdict is positive.
    """
    require_markov(T, tol)
    F = markov_projection(T)
    decomposition = ergodic_decomposition_check(T)
    periph = peripheral_eigenvalues(T, band)
    only_one = all(abs(z - 1) <= 10 * band for z in periph)
    swm = only_one and _semisimple_at_one(T, SPECTRAL_TOL, band)

    checkpoints = sorted({max(1, n_probe // 16), max(1, n_probe // 4), n_probe})
    table = defect_table(T, probe_states(T.shape, seed), checkpoints, F)
    trace = [(n, float(np.max(table[n]))) for n in checkpoints]
    empirical = trace[-1][1] < threshold
    if empirical != swm:
        raise DiagnosticError(
            f"{T.name or 'map'}: spectral verdict swm={swm} but max probe defect at n={n_probe} "
            f"is {trace[-1][1]:.3e} (threshold {threshold:g})")
    return MixingReport(decomposition.passed, swm, periph, trace, F, decomposition, T.name)


# invariant states -----------------------------------------------------------

def _positive_part(blocks) -> list[np.ndarray]:
    out = []
    for b in blocks:
        w, v = np.linalg.eigh(b)
        out.append((v * np.clip(w, 0, None)) @ v.conj().T)
    return out


def invariant_states(T: MarkovOperator, tol: float = SPECTRAL_TOL) -> list[State]:
    """States spanning the fixed space of the predual action ``psi -> psi o T``.

    Fixed hermitian functionals are split into positive and negative parts,
    which are again invariant for a positive unital map. When exactly one
    invariant state exists, ``F = phi(.) 1`` is asserted.
    """
    shape = T.shape
    rows = _null_space(T.super.T - np.eye(T.dim), tol)
    cands = []
    for k in range(rows.shape[1]):
        # the null vector is vec(rho^T)
        rho = AlgebraElement.from_vec(shape, rows[:, k])
        rho = AlgebraElement(tuple(b.T for b in rho.blocks))
        for h in ((rho + rho.H) / 2, (rho - rho.H) / 2j):
            for part in (h.blocks, [-b for b in h.blocks]):
                pos = AlgebraElement(tuple(_positive_part(part)))
                tr = pos.trace().real
                if tr > tol:
                    cands.append(pos / tr)

    chosen: list[State] = []
    stack = np.zeros((0, T.dim), dtype=complex)
    for rho in cands:
        st = State(AlgebraElement(tuple((b + b.conj().T) / 2 for b in rho.blocks)), tol=1e-7)
        r = st.row()
        if np.linalg.norm(r @ T.super - r) > 1e-6:
            continue
        trial = np.vstack([stack, r])
        if _rank(trial, 1e-8) > stack.shape[0]:
            stack = trial
            chosen.append(st)
        if len(chosen) == rows.shape[1]:
            break

    if len(chosen) == 1:
        phi = chosen[0]
        F = markov_projection(T, tol)
        expected = np.outer(identity(shape).vec(), phi.row())
        if np.max(np.abs(F.super - expected)) > 1e-6:
            raise DiagnosticError("unique invariant state but F differs from phi(.)1")
    return chosen


def fixed_point_algebra_check(T: MarkovOperator, tol: float = SPECTRAL_TOL) -> bool:
    """Whether the fixed-point space is closed under products and adjoints.

    Requires a faithful invariant state; raises PreconditionError otherwise.
    """
    states = invariant_states(T, tol)
    if not states:
        raise PreconditionError("no invariant state found")
    bary = sum((s.rho for s in states[1:]), states[0].rho) / len(states)
    if min_eigenvalue(bary, 1e-7) <= 1e-9:
        raise PreconditionError("no faithful invariant state; closure check skipped")

    basis = fixed_point_space(T, tol)
    q = np.column_stack([b.vec() for b in basis])

    def outside(x: AlgebraElement) -> float:
        v = x.vec()
        return float(np.linalg.norm(v - q @ (q.conj().T @ v)))

    for a in basis:
        if outside(a.H) > 1e-7:
            return False
        for b in basis:
            if outside(a @ b) > 1e-7:
                return False
    return True


# convergence rate -----------------------------------------------------------

def oscillation_window(T: MarkovOperator, band: float = PERIPHERAL_BAND) -> int:
    """Steps spanning one period of the slowest nontrivial peripheral phase (1 if none)."""
    phases = [abs(np.angle(z)) for z in peripheral_eigenvalues(T, band) if abs(z - 1) > 10 * band]
    if not phases:
        return 1
    return int(math.ceil(2 * math.pi / min(phases))) + 1


def cesaro_rate_constants(T: MarkovOperator, x: AlgebraElement, ns: Sequence[int],
                          F: ProjectionMap | None = None, window: int | None = None) -> dict[int, float]:
    """Fitted ``c`` in ``|cesaro_mean(T, x, n) - F(x)| <= c / n`` at each ``n``.

    ``c_n = max_{n <= m < n + window} m |cesaro_mean(T, x, m) - F(x)|``. The
    window defaults to one period of the slowest peripheral rotation, so maps
    whose error oscillates like ``|sin(m theta / 2)| / m`` get their envelope.
    """
    F = markov_projection(T) if F is None else F
    window = oscillation_window(T) if window is None else window
    fx = F(x).vec()
    y = x.vec()
    acc = np.zeros_like(y)
    out = {int(n): 0.0 for n in ns}
    last = max(out) + window - 1
    for m in range(1, last + 1):
        acc += y
        y = T.super @ y
        for n in out:
            if n <= m < n + window:
                err = operator_norm(AlgebraElement.from_vec(T.shape, acc / m - fx))
                out[n] = max(out[n], m * err)
    return out


def telescoping_constant(T: MarkovOperator, x: AlgebraElement, F: ProjectionMap | None = None) -> float:
    """``2|y|`` where ``(1 - T) y = x - F(x)`` and ``F(y) = 0``.

    Since ``cesaro_mean(T, x, n) - F(x) = (y - T^n y) / n`` and ``T`` is a
    contraction, the Cesaro error is at most this constant over ``n``.
    """
    F = markov_projection(T) if F is None else F
    D = T.dim
    rhs = x.vec() - F.super @ x.vec()
    y = np.linalg.solve(np.eye(D) - T.super + F.super, rhs)
    return 2 * operator_norm(AlgebraElement.from_vec(T.shape, y))
