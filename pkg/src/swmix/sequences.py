"""Finite-scale diagnostics for bounded sequences that are weakly mixing to zero.

The dual-ball quantity ``sup_{|f| <= 1} (1/n) sum_k |f(x_k)|`` is evaluated
through the identity

    sup_{|f| <= 1} sum_k |f(x_k)| = sup_{|e_k| = 1} |sum_k e_k x_k|,

turning a search over functionals into a search over ``n`` unimodular phases.
Density notions for index sets use finite-horizon proxies documented on each
function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import CapacityError, DomainError
from .matrix_core import AlgebraElement, operator_norm
from .markov import MarkovOperator, ProjectionMap, markov_projection

EXACT_MAX_N = 12
GRID = 64  # phase resolution pi/32
NODE_BUDGET = 200_000


def default_norm(x) -> float:
    if isinstance(x, AlgebraElement):
        return operator_norm(x)
    x = np.asarray(x)
    if x.ndim == 2:
        return float(np.linalg.norm(x, 2))
    return float(np.linalg.norm(x))


def _is_euclidean(norm) -> bool:
    return norm is default_norm or norm is np.linalg.norm


@dataclass(frozen=True)
class VectorSequence:
    """``x_1, x_2, ...`` produced by ``term(k)`` with ``|x_k| <= norm_cap``."""

    name: str
    term: Callable[[int], object]
    norm_cap: float
    norm: Callable[[object], float] = default_norm

    def terms(self, n: int) -> list:
        return [self.term(k) for k in range(1, n + 1)]

    def check_bounded(self, n: int) -> bool:
        return max(self.norm(x) for x in self.terms(n)) <= self.norm_cap + 1e-12


@dataclass(frozen=True)
class IndexSequence:
    """Strictly increasing positive integers, stored up to some horizon."""

    name: str
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(k) for k in self.indices)
        if any(k < 1 for k in idx):
            raise DomainError("indices must be positive")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise DomainError("indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    @classmethod
    def evens(cls, horizon: int) -> "IndexSequence":
        return cls("evens", tuple(range(2, horizon + 1, 2)))

    @classmethod
    def integers(cls, horizon: int) -> "IndexSequence":
        return cls("integers", tuple(range(1, horizon + 1)))

    @classmethod
    def squares(cls, horizon: int) -> "IndexSequence":
        return cls("squares", tuple(k * k for k in range(1, math.isqrt(horizon) + 1)))

    @classmethod
    def multiples(cls, step: int, horizon: int) -> "IndexSequence":
        return cls(f"multiples_of_{step}", tuple(range(step, horizon + 1, step)))


# generators -----------------------------------------------------------------

def eigen_sequence(z: complex, v) -> VectorSequence:
    """``x_k = z^k v``; with ``|z| = 1`` this never mixes to zero."""
    v = np.asarray(v, dtype=complex)
    return VectorSequence("eigen", lambda k: z ** k * v, abs(z) * float(np.linalg.norm(v)) if abs(z) <= 1
                          else math.inf)


def alternating(v) -> VectorSequence:
    v = np.asarray(v, dtype=complex)
    return VectorSequence("alternating", lambda k: (-1) ** k * v, float(np.linalg.norm(v)))


def sqrt_decay(v) -> VectorSequence:
    v = np.asarray(v, dtype=complex)
    return VectorSequence("sqrt_decay", lambda k: v / math.sqrt(k), float(np.linalg.norm(v)))


def zero_sequence(dim: int) -> VectorSequence:
    return VectorSequence("zero", lambda k: np.zeros(dim, dtype=complex), 0.0)


def markov_orbit(T: MarkovOperator, x: AlgebraElement, F: ProjectionMap | None = None) -> VectorSequence:
    """``x_k = T^k(x) - F(x)`` in the C*-norm; bounded by ``2|x|``."""
    F = markov_projection(T) if F is None else F
    fx = F(x).vec()
    s = T.super
    cache = [x.vec()]

    def term(k: int) -> AlgebraElement:
        while len(cache) <= k:
            cache.append(s @ cache[-1])
        return AlgebraElement.from_vec(T.shape, cache[k] - fx)

    return VectorSequence("markov_orbit", term, 2 * operator_norm(x), operator_norm)


# dual-ball quantity ---------------------------------------------------------

class WMZValue(NamedTuple):
    value: float
    certificate: str  # "exact" or "lower_bound"


def _as_rows(xs: Sequence) -> tuple[np.ndarray, Callable[[np.ndarray], float]]:
    """Stack terms as complex rows; return the stack and a norm on rows."""
    first = xs[0]
    if isinstance(first, AlgebraElement):
        shape = first.shape
        return np.array([x.vec() for x in xs]), lambda r: operator_norm(AlgebraElement.from_vec(shape, r))
    arr = np.array([np.asarray(x, dtype=complex) for x in xs])
    if arr.ndim == 3:
        sh = arr.shape[1:]
        return arr.reshape(len(xs), -1), lambda r: float(np.linalg.norm(r.reshape(sh), 2))
    return arr, lambda r: float(np.linalg.norm(r))


def _refine(rows: np.ndarray, norm, eps: np.ndarray, sweeps: int = 20) -> tuple[np.ndarray, float]:
    """Coordinate ascent on the phases: grid each coordinate, then polish continuously."""
    grid = np.exp(2j * np.pi * np.arange(GRID) / GRID)
    eps = eps.copy()
    total = eps @ rows
    best = norm(total)
    for _ in range(sweeps):
        improved = False
        for k in range(len(eps)):
            rest = total - eps[k] * rows[k]
            vals = [norm(rest + g * rows[k]) for g in grid]
            j = int(np.argmax(vals))
            res = minimize_scalar(lambda t: -norm(rest + np.exp(1j * t) * rows[k]),
                                  bounds=(2 * np.pi * (j - 1) / GRID, 2 * np.pi * (j + 1) / GRID),
                                  method="bounded", options={"xatol": 1e-12})
            cand, val = np.exp(1j * res.x), -res.fun
            if vals[j] > val:
                cand, val = grid[j], vals[j]
            if val > best * (1 + 1e-13) + 1e-300:
                eps[k], best, improved = cand, val, True
                total = rest + cand * rows[k]
        if not improved:
            break
    return eps, norm(eps @ rows)


def _branch_and_bound(rows: np.ndarray, norm, incumbent: float,
                      euclidean: bool) -> tuple[float, np.ndarray | None, bool]:
    """Depth-first search of the phase grid with the first phase fixed to 1.

    Returns the best grid value found (or ``incumbent``), its phases (None if
    nothing beat the incumbent) and whether the search finished within budget.
    """
    n = len(rows)
    grid = np.exp(2j * np.pi * np.arange(GRID) / GRID)
    norms = np.array([norm(r) for r in rows])
    tail_sum = np.concatenate([np.cumsum(norms[::-1])[::-1], [0.0]])
    tail_quad = np.zeros(n + 1)
    if euclidean:
        # sup_e |sum_{k>=j} e_k x_k|^2 <= (n - j) * lambda_max(Gram of the tail)
        for j in range(n):
            g = rows[j:] @ rows[j:].conj().T
            tail_quad[j] = min((n - j) * float(np.linalg.eigvalsh(g)[-1]), tail_sum[j] ** 2)

    def child_values(partial: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
        kids = partial[None, :] + grid[:, None] * rows[j][None, :]
        if euclidean:
            vals = np.linalg.norm(kids, axis=1)
        else:
            vals = np.array([norm(k) for k in kids])
        return kids, vals

    def bounds(kids: np.ndarray, vals: np.ndarray, j: int) -> np.ndarray:
        b = vals + tail_sum[j]
        if euclidean and j < n:
            cross = np.sum(np.abs(kids.conj() @ rows[j:].T), axis=1)
            b = np.minimum(b, np.sqrt(vals ** 2 + 2 * cross + tail_quad[j]))
        return b

    best_val, best_eps = incumbent, None
    nodes = 0
    frames = [(1, rows[0].copy(), (1.0 + 0j,))]
    while frames:
        j, partial, phases = frames.pop()
        nodes += 1
        if nodes > NODE_BUDGET:
            return best_val, best_eps, False
        kids, vals = child_values(partial, j)
        if j + 1 == n:
            k = int(np.argmax(vals))
            if vals[k] > best_val:
                best_val, best_eps = float(vals[k]), np.array(phases + (grid[k],))
            continue
        b = bounds(kids, vals, j + 1)
        for k in np.argsort(b):
            if b[k] > best_val * (1 + 1e-12):
                frames.append((j + 1, kids[k], phases + (grid[k],)))
    return best_val, best_eps, True


def wmz_quantity(seq: VectorSequence, n: int, mode: str = "exact", trials: int = 32,
                 seed: int | None = None) -> WMZValue:
    """``sup_{|f| <= 1} (1/n) sum_{k<=n} |f(x_k)|`` via the phase identity.

    ``mode="exact"`` (n <= 12) searches the full phase grid at resolution
    pi/32 by branch and bound, then polishes the best pattern continuously.
    The certificate is ``"exact"`` when the search finishes within its node
    budget, ``"lower_bound"`` otherwise. ``mode="sampled"`` runs coordinate
    ascent from ``trials`` seeded random patterns and always certifies a lower
    bound.
    """
    if n < 1:
        raise DomainError("n must be a positive integer")
    xs = seq.terms(n)
    rows, norm = _as_rows(xs)
    euclidean = _is_euclidean(seq.norm) and rows.ndim == 2 and not isinstance(xs[0], AlgebraElement) \
        and np.asarray(xs[0]).ndim == 1
    if not np.any(rows):
        return WMZValue(0.0, "exact")
    if n == 1:
        return WMZValue(norm(rows[0]), "exact")

    if mode == "sampled":
        if seed is None:
            raise DomainError("sampled mode needs a seed")
        rng = np.random.default_rng(seed)
        best = 0.0
        for t in range(trials):
            start = np.ones(n, dtype=complex) if t == 0 else np.exp(2j * np.pi * rng.random(n))
            _, val = _refine(rows, norm, start)
            best = max(best, val)
        return WMZValue(best / n, "lower_bound")

    if mode != "exact":
        raise DomainError(f"unknown mode {mode!r}")
    if n > EXACT_MAX_N:
        raise CapacityError(f"exact mode supports n <= {EXACT_MAX_N}, got {n}")

    # order by decreasing norm so the bound prunes early; the sup is order-free
    order = np.argsort([-norm(r) for r in rows], kind="stable")
    rows = rows[order]
    eps0, incumbent = _refine(rows, norm, np.ones(n, dtype=complex))
    grid_val, grid_eps, complete = _branch_and_bound(rows, norm, incumbent, euclidean)
    best = incumbent
    if grid_eps is not None:
        _, polished = _refine(rows, norm, grid_eps)
        best = max(best, grid_val, polished)
    return WMZValue(best / n, "exact" if complete else "lower_bound")


# subsequences and densities -------------------------------------------------

def subsequence_cesaro_norm(seq: VectorSequence, idx: IndexSequence, n: int) -> float:
    """``|(1/n) sum_{j<=n} x_{k_j}|``."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    if len(idx) < n:
        raise CapacityError(f"{idx.name} holds {len(idx)} indices, {n} requested")
    xs = [seq.term(k) for k in idx.indices[:n]]
    if isinstance(xs[0], AlgebraElement):
        total = xs[0]
        for x in xs[1:]:
            total = total + x
        return seq.norm(total / n)
    return seq.norm(sum(np.asarray(x, dtype=complex) for x in xs) / n)


def lower_density(idx: IndexSequence, horizon: int) -> float:
    """Finite-horizon liminf proxy: ``min_{horizon/2 <= m <= horizon} |idx & [1, m]| / m``."""
    if horizon < 1:
        raise DomainError("horizon must be positive")
    counts = np.zeros(horizon + 1, dtype=np.int64)
    members = [k for k in idx.indices if k <= horizon]
    counts[members] = 1
    counts = np.cumsum(counts)
    m = np.arange(max(1, (horizon + 1) // 2), horizon + 1)
    return float(np.min(counts[m] / m))


def relatively_dense(idx: IndexSequence, horizon: int) -> tuple[bool, int]:
    """Finite-horizon proxy for bounded gaps.

    Gaps are measured from 0 through the last index ``<= horizon``. The flag
    holds when the sequence reaches within one maximal gap of the horizon and
    the largest gap in the second half of the window does not exceed the
    largest gap in the first half (the gap envelope has stopped growing).
    """
    if horizon < 1:
        raise DomainError("horizon must be positive")
    ks = [0] + [k for k in idx.indices if k <= horizon]
    if len(ks) == 1:
        return False, horizon
    gaps = np.diff(ks)
    max_gap = int(gaps.max())
    ends = np.array(ks[1:])
    first = gaps[ends <= horizon // 2]
    second = gaps[ends > horizon // 2]
    reaches = horizon - ks[-1] < max_gap
    stable = first.size > 0 and (second.size == 0 or second.max() <= first.max())
    return bool(reaches and stable), max_gap
