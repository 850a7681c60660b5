import math

import numpy as np
import pytest

from swmix.errors import DiagnosticError, DomainError, PreconditionError, StructuralError, ValidationError
from swmix.markov import (
    MarkovOperator,
    cesaro_mean,
    cesaro_rate_constants,
    choi_blocks,
    classify,
    depolarizing,
    eigenspace,
    ergodic_decomposition_check,
    fixed_point_algebra_check,
    fixed_point_space,
    identity_map,
    invariant_states,
    markov_projection,
    peripheral_eigenvalues,
    probe_states,
    require_markov,
    swm_defect,
    telescoping_constant,
    transpose_map,
    unitary_conjugation,
    validate,
)
from swmix.matrix_core import (
    AlgebraElement,
    identity,
    is_psd,
    matrix_unit,
    operator_norm,
    random_element,
    vector_state,
)

THETA = 1.0
E12 = matrix_unit((2,), 0, 0, 1)
SIGMA_Z = AlgebraElement.from_matrix(np.diag([1.0, -1.0]))


def amplitude_damping(gamma=0.4):
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]])
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]])
    return MarkovOperator.from_kraus([k0, k1], name="amplitude_damping")


class TestValidate:
    def test_unitary_passes(self, rng):
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
        assert validate(unitary_conjugation(q)).passed

    def test_transpose_choi_is_swap(self):
        # Choi of the transpose on M_2 is the swap operator, spectrum {1, 1, 1, -1}
        swap = np.zeros((4, 4))
        for a in range(2):
            for b in range(2):
                swap[a * 2 + b, b * 2 + a] = 1
        assert np.allclose(choi_blocks(transpose_map())[0], swap)
        rep = validate(transpose_map())
        assert not rep.passed and rep.unital
        assert rep.min_choi_eigenvalue == pytest.approx(-1, abs=1e-12)

    def test_non_unital(self):
        p = np.diag([1.0, 0.0])
        op = MarkovOperator.from_map(lambda x: x.trace() * AlgebraElement.from_matrix(p), (2,))
        rep = validate(op)
        assert not rep.unital and rep.completely_positive
        with pytest.raises(ValidationError, match="unitality"):
            require_markov(op)

    def test_block_algebra_kraus(self):
        ks = [0.6 * np.eye(3), 0.8 * np.roll(np.eye(3), 1, axis=1)]
        op = MarkovOperator.from_kraus(ks, (2, 1))
        assert op.dim == 5 and validate(op).passed

    def test_contraction(self, random_maps, rng):
        for T in random_maps[:20]:
            x = random_element(T.shape, rng)
            assert operator_norm(T(x)) <= operator_norm(x) * (1 + 1e-9)

    def test_shape_error(self):
        with pytest.raises(StructuralError):
            MarkovOperator(np.eye(3), (2,))


class TestCesaro:
    def test_identity_map(self, rng):
        x = random_element((2,), rng)
        assert np.allclose(cesaro_mean(identity_map(), x, 17).vec(), x.vec())

    @pytest.mark.parametrize("n", [1, 2, 7, 50])
    def test_rotation_geometric_sum(self, rotation, n):
        coeff = sum(np.exp(-1j * k * THETA) for k in range(n)) / n
        got = cesaro_mean(rotation, E12, n)
        assert np.allclose(got.vec(), (coeff * E12).vec(), atol=1e-13)
        closed = abs(math.sin(n * THETA / 2) / (n * math.sin(THETA / 2)))
        assert operator_norm(got) == pytest.approx(closed, abs=1e-13)

    @pytest.mark.parametrize("n", [1, 3, 10])
    def test_depolarizing_geometric_sum(self, n):
        got = cesaro_mean(depolarizing(0.5), SIGMA_Z, n)
        assert np.allclose(got.vec(), ((2 / n) * (1 - 2.0 ** -n) * SIGMA_Z).vec(), atol=1e-14)

    def test_rejects_nonpositive_n(self):
        with pytest.raises(DomainError):
            cesaro_mean(identity_map(), E12, 0)


class TestProjection:
    def test_identity(self):
        F = markov_projection(identity_map())
        assert np.allclose(F.super, np.eye(4)) and F.rank == 4

    def test_rotation_keeps_diagonal(self, rotation):
        F = markov_projection(rotation)
        assert np.allclose(F.super, np.diag([1, 0, 0, 1]), atol=1e-12)
        assert F.rank == 2

    def test_depolarizing_is_normalized_trace(self):
        F = markov_projection(depolarizing(0.3))
        one = identity((2,)).vec()
        assert np.allclose(F.super, np.outer(one, one) / 2, atol=1e-12)
        assert F.rank == 1

    def test_identities_on_random_maps(self, random_maps):
        for T in random_maps[:30]:
            F = markov_projection(T).super
            S = T.super
            assert np.max(np.abs(F @ F - F)) <= 1e-8
            assert np.max(np.abs(S @ F - F)) <= 1e-8
            assert np.max(np.abs(F @ S - F)) <= 1e-8

    def test_projection_is_markov(self, random_maps):
        for T in random_maps[:30]:
            rep = validate(markov_projection(T).as_operator(), tol=1e-8)
            assert rep.passed, rep

    def test_cesaro_agrees(self, random_maps, rng):
        for T in random_maps[:10]:
            x = random_element(T.shape, rng)
            F = markov_projection(T)
            c = telescoping_constant(T, x, F)
            for n in (10, 100, 1000):
                assert operator_norm(cesaro_mean(T, x, n) - F(x)) <= c / n + 1e-9


class TestSpaces:
    def test_fixed_identity(self):
        assert len(fixed_point_space(identity_map())) == 4

    def test_fixed_rotation_is_diagonal(self, rotation):
        basis = fixed_point_space(rotation)
        assert len(basis) == 2
        for b in basis:
            assert abs(b.blocks[0][0, 1]) < 1e-12 and abs(b.blocks[0][1, 0]) < 1e-12

    def test_fixed_depolarizing_is_scalars(self):
        (b,) = fixed_point_space(depolarizing(0.3))
        m = b.blocks[0]
        assert np.allclose(m, m[0, 0] * np.eye(2))

    def test_fixed_space_spans_projection_range(self, random_maps):
        for T in random_maps[:20]:
            F = markov_projection(T)
            q = np.column_stack([b.vec() for b in fixed_point_space(T)])
            resid = F.super - q @ (q.conj().T @ F.super)
            assert np.max(np.abs(resid)) <= 1e-8

    def test_eigenspace_full_at_one(self):
        assert len(eigenspace(identity_map((2, 1)), 1)) == 5

    def test_eigenspace_rotation(self, rotation):
        (b,) = eigenspace(rotation, np.exp(-1j * THETA))
        m = b.blocks[0]
        assert abs(abs(m[0, 1]) - 1) < 1e-12 and np.sum(np.abs(m)) - abs(m[0, 1]) < 1e-12

    def test_eigenspace_empty(self):
        assert eigenspace(depolarizing(0.3), -1) == []

    def test_eigenspace_rejects_outside_disk(self):
        with pytest.raises(DomainError):
            eigenspace(identity_map(), 1.5)


class TestSwmDefect:
    def test_fixed_point_has_zero_defect(self, rotation, rng):
        x = AlgebraElement.from_matrix(np.diag([2.0, -1.0 + 1j]))
        for psi in probe_states((2,), 3):
            assert swm_defect(rotation, x, psi, 25) <= 1e-14

    @pytest.mark.parametrize("n", [1, 10, 333])
    def test_rotation_stays_half(self, rotation, n):
        assert swm_defect(rotation, E12, vector_state([1, 1]), n) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("lam,n", [(0.3, 5), (0.3, 100), (0.8, 7)])
    def test_depolarizing_closed_form(self, lam, n):
        want = (1 - (1 - lam) ** n) / (n * lam)
        assert swm_defect(depolarizing(lam), SIGMA_Z, vector_state([1, 0]), n) == pytest.approx(want, abs=1e-13)


class TestClassify:
    def test_depolarizing(self):
        rep = classify(depolarizing(0.3))
        assert rep.uniquely_ergodic and rep.strictly_weak_mixing
        assert len(rep.peripheral_eigenvalues) == 1 and abs(rep.peripheral_eigenvalues[0] - 1) < 1e-12

    def test_rotation(self, rotation):
        rep = classify(rotation)
        assert rep.uniquely_ergodic and not rep.strictly_weak_mixing
        want = sorted([1, np.exp(1j), np.exp(-1j)], key=np.angle)
        assert np.allclose(rep.peripheral_eigenvalues, want, atol=1e-12)
        assert rep.max_defect > 0.1

    def test_identity(self):
        rep = classify(identity_map())
        assert rep.uniquely_ergodic and rep.strictly_weak_mixing
        assert all(d == 0 for _, d in rep.defect_trace)
        assert np.allclose(rep.projection.super, np.eye(4))

    def test_rejects_non_cp(self):
        with pytest.raises(ValidationError, match="complete positivity"):
            classify(transpose_map())

    def test_slow_mixing_flags_disagreement(self):
        # spectrally mixing, but the probe horizon is far too short to see it
        with pytest.raises(DiagnosticError):
            classify(depolarizing(1e-4), n_probe=50)

    def test_swm_implies_ue_and_no_peripheral_eigenvectors(self, random_maps):
        rng = np.random.default_rng(9)
        for T in random_maps[:40]:
            rep = classify(T)
            if not rep.strictly_weak_mixing:
                continue
            assert rep.uniquely_ergodic and rep.decomposition.passed
            for z in np.exp(1j * rng.uniform(0.01, 2 * np.pi - 0.01, size=20)):
                assert eigenspace(T, z) == []
            for z in rep.peripheral_eigenvalues:
                if abs(z - 1) > 1e-6:
                    assert eigenspace(T, z) == []

    def test_peripheral_eigenvalue_blocks_mixing(self, random_maps):
        for T in random_maps[:40]:
            rep = classify(T)
            nontrivial = [z for z in peripheral_eigenvalues(T) if abs(z - 1) > 1e-6]
            assert rep.strictly_weak_mixing == (not nontrivial)


class TestDecomposition:
    def test_identity(self):
        rep = ergodic_decomposition_check(identity_map())
        assert (rep.kernel_dim, rep.range_rank, rep.total_dim) == (4, 0, 4) and rep.passed

    def test_rotation(self, rotation):
        rep = ergodic_decomposition_check(rotation)
        assert (rep.kernel_dim, rep.range_rank) == (2, 2)
        assert rep.min_angle == pytest.approx(math.pi / 2, abs=1e-10)

    def test_depolarizing(self):
        rep = ergodic_decomposition_check(depolarizing(0.3))
        assert (rep.kernel_dim, rep.range_rank) == (1, 3) and rep.passed


class TestInvariantStates:
    def test_depolarizing_unique_maximally_mixed(self):
        (phi,) = invariant_states(depolarizing(0.3))
        assert np.allclose(phi.rho.blocks[0], np.eye(2) / 2, atol=1e-10)

    def test_rotation_diagonal_family(self, rotation):
        states = invariant_states(rotation)
        assert len(states) == 2
        for s in states:
            m = s.rho.blocks[0]
            assert abs(m[0, 1]) < 1e-10
        rows = np.array([s.row() for s in states])
        assert np.linalg.matrix_rank(rows, tol=1e-8) == 2

    def test_identity_all_states(self):
        states = invariant_states(identity_map())
        assert len(states) == 4
        assert np.linalg.matrix_rank(np.array([s.row() for s in states]), tol=1e-8) == 4

    def test_states_are_invariant(self, random_maps, rng):
        for T in random_maps[:20]:
            for s in invariant_states(T):
                x = random_element(T.shape, rng)
                assert abs(s(T(x)) - s(x)) <= 1e-8 * operator_norm(x)
                assert is_psd(s.rho, 1e-8)


class TestFixedPointAlgebra:
    def test_gallery(self, gallery):
        for T in gallery:
            assert fixed_point_algebra_check(T)

    def test_no_faithful_state(self):
        with pytest.raises(PreconditionError):
            fixed_point_algebra_check(amplitude_damping())

    def test_random_with_faithful_state(self, random_maps):
        checked = 0
        for T in random_maps[:20]:
            try:
                assert fixed_point_algebra_check(T)
                checked += 1
            except PreconditionError:
                pass
        assert checked > 0


def test_jordan_decomposition_consistency(random_maps):
    """Complex combinations of states follow the Cesaro means at rate 1/n."""
    rng = np.random.default_rng(4)
    for T in random_maps[:20]:
        F = markov_projection(T)
        states = probe_states(T.shape, seed=int(rng.integers(1 << 30)))[:4]
        coeffs = rng.normal(size=4) + 1j * rng.normal(size=4)
        x = random_element(T.shape, rng)
        f = lambda y: sum(c * s(y) for c, s in zip(coeffs, states))
        bound = telescoping_constant(T, x, F) * float(np.sum(np.abs(coeffs)))
        for n in (50, 500):
            assert abs(f(cesaro_mean(T, x, n)) - f(F(x))) <= bound / n + 1e-9


def test_rate_constants_rotation_envelope(rotation):
    x = E12 + E12.H
    cs = cesaro_rate_constants(rotation, x, [100, 1000, 10000])
    envelope = 2 / math.sin(THETA / 2)  # two off-diagonal entries, each |1 - e^{ik}| / |1 - e^{i}|
    for c in cs.values():
        assert c <= telescoping_constant(rotation, x) + 1e-9
        assert c >= 0.9 * envelope / 2
