import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swmix.errors import DomainError
from swmix.free_group import (
    EMPTY,
    QQi,
    GroupAlgebraElement,
    GroupWord,
    RDConstants,
    SHARP,
    cesaro_shift_average,
    constants_mode,
    decay_experiment,
    fixed_subgroup_projection,
    generator,
    haagerup_bound,
    is_identity,
    l2_norm,
    length,
    orbit_type,
    parse_word,
    reduce,
    shift,
    subsequence_shift_average,
)
from swmix.sequences import IndexSequence


def naive_reduce(letters):
    """Repeatedly scan for an adjacent cancelling pair until none is left."""
    out = list(letters)
    changed = True
    while changed:
        changed = False
        for i in range(len(out) - 1):
            if out[i][0] == out[i + 1][0] and out[i][1] == -out[i + 1][1]:
                del out[i:i + 2]
                changed = True
                break
    return tuple(out)


def random_letters(rng, n, gens=3):
    return [(rng.randrange(gens), rng.choice((1, -1))) for _ in range(n)]


def random_word(rng, max_len=6, gens=5):
    return reduce(random_letters(rng, rng.randrange(max_len + 1), gens))


def random_element(rng, size=5):
    terms = {}
    for _ in range(size):
        w = random_word(rng, 4, 3)
        c = QQi(Fraction(rng.randint(-9, 9), rng.randint(1, 9)), Fraction(rng.randint(-9, 9), rng.randint(1, 9)))
        terms[w] = terms.get(w, QQi()) + c
    return GroupAlgebraElement(terms)


class TestWords:
    def test_cancellation(self):
        assert reduce([(1, 1), (1, -1), (2, 1)]) == generator(2)

    def test_empty(self):
        assert reduce([]) == EMPTY and len(EMPTY) == 0

    def test_matches_naive_reducer(self):
        rng = random.Random(5)
        for _ in range(300):
            letters = random_letters(rng, 50, gens=2)
            assert reduce(letters).letters == naive_reduce(letters)

    def test_rejects_unreduced(self):
        with pytest.raises(ValueError):
            GroupWord(((0, 1), (0, -1)))

    def test_parse_roundtrip(self):
        w = parse_word("g0 g3^-1 g0")
        assert w.letters == ((0, 1), (3, -1), (0, 1))
        assert parse_word(str(w)) == w
        assert parse_word("g-2") == generator(-2)
        assert str(EMPTY) == "e" and parse_word("e") == EMPTY

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_word("h1")

    def test_group_law(self):
        rng = random.Random(1)
        for _ in range(50):
            a, b, c = (random_word(rng) for _ in range(3))
            assert (a * b) * c == a * (b * c)
            assert a * a.inverse() == EMPTY


class TestShift:
    def test_translation(self):
        assert shift(parse_word("g0 g3^-1"), 2) == parse_word("g2 g5^-1")

    def test_empty(self):
        assert shift(EMPTY, 7) == EMPTY

    def test_composition_and_homomorphism(self):
        rng = random.Random(2)
        corpus = [random_word(rng) for _ in range(100)]
        for w in corpus:
            for a in (-3, 0, 1, 5):
                for b in (-2, 4):
                    assert shift(shift(w, a), b) == shift(w, a + b)
            assert length(shift(w, 9)) == length(w)
        for u, v in zip(corpus, corpus[1:]):
            assert shift(u * v, 3) == shift(u, 3) * shift(v, 3)

    def test_orbit_type(self):
        assert orbit_type(EMPTY) == "Fixed"
        assert orbit_type(generator(0)) == "Infinite"
        rng = random.Random(3)
        for _ in range(50):
            w = random_word(rng)
            if len(w):
                assert orbit_type(w) == "Infinite"
                assert min(i for i, _ in shift(w, 1).letters) > min(i for i, _ in w.letters)

    def test_translates_are_disjoint(self):
        rng = random.Random(4)
        for _ in range(10):
            g = random_word(rng, 5)
            if not len(g):
                continue
            for j in (0, 3):
                for k in range(1, 65):
                    a = GroupAlgebraElement.delta(shift(g, j))
                    b = GroupAlgebraElement.delta(shift(g, j + k))
                    assert len(a) == len(b) == 1 and not set(a.support()) & set(b.support())


class TestAverages:
    def test_generator_four(self):
        f = cesaro_shift_average(generator(0), 4)
        assert f.terms == {generator(i): QQi(Fraction(1, 4)) for i in range(1, 5)}

    def test_empty_word(self):
        f = cesaro_shift_average(EMPTY, 9)
        assert f.terms == {EMPTY: QQi(Fraction(1))}

    def test_support_size(self):
        g = parse_word("g0 g1^-1 g0")
        for n in (1, 17, 256, 1024):
            assert len(cesaro_shift_average(g, n)) == n

    def test_exact_square(self):
        g = parse_word("g2^-1 g0")
        for n in (1, 3, 64, 1000, 4096):
            norm = l2_norm(cesaro_shift_average(g, n))
            assert norm.square == Fraction(1, n)
            assert norm.value == pytest.approx(1 / math.sqrt(n), rel=1e-15)

    def test_subsequence_choice_is_immaterial(self):
        g = parse_word("g1 g4")
        horizon = 3000
        for idx in (IndexSequence.evens(horizon), IndexSequence.squares(horizon), IndexSequence.multiples(7, horizon)):
            for n in (1, 10, 50):
                assert l2_norm(subsequence_shift_average(g, idx.indices[:n])).square == Fraction(1, n)

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            cesaro_shift_average(generator(0), 0)


class TestNorms:
    def test_single_delta(self):
        assert l2_norm(GroupAlgebraElement.delta(generator(3))) == (Fraction(1), 1.0)

    def test_pythagoras(self):
        f = GroupAlgebraElement.delta(generator(0), 3) + GroupAlgebraElement.delta(generator(1), 4)
        assert l2_norm(f) == (Fraction(25), 5.0)

    def test_complex_coefficients(self):
        f = GroupAlgebraElement.delta(EMPTY, QQi(Fraction(1, 2), Fraction(-1, 3)))
        assert l2_norm(f).square == Fraction(1, 4) + Fraction(1, 9)

    def test_haagerup_examples(self):
        assert haagerup_bound(cesaro_shift_average(generator(0), 9)) == pytest.approx(2 / 3, abs=1e-15)
        assert haagerup_bound(GroupAlgebraElement.delta(EMPTY)) == 1.0
        assert haagerup_bound(GroupAlgebraElement.delta(parse_word("g0 g1 g2"))) == 4.0

    def test_rd_constants(self):
        f = cesaro_shift_average(parse_word("g0 g1"), 4)
        assert haagerup_bound(f, RDConstants(2.0, 1.5)) == pytest.approx(2 * 3 ** 1.5 / 2, rel=1e-15)
        with pytest.raises(DomainError):
            RDConstants(0.5, 1)
        assert constants_mode(SHARP) == "free_group_sharp"

    def test_sandwich(self):
        rng = random.Random(6)
        for _ in range(1000):
            f = random_element(rng)
            assert l2_norm(f).value <= haagerup_bound(f) + 1e-12

    def test_homogeneous_parts_are_orthogonal(self):
        # homogeneous parts are orthogonal, so the l2 square splits over lengths
        rng = random.Random(7)
        for _ in range(50):
            f = random_element(rng)
            parts = f.homogeneous_parts()
            assert sum((l2_norm(p).square for p in parts.values()), Fraction(0)) == l2_norm(f).square


class TestAlgebra:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_adjoint_reverses_products(self, seed):
        rng = random.Random(seed)
        a, b = random_element(rng, 3), random_element(rng, 3)
        assert (a * b).adjoint() == b.adjoint() * a.adjoint()

    def test_delta_multiplication(self):
        u, v = parse_word("g0 g1"), parse_word("g1^-1 g2")
        assert GroupAlgebraElement.delta(u) * GroupAlgebraElement.delta(v) == GroupAlgebraElement.delta(parse_word("g0 g2"))

    def test_shift_is_isometric(self):
        rng = random.Random(8)
        for _ in range(20):
            f = random_element(rng)
            assert l2_norm(f.shift(5)) == l2_norm(f)


class TestProjection:
    def test_restriction(self):
        f = GroupAlgebraElement.delta(EMPTY, 2) + GroupAlgebraElement.delta(generator(1), 3)
        assert fixed_subgroup_projection(f, is_identity) == GroupAlgebraElement.delta(EMPTY, 2)

    def test_idempotent(self):
        f = GroupAlgebraElement.delta(EMPTY, QQi(Fraction(1, 3), Fraction(2)))
        assert fixed_subgroup_projection(f, is_identity) == f

    def test_contractive(self):
        rng = random.Random(9)
        for _ in range(200):
            f = random_element(rng)
            assert l2_norm(fixed_subgroup_projection(f, is_identity)).square <= l2_norm(f).square


class TestDecay:
    def test_generator(self):
        rows = decay_experiment(generator(0), [1, 4, 16])
        assert [r.lower_float for r in rows] == [1.0, 0.5, 0.25]
        assert [r.upper_float for r in rows] == [2.0, 1.0, 0.5]
        assert [r.lower_exact for r in rows] == [Fraction(1), Fraction(1, 4), Fraction(1, 16)]

    def test_length_three_ratio(self):
        for r in decay_experiment(parse_word("g0 g1^-1 g0"), [1, 5, 77, 512]):
            assert r.upper_float / r.lower_float == pytest.approx(4.0, rel=1e-14)

    def test_n_one_is_exact(self):
        (r,) = decay_experiment(parse_word("g3^-1 g1"), [1])
        assert r.lower_exact == 1 and r.lower_float == 1.0

    def test_rd_mode_label(self):
        (r,) = decay_experiment(generator(0), [4], RDConstants(3.0, 2.0))
        assert r.constants_mode.startswith("rd(") and r.upper_float == pytest.approx(3 * 4 / 2)

    def test_empty_word_rejected(self):
        with pytest.raises(DomainError):
            decay_experiment(EMPTY, [1])
