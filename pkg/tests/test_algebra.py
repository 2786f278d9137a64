import numpy as np
import pytest

from gkms.algebra import (
    AlgebraElement,
    conditional_expectation,
    convolve,
    involute,
    matrix_realization,
    reduced_norm,
    regular_representation,
)
from gkms.errors import ParentMismatch, UnknownUnit
from gkms.groupoid import cyclic_group, disjoint_union, pair_groupoid

from corpus import instance_groupoids

D = AlgebraElement.delta


def _random(g, rng):
    return AlgebraElement(g, rng.normal(size=len(g.arrows)) + 1j * rng.normal(size=len(g.arrows)))


class TestConvolution:
    def test_matrix_units(self):
        g = pair_groupoid(2)
        assert convolve(D(g, (1, 2)), D(g, (2, 1))).allclose(D(g, (1, 1)))
        assert convolve(D(g, (1, 2)), D(g, (1, 2))).allclose(AlgebraElement.zero(g))

    def test_z2(self):
        g = cyclic_group(2)
        assert convolve(D(g, 1), D(g, 1)).allclose(D(g, 0))

    def test_parent_mismatch(self):
        with pytest.raises(ParentMismatch):
            convolve(D(pair_groupoid(2), (1, 1)), D(pair_groupoid(2), (1, 1)))

    def test_unit_is_identity(self):
        g = disjoint_union(pair_groupoid(2), cyclic_group(3))
        f = _random(g, np.random.default_rng(0))
        one = AlgebraElement.unit(g)
        assert (one * f).allclose(f) and (f * one).allclose(f)


class TestInvolution:
    def test_examples(self):
        g = pair_groupoid(2)
        assert involute(D(g, (1, 2))).allclose(D(g, (2, 1)))
        assert involute(D(g, (1, 1), 1j)).allclose(D(g, (1, 1), -1j))

    def test_involutive_and_antimultiplicative(self):
        rng = np.random.default_rng(1)
        for g in instance_groupoids().values():
            f, h = _random(g, rng), _random(g, rng)
            assert f.star().star().allclose(f, 1e-14)
            assert (f * h).star().allclose(h.star() * f.star(), 1e-10)


class TestRepresentations:
    def test_pair2_unit1(self):
        g = pair_groupoid(2)
        rep = regular_representation(g, 1)
        m = rep.matrix_of(D(g, (2, 1)))
        b = list(rep.basis)
        expect = np.zeros((2, 2))
        expect[b.index((2, 1)), b.index((1, 1))] = 1
        assert np.array_equal(m, expect)
        assert np.array_equal(rep.matrix_of(D(g, (1, 1)) + D(g, (2, 2))), np.eye(2))

    def test_z2_permutation(self):
        g = cyclic_group(2)
        rep = regular_representation(g, "*")
        assert np.array_equal(rep.matrix_of(D(g, 1)).real, [[0, 1], [1, 0]])

    def test_unknown_unit(self):
        with pytest.raises(UnknownUnit):
            regular_representation(pair_groupoid(2), 9)

    def test_star_homomorphism(self):
        rng = np.random.default_rng(2)
        for g in instance_groupoids().values():
            for x in g.units:
                rep = regular_representation(g, x)
                f, h = _random(g, rng), _random(g, rng)
                assert np.allclose(rep.matrix_of(f * h), rep.matrix_of(f) @ rep.matrix_of(h), atol=1e-10)
                assert np.allclose(rep.matrix_of(f.star()), rep.matrix_of(f).conj().T, atol=1e-12)


class TestNorm:
    def test_examples(self):
        g = pair_groupoid(2)
        assert reduced_norm(D(g, (1, 2))) == pytest.approx(1.0)
        assert reduced_norm(D(g, (1, 2)) + D(g, (2, 1))) == pytest.approx(1.0)
        assert reduced_norm(D(g, (1, 1), 3 - 4j)) == pytest.approx(5.0)

    def test_c_star_identity(self):
        rng = np.random.default_rng(3)
        for g in instance_groupoids().values():
            f = _random(g, rng)
            assert abs(reduced_norm(f.star() * f) - reduced_norm(f) ** 2) < 1e-8 * max(1, reduced_norm(f) ** 2)


class TestExpectation:
    def test_examples(self):
        g = pair_groupoid(2)
        assert conditional_expectation(D(g, (1, 2))).allclose(AlgebraElement.zero(g))
        f = D(g, (1, 1)) + 2 * D(g, (1, 2))
        assert conditional_expectation(f).allclose(D(g, (1, 1)))

    def test_positive_idempotent_bimodule(self):
        rng = np.random.default_rng(4)
        for g in instance_groupoids().values():
            f = _random(g, rng)
            p = conditional_expectation(f.star() * f)
            assert np.all(p.coeffs[g.unit_idx].real >= -1e-12)
            assert np.allclose(p.coeffs[g.unit_idx].imag, 0, atol=1e-12)
            assert conditional_expectation(conditional_expectation(f)).allclose(conditional_expectation(f))
            h = AlgebraElement.diagonal(g, rng.normal(size=len(g.units)))
            k = AlgebraElement.diagonal(g, rng.normal(size=len(g.units)))
            lhs = conditional_expectation(h * f * k)
            assert lhs.allclose(h * conditional_expectation(f) * k, 1e-10)


class TestRealization:
    def test_pair_matrix_units(self):
        g = pair_groupoid(3)
        r = matrix_realization(g)
        assert r.block_sizes == (3,)
        basis = list(r.blocks[0].basis)
        m = r.embedding(D(g, (1, 3)))
        # basis of G_1 is (a, 1); (1,3) maps e_(3,1) to e_(1,1)
        assert m[basis.index((1, 1)), basis.index((3, 1))] == 1 and np.abs(m).sum() == 1

    def test_block_sizes(self):
        assert matrix_realization(cyclic_group(2)).block_sizes == (2,)
        assert matrix_realization(disjoint_union(pair_groupoid(2), cyclic_group(2))).block_sizes == (2, 2)

    def test_faithful_homomorphism(self):
        rng = np.random.default_rng(5)
        for g in instance_groupoids().values():
            r = matrix_realization(g)
            f, h = _random(g, rng), _random(g, rng)
            assert np.allclose(r.embedding(f * h), r.embedding(f) @ r.embedding(h), atol=1e-10)
            assert np.allclose(r.embedding(f.star()), r.embedding(f).conj().T)
            assert r.pullback(r.embedding(f)).allclose(f, 1e-12)
            assert r.image_defect(r.embedding(f)) < 1e-12
            # injective: images of the delta basis are linearly independent
            stack = np.array([r.embedding(D(g, a)).ravel() for a in g.arrows])
            assert np.linalg.matrix_rank(stack) == len(g.arrows)
