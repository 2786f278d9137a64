"""Randomized invariants over the instance groupoids."""
import numpy as np
from hypothesis import given, strategies as st

from gkms.algebra import AlgebraElement, conditional_expectation, reduced_norm, regular_representation
from gkms.dynamics import InnerAction, apply_inner, inner_action_of
from gkms.groupoid import coboundary
from gkms.kms import (
    check_pair,
    diagonalize_kms,
    is_diagonal_functional,
    kms_set,
    neshveyev_decompose,
    neshveyev_reconstruct,
    verify_kms,
)

from corpus import instance_groupoids, random_hermitian_element

GROUPOIDS = instance_groupoids()
names = st.sampled_from(sorted(GROUPOIDS))
seeds = st.integers(0, 2 ** 32 - 1)
betas = st.floats(-3, 3).filter(lambda b: abs(b) > 1e-3)


def element(g, rng):
    n = len(g.arrows)
    return AlgebraElement(g, rng.normal(size=n) + 1j * rng.normal(size=n))


@given(names, seeds)
def test_associative(name, seed):
    g, rng = GROUPOIDS[name], np.random.default_rng(seed)
    a, b, c = element(g, rng), element(g, rng), element(g, rng)
    assert ((a * b) * c).allclose(a * (b * c), 1e-9)


@given(names, seeds)
def test_involution(name, seed):
    g, rng = GROUPOIDS[name], np.random.default_rng(seed)
    a, b = element(g, rng), element(g, rng)
    assert a.star().star().allclose(a, 0)
    assert (a * b).star().allclose(b.star() * a.star(), 1e-10)


@given(names, seeds)
def test_c_star_identity(name, seed):
    g, rng = GROUPOIDS[name], np.random.default_rng(seed)
    a = element(g, rng)
    n = reduced_norm(a)
    assert abs(reduced_norm(a.star() * a) - n * n) <= 1e-8 * max(1.0, n * n)


@given(names, seeds)
def test_expectation_bimodule(name, seed):
    g, rng = GROUPOIDS[name], np.random.default_rng(seed)
    f = element(g, rng)
    h = AlgebraElement.diagonal(g, rng.normal(size=len(g.units)))
    k = AlgebraElement.diagonal(g, rng.normal(size=len(g.units)))
    p = conditional_expectation
    assert p(h * f * k).allclose(h * p(f) * k, 1e-10)
    assert p(p(f)).allclose(p(f), 0)


@given(names, seeds)
def test_regular_rep_homomorphism(name, seed):
    g, rng = GROUPOIDS[name], np.random.default_rng(seed)
    a, b = element(g, rng), element(g, rng)
    for x in g.units:
        pi = regular_representation(g, x).matrix_of
        assert np.allclose(pi(a * b), pi(a) @ pi(b), atol=1e-10)
        assert np.allclose(pi(a.star()), pi(a).conj().T, atol=1e-12)


@given(names, seeds, st.floats(-2, 2), st.floats(-2, 2))
def test_group_law(name, seed, s, t):
    g, rng = GROUPOIDS[name], np.random.default_rng(seed)
    act = InnerAction(random_hermitian_element(g, rng))
    f = element(g, rng)
    assert apply_inner(act, s, apply_inner(act, t, f)).allclose(apply_inner(act, s + t, f), 1e-9)
    assert apply_inner(act, 0.0, f).allclose(f, 1e-12)


@given(names, seeds, betas)
def test_kms_random_hamiltonian(name, seed, beta):
    g, rng = GROUPOIDS[name], np.random.default_rng(seed)
    # unit-scale spectra keep exp(beta M / 2) well conditioned at |beta| <= 3
    act = InnerAction(random_hermitian_element(g, rng, scale=0.5))
    fam = kms_set(act, beta)
    assert len(fam.extreme_points) == len(fam.central_projections)
    for w in fam.extreme_points:
        assert verify_kms(w, act, beta).residual < 1e-9
        assert w.min_eigenvalue() > -1e-12 and abs(w.total_mass - 1) < 1e-12
    mix = fam.state(rng.random(len(fam.extreme_points)) + 0.1)
    assert verify_kms(mix, act, beta).residual < 1e-9


@given(names, seeds, betas)
def test_decompose_reconstruct(name, seed, beta):
    g, rng = GROUPOIDS[name], np.random.default_rng(seed)
    c = coboundary(g, rng.normal(size=len(g.units)))
    fam = kms_set(inner_action_of(c), beta)
    w = fam.state(rng.random(len(fam.extreme_points)) + 0.05)
    pair = neshveyev_decompose(w, c, beta)
    assert check_pair(g, pair, c, beta).residual < 1e-9
    back = neshveyev_reconstruct(g, pair, c, beta)
    assert np.abs(back.values - w.values).max() < 1e-10
    d = diagonalize_kms(w, c, beta)
    assert is_diagonal_functional(d) and verify_kms(d, inner_action_of(c), beta).residual < 1e-9
