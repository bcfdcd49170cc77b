import cmath

import numpy as np
import pytest

from errors import DomainError, InvalidParameterError
from harmonic import HarmonicParams, evolve_weyl
from lattice import PhasePoint, make_lattice
from observables import (
    SmoothObservable,
    WeylGenerator,
    harmonic_bracket_norm,
    inner_product,
    observable_gradients,
    poisson_bracket_numeric,
    poisson_bracket_weyl,
    sup_norm_estimate,
    weyl_eval,
    weyl_observable,
)
from phase_sampler import PhaseSampler


def test_generator_validation(short_chain):
    with pytest.raises(InvalidParameterError):
        WeylGenerator(short_chain, [(0,), (0,)], [1.0, 2.0])
    with pytest.raises(InvalidParameterError):
        WeylGenerator(short_chain, [(0,)], [1.0, 2.0])
    with pytest.raises(DomainError):
        WeylGenerator(short_chain, [(9,)], [1.0])
    with pytest.raises(DomainError):
        WeylGenerator(short_chain, [(0,)], [np.inf])


def test_generator_norm_and_dense(short_chain):
    f = WeylGenerator(short_chain, [(1,), (-2,)], [3 - 4j, 1j])
    assert f.norm == pytest.approx(5.0)
    dense = f.dense()
    assert dense[short_chain.index_of((1,))] == 3 - 4j
    assert np.count_nonzero(dense) == 2
    with pytest.raises(DomainError):
        f.dense(make_lattice(1, 2))


def test_weyl_eval_examples(short_chain):
    f = WeylGenerator.delta(short_chain, (0,))
    q, p = np.zeros(short_chain.size), np.zeros(short_chain.size)
    q[short_chain.origin_index] = np.pi
    assert weyl_eval(f, PhasePoint(q, p)) == pytest.approx(-1.0)

    g = WeylGenerator.delta(short_chain, (0,), 1j)
    p[short_chain.origin_index] = np.pi / 2
    assert weyl_eval(g, PhasePoint(q, p)) == pytest.approx(1j)


def test_weyl_eval_has_unit_modulus(short_chain, rng):
    f = WeylGenerator.from_dense(short_chain, rng.normal(size=8) + 1j * rng.normal(size=8))
    for _ in range(20):
        x = PhasePoint(rng.uniform(-5, 5, 8), rng.uniform(-5, 5, 8))
        assert abs(weyl_eval(f, x)) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        weyl_eval(f, PhasePoint.zeros(3))


def test_inner_product_is_conjugate_linear_in_first_slot(short_chain):
    f = WeylGenerator.delta(short_chain, (0,), 2j)
    g = WeylGenerator.delta(short_chain, (0,), 3.0)
    assert inner_product(f, g) == pytest.approx(-6j)
    assert inner_product(g, f) == pytest.approx(6j)


@pytest.mark.parametrize(
    "f_value, g_value, expected",
    [(1.0, 1.0, 0.0), (1.0, 1j, -1.0), (1j, 1.0, 1.0), (2.0, 0.5j, -1.0)],
)
def test_bracket_coefficient_on_a_single_site(short_chain, f_value, g_value, expected):
    f = WeylGenerator.delta(short_chain, (0,), f_value)
    g = WeylGenerator.delta(short_chain, (0,), g_value)
    assert poisson_bracket_weyl(f, g).coefficient == pytest.approx(expected)


def test_bracket_vanishes_for_disjoint_supports(short_chain, random_point):
    f = WeylGenerator.delta(short_chain, (0,), 1 + 1j)
    g = WeylGenerator.delta(short_chain, (2,), 1j)
    bracket = poisson_bracket_weyl(f, g)
    assert bracket.coefficient == 0.0
    assert bracket(random_point(short_chain.size)) == 0.0


def test_weyl_relation_matches_finite_differences(short_chain, rng):
    f = WeylGenerator(short_chain, [(0,), (1,)], [0.8 + 0.3j, -0.5j])
    g = WeylGenerator(short_chain, [(1,), (2,)], [0.4 - 0.6j, 1.0])
    exact = poisson_bracket_weyl(f, g)
    numeric_f = SmoothObservable(short_chain, lambda x: weyl_eval(f, x), support=f.support)
    numeric_g = SmoothObservable(short_chain, lambda x: weyl_eval(g, x), support=g.support)
    for _ in range(100):
        x = PhasePoint(rng.uniform(-5, 5, 8), rng.uniform(-5, 5, 8))
        value = poisson_bracket_numeric(numeric_f, numeric_g, x, step=1e-4, richardson=True)
        assert abs(value - exact(x)) <= 1e-6


def test_numeric_bracket_is_antisymmetric(short_chain, random_point):
    A = weyl_observable(WeylGenerator.delta(short_chain, (0,), 1 + 2j))
    B = weyl_observable(WeylGenerator(short_chain, [(0,), (1,)], [1j, 0.3]))
    x = random_point(short_chain.size, amplitude=4.0)
    assert poisson_bracket_numeric(A, B, x) == pytest.approx(-poisson_bracket_numeric(B, A, x))
    assert poisson_bracket_numeric(A, A, x) == pytest.approx(0.0, abs=1e-12)


def test_exact_and_finite_difference_gradients_agree(short_chain, random_point):
    f = WeylGenerator(short_chain, [(-1,), (3,)], [0.2 + 0.9j, -1.1])
    exact = weyl_observable(f)
    numeric = SmoothObservable(short_chain, exact.evaluate, support=f.support)
    x = random_point(short_chain.size, amplitude=3.0)
    for left, right in zip(observable_gradients(exact, x), observable_gradients(numeric, x, step=1e-5)):
        np.testing.assert_allclose(left, right, atol=1e-8)


def test_finite_difference_step_must_be_positive(short_chain):
    numeric = SmoothObservable(short_chain, lambda x: 0.0)
    with pytest.raises(InvalidParameterError):
        observable_gradients(numeric, PhasePoint.zeros(short_chain.size), step=0.0)


def test_sup_norm_estimate(short_chain):
    f = WeylGenerator.delta(short_chain, (0,))
    sampler = PhaseSampler(count=10, seed=3)
    assert sup_norm_estimate(weyl_observable(f), sampler) == pytest.approx(1.0)
    bracket = poisson_bracket_weyl(f, WeylGenerator.delta(short_chain, (0,), 2j))
    assert sup_norm_estimate(bracket, sampler) == pytest.approx(2.0)
    with pytest.raises(InvalidParameterError):
        sup_norm_estimate(lambda x: 1.0, sampler)


def test_harmonic_bracket_norm_matches_evolved_generator(short_chain, unit_params):
    f = WeylGenerator.delta(short_chain, (0,))
    g = WeylGenerator.delta(short_chain, (2,), 1j)
    assert harmonic_bracket_norm(short_chain, unit_params, f, g, 0.0) == pytest.approx(0.0, abs=1e-14)
    f_t = evolve_weyl(short_chain, unit_params, f, 0.8)
    expected = abs(np.vdot(f_t.dense(), g.dense()).imag)
    assert harmonic_bracket_norm(short_chain, unit_params, f, g, 0.8) == pytest.approx(expected)
    assert expected > 0


def test_harmonic_bracket_norm_decoupled_site(short_chain):
    params = HarmonicParams(omega=1.0, lam=(0.0,))
    f = WeylGenerator.delta(short_chain, (0,))
    g = WeylGenerator.delta(short_chain, (0,), 1j)
    t = 0.3
    # f_t(0) = cos 2t + i sin 2t, so Im <f_t, g> = cos 2t
    assert harmonic_bracket_norm(short_chain, params, f, g, t) == pytest.approx(abs(cmath.cos(2 * t)))
