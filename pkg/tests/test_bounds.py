import math

import numpy as np
import pytest

from anharmonic import AssumptionConstants, gaussian_site_potential
from bounds import (
    EnvelopeVariant,
    VelocityMode,
    anharmonic_envelope,
    anharmonic_velocity,
    coupling_constant,
    envelope_params,
    f_form_prefactor,
    generator_decay_bound,
    harmonic_envelope,
    harmonic_velocity,
    kappa_v,
    lightcone_envelope,
    min_distance,
    multisite_envelope,
    optimal_mu,
    sup_poly_exp,
    velocity_estimates,
)
from errors import DomainError, InvalidParameterError, NoFiniteVelocityError
from harmonic import HarmonicParams, evolve_weyl
from lattice import convolution_constant
from observables import WeylGenerator, harmonic_bracket_norm


@pytest.mark.parametrize(
    "omega, lam, expected",
    [(1.0, (0.0,), 1.0), (0.0, (1.0,), 2.0), (1.0, (1.0,), math.sqrt(5)), (1.0, (1.0, 2.0), math.sqrt(13))],
)
def test_coupling_constant(omega, lam, expected):
    assert coupling_constant(HarmonicParams(omega=omega, lam=lam)) == pytest.approx(expected)


def test_coupling_constant_vanishes_without_couplings():
    with pytest.raises(DomainError):
        coupling_constant(HarmonicParams(omega=0.0, lam=(0.0,)))


def test_harmonic_velocity_branches():
    flat = HarmonicParams(omega=1.0, lam=(0.0,))
    assert harmonic_velocity(2.0, flat) == pytest.approx(math.e ** 2)
    assert harmonic_velocity(0.1, flat) == pytest.approx(20.0)
    with pytest.raises(DomainError):
        harmonic_velocity(0.0, flat)


def test_optimal_rate():
    rate = optimal_mu()
    assert 0.5 < rate.mu0 < 1.0
    assert rate.residual <= 1e-10
    assert rate.v_opt_factor == pytest.approx(2.0 / rate.mu0)
    assert rate.v_opt_factor <= 4.0
    params = HarmonicParams(omega=1.0, lam=(1.0,))
    c = coupling_constant(params)
    assert harmonic_velocity(rate.mu0, params) == pytest.approx(c * math.exp(rate.mu0 / 2 + 1), rel=1e-9)
    assert harmonic_velocity(rate.mu0, params) <= 4 * c


def test_optimal_rate_minimizes_velocity(unit_params):
    best = harmonic_velocity(optimal_mu().mu0, unit_params)
    for mu in np.linspace(0.2, 3.0, 57):
        assert harmonic_velocity(mu, unit_params) >= best * (1 - 1e-9)


@pytest.mark.parametrize("nu, epsilon", [(1, 0.5), (2, 0.5), (1, 3.0), (3, 0.1)])
def test_sup_poly_exp_is_the_maximum(nu, epsilon):
    s = np.linspace(0.0, 200.0, 200001)
    grid = np.max((1 + s) ** (nu + 1) * np.exp(-epsilon * s))
    value = sup_poly_exp(nu, epsilon)
    assert value >= grid * (1 - 1e-12)
    assert value == pytest.approx(grid, rel=1e-6)


def test_sup_poly_exp_at_large_epsilon():
    # (nu + 1) / epsilon < 1 puts the maximum at s = 0
    assert sup_poly_exp(1, 4.0) == 1.0


def test_general_envelope_at_time_zero(chain, unit_params):
    mu, c = 1.0, math.sqrt(5)
    expected = (2 + c * math.exp(mu / 2) + 1 / c) * math.exp(-mu * 3)
    value = harmonic_envelope(chain, unit_params, [(0,)], [(3,)], 0.0, mu, EnvelopeVariant.GENERAL)
    assert value == pytest.approx(expected)


def test_weyl_envelope_prefactor(chain, unit_params):
    mu, c, t = 0.7, math.sqrt(5), 0.4
    v = c * max(2 / mu, math.exp(mu / 2 + 1))
    expected = (1 + c * math.exp(mu / 2) + 1 / c) * (
        math.exp(-mu * (2 - v * t)) + math.exp(-mu * (1 - v * t))
    )
    value = harmonic_envelope(chain, unit_params, [(0,)], [(2,), (-1,)], t, mu, "weyl")
    assert value == pytest.approx(expected)


def test_f_form_envelope_prefactor(chain, unit_params):
    mu, eps, t, c = 0.5, 0.5, 0.3, math.sqrt(5)
    # nu = 1: s* = 2 / eps - 1 = 3, so the sup is 16 e^-1.5
    prefactor = (1 + c * math.exp((mu + eps) / 2) + 1 / c) * 16 * math.exp(-1.5)
    growth = math.exp((mu + eps) * c * max(2 / (mu + eps), math.exp((mu + eps) / 2 + 1)) * t)
    decay = math.exp(-mu * 4) / 25
    value = harmonic_envelope(chain, unit_params, [(0,)], [(4,)], t, mu, EnvelopeVariant.F_FORM, epsilon=eps)
    assert value == pytest.approx(prefactor * growth * decay)
    assert f_form_prefactor(c, mu, eps, 1) == pytest.approx(prefactor)


def test_f_form_envelope_needs_epsilon(chain, unit_params):
    with pytest.raises(InvalidParameterError):
        harmonic_envelope(chain, unit_params, [(0,)], [(4,)], 0.0, 1.0, EnvelopeVariant.F_FORM)


def test_envelopes_reject_empty_sets(chain, unit_params):
    with pytest.raises(DomainError):
        harmonic_envelope(chain, unit_params, [], [(1,)], 0.0, 1.0)


@pytest.mark.parametrize("variant", list(EnvelopeVariant))
def test_envelope_monotone_in_time_and_distance(chain, unit_params, variant):
    kwargs = {"epsilon": 0.5} if variant == EnvelopeVariant.F_FORM else {}
    times = [0.0, 0.1, 0.5, 1.0, 2.0]
    values = [harmonic_envelope(chain, unit_params, [(0,)], [(3,)], t, 1.0, variant, **kwargs) for t in times]
    assert np.all(np.diff(values) >= 0)
    assert harmonic_envelope(chain, unit_params, [(0,)], [(-1,)], 1.0, 1.0, variant, **kwargs) == pytest.approx(
        harmonic_envelope(chain, unit_params, [(0,)], [(1,)], 1.0, 1.0, variant, **kwargs)
    )
    by_distance = [harmonic_envelope(chain, unit_params, [(0,)], [(d,)], 1.0, 1.0, variant, **kwargs) for d in range(9)]
    assert np.all(np.diff(by_distance) < 0)


def test_weyl_envelope_below_general(square):
    params = HarmonicParams(omega=0.5, lam=(1.0, 0.25))
    X, Y = [(0, 0), (1, 0)], [(3, 2)]
    for t in (0.0, 0.5, 1.5):
        weyl = harmonic_envelope(square, params, X, Y, t, 0.8, EnvelopeVariant.WEYL)
        general = harmonic_envelope(square, params, X, Y, t, 0.8, EnvelopeVariant.GENERAL)
        assert weyl < general


def test_lightcone_envelope_dominates_weyl(square):
    params = HarmonicParams(omega=1.0, lam=(1.0, 1.0))
    X, Y = [(0, 0)], [(2, 3), (4, 4)]
    for t in (0.0, 0.5, 1.0):
        weyl = harmonic_envelope(square, params, X, Y, t, 1.0)
        assert lightcone_envelope(square, params, X, Y, t, 1.0, 0.5) >= weyl
    with pytest.raises(DomainError):
        lightcone_envelope(square, params, X, Y, 0.0, 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        lightcone_envelope(square, params, X, Y, 0.0, 1.0, 0.5, EnvelopeVariant.F_FORM)


def test_min_distance(square):
    assert min_distance(square, [(0, 0), (1, 1)], [(3, 3), (-2, 0)]) == 2


def test_generator_decay_bound_dominates_evolved_generator(chain, unit_params):
    f = WeylGenerator(chain, [(0,), (1,)], [1.0, 0.5j])
    for t in (0.0, 0.5, 1.0):
        f_t = evolve_weyl(chain, unit_params, f, t).dense()
        bound = generator_decay_bound(chain, unit_params, f.support, None, t, 0.5, 0.5) * f.norm
        assert np.all(np.abs(f_t.imag) <= bound + 1e-12)
        assert generator_decay_bound(chain, unit_params, f.support, (3,), t, 0.5, 0.5) == pytest.approx(
            bound[chain.index_of((3,))] / f.norm
        )


def test_kappa_of_zero_potential():
    assert kappa_v(None) == 0.0


def test_kappa_quadrature_matches_closed_form():
    pot = gaussian_site_potential()
    assert kappa_v(pot) == pytest.approx(2.0)
    assert kappa_v(pot, use_closed_form=False) == pytest.approx(2.0, rel=1e-8)


def test_kappa_scales_with_amplitude_and_width():
    base = kappa_v(gaussian_site_potential(1.0, 1.0), use_closed_form=False)
    assert kappa_v(gaussian_site_potential(-3.0, 1.0), use_closed_form=False) == pytest.approx(3 * base, rel=1e-8)
    assert kappa_v(gaussian_site_potential(1.0, 2.0), use_closed_form=False) == pytest.approx(base / 4, rel=1e-8)


def test_anharmonic_envelope_reduces_to_harmonic_f_form(chain, unit_params):
    X, Y = [(0,)], [(3,)]
    for t in (0.0, 0.7):
        anharmonic = anharmonic_envelope(chain, unit_params, None, X, Y, t, 0.5, 0.5)
        harmonic = harmonic_envelope(chain, unit_params, X, Y, t, 0.5, EnvelopeVariant.F_FORM, epsilon=0.5)
        assert anharmonic == pytest.approx(harmonic)


def test_delta_increases_with_kappa(unit_params):
    cnu = convolution_constant(1)
    deltas = [
        envelope_params(unit_params, 0.5, 0.5, 1, kappa=k, cnu=cnu).delta_single_site(1)
        for k in (0.0, 0.5, 2.0, 10.0)
    ]
    assert np.all(np.diff(deltas) > 0)


def test_gaussian_site_delta_composition(chain, unit_params):
    mu = eps = 0.5
    cnu = convolution_constant(1)
    c = math.sqrt(5)
    prefactor = (1 + c * math.exp(0.5) + 1 / c) * 16 * math.exp(-1.5)
    delta = 1.0 * c * max(2.0, math.exp(1.5)) + prefactor * cnu * 2.0
    env = envelope_params(unit_params, mu, eps, 1, kappa=kappa_v(gaussian_site_potential()), cnu=cnu)
    assert env.delta_single_site(1) == pytest.approx(delta)
    value = anharmonic_envelope(chain, unit_params, gaussian_site_potential(), [(0,)], [(2,)], 0.4, mu, eps, cnu=cnu)
    assert value == pytest.approx(prefactor * math.exp(delta * 0.4) * math.exp(-1.0) / 9)


def test_harmonic_f_form_below_anharmonic(chain, unit_params):
    X, Y = [(0,)], [(5,)]
    harmonic = harmonic_envelope(chain, unit_params, X, Y, 1.0, 0.5, EnvelopeVariant.F_FORM, epsilon=0.5)
    anharmonic = anharmonic_envelope(chain, unit_params, gaussian_site_potential(), X, Y, 1.0, 0.5, 0.5)
    assert harmonic <= anharmonic


def _constants(c3, mu3):
    return AssumptionConstants(c1=0.0, c1_tilde=0.0, mu1=1.0, c2=0.0, mu2=1.0, c3=c3, mu3=mu3)


def test_multisite_envelope_without_c3_is_harmonic_f_form(chain, unit_params):
    value = multisite_envelope(chain, unit_params, _constants(0.0, 0.8), [(0,)], [(3,)], 0.5, 0.5)
    harmonic = harmonic_envelope(chain, unit_params, [(0,)], [(3,)], 0.5, 0.8, EnvelopeVariant.F_FORM, epsilon=0.5)
    assert value == pytest.approx(harmonic)


def test_multisite_envelope_with_zero_rate_decays_polynomially(chain, unit_params):
    constants = _constants(1.5, 0.0)
    values = [multisite_envelope(chain, unit_params, constants, [(0,)], [(d,)], 1.0, 0.5) for d in (1, 3, 7)]
    ratios = [values[i] * (1 + d) ** 2 for i, d in enumerate((1, 3, 7))]
    assert ratios == pytest.approx([ratios[0]] * 3)
    assert all(math.isfinite(v) for v in values)


def test_anharmonic_velocity_modes(unit_params):
    cnu = convolution_constant(1)
    mu, eps = 0.5, 0.5
    bare = (1 + eps / mu) * harmonic_velocity(mu + eps, unit_params)
    assert anharmonic_velocity(mu, eps, unit_params, 0.0, nu=1, cnu=cnu) == pytest.approx(bare)
    single = anharmonic_velocity(mu, eps, unit_params, 2.0, VelocityMode.SINGLE_SITE, nu=1, cnu=cnu)
    multi = anharmonic_velocity(mu, eps, unit_params, 2.0, VelocityMode.MULTI_SITE, nu=1, cnu=cnu)
    assert single >= harmonic_velocity(mu + eps, unit_params)
    assert multi - bare == pytest.approx(cnu * (single - bare))
    with pytest.raises(NoFiniteVelocityError):
        anharmonic_velocity(0.0, eps, unit_params, 1.0, "multi_site", nu=1, cnu=cnu)
    with pytest.raises(DomainError):
        anharmonic_velocity(0.0, eps, unit_params, 1.0, "single_site", nu=1, cnu=cnu)


def test_velocity_estimates(unit_params):
    estimates = velocity_estimates(unit_params, 0.5, 0.5, kappa=2.0, nu=1)
    assert estimates.v_h == pytest.approx(harmonic_velocity(0.5, unit_params))
    assert 0.5 < estimates.mu0 < 1.0
    assert estimates.v_h_opt <= 4 * math.sqrt(5)
    assert estimates.v_ah >= harmonic_velocity(1.0, unit_params)
    assert estimates.delta > 0


@pytest.mark.parametrize("mu", [0.5, 1.0])
@pytest.mark.parametrize("d", range(2, 8))
def test_harmonic_light_cone_on_chain(chain, unit_params, d, mu):
    f = WeylGenerator.delta(chain, (0,), 1.0)
    g = WeylGenerator.delta(chain, (d,), 1j)
    assert min_distance(chain, f.support, g.support) == d
    for t in np.linspace(0.0, 2.0, 21):
        measured = harmonic_bracket_norm(chain, unit_params, f, g, t)
        envelope = harmonic_envelope(chain, unit_params, f.support, g.support, t, mu, EnvelopeVariant.WEYL)
        assert measured <= envelope + 1e-12, (t, measured, envelope)
