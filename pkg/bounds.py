"""Closed-form Lieb-Robinson envelopes and velocities.

Envelopes leave out the observable norms (||f||, ||g||, ||dA||, ||dB||) and
any cardinality factors; callers multiply those in.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.integrate import IntegrationWarning, quad

from errors import AssumptionError, DomainError, InvalidParameterError, NoFiniteVelocityError
from lattice import DecayProfile, convolution_constant, f_mu

logger = logging.getLogger(__name__)


class EnvelopeVariant(str, Enum):
    GENERAL = "general"
    WEYL = "weyl"
    F_FORM = "f_form"


class VelocityMode(str, Enum):
    SINGLE_SITE = "single_site"
    MULTI_SITE = "multi_site"


def _require_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be positive, got {value!r}")


def coupling_constant(params):
    """c = sqrt(omega^2 + 4 sum_j lambda_j)"""
    c = params.c
    if not c > 0:
        raise DomainError("coupling constant vanishes (omega = 0 and every lambda_j = 0)")
    return c


def _velocity_factor(mu):
    return max(2.0 / mu, math.exp(mu / 2.0 + 1.0))


def harmonic_velocity(mu, params):
    """v_h(mu) = c max(2/mu, exp(mu/2 + 1))"""
    _require_positive("mu", mu)
    return coupling_constant(params) * _velocity_factor(mu)


@dataclass(frozen=True)
class OptimalRate:
    mu0: float
    v_opt_factor: float
    residual: float


def _branch_gap(mu):
    return 2.0 / mu - math.exp(mu / 2.0 + 1.0)


@lru_cache(maxsize=1)
def optimal_mu():
    """Rate where the two branches of v_h coincide, 2/mu = exp(mu/2 + 1)"""
    mu0 = optimize.bisect(_branch_gap, 0.5, 1.0, xtol=1e-12)
    rate = OptimalRate(mu0=mu0, v_opt_factor=2.0 / mu0, residual=abs(_branch_gap(mu0)))
    logger.debug("optimal rate mu0=%.12f (residual %.2e)", rate.mu0, rate.residual)
    return rate


def sup_poly_exp(nu, epsilon):
    """sup over s >= 0 of (1 + s)^(nu+1) exp(-epsilon s), attained at s* = max(0, (nu+1)/epsilon - 1)"""
    _require_positive("epsilon", epsilon)
    s = max(0.0, (nu + 1) / epsilon - 1.0)
    return (1.0 + s) ** (nu + 1) * math.exp(-epsilon * s)


def f_form_prefactor(c, mu, epsilon, nu):
    return (1.0 + c * math.exp((mu + epsilon) / 2.0) + 1.0 / c) * sup_poly_exp(nu, epsilon)


def _prefactor(c, mu, variant):
    base = 2.0 if variant == EnvelopeVariant.GENERAL else 1.0
    return base + c * math.exp(mu / 2.0) + 1.0 / c


def _pair_distances(lat, X, Y):
    if len(X) == 0 or len(Y) == 0:
        raise DomainError("envelopes need nonempty site sets X and Y")
    rows = lat.indices_of(X)
    cols = lat.indices_of(Y)
    return lat.distance_table[np.ix_(rows, cols)]


def min_distance(lat, X, Y):
    """d(X, Y) = min over x in X, y in Y of d(x, y)"""
    return int(_pair_distances(lat, X, Y).min())


def harmonic_envelope(lat, params, X, Y, t, mu, variant=EnvelopeVariant.WEYL, epsilon=None):
    variant = EnvelopeVariant(variant)
    _require_positive("mu", mu)
    distances = _pair_distances(lat, X, Y)
    c = coupling_constant(params)

    if variant == EnvelopeVariant.F_FORM:
        if epsilon is None:
            raise InvalidParameterError("the f_form envelope needs epsilon")
        _require_positive("epsilon", epsilon)
        rate = mu + epsilon
        growth = math.exp(rate * harmonic_velocity(rate, params) * abs(t))
        decay = f_mu(DecayProfile(mu, lat.nu), distances)
        return float(f_form_prefactor(c, mu, epsilon, lat.nu) * growth * np.sum(decay))

    velocity = harmonic_velocity(mu, params)
    return float(_prefactor(c, mu, variant) * np.sum(np.exp(-mu * (distances - velocity * abs(t)))))


def lightcone_envelope(lat, params, X, Y, t, mu, epsilon, variant=EnvelopeVariant.WEYL):
    """C exp(mu v_h |t|) exp(-epsilon mu d(X,Y)) min(|X|,|Y|) sum_z exp(-mu(1-epsilon) d(0,z))"""
    variant = EnvelopeVariant(variant)
    if variant == EnvelopeVariant.F_FORM:
        raise InvalidParameterError("the light-cone form exists for the general and weyl prefactors only")
    _require_positive("mu", mu)
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    d_xy = min_distance(lat, X, Y)
    c = coupling_constant(params)
    spread = np.sum(np.exp(-mu * (1.0 - epsilon) * lat.distance_table[lat.origin_index]))
    growth = math.exp(mu * harmonic_velocity(mu, params) * abs(t))
    return float(
        _prefactor(c, mu, variant) * growth * math.exp(-epsilon * mu * d_xy) * min(len(X), len(Y)) * spread
    )


def generator_decay_bound(lat, params, X, z, t, mu, epsilon):
    """Bound on |Im f_t(z)| / ||f|| for a generator supported on X; all sites when z is None"""
    _require_positive("mu", mu)
    c = coupling_constant(params)
    rate = mu + epsilon
    growth = math.exp(rate * harmonic_velocity(rate, params) * abs(t))
    distances = lat.distance_table[lat.indices_of(X)]
    profile = f_form_prefactor(c, mu, epsilon, lat.nu) * growth * f_mu(DecayProfile(mu, lat.nu), distances).sum(axis=0)
    if z is None:
        return profile
    return float(profile[lat.index_of(z)])


def kappa_v(pot, quad_tol=1e-10, use_closed_form=True):
    """kappa_V = integral of |r| |V'^(r)| over the real line"""
    if pot is None:
        return 0.0
    if use_closed_form and pot.kappa is not None:
        return float(pot.kappa)

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            half, _ = quad(
                lambda r: r * abs(pot.fourier_derivative(r)),
                0.0, np.inf, epsabs=1e-14, epsrel=quad_tol, limit=200,
            )
        except IntegrationWarning as exc:
            raise AssumptionError("kappa_V finite", str(exc)) from exc
    # V' is real, so |V'^(-r)| = |V'^(r)|
    value = 2.0 * half
    if not math.isfinite(value):
        raise AssumptionError("kappa_V finite", f"quadrature returned {value!r}")
    logger.debug("kappa_V by quadrature: %.12g", value)
    return value


@dataclass(frozen=True)
class EnvelopeParams:
    mu: float
    epsilon: float
    c: float
    kappa: float = 0.0
    c3: float = 0.0
    mu3: float = 0.0
    cnu: float = 1.0

    def prefactor(self, nu, rate=None):
        rate = self.mu if rate is None else rate
        return f_form_prefactor(self.c, rate, self.epsilon, nu)

    def delta_single_site(self, nu):
        rate = self.mu + self.epsilon
        return rate * self.c * _velocity_factor(rate) + self.prefactor(nu) * self.cnu * self.kappa

    def delta_multi_site(self, nu):
        rate = self.mu3 + self.epsilon
        return (
            rate * self.c * _velocity_factor(rate)
            + self.prefactor(nu, self.mu3) * self.c3 * self.cnu ** 2
        )


def envelope_params(params, mu, epsilon, nu, kappa=0.0, constants=None, cnu=None):
    _require_positive("epsilon", epsilon)
    return EnvelopeParams(
        mu=mu,
        epsilon=epsilon,
        c=coupling_constant(params),
        kappa=kappa,
        c3=constants.c3 if constants is not None else 0.0,
        mu3=constants.mu3 if constants is not None else 0.0,
        cnu=convolution_constant(nu) if cnu is None else cnu,
    )


def anharmonic_envelope(lat, params, pot, X, Y, t, mu, epsilon, cnu=None):
    """C exp(delta |t|) sum_{X x Y} F_mu(d(x,y)) for a single-site perturbation"""
    _require_positive("mu", mu)
    env = envelope_params(params, mu, epsilon, lat.nu, kappa=kappa_v(pot), cnu=cnu)
    decay = f_mu(DecayProfile(mu, lat.nu), _pair_distances(lat, X, Y))
    return float(env.prefactor(lat.nu) * math.exp(env.delta_single_site(lat.nu) * abs(t)) * np.sum(decay))


def multisite_envelope(lat, params, constants, X, Y, t, epsilon, cnu=None):
    """C exp(delta |t|) sum_{X x Y} F_mu3(d(x,y)) under the multi-site assumptions"""
    env = envelope_params(params, constants.mu3, epsilon, lat.nu, constants=constants, cnu=cnu)
    decay = f_mu(DecayProfile(constants.mu3, lat.nu), _pair_distances(lat, X, Y))
    return float(env.prefactor(lat.nu, env.mu3) * math.exp(env.delta_multi_site(lat.nu) * abs(t)) * np.sum(decay))


def anharmonic_velocity(mu, epsilon, params, strength, mode=VelocityMode.SINGLE_SITE, nu=1, cnu=None):
    """Velocity of the anharmonic envelope; strength is kappa_V (single_site) or C_3 (multi_site)"""
    mode = VelocityMode(mode)
    _require_positive("epsilon", epsilon)
    if mode == VelocityMode.MULTI_SITE and mu == 0:
        raise NoFiniteVelocityError("mu3 = 0 gives only polynomial decay and no finite velocity")
    _require_positive("mu", mu)
    cnu = convolution_constant(nu) if cnu is None else cnu
    c = coupling_constant(params)
    prefactor = f_form_prefactor(c, mu, epsilon, nu)
    spread = (1.0 + epsilon / mu) * harmonic_velocity(mu + epsilon, params)
    if mode == VelocityMode.SINGLE_SITE:
        return spread + prefactor * cnu * strength / mu
    return spread + prefactor * strength * cnu ** 2 / mu


@dataclass(frozen=True)
class VelocityEstimates:
    v_h: float
    mu0: float
    v_h_opt: float
    delta: float
    v_ah: float


def velocity_estimates(params, mu, epsilon, kappa, nu, cnu=None):
    rate = optimal_mu()
    env = envelope_params(params, mu, epsilon, nu, kappa=kappa, cnu=cnu)
    return VelocityEstimates(
        v_h=harmonic_velocity(mu, params),
        mu0=rate.mu0,
        v_h_opt=harmonic_velocity(rate.mu0, params),
        delta=env.delta_single_site(nu),
        v_ah=anharmonic_velocity(mu, epsilon, params, kappa, VelocityMode.SINGLE_SITE, nu, env.cnu),
    )
