import logging
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, dblquad, quad

from bounds import kappa_v
from errors import AssumptionError, DivergenceError, DomainError, InvalidParameterError, NumericalError
from harmonic import HarmonicParams, harmonic_energy
from lattice import DecayProfile, PhasePoint, TorusLattice, decay_matrix, decay_sum
from observables import weyl_eval

logger = logging.getLogger(__name__)

MAX_STEPS = 10 ** 8
SCHEMES = ("leapfrog", "rk4")

# certification of sup-norm constants for potentials without closed forms
GRID_HALF_WIDTH = 50.0
GRID_STEP = 1e-2
PAIR_GRID_STEP = 0.1
SPOT_CHECKS = 10_000
SAFETY_MARGIN = 0.01


def numeric_fourier_derivative(v1, r):
    """(1/2pi) * integral of exp(-iqr) V'(q) dq, split into cosine and sine transforms"""
    r = float(r)
    even = lambda q: v1(q) + v1(-q)  # noqa: E731
    odd = lambda q: v1(q) - v1(-q)  # noqa: E731
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            if r == 0.0:
                real, _ = quad(even, 0.0, np.inf, limit=200)
                imag = 0.0
            else:
                real, _ = quad(even, 0.0, np.inf, weight="cos", wvar=abs(r))
                imag, _ = quad(odd, 0.0, np.inf, weight="sin", wvar=abs(r))
                imag = -math.copysign(1.0, r) * imag
        except IntegrationWarning as exc:
            raise AssumptionError("V' integrable", str(exc)) from exc
    return complex(real, imag) / (2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class SiteSitePotential:
    """On-site perturbation V(q_z) with its derivatives and Fourier data"""
    v: Callable
    v1: Callable
    v2: Callable
    vhat1: Optional[Callable] = None
    kappa: Optional[float] = None
    sup_v1: Optional[float] = None
    sup_v2: Optional[float] = None
    name: str = "custom"

    def fourier_derivative(self, r):
        if self.vhat1 is not None:
            return complex(self.vhat1(r))
        return numeric_fourier_derivative(self.v1, r)

    def check_regularity(self, grid):
        """V' and V'' finite on the grid and V' small at its ends"""
        for label, func in (("V'", self.v1), ("V''", self.v2)):
            values = np.asarray(func(grid), dtype=float)
            if not np.all(np.isfinite(values)):
                raise AssumptionError("regularity", f"{label} of {self.name} is not finite on the test grid")
        edge = np.abs(np.asarray(self.v1(np.array([grid[0], grid[-1]])), dtype=float))
        scale = max(1.0, float(np.max(np.abs(self.v1(grid)))))
        if np.any(edge > 1e-6 * scale):
            raise AssumptionError("regularity", f"V' of {self.name} does not decay on the test grid")


def gaussian_site_potential(amplitude=1.0, width=1.0):
    """V(q) = a exp(-q^2 / w^2) with closed-form Fourier data"""
    a, w = float(amplitude), float(width)
    if not w > 0:
        raise InvalidParameterError(f"width must be positive, got {width!r}")

    def v(q):
        return a * np.exp(-(np.asarray(q) / w) ** 2)

    def v1(q):
        q = np.asarray(q)
        return -2.0 * a * q / w ** 2 * np.exp(-(q / w) ** 2)

    def v2(q):
        q = np.asarray(q)
        return a * (4.0 * q ** 2 / w ** 4 - 2.0 / w ** 2) * np.exp(-(q / w) ** 2)

    def vhat1(r):
        return 1j * r * a * w / (2.0 * math.sqrt(math.pi)) * np.exp(-(w * r) ** 2 / 4.0)

    return SiteSitePotential(
        v=v, v1=v1, v2=v2, vhat1=vhat1,
        kappa=2.0 * abs(a) / w ** 2,
        sup_v1=abs(a) * math.sqrt(2.0) * math.exp(-0.5) / w,
        sup_v2=2.0 * abs(a) / w ** 2,
        name="gaussian_site",
    )


@dataclass(frozen=True, eq=False)
class PairPotential:
    """V(q1, q2) coupling every unordered site pair with weight F_mu(d(z1, z2))"""
    v: Callable
    d1: Callable
    d2: Callable
    d11: Callable
    d12: Callable
    d22: Callable
    weight_mu: float = 1.0
    sup_grad: Optional[float] = None
    sup_diag: Optional[float] = None
    sup_mixed: Optional[float] = None
    fourier_strength: Optional[float] = None
    fourier_gradient: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        if not (math.isfinite(self.weight_mu) and self.weight_mu >= 0):
            raise InvalidParameterError(f"weight_mu must be nonnegative, got {self.weight_mu!r}")


def gaussian_pair_potential(amplitude=1.0, width=1.0, weight_mu=1.0):
    """V(q1, q2) = a exp(-(q1^2 + q2^2) / w^2)"""
    a, w = float(amplitude), float(width)
    if not w > 0:
        raise InvalidParameterError(f"width must be positive, got {width!r}")

    def g(q):
        return np.exp(-(np.asarray(q) / w) ** 2)

    def g1(q):
        return -2.0 * np.asarray(q) / w ** 2 * g(q)

    def g2(q):
        q = np.asarray(q)
        return (4.0 * q ** 2 / w ** 4 - 2.0 / w ** 2) * g(q)

    def fourier_gradient(r1, r2):
        scale = w / (2.0 * math.sqrt(math.pi))
        base = a * scale ** 2 * math.exp(-(w ** 2) * (r1 ** 2 + r2 ** 2) / 4.0)
        return 1j * r1 * base, 1j * r2 * base

    return PairPotential(
        v=lambda q1, q2: a * g(q1) * g(q2),
        d1=lambda q1, q2: a * g1(q1) * g(q2),
        d2=lambda q1, q2: a * g(q1) * g1(q2),
        d11=lambda q1, q2: a * g2(q1) * g(q2),
        d12=lambda q1, q2: a * g1(q1) * g1(q2),
        d22=lambda q1, q2: a * g(q1) * g2(q2),
        weight_mu=float(weight_mu),
        sup_grad=abs(a) * math.sqrt(2.0) * math.exp(-0.5) / w,
        sup_diag=2.0 * abs(a) / w ** 2,
        sup_mixed=2.0 * abs(a) * math.exp(-1.0) / w ** 2,
        fourier_strength=abs(a) * (4.0 + 8.0 / math.pi) / w ** 2,
        fourier_gradient=fourier_gradient,
        name="gaussian_pair",
    )


def harmonic_stiffness(lat, params):
    """Matrix K with dU_h/dq = K q for U_h = omega^2 sum q^2 + sum lambda_j (q_x - q_{x+e_j})^2"""
    params.check_lattice(lat)
    K = np.diag(np.full(lat.size, 2.0 * params.omega ** 2 + 4.0 * params.lambda_sum))
    rows = np.arange(lat.size)
    for axis, lam in enumerate(params.lam):
        for step in (1, -1):
            np.add.at(K, (rows, lat.neighbor_index(axis, step)), -2.0 * lam)
    return K


@dataclass(frozen=True)
class AssumptionConstants:
    c1: float
    c1_tilde: float
    mu1: float
    c2: float
    mu2: float
    c3: float
    mu3: float


@dataclass(frozen=True, eq=False)
class AnharmonicSystem:
    lattice: TorusLattice
    params: HarmonicParams
    site_potential: Optional[SiteSitePotential] = None
    pair_potential: Optional[PairPotential] = None

    def __post_init__(self):
        self.params.check_lattice(self.lattice)

    def harmonic_only(self):
        return self.site_potential is None and self.pair_potential is None

    @cached_property
    def stiffness(self):
        return harmonic_stiffness(self.lattice, self.params)

    @cached_property
    def pair_weights(self):
        """F_mu(d(z1, z2)) for z1 < z2 by site index, zero elsewhere"""
        if self.pair_potential is None:
            return None
        weights = decay_matrix(self.lattice, DecayProfile(self.pair_potential.weight_mu, self.lattice.nu))
        return np.triu(weights, k=1)

    @cached_property
    def constants(self):
        return assumption_constants(self)


def _pair_grid(q):
    return q[:, None], q[None, :]


def _potential_energy(sys, q):
    energy = 0.0
    if sys.site_potential is not None:
        energy += float(np.sum(sys.site_potential.v(q)))
    if sys.pair_potential is not None:
        energy += float(np.sum(sys.pair_weights * sys.pair_potential.v(*_pair_grid(q))))
    return energy


def _potential_gradient(sys, q):
    grad = np.zeros_like(q)
    if sys.site_potential is not None:
        grad += sys.site_potential.v1(q)
    if sys.pair_potential is not None:
        U, pot = sys.pair_weights, sys.pair_potential
        q1, q2 = _pair_grid(q)
        grad += np.sum(U * pot.d1(q1, q2), axis=1) + np.sum(U * pot.d2(q1, q2), axis=0)
    return grad


def _potential_hessian(sys, q):
    hess = np.zeros((q.size, q.size))
    if sys.site_potential is not None:
        hess[np.diag_indices(q.size)] += sys.site_potential.v2(q)
    if sys.pair_potential is not None:
        U, pot = sys.pair_weights, sys.pair_potential
        q1, q2 = _pair_grid(q)
        hess[np.diag_indices(q.size)] += np.sum(U * pot.d11(q1, q2), axis=1) + np.sum(U * pot.d22(q1, q2), axis=0)
        mixed = U * pot.d12(q1, q2)
        hess += mixed + mixed.T
    return hess


def _force(sys, q):
    return -(sys.stiffness @ q) - _potential_gradient(sys, q)


def _check_point(sys, x):
    if x.size != sys.lattice.size:
        raise DomainError(f"phase point has {x.size} sites, lattice has {sys.lattice.size}")


def hamiltonian_eval(sys, x):
    """H_h(x) plus the on-site and pair perturbation energies"""
    _check_point(sys, x)
    value = harmonic_energy(sys.lattice, sys.params, x) + _potential_energy(sys, x.q)
    if not math.isfinite(value):
        raise NumericalError("Hamiltonian is not finite")
    return value


def vector_field(sys, x):
    """(dq/dt, dp/dt) = (2p, -dH/dq)"""
    _check_point(sys, x)
    return 2.0 * x.p, _force(sys, x.q)


def _step_plan(t, dt):
    if not (math.isfinite(dt) and dt > 0):
        raise DomainError(f"time step must be positive, got {dt!r}")
    if not math.isfinite(t):
        raise DomainError(f"time must be finite, got {t!r}")
    if abs(t) / dt > MAX_STEPS:
        raise DomainError(f"|t|/dt = {abs(t) / dt:.3g} exceeds {MAX_STEPS} steps")
    steps = max(0, math.ceil(abs(t) / dt - 1e-9))
    return steps, (t / steps if steps else 0.0)


def _rk4_step(sys, q, p, h):
    def field(q_, p_):
        return 2.0 * p_, _force(sys, q_)

    k1q, k1p = field(q, p)
    k2q, k2p = field(q + 0.5 * h * k1q, p + 0.5 * h * k1p)
    k3q, k3p = field(q + 0.5 * h * k2q, p + 0.5 * h * k2p)
    k4q, k4p = field(q + h * k3q, p + h * k3p)
    return (
        q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
        p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )


def _diverged(*arrays):
    return not all(np.all(np.isfinite(a)) for a in arrays)


def _advance(sys, q, p, t, dt, scheme, clock=0.0):
    steps, h = _step_plan(t, dt)
    if scheme == "leapfrog":
        force = _force(sys, q)
        for k in range(steps):
            p = p + 0.5 * h * force
            q = q + 2.0 * h * p
            force = _force(sys, q)
            p = p + 0.5 * h * force
            if _diverged(q, p):
                raise DivergenceError(k + 1, clock + (k + 1) * h)
    elif scheme == "rk4":
        for k in range(steps):
            q, p = _rk4_step(sys, q, p, h)
            if _diverged(q, p):
                raise DivergenceError(k + 1, clock + (k + 1) * h)
    else:
        raise InvalidParameterError(f"unknown integration scheme {scheme!r}, expected one of {SCHEMES}")
    return q, p, steps


def integrate_flow(sys, x0, t, dt, scheme="leapfrog"):
    """State at time t by leapfrog (default) or classical RK4"""
    _check_point(sys, x0)
    q, p, steps = _advance(sys, x0.q.copy(), x0.p.copy(), float(t), dt, scheme)
    logger.debug("integrated %d %s steps to t=%s", steps, scheme, t)
    return PhasePoint(q, p)


def trajectory(sys, x0, times, dt, scheme="leapfrog"):
    """States at each time of the grid, integrated segment by segment from t = 0"""
    _check_point(sys, x0)
    q, p = x0.q.copy(), x0.p.copy()
    clock = 0.0
    states = []
    for t in times:
        q, p, _ = _advance(sys, q, p, float(t) - clock, dt, scheme, clock)
        clock = float(t)
        states.append(PhasePoint(q, p))
    return states


@dataclass(frozen=True, eq=False)
class TangentFlow:
    """Jacobian blocks of the flow map with respect to (q(0), p(0))"""
    t: float
    dq_dq0: np.ndarray
    dq_dp0: np.ndarray
    dp_dq0: np.ndarray
    dp_dp0: np.ndarray
    state: PhasePoint

    def matrix(self):
        return np.block([[self.dq_dq0, self.dq_dp0], [self.dp_dq0, self.dp_dp0]])

    def symplectic_defect(self):
        n = self.dq_dq0.shape[0]
        omega = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
        J = self.matrix()
        return float(np.max(np.abs(J.T @ omega @ J - omega)))


def tangent_trajectory(sys, x0, times, dt):
    """Leapfrog on the state and its linearization, sampled at each time of the grid"""
    _check_point(sys, x0)
    n = sys.lattice.size
    q, p = x0.q.copy(), x0.p.copy()
    Jq = np.hstack([np.eye(n), np.zeros((n, n))])
    Jp = np.hstack([np.zeros((n, n)), np.eye(n)])
    clock = 0.0
    flows = []
    for t in times:
        steps, h = _step_plan(float(t) - clock, dt)
        force = _force(sys, q)
        curvature = sys.stiffness + _potential_hessian(sys, q)
        for k in range(steps):
            p = p + 0.5 * h * force
            Jp = Jp - 0.5 * h * (curvature @ Jq)
            q = q + 2.0 * h * p
            Jq = Jq + 2.0 * h * Jp
            force = _force(sys, q)
            curvature = sys.stiffness + _potential_hessian(sys, q)
            p = p + 0.5 * h * force
            Jp = Jp - 0.5 * h * (curvature @ Jq)
            if _diverged(q, p, Jq, Jp):
                raise DivergenceError(k + 1, clock + (k + 1) * h)
        clock = float(t)
        flows.append(TangentFlow(
            t=clock,
            dq_dq0=Jq[:, :n].copy(), dq_dp0=Jq[:, n:].copy(),
            dp_dq0=Jp[:, :n].copy(), dp_dp0=Jp[:, n:].copy(),
            state=PhasePoint(q, p),
        ))
    return flows


def integrate_tangent(sys, x0, t, dt):
    return tangent_trajectory(sys, x0, [t], dt)[0]


def bracket_from_tangent(flow, f, g, x0):
    """{alpha_t(W(f)), W(g)}(x0) by the chain rule through the Jacobian blocks"""
    xs, ys = f.support_indices, g.support_indices
    block = np.ix_(xs, ys)
    fr, fi = f.values.real, f.values.imag
    a = fr @ flow.dq_dq0[block] + fi @ flow.dp_dq0[block]
    b = fr @ flow.dq_dp0[block] + fi @ flow.dp_dp0[block]
    coefficient = a @ g.values.imag - b @ g.values.real
    return -coefficient * weyl_eval(f, flow.state) * weyl_eval(g, x0)


def bracket_pointwise(sys, f, g, x0, t, dt):
    if f.lattice != sys.lattice or g.lattice != sys.lattice:
        raise DomainError("generators must live on the system lattice")
    return bracket_from_tangent(integrate_tangent(sys, x0, t, dt), f, g, x0)


def _certified_sup(func, analytic, inequality, rng):
    """Closed-form sup when known, else grid maximum with margin checked by random probes"""
    if analytic is not None:
        return float(analytic)
    grid = np.arange(-GRID_HALF_WIDTH, GRID_HALF_WIDTH + GRID_STEP / 2, GRID_STEP)
    values = np.abs(np.asarray(func(grid), dtype=float))
    if not np.all(np.isfinite(values)):
        raise AssumptionError(inequality, "derivative is not finite on the certification grid")
    bound = float(values.max()) * (1.0 + SAFETY_MARGIN)
    probes = rng.uniform(-GRID_HALF_WIDTH, GRID_HALF_WIDTH, SPOT_CHECKS)
    if np.max(np.abs(func(probes))) > bound:
        raise AssumptionError(inequality, "random probe exceeds the grid-certified constant")
    return bound


def _certified_sup_2d(func, analytic, inequality, rng):
    if analytic is not None:
        return float(analytic)
    axis = np.arange(-GRID_HALF_WIDTH, GRID_HALF_WIDTH + PAIR_GRID_STEP / 2, PAIR_GRID_STEP)
    values = np.abs(np.asarray(func(axis[:, None], axis[None, :]), dtype=float))
    if not np.all(np.isfinite(values)):
        raise AssumptionError(inequality, "derivative is not finite on the certification grid")
    bound = float(values.max()) * (1.0 + SAFETY_MARGIN)
    probes = rng.uniform(-GRID_HALF_WIDTH, GRID_HALF_WIDTH, (2, SPOT_CHECKS))
    if np.max(np.abs(func(probes[0], probes[1]))) > bound:
        raise AssumptionError(inequality, "random probe exceeds the grid-certified constant")
    return bound


def pair_fourier_strength(pair, use_closed_form=True):
    """Integral over R^2 of (|r1| + |r2|)(|d1V^(r)| + |d2V^(r)|)"""
    if use_closed_form and pair.fourier_strength is not None:
        return float(pair.fourier_strength)
    if pair.fourier_gradient is None:
        raise AssumptionError("vii", f"pair potential {pair.name} provides no Fourier data")

    def integrand(r2, r1):
        hat1, hat2 = pair.fourier_gradient(r1, r2)
        return (abs(r1) + abs(r2)) * (abs(hat1) + abs(hat2))

    value, _ = dblquad(integrand, -np.inf, np.inf, -np.inf, np.inf, epsrel=1e-9)
    if not math.isfinite(value):
        raise AssumptionError("vii", "Fourier strength integral diverges")
    return value


def _gradient_magnitudes(sys, q):
    """sum over Z containing x of |d_x V_Z| at every site"""
    total = np.zeros_like(q)
    if sys.site_potential is not None:
        total += np.abs(sys.site_potential.v1(q))
    if sys.pair_potential is not None:
        U, pot = sys.pair_weights, sys.pair_potential
        q1, q2 = _pair_grid(q)
        total += np.sum(U * np.abs(pot.d1(q1, q2)), axis=1) + np.sum(U * np.abs(pot.d2(q1, q2)), axis=0)
    return total


def _curvature_magnitudes(sys, q):
    """sum over Z containing x, y of |d_x d_y V_Z| for every site pair"""
    total = np.zeros((q.size, q.size))
    if sys.site_potential is not None:
        total[np.diag_indices(q.size)] += np.abs(sys.site_potential.v2(q))
    if sys.pair_potential is not None:
        U, pot = sys.pair_weights, sys.pair_potential
        q1, q2 = _pair_grid(q)
        total[np.diag_indices(q.size)] += (
            np.sum(U * np.abs(pot.d11(q1, q2)), axis=1) + np.sum(U * np.abs(pot.d22(q1, q2)), axis=0)
        )
        mixed = U * np.abs(pot.d12(q1, q2))
        total += mixed + mixed.T
    return total


def _spot_check(sys, constants, rng, count=200, amplitude=10.0):
    lat = sys.lattice
    growth = constants.c1 * decay_matrix(lat, DecayProfile(constants.mu1, lat.nu))
    curvature_cap = constants.c2 * decay_matrix(lat, DecayProfile(constants.mu2, lat.nu))
    for _ in range(count):
        q = rng.uniform(-amplitude, amplitude, lat.size)
        lhs = _gradient_magnitudes(sys, q) ** 2
        rhs = growth @ (q ** 2 + constants.c1_tilde)
        if np.any(lhs > rhs * (1.0 + 1e-12) + 1e-300):
            raise AssumptionError("ii", "harmonic domination of the potential gradient fails at a sampled point")
        if np.any(_curvature_magnitudes(sys, q) > curvature_cap * (1.0 + 1e-12) + 1e-300):
            raise AssumptionError("iv", "second-derivative decay fails at a sampled point")


def assumption_constants(sys, mu=1.0, seed=0):
    """Constants C1, C1~, mu1, C2, mu2, C3, mu3 valid for the configured potentials"""
    site, pair = sys.site_potential, sys.pair_potential
    if site is None and pair is None:
        return AssumptionConstants(c1=0.0, c1_tilde=0.0, mu1=mu, c2=0.0, mu2=mu, c3=0.0, mu3=mu)

    rng = np.random.default_rng(seed)
    lat = sys.lattice
    site_grad = site_curv = kappa = 0.0
    if site is not None:
        if site.sup_v1 is None or site.sup_v2 is None:
            site.check_regularity(np.arange(-GRID_HALF_WIDTH, GRID_HALF_WIDTH + GRID_STEP / 2, GRID_STEP))
        site_grad = _certified_sup(site.v1, site.sup_v1, "ii", rng)
        site_curv = _certified_sup(site.v2, site.sup_v2, "iv", rng)
        kappa = kappa_v(site)

    rate = mu
    spread = pair_grad = pair_diag = pair_mixed = strength = 0.0
    if pair is not None:
        rate = pair.weight_mu
        spread = decay_sum(lat, DecayProfile(rate, lat.nu), exclude_origin=True)
        pair_grad = max(
            _certified_sup_2d(pair.d1, pair.sup_grad, "ii", rng),
            _certified_sup_2d(pair.d2, pair.sup_grad, "ii", rng),
        )
        pair_diag = max(
            _certified_sup_2d(pair.d11, pair.sup_diag, "iv", rng),
            _certified_sup_2d(pair.d22, pair.sup_diag, "iv", rng),
        )
        pair_mixed = _certified_sup_2d(pair.d12, pair.sup_mixed, "iv", rng)
        strength = pair_fourier_strength(pair)

    constants = AssumptionConstants(
        c1=(site_grad + spread * pair_grad) ** 2,
        c1_tilde=1.0,
        mu1=mu,
        c2=max(site_curv + spread * pair_diag, pair_mixed),
        mu2=rate,
        c3=max(kappa + spread * strength, strength),
        mu3=rate,
    )
    _spot_check(sys, constants, rng)
    logger.info("certified assumption constants %s", constants)
    return constants


@dataclass(frozen=True)
class SolutionBound:
    K1: float
    K2: float

    def at(self, t):
        return self.K1 * math.exp(self.K2 * abs(t))


def apriori_solution_bound(sys, x0, constants=None):
    """max(|q_x(t)|, |p_x(t)|) <= K1 exp(K2 |t|)"""
    _check_point(sys, x0)
    constants = constants or sys.constants
    params = sys.params
    K1 = math.sqrt(float(np.max(x0.p ** 2 + x0.q ** 2 + constants.c1_tilde)))
    spread = decay_sum(sys.lattice, DecayProfile(constants.mu1, sys.lattice.nu))
    K2 = (
        abs(params.omega ** 2 + 2.0 * params.lambda_sum - 1.0)
        + 4.0 * params.lambda_sum
        + 0.5
        + 0.5 * constants.c1 * spread
    )
    return SolutionBound(K1=K1, K2=K2)


@dataclass(frozen=True)
class JacobianBound:
    q_rows: float
    p_rows: float
    K: float

    @property
    def entry(self):
        return max(self.q_rows, self.p_rows)


def jacobian_bound(sys, t, constants=None):
    """Entry bounds for the q-row and p-row Jacobian blocks at time t >= 0"""
    if not (math.isfinite(t) and t >= 0):
        raise DomainError(f"Jacobian bounds need t >= 0, got {t!r}")
    constants = constants or sys.constants
    params = sys.params
    spread = decay_sum(sys.lattice, DecayProfile(constants.mu2, sys.lattice.nu))
    K = 2.0 * params.omega ** 2 + 8.0 * params.lambda_sum + constants.c2 * spread
    q_rows = max(1.0, 2.0 * t) * math.exp(K * t ** 2)
    p_rows = 1.0 + t * (K + 2.0 * params.lambda_sum) * q_rows
    return JacobianBound(q_rows=q_rows, p_rows=p_rows, K=K)


def bracket_apriori_bound(sys, f, g, t, constants=None):
    """4 |X| |Y| ||f|| ||g|| times the largest Jacobian entry bound"""
    bound = jacobian_bound(sys, abs(t), constants)
    return 4.0 * bound.entry * len(f.support) * len(g.support) * f.norm * g.norm
