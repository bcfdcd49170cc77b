import logging
import math

import numpy as np

from anharmonic import (
    AnharmonicSystem,
    apriori_solution_bound,
    bracket_apriori_bound,
    bracket_from_tangent,
    hamiltonian_eval,
    integrate_flow,
    integrate_tangent,
    jacobian_bound,
    tangent_trajectory,
    trajectory,
)
from bounds import EnvelopeVariant, generator_decay_bound, harmonic_envelope, optimal_mu
from errors import DivergenceError, LrlError
from harmonic import evolve_observable, evolve_weyl, harmonic_energy, harmonic_flow, kernel_decay_report, kernels
from lattice import DecayProfile, PhasePoint, convolution_constant, decay_matrix
from observables import (
    SmoothObservable,
    WeylGenerator,
    poisson_bracket_numeric,
    poisson_bracket_weyl,
    weyl_eval,
    weyl_observable,
)

logger = logging.getLogger(__name__)

# reference step at which the integrator tolerances below are stated
REFERENCE_DT = 1e-4
ROUNDOFF = 1e-12


class InvariantVerifier:
    """Runs the invariant checks for one experiment config, in a fixed order"""

    def __init__(self, cfg):
        self.cfg = cfg
        self.lat = cfg.torus
        self.params = cfg.params
        self.system = cfg.system
        self.f = cfg.f_generator()
        self.g = cfg.g_generator()
        self.mu = cfg.rates.mu
        self.epsilon = cfg.rates.epsilon
        self.dt = cfg.integrator.dt
        self.times = cfg.times()
        self.horizon = float(cfg.schedule.t_max) if cfg.schedule.t_max > 0 else 1.0
        self.points = cfg.sampler().points(self.lat.size)[: cfg.check.trajectories]
        self._tangent_cache = None
        self.tolerances = {
            'kernel_fft': 1e-10,
            'kernel_ode': 1e-6,
            'sum_rule': 1e-10,
            'group_law': 1e-9,
            'weyl': 1e-6,
            'integrator': 1e-6 * max(1.0, (self.dt / REFERENCE_DT) ** 2),
            'reversibility': 1e-8,
            'tangent': 1e-4,
            'symplectic': 1e-6,
        }
        self.checks = [
            ('f_convolution', self._check_f_convolution),
            ('kernel_decay', self._check_kernel_decay),
            ('kernel_fft_agreement', self._check_kernel_fft_agreement),
            ('kernel_parity', self._check_kernel_parity),
            ('kernel_ode', self._check_kernel_ode),
            ('kernel_sum_rule', self._check_kernel_sum_rule),
            ('flow_group_law', self._check_flow_group_law),
            ('harmonic_energy', self._check_harmonic_energy),
            ('weyl_evolution', self._check_weyl_evolution),
            ('weyl_relation', self._check_weyl_relation),
            ('generator_decay', self._check_generator_decay),
            ('general_envelope', self._check_general_envelope),
            ('optimal_mu', self._check_optimal_mu),
            ('flow_reduction', self._check_flow_reduction),
            ('scheme_agreement', self._check_scheme_agreement),
            ('energy_conservation', self._check_energy_conservation),
            ('time_reversibility', self._check_time_reversibility),
            ('tangent_jacobian', self._check_tangent_jacobian),
            ('symplecticity', self._check_symplecticity),
            ('solution_bound', self._check_solution_bound),
            ('jacobian_bound', self._check_jacobian_bound),
            ('bracket_bound', self._check_bracket_bound),
        ]

    def verify(self):
        """Run every check and summarize"""
        results = []
        diverged = False
        for name, check in self.checks:
            try:
                passed, detail = check()
            except DivergenceError as exc:
                passed, detail, diverged = False, str(exc), True
            except LrlError as exc:
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            level = logging.INFO if passed else logging.WARNING
            logger.log(level, "check %s %s (%s)", name, "passed" if passed else "FAILED", detail)
            results.append({'check': name, 'passed': bool(passed), 'detail': detail})

        failed = [r['check'] for r in results if not r['passed']]
        return {
            'status': 'pass' if not failed else 'fail',
            'checks': results,
            'failed': failed,
            'diverged': diverged,
        }

    def _check_f_convolution(self):
        """sum_z F(d(x,z)) F(d(z,y)) <= C_nu F(d(x,y)) for every site pair"""
        F = decay_matrix(self.lat, DecayProfile(self.mu, self.lat.nu))
        cnu = convolution_constant(self.lat.nu)
        ratio = float(np.max((F @ F) / (cnu * F)))
        return ratio <= 1.0, f"max lhs/rhs {ratio:.6f} with C_nu={cnu:.6f}"

    def _check_kernel_decay(self):
        worst = math.inf
        for t in self.times:
            report = kernel_decay_report(self.lat, self.params, t, self.mu)
            worst = min(worst, float(report['margin'].min()))
            if not report['passed'].all():
                return False, f"negative margin at t={t}"
        return True, f"smallest margin {worst:.3e}"

    def _check_kernel_fft_agreement(self):
        gap = 0.0
        for t in self.times:
            direct = kernels(self.lat, self.params, t, method="direct")
            fft = kernels(self.lat, self.params, t, method="fft")
            for m in (-1, 0, 1):
                gap = max(gap, float(np.max(np.abs(direct.order(m) - fft.order(m)))))
        return gap <= self.tolerances['kernel_fft'], f"max difference {gap:.3e}"

    def _check_kernel_parity(self):
        """h^(0) even in t, h^(-1) and h^(1) odd"""
        gap = 0.0
        for t in self.times:
            forward = kernels(self.lat, self.params, t)
            backward = kernels(self.lat, self.params, -t)
            gap = max(
                gap,
                float(np.max(np.abs(forward.h_0 - backward.h_0))),
                float(np.max(np.abs(forward.h_minus1 + backward.h_minus1))),
                float(np.max(np.abs(forward.h_plus1 + backward.h_plus1))),
            )
        return gap <= 1e-10, f"max parity defect {gap:.3e}"

    def _check_kernel_ode(self):
        """d/dt h^(-1) = -2 h^(0) and d/dt h^(0) = 2 h^(1) by central differences"""
        step = 1e-4
        gap = 0.0
        for t in self.times:
            ahead = kernels(self.lat, self.params, t + step)
            behind = kernels(self.lat, self.params, t - step)
            here = kernels(self.lat, self.params, t)
            d_minus1 = (ahead.h_minus1 - behind.h_minus1) / (2 * step)
            d_0 = (ahead.h_0 - behind.h_0) / (2 * step)
            gap = max(
                gap,
                float(np.max(np.abs(d_minus1 + 2 * here.h_0))),
                float(np.max(np.abs(d_0 - 2 * here.h_plus1))),
            )
        return gap <= self.tolerances['kernel_ode'], f"max residual {gap:.3e}"

    def _check_kernel_sum_rule(self):
        gap = 0.0
        for t in self.times:
            total = float(np.sum(kernels(self.lat, self.params, t).h_0))
            gap = max(gap, abs(total - math.cos(2 * self.params.omega * t)))
        return gap <= self.tolerances['sum_rule'], f"max |sum h_0 - cos 2wt| {gap:.3e}"

    def _check_flow_group_law(self):
        t, s = 0.5 * self.horizon, 0.25 * self.horizon
        gap = 0.0
        for x0 in self.points:
            joint = harmonic_flow(self.lat, self.params, x0, t + s)
            split = harmonic_flow(self.lat, self.params, harmonic_flow(self.lat, self.params, x0, s), t)
            gap = max(gap, float(np.max(np.abs(joint.as_vector() - split.as_vector()))))
        scale = max(1.0, max(float(np.max(np.abs(x.as_vector()))) for x in self.points))
        return gap <= self.tolerances['group_law'] * scale, f"max defect {gap:.3e}"

    def _check_harmonic_energy(self):
        worst = 0.0
        for x0 in self.points:
            start = harmonic_energy(self.lat, self.params, x0)
            for t in self.times:
                now = harmonic_energy(self.lat, self.params, harmonic_flow(self.lat, self.params, x0, t))
                worst = max(worst, abs(now - start) / max(1.0, abs(start)))
        return worst <= 1e-9, f"max relative drift {worst:.3e}"

    def _check_weyl_evolution(self):
        """W(f_t)(x) = W(f)(Phi_t x)"""
        gap = 0.0
        for t in self.times:
            f_t = evolve_weyl(self.lat, self.params, self.f, t)
            for x0 in self.points:
                flowed = harmonic_flow(self.lat, self.params, x0, t)
                gap = max(gap, abs(weyl_eval(f_t, x0) - weyl_eval(self.f, flowed)))
        return gap <= 1e-8, f"max difference {gap:.3e}"

    def _check_weyl_relation(self):
        """Finite-difference bracket of W(f), W(g) against -Im<f,g> W(f) W(g)"""
        partner = WeylGenerator(self.lat, self.f.support, 1j * self.f.values)
        gap = 0.0
        for g in (self.g, partner):
            exact = poisson_bracket_weyl(self.f, g)
            A = SmoothObservable(self.lat, lambda x: weyl_eval(self.f, x), support=self.f.support)
            B = SmoothObservable(self.lat, lambda x, g=g: weyl_eval(g, x), support=g.support)
            for x in self.cfg.sampler().with_count(100).points(self.lat.size):
                gap = max(gap, abs(poisson_bracket_numeric(A, B, x) - exact(x)))
        return gap <= self.tolerances['weyl'], f"max difference {gap:.3e}"

    def _check_generator_decay(self):
        worst = math.inf
        for t in self.times:
            f_t = evolve_weyl(self.lat, self.params, self.f, t).dense()
            bound = self.f.norm * generator_decay_bound(
                self.lat, self.params, self.f.support, None, t, self.mu, self.epsilon)
            margin = bound - np.abs(f_t.imag)
            worst = min(worst, float(margin.min()))
        return worst >= -ROUNDOFF, f"smallest margin {worst:.3e}"

    def _check_general_envelope(self):
        """|{alpha_t(A), B}| within the general envelope times ||dA|| ||dB|| for A = W(f), B = W(g)"""
        A, B = weyl_observable(self.f), weyl_observable(self.g)
        factor = A.dnorm * B.dnorm * min(len(self.f.support), len(self.g.support))
        worst = math.inf
        for t in self.times:
            evolved = evolve_observable(self.lat, self.params, A, t)
            envelope = factor * harmonic_envelope(
                self.lat, self.params, self.f.support, self.g.support, t, self.mu, EnvelopeVariant.GENERAL)
            for x in self.points:
                worst = min(worst, envelope - abs(poisson_bracket_numeric(evolved, B, x)))
        return worst >= -self.cfg.check.abs_tol, f"smallest margin {worst:.3e}"

    def _check_optimal_mu(self):
        rate = optimal_mu()
        passed = 0.5 < rate.mu0 < 1.0 and rate.residual <= 1e-10 and rate.v_opt_factor <= 4.0
        return passed, f"mu0={rate.mu0:.12f}, 2/mu0={rate.v_opt_factor:.6f}, residual {rate.residual:.1e}"

    def _check_flow_reduction(self):
        """Integrating the bare harmonic system reproduces the spectral flow"""
        bare = AnharmonicSystem(self.lat, self.params)
        gap = 0.0
        for x0 in self.points:
            numeric = integrate_flow(bare, x0, self.horizon, self.dt, self.cfg.integrator.scheme)
            exact = harmonic_flow(self.lat, self.params, x0, self.horizon)
            gap = max(gap, float(np.max(np.abs(numeric.as_vector() - exact.as_vector()))))
        return gap <= self.tolerances['integrator'], f"max error {gap:.3e}"

    def _check_scheme_agreement(self):
        gap = 0.0
        for x0 in self.points:
            leapfrog = integrate_flow(self.system, x0, self.horizon, self.dt, "leapfrog")
            rk4 = integrate_flow(self.system, x0, self.horizon, self.dt, "rk4")
            gap = max(gap, float(np.max(np.abs(leapfrog.as_vector() - rk4.as_vector()))))
        return gap <= self.tolerances['integrator'], f"max difference {gap:.3e}"

    def _check_energy_conservation(self):
        worst = 0.0
        for x0 in self.points:
            start = hamiltonian_eval(self.system, x0)
            states = trajectory(self.system, x0, self.times, self.dt, self.cfg.integrator.scheme)
            # one run at full step size, the schedule segments can be shorter than dt
            states.append(integrate_flow(self.system, x0, self.horizon, self.dt, self.cfg.integrator.scheme))
            for state in states:
                worst = max(worst, abs(hamiltonian_eval(self.system, state) - start) / max(1.0, abs(start)))
        tol = self.tolerances['integrator']
        return worst <= tol, f"max relative drift {worst:.3e} (tolerance {tol:.1e})"

    def _check_time_reversibility(self):
        gap = 0.0
        for x0 in self.points:
            there = integrate_flow(self.system, x0, self.horizon, self.dt, "leapfrog")
            back = integrate_flow(self.system, there, -self.horizon, self.dt, "leapfrog")
            gap = max(gap, float(np.max(np.abs(back.as_vector() - x0.as_vector()))))
        return gap <= self.tolerances['reversibility'], f"max return error {gap:.3e}"

    def _check_tangent_jacobian(self):
        """Tangent flow against central differences of the leapfrog flow map"""
        step = 1e-5
        t = min(self.horizon, 1.0)
        x0 = self.points[0]
        flow = integrate_tangent(self.system, x0, t, self.dt)
        base = x0.as_vector()
        columns = []
        for k in range(base.size):
            shift = np.zeros(base.size)
            shift[k] = step
            ahead = integrate_flow(self.system, PhasePoint.from_vector(base + shift), t, self.dt, "leapfrog")
            behind = integrate_flow(self.system, PhasePoint.from_vector(base - shift), t, self.dt, "leapfrog")
            columns.append((ahead.as_vector() - behind.as_vector()) / (2 * step))
        gap = float(np.max(np.abs(np.column_stack(columns) - flow.matrix())))
        return gap <= self.tolerances['tangent'], f"max entry error {gap:.3e}"

    def _check_symplecticity(self):
        t = min(self.horizon, 1.0)
        defect = max(integrate_tangent(self.system, x0, t, self.dt).symplectic_defect() for x0 in self.points)
        return defect <= self.tolerances['symplectic'], f"max |J^T Omega J - Omega| {defect:.3e}"

    def _tangent_runs(self):
        if self._tangent_cache is None:
            self._tangent_cache = [tangent_trajectory(self.system, x0, self.times, self.dt) for x0 in self.points]
        return self._tangent_cache

    def _check_solution_bound(self):
        worst = math.inf
        for x0, flows in zip(self.points, self._tangent_runs()):
            bound = apriori_solution_bound(self.system, x0, self.cfg.constants)
            for flow in flows:
                size = max(float(np.max(np.abs(flow.state.q))), float(np.max(np.abs(flow.state.p))))
                worst = min(worst, bound.at(flow.t) * (1 + ROUNDOFF) - size)
        return worst >= 0, f"smallest margin {worst:.3e}"

    def _check_jacobian_bound(self):
        worst = math.inf
        for flows in self._tangent_runs():
            for flow in flows:
                bound = jacobian_bound(self.system, abs(flow.t), self.cfg.constants)
                q_rows = max(float(np.max(np.abs(flow.dq_dq0))), float(np.max(np.abs(flow.dq_dp0))))
                p_rows = max(float(np.max(np.abs(flow.dp_dq0))), float(np.max(np.abs(flow.dp_dp0))))
                worst = min(worst, bound.q_rows * (1 + ROUNDOFF) - q_rows, bound.p_rows * (1 + ROUNDOFF) - p_rows)
        return worst >= 0, f"smallest margin {worst:.3e}"

    def _check_bracket_bound(self):
        worst = math.inf
        for x0, flows in zip(self.points, self._tangent_runs()):
            for flow in flows:
                value = abs(bracket_from_tangent(flow, self.f, self.g, x0))
                bound = bracket_apriori_bound(self.system, self.f, self.g, flow.t, self.cfg.constants)
                worst = min(worst, bound * (1 + ROUNDOFF) - value)
        return worst >= 0, f"smallest margin {worst:.3e}"


def report_lines(cfg, outcome):
    """Text report: config echo followed by one status line per check"""
    lines = ["# configuration"]
    lines.extend(cfg.describe())
    lines.append("# checks")
    for result in outcome['checks']:
        status = "PASS" if result['passed'] else "FAIL"
        lines.append(f"{status} {result['check']}: {result['detail']}")
    lines.append(f"# {len(outcome['checks']) - len(outcome['failed'])}/{len(outcome['checks'])} checks passed")
    return lines
