import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from errors import DomainError, InvalidParameterError, NumericalError
from lattice import PhasePoint, TorusLattice

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WeylGenerator:
    """Complex function f on a finite set of sites X, generating W(f)"""
    lattice: TorusLattice
    support: tuple
    values: np.ndarray

    def __post_init__(self):
        support = tuple(self.lattice.as_site(site) for site in self.support)
        values = np.array(self.values, dtype=complex).reshape(-1)
        if len(set(support)) != len(support):
            raise InvalidParameterError(f"support {support!r} repeats a site")
        if values.size != len(support):
            raise InvalidParameterError(f"{values.size} values given for {len(support)} sites")
        if not np.all(np.isfinite(values)):
            raise DomainError("Weyl generator values must be finite")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    @classmethod
    def delta(cls, lattice, site, value=1.0):
        return cls(lattice, (site,), [value])

    @classmethod
    def from_dense(cls, lattice, values):
        """Generator supported on the whole lattice"""
        support = tuple(tuple(int(c) for c in s) for s in lattice.sites)
        return cls(lattice, support, values)

    @property
    def norm(self):
        """sup norm over the support"""
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @property
    def support_indices(self):
        return self.lattice.indices_of(self.support)

    def dense(self, lattice=None):
        """Values as a complex array over every site of the lattice"""
        if lattice is not None and lattice != self.lattice:
            raise DomainError(f"generator lives on {self.lattice}, not on {lattice}")
        out = np.zeros(self.lattice.size, dtype=complex)
        out[self.support_indices] = self.values
        return out


def inner_product(f, g):
    """<f, g> = sum_x conj(f(x)) g(x)"""
    if f.lattice != g.lattice:
        raise DomainError("generators live on different lattices")
    return complex(np.vdot(f.dense(), g.dense()))


def weyl_eval(f, x):
    """W(f)(x) = exp(i sum_x Re f(x) q_x + Im f(x) p_x)"""
    if x.size != f.lattice.size:
        raise DomainError(f"phase point has {x.size} sites, generator lattice has {f.lattice.size}")
    dense = f.dense()
    return complex(np.exp(1j * (np.dot(dense.real, x.q) + np.dot(dense.imag, x.p))))


@dataclass(frozen=True, eq=False)
class WeylBracket:
    """{W(f), W(g)} = coefficient * W(f) W(g)"""
    coefficient: float
    f: WeylGenerator
    g: WeylGenerator

    @property
    def lattice(self):
        return self.f.lattice

    @property
    def sup_norm(self):
        return abs(self.coefficient)

    def __call__(self, x):
        return self.coefficient * weyl_eval(self.f, x) * weyl_eval(self.g, x)


def poisson_bracket_weyl(f, g):
    return WeylBracket(coefficient=-inner_product(f, g).imag, f=f, g=g)


@dataclass(frozen=True, eq=False)
class SmoothObservable:
    """Differentiable observable with optional exact gradients

    Gradient callables return complex arrays over every lattice site and
    must vanish off `support`; a support of None means the whole lattice.
    """
    lattice: TorusLattice
    evaluate: Callable[[PhasePoint], complex]
    grad_q: Optional[Callable[[PhasePoint], np.ndarray]] = None
    grad_p: Optional[Callable[[PhasePoint], np.ndarray]] = None
    support: Optional[tuple] = None
    dnorm: Optional[float] = None

    def __call__(self, x):
        return complex(self.evaluate(x))

    @property
    def support_indices(self):
        if self.support is None:
            return np.arange(self.lattice.size)
        return self.lattice.indices_of(self.support)


def weyl_observable(f):
    """W(f) with exact gradients i Re f W(f) and i Im f W(f)"""
    dense = f.dense()
    return SmoothObservable(
        lattice=f.lattice,
        evaluate=lambda x: weyl_eval(f, x),
        grad_q=lambda x: 1j * dense.real * weyl_eval(f, x),
        grad_p=lambda x: 1j * dense.imag * weyl_eval(f, x),
        support=f.support,
        dnorm=f.norm,
    )


def _central_difference(obs, x, index, block, step):
    shift = np.zeros(x.size)
    shift[index] = step
    if block == "q":
        plus, minus = PhasePoint(x.q + shift, x.p), PhasePoint(x.q - shift, x.p)
    else:
        plus, minus = PhasePoint(x.q, x.p + shift), PhasePoint(x.q, x.p - shift)
    return (obs(plus) - obs(minus)) / (2.0 * step)


def observable_gradients(obs, x, step=1e-4, richardson=False):
    """(dA/dq, dA/dp) at x, exact when supplied, else central differences"""
    if obs.grad_q is not None and obs.grad_p is not None:
        dq = np.asarray(obs.grad_q(x), dtype=complex)
        dp = np.asarray(obs.grad_p(x), dtype=complex)
    else:
        if not step > 0:
            raise InvalidParameterError(f"finite-difference step must be positive, got {step!r}")
        dq = np.zeros(x.size, dtype=complex)
        dp = np.zeros(x.size, dtype=complex)
        for index in obs.support_indices:
            for block, out in (("q", dq), ("p", dp)):
                coarse = _central_difference(obs, x, index, block, step)
                if richardson:
                    fine = _central_difference(obs, x, index, block, step / 2.0)
                    coarse = (4.0 * fine - coarse) / 3.0
                out[index] = coarse
    if not (np.all(np.isfinite(dq)) and np.all(np.isfinite(dp))):
        raise NumericalError("observable gradient is not finite")
    return dq, dp


def poisson_bracket_numeric(A, B, x, step=1e-4, richardson=False):
    """sum_x dA/dq_x dB/dp_x - dA/dp_x dB/dq_x at a phase point"""
    dq_a, dp_a = observable_gradients(A, x, step, richardson)
    dq_b, dp_b = observable_gradients(B, x, step, richardson)
    value = complex(np.sum(dq_a * dp_b - dp_a * dq_b))
    if not np.isfinite(value):
        raise NumericalError("Poisson bracket is not finite")
    return value


def sup_norm_estimate(obs, sampler, lattice=None):
    """Sampled lower bound on the sup norm of an observable"""
    lattice = lattice if lattice is not None else getattr(obs, "lattice", None)
    if lattice is None:
        raise InvalidParameterError("a lattice is needed to draw phase points")
    best = 0.0
    for x in sampler.points(lattice.size):
        best = max(best, abs(obs(x)))
    return best


def harmonic_bracket_norm(lat, params, f, g, t):
    """Exact sup norm |Im <f_t, g>| of {alpha_t^h(W(f)), W(g)}"""
    from harmonic import evolve_weyl

    return abs(inner_product(evolve_weyl(lat, params, f, t), g).imag)
