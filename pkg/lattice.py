import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import product

import numpy as np
from scipy.special import comb

from errors import DomainError, InvalidParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TorusLattice:
    """Periodic box (-L, L]^nu with sites enumerated row-major"""
    nu: int
    L: int

    def __post_init__(self):
        if int(self.nu) != self.nu or self.nu < 1:
            raise InvalidParameterError(f"nu must be a positive integer, got {self.nu!r}")
        if int(self.L) != self.L or self.L < 1:
            raise InvalidParameterError(f"L must be a positive integer, got {self.L!r}")

    @property
    def side(self):
        return 2 * self.L

    @property
    def size(self):
        return self.side ** self.nu

    @cached_property
    def sites(self):
        coords = range(-self.L + 1, self.L + 1)
        sites = np.array(list(product(coords, repeat=self.nu)), dtype=np.int64)
        sites.setflags(write=False)
        return sites

    @cached_property
    def _strides(self):
        return self.side ** np.arange(self.nu - 1, -1, -1, dtype=np.int64)

    def contains(self, site):
        site = np.atleast_1d(np.asarray(site))
        if site.shape != (self.nu,) or not np.issubdtype(site.dtype, np.integer):
            return False
        return bool(np.all((site > -self.L) & (site <= self.L)))

    def as_site(self, site):
        """Validate a site and return it as an integer coordinate tuple"""
        raw = np.atleast_1d(np.asarray(site))
        if raw.shape != (self.nu,):
            raise DomainError(f"site {site!r} does not have {self.nu} coordinates")
        if not np.all(np.mod(raw, 1) == 0):
            raise DomainError(f"site {site!r} has non-integer coordinates")
        raw = raw.astype(np.int64)
        if not self.contains(raw):
            raise DomainError(f"site {site!r} lies outside (-{self.L}, {self.L}]^{self.nu}")
        return tuple(int(c) for c in raw)

    def wrap(self, vector):
        """Reduce integer vectors periodically into (-L, L]"""
        vector = np.asarray(vector, dtype=np.int64)
        return np.mod(vector + self.L - 1, self.side) - self.L + 1

    def index_of(self, site):
        site = np.asarray(self.as_site(site), dtype=np.int64)
        return int(np.dot(site + self.L - 1, self._strides))

    def _indices(self, wrapped):
        return np.tensordot(wrapped + self.L - 1, self._strides, axes=([-1], [0]))

    def label(self, index):
        """Site written as ':'-joined coordinates, e.g. '0:-1'"""
        return ":".join(str(int(c)) for c in self.sites[index])

    @cached_property
    def origin_index(self):
        return self.index_of((0,) * self.nu)

    @cached_property
    def distance_table(self):
        diff = np.mod(self.sites[:, None, :] - self.sites[None, :, :], self.side)
        table = np.minimum(diff, self.side - diff).sum(axis=-1)
        table.setflags(write=False)
        return table

    @cached_property
    def difference_index(self):
        """Index of the wrapped difference x - y for every site pair (x, y)"""
        table = self._indices(self.wrap(self.sites[:, None, :] - self.sites[None, :, :]))
        table.setflags(write=False)
        return table

    def neighbor_index(self, axis, step):
        shift = np.zeros(self.nu, dtype=np.int64)
        shift[axis] = step
        return self._indices(self.wrap(self.sites + shift))

    def indices_of(self, sites):
        return np.array([self.index_of(s) for s in sites], dtype=np.int64)


def make_lattice(nu, L):
    """Build the torus lattice with all (2L)^nu sites"""
    lattice = TorusLattice(nu, L)
    logger.debug("lattice nu=%d L=%d with %d sites", nu, L, lattice.size)
    return lattice


def torus_distance(lat, x, y):
    """L1 distance with each coordinate taken modulo 2L"""
    x = np.asarray(lat.as_site(x))
    y = np.asarray(lat.as_site(y))
    r = np.mod(x - y, lat.side)
    return int(np.minimum(r, lat.side - r).sum())


@dataclass(frozen=True)
class DecayProfile:
    mu: float
    nu: int

    def __post_init__(self):
        if not np.isfinite(self.mu) or self.mu < 0:
            raise InvalidParameterError(f"decay rate mu must be nonnegative, got {self.mu!r}")
        if int(self.nu) != self.nu or self.nu < 1:
            raise InvalidParameterError(f"nu must be a positive integer, got {self.nu!r}")


def f_mu(profile, r):
    """F_mu(r) = exp(-mu r) / (1 + r)^(nu + 1), elementwise over arrays"""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(np.isnan(r_arr)):
        raise DomainError(f"F_mu needs r >= 0, got {r!r}")
    value = np.exp(-profile.mu * r_arr) / (1.0 + r_arr) ** (profile.nu + 1)
    if value.ndim == 0:
        return float(value)
    return value


def decay_matrix(lat, profile):
    return f_mu(profile, lat.distance_table)


def decay_sum(lat, profile, exclude_origin=False):
    """Sum of F_mu(d(0, x)) over the torus"""
    row = f_mu(profile, lat.distance_table[lat.origin_index])
    total = float(row.sum())
    if exclude_origin:
        total -= 1.0
    return total


def _shell_counts(nu, n):
    """Number of z in Z^nu with |z| = n, for integer arrays n >= 1"""
    n = np.asarray(n, dtype=float)
    counts = np.zeros_like(n)
    for k in range(1, nu + 1):
        counts += 2.0 ** k * comb(nu, k) * comb(n - 1, k - 1)
    return counts


def _shell_tail_bound(nu, radius):
    # |{z : |z| = n}| <= 2^nu (n + nu - 1)^(nu - 1) / (nu - 1)!  and  sum_{n > R} (1 + n)^-2 <= 1 / (R + 1)
    stretch = (1.0 + max(nu - 2, 0) / (radius + 2.0)) ** (nu - 1)
    return 2.0 ** nu * stretch / (math.factorial(nu - 1) * (radius + 1.0))


def _shell_sum(nu, radius):
    n = np.arange(1, radius + 1, dtype=float)
    return 1.0 + float(np.sum(_shell_counts(nu, n) / (1.0 + n) ** (nu + 1)))


@lru_cache(maxsize=None)
def convolution_constant(nu, rel_tol=1e-6):
    """C_nu = 2^(nu+1) sum_z (1 + |z|)^-(nu+1) as a certified upper value

    The shell sum is truncated at a radius R where the analytic tail bound is
    at most rel_tol times the partial sum; the tail bound itself is added so
    the returned number never falls below the true constant.
    """
    if int(nu) != nu or nu < 1:
        raise InvalidParameterError(f"nu must be a positive integer, got {nu!r}")
    if not rel_tol > 0:
        raise InvalidParameterError(f"rel_tol must be positive, got {rel_tol!r}")

    radius = 64
    floor = _shell_sum(nu, radius)
    while _shell_tail_bound(nu, radius) > rel_tol * floor:
        radius *= 2
    partial = _shell_sum(nu, radius)
    tail = _shell_tail_bound(nu, radius)
    logger.debug("C_%d truncated at radius %d (tail %.3e)", nu, radius, tail)
    return 2.0 ** (nu + 1) * (partial + tail)


@dataclass(frozen=True)
class ConvolutionReport:
    lhs: float
    rhs: float
    passed: bool


def verify_f_convolution(lat, profile, x, y, cnu=None):
    """Check sum_z F(d(x,z)) F(d(z,y)) <= C_nu F(d(x,y)) on the torus"""
    if cnu is None:
        cnu = convolution_constant(lat.nu)
    i, j = lat.index_of(x), lat.index_of(y)
    table = lat.distance_table
    lhs = float(np.dot(f_mu(profile, table[i]), f_mu(profile, table[:, j])))
    rhs = cnu * f_mu(profile, int(table[i, j]))
    return ConvolutionReport(lhs=lhs, rhs=rhs, passed=lhs <= rhs)


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """Positions q_x and momenta p_x, one entry per lattice site"""
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape:
            raise DomainError(f"q has {q.size} entries but p has {p.size}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise DomainError("phase point has non-finite entries")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def size(self):
        return self.q.size

    @classmethod
    def zeros(cls, size):
        return cls(np.zeros(size), np.zeros(size))

    @classmethod
    def from_vector(cls, vector):
        vector = np.asarray(vector, dtype=float)
        half = vector.size // 2
        return cls(vector[:half], vector[half:])

    def as_vector(self):
        return np.concatenate([self.q, self.p])


if __name__ == "__main__":
    lat = make_lattice(2, 4)
    print(f"{lat.size} sites, d((3,-2), (-1,1)) = {torus_distance(lat, (3, -2), (-1, 1))}")
    print(f"C_1 = {convolution_constant(1):.6f}")
