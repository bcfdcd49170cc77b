import logging
from dataclasses import dataclass

import numpy as np

from errors import InvalidParameterError
from lattice import PhasePoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhaseSampler:
    """Deterministic phase points with coordinates uniform in [-amplitude, amplitude]"""
    count: int = 50
    seed: int = 0
    amplitude: float = 5.0

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise InvalidParameterError(f"sample count must be a positive integer, got {self.count!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidParameterError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if not np.isfinite(self.amplitude) or self.amplitude <= 0:
            raise InvalidParameterError(f"amplitude must be positive, got {self.amplitude!r}")

    def generate_point(self, rng, size):
        q = rng.uniform(-self.amplitude, self.amplitude, size)
        p = rng.uniform(-self.amplitude, self.amplitude, size)
        return PhasePoint(q, p)

    def points(self, size):
        """The `count` sampled phase points, identical on every call"""
        rng = np.random.default_rng(self.seed)
        return [self.generate_point(rng, size) for _ in range(self.count)]

    def with_count(self, count):
        return PhaseSampler(count=count, seed=self.seed, amplitude=self.amplitude)


# Example usage
if __name__ == "__main__":
    sampler = PhaseSampler(count=3, seed=7, amplitude=1.0)
    for point in sampler.points(4):
        print("q:", np.round(point.q, 3), "p:", np.round(point.p, 3))
