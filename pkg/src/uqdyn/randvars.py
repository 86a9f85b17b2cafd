"""Independent-marginal random vectors, sampling, and the transforms
between physical inputs and the standardized variables used by the
orthonormal polynomial bases.

Uniform marginals standardize affinely to [-1, 1]; normal marginals to
zero mean and unit variance. Discrete-uniform marginals can be sampled
but carry no standardized polynomial variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .validation import check_positive_int, check_samples

_SQRT3 = math.sqrt(3.0)


class Marginal:
    """Base class for one-dimensional marginal distributions."""

    kind = "abstract"

    def sample(self, rng, n):
        raise NotImplementedError

    def support(self):
        """Return (lower, upper) bounds of the support."""
        raise NotImplementedError

    def to_standard(self, x):
        raise NotImplementedError

    def from_standard(self, u):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    @staticmethod
    def from_dict(d):
        kinds = {c.kind: c for c in (Uniform, Normal, DiscreteUniform)}
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in kinds:
            raise ValueError(f"unknown marginal kind: {kind!r}")
        return kinds[kind](**d)


@dataclass(frozen=True)
class Uniform(Marginal):
    """Continuous uniform distribution on [lower, upper]."""

    lower: float
    upper: float
    kind = "uniform"

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")

    @classmethod
    def from_mean_std(cls, mean, std):
        """Unique uniform distribution with the given mean and standard
        deviation: bounds are mean +- sqrt(3)*std."""
        if std <= 0:
            raise ValueError("std must be > 0")
        return cls(mean - _SQRT3 * std, mean + _SQRT3 * std)

    @property
    def mean(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def std(self):
        return (self.upper - self.lower) / (2.0 * _SQRT3)

    def support(self):
        return (self.lower, self.upper)

    def sample(self, rng, n):
        return rng.uniform(self.lower, self.upper, size=n)

    def to_standard(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower) - 1.0

    def from_standard(self, u):
        return self.lower + 0.5 * (np.asarray(u, dtype=float) + 1.0) * (self.upper - self.lower)

    def to_dict(self):
        return {"kind": self.kind, "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class Normal(Marginal):
    """Gaussian distribution with the given mean and standard deviation."""

    mean: float
    std: float
    kind = "normal"

    def __post_init__(self):
        if self.std <= 0:
            raise ValueError("std must be > 0")

    @classmethod
    def from_mean_cov(cls, mean, cov):
        """Construct from a mean and a coefficient of variation std/mean."""
        return cls(mean, cov * mean)

    def support(self):
        return (-np.inf, np.inf)

    def sample(self, rng, n):
        return rng.normal(self.mean, self.std, size=n)

    def to_standard(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def from_standard(self, u):
        return self.mean + self.std * np.asarray(u, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class DiscreteUniform(Marginal):
    """Uniform distribution on the integers {low, ..., high}."""

    low: int
    high: int
    kind = "discrete-uniform"

    def __post_init__(self):
        if self.low > self.high:
            raise ValueError(f"need low <= high, got [{self.low}, {self.high}]")

    @property
    def mean(self):
        return 0.5 * (self.low + self.high)

    @property
    def std(self):
        n = self.high - self.low + 1
        return math.sqrt((n * n - 1) / 12.0)

    def support(self):
        return (self.low, self.high)

    def sample(self, rng, n):
        return rng.integers(self.low, self.high + 1, size=n).astype(float)

    def to_standard(self, x):
        raise ValueError("discrete-uniform marginals have no standardized polynomial variable")

    def from_standard(self, u):
        raise ValueError("discrete-uniform marginals have no standardized polynomial variable")

    def to_dict(self):
        return {"kind": self.kind, "low": self.low, "high": self.high}


@dataclass(frozen=True)
class SampleSet:
    """Matrix of physical-space realizations with the seed that made it."""

    values: np.ndarray
    seed: int | None = None

    @property
    def n_draws(self):
        return self.values.shape[0]

    @property
    def n_dims(self):
        return self.values.shape[1]


class RandomVector:
    """Random vector with mutually independent marginals.

    Parameters
    ----------
    marginals : sequence of Marginal
    """

    def __init__(self, marginals):
        marginals = tuple(marginals)
        if not marginals:
            raise ValueError("need at least one marginal")
        for m in marginals:
            if not isinstance(m, Marginal):
                raise TypeError(f"expected Marginal, got {type(m).__name__}")
        self.marginals = marginals

    @property
    def dim(self):
        return len(self.marginals)

    def mean(self):
        return np.array([m.mean for m in self.marginals])

    def sample(self, n, seed=None, rng=None) -> SampleSet:
        """Draw ``n`` independent realizations.

        Identical (n, seed) pairs produce bit-identical samples. A caller
        that needs several reproducible independent streams can pass
        spawned generators through ``rng`` instead.
        """
        check_positive_int(n, "n")
        if rng is None:
            rng = np.random.default_rng(seed)
        cols = [m.sample(rng, n) for m in self.marginals]
        return SampleSet(np.column_stack(cols), seed=seed)

    def contains(self, X):
        """Boolean mask of points lying inside the marginal supports."""
        x = check_samples(X, self.dim)
        ok = np.ones(x.shape[0], dtype=bool)
        for j, m in enumerate(self.marginals):
            lo, hi = m.support()
            ok &= (x[:, j] >= lo) & (x[:, j] <= hi)
        return ok

    def to_standard(self, X):
        """Map physical points to the standardized variables."""
        x = np.asarray(X, dtype=float)
        single = x.ndim == 1
        x = check_samples(x, self.dim)
        if not np.all(self.contains(x)):
            raise ValueError("point outside the marginal supports")
        u = np.column_stack([m.to_standard(x[:, j]) for j, m in enumerate(self.marginals)])
        return u[0] if single else u

    def from_standard(self, U):
        """Inverse of :meth:`to_standard`."""
        u = np.asarray(U, dtype=float)
        single = u.ndim == 1
        u = check_samples(u, self.dim)
        x = np.column_stack([m.from_standard(u[:, j]) for j, m in enumerate(self.marginals)])
        return x[0] if single else x

    def to_dict(self):
        return {"marginals": [m.to_dict() for m in self.marginals]}

    @staticmethod
    def from_dict(d):
        return RandomVector([Marginal.from_dict(m) for m in d["marginals"]])

    def __repr__(self):
        inner = ", ".join(repr(m) for m in self.marginals)
        return f"RandomVector([{inner}])"


def spawn_seeds(root_seed, n):
    """Derive ``n`` independent child seed sequences from a root seed.

    Used for order-independent per-trace reproducibility in parallel
    pipelines.
    """
    return np.random.SeedSequence(root_seed).spawn(n)
