"""Photon-pair number statistics per pump pulse.

A pulsed pair source is described by the law of the number of pairs it
emits per pump pulse. Two physical families are supported, plus a
deterministic point mass used as a validation hook:

* ``poissonian`` -- P(n) = e^-mu mu^n / n!
* ``thermal``    -- P(n) = mu^n / (1 + mu)^(n+1)
* ``point``      -- P(round(mu)) = 1

Both physical laws have mean ``mu``. Losses act on photon counts as
binomial thinning, available here both as a sampler (`thin_count`) and as
an exact transform on truncated PMFs (`thin_distribution`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import InvalidParameterError

POISSONIAN = "poissonian"
THERMAL = "thermal"
POINT = "point"

_KINDS = (POISSONIAN, THERMAL, POINT)

#: Largest truncated-away tail probability a distribution may carry.
TAIL_MASS_LIMIT = 1e-10

DEFAULT_N_MAX = 16


def tail_mass(kind: str, mu: float, n_max: int) -> float:
    """Probability mass strictly above ``n_max``."""
    if mu == 0.0:
        return 0.0
    if kind == POISSONIAN:
        return float(stats.poisson.sf(n_max, mu))
    if kind == THERMAL:
        # geometric tail: sum_{n > n_max} mu^n/(1+mu)^(n+1) = (mu/(1+mu))^(n_max+1)
        return math.exp((n_max + 1) * (math.log(mu) - math.log1p(mu)))
    return 0.0 if round(mu) <= n_max else 1.0


@dataclass(frozen=True)
class Pmf:
    """Truncated photon-number law, indexed by n = 0..n_max.

    The entries may sum to slightly less than one; the deficit is the
    truncated tail and must stay below 1e-9.
    """

    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)
        if p.ndim != 1 or p.size < 1:
            raise InvalidParameterError("pmf must be a non-empty 1-d sequence")
        if np.any(p < 0.0):
            raise InvalidParameterError("pmf entries must be non-negative")
        total = float(p.sum())
        if not (1.0 - 1e-9 <= total <= 1.0 + 1e-12):
            raise InvalidParameterError(
                f"pmf total {total} outside [1 - 1e-9, 1]")

    @property
    def n_max(self) -> int:
        return self.probabilities.size - 1

    def mean(self) -> float:
        return float(np.arange(self.probabilities.size) @ self.probabilities)

    def total(self) -> float:
        return float(self.probabilities.sum())


@dataclass(frozen=True)
class PairNumberDistribution:
    """Per-pulse pair-number law for one source.

    Parameters
    ----------
    kind : str
        One of ``poissonian``, ``thermal`` or ``point``.
    mu : float
        Mean number of pairs per pulse (>= 0).
    n_max : int
        Truncation order for tabulated forms. Validated so that the
        truncated tail mass stays below `TAIL_MASS_LIMIT`.
    """

    kind: str
    mu: float
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidParameterError(
                f"unknown statistics kind {self.kind!r}; expected one of {_KINDS}")
        if not (isinstance(self.mu, (int, float)) and math.isfinite(self.mu)):
            raise InvalidParameterError("mu must be a finite number")
        if self.mu < 0.0:
            raise InvalidParameterError(f"mu must be >= 0, got {self.mu}")
        if self.n_max < 1:
            raise InvalidParameterError(f"n_max must be >= 1, got {self.n_max}")
        tail = tail_mass(self.kind, self.mu, self.n_max)
        if tail >= TAIL_MASS_LIMIT:
            raise InvalidParameterError(
                f"truncation n_max={self.n_max} leaves tail mass {tail:.3e} "
                f">= {TAIL_MASS_LIMIT:.0e} for {self.kind} mu={self.mu}; "
                "increase n_max")

    @staticmethod
    def point_mass(n: int) -> "PairNumberDistribution":
        """Deterministic source emitting exactly ``n`` pairs (test hook)."""
        return PairNumberDistribution(POINT, float(n), max(n, 1))

    def pmf(self) -> Pmf:
        """Truncated PMF over n = 0..n_max."""
        return Pmf(pmf_eval(self, np.arange(self.n_max + 1)))


def pmf_eval(dist: PairNumberDistribution, n):
    """Evaluate P(n) by the closed form of the distribution kind.

    Works beyond ``dist.n_max``: the truncation order only governs
    tabulated representations, not the law itself. ``n`` may be a scalar
    or an integer array.
    """
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise InvalidParameterError("photon number must be >= 0")
    mu = dist.mu
    if dist.kind == POISSONIAN:
        out = stats.poisson.pmf(n_arr, mu)
    elif dist.kind == THERMAL:
        if mu == 0.0:
            out = np.where(n_arr == 0, 1.0, 0.0)
        else:
            # log form keeps large n from under/overflowing intermediates
            log_p = n_arr * (math.log(mu) - math.log1p(mu)) - math.log1p(mu)
            out = np.exp(log_p)
    else:  # point mass
        out = np.where(n_arr == round(mu), 1.0, 0.0)
    if np.isscalar(n) or n_arr.ndim == 0:
        return float(out)
    return out


def sample_pair_count(dist: PairNumberDistribution, rng: np.random.Generator) -> int:
    """Draw one per-pulse pair count from ``dist``."""
    if dist.kind == POISSONIAN:
        return int(rng.poisson(dist.mu))
    if dist.kind == THERMAL:
        if dist.mu == 0.0:
            return 0
        # geometric on {1, 2, ...} with success prob 1/(1+mu), shifted to {0, 1, ...}
        return int(rng.geometric(1.0 / (1.0 + dist.mu))) - 1
    return round(dist.mu)


def thin_count(n: int, eta: float, rng: np.random.Generator) -> int:
    """Binomially thin ``n`` photons through a transmission ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"transmission must be in [0, 1], got {eta}")
    if n < 0:
        raise InvalidParameterError("photon number must be >= 0")
    return int(rng.binomial(n, eta))


def thin_distribution(pmf: Pmf, eta: float) -> Pmf:
    """Exact law of a binomially thinned count.

    Returns the PMF with entries P'(m) = sum_{n >= m} P(n) C(n, m)
    eta^m (1-eta)^(n-m), truncated at the input's n_max. Thinning maps
    mass downward only, so no additional tail is created.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"transmission must be in [0, 1], got {eta}")
    k = pmf.probabilities.size
    ns = np.arange(k)
    # loss matrix L[m, n] = Binom(n, eta).pmf(m)
    loss = stats.binom.pmf(ns[:, None], ns[None, :], eta)
    return Pmf(loss @ pmf.probabilities)
