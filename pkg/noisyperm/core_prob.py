# Distributions on the probability simplex, divergences, log-likelihood
# moments, the standard normal CDF/quantile and log-domain binomial tails.
# Every quantity that carries an information unit is in bits.
import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy import special

from noisyperm.errors import DomainError, InputValidationError, SupportError

logger = logging.getLogger(__name__)

SIMPLEX_TOL      = 1e-12   # Sum-to-one tolerance after construction
RENORMALIZE_TOL  = 1e-9    # Inputs this close to sum 1 are renormalized
LOG2E            = 1.0 / math.log(2.0)
LN2              = math.log(2.0)


# A point on the probability simplex with a fixed number of outcomes.
# The probabilities are stored read-only.
class Distribution():

    def __init__(self, probs):
        arr = np.array(probs, dtype=float).ravel()
        if arr.size < 2:
            raise InputValidationError(f"a distribution needs at least 2 outcomes, got {arr.size}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InputValidationError(f"probabilities must be finite and nonnegative: {arr}")
        total = math.fsum(arr)
        if abs(total - 1.0) > RENORMALIZE_TOL:
            raise InputValidationError(f"probabilities sum to {total!r}, not 1")
        if abs(total - 1.0) > 0.0:
            arr = arr / total
        arr.setflags(write=False)
        self.probs = arr

    def __len__(self):
        return self.probs.size

    def __getitem__(self, y):
        return float(self.probs[y])

    def __iter__(self):
        return iter(self.probs.tolist())

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.probs
        return self.probs.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.probs.shape == other.probs.shape and bool(np.all(self.probs == other.probs))

    def __hash__(self):
        return hash(tuple(self.probs.tolist()))

    def __repr__(self):
        return "Distribution(" + ", ".join(f"{p:.6g}" for p in self.probs) + ")"

    @property
    def k(self):
        return self.probs.size


# Mean, variance and third absolute central moment of log2(P/Q) under P
@dataclass(frozen=True)
class LLRMoments:
    mean: float
    variance: float
    third_abs: float


def as_probs(p):
    if isinstance(p, Distribution):
        return p.probs
    return Distribution(p).probs


def _paired(p, q):
    p, q = as_probs(p), as_probs(q)
    if p.size != q.size:
        raise InputValidationError(f"length mismatch: {p.size} vs {q.size}")
    return p, q


def _check_support(p, q):
    bad = (p > 0) & (q <= 0)
    if np.any(bad):
        raise SupportError(f"q vanishes where p is positive at outcomes {np.flatnonzero(bad).tolist()}")


def kl_divergence(p, q):
    p, q = _paired(p, q)
    _check_support(p, q)
    # rel_entr already uses 0*log(0/q) = 0
    return max(0.0, math.fsum(special.rel_entr(p, q)) * LOG2E)


def total_variation(p, q):
    p, q = _paired(p, q)
    return min(1.0, 0.5 * math.fsum(np.abs(p - q)))


# log2(p(y)/q(y)) on the support of p, with the matching p(y)
def llr_values(p, q):
    p, q = _paired(p, q)
    _check_support(p, q)
    support = p > 0
    return p[support], np.log2(p[support] / q[support])


def llr_moments(p, q):
    weights, llr = llr_values(p, q)
    mean = math.fsum(weights * llr)
    centered = llr - mean
    variance = math.fsum(weights * centered ** 2)
    third_abs = math.fsum(weights * np.abs(centered) ** 3)
    return LLRMoments(mean=max(mean, 0.0), variance=max(variance, 0.0), third_abs=max(third_abs, 0.0))


def std_normal_cdf(x):
    # ndtr goes through erf/erfc, accurate to a few ulp over the whole line
    return float(special.ndtr(x))


def std_normal_quantile(u):
    if not (0.0 < u < 1.0):
        raise DomainError(f"quantile argument must lie in (0, 1), got {u!r}")
    x = float(special.ndtri(u))
    # One Newton step against our own CDF keeps cdf(quantile(u)) == u tight
    density = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if density > 0.0:
        x -= (std_normal_cdf(x) - u) / density
    return x


# Natural-log binomial pmf, vectorized over t; -inf outside the support
def log_binomial_pmf(n, t, p):
    t = np.asarray(t, dtype=float)
    log_comb = special.gammaln(n + 1) - special.gammaln(t + 1) - special.gammaln(n - t + 1)
    # xlogy/xlog1py give 0*log(0) = 0 at the p in {0, 1} endpoints
    return log_comb + special.xlogy(t, p) + special.xlog1py(n - t, -p)


# Sum of C(n,t) p^t (1-p)^(n-t) for t_lo <= t <= t_hi
def binomial_tail(n, t_lo, t_hi, p):
    if n < 0:
        raise InputValidationError(f"n must be nonnegative, got {n}")
    if not (0.0 <= p <= 1.0):
        raise InputValidationError(f"p must lie in [0, 1], got {p!r}")
    lo, hi = max(int(t_lo), 0), min(int(t_hi), int(n))
    if lo > hi:
        return 0.0
    if lo == 0 and hi == n:
        return 1.0
    log_terms = log_binomial_pmf(n, np.arange(lo, hi + 1), p)
    log_terms = log_terms[np.isfinite(log_terms)]
    if log_terms.size == 0:
        return 0.0
    peak = log_terms.max()
    # smallest term first, fsum compensates the rest
    scaled = np.sort(np.exp(log_terms - peak))
    total = math.fsum(scaled) * math.exp(peak)
    return min(1.0, max(0.0, total))
