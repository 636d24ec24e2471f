# Gaussian approximations of the achievable log M and the Berry-Esseen
# machinery behind them.
#
# All approximations drop the constant remainder term, the same way the
# published tradeoff curves do; the method tags on BoundPoint say so.
import math
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from noisyperm.bounds import BoundMethod, BoundPoint, Bec, Bsc, neighbor_set
from noisyperm.core_prob import LOG2E, llr_moments, std_normal_cdf, std_normal_quantile
from noisyperm.errors import DomainError, InfeasibleTargetError, InputValidationError
from noisyperm.packing import (
    ChannelMatrix,
    build_binary_message_set,
    build_dmc_message_set,
    volume_ratio,
)

logger = logging.getLogger(__name__)

BERRY_ESSEEN_C0  = 6.0                  # Feller's constant; tighter modern values are < 0.5
R0_CAP           = 2.0 * LOG2E / 9.0    # Largest radius the moment constants cover


@dataclass(frozen=True)
class MomentConstants:
    p_min: float
    p_max: float
    f0_lower: float
    f0_upper: float
    t_upper_coeff: float
    r0_cap: float


# Measured moments of one (center, neighbor) pair against the constants
@dataclass(frozen=True)
class PairCheck:
    owner: int
    neighbor: int
    variance: float
    third_abs: float
    variance_ok: bool
    third_ok: bool

    @property
    def passed(self):
        return self.variance_ok and self.third_ok


@dataclass(frozen=True)
class MomentReport:
    r0: float
    kind: str
    constants: MomentConstants
    cap_exceeded: bool
    pairs: Tuple[PairCheck, ...] = ()
    ratios: Optional[Tuple[float, float, float]] = None

    @property
    def passed(self):
        if self.cap_exceeded:
            return False
        if self.kind == "binary":
            return self.ratios is not None and all(0 < v < math.inf for v in self.ratios)
        return all(pair.passed for pair in self.pairs)

    @property
    def failures(self):
        return [pair for pair in self.pairs if not pair.passed]


def moment_constants(w):
    w.require_in_scope()
    # coordinate extrema over the channel image sit at its vertices, the rows of W
    p_min, p_max = float(w.matrix.min()), float(w.matrix.max())
    return MomentConstants(
        p_min=p_min,
        p_max=p_max,
        f0_lower=65.0 * LOG2E / 72.0,
        f0_upper=5.0 * LOG2E / (2.0 * p_min * (1.0 - p_max) ** 2),
        t_upper_coeff=36.0 * math.sqrt(2.0) * LOG2E ** 1.5 / (p_min ** 2 * (1.0 - p_max) ** 3),
        r0_cap=R0_CAP,
    )


# (min V/r0, max V/r0, max T/r0^1.5) over every center and neighbor
def binary_moment_ratios(s):
    r0 = s.radius_r0
    v_ratios, t_ratios = [], []
    for m, center in enumerate(s.centers):
        for _, q in neighbor_set(s, m).neighbors:
            moments = llr_moments(center, q)
            v_ratios.append(moments.variance / r0)
            t_ratios.append(moments.third_abs / r0 ** 1.5)
    if not v_ratios:
        return None
    return min(v_ratios), max(v_ratios), max(t_ratios)


# Checks measured V and T of every (center, neighbor) pair against the moment
# constants. Violations are reported, not raised.
def verify_moment_bounds(w, r0, kind="grid"):
    constants = moment_constants(w)
    if r0 > constants.r0_cap:
        logger.warning("r0 = %.6g exceeds the moment-constant cap %.6g", r0, constants.r0_cap)
        return MomentReport(r0=r0, kind=kind, constants=constants, cap_exceeded=True)
    if kind == "binary":
        if w.n_outputs != 2:
            raise InputValidationError("the binary moment check needs a 2x2 channel")
        lo, hi = sorted(w.matrix[:, 0])
        s = build_binary_message_set(lo, 1.0 - hi, r0)
        return MomentReport(r0=r0, kind=kind, constants=constants, cap_exceeded=False,
                            ratios=binary_moment_ratios(s))
    if kind != "grid":
        raise InputValidationError(f"kind must be 'grid' or 'binary', got {kind!r}")
    s = build_dmc_message_set(w, r0)
    v_lo, v_hi = constants.f0_lower * r0, constants.f0_upper * r0
    t_hi = constants.t_upper_coeff * r0 ** 1.5
    pairs = []
    for m, center in enumerate(s.centers):
        for j, q in neighbor_set(s, m).neighbors:
            moments = llr_moments(center, q)
            pairs.append(PairCheck(
                owner=m,
                neighbor=j,
                variance=moments.variance,
                third_abs=moments.third_abs,
                variance_ok=v_lo <= moments.variance <= v_hi,
                third_ok=moments.third_abs <= t_hi,
            ))
    return MomentReport(r0=r0, kind=kind, constants=constants, cap_exceeded=False, pairs=tuple(pairs))


# B_n / sqrt(n) for an iid sum with the given single-letter moments.
# The bound is uniform in x; x only matters for berry_esseen_interval.
def berry_esseen_bound(moments, n, x=0.0, c0=BERRY_ESSEEN_C0):
    if n < 1:
        raise InputValidationError(f"blocklength must be positive, got {n}")
    if not moments.variance > 0:
        raise DomainError("Berry-Esseen needs a positive variance")
    b_n = c0 * moments.third_abs / moments.variance ** 1.5
    return b_n / math.sqrt(n)


# Bracket on P[sum <= n(mu + x sqrt(V/n))]
def berry_esseen_interval(moments, n, x, c0=BERRY_ESSEEN_C0):
    gap = berry_esseen_bound(moments, n, x, c0)
    centre = std_normal_cdf(x)
    return max(0.0, centre - gap), min(1.0, centre + gap)


# Phi(-sqrt(n) D / sqrt(V)), the Gaussian estimate of P[sum <= 0]
def normal_error_estimate(moments, n):
    return std_normal_cdf(-math.sqrt(n) * moments.mean / math.sqrt(moments.variance))


# Upper bound on P[sum of log2(p/q) <= 0], used beyond the type-enumeration cap
def berry_esseen_error_prob(p, q, n, c0=BERRY_ESSEEN_C0):
    moments = llr_moments(p, q)
    if not moments.variance > 0:
        return 1.0
    return min(1.0, normal_error_estimate(moments, n) + berry_esseen_bound(moments, n, c0=c0))


def _negative_quantile(u):
    if not (0.0 < u < 0.5):
        raise DomainError(f"quantile argument {u!r} is outside (0, 1/2)")
    return std_normal_quantile(u)


def approx_general(w, n, eps):
    if n < 2:
        raise InputValidationError(f"blocklength must be at least 2, got {n}")
    k = w.n_outputs
    ell = k - 1
    r_count = 2 * math.comb(k, 2)
    z = _negative_quantile(eps / r_count)
    return ell * math.log2(math.sqrt(n) / (-ell * z)) + math.log2(volume_ratio(w))


def _binary_approx(width, n, eps, ceil_variant):
    if n < 1:
        raise InputValidationError(f"blocklength must be positive, got {n}")
    z = _negative_quantile(eps / 2)
    inner = width * math.sqrt(n) / -z
    if ceil_variant:
        inner = math.ceil(inner)
    if inner <= 0:
        return -math.inf
    return math.log2(inner)


def approx_bsc(delta, n, eps, ceil_variant=False):
    if not (0.0 <= delta <= 0.5):
        raise InputValidationError(f"BSC crossover must lie in [0, 1/2], got {delta!r}")
    return _binary_approx(1.0 - 2.0 * delta, n, eps, ceil_variant)


def approx_bec(eta, n, eps, ceil_variant=False):
    if not (0.0 <= eta <= 1.0):
        raise InputValidationError(f"BEC erasure probability must lie in [0, 1], got {eta!r}")
    return approx_bsc(eta / 2.0, n, eps, ceil_variant)


# Packing radius at which the Berry-Esseen corrected error sum meets eps
def radius_for_target(eps, n_samples, f0, f1, r_count):
    argument = eps / r_count - f1 / math.sqrt(n_samples)
    if argument <= 0:
        raise InfeasibleTargetError(
            f"eps/|R| = {eps / r_count:.3g} does not exceed the correction {f1 / math.sqrt(n_samples):.3g}")
    return std_normal_quantile(argument) ** 2 * f0 / n_samples


APPROX_METHODS = {
    BoundMethod.APPROX_GENERAL,
    BoundMethod.APPROX_BSC,
    BoundMethod.APPROX_BSC_CEIL,
    BoundMethod.APPROX_BEC,
    BoundMethod.APPROX_BEC_CEIL,
}


def _approx_value(channel, n, eps, method):
    if method is BoundMethod.APPROX_GENERAL:
        if isinstance(channel, Bsc):
            channel = ChannelMatrix.bsc(channel.delta)
        if not isinstance(channel, ChannelMatrix):
            raise InputValidationError("APPROX_GENERAL needs a BSC or a square channel matrix")
        return approx_general(channel, n, eps)
    if method in (BoundMethod.APPROX_BSC, BoundMethod.APPROX_BSC_CEIL):
        if not isinstance(channel, Bsc):
            raise InputValidationError(f"{method.value} needs a BSC")
        return approx_bsc(channel.delta, n, eps, method is BoundMethod.APPROX_BSC_CEIL)
    if method in (BoundMethod.APPROX_BEC, BoundMethod.APPROX_BEC_CEIL):
        if not isinstance(channel, Bec):
            raise InputValidationError(f"{method.value} needs a BEC")
        return approx_bec(channel.eta, n, eps, method is BoundMethod.APPROX_BEC_CEIL)
    raise InputValidationError(f"{method.value} is not an approximation")


# A curve point from an approximation. When eps falls outside the quantile
# domain the point is still returned, flagged with m = 0 and log2_m = nan.
def approx_point(channel, n, eps, method):
    try:
        value = _approx_value(channel, n, eps, method)
    except DomainError as exc:
        logger.warning("%s has no value at n=%d: %s", method.value, n, exc)
        value = math.nan
    m = int(math.floor(2.0 ** value + 1e-9)) if np.isfinite(value) else 0
    return BoundPoint(n=n, eps_target=eps, m_achieved=m, log2_m=value, eps_bound=math.nan, method=method)
