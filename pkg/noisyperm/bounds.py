# Achievability bounds for noisy permutation channels.
#
# The ML decoder only sees the type of the received word, so every error
# event reduces to a statement about count vectors. The general bound sums,
# per message, the probabilities of losing to each grid neighbor; the BSC
# and BEC forms evaluate the same sums through binomial tails.
import enum
import math
import logging
import itertools
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import special

from noisyperm.core_prob import Distribution, as_probs, binomial_tail
from noisyperm.errors import (
    EmptyMessageSetError,
    InputValidationError,
    ResourceLimitError,
    SupportError,
)
from noisyperm.packing import (
    GRID_CAP,
    ChannelMatrix,
    MessageSet,
    MessageSetKind,
    build_binary_message_set_by_size,
    build_dmc_message_set,
    grid_compositions,
    r0_for_grid,
)

logger = logging.getLogger(__name__)

TYPE_CAP          = 10_000_000  # Largest number of type vectors error_event_prob enumerates
SEQUENCE_CAP      = 1 << 20     # Largest |Y|^n union_error_prob enumerates
TIE_TOL           = 1e-12       # Per-symbol slack under which a metric total counts as zero
THRESHOLD_SNAP    = 1e-9        # Threshold ratios this close to an integer are that integer
LOOKAHEAD         = 3           # Extra sizes checked after the first violation in a scan
MAX_SCAN          = 1_000_000   # Hard stop for the size scan


class BoundMethod(enum.Enum):
    THM2_EXACT = "THM2_EXACT"
    THM2_BERRY_ESSEEN = "THM2_BERRY_ESSEEN"
    THM3_BSC = "THM3_BSC"
    THM4_BEC = "THM4_BEC"
    APPROX_GENERAL = "APPROX_GENERAL"
    APPROX_BSC = "APPROX_BSC"
    APPROX_BSC_CEIL = "APPROX_BSC_CEIL"
    APPROX_BEC = "APPROX_BEC"
    APPROX_BEC_CEIL = "APPROX_BEC_CEIL"
    SIMULATION = "SIMULATION"


# log2 M / log2 n; a single symbol only carries rate 0 for a single message
def rate_of(log2_m, n):
    if log2_m == 0:
        return 0.0
    if n <= 1:
        return math.nan
    return log2_m / math.log2(n)


# One point of a rate-blocklength curve
@dataclass(frozen=True)
class BoundPoint:
    n: int
    eps_target: float
    m_achieved: int
    log2_m: float
    eps_bound: float
    method: BoundMethod

    @property
    def rate(self):
        return rate_of(self.log2_m, self.n)

    @property
    def feasible(self):
        return self.m_achieved >= 2


@dataclass(frozen=True)
class NeighborSet:
    owner_index: int
    neighbors: Tuple[Tuple[int, Distribution], ...]

    def __len__(self):
        return len(self.neighbors)

    @property
    def indices(self):
        return [j for j, _ in self.neighbors]


@dataclass(frozen=True)
class Bsc:
    delta: float


@dataclass(frozen=True)
class Bec:
    eta: float


Channel = Union[Bsc, Bec, ChannelMatrix]


# Centers one grid step from center m: +1 at one coordinate, -1 at another
def neighbor_set(s, m):
    if not (0 <= m < len(s)):
        raise IndexError(f"message index {m} out of range for {len(s)} centers")
    point = s.lattice[m]
    found = set()
    for i, j in itertools.permutations(range(len(point)), 2):
        moved = list(point)
        moved[i] += 1
        moved[j] -= 1
        idx = s.index_of(moved)
        if idx is not None:
            found.add(idx)
    return NeighborSet(owner_index=m, neighbors=tuple((j, s.centers[j]) for j in sorted(found)))


def decoding_metric(p, q, y):
    p, q = as_probs(p), as_probs(q)
    if not (p[y] > 0 and q[y] > 0):
        raise SupportError(f"decoding metric needs p(y) > 0 and q(y) > 0 at y = {y}")
    return math.log2(p[y] / q[y])


# Natural-log probability of each type vector (one per row) under probs
def _log_multinomial(counts, probs, n):
    return (special.gammaln(n + 1)
            - special.gammaln(counts + 1).sum(axis=1)
            + special.xlogy(counts, probs).sum(axis=1))


def _sum_probabilities(log_probs):
    log_probs = log_probs[np.isfinite(log_probs)]
    if log_probs.size == 0:
        return 0.0
    peak = log_probs.max()
    return min(1.0, math.fsum(np.sort(np.exp(log_probs - peak))) * math.exp(peak))


# P[sum_i log2(p(Y_i)/q(Y_i)) <= 0] for Y^n iid from p, exact over types.
# A total of exactly zero is an error.
def error_event_prob(p, q, n, cap=TYPE_CAP):
    p, q = as_probs(p), as_probs(q)
    if p.size != q.size:
        raise InputValidationError(f"length mismatch: {p.size} vs {q.size}")
    if n < 1:
        raise InputValidationError(f"blocklength must be positive, got {n}")
    if np.any((p > 0) & (q <= 0)):
        raise SupportError("q vanishes where p is positive")
    if np.array_equal(p, q):
        return 1.0
    llr = np.zeros_like(p)
    support = p > 0
    llr[support] = np.log2(p[support] / q[support])
    try:
        counts = grid_compositions(n, p.size, cap)
    except ResourceLimitError as exc:
        raise ResourceLimitError(f"type enumeration at n={n}: {exc}") from exc
    totals = counts @ llr
    losing = totals <= TIE_TOL * n
    return _sum_probabilities(_log_multinomial(counts[losing], p, n))


def _pair_prob(p, q, n, cap, fallback):
    try:
        return error_event_prob(p, q, n, cap), False
    except ResourceLimitError:
        if not fallback:
            raise
        from noisyperm.approx import berry_esseen_error_prob
        return berry_esseen_error_prob(p, q, n), True


# Unclamped per-message neighbor error sums, plus whether any pair fell back
# to the Berry-Esseen estimate
def achievability_summands(s, n, cap=TYPE_CAP, fallback=False):
    summands, used_fallback = [], False
    for m, center in enumerate(s.centers):
        total = []
        for _, q in neighbor_set(s, m).neighbors:
            prob, approximated = _pair_prob(center, q, n, cap, fallback)
            used_fallback = used_fallback or approximated
            total.append(prob)
        summands.append(math.fsum(total))
    return summands, used_fallback


def _average_clamped(summands):
    if not summands:
        return 0.0
    return math.fsum(min(1.0, v) for v in summands) / len(summands)


def achievability_general(s, n, cap=TYPE_CAP):
    if len(s) <= 1:
        return 0.0
    summands, _ = achievability_summands(s, n, cap)
    return _average_clamped(summands)


def _snap(x):
    nearest = round(x)
    return float(nearest) if abs(x - nearest) < THRESHOLD_SNAP else x


# Largest weight t at which center i loses to its lower neighbor, clamped to [-1, n]
def lower_threshold(d_prev, d_i, n):
    ratio = n * math.log((1 - d_prev) / (1 - d_i)) / math.log(d_i * (1 - d_prev) / (d_prev * (1 - d_i)))
    return int(min(max(math.floor(_snap(ratio)), -1), n))


# Smallest weight t at which center i loses to its upper neighbor, clamped to [0, n+1]
def upper_threshold(d_next, d_i, n):
    ratio = n * math.log((1 - d_next) / (1 - d_i)) / math.log(d_i * (1 - d_next) / (d_next * (1 - d_i)))
    return int(min(max(math.ceil(_snap(ratio)), 0), n + 1))


# Per-center lower plus upper binomial tails; firsts ascending
def bsc_summands(firsts, n):
    firsts = list(firsts)
    summands = []
    for i, d_i in enumerate(firsts):
        lower = upper = 0.0
        if i > 0:
            lower = binomial_tail(n, 0, lower_threshold(firsts[i - 1], d_i, n), d_i)
        if i < len(firsts) - 1:
            upper = binomial_tail(n, upper_threshold(firsts[i + 1], d_i, n), n, d_i)
        summands.append(lower + upper)
    return summands


def _binary_firsts(centers):
    if centers.kind is not MessageSetKind.BINARY:
        raise InputValidationError("the BSC bound needs a BINARY message set")
    firsts = [c[0] for c in centers.centers]
    if any(b <= a for a, b in zip(firsts, firsts[1:])):
        raise InputValidationError("binary centers must be strictly ascending")
    return firsts


def bsc_achievability(delta, centers, n):
    if not (0.0 < delta < 0.5):
        raise InputValidationError(f"BSC crossover must lie in (0, 1/2), got {delta!r}")
    if n < 1:
        raise InputValidationError(f"blocklength must be positive, got {n}")
    firsts = _binary_firsts(centers)
    d1, d2, _ = centers.binary_params
    if abs(d1 - delta) > 1e-12 or abs(d2 - delta) > 1e-12:
        raise InputValidationError(f"message set was built for ({d1}, {d2}), not crossover {delta}")
    if len(firsts) <= 1:
        return 0.0
    return _average_clamped(bsc_summands(firsts, n))


def bec_achievability(eta, m, n):
    # BSC(eta/2) is a degraded BEC(eta) with the same error probability
    if not (0.0 < eta < 1.0):
        raise InputValidationError(f"BEC erasure probability must lie in (0, 1), got {eta!r}")
    delta = eta / 2
    return bsc_achievability(delta, build_binary_message_set_by_size(delta, delta, m), n)


# Weight fraction at which Bernoulli center p_j starts to out-score p_m;
# increasing in p_j
def neighbor_dominance_threshold(p_j, p_m):
    return math.log((1 - p_j) / (1 - p_m)) / math.log(p_m * (1 - p_j) / (p_j * (1 - p_m)))


# P[some competitor's likelihood >= P_m's], enumerating every y^n under P_m
def union_error_prob(s, m, n, competitors="full", cap=SEQUENCE_CAP):
    k = s.k
    if k ** n > cap:
        raise ResourceLimitError(f"{k}^{n} output sequences exceed the cap {cap}")
    if competitors == "full":
        rivals = [j for j in range(len(s)) if j != m]
    elif competitors == "neighbors":
        rivals = neighbor_set(s, m).indices
    else:
        raise InputValidationError(f"competitors must be 'full' or 'neighbors', got {competitors!r}")
    if not rivals:
        return 0.0
    sequences = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64).reshape(-1, n)
    counts = np.stack([(sequences == y).sum(axis=1) for y in range(k)], axis=1)
    loglik = counts @ np.log(s.probs).T
    own = loglik[:, m]
    lost = np.any(loglik[:, rivals] - own[:, None] >= -TIE_TOL * n, axis=1)
    return _sum_probabilities(own[lost])


# Largest size passing eps, scanning upward from start.
# evaluate(size) returns (bound, m, extra) or None when that size has no set.
# After the first violation the next LOOKAHEAD sizes are tried before giving
# up; a cap hit anywhere ends the scan with the best size found so far.
def _scan(evaluate, eps, start):
    best = None
    size = start
    while size < MAX_SCAN:
        try:
            result = evaluate(size)
        except ResourceLimitError as exc:
            logger.warning("size scan stopped at %d: %s", size, exc)
            break
        if result is None or result[0] <= eps:
            if result is not None and result[1] >= 2:
                best = (size,) + result
            size += 1
            continue
        recovered = None
        for ahead in range(size + 1, size + 1 + LOOKAHEAD):
            try:
                later = evaluate(ahead)
            except ResourceLimitError as exc:
                logger.warning("lookahead stopped at %d: %s", ahead, exc)
                break
            if later is not None and later[0] <= eps and later[1] >= 2:
                recovered = ahead
                break
        if recovered is None:
            break
        logger.warning("bound is not monotone near size %d; resuming the scan at %d", size, recovered)
        size = recovered
    return best


def _bsc_point(delta, n, eps, method):
    def evaluate(m):
        bound = bsc_achievability(delta, build_binary_message_set_by_size(delta, delta, m), n)
        logger.debug("n=%d M=%d bound=%.6g", n, m, bound)
        return bound, m, None

    best = _scan(evaluate, eps, 2)
    if best is None:
        return BoundPoint(n=n, eps_target=eps, m_achieved=1, log2_m=0.0, eps_bound=0.0, method=method)
    _, bound, m, _ = best
    return BoundPoint(n=n, eps_target=eps, m_achieved=m, log2_m=math.log2(m), eps_bound=bound, method=method)


def _general_point(w, n, eps, cap, grid_cap):
    w.require_in_scope()

    def evaluate(grid_n):
        try:
            s = build_dmc_message_set(w, r0_for_grid(grid_n), cap=grid_cap)
        except EmptyMessageSetError:
            return None
        if len(s) < 2:
            return None
        summands, approximated = achievability_summands(s, n, cap, fallback=True)
        bound = _average_clamped(summands)
        logger.debug("n=%d grid 1/%d M=%d bound=%.6g", n, grid_n, len(s), bound)
        return bound, len(s), approximated

    best = _scan(evaluate, eps, 1)
    if best is None:
        return BoundPoint(n=n, eps_target=eps, m_achieved=1, log2_m=0.0, eps_bound=0.0,
                          method=BoundMethod.THM2_EXACT)
    _, bound, m, approximated = best
    method = BoundMethod.THM2_BERRY_ESSEEN if approximated else BoundMethod.THM2_EXACT
    return BoundPoint(n=n, eps_target=eps, m_achieved=m, log2_m=math.log2(m), eps_bound=bound, method=method)


# Largest message-set size whose achievability bound meets eps.
# BSC and BEC scan M from 2; a general matrix scans grid resolutions from 1.
def search_max_m(channel, n, eps, cap=TYPE_CAP, grid_cap=GRID_CAP):
    if not (0.0 < eps < 1.0):
        raise InputValidationError(f"eps must lie in (0, 1), got {eps!r}")
    if n < 1:
        raise InputValidationError(f"blocklength must be positive, got {n}")
    if isinstance(channel, Bsc):
        return _bsc_point(channel.delta, n, eps, BoundMethod.THM3_BSC)
    if isinstance(channel, Bec):
        return _bsc_point(channel.eta / 2, n, eps, BoundMethod.THM4_BEC)
    if isinstance(channel, ChannelMatrix):
        return _general_point(channel, n, eps, cap, grid_cap)
    raise InputValidationError(f"unsupported channel {channel!r}")


# The bound at a fixed size: M for BSC/BEC, grid resolution for a matrix
def evaluate_bound(channel, n, size, cap=TYPE_CAP):
    if isinstance(channel, Bsc):
        bound = bsc_achievability(channel.delta, build_binary_message_set_by_size(channel.delta, channel.delta, size), n)
        m, method = size, BoundMethod.THM3_BSC
    elif isinstance(channel, Bec):
        bound = bec_achievability(channel.eta, size, n)
        m, method = size, BoundMethod.THM4_BEC
    elif isinstance(channel, ChannelMatrix):
        s = build_dmc_message_set(channel, r0_for_grid(size))
        summands, approximated = achievability_summands(s, n, cap, fallback=True)
        bound = _average_clamped(summands) if len(s) > 1 else 0.0
        m = len(s)
        method = BoundMethod.THM2_BERRY_ESSEEN if approximated else BoundMethod.THM2_EXACT
    else:
        raise InputValidationError(f"unsupported channel {channel!r}")
    return BoundPoint(n=n, eps_target=math.nan, m_achieved=m, log2_m=math.log2(m), eps_bound=bound, method=method)
