# Oracle and property checks behind the `verify` subcommand.
#
# Each check returns (passed, detail); quick mode shrinks the grids so the
# whole suite finishes in seconds, full mode uses the acceptance sizes.
import math
import time
import logging
from dataclasses import dataclass

import numpy as np

from noisyperm import approx, bounds, packing
from noisyperm.core_prob import llr_moments
from noisyperm.errors import EmptyMessageSetError

logger = logging.getLogger(__name__)

SEED = 20240601


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


# Strictly positive, diagonally dominant k x k channel, full rank in practice
def random_channel(rng, k, spread=(0.1, 0.4)):
    while True:
        s = rng.uniform(*spread)
        noise = rng.dirichlet(np.ones(k), size=k)
        w = packing.ChannelMatrix((1 - s) * np.eye(k) + s * noise)
        if w.strictly_positive and w.det_abs > 1e-3:
            return w


def check_bec_bsc_identity(quick=True):
    rng = np.random.default_rng(SEED)
    mismatches = 0
    for _ in range(20):
        n, m = int(rng.integers(1, 400)), int(rng.integers(2, 12))
        bsc = bounds.bsc_achievability(0.11, packing.build_binary_message_set_by_size(0.11, 0.11, m), n)
        if bounds.bec_achievability(0.22, m, n) != bsc:
            mismatches += 1
    return mismatches == 0, f"{mismatches} of 20 (n, M) pairs differ"


def check_neighbor_union(quick=True):
    worst = 0.0
    for size in (3, 4, 5):
        s = packing.build_binary_message_set_by_size(0.11, 0.11, size)
        for n in range(1, 9 if quick else 11):
            for m in range(size):
                full = bounds.union_error_prob(s, m, n, "full")
                near = bounds.union_error_prob(s, m, n, "neighbors")
                worst = max(worst, abs(full - near))
    return worst <= 1e-12, f"max |full - neighbor union| = {worst:.3g}"


def check_binomial_closed_form(quick=True):
    worst = 0.0
    for size in (3, 4, 5):
        s = packing.build_binary_message_set_by_size(0.11, 0.11, size)
        firsts = [c[0] for c in s.centers]
        for n in range(1, 21 if quick else 61):
            closed = bounds.bsc_summands(firsts, n)
            exact, _ = bounds.achievability_summands(s, n)
            worst = max(worst, max(abs(a - b) for a, b in zip(closed, exact)))
    return worst <= 1e-12, f"max |binomial tails - type enumeration| = {worst:.3g}"


def check_packing(quick=True):
    rng = np.random.default_rng(SEED + 1)
    failures, built = [], 0
    for _ in range(40 if quick else 200):
        k, grid_n = int(rng.integers(2, 5)), int(rng.integers(1, 13))
        r0 = packing.r0_for_grid(grid_n)
        lower, upper, exact = packing.packing_count_bounds(r0, k)
        if len(packing.grid_simplex(1.0 / grid_n, k)) != math.comb(grid_n + k - 1, k - 1) or exact != math.comb(grid_n + k - 1, k - 1):
            failures.append(f"grid count k={k} g={grid_n}")
        if not lower <= exact <= upper:
            failures.append(f"bracket k={k} g={grid_n}")
        try:
            s = packing.build_dmc_message_set(random_channel(rng, k), r0)
        except EmptyMessageSetError:
            continue
        built += 1
        if len(s) < 2:
            continue
        if packing.min_pairwise_kl(s) < r0 * (1 - 1e-12):
            failures.append(f"KL radius k={k} g={grid_n}")
        # survivors on a binary grid form one contiguous run, so neighbors exist
        tv, step = packing.min_pairwise_tv(s), 1.0 / s.grid_n
        if (abs(tv - step) > 1e-12) if k == 2 else (tv < step - 1e-12):
            failures.append(f"TV spacing {tv:.6g} vs 1/g k={k} g={grid_n}")
    return not failures, f"{built} sets built; failures: {failures[:3] or 'none'}"


def check_moments(quick=True):
    rng = np.random.default_rng(SEED + 2)
    r0 = approx.R0_CAP / 16
    failed, checked = 0, 0
    for k in (2, 3):
        for _ in range(5 if quick else 20):
            w = random_channel(rng, k)
            try:
                report = approx.verify_moment_bounds(w, r0)
            except EmptyMessageSetError:
                continue
            checked += 1
            failed += 0 if report.passed else 1
    return failed == 0 and checked > 0, f"{checked} channels checked, {failed} with violations"


def check_berry_esseen(quick=True):
    rng = np.random.default_rng(SEED + 3)
    violations = 0
    for _ in range(20 if quick else 100):
        size = int(rng.integers(3, 12))
        lo = rng.uniform(0.05, 0.3)
        s = packing.build_binary_message_set_by_size(lo, rng.uniform(0.05, 0.3), size)
        m = int(rng.integers(0, size - 1))
        p, q = s.centers[m], s.centers[m + 1]
        moments = llr_moments(p, q)
        for n in (50, 100, 200):
            exact = bounds.error_event_prob(p, q, n)
            if abs(exact - approx.normal_error_estimate(moments, n)) > approx.berry_esseen_bound(moments, n):
                violations += 1
    return violations == 0, f"{violations} sandwich violations"


def check_approximation_gap(quick=True):
    deltas = (0.11,) if quick else (0.11, 0.22)
    epsilons = (1e-3,) if quick else (1e-3, 1e-6)
    grid = np.unique(np.round(np.logspace(math.log10(20), math.log10(2000), 10 if quick else 30)).astype(int))
    worst = 0.0
    for delta in deltas:
        for eps in epsilons:
            for n in grid:
                point = bounds.search_max_m(bounds.Bsc(delta), int(n), eps)
                gap = abs(point.log2_m - approx.approx_bsc(delta, int(n), eps, ceil_variant=True))
                worst = max(worst, gap)
    return worst <= 1.0, f"max |log2 M (bound) - log2 M (ceil approx)| = {worst:.3f} bits"


# First n <= horizon at which the plain BSC approximation reaches rate target,
# or None. The approximation is increasing in n, so it stays there afterwards.
def approximation_crossing(delta, eps, horizon=1000, target=0.25):
    for n in range(2, horizon + 1):
        if approx.approx_bsc(delta, n, eps) >= target * math.log2(n):
            return n
    return None


# One past the last n <= horizon whose bound-achievable rate is below target
def half_capacity_onset(delta, eps, horizon=1000, target=0.25):
    last_below = 1
    for n in range(2, horizon + 1):
        needed = max(2, math.ceil(n ** target - 1e-12))
        s = packing.build_binary_message_set_by_size(delta, delta, needed)
        if bounds.bsc_achievability(delta, s, n) > eps:
            last_below = n
    return last_below + 1


def check_half_capacity(quick=True):
    crossing = approximation_crossing(0.11, 1e-3)
    onset = half_capacity_onset(0.11, 1e-3, horizon=600 if quick else 1000)
    passed = crossing is not None and 150 <= crossing <= 450 and onset <= crossing
    return passed, (f"approximation reaches 1/4 at n = {crossing}; "
                    f"bound rate stays at or above 1/4 from n = {onset}")


def check_large_blocklength(quick=True):
    n = 5_000 if quick else 50_000
    point = bounds.search_max_m(bounds.Bsc(0.11), n, 1e-3)
    floor = 0.25 if quick else 0.30
    return point.rate > floor, f"rate at n={n} is {point.rate:.4f} (M = {point.m_achieved})"


CHECKS = [
    ("bec-bsc-identity", check_bec_bsc_identity),
    ("neighbor-union", check_neighbor_union),
    ("binomial-closed-form", check_binomial_closed_form),
    ("packing-guarantees", check_packing),
    ("moment-bounds", check_moments),
    ("berry-esseen-sandwich", check_berry_esseen),
    ("approximation-gap", check_approximation_gap),
    ("half-capacity-onset", check_half_capacity),
    ("large-blocklength-rate", check_large_blocklength),
]


def run_checks(quick=True, only=None):
    results = []
    for name, check in CHECKS:
        if only and name not in only:
            continue
        logger.info("running %s", name)
        start = time.perf_counter()
        passed, detail = check(quick)
        results.append(CheckResult(name=name, passed=bool(passed), detail=detail,
                                   seconds=time.perf_counter() - start))
    return results
