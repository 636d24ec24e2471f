# Divergence packings on the simplex and on the channel image.
#
# Message sets are uniform grids: either the full lattice with spacing
# 1/grid_n intersected with the channel image (DMC_GRID) or an evenly spaced
# interval of binary distributions (BINARY). Grid coordinates are kept as
# integers next to the centers so neighbor lookups stay exact.
import enum
import math
import logging
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy import special

from noisyperm.core_prob import LOG2E, Distribution, as_probs, total_variation
from noisyperm.errors import (
    DegenerateMessageSetError,
    EmptyMessageSetError,
    InputValidationError,
    ResourceLimitError,
    SingularMatrixError,
)

logger = logging.getLogger(__name__)

GRID_CAP         = 10_000_000  # Largest number of grid points we will enumerate
SINGULAR_DET     = 1e-9        # |det W| at or below this is treated as singular
MEMBERSHIP_TOL   = 1e-10       # Allowed negativity of the pre-image input distribution
GRID_SNAP        = 1e-9        # Slack on 1/r before flooring, so r = 1/g maps back to g


# Row-stochastic |X| x |Y| transition matrix W(y|x)
class ChannelMatrix():

    def __init__(self, rows):
        arr = np.array(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
            raise InputValidationError(f"channel matrix must be 2-D with |Y| >= 2, got shape {arr.shape}")
        self.rows = tuple(Distribution(row) for row in arr)
        matrix = np.vstack([row.probs for row in self.rows])
        matrix.setflags(write=False)
        self.matrix = matrix

    def __repr__(self):
        return f"ChannelMatrix({self.matrix.tolist()})"

    @classmethod
    def from_rows(cls, rows):
        return cls(rows)

    @classmethod
    def bsc(cls, delta):
        if not (0.0 < delta < 0.5):
            raise InputValidationError(f"BSC crossover must lie in (0, 1/2), got {delta!r}")
        return cls([[1 - delta, delta], [delta, 1 - delta]])

    @classmethod
    def bec(cls, eta):
        if not (0.0 < eta < 1.0):
            raise InputValidationError(f"BEC erasure probability must lie in (0, 1), got {eta!r}")
        # output alphabet ordered (0, e, 1)
        return cls([[1 - eta, eta, 0.0], [0.0, eta, 1 - eta]])

    # Plain text: first line "|X| |Y|", then row-major probabilities
    @classmethod
    def from_file(cls, path):
        tokens = Path(path).read_text(encoding="utf-8").split()
        if len(tokens) < 2:
            raise InputValidationError(f"{path}: missing the '|X| |Y|' header")
        try:
            n_in, n_out = int(tokens[0]), int(tokens[1])
            values = [float(tok) for tok in tokens[2:]]
        except ValueError as exc:
            raise InputValidationError(f"{path}: {exc}") from exc
        if len(values) != n_in * n_out:
            raise InputValidationError(f"{path}: expected {n_in * n_out} probabilities, found {len(values)}")
        return cls(np.array(values).reshape(n_in, n_out))

    @property
    def n_inputs(self):
        return self.matrix.shape[0]

    @property
    def n_outputs(self):
        return self.matrix.shape[1]

    @property
    def is_square(self):
        return self.n_inputs == self.n_outputs

    @property
    def strictly_positive(self):
        return bool(np.all(self.matrix > 0))

    # None for a non-square matrix
    @property
    def det_abs(self):
        if not self.is_square:
            return None
        return float(abs(np.linalg.det(self.matrix)))

    @property
    def rank(self):
        return int(np.linalg.matrix_rank(self.matrix))

    @property
    def capacity(self):
        # Only a plot reference: (rank - 1) / 2
        return (self.rank - 1) / 2

    def require_full_rank(self):
        if not self.is_square:
            raise SingularMatrixError(f"channel matrix must be square, got {self.n_inputs}x{self.n_outputs}")
        if self.det_abs <= SINGULAR_DET:
            raise SingularMatrixError(f"channel matrix is singular (|det| = {self.det_abs:.3g})")

    def require_in_scope(self):
        self.require_full_rank()
        if not self.strictly_positive:
            raise InputValidationError("channel matrix must be strictly positive")


class MessageSetKind(enum.Enum):
    DMC_GRID = "DMC_GRID"
    BINARY = "BINARY"


# Centers with their integer grid coordinates; binary_params is
# (delta1, delta2, xi) for BINARY sets
@dataclass(frozen=True)
class MessageSet:
    centers: Tuple[Distribution, ...]
    radius_r0: float
    grid_n: int
    kind: MessageSetKind
    lattice: Tuple[Tuple[int, ...], ...]
    binary_params: Optional[Tuple[float, float, float]] = None
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {point: i for i, point in enumerate(self.lattice)})

    def __len__(self):
        return len(self.centers)

    @property
    def k(self):
        return len(self.centers[0])

    # Distance between adjacent centers along one coordinate
    @property
    def step(self):
        if self.kind is MessageSetKind.BINARY:
            return self.binary_params[2] / self.grid_n
        return 1.0 / self.grid_n

    @property
    def probs(self):
        return np.vstack([c.probs for c in self.centers])

    def index_of(self, point):
        return self._index.get(tuple(int(a) for a in point))


# floor(1/r), tolerant of r = 1/g computed in floating point
def grid_resolution(r):
    if not r > 0:
        raise InputValidationError(f"grid radius must be positive, got {r!r}")
    return int(math.floor(1.0 / r + GRID_SNAP))


# Total-variation radius sqrt(r0 / (2 log2 e)) that Pinsker turns into KL radius r0
def tv_radius(r0):
    if not r0 > 0:
        raise InputValidationError(f"packing radius r0 must be positive, got {r0!r}")
    return math.sqrt(r0 / (2.0 * LOG2E))


# KL radius whose grid resolution is exactly grid_n (xi scales the binary grid)
def r0_for_grid(grid_n, xi=1.0):
    return 2.0 * LOG2E * (xi / grid_n) ** 2


# All (a_1..a_k) >= 0 summing to grid_n, lexicographic in (a_1..a_k)
def grid_compositions(grid_n, k, cap=GRID_CAP):
    count = math.comb(grid_n + k - 1, k - 1)
    if count > cap:
        raise ResourceLimitError(f"grid with resolution {grid_n} on {k} outcomes has {count} points (cap {cap})")
    # stars and bars: bar positions in lexicographic order give a_1 ascending first
    bars = np.array(list(itertools.combinations(range(grid_n + k - 1), k - 1)), dtype=np.int64)
    bars = bars.reshape(count, k - 1)
    edges = np.hstack([np.full((count, 1), -1), bars, np.full((count, 1), grid_n + k - 1)])
    return np.diff(edges, axis=1) - 1


def grid_simplex(r, k, cap=GRID_CAP):
    if k < 2:
        raise InputValidationError(f"need k >= 2 outcomes, got {k}")
    grid_n = grid_resolution(r)
    if grid_n < 1:
        raise DegenerateMessageSetError(f"radius {r!r} is coarser than the simplex")
    points = grid_compositions(grid_n, k, cap) / grid_n
    return [Distribution(p) for p in points]


def _preimage(w, p):
    w.require_full_rank()
    # x W = p  <=>  W^T x^T = p^T
    return np.linalg.solve(w.matrix.T, np.asarray(p, dtype=float).T).T


def marginal_space_contains(w, p, tol=MEMBERSHIP_TOL):
    x = _preimage(w, as_probs(p))
    return bool(np.all(x >= -tol))


def build_dmc_message_set(w, r0, cap=GRID_CAP):
    w.require_in_scope()
    r = tv_radius(r0)
    grid_n = grid_resolution(r)
    if grid_n < 1:
        raise DegenerateMessageSetError(f"r0 = {r0!r} gives a grid coarser than the simplex")
    lattice = grid_compositions(grid_n, w.n_outputs, cap)
    inputs = _preimage(w, lattice / grid_n)
    inside = np.all(inputs >= -MEMBERSHIP_TOL, axis=1)
    lattice = lattice[inside]
    if lattice.shape[0] == 0:
        raise EmptyMessageSetError(f"no point of the 1/{grid_n} grid lies in the channel image")
    logger.debug("grid 1/%d: %d of %d points inside the channel image", grid_n, lattice.shape[0], inside.size)
    return MessageSet(
        centers=tuple(Distribution(a / grid_n) for a in lattice),
        radius_r0=r0,
        grid_n=grid_n,
        kind=MessageSetKind.DMC_GRID,
        lattice=tuple(tuple(int(v) for v in a) for a in lattice),
    )


def _check_binary_params(delta1, delta2):
    if not (delta1 > 0 and delta2 > 0 and delta1 + delta2 < 1):
        raise InputValidationError(f"need delta1, delta2 > 0 and delta1 + delta2 < 1, got {delta1!r}, {delta2!r}")
    return 1.0 - delta1 - delta2


def _binary_set(delta1, delta2, grid_n, r0):
    xi = 1.0 - delta1 - delta2
    firsts = [xi * a / grid_n + delta1 for a in range(grid_n + 1)]
    return MessageSet(
        centers=tuple(Distribution((q, 1.0 - q)) for q in firsts),
        radius_r0=r0,
        grid_n=grid_n,
        kind=MessageSetKind.BINARY,
        lattice=tuple((a, grid_n - a) for a in range(grid_n + 1)),
        binary_params=(delta1, delta2, xi),
    )


def build_binary_message_set(delta1, delta2, r0):
    xi = _check_binary_params(delta1, delta2)
    r = tv_radius(r0) / xi
    grid_n = grid_resolution(r)
    if grid_n < 1:
        raise DegenerateMessageSetError(f"r0 = {r0!r} is too large for an interval of width {xi:.6g}")
    return _binary_set(delta1, delta2, grid_n, r0)


# m evenly spaced centers on [delta1, 1 - delta2]; the recorded radius is the
# realized minimum pairwise divergence
def build_binary_message_set_by_size(delta1, delta2, m):
    _check_binary_params(delta1, delta2)
    if m < 2:
        raise InputValidationError(f"a binary message set needs m >= 2 centers, got {m}")
    s = _binary_set(delta1, delta2, m - 1, 0.0)
    return MessageSet(
        centers=s.centers,
        radius_r0=min_pairwise_kl(s),
        grid_n=s.grid_n,
        kind=s.kind,
        lattice=s.lattice,
        binary_params=s.binary_params,
    )


# (lower, upper, exact_grid) for the full-simplex grid packing
def packing_count_bounds(r0, k):
    if k < 2:
        raise InputValidationError(f"need k >= 2 outcomes, got {k}")
    r = tv_radius(r0)
    exact = math.comb(grid_resolution(r) + k - 1, k - 1)
    lower = ((1.0 / r + k - 2) / (k - 1)) ** (k - 1)
    upper = ((1.0 / r + k - 1) * math.e / (k - 1)) ** (k - 1)
    return lower, upper, exact


# Packing-count lower bound on a channel image of volume ratio lam.
# Informative only when positive; coarse radii drive it below zero.
def packing_lower_bound_subspace(r0, k, lam):
    if not (0.0 < lam <= 1.0):
        raise InputValidationError(f"volume ratio must lie in (0, 1], got {lam!r}")
    if k < 2:
        raise InputValidationError(f"need k >= 2 outcomes, got {k}")
    r = tv_radius(r0)
    boundary = 2 * k * math.comb(grid_resolution(r) + k - 2, k - 2)
    return lam * ((1.0 / r + k - 2) / (k - 1)) ** (k - 1) - boundary


def volume_ratio(w):
    w.require_full_rank()
    return w.det_abs


def min_pairwise_kl(s):
    if len(s) < 2:
        raise InputValidationError("pairwise statistics need at least two centers")
    probs = s.probs
    best = math.inf
    for i in range(len(s)):
        # row i against every center at once; self-pair masked out
        div = special.rel_entr(probs[i], probs).sum(axis=1) * LOG2E
        div[i] = math.inf
        best = min(best, float(div.min()))
    return max(best, 0.0)


def min_pairwise_tv(s):
    if len(s) < 2:
        raise InputValidationError("pairwise statistics need at least two centers")
    return min(total_variation(s.centers[i], s.centers[j])
               for i, j in itertools.combinations(range(len(s)), 2))
