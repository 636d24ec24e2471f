# Monte Carlo simulation of M -> Z^n -> X^n -> Y^n -> M-hat with ML decoding.
#
# Random numbers come from PCG64 generators seeded by
# SeedSequence(entropy=seed, spawn_key=(block, stream)), one per block of
# block_trials(n) trials and per stream (messages and codewords, channel noise,
# permutations). A report therefore depends only on the config, never on
# how many workers ran the blocks.
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from noisyperm.core_prob import Distribution, as_probs
from noisyperm.errors import InputValidationError, MembershipError
from noisyperm.packing import MEMBERSHIP_TOL, ChannelMatrix, MessageSet, marginal_space_contains

logger = logging.getLogger(__name__)

BLOCK_SIZE       = 4096   # Most trials per RNG substream
BLOCK_ELEMENTS   = 1 << 20  # Most symbols (trials x n) drawn per block
DECODE_TIE_TOL   = 1e-12  # Per-symbol slack under which two log-likelihoods tie
Z95              = 1.959963984540054

STREAM_CODEWORD  = 0
STREAM_NOISE     = 1
STREAM_PERMUTE   = 2


@dataclass(frozen=True)
class SimConfig:
    channel: ChannelMatrix
    message_set: MessageSet
    n: int
    trials: int
    seed: int
    permute: bool = True
    workers: int = 1

    def validate(self):
        if self.trials < 1:
            raise InputValidationError(f"trials must be at least 1, got {self.trials}")
        if self.n < 1:
            raise InputValidationError(f"blocklength must be positive, got {self.n}")
        if not (0 <= self.seed < 2 ** 64):
            raise InputValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.message_set.k != self.channel.n_outputs:
            raise InputValidationError("message set and channel disagree on the output alphabet")
        for center in self.message_set.centers:
            if not marginal_space_contains(self.channel, center):
                raise MembershipError(f"center {center} lies outside the channel image")


@dataclass(frozen=True)
class SimReport:
    errors: int
    trials: int
    p_hat: float
    stderr: float
    ci95: tuple
    ties: int

    @classmethod
    def from_counts(cls, errors, trials, ties):
        p_hat = errors / trials
        stderr = math.sqrt(p_hat * (1.0 - p_hat) / trials)
        ci95 = (max(0.0, p_hat - Z95 * stderr), min(1.0, p_hat + Z95 * stderr))
        return cls(errors=errors, trials=trials, p_hat=p_hat, stderr=stderr, ci95=ci95, ties=ties)

    def to_dict(self):
        out = asdict(self)
        out["ci95"] = list(self.ci95)
        return out


@dataclass(frozen=True)
class InvarianceReport:
    permuted: SimReport
    unpermuted: SimReport
    difference: float
    combined_stderr: float
    z: float

    @property
    def within_noise(self):
        return abs(self.difference) <= 3.0 * self.combined_stderr


# The unique input distribution P_X with P_X W = p_marginal
def input_distribution_for(w, p_marginal):
    w.require_full_rank()
    x = np.linalg.solve(w.matrix.T, as_probs(p_marginal))
    if np.any(x < -MEMBERSHIP_TOL):
        raise MembershipError(f"marginal {p_marginal} lies outside the channel image (pre-image {x})")
    x = np.clip(x, 0.0, None)
    return Distribution(x / x.sum())


# ML decisions from type vectors, one per row: (index, tied)
def decode_counts(counts, log_centers, n):
    scores = np.asarray(counts, dtype=float) @ log_centers.T
    best = scores.max(axis=1)
    winners = (scores >= best[:, None] - DECODE_TIE_TOL * n).sum(axis=1)
    return scores.argmax(axis=1), winners > 1


# Decodes one received word; the answer depends on the word only through its type
def decode_word(word, message_set):
    word = np.asarray(word)
    counts = np.bincount(word, minlength=message_set.k)[None, :]
    with np.errstate(divide="ignore"):
        log_centers = np.log(message_set.probs)
    index, tied = decode_counts(counts, log_centers, word.size)
    return int(index[0]), bool(tied[0])


def block_trials(n):
    return max(1, min(BLOCK_SIZE, BLOCK_ELEMENTS // n))


def _stream(seed, block, stream):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(block, stream))))


def _sample_symbols(cdf_rows, uniforms):
    # cdf_rows: (..., alphabet) cumulative rows aligned with uniforms (...)
    return (cdf_rows[..., :-1] <= uniforms[..., None]).sum(axis=-1)


class _Simulator():

    def __init__(self, cfg):
        self.cfg = cfg
        inputs = np.vstack([input_distribution_for(cfg.channel, c).probs for c in cfg.message_set.centers])
        self.input_cdf = np.cumsum(inputs, axis=1)
        self.input_cdf[:, -1] = 1.0
        self.channel_cdf = np.cumsum(cfg.channel.matrix, axis=1)
        self.channel_cdf[:, -1] = 1.0
        with np.errstate(divide="ignore"):
            self.log_centers = np.log(cfg.message_set.probs)

    def block_sizes(self):
        per_block = block_trials(self.cfg.n)
        full, rest = divmod(self.cfg.trials, per_block)
        return [per_block] * full + ([rest] if rest else [])

    def run_block(self, block, count):
        cfg = self.cfg
        codeword_rng = _stream(cfg.seed, block, STREAM_CODEWORD)
        messages = codeword_rng.integers(len(cfg.message_set), size=count)
        z = _sample_symbols(self.input_cdf[messages][:, None, :], codeword_rng.random((count, cfg.n)))
        if cfg.permute:
            z = _stream(cfg.seed, block, STREAM_PERMUTE).permuted(z, axis=1)
        y = _sample_symbols(self.channel_cdf[z], _stream(cfg.seed, block, STREAM_NOISE).random((count, cfg.n)))
        counts = np.stack([(y == sym).sum(axis=1) for sym in range(cfg.channel.n_outputs)], axis=1)
        decoded, tied = decode_counts(counts, self.log_centers, cfg.n)
        wrong = tied | (decoded != messages)
        return int(wrong.sum()), int(tied.sum())

    def run(self):
        sizes = self.block_sizes()
        logger.info("simulating %d trials in %d blocks (n=%d, |M|=%d, permute=%s)",
                    self.cfg.trials, len(sizes), self.cfg.n, len(self.cfg.message_set), self.cfg.permute)
        workers = max(1, int(self.cfg.workers))
        if workers == 1:
            results = [self.run_block(b, c) for b, c in enumerate(sizes)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(self.run_block, range(len(sizes)), sizes))
        errors = sum(e for e, _ in results)
        ties = sum(t for _, t in results)
        return SimReport.from_counts(errors, self.cfg.trials, ties)


def run_trials(cfg):
    cfg.validate()
    return _Simulator(cfg).run()


# Same codewords and noise streams with and without the permutation block
def permutation_invariance_check(cfg):
    with_perm = run_trials(SimConfig(**{**_fields_of(cfg), "permute": True}))
    without = run_trials(SimConfig(**{**_fields_of(cfg), "permute": False}))
    difference = with_perm.p_hat - without.p_hat
    combined = math.sqrt(with_perm.stderr ** 2 + without.stderr ** 2)
    z = difference / combined if combined > 0 else 0.0
    return InvarianceReport(permuted=with_perm, unpermuted=without, difference=difference,
                            combined_stderr=combined, z=z)


def _fields_of(cfg):
    # dataclasses.asdict would deep-copy the channel and message set
    return {name: getattr(cfg, name) for name in cfg.__dataclass_fields__}
