"""
Computable upper-bound estimators of K(x|n) and the randomness deficiency.

The true conditional complexity is uncomputable; everything here is an upper
bound from an explicit code, so the derived deficiency n - K̂ is a lower
bound on the true one. All quantities are in bits. The length n is treated as
given for free: no length-encoding term is added to K̂.

Estimators:
  lz78           c phrases of the LZ78 incremental parse (a trailing partial
                 phrase counts as one); each phrase costs a back-reference
                 into the dictionary plus one literal bit:
                     K̂ = c * (ceil(log2(c + 1)) + 1)
  block_entropy  empirical Shannon entropy of the non-overlapping b-blocks,
                 plus an explicit count table for the model:
                     K̂ = floor(n / b) * H_b + 2^b * ceil(log2(n + 1))
"""

from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
from scipy.stats import entropy

from ._jit import jit
from .bitstream import BitSequence
from .errors import StabilityError

Estimator = Literal["lz78", "block_entropy"]
ESTIMATORS: tuple[Estimator, ...] = ("lz78", "block_entropy")
MAX_BLOCK = 16
DEFAULT_BLOCK = 8


@dataclass(frozen=True)
class ComplexityEstimate:
    """K̂(x|n) from one estimator, with the deficiency it implies."""
    estimator: str
    k_hat: float
    deficiency: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def _clamped_deficiency(n: int, k_hat: float) -> float:
    return float(min(max(0.0, n - k_hat), n))


@jit
def _lz78_parse(bits, prime, checkpoints):
    """
    Walk the LZ78 phrase trie over `prime` and then `bits`.

    Returns the number of dictionary phrases contributed by `prime` (its
    trailing partial phrase dropped), the phrase count of `bits` including a
    trailing partial phrase, and that same count at each checkpoint length.
    """
    capacity = bits.shape[0] + prime.shape[0] + 1
    children = np.full((capacity, 2), -1, dtype=np.int64)
    nodes = 1
    node = 0
    for b in prime:
        nxt = children[node, b]
        if nxt == -1:
            children[node, b] = nodes
            nodes += 1
            node = 0
        else:
            node = nxt
    primed = nodes - 1

    node = 0
    phrases = 0
    at_checkpoint = np.zeros(checkpoints.shape[0], dtype=np.int64)
    ci = 0
    for k in range(bits.shape[0]):
        b = bits[k]
        nxt = children[node, b]
        if nxt == -1:
            children[node, b] = nodes
            nodes += 1
            phrases += 1
            node = 0
        else:
            node = nxt
        while ci < checkpoints.shape[0] and checkpoints[ci] == k + 1:
            at_checkpoint[ci] = phrases + (1 if node != 0 else 0)
            ci += 1
    total = phrases + (1 if node != 0 else 0)
    return primed, total, at_checkpoint


_NO_BITS = np.zeros(0, dtype=np.uint8)
_NO_CHECKPOINTS = np.zeros(0, dtype=np.int64)


def _lz78_cost(phrases: int, dictionary_size: int) -> int:
    # ceil(log2(D + 1)) == D.bit_length() for D >= 0
    return phrases * (dictionary_size.bit_length() + 1)


def _require_bits(x: BitSequence) -> None:
    if x.length < 1:
        raise StabilityError("complexity of an empty sequence is not estimated")


def lz78_phrase_count(x: BitSequence) -> int:
    _, total, _ = _lz78_parse(np.array(x.to_array()), _NO_BITS, _NO_CHECKPOINTS)
    return int(total)


def lz78_estimate(x: BitSequence) -> ComplexityEstimate:
    _require_bits(x)
    c = lz78_phrase_count(x)
    k_hat = float(_lz78_cost(c, c))
    return ComplexityEstimate("lz78", k_hat, _clamped_deficiency(x.length, k_hat), x.length)


def lz78_conditional_estimate(x: BitSequence, y: BitSequence) -> ComplexityEstimate:
    """
    K̂(x|y): parse y first to seed the dictionary, then pay only for the
    phrases of x. Back-references address the whole dictionary, y's phrases
    included. With an empty y this equals lz78_estimate(x).
    """
    _require_bits(x)
    primed, c, _ = _lz78_parse(np.array(x.to_array()), np.array(y.to_array()), _NO_CHECKPOINTS)
    k_hat = float(_lz78_cost(int(c), int(primed) + int(c)))
    return ComplexityEstimate("lz78", k_hat, _clamped_deficiency(x.length, k_hat), x.length)


def block_entropy_estimate(x: BitSequence, block: int = DEFAULT_BLOCK) -> ComplexityEstimate:
    if not 1 <= block <= MAX_BLOCK:
        raise ValueError(f"block size must be in 1..{MAX_BLOCK}, got {block}")
    n = x.length
    if n < block:
        raise StabilityError(f"sequence of length {n} is shorter than one {block}-bit block")
    m = n // block
    blocks = x.to_array()[: m * block].reshape(m, block).astype(np.int64)
    weights = np.int64(1) << np.arange(block - 1, -1, -1, dtype=np.int64)
    counts = np.bincount(blocks @ weights, minlength=2**block)
    h_block = max(float(entropy(counts, base=2)), 0.0)
    k_hat = m * h_block + 2**block * n.bit_length()
    return ComplexityEstimate("block_entropy", k_hat, _clamped_deficiency(n, k_hat), n)


def estimate(x: BitSequence, estimator: Estimator = "lz78", block: int = DEFAULT_BLOCK) -> ComplexityEstimate:
    if estimator == "lz78":
        return lz78_estimate(x)
    if estimator == "block_entropy":
        return block_entropy_estimate(x, block)
    raise ValueError(f"unknown estimator {estimator!r}, expected one of {ESTIMATORS}")


def deficiency(x: BitSequence, estimator: Estimator = "lz78", block: int = DEFAULT_BLOCK) -> float:
    """δ̂(x|n) = max(0, n - K̂(x|n)), in [0, n]."""
    return estimate(x, estimator, block).deficiency


def ml_prefix_curve(
    x: BitSequence,
    estimator: Estimator = "lz78",
    stride: int = 1024,
    block: int = DEFAULT_BLOCK,
) -> list[tuple[int, float]]:
    """
    (n_i, K̂(x_1..x_{n_i}) - n_i) for n_i = stride, 2·stride, ... <= n.

    The empirical Martin-Löf diagnostic: bounded below for random sources,
    diverging downwards for regular ones.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    lengths = list(range(stride, x.length + 1, stride))
    if estimator == "lz78":
        checkpoints = np.array(lengths, dtype=np.int64)
        _, _, counts = _lz78_parse(np.array(x.to_array()), _NO_BITS, checkpoints)
        return [
            (n_i, float(_lz78_cost(int(c), int(c)) - n_i))
            for n_i, c in zip(lengths, counts)
        ]
    return [
        (n_i, estimate(x.prefix(n_i), estimator, block).k_hat - n_i)
        for n_i in lengths
    ]
