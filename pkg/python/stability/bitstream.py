"""
Finite binary sequences: the inputs x of every experiment.

BitSequence is an immutable value holding its bits packed most-significant
first, with pad bits always zero so that equality and hashing can work on the
raw bytes. All public indexing is 1-based (x_1 ... x_n); conversion to the
0-based numpy layout happens only inside this module and the rule VM.

File formats:
  ascii01  '0'/'1' characters, ASCII whitespace ignored
  packed   b"RLB1" | n as u64 little-endian | ceil(n/8) payload bytes
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import BitFormatError, UndefinedFrequencyError
from .prng import MASK64, xoshiro_outputs

MAX_LENGTH = 2**32 - 1
PACKED_MAGIC = b"RLB1"
PACKED_HEADER_SIZE = len(PACKED_MAGIC) + 8
ASCII_WHITESPACE = np.frombuffer(b" \t\n\r\x0b\x0c", dtype=np.uint8)

BitFormat = Literal["ascii01", "packed"]


def _packed_size(length: int) -> int:
    return (length + 7) // 8


def _clear_padding(packed: bytes, length: int) -> bytes:
    pad = 8 * len(packed) - length
    if not packed or pad == 0:
        return packed
    last = packed[-1] & (0xFF << pad) & 0xFF
    return packed[:-1] + bytes([last])


@dataclass(frozen=True)
class BitSequence:
    """Packed finite binary sequence with an explicit length."""
    packed: bytes
    length: int

    def __post_init__(self):
        if not 0 <= self.length <= MAX_LENGTH:
            raise ValueError(f"length must be in [0, 2^32-1], got {self.length}")
        if len(self.packed) != _packed_size(self.length):
            raise ValueError(
                f"{len(self.packed)} payload bytes cannot hold exactly {self.length} bits"
            )
        if _clear_padding(self.packed, self.length) != self.packed:
            raise ValueError("pad bits of a BitSequence must be zero")

    @classmethod
    def from_packed(cls, packed: bytes, length: int) -> "BitSequence":
        """Build from packed bytes, discarding whatever the pad bits hold."""
        packed = bytes(packed[:_packed_size(length)])
        return cls(_clear_padding(packed, length), length)

    @classmethod
    def from_array(cls, bits: Union[np.ndarray, Iterable[int]]) -> "BitSequence":
        arr = np.asarray(bits if isinstance(bits, np.ndarray) else list(bits))
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("bits must contain only 0 and 1")
        arr = arr.astype(np.uint8, copy=False)
        return cls(np.packbits(arr).tobytes(), int(arr.size))

    @classmethod
    def from_string(cls, text: str) -> "BitSequence":
        """Parse a bare string of '0'/'1' characters, e.g. "0101"."""
        bad = [i for i, ch in enumerate(text) if ch not in "01"]
        if bad:
            raise ValueError(f"invalid bit character {text[bad[0]]!r} at position {bad[0]}")
        return cls.from_array(np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0"))

    @classmethod
    def empty(cls) -> "BitSequence":
        return cls(b"", 0)

    def __len__(self) -> int:
        return self.length

    def __str__(self) -> str:
        return (self.to_array() + ord("0")).tobytes().decode("ascii")

    def __repr__(self) -> str:
        text = str(self) if self.length <= 32 else f"{str(self.prefix(32))}..."
        return f"BitSequence({text!r}, n={self.length})"

    @cached_property
    def _array(self) -> np.ndarray:
        arr = np.unpackbits(np.frombuffer(self.packed, dtype=np.uint8), count=self.length)
        arr.flags.writeable = False
        return arr

    def to_array(self) -> np.ndarray:
        """Read-only uint8 array of the bits, 0-based."""
        return self._array

    def bit(self, index: int) -> int:
        """The bit x_index, 1-based."""
        if not 1 <= index <= self.length:
            raise IndexError(f"bit index {index} outside 1..{self.length}")
        return int(self._array[index - 1])

    def count_ones(self) -> int:
        return int.from_bytes(self.packed, "big").bit_count()

    def prefix(self, length: int) -> "BitSequence":
        if not 0 <= length <= self.length:
            raise ValueError(f"prefix length {length} outside 0..{self.length}")
        return BitSequence.from_packed(self.packed, length)

    def take(self, indices: Iterable[int]) -> "BitSequence":
        """The subsequence at the given 1-based indices, in the given order."""
        idx = np.fromiter(indices, dtype=np.int64)
        if idx.size and (idx.min() < 1 or idx.max() > self.length):
            raise IndexError("subsequence index out of range")
        return BitSequence.from_array(self._array[idx - 1])


def frequency(seq: BitSequence) -> Fraction:
    """ν(s) = #ones(s) / l(s), exactly."""
    if seq.length == 0:
        raise UndefinedFrequencyError("frequency of an empty sequence is undefined")
    return Fraction(seq.count_ones(), seq.length)


class SourceSpec(BaseModel):
    """Where an input sequence comes from."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal["uniform", "bernoulli", "periodic", "file"]
    seed: int = Field(default=0, ge=0, le=MASK64)
    p: Optional[Fraction] = None
    pattern: Optional[BitSequence] = None
    path: Optional[Path] = None
    path_format: BitFormat = "packed"

    @field_validator("p", mode="before")
    @classmethod
    def _coerce_p(cls, value):
        if value is None or isinstance(value, Fraction):
            return value
        if isinstance(value, str):
            return Fraction(value.strip())
        return Fraction(value)

    @field_validator("pattern", mode="before")
    @classmethod
    def _coerce_pattern(cls, value):
        if isinstance(value, str):
            return BitSequence.from_string(value.strip())
        return value

    @model_validator(mode="after")
    def _check_kind(self) -> "SourceSpec":
        if self.kind == "bernoulli" and (self.p is None or not 0 < self.p < 1):
            raise ValueError(f"bernoulli source requires 0 < p < 1, got p={self.p}")
        if self.kind == "periodic" and (self.pattern is None or len(self.pattern) == 0):
            raise ValueError("periodic source requires a non-empty pattern")
        if self.kind == "file" and self.path is None:
            raise ValueError("file source requires a path")
        return self

    def with_seed(self, seed: int) -> "SourceSpec":
        return self.model_copy(update={"seed": seed & MASK64})

    def describe(self) -> str:
        if self.kind == "bernoulli":
            return f"bernoulli(p={self.p}, seed={self.seed})"
        if self.kind == "uniform":
            return f"uniform(seed={self.seed})"
        if self.kind == "periodic":
            return f"periodic({self.pattern})"
        return f"file({self.path})"


def _bernoulli_threshold(p: Fraction) -> int:
    """floor(p * 2^64), exactly."""
    return (p.numerator << 64) // p.denominator


def generate(spec: SourceSpec, n: int) -> BitSequence:
    """
    Produce the first n bits of a source.

    uniform:   bits of successive 64-bit outputs, most significant first
    bernoulli: bit = 1 iff the next 64-bit output < floor(p * 2^64)
    periodic:  the pattern repeated and truncated to n
    file:      the first n bits of the stored sequence

    Every kind is prefix-consistent: generate(spec, n) is a prefix of
    generate(spec, m) for n <= m.
    """
    if not 0 <= n <= MAX_LENGTH:
        raise ValueError(f"n must be in [0, 2^32-1], got {n}")

    if spec.kind == "uniform":
        outputs = xoshiro_outputs(spec.seed, (n + 63) // 64)
        return BitSequence.from_packed(outputs.astype(">u8").tobytes(), n)

    if spec.kind == "bernoulli":
        threshold = np.uint64(_bernoulli_threshold(spec.p))
        outputs = xoshiro_outputs(spec.seed, n)
        return BitSequence.from_array((outputs < threshold).astype(np.uint8))

    if spec.kind == "periodic":
        return BitSequence.from_array(np.resize(spec.pattern.to_array(), n))

    stored = read_bits(spec.path, spec.path_format)
    if len(stored) < n:
        raise ValueError(f"{spec.path} holds {len(stored)} bits, {n} requested")
    return stored.prefix(n)


def decode_bits(data: bytes, format: BitFormat) -> BitSequence:
    if format == "ascii01":
        raw = np.frombuffer(data, dtype=np.uint8)
        is_bit = (raw == ord("0")) | (raw == ord("1"))
        bad = ~(is_bit | np.isin(raw, ASCII_WHITESPACE))
        if bad.any():
            offset = int(np.flatnonzero(bad)[0])
            raise BitFormatError(f"unexpected character {chr(raw[offset])!r}", offset)
        return BitSequence.from_array(raw[is_bit] - ord("0"))

    if format == "packed":
        if data[: len(PACKED_MAGIC)] != PACKED_MAGIC:
            if len(data) < len(PACKED_MAGIC) and PACKED_MAGIC.startswith(data):
                raise BitFormatError("truncated header", len(data))
            raise BitFormatError("bad magic, expected RLB1", 0)
        if len(data) < PACKED_HEADER_SIZE:
            raise BitFormatError("truncated header", len(data))
        n = int.from_bytes(data[len(PACKED_MAGIC):PACKED_HEADER_SIZE], "little")
        if n > MAX_LENGTH:
            raise BitFormatError(f"length {n} exceeds 2^32-1", len(PACKED_MAGIC))
        end = PACKED_HEADER_SIZE + _packed_size(n)
        if len(data) < end:
            raise BitFormatError("truncated payload", len(data))
        if len(data) > end:
            raise BitFormatError("trailing bytes after payload", end)
        return BitSequence.from_packed(data[PACKED_HEADER_SIZE:end], n)

    raise ValueError(f"unknown bit format {format!r}")


def encode_bits(seq: BitSequence, format: BitFormat) -> bytes:
    if format == "ascii01":
        return str(seq).encode("ascii")
    if format == "packed":
        return PACKED_MAGIC + seq.length.to_bytes(8, "little") + seq.packed
    raise ValueError(f"unknown bit format {format!r}")


def sniff_format(data: bytes) -> BitFormat:
    return "packed" if data.startswith(PACKED_MAGIC) else "ascii01"


def read_bits(path: Union[str, Path], format: BitFormat) -> BitSequence:
    return decode_bits(Path(path).read_bytes(), format)


def write_bits(seq: BitSequence, path: Union[str, Path], format: BitFormat) -> None:
    Path(path).write_bytes(encode_bits(seq, format))
