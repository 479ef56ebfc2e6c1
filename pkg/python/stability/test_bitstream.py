from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError

from .bitstream import (
    BitSequence,
    SourceSpec,
    decode_bits,
    encode_bits,
    frequency,
    generate,
    read_bits,
    sniff_format,
    write_bits,
)
from .errors import BitFormatError, UndefinedFrequencyError
from .prng import xoshiro_outputs

bit_lists = st.lists(st.integers(min_value=0, max_value=1), max_size=300)


def test_one_based_indexing():
    x = BitSequence.from_string("0110")
    assert [x.bit(i) for i in range(1, 5)] == [0, 1, 1, 0]
    with pytest.raises(IndexError):
        x.bit(0)
    with pytest.raises(IndexError):
        x.bit(5)


def test_nonzero_pad_bits_rejected():
    with pytest.raises(ValueError):
        BitSequence(b"\xff", 3)
    assert BitSequence.from_packed(b"\xff", 3) == BitSequence.from_string("111")


def test_take_and_prefix():
    x = BitSequence.from_string("010011")
    assert str(x.take([2, 5, 6])) == "111"
    assert str(x.prefix(3)) == "010"


@pytest.mark.parametrize(
    "text, expected",
    [("0101", Fraction(1, 2)), ("1111", Fraction(1)), ("0010", Fraction(1, 4))],
)
def test_frequency(text, expected):
    assert frequency(BitSequence.from_string(text)) == expected


def test_frequency_of_empty_is_undefined():
    with pytest.raises(UndefinedFrequencyError):
        frequency(BitSequence.empty())


@given(st.integers(min_value=1, max_value=200))
def test_constant_sequences(k):
    assert frequency(BitSequence.from_string("0" * k)) == 0
    assert frequency(BitSequence.from_string("1" * k)) == 1


def test_periodic_source():
    spec = SourceSpec(kind="periodic", pattern="01")
    assert str(generate(spec, 6)) == "010101"


def test_uniform_bits_are_output_words_msb_first():
    x = generate(SourceSpec(kind="uniform", seed=5), 64)
    assert str(x) == format(int(xoshiro_outputs(5, 1)[0]), "064b")


def test_bernoulli_threshold_is_exact():
    x = generate(SourceSpec(kind="bernoulli", seed=3, p="1/4"), 200)
    threshold = 1 << 62
    expected = [int(v < threshold) for v in xoshiro_outputs(3, 200)]
    assert x.to_array().tolist() == expected


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": "bernoulli", "p": 0},
        {"kind": "bernoulli", "p": 1},
        {"kind": "bernoulli"},
        {"kind": "periodic", "pattern": ""},
        {"kind": "file"},
    ],
)
def test_invalid_sources_rejected(kwargs):
    with pytest.raises(ValidationError):
        SourceSpec(**kwargs)


@settings(max_examples=30)
@given(
    st.sampled_from(["uniform", "bernoulli"]),
    st.integers(min_value=0, max_value=2**64 - 1),
    st.integers(min_value=0, max_value=700),
    st.integers(min_value=0, max_value=700),
)
def test_generation_is_prefix_consistent(kind, seed, n, m):
    n, m = sorted((n, m))
    spec = SourceSpec(kind=kind, seed=seed, p=Fraction(1, 3) if kind == "bernoulli" else None)
    assert generate(spec, m).prefix(n) == generate(spec, n)
    assert generate(spec, n) == generate(spec, n)


def test_file_source(tmp_path):
    path = tmp_path / "x.bits"
    write_bits(BitSequence.from_string("110100"), path, "packed")
    spec = SourceSpec(kind="file", path=path)
    assert str(generate(spec, 4)) == "1101"
    with pytest.raises(ValueError):
        generate(spec, 7)


def test_ascii_ignores_whitespace():
    assert decode_bits(b"01 0\n1\t", "ascii01") == BitSequence.from_string("0101")


def test_ascii_bad_character_names_offset():
    with pytest.raises(BitFormatError) as excinfo:
        decode_bits(b"01x1", "ascii01")
    assert excinfo.value.offset == 2


def test_packed_layout():
    assert encode_bits(BitSequence.from_string("1" * 9), "packed") == (
        b"RLB1" + (9).to_bytes(8, "little") + b"\xff\x80"
    )
    assert encode_bits(BitSequence.empty(), "packed") == b"RLB1" + bytes(8)


@pytest.mark.parametrize(
    "data, offset",
    [
        (b"RLBX" + bytes(8), 0),
        (b"RLB1\x09", 5),
        (b"RLB1" + (9).to_bytes(8, "little") + b"\xff", 13),
        (b"RLB1" + (1).to_bytes(8, "little") + b"\x80\x00", 13),
    ],
)
def test_packed_errors_name_offset(data, offset):
    with pytest.raises(BitFormatError) as excinfo:
        decode_bits(data, "packed")
    assert excinfo.value.offset == offset


def test_sniff_format():
    assert sniff_format(b"RLB1" + bytes(8)) == "packed"
    assert sniff_format(b"0101") == "ascii01"


def test_file_examples(tmp_path):
    ascii_path = tmp_path / "a.txt"
    ascii_path.write_bytes(b"0101\n")
    assert read_bits(ascii_path, "ascii01") == BitSequence.from_string("0101")

    write_bits(BitSequence.from_string("010"), ascii_path, "ascii01")
    assert ascii_path.read_bytes() == b"010"

    packed_path = tmp_path / "p.bits"
    write_bits(BitSequence.from_string("1"), packed_path, "packed")
    assert read_bits(packed_path, "packed") == BitSequence.from_string("1")


@pytest.mark.parametrize("fmt", ["ascii01", "packed"])
def test_file_round_trip_over_many_sequences(tmp_path, fmt):
    rng = np.random.default_rng(11)
    path = tmp_path / "seq"
    for _ in range(1000):
        seq = BitSequence.from_array(rng.integers(0, 2, size=int(rng.integers(0, 200))))
        write_bits(seq, path, fmt)
        assert read_bits(path, fmt) == seq


@given(bit_lists)
def test_array_round_trip(bits):
    seq = BitSequence.from_array(bits)
    assert len(seq) == len(bits)
    assert seq.to_array().tolist() == bits
    assert seq.count_ones() == sum(bits)


@pytest.mark.slow
def test_uniform_acceptance_frequency():
    x = generate(SourceSpec(kind="uniform", seed=1), 2**20)
    assert abs(float(frequency(x)) - 0.5) < 0.0015


@pytest.mark.slow
def test_bernoulli_acceptance_frequency():
    x = generate(SourceSpec(kind="bernoulli", seed=7, p="1/4"), 2**20)
    assert abs(float(frequency(x)) - 0.25) < 0.0013
