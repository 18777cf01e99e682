import math
import random
import struct
import unittest
from typing import List

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.alphacoder import (
    MAGIC,
    BitReader,
    BitWriter,
    codeword,
    coder_new,
    decode_sequence,
    decode_symbol,
    encode_sequence,
    encode_symbol,
)
from src.errors import AlphabetTooSmall, CorruptStream, KeyOrder, NotInAlphabet, UnexpectedEof
from src.quantizer import entropy_of_sequence
from src.workloads import sample_keys

ALPHABET = [bytes([value]) for value in range(256)]


def _payload_bits(container: bytes, n: int) -> int:
    header = 4 + 4 + sum(2 + len(entry) for entry in ALPHABET[:n]) + 8
    return (len(container) - header - 4) * 8


class TestBits(unittest.TestCase):
    def test_msb_first_with_zero_padding(self) -> None:
        writer = BitWriter()
        writer.write_bits("101")
        self.assertEqual(writer.num_written_bits(), 3)
        self.assertEqual(writer.get_bytes(), bytes([0b10100000]))

    def test_reader_eof(self) -> None:
        reader = BitReader(bytes([0xFF]))
        for _ in range(8):
            self.assertEqual(reader.read_bit(), 1)
        with self.assertRaises(UnexpectedEof):
            reader.read_bit()


class TestCoderNew(unittest.TestCase):
    def test_alphabet_too_small(self) -> None:
        with self.assertRaises(AlphabetTooSmall):
            coder_new([b"a"])

    def test_unsorted_alphabet(self) -> None:
        with self.assertRaises(KeyOrder):
            coder_new([b"b", b"a"])

    def test_two_symbols(self) -> None:
        state = coder_new([b"a", b"b"])
        self.assertEqual([codeword(state, b"a"), codeword(state, b"b")], ["00", "10"])

    def test_four_key_weights_codeword(self) -> None:
        state = coder_new([b"a", b"b", b"c", b"d"], weights=[1, 2, 4, 1], origin=(5, 4))
        self.assertEqual(codeword(state, b"c"), "10")

    def test_unknown_symbol(self) -> None:
        state = coder_new([b"a", b"b"])
        with self.assertRaises(NotInAlphabet):
            encode_symbol(state, b"z")


def _assert_prefix_free_and_ordered(words: List[str]) -> None:
    for left, right in zip(words, words[1:]):
        assert left < right
    for i, word in enumerate(words):
        for j, other in enumerate(words):
            if i != j:
                assert not other.startswith(word)


def test_codewords_prefix_free_and_alphabetic_after_every_symbol() -> None:
    rng = random.Random(17)
    alphabet = ALPHABET[:24]
    encoder, decoder = coder_new(alphabet), coder_new(alphabet)
    for _ in range(600):
        symbol = rng.choice(alphabet[:6]) if rng.random() < 0.7 else rng.choice(alphabet)
        _assert_prefix_free_and_ordered([codeword(encoder, entry) for entry in alphabet])
        writer = BitWriter()
        writer.write_bits(encode_symbol(encoder, symbol))
        assert decode_symbol(decoder, BitReader(writer.get_bytes())) == symbol
        assert encoder.tree.dump() == decoder.tree.dump()


def test_repeated_symbol_codeword_shrinks() -> None:
    state = coder_new([b"a", b"b"])
    for _ in range(200):
        encode_symbol(state, b"a")
    assert len(codeword(state, b"a")) <= 8
    assert state.emitted == 200
    assert state.counts() == [201, 1]


@given(st.binary(max_size=300))
@settings(max_examples=80, deadline=None)
def test_round_trip(data: bytes) -> None:
    container = encode_sequence(ALPHABET, [bytes([value]) for value in data])
    alphabet, symbols = decode_sequence(container)
    assert alphabet == ALPHABET
    assert b"".join(symbols) == data


def test_empty_input_has_empty_payload() -> None:
    container = encode_sequence(ALPHABET[:2], [])
    assert container.startswith(MAGIC)
    assert struct.unpack(">Q", container[-12:-4]) == (0,)
    assert _payload_bits(container, 2) == 0
    assert decode_sequence(container) == (ALPHABET[:2], [])


class TestCorruption(unittest.TestCase):
    def setUp(self) -> None:
        self.container = encode_sequence(ALPHABET[:4], [ALPHABET[i % 4] for i in range(50)])

    def test_flipped_bit(self) -> None:
        damaged = bytearray(self.container)
        damaged[-6] ^= 0x10
        with self.assertRaises(CorruptStream):
            decode_sequence(bytes(damaged))

    def test_bad_magic(self) -> None:
        with self.assertRaises(CorruptStream):
            decode_sequence(b"XXXX" + self.container[4:])

    def test_truncated_header(self) -> None:
        with self.assertRaises(UnexpectedEof):
            decode_sequence(self.container[:6])


def test_zipf_text_payload_bound() -> None:
    n, m = 64, 30000
    keys = sample_keys("zipf", n, m, seed=13)
    container = encode_sequence(ALPHABET[:n], [ALPHABET[key] for key in keys])
    H = entropy_of_sequence(keys)
    assert _payload_bits(container, n) <= m * (H + 6) + n * (math.log2(n) + 6) + 8
    _, symbols = decode_sequence(container)
    assert [symbol[0] for symbol in symbols] == keys


@pytest.mark.parametrize("j", [1, 3, 5])
def test_uniform_payload_close_to_entropy(j: int) -> None:
    n, m = 2 ** j, 4000
    keys = sample_keys("uniform", n, m, seed=j)
    container = encode_sequence(ALPHABET[:n], [ALPHABET[key] for key in keys])
    assert _payload_bits(container, n) / m <= j + 6 + n * (j + 6) / m
