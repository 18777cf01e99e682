import logging
import struct
import zlib
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from .errors import AlphabetTooSmall, CorruptStream, KeyOrder, NotInAlphabet, StructureCorrupt, UnexpectedEof
from .hierarchy import HierTree
from .optimal_tree import DynTree

logger = logging.getLogger(__name__)

MAGIC = b"ALC1"

# Кодовое слово: строка из символов '0' и '1'
BitString = str


class BitWriter:
    """Запись битов старшим битом вперед с дополнением нулями до байта."""

    __slots__ = ("_buf", "_bitbuf", "_bitcnt")

    def __init__(self) -> None:
        self._buf = bytearray()
        self._bitbuf = 0
        self._bitcnt = 0

    def write_bit(self, bit: int) -> None:
        self._bitbuf = (self._bitbuf << 1) | (bit & 1)
        self._bitcnt += 1
        if self._bitcnt == 8:
            self._buf.append(self._bitbuf)
            self._bitbuf = 0
            self._bitcnt = 0

    def write_bits(self, bits: BitString) -> None:
        for bit in bits:
            self.write_bit(1 if bit == "1" else 0)

    def num_written_bits(self) -> int:
        return len(self._buf) * 8 + self._bitcnt

    def get_bytes(self) -> bytes:
        if self._bitcnt == 0:
            return bytes(self._buf)
        return bytes(self._buf) + bytes([self._bitbuf << (8 - self._bitcnt)])


class BitReader:
    __slots__ = ("_data", "_pos")

    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def read_bit(self) -> int:
        if self._pos >= len(self._data) * 8:
            raise UnexpectedEof("поток битов закончился")
        byte = self._data[self._pos >> 3]
        bit = (byte >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    @property
    def position(self) -> int:
        return self._pos


@dataclass
class CoderState:
    """
    Состояние адаптивного алфавитного кодера.

    Дерево проиндексировано рангами символов; кодер и декодер меняют его
    одинаково, поэтому их состояния совпадают после каждого символа.

    Кодовое слово ведет к eps-узлу символа, а не к листу. У символа не меньше
    двух псевдо-листьев, поэтому алфавит {a, b} с равными весами получает
    двухбитные слова: eps-узел каждого символа является листом дерева высоты 2.
    """

    alphabet: List[Hashable]
    tree: DynTree
    emitted: int = 0
    ranks: Dict[Hashable, int] = field(default_factory=dict)

    def counts(self) -> List[int]:
        return [self.tree.record(rank).w for rank in range(len(self.alphabet))]

    def rank_of(self, symbol: Hashable) -> int:
        try:
            return self.ranks[symbol]
        except KeyError:
            raise NotInAlphabet(symbol) from None


def coder_new(
        alphabet: Sequence[Hashable],
        weights: Optional[Sequence[int]] = None,
        origin: Optional[Tuple[int, int]] = None,
        f: int = 0
) -> CoderState:
    """
    Создает кодер: все символы с весом 1 (либо заданными весами), дерево построено.

    Args:
        alphabet: Символы в строго возрастающем порядке
        weights: Начальные веса; по умолчанию все равны 1
        origin: Явные (W0, n0) начала фазы
        f: Число уровней иерархии дерева

    Returns:
        Новое состояние кодера

    Raises:
        AlphabetTooSmall: в алфавите меньше двух символов
        KeyOrder: символы не возрастают
    """
    symbols = list(alphabet)
    if len(symbols) < 2:
        raise AlphabetTooSmall(f"алфавит из {len(symbols)} символов")
    for left, right in zip(symbols, symbols[1:]):
        if not left < right:  # type: ignore[operator]
            raise KeyOrder(f"символы алфавита не возрастают: {left!r}, {right!r}")
    initial = list(weights) if weights is not None else [1] * len(symbols)
    if len(initial) != len(symbols):
        raise ValueError("число весов не совпадает с размером алфавита")
    tree = HierTree.build(list(enumerate(initial)), origin, f=f)
    return CoderState(symbols, tree, ranks={symbol: rank for rank, symbol in enumerate(symbols)})


def codeword(state: CoderState, symbol: Hashable) -> BitString:
    """Текущее кодовое слово символа без обновления весов."""
    return state.tree.codeword(state.rank_of(symbol))


def encode_symbol(state: CoderState, symbol: Hashable) -> BitString:
    """Выдает путь от корня до eps-узла, затем выполняет обращение к символу."""
    rank = state.rank_of(symbol)
    bits = state.tree.codeword(rank)
    state.tree.access(rank)
    state.emitted += 1
    return bits


def _walk(state: CoderState, reader: BitReader) -> int:
    node = state.tree.store.root
    while node.epsilon is None:
        if node.sub is not None:
            node = node.sub.root
            continue
        if not node.children:
            raise CorruptStream(f"путь в позиции {reader.position} не ведет к символу")
        bit = reader.read_bit()
        if len(node.children) == 1:
            if bit:
                raise CorruptStream(f"бит 1 у узла с одним ребенком в позиции {reader.position}")
            node = node.children[0]
        else:
            node = node.children[bit]
    return node.epsilon.key


def decode_symbol(state: CoderState, reader: BitReader) -> Hashable:
    """
    Спуск по дереву декодера до eps-узла с обновлением весов.

    Raises:
        CorruptStream: путь не ведет к eps-узлу
        UnexpectedEof: поток закончился внутри кодового слова
    """
    try:
        rank = _walk(state, reader)
    except StructureCorrupt as exc:
        raise CorruptStream(str(exc)) from exc
    state.tree.access(rank)
    state.emitted += 1
    return state.alphabet[rank]


def _pack_header(alphabet: Sequence[bytes], count: int) -> bytes:
    parts = [MAGIC, struct.pack(">I", len(alphabet))]
    for entry in alphabet:
        if len(entry) > 0xFFFF:
            raise ValueError("символ алфавита длиннее 65535 байт")
        parts.append(struct.pack(">H", len(entry)))
        parts.append(entry)
    parts.append(struct.pack(">Q", count))
    return b"".join(parts)


def encode_sequence(alphabet: Sequence[bytes], symbols: Iterable[bytes], f: int = 0) -> bytes:
    """
    Кодирует последовательность в контейнер ALC1.

    Args:
        alphabet: Символы алфавита (байтовые строки) по возрастанию
        symbols: Последовательность символов алфавита
        f: Число уровней иерархии дерева

    Returns:
        Заголовок, упакованные биты и CRC-32 полезной нагрузки
    """
    state = coder_new(alphabet, f=f)
    writer = BitWriter()
    for symbol in symbols:
        writer.write_bits(encode_symbol(state, symbol))
    payload = writer.get_bytes()
    logger.info(f"Закодировано {state.emitted} символов в {writer.num_written_bits()} бит")
    return _pack_header(alphabet, state.emitted) + payload + struct.pack(">I", zlib.crc32(payload))


class _Cursor:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise UnexpectedEof("контейнер обрезан")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk


def decode_sequence(data: bytes, f: int = 0) -> Tuple[List[bytes], List[bytes]]:
    """
    Декодирует контейнер ALC1.

    Returns:
        Алфавит и восстановленная последовательность символов

    Raises:
        CorruptStream: неверная сигнатура, CRC или путь в дереве
        UnexpectedEof: контейнер или поток битов обрезан
    """
    cursor = _Cursor(data)
    if cursor.take(4) != MAGIC:
        raise CorruptStream("неверная сигнатура контейнера")
    (size,) = struct.unpack(">I", cursor.take(4))
    alphabet = []
    for _ in range(size):
        (length,) = struct.unpack(">H", cursor.take(2))
        alphabet.append(cursor.take(length))
    (count,) = struct.unpack(">Q", cursor.take(8))
    if len(data) - cursor.offset < 4:
        raise UnexpectedEof("нет контрольной суммы")
    payload = data[cursor.offset:-4]
    (checksum,) = struct.unpack(">I", data[-4:])
    if zlib.crc32(payload) != checksum:
        raise CorruptStream("контрольная сумма не совпадает")
    state = coder_new(alphabet, f=f)
    reader = BitReader(payload)
    symbols = [decode_symbol(state, reader) for _ in range(count)]
    return alphabet, symbols  # type: ignore[return-value]
