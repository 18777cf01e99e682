import logging
import math
import re
from bisect import bisect_left
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence, Set, Tuple

from .errors import DuplicateKey, DynTreeError, NotFound, NotUnitWeight, UseDelete

logger = logging.getLogger(__name__)

Op = Tuple[str, Any]

OPERATIONS = ("S", "A", "I", "D", "X")

_NODE_PATTERN = re.compile(r"\((\d+),(\d+)\)")


@dataclass(frozen=True)
class StepResult:
    """Наблюдаемый результат шага: найденность, вес ключа, n, W и имя ошибки."""

    op: str
    key: Any
    found: bool
    weight: Optional[int]
    n: int
    W: int
    error: Optional[str] = None


class ReferenceDictionary:
    """Эталонный словарь на отсортированном списке."""

    def __init__(self) -> None:
        self._keys: List[Any] = []
        self._weights: List[int] = []

    @property
    def n(self) -> int:
        return len(self._keys)

    @property
    def W(self) -> int:
        return sum(self._weights)

    def _index(self, key: Any) -> int:
        index = bisect_left(self._keys, key)
        if index < len(self._keys) and self._keys[index] == key:
            return index
        return -1

    def weight(self, key: Any) -> Optional[int]:
        index = self._index(key)
        return self._weights[index] if index >= 0 else None

    def items(self) -> List[Tuple[Any, int]]:
        return list(zip(self._keys, self._weights))

    def access(self, key: Any) -> None:
        index = self._index(key)
        if index < 0:
            raise NotFound(key)
        self._weights[index] += 1

    def insert(self, key: Any) -> None:
        if self._index(key) >= 0:
            raise DuplicateKey(key)
        index = bisect_left(self._keys, key)
        self._keys.insert(index, key)
        self._weights.insert(index, 1)

    def decrement(self, key: Any) -> None:
        index = self._index(key)
        if index < 0:
            raise NotFound(key)
        if self._weights[index] == 1:
            raise UseDelete(key)
        self._weights[index] -= 1

    def delete(self, key: Any) -> None:
        index = self._index(key)
        if index < 0:
            raise NotFound(key)
        if self._weights[index] != 1:
            raise NotUnitWeight(key)
        del self._keys[index]
        del self._weights[index]

    def apply(self, op: str, key: Any) -> StepResult:
        handlers = {"A": self.access, "I": self.insert, "D": self.decrement, "X": self.delete}
        error = None
        try:
            if op != "S":
                handlers[op](key)
        except DynTreeError as exc:
            error = type(exc).__name__
        weight = self.weight(key)
        return StepResult(op, key, weight is not None, weight, self.n, self.W, error)


def reference_apply(ops: Sequence[Op]) -> List[StepResult]:
    """Проигрывает операции на эталонном словаре."""
    reference = ReferenceDictionary()
    return [reference.apply(op, key) for op, key in ops]


def _apply_to_structure(structure: Any, op: str, key: Any) -> None:
    if op == "S":
        structure.search(key)
    elif op == "A":
        structure.access(key)
    elif op == "I":
        structure.insert_element(key)
    elif op == "D":
        structure.decrement(key)
    elif op == "X":
        structure.delete_element(key)
    else:
        raise ValueError(f"неизвестная операция {op!r}")


def structure_apply(structure: Any, ops: Sequence[Op]) -> List[StepResult]:
    """
    Проигрывает те же операции на проверяемой структуре.

    Структура используется только через публичные методы словаря,
    поэтому результаты сравнимы с reference_apply поэлементно.
    """
    results = []
    for op, key in ops:
        error = None
        try:
            _apply_to_structure(structure, op, key)
        except DynTreeError as exc:
            error = type(exc).__name__
        found, _ = structure.search(key)
        weight = found.w if found is not None else None
        results.append(StepResult(op, key, found is not None, weight, structure.n, structure.W, error))
    return results


def _parse_levels(level_dump: str) -> List[List[Tuple[int, int]]]:
    rows = []
    for line in level_dump.strip().splitlines():
        rows.append([(int(count), int(children)) for count, children in _NODE_PATTERN.findall(line)])
    return rows


def exhaustive_epsilon_search(level_dump: str, run_start: int, run_length: int) -> Set[Tuple[int, int]]:
    """
    Все узлы высоты floor(log2 w'), чьи листья лежат внутри серии.

    Args:
        level_dump: Дамп уровней k-соседского дерева сверху вниз, узлы как (leaf_count,children)
        run_start: Позиция первого листа серии
        run_length: Длина серии 2w'

    Returns:
        Множество пар (позиция первого листа, число листьев) подходящих узлов
    """
    rows = _parse_levels(level_dump)
    height = (run_length // 2).bit_length() - 1
    # начала узлов уровня вычисляются снизу вверх по числу детей
    starts = list(range(len(rows[-1])))
    for depth in range(len(rows) - 1, len(rows) - 1 - height, -1):
        below, above = starts, []
        cursor = 0
        for _, children in rows[depth - 1]:
            above.append(below[cursor])
            cursor += children
        starts = above
    row = rows[len(rows) - 1 - height]
    run_end = run_start + run_length
    return {
        (start, count)
        for start, (count, _) in zip(starts, row)
        if run_start <= start and start + count <= run_end
    }


def depth_trace_audit(
        trace: Sequence[Op],
        c_audit: float,
        factory: Callable[[], Any]
) -> Optional[Tuple[int, Any, float]]:
    """
    Проигрывает трассу с полным аудитом после каждого шага.

    Args:
        trace: Операции (код, ключ)
        c_audit: Аддитивная константа оценки глубины
        factory: Создает пустую проверяемую структуру

    Returns:
        None, если все аудиты прошли, иначе (шаг, ключ, превышение над min(log2(W/w), log2 n))
    """
    structure = factory()
    for step, (op, key) in enumerate(trace, start=1):
        _apply_to_structure(structure, op, key)
        violation = structure.audit(c_audit)
        if violation is None:
            continue
        logger.info(f"Аудит не пройден на шаге {step}: {violation}")
        worst_key, worst_excess = None, -math.inf
        for candidate in structure.keys():
            excess = structure.depth_excess(candidate)
            if excess > worst_excess:
                worst_key, worst_excess = candidate, excess
        return step, worst_key, worst_excess
    return None
