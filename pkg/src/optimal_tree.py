import logging
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, NamedTuple, Optional, Protocol, Sequence, Set, Tuple

from .errors import (
    DuplicateKey,
    EmptyBuild,
    KeyOrder,
    NotFound,
    NotUnitWeight,
    StructureCorrupt,
    UseDelete,
    Violation,
)
from .kneighbor_tree import (
    BEFORE_ALL,
    DUMMY,
    KNeighborTree,
    MovedReport,
    TreeNode,
    iter_subtree_leaves,
    leftmost_leaf,
    rightmost_leaf,
)
from .quantizer import PhaseState, quantize

logger = logging.getLogger(__name__)

Key = Any

# Аддитивная константа аудита глубины
C_AUDIT = 8


class PseudoLeafStore(Protocol):
    """Дерево псевдо-листьев: плоское k-соседское или иерархическое."""

    relinks: int

    @property
    def root(self) -> TreeNode: ...

    @property
    def leaf_count(self) -> int: ...

    def insert_leaf_after(self, anchor: Optional[TreeNode], payload: Any) -> Tuple[TreeNode, MovedReport]: ...

    def delete_leaf(self, leaf: TreeNode) -> MovedReport: ...

    def locate_epsilon(self, run: Sequence[TreeNode], start: int, length: int) -> TreeNode: ...

    def leaves(self) -> Iterator[TreeNode]: ...

    def check_invariants(self) -> Optional[Violation]: ...


class WeightPair(NamedTuple):
    w: int
    w_quant: int


@dataclass(eq=False)
class ElementRecord:
    """Элемент словаря: ключ, веса, серия псевдо-листьев и его eps-узел."""

    key: Key
    w: int
    w_quant: int
    run: List[TreeNode] = field(default_factory=list)
    epsilon: Optional[TreeNode] = None

    @property
    def weights(self) -> WeightPair:
        return WeightPair(self.w, self.w_quant)

    def __repr__(self) -> str:
        return f"ElementRecord(key={self.key!r}, w={self.w}, w'={self.w_quant})"


@dataclass
class AccessStats:
    """Счетчики последней операции."""

    comparisons: int = 0
    epsilon_depth: int = 0
    structural_ops: int = 0
    rebuilds: int = 0


def owned_by(node: TreeNode, record: ElementRecord) -> bool:
    """Все псевдо-листья поддерева принадлежат элементу (серии непрерывны)."""
    return leftmost_leaf(node).payload is record and rightmost_leaf(node).payload is record


def combined_depth(node: TreeNode) -> int:
    """Глубина узла; ребра-мосты к корням мини-деревьев не считаются."""
    depth = 0
    current: Optional[TreeNode] = node
    while current is not None:
        if current.parent is not None:
            depth += 1
        current = current.up()
    return depth


def _validate_elements(elements: Iterable[Tuple[Key, int]]) -> List[Tuple[Key, int]]:
    pairs = list(elements)
    if not pairs:
        raise EmptyBuild("нет элементов для построения")
    for (left, _), (right, _) in zip(pairs, pairs[1:]):
        if not left < right:
            raise KeyOrder(f"ключи не возрастают: {left!r}, {right!r}")
    for key, weight in pairs:
        if weight < 1:
            raise ValueError(f"вес ключа {key!r} меньше 1")
    return pairs


class DynTree:
    """
    Динамическое почти оптимальное дерево поиска.

    Глубина eps-узла элемента не превышает min(log(W/w_i), log n) + O(1).
    Элементы хранятся сериями из 2w' псевдо-листьев в k-соседском дереве.
    """

    default_c_audit = C_AUDIT

    def __init__(self) -> None:
        self._store: Optional[PseudoLeafStore] = None
        self._records: Dict[Key, ElementRecord] = {}
        self._keys: List[Key] = []
        self.phase: Optional[PhaseState] = None
        self.k = 0
        self.rebuilds = 0
        self.structural_ops_total = 0

    @classmethod
    def build(
            cls,
            elements: Iterable[Tuple[Key, int]],
            origin: Optional[Tuple[int, int]] = None,
            **options: Any
    ) -> "DynTree":
        """
        Строит дерево с новой фазой.

        Args:
            elements: Пары (ключ, вес) со строго возрастающими ключами
            origin: Явные (W0, n0) начала фазы вместо текущих W и n
            options: Параметры конструктора подкласса

        Returns:
            Новое дерево
        """
        tree = cls(**options)
        tree._rebuild(_validate_elements(elements), origin)
        return tree

    @property
    def store(self) -> PseudoLeafStore:
        if self._store is None:
            raise StructureCorrupt("структура пуста")
        return self._store

    @property
    def n(self) -> int:
        return len(self._keys)

    @property
    def W(self) -> int:
        return self.phase.W if self.phase is not None else 0

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, key: Key) -> bool:
        return key in self._records

    def keys(self) -> List[Key]:
        return list(self._keys)

    def record(self, key: Key) -> ElementRecord:
        try:
            return self._records[key]
        except KeyError:
            raise NotFound(key) from None

    def weights(self) -> List[Tuple[Key, int]]:
        return [(key, self._records[key].w) for key in self._keys]

    def _make_store(self, payloads: List[ElementRecord], n: int) -> PseudoLeafStore:
        return KNeighborTree.bulk_build(payloads, self.k, pad=True)

    def _rebuild(self, pairs: List[Tuple[Key, int]], origin: Optional[Tuple[int, int]] = None) -> None:
        W, n = sum(weight for _, weight in pairs), len(pairs)
        if origin is not None:
            self.phase = PhaseState(W0=origin[0], n0=origin[1], W=W, n=n)
        else:
            self.phase = PhaseState.start(W, n)
        records = [ElementRecord(key, weight, quantize(weight, self.phase)) for key, weight in pairs]
        payloads = [record for record in records for _ in range(2 * record.w_quant)]
        self.k = max(2, math.ceil(math.log2(n))) if n > 1 else 2
        self._store = self._make_store(payloads, n)
        for leaf in self._store.leaves():
            if isinstance(leaf.payload, ElementRecord):
                leaf.payload.run.append(leaf)
        self._records = {record.key: record for record in records}
        self._keys = [record.key for record in records]
        for record in records:
            node = self.find_epsilon(record)
            node.epsilon = record
            record.epsilon = node
        self._recompute_subtree(self._store.root)

    def find_epsilon(self, record: ElementRecord) -> TreeNode:
        """
        Находит eps-узел: предок высоты floor(log2 w') над w'-м листом серии.

        Raises:
            StructureCorrupt: найденный узел содержит чужие листья
        """
        store = self.store
        if len(self._records) <= 1 and owned_by(store.root, record):
            return store.root
        node = store.locate_epsilon(record.run, 0, len(record.run))
        if not owned_by(node, record):
            raise StructureCorrupt(f"eps-узел ключа {record.key!r} содержит чужие листья")
        return node

    def _place_epsilon(self, record: ElementRecord, dirty: Set[TreeNode]) -> None:
        old = record.epsilon
        node = self.find_epsilon(record)
        if old is node and node.epsilon is record:
            return
        if old is not None and old.epsilon is record:
            old.epsilon = None
            if old.alive:
                dirty.add(old)
        node.epsilon = record
        record.epsilon = node
        dirty.add(node)

    def _recompute(self, node: TreeNode) -> bool:
        if node.epsilon is not None:
            max_key = node.epsilon.key
        else:
            max_key = None
            for child in reversed(node.down()):
                if child.max_key is not None:
                    max_key = child.max_key
                    break
        router = node.children[0].max_key if len(node.children) == 2 else None
        changed = max_key != node.max_key or router != node.router_key
        node.max_key, node.router_key = max_key, router
        return changed

    def _recompute_subtree(self, root: TreeNode) -> None:
        order: List[TreeNode] = []
        stack = [root]
        while stack:
            node = stack.pop()
            order.append(node)
            stack.extend(node.down())
        for node in reversed(order):
            self._recompute(node)
        self._refresh_paths([root])

    def _refresh_paths(self, nodes: Iterable[TreeNode]) -> None:
        """Пересчитывает ключи маршрутизации вверх от измененных узлов."""
        for start in nodes:
            current: Optional[TreeNode] = start
            while current is not None and current.alive:
                if not self._recompute(current) and current is not start:
                    break
                current = current.up()

    def _apply_report(self, report: MovedReport, extra: Iterable[ElementRecord]) -> None:
        affected: Set[ElementRecord] = set(extra)
        for leaf in report.boundary_leaves():
            if isinstance(leaf.payload, ElementRecord):
                affected.add(leaf.payload)
        for root in report.rebuilt:
            if root.alive:
                for leaf in iter_subtree_leaves(root):
                    if isinstance(leaf.payload, ElementRecord):
                        affected.add(leaf.payload)
                self._recompute_subtree(root)
        dirty = {node for node in report.touched if node.alive}
        for record in affected:
            if self._records.get(record.key) is record:
                self._place_epsilon(record, dirty)
        self._refresh_paths(dirty)

    def _descend(self, key: Key) -> Tuple[TreeNode, int]:
        node = self.store.root
        depth = 0
        while node.epsilon is None:
            below = [child for child in node.down() if child.max_key is not None]
            if not below:
                raise StructureCorrupt("спуск не дошел до eps-узла")
            if node.sub is None:
                depth += 1
            if len(below) == 2:
                node = below[0] if key <= node.router_key else below[1]
            else:
                node = below[0]
        return node, depth

    def search(self, key: Key) -> Tuple[Optional[ElementRecord], AccessStats]:
        """
        Спуск от корня по ключам маршрутизации до eps-узла.

        Returns:
            Запись элемента (None, если ключа нет) и статистика; comparisons = глубина eps-узла
        """
        if self._store is None:
            return None, AccessStats(rebuilds=self.rebuilds)
        node, depth = self._descend(key)
        record = node.epsilon
        stats = AccessStats(comparisons=depth, epsilon_depth=depth, rebuilds=self.rebuilds)
        return (record if record.key == key else None), stats

    def epsilon_depth(self, key: Key) -> int:
        node = self.record(key).epsilon
        if node is None:
            raise StructureCorrupt(f"у ключа {key!r} нет eps-узла")
        return combined_depth(node)

    def _finish(self, stats: AccessStats, relinks_before: int) -> AccessStats:
        stats.structural_ops = self.store.relinks - relinks_before if self._store is not None else 0
        self.structural_ops_total += stats.structural_ops
        self._maybe_rebuild()
        stats.rebuilds = self.rebuilds
        return stats

    def _maybe_rebuild(self) -> None:
        if self.phase is None or not self._keys:
            return
        if self.phase.should_end() or self.phase.should_shrink():
            logger.info(
                f"Перестройка фазы: W0={self.phase.W0} n0={self.phase.n0} -> W={self.phase.W} n={self.phase.n}"
            )
            self._rebuild(self.weights())
            self.rebuilds += 1

    def _grow(self, record: ElementRecord) -> None:
        report = MovedReport()
        anchor = record.run[-1]
        for _ in range(2):
            leaf, step = self.store.insert_leaf_after(anchor, record)
            record.run.append(leaf)
            report.merge(step)
            anchor = leaf
        self._apply_report(report, [record])

    def _shrink(self, record: ElementRecord) -> None:
        report = MovedReport()
        for _ in range(2):
            leaf = record.run.pop()
            report.merge(self.store.delete_leaf(leaf))
        self._apply_report(report, [record])

    def access(self, key: Key) -> AccessStats:
        """
        Обращение к элементу: w += 1, при росте w' две новые псевдо-листа справа от серии.

        Raises:
            NotFound: ключа нет в словаре
        """
        record = self.record(key)
        assert self.phase is not None
        _, stats = self.search(key)
        relinks_before = self.store.relinks
        record.w += 1
        self.phase.W += 1
        new_quant = quantize(record.w, self.phase)
        if new_quant > record.w_quant:
            record.w_quant = new_quant
            self._grow(record)
        return self._finish(stats, relinks_before)

    def insert_element(self, key: Key) -> AccessStats:
        """
        Вставка нового элемента с весом 1 после серии предшественника.

        Raises:
            DuplicateKey: ключ уже есть
        """
        if key in self._records:
            raise DuplicateKey(key)
        if self._store is None:
            self._rebuild([(key, 1)])
            return AccessStats(rebuilds=self.rebuilds)
        assert self.phase is not None
        relinks_before = self.store.relinks
        self.phase.W += 1
        self.phase.n += 1
        record = ElementRecord(key, 1, quantize(1, self.phase))
        index = bisect_left(self._keys, key)
        anchor = self._records[self._keys[index - 1]].run[-1] if index > 0 else BEFORE_ALL
        report = MovedReport()
        for _ in range(2 * record.w_quant):
            leaf, step = self.store.insert_leaf_after(anchor, record)
            record.run.append(leaf)
            report.merge(step)
            anchor = leaf
        self._keys.insert(index, key)
        self._records[key] = record
        extra = list(self._records.values()) if len(self._records) <= 2 else [record]
        self._apply_report(report, extra)
        depth = self.epsilon_depth(key)
        stats = AccessStats(comparisons=depth, epsilon_depth=depth)
        return self._finish(stats, relinks_before)

    def decrement(self, key: Key) -> AccessStats:
        """
        Уменьшение веса на 1; при уменьшении w' удаляются два правых листа серии.

        Raises:
            NotFound: ключа нет
            UseDelete: вес равен 1
        """
        record = self.record(key)
        if record.w == 1:
            raise UseDelete(key)
        assert self.phase is not None
        _, stats = self.search(key)
        relinks_before = self.store.relinks
        record.w -= 1
        self.phase.W -= 1
        new_quant = quantize(record.w, self.phase)
        if new_quant < record.w_quant:
            record.w_quant = new_quant
            self._shrink(record)
        return self._finish(stats, relinks_before)

    def delete_element(self, key: Key) -> AccessStats:
        """
        Удаление элемента веса 1 вместе с его серией.

        Raises:
            NotFound: ключа нет
            NotUnitWeight: вес больше 1
        """
        record = self.record(key)
        if record.w != 1:
            raise NotUnitWeight(key)
        assert self.phase is not None
        _, stats = self.search(key)
        if len(self._keys) == 1:
            self._store = None
            self._records.clear()
            self._keys.clear()
            self.phase = None
            return stats
        relinks_before = self.store.relinks
        report = MovedReport()
        for leaf in reversed(record.run):
            report.merge(self.store.delete_leaf(leaf))
        record.run = []
        dirty: Set[TreeNode] = set()
        if record.epsilon is not None and record.epsilon.epsilon is record:
            record.epsilon.epsilon = None
            if record.epsilon.alive:
                dirty.add(record.epsilon)
        record.epsilon = None
        self._keys.remove(key)
        del self._records[key]
        self.phase.W -= 1
        self.phase.n -= 1
        self._refresh_paths(dirty)
        extra = list(self._records.values()) if len(self._records) <= 1 else []
        self._apply_report(report, extra)
        return self._finish(stats, relinks_before)

    def _epsilon_height_ok(self, record: ElementRecord, node: TreeNode) -> bool:
        if len(self._records) == 1 and node is self.store.root:
            return True
        return node.height == record.w_quant.bit_length() - 1

    def depth_excess(self, key: Key) -> float:
        """Превышение глубины eps-узла над min(log2(W/w), log2 n)."""
        record = self.record(key)
        bound = min(math.log2(self.W / record.w), math.log2(self.n))
        return self.epsilon_depth(key) - bound

    def max_depth_excess(self) -> float:
        return max((self.depth_excess(key) for key in self._keys), default=0.0)

    def audit(self, c_audit: Optional[int] = None) -> Optional[Violation]:
        """
        Полная проверка: дерево, серии, квантование, eps-узлы, маршрутизация и оценка глубины.

        Args:
            c_audit: Аддитивная константа оценки глубины

        Returns:
            None, если нарушений нет, иначе первое нарушение
        """
        c = self.default_c_audit if c_audit is None else c_audit
        if self._store is None:
            if self._records:
                return Violation("словарь", "есть элементы, но нет дерева")
            return None
        assert self.phase is not None
        violation = self._store.check_invariants()
        if violation is not None:
            return violation
        if self.phase.n != len(self._keys) or self.phase.W != sum(r.w for r in self._records.values()):
            return Violation("фаза", "W или n не совпадают с элементами")
        real_leaves = [leaf for leaf in self._store.leaves() if leaf.payload is not DUMMY]
        expected = [leaf for key in self._keys for leaf in self._records[key].run]
        if len(real_leaves) != len(expected) or any(a is not b for a, b in zip(real_leaves, expected)):
            return Violation("серии", "порядок листьев не совпадает с сериями в порядке ключей")
        for key in self._keys:
            record = self._records[key]
            where = f"ключ {key!r}"
            if len(record.run) != 2 * record.w_quant:
                return Violation(where, f"длина серии {len(record.run)} != 2w' = {2 * record.w_quant}")
            if record.w_quant != quantize(record.w, self.phase):
                return Violation(where, "w' не совпадает с квантованием")
            if any(leaf.payload is not record for leaf in record.run):
                return Violation(where, "лист серии принадлежит другому элементу")
            node = record.epsilon
            if node is None or not node.alive or node.epsilon is not record:
                return Violation(where, "eps-узел не установлен")
            if not owned_by(node, record):
                return Violation(where, "eps-узел содержит чужие листья")
            if not self._epsilon_height_ok(record, node):
                return Violation(where, f"высота eps-узла {node.height} при w' = {record.w_quant}")
            reached, depth = self._descend(key)
            if reached is not node:
                return Violation(where, "поиск не приводит к eps-узлу элемента")
            bound = min(math.log2(self.W / record.w), math.log2(self.n)) + c
            if depth > bound + 1e-9:
                return Violation(where, f"глубина {depth} > {bound:.3f}")
        return None

    def _leaf_positions(self) -> Dict[int, int]:
        return {id(leaf): index for index, leaf in enumerate(self.store.leaves())}

    def epsilon_span(self, key: Key) -> Tuple[int, int]:
        """Позиция первого листа eps-узла и число его листьев."""
        node = self.record(key).epsilon
        assert node is not None
        positions = self._leaf_positions()
        leaves = list(iter_subtree_leaves(node))
        return positions[id(leaves[0])], len(leaves)

    def dump(self) -> str:
        """Снимок: строки `key w w' run_start run_len eps_height eps_depth` по возрастанию ключей."""
        if self._store is None:
            return ""
        positions = self._leaf_positions()
        lines = []
        for key in self._keys:
            record = self._records[key]
            assert record.epsilon is not None
            lines.append(" ".join(str(value) for value in (
                key, record.w, record.w_quant, positions[id(record.run[0])], len(record.run),
                record.epsilon.height, combined_depth(record.epsilon),
            )))
        return "\n".join(lines)

    def codeword(self, key: Key) -> str:
        """Путь от корня до eps-узла: 0 - левое ребро (или единственное), 1 - правое."""
        node = self.record(key).epsilon
        assert node is not None
        bits = []
        current = node
        while True:
            parent = current.up()
            if parent is None:
                break
            if current.parent is not None:
                bits.append("1" if len(parent.children) == 2 and parent.children[1] is current else "0")
            current = parent
        return "".join(reversed(bits))


__all__ = [
    "AccessStats", "C_AUDIT", "DynTree", "ElementRecord", "PseudoLeafStore", "WeightPair",
    "combined_depth", "owned_by",
]
