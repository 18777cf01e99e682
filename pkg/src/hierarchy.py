import logging
import math
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .errors import InvalidHandle, StructureCorrupt, Violation
from .kneighbor_tree import KNeighborTree, MovedReport, TreeNode
from .optimal_tree import C_AUDIT, AccessStats, DynTree, ElementRecord, Key, PseudoLeafStore

logger = logging.getLogger(__name__)

# Вклад одного уровня иерархии в аддитивную константу глубины
C_F = 4


def group_size(n: int) -> int:
    """Размер группы g = max(4, 2 * ceil(log2 n)^2)."""
    if n <= 1:
        return 4
    return max(4, 2 * math.ceil(math.log2(n)) ** 2)


def partition_sizes(total: int, g: int) -> List[int]:
    """Размеры групп по g, последняя группа забирает остаток и лежит в [g, 2g)."""
    if total < 2 * g:
        return [total]
    count = total // g
    return [g] * (count - 1) + [total - g * (count - 1)]


@dataclass(eq=False)
class Group:
    """Группа смежных псевдо-листьев со своим мини-деревом."""

    store: Union[KNeighborTree, "HierStore"]
    owner: "HierStore"
    index: int = 0
    macro_leaf: Optional[TreeNode] = None

    @property
    def size(self) -> int:
        return self.store.leaf_count

    def __repr__(self) -> str:
        return f"Group(index={self.index}, size={self.size})"


@dataclass
class HierConfig:
    f: int = 1
    c_f: int = C_F


def _retire(store: Union[KNeighborTree, "HierStore"]) -> None:
    """Помечает удаленными все внутренние узлы хранилища; листья остаются живыми."""
    stack = [store.root]
    while stack:
        node = stack.pop()
        below = node.down()
        if below:
            node.alive = False
            stack.extend(below)


def _add_weight(group: Group, delta: int) -> None:
    node = group.macro_leaf
    while node is not None:
        node.weight += delta
        node = node.parent


class HierStore:
    """
    Двухуровневое хранилище: макро-дерево над группами и мини-деревья внутри групп.

    Макро-лист ссылается на хранилище группы через поле sub; корень мини-дерева
    поднимается к макро-листу через bridge. Ребра-мосты не увеличивают глубину.
    Узлы макро-дерева несут вес: число псевдо-листьев в группах под ними.
    Мини-деревья используют k = max(2, ceil(log2 g)).
    """

    def __init__(self, k: int, f: int, g: int) -> None:
        if f < 1:
            raise ValueError("число уровней иерархии должно быть не меньше 1")
        self.k = k
        self.f = f
        self.g = g
        self.mini_k = max(2, math.ceil(math.log2(g)))
        self.relinks = 0
        self._groups: List[Group] = []
        self._macro: Optional[KNeighborTree] = None

    @classmethod
    def build(cls, payloads: Sequence[Any], k: int, f: int, g: Optional[int] = None) -> "HierStore":
        """
        Строит хранилище над новыми листьями.

        Args:
            payloads: Полезные нагрузки листьев слева направо
            k: Параметр соседства
            f: Число уровней иерархии (>= 1)
            g: Размер группы; по умолчанию по числу листьев

        Returns:
            Новое хранилище
        """
        return cls.from_leaves([TreeNode(0, payload) for payload in payloads], k, f, g)

    @classmethod
    def from_leaves(cls, leaves: Sequence[TreeNode], k: int, f: int, g: Optional[int] = None) -> "HierStore":
        store = cls(k, f, group_size(len(leaves)) if g is None else g)
        groups = []
        start = 0
        for size in partition_sizes(len(leaves), store.g):
            groups.append(Group(store._make_mini(leaves[start:start + size]), store))
            start += size
        store._macro = KNeighborTree.bulk_build(groups, k, pad=False)
        store.relinks += store._macro.relinks
        for index, (group, macro_leaf) in enumerate(zip(groups, store._macro.leaves())):
            group.index = index
            store._attach(group, macro_leaf)
        store._groups = groups
        store._reweigh()
        return store

    def _make_mini(self, leaves: Sequence[TreeNode]) -> Union[KNeighborTree, "HierStore"]:
        if self.f == 1:
            mini: Union[KNeighborTree, HierStore] = KNeighborTree.from_leaves(leaves, self.mini_k)
        else:
            mini = HierStore.from_leaves(leaves, self.mini_k, self.f - 1)
        self.relinks += mini.relinks
        return mini

    def _attach(self, group: Group, macro_leaf: TreeNode) -> None:
        group.macro_leaf = macro_leaf
        macro_leaf.payload = group
        macro_leaf.sub = group.store
        group.store.bridge = macro_leaf

    def _reweigh(self) -> None:
        """Пересчитывает веса макро-дерева снизу вверх после его перестройки."""
        for row in reversed(self.macro.levels()):
            for node in row:
                if node.children:
                    node.weight = sum(child.weight for child in node.children)
                else:
                    node.weight = node.payload.size

    @property
    def macro(self) -> KNeighborTree:
        if self._macro is None:
            raise StructureCorrupt("макро-дерево не построено")
        return self._macro

    @property
    def root(self) -> TreeNode:
        return self.macro.root

    @property
    def bridge(self) -> Optional[TreeNode]:
        return self.macro.bridge

    @bridge.setter
    def bridge(self, node: Optional[TreeNode]) -> None:
        self.macro.bridge = node

    @property
    def leaf_count(self) -> int:
        return self.macro.root.weight

    @property
    def groups(self) -> List[Group]:
        return list(self._groups)

    def leaves(self) -> Iterator[TreeNode]:
        for group in self._groups:
            yield from group.store.leaves()

    def group_of(self, leaf: TreeNode) -> Group:
        """Группа этого хранилища, содержащая лист (подъем через мосты)."""
        if not leaf.alive:
            raise InvalidHandle("лист удален")
        node: Optional[TreeNode] = leaf
        while node is not None:
            payload = node.payload
            if node.sub is not None and isinstance(payload, Group) and payload.owner is self:
                return payload
            node = node.up()
        raise InvalidHandle("лист не принадлежит хранилищу")

    def insert_leaf_after(self, anchor: Optional[TreeNode], payload: Any) -> Tuple[TreeNode, MovedReport]:
        """Вставка листа в группу якоря; группа размера 2g расщепляется пополам."""
        group = self._groups[0] if anchor is None else self.group_of(anchor)
        relinks_before = self.relinks
        leaf, report = group.store.insert_leaf_after(anchor, payload)
        self.relinks += report.relinks
        _add_weight(group, 1)
        if group.size >= 2 * self.g:
            report.merge(self._split(group))
        report.relinks = self.relinks - relinks_before
        return leaf, report

    def delete_leaf(self, leaf: TreeNode) -> MovedReport:
        """Удаление листа; группа меньше g/2 сливается с соседней."""
        group = self.group_of(leaf)
        relinks_before = self.relinks
        report = group.store.delete_leaf(leaf)
        self.relinks += report.relinks
        _add_weight(group, -1)
        if 2 * group.size < self.g and len(self._groups) > 1:
            report.merge(self._merge(group))
        report.relinks = self.relinks - relinks_before
        return report

    def _reindex(self, start: int = 0) -> None:
        for index in range(start, len(self._groups)):
            self._groups[index].index = index

    def _split(self, group: Group) -> MovedReport:
        logger.debug(f"Расщепление группы {group.index} размера {group.size}")
        store = group.store
        if isinstance(store, KNeighborTree):
            right_store, report = store.split()
            self.relinks += report.relinks
        else:
            leaves = list(store.leaves())
            _retire(store)
            middle = len(leaves) // 2
            report = MovedReport()
            group.store = self._make_mini(leaves[:middle])
            right_store = self._make_mini(leaves[middle:])
            report.rebuilt.extend([group.store.root, right_store.root])
        right = Group(right_store, self)
        assert group.macro_leaf is not None
        self._attach(group, group.macro_leaf)
        macro_leaf, macro_report = self.macro.insert_leaf_after(group.macro_leaf, right)
        self.relinks += macro_report.relinks
        self._attach(right, macro_leaf)
        self._groups.insert(group.index + 1, right)
        self._reindex(group.index)
        self._reweigh()
        report.merge(macro_report)
        report.touched.add(group.macro_leaf)
        return report

    def _merge(self, group: Group) -> MovedReport:
        index = group.index
        first, second = (
            (group, self._groups[index + 1]) if index + 1 < len(self._groups) else (self._groups[index - 1], group)
        )
        logger.debug(f"Слияние групп {first.index} и {second.index}")
        leaves = list(first.store.leaves()) + list(second.store.leaves())
        _retire(first.store)
        _retire(second.store)
        report = MovedReport()
        sizes = partition_sizes(len(leaves), self.g)
        first.store = self._make_mini(leaves[:sizes[0]])
        assert first.macro_leaf is not None and second.macro_leaf is not None
        self._attach(first, first.macro_leaf)
        report.touched.add(first.macro_leaf)
        report.rebuilt.append(first.store.root)
        if len(sizes) == 2:
            second.store = self._make_mini(leaves[sizes[0]:])
            self._attach(second, second.macro_leaf)
            report.touched.add(second.macro_leaf)
            report.rebuilt.append(second.store.root)
            self._reweigh()
            return report
        second.macro_leaf.sub = None
        macro_report = self.macro.delete_leaf(second.macro_leaf)
        self.relinks += macro_report.relinks
        report.merge(macro_report)
        self._groups.pop(second.index)
        self._reindex(first.index)
        self._reweigh()
        return report

    def _first_index_outside(self, run: Sequence[TreeNode], start: int, length: int, group: Group) -> int:
        """Первый индекс отрезка, чей лист лежит правее группы (бинарный поиск)."""
        lo, hi = start, start + length
        while lo < hi:
            middle = (lo + hi) // 2
            if self.group_of(run[middle]).index <= group.index:
                lo = middle + 1
            else:
                hi = middle
        return lo

    def locate_epsilon(self, run: Sequence[TreeNode], start: int, length: int) -> TreeNode:
        """
        eps-узел отрезка серии run[start:start+length].

        Три и более полностью покрытые группы дают узел макро-дерева, одна или две -
        корень мини-дерева; иначе поиск продолжается в группе с наибольшим пересечением.
        """
        end = start + length - 1
        first = self.group_of(run[start])
        last = self.group_of(run[end])
        if first is last:
            return first.store.locate_epsilon(run, start, length)
        lo = first.index if next(first.store.leaves()) is run[start] else first.index + 1
        hi = last.index if _last_leaf(last.store) is run[end] else last.index - 1
        covered = hi - lo + 1
        if covered >= 3:
            # узел высоты floor(log2 kappa) над 2*kappa - 1 покрытыми группами
            kappa = (covered + 1) // 2
            anchor = self._groups[lo + kappa - 1].macro_leaf
            assert anchor is not None
            return self.macro.ancestor_at_height(anchor, kappa.bit_length() - 1)
        if covered >= 1:
            return self._groups[lo].store.root
        boundary = self._first_index_outside(run, start, length, first)
        left_length, right_length = boundary - start, end + 1 - boundary
        if left_length >= right_length:
            return first.store.locate_epsilon(run, start, left_length)
        return last.store.locate_epsilon(run, boundary, right_length)

    def check_invariants(self) -> Optional[Violation]:
        """Проверяет макро-дерево, мини-деревья, мосты, размеры групп и веса макро-узлов."""
        violation = self.macro.check_invariants()
        if violation is not None:
            return Violation(f"макро-дерево: {violation.where}", violation.description)
        macro_leaves = list(self.macro.leaves())
        if len(macro_leaves) != len(self._groups):
            return Violation("макро-дерево", "число макро-листьев не равно числу групп")
        total = 0
        for index, (group, macro_leaf) in enumerate(zip(self._groups, macro_leaves)):
            where = f"группа {index}"
            if group.index != index or group.macro_leaf is not macro_leaf or macro_leaf.payload is not group:
                return Violation(where, "нумерация или макро-лист группы несогласованы")
            if macro_leaf.sub is not group.store or group.store.bridge is not macro_leaf:
                return Violation(where, "мост между макро-листом и мини-деревом нарушен")
            violation = group.store.check_invariants()
            if violation is not None:
                return Violation(f"{where}: {violation.where}", violation.description)
            if len(self._groups) > 1 and not (self.g <= 2 * group.size and group.size < 2 * self.g):
                return Violation(where, f"размер {group.size} вне [g/2, 2g) при g = {self.g}")
            total += group.size
        for row in self.macro.levels():
            for node in row:
                expected = sum(child.weight for child in node.children) if node.children else node.payload.size
                if node.weight != expected:
                    return Violation(f"макро-узел высоты {node.height}", f"вес {node.weight} != {expected}")
        if total != self.leaf_count:
            return Violation("хранилище", f"счетчик листьев {self.leaf_count} != {total}")
        return None

    def dump(self) -> str:
        weights = "\n".join(" ".join(str(node.weight) for node in row) for row in self.macro.levels())
        parts = [f"macro g={self.g} k={self.k} mini_k={self.mini_k}", self.macro.dump(), "weights", weights]
        for group in self._groups:
            parts.append(f"group {group.index}")
            parts.append(group.store.dump())
        return "\n".join(parts)


def _last_leaf(store: Union[KNeighborTree, HierStore]) -> TreeNode:
    if isinstance(store, HierStore):
        return _last_leaf(store.groups[-1].store)
    return store.last_leaf()


class HierTree(DynTree):
    """DynTree над иерархическим хранилищем с f уровнями; f = 0 - плоское дерево."""

    def __init__(self, f: int = 1, c_f: int = C_F) -> None:
        super().__init__()
        if f < 0:
            raise ValueError("f должно быть неотрицательным")
        self.f = f
        self.c_f = c_f
        self.default_c_audit = C_AUDIT + c_f * f

    def _make_store(self, payloads: List[ElementRecord], n: int) -> PseudoLeafStore:
        if self.f == 0:
            return super()._make_store(payloads, n)
        return HierStore.build(payloads, self.k, self.f, group_size(n))

    def _epsilon_height_ok(self, record: ElementRecord, node: TreeNode) -> bool:
        if self.f == 0:
            return super()._epsilon_height_ok(record, node)
        return True


def h_build(
        elements: Iterable[Tuple[Key, int]],
        f: int = 1,
        origin: Optional[Tuple[int, int]] = None,
        config: Optional[HierConfig] = None
) -> HierTree:
    """
    Строит иерархическое дерево.

    Args:
        elements: Пары (ключ, вес) по возрастанию ключей
        f: Число уровней иерархии
        origin: Явные (W0, n0) начала фазы
        config: Параметры иерархии (перекрывает f)

    Returns:
        Новое дерево
    """
    if config is not None:
        return HierTree.build(elements, origin, f=config.f, c_f=config.c_f)
    return HierTree.build(elements, origin, f=f)


def h_locate_epsilon(tree: HierTree, key: Key) -> Tuple[str, TreeNode]:
    """eps-узел ключа и место, где он лежит: flat, macro или mini."""
    node = tree.record(key).epsilon
    if node is None:
        raise StructureCorrupt(f"у ключа {key!r} нет eps-узла")
    store = tree.store
    if not isinstance(store, HierStore):
        return "flat", node
    top = node
    while top.parent is not None:
        top = top.parent
    return ("macro" if top is store.root else "mini"), node


def h_access(tree: HierTree, key: Key) -> AccessStats:
    return tree.access(key)


def h_insert(tree: HierTree, key: Key) -> AccessStats:
    return tree.insert_element(key)


def h_audit(tree: HierTree, c_audit: Optional[int] = None) -> Optional[Violation]:
    return tree.audit(c_audit)
