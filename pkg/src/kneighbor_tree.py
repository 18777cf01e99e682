import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, List, Optional, Protocol, Sequence, Set, Tuple

from .errors import EmptyBuild, InvalidHandle, OutOfRange, StructureCorrupt, Violation, WouldEmpty

logger = logging.getLogger(__name__)


class _Dummy:
    """Полезная нагрузка фиктивного листа (дополнение до степени двойки)."""

    def __repr__(self) -> str:
        return "DUMMY"


DUMMY = _Dummy()

# Якорь вставки "перед всеми листьями"
BEFORE_ALL = None


class HasRoot(Protocol):
    """Хранилище, у которого есть текущий корень (мини-дерево группы)."""

    @property
    def root(self) -> "TreeNode": ...


class TreeNode:
    """Узел дерева псевдо-листьев T^S."""

    __slots__ = (
        "children", "parent", "left", "right", "height", "leaf_count", "payload", "alive",
        "router_key", "max_key", "epsilon", "sub", "owner_tree", "weight",
    )

    def __init__(self, height: int = 0, payload: Any = None) -> None:
        self.children: List["TreeNode"] = []
        self.parent: Optional["TreeNode"] = None
        self.left: Optional["TreeNode"] = None
        self.right: Optional["TreeNode"] = None
        self.height = height
        self.leaf_count = 1 if height == 0 else 0
        self.payload = payload
        self.alive = True
        # Поля уровня словаря (заполняет optimal_tree)
        self.router_key: Any = None
        self.max_key: Any = None
        self.epsilon: Any = None
        # Мост макро-лист -> корень мини-дерева
        self.sub: Optional[HasRoot] = None
        self.owner_tree: Optional["KNeighborTree"] = None
        # Число псевдо-листьев под макро-узлом (ведет HierStore)
        self.weight = 0

    def up(self) -> Optional["TreeNode"]:
        """Родитель в объединенном дереве (через мост из корня мини-дерева)."""
        if self.parent is not None:
            return self.parent
        tree = self.owner_tree
        if tree is not None and tree.root is self:
            return tree.bridge
        return None

    def down(self) -> List["TreeNode"]:
        """Дети в объединенном дереве."""
        if self.children:
            return self.children
        if self.sub is not None:
            return [self.sub.root]
        return []

    @property
    def is_pseudo_leaf(self) -> bool:
        return not self.children and self.sub is None

    def __repr__(self) -> str:
        return f"TreeNode(h={self.height}, leaves={self.leaf_count}, children={len(self.children)})"


def leftmost_leaf(node: TreeNode) -> TreeNode:
    while True:
        below = node.down()
        if not below:
            return node
        node = below[0]


def rightmost_leaf(node: TreeNode) -> TreeNode:
    while True:
        below = node.down()
        if not below:
            return node
        node = below[-1]


def iter_subtree_leaves(node: TreeNode) -> Iterator[TreeNode]:
    stack = [node]
    while stack:
        current = stack.pop()
        below = current.down()
        if not below:
            yield current
        else:
            stack.extend(reversed(below))


@dataclass
class MovedReport:
    """
    Отчет о перестройке дерева после вставки или удаления листа.

    moves: тройки (узел, старый родитель, новый родитель);
    touched: узлы, у которых изменился список детей;
    rebuilt: корни заново собранных поддеревьев (расщепление групп).
    """

    moves: List[Tuple[TreeNode, Optional[TreeNode], Optional[TreeNode]]] = field(default_factory=list)
    touched: Set[TreeNode] = field(default_factory=set)
    rebuilt: List[TreeNode] = field(default_factory=list)
    relinks: int = 0
    moves_invoked: int = 0

    def merge(self, other: "MovedReport") -> "MovedReport":
        self.moves.extend(other.moves)
        self.touched |= other.touched
        self.rebuilt.extend(other.rebuilt)
        self.relinks += other.relinks
        self.moves_invoked += other.moves_invoked
        return self

    def boundary_leaves(self) -> List[TreeNode]:
        """Крайние листья всех перемещенных узлов."""
        result: List[TreeNode] = []
        for node, _, _ in self.moves:
            if node.alive:
                result.append(leftmost_leaf(node))
                result.append(rightmost_leaf(node))
        return result

    def affected_leaves(self) -> Set[TreeNode]:
        """Все листья, у которых изменилось множество предков."""
        result: Set[TreeNode] = set()
        for node, _, _ in self.moves:
            if node.alive:
                result.update(iter_subtree_leaves(node))
        return result


def _link_level(nodes: Sequence[TreeNode]) -> None:
    previous: Optional[TreeNode] = None
    for node in nodes:
        node.left = previous
        node.right = None
        if previous is not None:
            previous.right = node
        previous = node


def _link_between(left: Optional[TreeNode], node: TreeNode, right: Optional[TreeNode]) -> None:
    node.left, node.right = left, right
    if left is not None:
        left.right = node
    if right is not None:
        right.left = node


def _unlink(node: TreeNode) -> Tuple[Optional[TreeNode], Optional[TreeNode]]:
    left, right = node.left, node.right
    if left is not None:
        left.right = right
    if right is not None:
        right.left = left
    node.left = node.right = None
    return left, right


def _sibling_slices(count: int) -> List[Tuple[int, int]]:
    """
    Разбиение уровня из count узлов на детей будущих родителей.

    Узлы идут парами; при нечетном count одиночный узел стоит третьим с конца,
    чтобы у родителя с одним ребенком был сосед справа.
    """
    starts = list(range(0, count, 2))
    if count % 2 and count > 1:
        starts = starts[:-2] + [count - 3, count - 2]
    return list(zip(starts, starts[1:] + [count]))


def height_bound(n_leaves: int, k: int) -> int:
    """
    Верхняя оценка высоты k-соседского дерева: floor(log n / log(2 - 1/(k+1)) + 1).

    Args:
        n_leaves: Число листьев (>= 1)
        k: Радиус поиска соседей (>= 1)

    Returns:
        Оценка высоты; значение с плавающей точкой проверяется целочисленно
    """
    if n_leaves < 1 or k < 1:
        raise ValueError("n_leaves и k должны быть положительными")
    # основание логарифма b = (2k+1)/(k+1); ищем максимальное m с b^m <= n
    num, den = 2 * k + 1, k + 1
    m = int(math.log(n_leaves) / math.log(num / den))
    while num ** (m + 1) <= n_leaves * den ** (m + 1):
        m += 1
    while m > 0 and num ** m > n_leaves * den ** m:
        m -= 1
    return m + 1


class KNeighborTree:
    """
    k-соседское дерево: все листья на одной глубине, у каждого узла 1 или 2 ребенка,
    и за каждым узлом с одним ребенком следуют min(k, l) узлов уровня с двумя детьми.
    """

    def __init__(self, k: int) -> None:
        if k < 1:
            raise ValueError("k должно быть не меньше 1")
        self.k = k
        self._root: Optional[TreeNode] = None
        self.bridge: Optional[TreeNode] = None
        self.relinks = 0
        self.moves = 0

    @property
    def root(self) -> TreeNode:
        if self._root is None:
            raise StructureCorrupt("дерево не построено")
        return self._root

    @root.setter
    def root(self, node: TreeNode) -> None:
        node.parent = None
        node.owner_tree = self
        self._root = node

    @property
    def height(self) -> int:
        return self.root.height

    @property
    def leaf_count(self) -> int:
        return self.root.leaf_count

    @classmethod
    def bulk_build(cls, payloads: Sequence[Any], k: int, pad: bool = True) -> "KNeighborTree":
        """
        Строит дерево за линейное время.

        Args:
            payloads: Полезные нагрузки листьев слева направо
            k: Параметр соседства
            pad: Дополнять ли число листьев до степени двойки фиктивными листьями

        Returns:
            Новое дерево
        """
        if not payloads:
            raise EmptyBuild("нельзя построить дерево без листьев")
        leaves = [TreeNode(0, payload) for payload in payloads]
        if pad:
            size = 1 << (len(leaves) - 1).bit_length()
            leaves.extend(TreeNode(0, DUMMY) for _ in range(size - len(leaves)))
        tree = cls(k)
        tree._assemble(leaves)
        return tree

    @classmethod
    def from_leaves(cls, leaves: Sequence[TreeNode], k: int) -> "KNeighborTree":
        """Собирает дерево над уже существующими листьями (дескрипторы сохраняются)."""
        if not leaves:
            raise EmptyBuild("нельзя построить дерево без листьев")
        tree = cls(k)
        tree._assemble(list(leaves))
        return tree

    def _assemble(self, level: List[TreeNode]) -> None:
        for leaf in level:
            leaf.children = []
            leaf.parent = None
            leaf.height = 0
            leaf.leaf_count = 1
            leaf.alive = True
            leaf.owner_tree = None
        self._build_over(level)

    def _build_over(self, level: List[TreeNode]) -> None:
        """Собирает верхние уровни над готовыми узлами одной высоты."""
        _link_level(level)
        while len(level) > 1:
            parents = []
            for start, end in _sibling_slices(len(level)):
                parent = TreeNode(level[0].height + 1)
                parent.children = level[start:end]
                for child in parent.children:
                    child.parent = parent
                parent.leaf_count = sum(child.leaf_count for child in parent.children)
                self.relinks += len(parent.children)
                parents.append(parent)
            _link_level(parents)
            level = parents
        self.root = level[0]

    def first_leaf(self) -> TreeNode:
        node = self.root
        while node.children:
            node = node.children[0]
        return node

    def last_leaf(self) -> TreeNode:
        node = self.root
        while node.children:
            node = node.children[-1]
        return node

    def leaves(self) -> Iterator[TreeNode]:
        node: Optional[TreeNode] = self.first_leaf()
        while node is not None:
            yield node
            node = node.right

    def owns(self, node: TreeNode) -> bool:
        if not node.alive:
            return False
        while node.parent is not None:
            node = node.parent
        return node is self._root

    def _check_live(self, node: TreeNode) -> None:
        if not self.owns(node) or node.height != 0 or node.children:
            raise InvalidHandle("лист не принадлежит дереву")

    def ancestor_at_height(self, leaf: TreeNode, h: int) -> TreeNode:
        """Предок листа на высоте h (сам лист при h = 0)."""
        self._check_live(leaf)
        if h < 0 or h > self.root.height:
            raise OutOfRange(f"высота {h} вне диапазона [0, {self.root.height}]")
        node = leaf
        for _ in range(h):
            assert node.parent is not None
            node = node.parent
        return node

    def locate_epsilon(self, run: Sequence[TreeNode], start: int, length: int) -> TreeNode:
        """
        Узел высоты floor(log2(length/2)) над листом run[start + length//2 - 1].

        Все листья такого узла лежат внутри отрезка run[start:start+length].
        """
        half = max(1, length // 2)
        anchor = run[start + max(0, length // 2 - 1)]
        return self.ancestor_at_height(anchor, half.bit_length() - 1)

    def insert_leaf_after(self, anchor: Optional[TreeNode], payload: Any) -> Tuple[TreeNode, MovedReport]:
        """
        Вставляет новый лист сразу справа от anchor (или левее всех при BEFORE_ALL).

        Args:
            anchor: Живой лист дерева или BEFORE_ALL
            payload: Полезная нагрузка нового листа

        Returns:
            Новый лист и отчет о перемещенных узлах
        """
        if anchor is not None:
            self._check_live(anchor)
        report = MovedReport()
        relinks_before = self.relinks
        leaf = TreeNode(0, payload)
        root = self.root
        if root.height == 0:
            kids = [leaf, root] if anchor is None else [root, leaf]
            _link_level(kids)
            new_root = TreeNode(1)
            new_root.children = kids
            for child in kids:
                child.parent = new_root
            new_root.leaf_count = 2
            self.relinks += 2
            report.moves.append((root, None, new_root))
            report.touched.add(new_root)
            self.root = new_root
        else:
            if anchor is None:
                first = self.first_leaf()
                parent, position = first.parent, 0
                _link_between(None, leaf, first)
            else:
                parent = anchor.parent
                assert parent is not None
                position = parent.children.index(anchor) + 1
                _link_between(anchor, leaf, anchor.right)
            assert parent is not None
            self._insert_child(parent, position, leaf, report)
        report.relinks = self.relinks - relinks_before
        return leaf, report

    def _bump(self, node: Optional[TreeNode], delta: int) -> None:
        while node is not None:
            node.leaf_count += delta
            node = node.parent

    def _insert_child(self, parent: TreeNode, position: int, child: TreeNode, report: MovedReport) -> None:
        parent.children.insert(position, child)
        child.parent = parent
        self.relinks += 1
        self._bump(parent, child.leaf_count)
        report.touched.add(parent)
        self._fix_overflow(parent, report)

    def _fix_overflow(self, parent: TreeNode, report: MovedReport) -> None:
        """Узел с тремя детьми: Move к ближайшему узлу с одним ребенком или отщепление."""
        if len(parent.children) <= 2:
            return
        # слева ищем на k + 1: новый узел встанет левее parent
        target, direction = self._find_one_node(parent, self.k + 1)
        if target is not None:
            self._shift(parent, target, direction, report)
            return
        # соседа с одним ребенком нет: отщепляем левого ребенка в новый узел
        first = parent.children.pop(0)
        self._bump(parent, -first.leaf_count)
        split = TreeNode(parent.height)
        split.children = [first]
        split.leaf_count = first.leaf_count
        first.parent = split
        self.relinks += 1
        report.moves.append((first, parent, split))
        report.touched.add(split)
        _link_between(parent.left, split, parent)
        if parent is self._root:
            new_root = TreeNode(parent.height + 1)
            new_root.children = [split, parent]
            split.parent = new_root
            parent.parent = new_root
            new_root.leaf_count = split.leaf_count + parent.leaf_count
            self.relinks += 2
            report.moves.append((split, None, new_root))
            report.moves.append((parent, None, new_root))
            report.touched.add(new_root)
            self.root = new_root
            return
        grand = parent.parent
        assert grand is not None
        report.moves.append((split, None, grand))
        self._insert_child(grand, grand.children.index(parent), split, report)

    def _find_one_node(self, node: TreeNode, left_reach: Optional[int] = None) -> Tuple[Optional[TreeNode], int]:
        """Ближайший узел уровня с одним ребенком на расстоянии не больше k; при равенстве правый."""
        found: List[Tuple[int, int, TreeNode]] = []
        for direction, reach in ((1, self.k), (-1, left_reach or self.k)):
            current = node.right if direction > 0 else node.left
            distance = 1
            while current is not None and distance <= reach:
                if len(current.children) == 1:
                    found.append((distance, -direction, current))
                    break
                current = current.right if direction > 0 else current.left
                distance += 1
        if not found:
            return None, 0
        distance, neg_direction, target = min(found, key=lambda item: (item[0], item[1]))
        return target, -neg_direction

    def _reparent(self, child: TreeNode, old: TreeNode, new: TreeNode, report: MovedReport) -> None:
        child.parent = new
        self.relinks += 1
        size = child.leaf_count
        a: Optional[TreeNode] = old
        b: Optional[TreeNode] = new
        while a is not b and a is not None and b is not None:
            a.leaf_count -= size
            b.leaf_count += size
            a, b = a.parent, b.parent
        report.moves.append((child, old, new))
        report.touched.add(old)
        report.touched.add(new)

    def _shift(self, source: TreeNode, target: TreeNode, direction: int, report: MovedReport) -> None:
        """Move(p, q): сдвиг детей на одну позицию от source к target."""
        self.moves += 1
        report.moves_invoked += 1
        logger.debug(f"Move на уровне {source.height}, направление {direction}")
        current = source
        while current is not target:
            following = current.right if direction > 0 else current.left
            assert following is not None
            if direction > 0:
                child = current.children.pop()
                following.children.insert(0, child)
            else:
                child = current.children.pop(0)
                following.children.append(child)
            self._reparent(child, current, following, report)
            current = following

    def delete_leaf(self, leaf: TreeNode) -> MovedReport:
        """
        Удаляет лист симметричной процедурой, сохраняя порядок остальных листьев.

        Args:
            leaf: Живой лист дерева

        Returns:
            Отчет о перемещенных узлах
        """
        self._check_live(leaf)
        if leaf is self._root:
            raise WouldEmpty("нельзя удалить последний лист")
        report = MovedReport()
        relinks_before = self.relinks
        self._remove_node(leaf, report)
        report.relinks = self.relinks - relinks_before
        return report

    def _remove_node(self, node: TreeNode, report: MovedReport) -> None:
        parent = node.parent
        assert parent is not None
        parent.children.remove(node)
        node.parent = None
        node.alive = False
        self.relinks += 1
        self._bump(parent, -node.leaf_count)
        report.touched.add(parent)
        left, right = _unlink(node)
        if node.height > 0:
            self._close_gap(left, right, report)
        if parent.alive:
            self._fix_underflow(parent, report)

    def _fix_underflow(self, node: TreeNode, report: MovedReport) -> None:
        count = len(node.children)
        if count >= 2:
            return
        if count == 0:
            if node is self._root:
                raise StructureCorrupt("корень остался без детей")
            self._remove_node(node, report)
            return
        if node is self._root:
            while node.height > 0 and len(node.children) == 1:
                child = node.children[0]
                node.alive = False
                node.children = []
                self.relinks += 1
                report.moves.append((child, node, None))
                self.root = child
                node = child
            return
        self._settle(node, report)

    def _settle(self, node: TreeNode, report: MovedReport) -> None:
        """Узел с одним ребенком: слияние с соседом в радиусе k или передача ребенка влево."""
        target, _ = self._find_one_node(node)
        if target is not None:
            self._merge(node, target, report)
        elif node.right is None and node.left is not None:
            self._absorb_left(node, report)

    def _absorb_left(self, node: TreeNode, report: MovedReport) -> None:
        """Крайний правый узел с одним ребенком отдает его левому соседу и удаляется."""
        left = node.left
        assert left is not None
        child = node.children.pop()
        left.children.append(child)
        self._reparent(child, node, left, report)
        self._remove_node(node, report)
        if left.alive:
            self._fix_overflow(left, report)

    def _close_gap(self, left: Optional[TreeNode], right: Optional[TreeNode], report: MovedReport) -> None:
        """После удаления узла уровня два узла с одним ребенком могли сблизиться."""
        a, i = left, 0
        while a is not None and i < self.k and len(a.children) != 1:
            a, i = a.left, i + 1
        if a is None or len(a.children) != 1:
            return
        b, j = right, 0
        while b is not None and i + j + 1 <= self.k and len(b.children) != 1:
            b, j = b.right, j + 1
        if b is None or len(b.children) != 1 or i + j + 1 > self.k:
            return
        self._merge(a, b, report)

    def _merge(self, first: TreeNode, second: TreeNode, report: MovedReport) -> None:
        """Сливает два узла с одним ребенком: правый из пары опустошается и удаляется."""
        self.moves += 1
        report.moves_invoked += 1
        left, right = first, second
        scan = first.right
        while scan is not None and scan is not second:
            scan = scan.right
        if scan is None:
            left, right = second, first
        current = left
        while current is not right:
            following = current.right
            assert following is not None
            child = following.children.pop(0)
            current.children.append(child)
            self._reparent(child, following, current, report)
            current = following
        self._remove_node(right, report)

    def split(self) -> Tuple["KNeighborTree", MovedReport]:
        """
        Делит дерево на две части с близким числом листьев; левая остается в этом дереве.

        Разрез проходит по самому высокому уровню, где каждое поддерево содержит не больше
        четверти листьев. Поддеревья этого уровня переносятся целиком, заново строятся
        только уровни над ними, поэтому стоимость не зависит от числа листьев.

        Returns:
            Правое дерево и отчет о перемещенных узлах
        """
        root = self.root
        total = root.leaf_count
        if total < 2:
            raise WouldEmpty("нельзя разделить дерево из одного листа")
        row = [root]
        while row[0].height > 0 and any(4 * node.leaf_count > total for node in row):
            row = [child for node in row for child in node.children]
        cut, best = 1, total
        prefix = 0
        for index in range(1, len(row)):
            prefix += row[index - 1].leaf_count
            gap = abs(2 * prefix - total)
            if gap < best:
                cut, best = index, gap
        report = MovedReport()
        relinks_before = self.relinks
        old_parents = [node.parent for node in row]
        stack = [root]
        while stack:
            node = stack.pop()
            if node.height > row[0].height:
                node.alive = False
                stack.extend(node.children)
                node.children = []
        a: Optional[TreeNode] = row[cut - 1]
        b: Optional[TreeNode] = row[cut]
        while a is not None and b is not None:
            a.right = None
            b.left = None
            a = a.children[-1] if a.children else None
            b = b.children[0] if b.children else None
        right = type(self)(self.k)
        right._build_over(row[cut:])
        self._build_over(row[:cut])
        self.relinks += right.relinks
        right.relinks = 0
        for node, old in zip(row, old_parents):
            report.moves.append((node, old, node.parent))
            if node.parent is not None:
                report.touched.add(node.parent)
        self._repair_right_edge(report)
        report.rebuilt.extend([self.root, right.root])
        report.relinks = self.relinks - relinks_before
        return right, report

    def _repair_right_edge(self, report: MovedReport) -> None:
        """Снизу вверх убирает узлы с одним ребенком с правого края уровней."""
        height = 1
        while height < self.root.height:
            node = self.root
            while node.height > height:
                node = node.children[-1]
            if len(node.children) == 1:
                self._settle(node, report)
            height += 1
        if self.root.height > 0:
            self._fix_underflow(self.root, report)

    def levels(self) -> List[List[TreeNode]]:
        """Уровни дерева сверху вниз, каждый слева направо по ссылкам соседей."""
        result: List[List[TreeNode]] = []
        head: Optional[TreeNode] = self.root
        while head is not None:
            row = []
            node: Optional[TreeNode] = head
            while node is not None:
                row.append(node)
                node = node.right
            result.append(row)
            head = head.children[0] if head.children else None
        return result

    def check_invariants(self) -> Optional[Violation]:
        """Полная проверка условий k-соседского дерева и оценки высоты."""
        root = self.root
        if root.parent is not None or root.left is not None or root.right is not None:
            return Violation("корень", "у корня есть родитель или соседи")
        rows = self.levels()
        if len(rows) != root.height + 1:
            return Violation("корень", f"высота {root.height}, уровней {len(rows)}")
        for depth, row in enumerate(rows):
            height = root.height - depth
            expected_below: List[TreeNode] = []
            for index, node in enumerate(row):
                where = f"уровень {height}, узел {index}"
                if not node.alive:
                    return Violation(where, "узел удален")
                if node.height != height:
                    return Violation(where, f"поле height = {node.height}")
                if node.right is not None and node.right.left is not node:
                    return Violation(where, "ссылки соседей несогласованы")
                if height == 0:
                    if node.children:
                        return Violation(where, "у листа есть дети")
                    if node.leaf_count != 1:
                        return Violation(where, "leaf_count листа не равен 1")
                    continue
                if not 1 <= len(node.children) <= 2:
                    return Violation(where, f"детей {len(node.children)}")
                for child in node.children:
                    if child.parent is not node:
                        return Violation(where, "ссылка на родителя несогласована")
                if node.leaf_count != sum(child.leaf_count for child in node.children):
                    return Violation(where, "leaf_count не равен сумме по детям")
                if len(node.children) == 1:
                    if index + 1 >= len(row):
                        return Violation(where, "условие (2): у узла с одним ребенком нет соседа справа")
                    for offset in range(1, self.k + 1):
                        if index + offset >= len(row):
                            break
                        if len(row[index + offset].children) != 2:
                            return Violation(
                                where, f"условие (3): сосед справа на расстоянии {offset} тоже имеет одного ребенка"
                            )
                expected_below.extend(node.children)
            if height > 0:
                below = rows[depth + 1]
                if len(below) != len(expected_below) or any(a is not b for a, b in zip(below, expected_below)):
                    return Violation(f"уровень {height - 1}", "порядок уровня не совпадает с порядком поддеревьев")
        bound = height_bound(root.leaf_count, self.k)
        if root.height > bound:
            return Violation("корень", f"высота {root.height} больше оценки {bound}")
        return None

    def dump(self) -> str:
        """Отладочный дамп: строка на уровень, узлы как (leaf_count,children)."""
        return "\n".join(
            " ".join(f"({node.leaf_count},{len(node.children)})" for node in row) for row in self.levels()
        )
