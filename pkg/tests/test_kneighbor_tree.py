import math
import random
import unittest
from typing import Dict, List, Optional

import pytest

from src.errors import EmptyBuild, InvalidHandle, OutOfRange, WouldEmpty
from src.kneighbor_tree import DUMMY, KNeighborTree, MovedReport, TreeNode, height_bound


def _payloads(tree: KNeighborTree) -> List[object]:
    return [leaf.payload for leaf in tree.leaves()]


def _parents(tree: KNeighborTree) -> Dict[TreeNode, Optional[TreeNode]]:
    return {node: node.parent for row in tree.levels() for node in row}


def _cut_leaf(leaf: TreeNode) -> None:
    """Вырезает лист в обход процедуры удаления, чтобы сломать дерево."""
    parent = leaf.parent
    assert parent is not None
    parent.children.remove(leaf)
    node = parent
    while node is not None:
        node.leaf_count -= 1
        node = node.parent
    if leaf.left is not None:
        leaf.left.right = leaf.right
    if leaf.right is not None:
        leaf.right.left = leaf.left


def _replay(before: Dict[TreeNode, Optional[TreeNode]], report: MovedReport) -> Dict[TreeNode, Optional[TreeNode]]:
    result = dict(before)
    for node, _, new in report.moves:
        result[node] = new
    return result


class TestBulkBuild(unittest.TestCase):
    def test_pads_to_power_of_two(self) -> None:
        tree = KNeighborTree.bulk_build(list(range(5)), k=2)
        self.assertEqual(tree.leaf_count, 8)
        self.assertEqual(tree.height, 3)
        self.assertEqual(_payloads(tree)[:5], [0, 1, 2, 3, 4])
        self.assertTrue(all(p is DUMMY for p in _payloads(tree)[5:]))
        self.assertIsNone(tree.check_invariants())

    def test_without_padding_keeps_order(self) -> None:
        tree = KNeighborTree.bulk_build(list("abcdefg"), k=3, pad=False)
        self.assertEqual(_payloads(tree), list("abcdefg"))
        self.assertIsNone(tree.check_invariants())

    def test_single_leaf(self) -> None:
        tree = KNeighborTree.bulk_build(["x"], k=2)
        self.assertEqual(tree.height, 0)
        self.assertIs(tree.root, tree.first_leaf())

    def test_empty_raises(self) -> None:
        with self.assertRaises(EmptyBuild):
            KNeighborTree.bulk_build([], k=2)

    def test_odd_level_keeps_single_child_node_off_the_edge(self) -> None:
        tree = KNeighborTree.bulk_build([1, 2, 3], k=2, pad=False)
        self.assertEqual([len(node.children) for node in tree.levels()[1]], [1, 2])
        self.assertIsNone(tree.check_invariants())

    def test_dump_lists_levels_top_down(self) -> None:
        tree = KNeighborTree.bulk_build([1, 2, 3, 4], k=2)
        self.assertEqual(tree.dump().splitlines(), ["(4,2)", "(2,2) (2,2)", "(1,0) (1,0) (1,0) (1,0)"])


class TestInsertDelete(unittest.TestCase):
    def setUp(self) -> None:
        self.tree = KNeighborTree.bulk_build([0, 1, 2, 3], k=2)

    def test_insert_after_anchor(self) -> None:
        anchor = list(self.tree.leaves())[1]
        leaf, report = self.tree.insert_leaf_after(anchor, 1.5)
        self.assertEqual(_payloads(self.tree), [0, 1, 1.5, 2, 3])
        self.assertEqual(leaf.payload, 1.5)
        self.assertGreater(report.relinks, 0)
        self.assertIsNone(self.tree.check_invariants())

    def test_insert_before_all(self) -> None:
        self.tree.insert_leaf_after(None, -1)
        self.assertEqual(_payloads(self.tree)[0], -1)
        self.assertIsNone(self.tree.check_invariants())

    def test_insert_into_single_leaf_tree(self) -> None:
        tree = KNeighborTree.bulk_build(["a"], k=2)
        tree.insert_leaf_after(tree.first_leaf(), "b")
        self.assertEqual(_payloads(tree), ["a", "b"])
        self.assertEqual(tree.height, 1)

    def test_delete_keeps_order(self) -> None:
        leaves = list(self.tree.leaves())
        self.tree.delete_leaf(leaves[2])
        self.assertEqual(_payloads(self.tree), [0, 1, 3])
        self.assertFalse(leaves[2].alive)
        self.assertIsNone(self.tree.check_invariants())

    def test_delete_down_to_one_leaf(self) -> None:
        for leaf in list(self.tree.leaves())[1:]:
            self.tree.delete_leaf(leaf)
            self.assertIsNone(self.tree.check_invariants())
        self.assertEqual(_payloads(self.tree), [0])
        with self.assertRaises(WouldEmpty):
            self.tree.delete_leaf(self.tree.first_leaf())

    def test_dead_handle_rejected(self) -> None:
        leaf = list(self.tree.leaves())[0]
        self.tree.delete_leaf(leaf)
        with self.assertRaises(InvalidHandle):
            self.tree.insert_leaf_after(leaf, 9)

    def test_foreign_handle_rejected(self) -> None:
        with self.assertRaises(InvalidHandle):
            self.tree.delete_leaf(TreeNode(0, "stranger"))


class TestAncestors(unittest.TestCase):
    def test_ancestor_at_height(self) -> None:
        tree = KNeighborTree.bulk_build(list(range(8)), k=2)
        leaf = list(tree.leaves())[5]
        self.assertIs(tree.ancestor_at_height(leaf, 0), leaf)
        self.assertIs(tree.ancestor_at_height(leaf, 3), tree.root)
        self.assertEqual(tree.ancestor_at_height(leaf, 2).leaf_count, 4)

    def test_height_out_of_range(self) -> None:
        tree = KNeighborTree.bulk_build(list(range(8)), k=2)
        with self.assertRaises(OutOfRange):
            tree.ancestor_at_height(tree.first_leaf(), 4)

    def test_locate_epsilon_stays_inside_run(self) -> None:
        tree = KNeighborTree.bulk_build(list(range(16)), k=2)
        leaves = list(tree.leaves())
        node = tree.locate_epsilon(leaves[4:12], 0, 8)
        self.assertEqual(node.height, 2)
        self.assertEqual(node.leaf_count, 4)


@pytest.mark.parametrize("n,k,expected", [
    (1, 2, 1),
    (2, 1, 2),
    (16, 2, 6),
])
def test_height_bound(n: int, k: int, expected: int) -> None:
    assert height_bound(n, k) == expected


def test_height_bound_rejects_bad_arguments() -> None:
    with pytest.raises(ValueError):
        height_bound(0, 2)


def test_random_insertions_keep_height_logarithmic() -> None:
    """Случайные вставки: инварианты каждые 100 операций и высота не больше ceil(log2 n) + 2."""
    rng = random.Random(7)
    total = 3000
    k = math.ceil(math.log2(total))
    tree = KNeighborTree.bulk_build([0], k=k, pad=False)
    leaves = [tree.first_leaf()]
    for step in range(1, total):
        anchor = rng.choice(leaves + [None])
        leaf, _ = tree.insert_leaf_after(anchor, step)
        leaves.append(leaf)
        if step % 100 == 0:
            assert tree.check_invariants() is None
    assert tree.check_invariants() is None
    assert tree.leaf_count == total
    assert tree.height <= math.ceil(math.log2(total)) + 2


def test_random_mixed_updates_keep_invariants() -> None:
    rng = random.Random(11)
    tree = KNeighborTree.bulk_build(list(range(64)), k=3, pad=False)
    expected = list(range(64))
    for step in range(1500):
        leaves = list(tree.leaves())
        if rng.random() < 0.5 and len(leaves) > 1:
            index = rng.randrange(len(leaves))
            tree.delete_leaf(leaves[index])
            del expected[index]
        else:
            index = rng.randrange(len(leaves))
            tree.insert_leaf_after(leaves[index], 1000 + step)
            expected.insert(index + 1, 1000 + step)
        if step % 50 == 0:
            assert tree.check_invariants() is None
    assert _payloads(tree) == expected
    assert tree.check_invariants() is None


class TestConditions(unittest.TestCase):
    def setUp(self) -> None:
        self.tree = KNeighborTree.bulk_build(list(range(8)), k=2, pad=False)
        self.leaves = list(self.tree.leaves())

    def test_rightmost_single_child_node_is_reported(self) -> None:
        _cut_leaf(self.leaves[7])
        violation = self.tree.check_invariants()
        self.assertIsNotNone(violation)
        self.assertIn("(2)", violation.description)

    def test_adjacent_single_child_nodes_are_reported(self) -> None:
        _cut_leaf(self.leaves[1])
        _cut_leaf(self.leaves[3])
        violation = self.tree.check_invariants()
        self.assertIsNotNone(violation)
        self.assertIn("(3)", violation.description)

    def test_delete_at_right_edge_hands_child_left(self) -> None:
        old_parent, left_parent = self.leaves[6].parent, self.leaves[5].parent
        report = self.tree.delete_leaf(self.leaves[7])
        self.assertEqual(_payloads(self.tree), list(range(7)))
        self.assertIn((self.leaves[6], old_parent, left_parent), report.moves)
        self.assertFalse(old_parent.alive)
        self.assertIsNone(self.tree.check_invariants())


class TestMove(unittest.TestCase):
    def test_overflow_next_to_single_child_node_moves(self) -> None:
        tree = KNeighborTree.bulk_build([1, 2, 3], k=2, pad=False)
        first, second, third = tree.leaves()
        left_node, right_node = first.parent, second.parent
        _, report = tree.insert_leaf_after(third, 4)
        self.assertEqual(report.moves_invoked, 1)
        self.assertIn((second, right_node, left_node), report.moves)
        self.assertEqual(tree.height, 2)
        self.assertEqual(_payloads(tree), [1, 2, 3, 4])
        self.assertIsNone(tree.check_invariants())

    def test_single_move_per_insert(self) -> None:
        rng = random.Random(5)
        tree = KNeighborTree.bulk_build(list(range(32)), k=4, pad=False)
        for step in range(800):
            anchor = rng.choice(list(tree.leaves()))
            _, report = tree.insert_leaf_after(anchor, 100 + step)
            self.assertLessEqual(report.moves_invoked, 1)
        self.assertIsNone(tree.check_invariants())


def test_report_replays_parent_changes() -> None:
    rng = random.Random(13)
    tree = KNeighborTree.bulk_build(list(range(40)), k=2, pad=False)
    for step in range(600):
        before = _parents(tree)
        leaves = list(tree.leaves())
        if rng.random() < 0.45 and len(leaves) > 1:
            report = tree.delete_leaf(rng.choice(leaves))
        else:
            _, report = tree.insert_leaf_after(rng.choice(leaves), 1000 + step)
        after = _parents(tree)
        replayed = _replay(before, report)
        for node, parent in after.items():
            if node in before:
                assert replayed[node] is parent


class TestSplit(unittest.TestCase):
    def _grown(self, total: int, seed: int) -> KNeighborTree:
        rng = random.Random(seed)
        tree = KNeighborTree.bulk_build([0], k=3, pad=False)
        for step in range(1, total):
            tree.insert_leaf_after(rng.choice(list(tree.leaves())), step)
        return tree

    def test_halves_keep_order_and_invariants(self) -> None:
        for seed in range(5):
            tree = self._grown(200, seed)
            before = _payloads(tree)
            right, report = tree.split()
            self.assertEqual(_payloads(tree) + _payloads(right), before)
            self.assertIsNone(tree.check_invariants())
            self.assertIsNone(right.check_invariants())
            self.assertGreaterEqual(4 * tree.leaf_count, 200)
            self.assertGreaterEqual(4 * right.leaf_count, 200)
            self.assertLess(report.relinks, 200)
            self.assertEqual(report.rebuilt, [tree.root, right.root])

    def test_halves_stay_usable(self) -> None:
        tree = self._grown(64, 9)
        right, _ = tree.split()
        tree.insert_leaf_after(tree.last_leaf(), "tail")
        right.delete_leaf(right.first_leaf())
        self.assertEqual(_payloads(tree)[-1], "tail")
        self.assertIsNone(tree.check_invariants())
        self.assertIsNone(right.check_invariants())

    def test_two_leaves(self) -> None:
        tree = KNeighborTree.bulk_build(["a", "b"], k=2, pad=False)
        right, _ = tree.split()
        self.assertEqual((_payloads(tree), _payloads(right)), (["a"], ["b"]))

    def test_single_leaf_rejected(self) -> None:
        with self.assertRaises(WouldEmpty):
            KNeighborTree.bulk_build(["a"], k=2).split()
