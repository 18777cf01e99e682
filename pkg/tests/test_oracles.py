import random
import unittest
from typing import Any, Callable

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import DuplicateKey, NotFound, NotUnitWeight, UseDelete
from src.hierarchy import HierTree
from src.optimal_tree import DynTree
from src.oracles import (
    ReferenceDictionary,
    StepResult,
    depth_trace_audit,
    exhaustive_epsilon_search,
    reference_apply,
    structure_apply,
)
from src.workloads import generate, mixed_script


class TestReferenceDictionary(unittest.TestCase):
    def setUp(self) -> None:
        self.reference = ReferenceDictionary()

    def test_empty_script(self) -> None:
        self.assertEqual(reference_apply([]), [])

    def test_insert_then_search(self) -> None:
        results = reference_apply([("I", 4), ("S", 4)])
        self.assertEqual(results[-1], StepResult("S", 4, True, 1, 1, 1))

    def test_errors_match_structure(self) -> None:
        self.reference.insert(1)
        with self.assertRaises(DuplicateKey):
            self.reference.insert(1)
        with self.assertRaises(NotFound):
            self.reference.access(2)
        with self.assertRaises(UseDelete):
            self.reference.decrement(1)
        self.reference.access(1)
        with self.assertRaises(NotUnitWeight):
            self.reference.delete(1)

    def test_items_stay_sorted(self) -> None:
        for key in (5, 1, 3):
            self.reference.insert(key)
        self.reference.access(3)
        self.assertEqual(self.reference.items(), [(1, 1), (3, 2), (5, 1)])
        self.assertEqual((self.reference.n, self.reference.W), (3, 4))


def test_error_names_recorded() -> None:
    results = reference_apply([("A", 1), ("I", 1), ("X", 1)])
    assert [result.error for result in results] == ["NotFound", None, None]
    assert results[-1].n == 0


@pytest.mark.parametrize("factory", [
    DynTree,
    lambda: HierTree(f=0),
    lambda: HierTree(f=1),
])
def test_differential_against_reference(factory: Callable[[], Any]) -> None:
    script = mixed_script(256, 4000, seed=12)
    assert structure_apply(factory(), script) == reference_apply(script)


@given(st.lists(
    st.tuples(st.sampled_from(["S", "A", "I", "D", "X"]), st.integers(min_value=0, max_value=15)),
    max_size=120,
))
@settings(max_examples=60, deadline=None)
def test_differential_on_arbitrary_scripts(script: list) -> None:
    assert structure_apply(DynTree(), script) == reference_apply(script)
    assert structure_apply(HierTree(f=1), script) == reference_apply(script)


class TestExhaustiveEpsilonSearch(unittest.TestCase):
    def test_four_key_instance(self) -> None:
        tree = DynTree.build([(0, 1), (1, 2), (2, 4), (3, 1)], origin=(5, 4))
        candidates = exhaustive_epsilon_search(tree.store.dump(), 6, 8)
        self.assertEqual(candidates, {(8, 4)})
        self.assertIn(tree.epsilon_span(2), candidates)

    def test_unit_weight_candidates_are_run_leaves(self) -> None:
        tree = DynTree.build([(0, 1), (1, 1), (2, 1)])
        self.assertEqual(exhaustive_epsilon_search(tree.store.dump(), 2, 2), {(2, 1), (3, 1)})


def test_find_epsilon_among_candidates_on_random_snapshots() -> None:
    rng = random.Random(5)
    for _ in range(150):
        n = rng.randint(2, 24)
        tree = DynTree.build([(key, rng.randint(1, 30)) for key in range(n)])
        for _ in range(rng.randint(0, 40)):
            tree.access(rng.randrange(n))
        level_dump = tree.store.dump()
        for line in tree.dump().splitlines():
            key, _, _, run_start, run_length, _, _ = map(int, line.split())
            candidates = exhaustive_epsilon_search(level_dump, run_start, run_length)
            assert candidates
            assert tree.epsilon_span(key) in candidates


class TestDepthTraceAudit(unittest.TestCase):
    def test_uniform_workload_passes(self) -> None:
        trace = generate("uniform", 32, 600, seed=2)
        self.assertIsNone(depth_trace_audit(trace, 8, DynTree))

    def test_zero_constant_fails(self) -> None:
        trace = generate("uniform", 32, 600, seed=2)
        result = depth_trace_audit(trace, 0, DynTree)
        self.assertIsNotNone(result)
        step, key, excess = result
        self.assertGreaterEqual(step, 1)
        self.assertGreater(excess, 0)

    def test_single_element_passes_at_zero(self) -> None:
        trace = [("I", 0)] + [("A", 0)] * 10
        self.assertIsNone(depth_trace_audit(trace, 0, DynTree))
