import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, List, Optional, Sequence

import numpy as np

from .errors import EmptyDistribution, Violation

logger = logging.getLogger(__name__)

# Запас на погрешность вычислений с плавающей точкой
FLOAT_SLACK_PER_ACCESS = 1e-6


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass
class PhaseState:
    """
    Параметры фазы: W0 и n0 зафиксированы при перестройке, W и n текущие.

    tau_bar = W0/n0 хранится парой целых, квантование выполняется точно.
    """

    W0: int
    n0: int
    W: int
    n: int

    def __post_init__(self) -> None:
        if not self.W0 >= self.n0 >= 1:
            raise ValueError(f"нужно W0 >= n0 >= 1, получено W0={self.W0}, n0={self.n0}")

    @classmethod
    def start(cls, W: int, n: int) -> "PhaseState":
        return cls(W0=W, n0=n, W=W, n=n)

    @property
    def tau_bar(self) -> float:
        return self.W0 / self.n0

    def should_end(self) -> bool:
        return phase_should_end(self)

    def should_shrink(self) -> bool:
        """Симметричный порог для удалений: W или n уменьшились вдвое."""
        return 2 * self.W <= self.W0 or 2 * self.n <= self.n0


def quantize(w: int, phase: PhaseState) -> int:
    """
    Квантованный вес w' = ceil(w / tau_bar) = ceil(w * n0 / W0).

    Args:
        w: Точное число обращений (>= 1)
        phase: Состояние фазы

    Returns:
        Квантованный вес (>= 1)
    """
    if w < 1:
        raise ValueError("вес должен быть не меньше 1")
    return ceil_div(w * phase.n0, phase.W0)


def quantized_total(weights: Sequence[int]) -> int:
    """W' = сумма ceil(w_i * n / W) при tau = W/n."""
    total, n = sum(weights), len(weights)
    return sum(ceil_div(w * n, total) for w in weights)


def quantized_total_bound_check(weights: Sequence[int]) -> Violation | int:
    """
    Проверяет W' <= 2n для tau = W/n.

    Returns:
        Вычисленное W' либо нарушение
    """
    if not weights or min(weights) < 1:
        raise ValueError("нужен непустой список весов >= 1")
    total = quantized_total(weights)
    if total > 2 * len(weights):
        return Violation("quantized_total", f"W'={total} > 2n={2 * len(weights)}")
    return total


def quantization_depth_check(weights: Sequence[int], slack: float = 1e-9) -> Optional[Violation]:
    """Проверяет log2(W'/w'_i) <= min(log2(W/w_i), log2 n) + 1 для всех i."""
    total, n = sum(weights), len(weights)
    quantized = [ceil_div(w * n, total) for w in weights]
    total_quantized = sum(quantized)
    for i, (w, wq) in enumerate(zip(weights, quantized)):
        lhs = math.log2(total_quantized / wq)
        rhs = min(math.log2(total / w), math.log2(n)) + 1
        if lhs > rhs + slack:
            return Violation(f"элемент {i}", f"log2(W'/w')={lhs:.6f} > {rhs:.6f}")
    return None


def phase_should_end(phase: PhaseState) -> bool:
    """Фаза заканчивается, когда W или n выросли вдвое."""
    return phase.W >= 2 * phase.W0 or phase.n >= 2 * phase.n0


def entropy(counts: Sequence[int]) -> float:
    """
    Эмпирическая энтропия Шеннона в битах.

    Args:
        counts: Частоты символов (>= 0)

    Returns:
        H = сумма p_i * log2(1/p_i) по ненулевым частотам
    """
    values = np.asarray(counts, dtype=np.float64)
    if values.size == 0 or np.any(values < 0) or values.sum() <= 0:
        raise EmptyDistribution("распределение пусто")
    values = values[values > 0]
    probabilities = values / values.sum()
    return float(-(probabilities * np.log2(probabilities)).sum())


def entropy_of_sequence(sequence: Sequence[Hashable]) -> float:
    return entropy(list(Counter(sequence).values()))


def dynamic_entropy_terms(sequence: Sequence[Hashable]) -> List[float]:
    """Слагаемые log2(t / max(w^(t-1), 1)) по шагам t = 1..W."""
    counts: Counter = Counter()
    terms = []
    for t, item in enumerate(sequence, start=1):
        terms.append(math.log2(t / max(counts[item], 1)))
        counts[item] += 1
    return terms


def dynamic_entropy_lhs(sequence: Sequence[Hashable]) -> float:
    """Сумма самоинформации обращений относительно накопленных весов."""
    if not sequence:
        raise ValueError("последовательность пуста")
    return math.fsum(dynamic_entropy_terms(sequence))


def verify_dynamic_entropy_bound(sequence: Sequence[Hashable]) -> Optional[Violation]:
    """
    Проверяет неравенство: динамическая сумма <= W*H + 2W (с запасом 1e-6 * W).

    Returns:
        None, если неравенство выполнено, иначе нарушение
    """
    lhs = dynamic_entropy_lhs(sequence)
    W = len(sequence)
    rhs = W * entropy_of_sequence(sequence) + 2 * W
    if lhs > rhs + FLOAT_SLACK_PER_ACCESS * W:
        return Violation("dynamic_entropy", f"{lhs:.6f} > {rhs:.6f}")
    return None
