import logging
from typing import Dict, List, Tuple

import numpy as np

from .errors import UsageError

logger = logging.getLogger(__name__)

Op = Tuple[str, int]

DISTRIBUTIONS = ("zipf", "uniform", "adversarial")

# Через сколько обращений горячий ключ сдвигается на следующий
HOT_KEY_PERIOD = 8


def zipf_probabilities(n: int, s: float = 1.0) -> np.ndarray:
    """Вероятности конечного закона Ципфа: p_r пропорционально 1 / r^s, r = 1..n."""
    weights = 1.0 / np.power(np.arange(1, n + 1, dtype=np.float64), s)
    return weights / weights.sum()


def sample_keys(dist: str, n: int, length: int, seed: int, s: float = 1.0) -> List[int]:
    """
    Последовательность ключей заданного распределения.

    Args:
        dist: zipf, uniform или adversarial
        n: Число различных ключей (>= 1)
        length: Длина последовательности (>= 1)
        seed: Зерно генератора
        s: Показатель закона Ципфа

    Returns:
        Ключи 0..n-1; ранг r закона Ципфа соответствует ключу r
    """
    if n < 1 or length < 1:
        raise UsageError("n и len должны быть положительными")
    rng = np.random.default_rng(seed)
    if dist == "zipf":
        return rng.choice(n, size=length, p=zipf_probabilities(n, s)).tolist()
    if dist == "uniform":
        return rng.integers(0, n, size=length).tolist()
    if dist == "adversarial":
        warmup = min(n, length)
        keys = list(range(warmup))
        keys.extend((j // HOT_KEY_PERIOD) % n for j in range(length - warmup))
        return keys
    raise UsageError(f"неизвестное распределение {dist!r}, ожидается одно из {DISTRIBUTIONS}")


def generate(dist: str, n: int, length: int, seed: int, s: float = 1.0) -> List[Op]:
    """Трасса: первое появление ключа - вставка I, остальные - обращение A."""
    seen = set()
    trace = []
    for key in sample_keys(dist, n, length, seed, s):
        trace.append(("A" if key in seen else "I", key))
        seen.add(key)
    logger.info(f"Сгенерирована трасса {dist}: {len(trace)} операций, {len(seen)} ключей")
    return trace


def mixed_script(n_max: int, length: int, seed: int, noise: float = 0.05) -> List[Op]:
    """
    Смешанная трасса из обращений, вставок, уменьшений и удалений.

    Большая часть операций корректна; доля noise выбирается случайно
    и проверяет совпадение ошибок.
    """
    rng = np.random.default_rng(seed)
    weights: Dict[int, int] = {}
    script: List[Op] = []
    for _ in range(length):
        if rng.random() < noise:
            script.append((str(rng.choice(["S", "A", "I", "D", "X"])), int(rng.integers(0, n_max))))
            continue
        live = sorted(weights)
        roll = rng.random()
        if not live or (roll < 0.25 and len(live) < n_max):
            key = int(rng.integers(0, n_max))
            while key in weights:
                key = int(rng.integers(0, n_max))
            weights[key] = 1
            script.append(("I", key))
        elif roll < 0.75:
            key = live[int(rng.integers(0, len(live)))]
            weights[key] += 1
            script.append(("A", key))
        else:
            key = live[int(rng.integers(0, len(live)))]
            if weights[key] == 1:
                del weights[key]
                script.append(("X", key))
            else:
                weights[key] -= 1
                script.append(("D", key))
    return script
