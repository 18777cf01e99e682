import json
import logging
import math
from dataclasses import dataclass
from functools import wraps
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from .errors import Violation
from .hierarchy import HierTree
from .optimal_tree import DynTree
from .quantizer import entropy

logger = logging.getLogger(__name__)

AUDIT_MODES = ("off", "final", "every-op")

REPORT_COLUMNS = ['step', 'op', 'key', 'comparisons', 'excess', 'structural_ops']


def _save_report(data: Dict[str, Any], filename: str) -> None:
    """Сохраняет отчет в JSON файл."""
    try:
        with open(filename, 'w', encoding='utf-8') as f:
            json.dump(data, f, ensure_ascii=False, indent=4)
        logger.info(f"Отчет сохранен в {filename}")
    except Exception as e:
        logger.error(f"Ошибка сохранения отчета: {e}")
        raise


def save_report(
    filename: Optional[str] = None
) -> Callable[[Callable[..., Dict[str, Any]]], Callable[..., Dict[str, Any]]]:
    """Декоратор для сохранения отчета в файл."""

    def decorator(func: Callable[..., Dict[str, Any]]) -> Callable[..., Dict[str, Any]]:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Dict[str, Any]:
            result = func(*args, **kwargs)
            output_file = filename if filename else f"{func.__name__}_report.json"
            _save_report(result, output_file)
            return result

        return wrapper

    return decorator


@dataclass
class RunResult:
    """Итог проигрывания трассы."""

    tree: DynTree
    steps: pd.DataFrame
    violation: Optional[Violation]
    max_excess: float


def make_structure(structure: str, f: int = 1, c_f: Optional[int] = None) -> DynTree:
    """Пустая структура: flat - плоское дерево, hier - иерархия с f уровнями."""
    if structure == 'flat':
        return DynTree()
    if structure == 'hier':
        return HierTree(f=f) if c_f is None else HierTree(f=f, c_f=c_f)
    raise ValueError(f"неизвестная структура {structure!r}")


def replay_trace(
        trace: Sequence[Tuple[str, int]],
        tree: DynTree,
        audit: str = 'final',
        c_audit: Optional[int] = None
) -> RunResult:
    """
    Проигрывает трассу и собирает постатейную статистику.

    Args:
        trace: Операции (код, ключ)
        tree: Пустая структура
        audit: off, final или every-op
        c_audit: Константа аудита; по умолчанию константа структуры

    Returns:
        Структура после трассы, таблица шагов, первое нарушение и наибольшее превышение глубины
    """
    if audit not in AUDIT_MODES:
        raise ValueError(f"неизвестный режим аудита {audit!r}")
    handlers: Dict[str, Callable[[Any], Any]] = {
        'A': tree.access,
        'I': tree.insert_element,
        'D': tree.decrement,
        'X': tree.delete_element
    }
    rows: List[Dict[str, Any]] = []
    accesses = 0
    max_excess = 0.0
    violation: Optional[Violation] = None
    for step, (op, key) in enumerate(trace, start=1):
        previous = tree.record(key).w if op == 'A' else 0
        stats = handlers[op](key)
        if op in ('A', 'I'):
            accesses += 1
            excess = stats.comparisons - math.log2(accesses / max(previous, 1))
            rows.append({
                'step': step,
                'op': op,
                'key': key,
                'comparisons': stats.comparisons,
                'excess': excess,
                'structural_ops': stats.structural_ops
            })
        if audit == 'every-op' and len(tree):
            max_excess = max(max_excess, tree.max_depth_excess())
            if violation is None:
                violation = tree.audit(c_audit)
                if violation is not None:
                    logger.error(f"Нарушение на шаге {step}: {violation}")
    if audit != 'off' and len(tree):
        max_excess = max(max_excess, tree.max_depth_excess())
        if violation is None:
            violation = tree.audit(c_audit)
    return RunResult(tree, pd.DataFrame(rows, columns=REPORT_COLUMNS), violation, max_excess)


def depth_deciles(comparisons: pd.Series) -> List[Dict[str, float]]:
    """Децили распределения числа сравнений на обращение."""
    if comparisons.empty:
        return []
    quantiles = comparisons.quantile([i / 10 for i in range(1, 11)])
    return [{'decile': int(round(q * 10)), 'depth': float(value)} for q, value in quantiles.items()]


def stats_report(result: RunResult, structure: str, f: int, audit: str) -> Dict[str, Any]:
    """
    Формирует отчет о проигрывании трассы.

    Returns:
        Словарь с n, W, H, числом сравнений, превышениями, структурной работой,
        децилями глубины и наименьшей проходящей константой аудита
    """
    tree, steps = result.tree, result.steps
    weights = [w for _, w in tree.weights()]
    H = entropy(weights) if weights else 0.0
    W = tree.W
    total = int(steps['comparisons'].sum())
    report: Dict[str, Any] = {
        'structure': structure,
        'f': f if structure == 'hier' else 0,
        'audit': audit,
        'n': tree.n,
        'W': W,
        'H': H,
        'total_comparisons': total,
        'comparisons_per_W': total / W if W else 0.0,
        'WH_per_W': H,
        'excess_max': float(steps['excess'].max()) if not steps.empty else 0.0,
        'excess_mean': float(steps['excess'].mean()) if not steps.empty else 0.0,
        'structural_ops': tree.structural_ops_total,
        'rebuilds': tree.rebuilds,
        'depth_deciles': depth_deciles(steps['comparisons']),
        'smallest_passing_c': max(0, math.ceil(result.max_excess - 1e-9)) if audit != 'off' else None,
        'violation': str(result.violation) if result.violation is not None else None
    }
    return report
