import json
import logging
import re
from typing import Any, Dict, Iterable, List, Tuple

from .errors import ParseError

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)

TRACE_OPS = ("A", "I", "D", "X")

# Ключи трассы - беззнаковые 64-битные целые
MAX_KEY = 2 ** 64 - 1
KEY_PATTERN = re.compile(r"[0-9]+")

DEFAULT_SETTINGS: Dict[str, Any] = {
    'c_audit': 8,
    'c_f': 4,
    'f': 1,
    'zipf_s': 1.0
}


def parse_trace(lines: Iterable[str]) -> List[Tuple[str, int]]:
    """
    Разбирает строки трассы вида `<op> <key>`

    Args:
        lines: Строки трассы; пустые строки пропускаются

    Returns:
        Список операций (код, ключ)

    Raises:
        ParseError: строка не соответствует формату (с номером строки)
    """
    trace = []
    for number, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise ParseError(number, f"ожидается `<op> <key>`, получено {line.strip()!r}")
        op, raw_key = parts
        if op not in TRACE_OPS:
            raise ParseError(number, f"неизвестная операция {op!r}")
        if not KEY_PATTERN.fullmatch(raw_key) or int(raw_key) > MAX_KEY:
            raise ParseError(number, f"ключ {raw_key!r} не является беззнаковым 64-битным числом")
        trace.append((op, int(raw_key)))
    return trace


def load_trace(file_path: str) -> List[Tuple[str, int]]:
    """Загружает трассу из файла"""
    with open(file_path, 'r', encoding='utf-8') as f:
        trace = parse_trace(f)
    logging.info(f"Загружено {len(trace)} операций из {file_path}")
    return trace


def write_trace(trace: Iterable[Tuple[str, int]], file_path: str) -> None:
    """Записывает трассу построчно"""
    with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
        for op, key in trace:
            f.write(f"{op} {key}\n")


def load_user_settings(file_path: str = 'user_settings.json') -> Dict[str, Any]:
    """
    Загружает пользовательские настройки из JSON-файла

    Args:
        file_path: Путь к файлу настроек

    Returns:
        Словарь с константами аудита и генерации; при ошибке - значения по умолчанию
    """
    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            settings: Dict[str, Any] = json.load(f)

        # Валидация и преобразование типов
        return {
            'c_audit': int(settings.get('c_audit', DEFAULT_SETTINGS['c_audit'])),
            'c_f': int(settings.get('c_f', DEFAULT_SETTINGS['c_f'])),
            'f': int(settings.get('f', DEFAULT_SETTINGS['f'])),
            'zipf_s': float(settings.get('zipf_s', DEFAULT_SETTINGS['zipf_s']))
        }

    except (FileNotFoundError, json.JSONDecodeError, ValueError, TypeError, AttributeError) as e:
        logging.error(f"Ошибка загрузки настроек: {str(e)}")
        return dict(DEFAULT_SETTINGS)
