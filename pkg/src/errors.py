from dataclasses import dataclass


class DynTreeError(Exception):
    """Базовая ошибка библиотеки динамических деревьев."""


class EmptyBuild(DynTreeError, ValueError):
    """Построение по пустой последовательности."""


class InvalidHandle(DynTreeError, ValueError):
    """Лист удален или принадлежит другому дереву."""


class WouldEmpty(DynTreeError, ValueError):
    """Удаление последнего листа."""


class OutOfRange(DynTreeError, IndexError):
    """Запрошенная высота выше корня."""


class StructureCorrupt(DynTreeError, RuntimeError):
    """Нарушена внутренняя структура дерева."""


class KeyOrder(DynTreeError, ValueError):
    """Ключи не строго возрастают."""


class NotFound(DynTreeError, KeyError):
    """Ключ отсутствует в словаре."""


class DuplicateKey(DynTreeError, KeyError):
    """Ключ уже присутствует в словаре."""


class UseDelete(DynTreeError, ValueError):
    """Вес равен 1: вместо уменьшения нужно удаление."""


class NotUnitWeight(DynTreeError, ValueError):
    """Удалять можно только элемент веса 1."""


class EmptyDistribution(DynTreeError, ValueError):
    """Все частоты равны нулю."""


class AlphabetTooSmall(DynTreeError, ValueError):
    """В алфавите меньше двух символов."""


class NotInAlphabet(DynTreeError, KeyError):
    """Символ не входит в алфавит."""


class CorruptStream(DynTreeError, ValueError):
    """Поток битов поврежден."""


class UnexpectedEof(DynTreeError, EOFError):
    """Поток битов закончился раньше времени."""


class ParseError(DynTreeError, ValueError):
    """Ошибка разбора файла трассы."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"строка {line}: {message}")
        self.line = line


class UsageError(DynTreeError, ValueError):
    """Некорректные аргументы команды."""


@dataclass(frozen=True)
class Violation:
    """Нарушение инварианта, найденное аудитом."""

    where: str
    description: str

    def __str__(self) -> str:
        return f"{self.where}: {self.description}"
