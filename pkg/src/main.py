import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from .alphacoder import decode_sequence, encode_sequence
from .errors import DynTreeError, ParseError, UsageError
from .reports import AUDIT_MODES, make_structure, replay_trace, save_report, stats_report
from .utils import load_trace, load_user_settings, write_trace
from .workloads import DISTRIBUTIONS, generate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2

ALPHABETS = ("bytes", "present")


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Парсинг аргументов командной строки"""
    settings = load_user_settings()
    parser = argparse.ArgumentParser(description="Динамические почти оптимальные деревья поиска")
    subparsers = parser.add_subparsers(dest="command")

    # Gen command
    gen_parser = subparsers.add_parser("gen", help="Генерация трассы обращений")
    gen_parser.add_argument("--dist", required=True, help="Распределение: zipf, uniform или adversarial")
    gen_parser.add_argument("--s", type=float, default=settings['zipf_s'], help="Показатель закона Ципфа")
    gen_parser.add_argument("--n", type=int, required=True, help="Число различных ключей")
    gen_parser.add_argument("--len", type=int, required=True, dest="length", help="Длина трассы")
    gen_parser.add_argument("--seed", type=int, required=True, help="Зерно генератора")
    gen_parser.add_argument("--out", required=True, help="Файл трассы")

    # Run command
    run_parser = subparsers.add_parser("run", help="Проигрывание трассы с аудитом")
    run_parser.add_argument("--trace", required=True, help="Файл трассы")
    run_parser.add_argument("--structure", choices=["flat", "hier"], required=True, help="Тип структуры")
    run_parser.add_argument("--f", type=int, default=settings['f'], help="Число уровней иерархии")
    run_parser.add_argument("--audit", choices=AUDIT_MODES, default="final", help="Режим аудита")
    run_parser.add_argument("--c", type=int, default=None, help="Константа аудита глубины")
    run_parser.add_argument("--report", required=True, help="Файл JSON-отчета")

    # Encode command
    encode_parser = subparsers.add_parser("encode", help="Сжатие файла алфавитным кодом")
    encode_parser.add_argument("--in", required=True, dest="infile", help="Входной файл")
    encode_parser.add_argument("--out", required=True, help="Файл контейнера")
    encode_parser.add_argument("--alphabet", choices=ALPHABETS, default="bytes", help="Алфавит")

    # Decode command
    decode_parser = subparsers.add_parser("decode", help="Распаковка контейнера")
    decode_parser.add_argument("--in", required=True, dest="infile", help="Файл контейнера")
    decode_parser.add_argument("--out", required=True, help="Выходной файл")

    args = parser.parse_args(argv)
    args.settings = settings
    return args


def process_gen_command(args: argparse.Namespace) -> int:
    """Обработка команды gen"""
    if args.dist not in DISTRIBUTIONS:
        raise UsageError(f"неизвестное распределение {args.dist!r}")
    trace = generate(args.dist, args.n, args.length, args.seed, args.s)
    write_trace(trace, args.out)
    return EXIT_OK


def process_run_command(args: argparse.Namespace) -> int:
    """Обработка команды run"""
    settings = args.settings
    trace = load_trace(args.trace)
    tree = make_structure(args.structure, args.f, settings['c_f'])
    c_audit = args.c
    if c_audit is None:
        c_audit = settings['c_audit'] + (settings['c_f'] * args.f if args.structure == 'hier' else 0)
    result = replay_trace(trace, tree, args.audit, c_audit)
    report = save_report(args.report)(stats_report)(result, args.structure, args.f, args.audit)
    print(f"comparisons/W = {report['comparisons_per_W']:.4f}, H = {report['H']:.4f}")
    if result.violation is not None:
        print(f"Нарушение: {result.violation}")
        return EXIT_VIOLATION
    return EXIT_OK


def byte_alphabet(data: bytes, alphabet: str) -> List[bytes]:
    """Алфавит из однобайтовых символов: все 256 или только встреченные (минимум два)."""
    if alphabet == "bytes":
        return [bytes([value]) for value in range(256)]
    present = sorted(set(data))
    filler = (value for value in range(256) if value not in present)
    while len(present) < 2:
        present.append(next(filler))
    return [bytes([value]) for value in sorted(present)]


def process_encode_command(args: argparse.Namespace) -> int:
    """Обработка команды encode"""
    with open(args.infile, 'rb') as f:
        data = f.read()
    alphabet = byte_alphabet(data, args.alphabet)
    container = encode_sequence(alphabet, (bytes([value]) for value in data))
    with open(args.out, 'wb') as f:
        f.write(container)
    print(f"{len(data)} байт -> {len(container)} байт")
    return EXIT_OK


def process_decode_command(args: argparse.Namespace) -> int:
    """Обработка команды decode"""
    with open(args.infile, 'rb') as f:
        container = f.read()
    _, symbols = decode_sequence(container)
    with open(args.out, 'wb') as f:
        f.write(b"".join(symbols))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Главная функция для запуска приложения"""
    args = parse_args(argv)

    command_handlers: Dict[str, Callable[[argparse.Namespace], int]] = {
        "gen": process_gen_command,
        "run": process_run_command,
        "encode": process_encode_command,
        "decode": process_decode_command
    }
    if args.command not in command_handlers:
        print("Неизвестная команда. Используйте --help для списка команд")
        return EXIT_USAGE
    try:
        return command_handlers[args.command](args)
    except (ParseError, UsageError) as e:
        print(f"Ошибка: {str(e)}")
        return EXIT_USAGE
    except DynTreeError as e:
        print(f"Ошибка: {str(e)}")
        return EXIT_VIOLATION
    except OSError as e:
        print(f"Ошибка ввода-вывода: {str(e)}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
