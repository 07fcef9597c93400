class LabError(Exception):
    """Базовая ошибка лаборатории"""


class LayoutError(LabError, ValueError):
    """Токен не лежит в подсловаре, который требует его слот"""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class FramingError(LabError, ValueError):
    """Длина речевого потока не кратна числу слотов кадра"""


class ConfigError(LabError, ValueError):
    """Некорректная конфигурация запуска"""


class FormatError(LabError, ValueError):
    """Контекст задачи собран из неполных частей"""


class ShapeError(LabError, ValueError):
    """Размер группы не совпадает с g модели"""


class SequenceLengthError(LabError, ValueError):
    """Последовательность длиннее max_positions"""


class SingularityError(LabError, ValueError):
    """Вырожденная ковариационная матрица"""


class EncodingError(LabError, ValueError):
    """Символ вне алфавита кодека"""


class DivergenceError(LabError, RuntimeError):
    """Лосс стал NaN/inf во время обучения"""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class EmptyInputError(LabError, ValueError):
    """Пустой вход там, где он запрещён"""


class DataError(LabError, ValueError):
    """Отсутствует split или файл корпуса"""
