import typing as t
from dataclasses import dataclass, field

from clypi import ClypiException


class NuggetException(ClypiException):
    kind: t.ClassVar[str] = "usage"
    exit_code: t.ClassVar[int] = 1


class ConfigError(NuggetException):
    kind = "config"


class ArgumentError(NuggetException, ValueError):
    kind = "argument"


class DataError(NuggetException):
    kind = "data"
    exit_code = 2


class GenerationError(DataError):
    pass


class FormatVersionError(DataError):
    pass


class MalformedRecordError(DataError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class DatasetIOError(DataError):
    pass


class UndefinedMetricError(DataError):
    pass


class NumericalError(NuggetException):
    kind = "numerical"
    exit_code = 3


class SingularMatrixError(NumericalError):
    def __init__(self, condition: float) -> None:
        super().__init__(f"matrix is singular to working precision (condition {condition:.3e})")
        self.condition = condition


class ConvergenceError(NumericalError):
    pass


@dataclass
class CauseNode:
    exc: BaseException
    children: list[t.Self] = field(default_factory=list)


def _build_cause_tree(err: BaseException) -> CauseNode:
    root = CauseNode(err)

    if err.__cause__ is not None:
        root.children.append(_build_cause_tree(err.__cause__))

    if isinstance(err, ExceptionGroup):
        for sub_exc in err.exceptions:
            root.children.append(_build_cause_tree(sub_exc))

    return root


def _message(e: BaseException) -> str:
    return str(e.args[0]) if e.args else e.__class__.__name__


def format_reason(err: BaseException) -> str:
    """
    Collapses an exception and its causes into a single line, outermost
    message first. E.g.: "cannot load d.jsonl: line 3: truncated record"
    """
    parts: list[str] = []

    def _walk(node: CauseNode) -> None:
        parts.append(_message(node.exc))
        for child in node.children:
            _walk(child)

    _walk(_build_cause_tree(err))
    return ": ".join(p for p in parts if p)


def kind_of(err: BaseException) -> str:
    if isinstance(err, NuggetException):
        return err.kind
    return "internal"


def exit_code_of(err: BaseException | None) -> int:
    if err is None:
        return 0
    if isinstance(err, NuggetException):
        return err.exit_code
    return 1
