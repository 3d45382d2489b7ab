"""Exception hierarchy shared by every rasill module."""

from __future__ import annotations


class RasillError(Exception):
    """Base class for all rasill errors."""


class UnboundIndexVar(RasillError):
    def __init__(self, name: str):
        super().__init__(f"unbound index variable {name!r}")
        self.name = name


class UnknownType(RasillError):
    def __init__(self, name: str):
        super().__init__(f"unknown type {name!r}")
        self.name = name


class UnknownProcess(RasillError):
    def __init__(self, name: str):
        super().__init__(f"unknown process definition {name!r}")
        self.name = name


class DomainViolation(RasillError):
    def __init__(self, name: str, env: dict[str, int], constraint: str):
        super().__init__(f"{name}{_fmt_env(env)} violates domain constraint {constraint}")
        self.name = name
        self.env = dict(env)
        self.constraint = constraint


class ArityError(RasillError):
    pass


class RsillSyntaxError(RasillError):
    """Parse failure with a 1-based source position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class SessionTypeError(RasillError):
    """A failed typing judgment.

    ``kind`` is one of InsufficientPotential, ContextMismatch, LabelNotInType,
    LinearityViolation, WrongProvidedType, DomainViolation, UnknownType.
    For InsufficientPotential, ``lhs``/``rhs`` hold both sides of the failed
    inequality ``lhs >= rhs`` and ``inequality`` its rendering.
    """

    def __init__(
        self,
        kind: str,
        detail: str,
        location: str = "",
        lhs: int | None = None,
        rhs: int | None = None,
        inequality: str | None = None,
    ):
        where = f" at {location}" if location else ""
        super().__init__(f"{kind}{where}: {detail}")
        self.kind = kind
        self.detail = detail
        self.location = location
        self.lhs = lhs
        self.rhs = rhs
        self.inequality = inequality


class Untypeable(RasillError):
    pass


class PreservationViolation(RasillError):
    def __init__(self, predicate: str, reason: str, step: int | None = None):
        at = f" after step {step}" if step is not None else ""
        super().__init__(f"configuration fails to type{at}: {predicate}: {reason}")
        self.predicate = predicate
        self.reason = reason
        self.step = step


class NoSuchMain(RasillError):
    pass


class MainNotClosed(RasillError):
    pass


class NegativePotential(RasillError):
    pass


class ProtocolViolation(RasillError):
    pass


def _fmt_env(env: dict[str, int]) -> str:
    if not env:
        return ""
    return "[" + ", ".join(f"{k}={v}" for k, v in env.items()) + "]"
