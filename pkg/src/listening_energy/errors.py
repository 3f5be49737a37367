"""Exception hierarchy shared by every module.

Each class carries the process exit code the CLI maps it to.
"""

from __future__ import annotations


class ToolkitError(Exception):
    exit_code = 1


class UsageError(ToolkitError, ValueError):
    """Invalid arguments or violated preconditions."""

    exit_code = 2


class InputFormatError(ToolkitError):
    exit_code = 3


class MissingFile(InputFormatError, FileNotFoundError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"file not found: {self.path}")


class MalformedLine(InputFormatError, ValueError):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {reason}")


class ParseError(InputFormatError, ValueError):
    def __init__(self, locator: str, reason: str):
        self.locator = locator
        super().__init__(f"{locator}: {reason}")


class OutOfRange(InputFormatError, ValueError):
    def __init__(self, field: str, value):
        self.field = field
        super().__init__(f"{field} must be an integer in [1, 5], got {value!r}")


class StructureViolation(ToolkitError, ValueError):
    exit_code = 4

    def __init__(self, conversation_id: str, rule: str, detail: str = ""):
        self.conversation_id = conversation_id
        self.rule = rule
        msg = f"conversation {conversation_id!r} violates {rule}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class EmptyUtterance(StructureViolation):
    def __init__(self, conversation_id: str = "", position: int | None = None):
        self.position = position
        where = f"position {position}" if position is not None else ""
        super().__init__(conversation_id, "empty-utterance", where)


class EmptyInput(UsageError):
    pass


class MixedRoles(UsageError):
    pass


class TooShort(UsageError):
    pass


class MissingSummary(UsageError):
    def __init__(self, dataset_id: str):
        self.dataset_id = dataset_id
        super().__init__(f"no trajectory summary for dataset {dataset_id!r}")


class ProviderError(ToolkitError):
    exit_code = 5

    def __init__(self, message: str, status: int | None = None, attempts: int = 0):
        self.status = status
        self.attempts = attempts
        super().__init__(f"{message} (status={status}, attempts={attempts})")


class ReplayMiss(ProviderError):
    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"no recorded exchange for request {digest[:16]}", None, 0)


class MalformedCompletion(ToolkitError, ValueError):
    exit_code = 5

    def __init__(self, reason: str, excerpt: str = ""):
        self.reason = reason
        self.excerpt = excerpt[:120]
        super().__init__(f"{reason}: {self.excerpt!r}" if excerpt else reason)
