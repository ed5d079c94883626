from __future__ import annotations
from typing import Optional

# exit code 규약: 0 성공, 2 입력/사용 오류, 3 수치 비수렴
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3


class ForgeError(Exception):
    exit_code = 1


class DomainError(ForgeError, ValueError):
    """인덱스 범위, 길이/차원 불일치, k 범위 등 전제조건 위반"""
    exit_code = EXIT_USAGE


class InputFormatError(DomainError):
    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.path, self.line, self.column = path, line, column
        self._message = message
        loc = ""
        if path:
            loc = str(path)
            if line is not None:
                loc += f":{line}"
                if column is not None:
                    loc += f":{column}"
            loc += ": "
        super().__init__(f"{loc}{message}")

    def __reduce__(self):
        return (InputFormatError, (self._message, self.path, self.line, self.column))


class SolverError(ForgeError, RuntimeError):
    exit_code = EXIT_NONCONVERGED

    def __init__(self, message: str, residual: Optional[float] = None,
                 iterations: Optional[int] = None):
        self.residual, self.iterations = residual, iterations
        self._message = message
        detail = []
        if residual is not None:
            detail.append(f"residual={residual:.3e}")
        if iterations is not None:
            detail.append(f"iterations={iterations}")
        super().__init__(message + (f" ({', '.join(detail)})" if detail else ""))

    def __reduce__(self):
        return (SolverError, (self._message, self.residual, self.iterations))


class TrialError(ForgeError):
    """Monte Carlo trial 실패. 재현용 seed를 같이 보고한다."""

    def __init__(self, trial: int, seed: int, cause: BaseException):
        self.trial, self.seed, self.cause = trial, seed, cause
        self.exit_code = getattr(cause, "exit_code", EXIT_USAGE if isinstance(cause, ValueError) else 1)
        super().__init__(f"trial {trial} failed (seed={seed}): {cause}")

    def __reduce__(self):
        return (TrialError, (self.trial, self.seed, self.cause))
