from typing import Any, Generic, Optional, TypeVar

from pydantic import BaseModel

T = TypeVar('T')


class CommandResponse(BaseModel, Generic[T]):
    """Envelope printed by every subcommand"""
    success: bool
    command: str
    data: Optional[T] = None
    message: Optional[str] = None
    error: Optional[str] = None

    @classmethod
    def success_response(cls, command: str, data: T = None, message: str = None):
        return cls(success=True, command=command, data=data, message=message)

    @classmethod
    def error_response(cls, command: str, error: str, data: Any = None, message: str = None):
        return cls(success=False, command=command, error=error, data=data, message=message)
