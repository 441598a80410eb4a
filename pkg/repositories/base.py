"""
Base repository class for file-backed storage
Provides common path handling and listing for run artifacts
"""

import logging
from pathlib import Path
from typing import Generic, List, TypeVar, Union

logger = logging.getLogger(__name__)

T = TypeVar('T')


class BaseRepository(Generic[T]):
    """Directory-backed repository; subclasses define how records of type T are written"""

    def __init__(self, root: Union[str, Path], kind: str, suffix: str):
        self.root = Path(root)
        self.kind = kind
        self.suffix = suffix

    def log_operation(self, operation: str, name: str = ""):
        """Log persistence operations for run diagnostics"""
        logger.debug(f"{operation} {self.kind} {name} in {self.root}")

    def path_for(self, name: str) -> Path:
        name = name if name.endswith(self.suffix) else f"{name}{self.suffix}"
        return self.root / name

    def ensure_root(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        return self.root

    def list(self) -> List[str]:
        """Stored record names, sorted"""
        self.log_operation("LIST")
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.glob(f"*{self.suffix}"))
