"""
Reference solution repository
Caches long-N reference vectors on disk, keyed by grid size and a settings hash
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from repositories.base import BaseRepository

logger = logging.getLogger(__name__)

MAGIC = b"KOU2DREF"
HASH_LEN = 64
HEADER_LEN = len(MAGIC) + 8 + 8 + HASH_LEN


def settings_hash(settings: Dict[str, Any]) -> str:
    """sha256 hex of the canonical JSON form of the settings"""
    canonical = json.dumps(settings, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


class ReferenceRepository(BaseRepository[np.ndarray]):
    """Binary cache: magic, int64 m, int64 length, sha256 hex, then float64 values (little-endian)"""

    def __init__(self, root: Union[str, Path]):
        super().__init__(root, 'reference', '.bin')

    def name_for(self, m: int, key: str) -> str:
        return f"ref_m{m}_{key[:16]}{self.suffix}"

    def save(self, V: np.ndarray, m: int, key: str) -> Path:
        if len(key) != HASH_LEN:
            raise ValueError(f"Expected a {HASH_LEN}-character sha256 hex key, got {key!r}")
        V = np.asarray(V, dtype='<f8')
        if V.shape != ((m + 1) ** 2,):
            raise ValueError(f"Reference vector for m={m} must have length {(m + 1) ** 2}, got {V.shape}")
        self.ensure_root()
        path = self.path_for(self.name_for(m, key))
        self.log_operation("SAVE", path.name)
        header = MAGIC + np.array([m, V.size], dtype='<i8').tobytes() + key.encode('ascii')
        path.write_bytes(header + V.tobytes())
        return path

    def load(self, m: int, key: str) -> Optional[np.ndarray]:
        """Cached vector, or None on a miss; a mismatching file raises ValueError"""
        path = self.path_for(self.name_for(m, key))
        if not path.is_file():
            return None
        self.log_operation("LOAD", path.name)
        raw = path.read_bytes()
        if len(raw) < HEADER_LEN or raw[:len(MAGIC)] != MAGIC:
            raise ValueError(f"{path} is not a reference cache file")
        stored_m, length = np.frombuffer(raw, dtype='<i8', count=2, offset=len(MAGIC))
        stored_key = raw[len(MAGIC) + 16:HEADER_LEN].decode('ascii')
        if stored_m != m or stored_key != key:
            raise ValueError(f"{path} holds m={stored_m}, key={stored_key[:16]}; expected m={m}, key={key[:16]}")
        values = np.frombuffer(raw, dtype='<f8', offset=HEADER_LEN)
        if values.size != length:
            raise ValueError(f"{path} is truncated: {values.size} of {length} values")
        return values.astype(np.float64)
