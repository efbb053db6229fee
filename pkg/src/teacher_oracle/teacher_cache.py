"""
Persistent map from sample id to the teacher's representation of that sample.

On disk the cache is a binary envelope (see src/data/binary_envelope.py) whose
header carries C, hint-D, the entry count and the teacher fingerprint, and
whose payload is fixed-width records: int64 id, C float64 logits, then hint-D
float64 hint values.
"""

import logging
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from src.data.binary_envelope import read_envelope, write_envelope
from src.errors import CacheCorrupt, InvalidInput, TeacherMismatch

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"FTIC"

CacheEntry = Tuple[np.ndarray, Optional[np.ndarray]]


def _record_dtype(num_classes: int, hint_dim: int) -> np.dtype:
    fields = [("id", "<i8"), ("logits", "<f8", (num_classes,))]
    if hint_dim:
        fields.append(("hint", "<f8", (hint_dim,)))
    return np.dtype(fields)


class TeacherCache:
    """
    Teacher outputs keyed by sample id. All entries share C and hint-D; a
    cache with hint_dim 0 stores logits only.
    """

    def __init__(self, num_classes: int, hint_dim: int = 0, fingerprint: str = ""):
        if num_classes < 1 or hint_dim < 0:
            raise InvalidInput(f"Invalid cache dimensions C={num_classes}, hint-D={hint_dim}")
        self.num_classes = int(num_classes)
        self.hint_dim = int(hint_dim)
        self.fingerprint = fingerprint
        self._entries: Dict[int, CacheEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, sample_id: int) -> bool:
        return int(sample_id) in self._entries

    def ids(self) -> List[int]:
        return sorted(self._entries)

    def get(self, sample_id: int) -> Optional[CacheEntry]:
        return self._entries.get(int(sample_id))

    def put(self, sample_id: int, logits: np.ndarray, hint: Optional[np.ndarray] = None) -> None:
        logits = np.asarray(logits, dtype=np.float64)
        if logits.shape != (self.num_classes,):
            raise CacheCorrupt(f"Logit dimension drift: expected ({self.num_classes},), got {logits.shape}")
        if self.hint_dim:
            if hint is None:
                raise CacheCorrupt(f"Sample {sample_id}: this cache stores hints but none was given")
            hint = np.asarray(hint, dtype=np.float64)
            if hint.shape != (self.hint_dim,):
                raise CacheCorrupt(f"Hint dimension drift: expected ({self.hint_dim},), got {hint.shape}")
        else:
            hint = None
        self._entries[int(sample_id)] = (logits.copy(), None if hint is None else hint.copy())

    def logits_for(self, ids: Iterable[int]) -> np.ndarray:
        return np.stack([self._require(i)[0] for i in ids])

    def hints_for(self, ids: Iterable[int]) -> np.ndarray:
        if not self.hint_dim:
            raise InvalidInput("This cache holds logits only")
        return np.stack([self._require(i)[1] for i in ids])

    def _require(self, sample_id: int) -> CacheEntry:
        entry = self._entries.get(int(sample_id))
        if entry is None:
            raise InvalidInput(f"Sample {sample_id} is not cached")
        return entry

    def persist(self, path: str) -> str:
        """Writes the cache; returns the SHA-256 of the file."""
        if not self._entries:
            raise InvalidInput("Refusing to persist an empty teacher cache")
        ids = self.ids()
        records = np.zeros(len(ids), dtype=_record_dtype(self.num_classes, self.hint_dim))
        records["id"] = ids
        records["logits"] = np.stack([self._entries[i][0] for i in ids])
        if self.hint_dim:
            records["hint"] = np.stack([self._entries[i][1] for i in ids])
        header = {
            "num_classes": self.num_classes,
            "hint_dim": self.hint_dim,
            "count": len(ids),
            "fingerprint": self.fingerprint,
        }
        digest = write_envelope(path, CACHE_MAGIC, header, records.tobytes())
        logger.info("Persisted %d teacher entries to %s", len(ids), path)
        return digest

    @classmethod
    def load(cls, path: str, num_classes: Optional[int] = None, fingerprint: Optional[str] = None,
             allow_mismatch: bool = False) -> "TeacherCache":
        """
        Reads a persisted cache.

        Args:
            path: file written by `persist`.
            num_classes: when given, the cache must have this many classes.
            fingerprint: fingerprint of the currently loaded teacher, if any.
            allow_mismatch: downgrade a fingerprint mismatch to a warning.

        Raises:
            CacheCorrupt: checksum, magic, truncation or dimension failure.
            TeacherMismatch: the cache was built by a different teacher.
        """
        header, payload = read_envelope(path, CACHE_MAGIC)
        try:
            cached_classes = int(header["num_classes"])
            hint_dim = int(header["hint_dim"])
            count = int(header["count"])
            stored_fingerprint = str(header["fingerprint"])
        except (KeyError, TypeError, ValueError) as e:
            raise CacheCorrupt(f"Cache header in '{path}' is incomplete: {e}")
        if num_classes is not None and cached_classes != num_classes:
            raise CacheCorrupt(f"Cache '{path}' was built with C={cached_classes}, experiment uses C={num_classes}")

        dtype = _record_dtype(cached_classes, hint_dim)
        if len(payload) != count * dtype.itemsize:
            raise CacheCorrupt(f"Cache '{path}' payload holds {len(payload)} bytes, expected {count * dtype.itemsize}")

        if fingerprint is not None and stored_fingerprint != fingerprint:
            message = (f"Cache '{path}' was produced by teacher {stored_fingerprint[:12]}, "
                       f"loaded teacher is {fingerprint[:12]}")
            if not allow_mismatch:
                raise TeacherMismatch(message + "; pass the override flag to use it anyway")
            logger.warning("%s; continuing because the override flag is set", message)

        records = np.frombuffer(payload, dtype=dtype, count=count)
        cache = cls(cached_classes, hint_dim, stored_fingerprint)
        for record in records:
            cache._entries[int(record["id"])] = (
                np.array(record["logits"], dtype=np.float64),
                np.array(record["hint"], dtype=np.float64) if hint_dim else None,
            )
        if len(cache) != count:
            raise CacheCorrupt(f"Cache '{path}' contains duplicate sample ids")
        return cache
