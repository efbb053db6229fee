"""
Versioned, checksummed binary container shared by teacher caches and model
checkpoints.

Layout: 4-byte magic, uint16 format version, uint32 header length, JSON
header, payload bytes, then a 32-byte SHA-256 digest over everything before it.
Float arrays are stored as little-endian float64 so a round trip is bit-exact.
"""

import hashlib
import json
import logging
import os
import struct
from typing import Any, Dict, Tuple

import numpy as np

from src.errors import CacheCorrupt

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sHI")
_DIGEST_SIZE = 32


def write_envelope(path: str, magic: bytes, header: Dict[str, Any], payload: bytes) -> str:
    """
    Writes an envelope atomically (temp file + rename).

    Returns:
        str: hex SHA-256 of the complete file.
    """
    if len(magic) != 4:
        raise ValueError("Envelope magic must be exactly 4 bytes")
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = _PREFIX.pack(magic, FORMAT_VERSION, len(header_bytes)) + header_bytes + payload
    digest = hashlib.sha256(body).digest()

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as f:
        f.write(body)
        f.write(digest)
    os.replace(tmp_path, path)
    return hashlib.sha256(body + digest).hexdigest()


def read_envelope(path: str, magic: bytes) -> Tuple[Dict[str, Any], bytes]:
    """
    Reads and verifies an envelope.

    Raises:
        CacheCorrupt: missing file, wrong magic or version, truncation, or a
            checksum mismatch.
    """
    if not os.path.exists(path):
        raise CacheCorrupt(f"File not found at '{path}'")
    with open(path, "rb") as f:
        blob = f.read()

    if len(blob) < _PREFIX.size + _DIGEST_SIZE:
        raise CacheCorrupt(f"'{path}' is truncated ({len(blob)} bytes)")
    body, digest = blob[:-_DIGEST_SIZE], blob[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CacheCorrupt(f"Checksum mismatch in '{path}'")

    found_magic, version, header_len = _PREFIX.unpack_from(body, 0)
    if found_magic != magic:
        raise CacheCorrupt(f"'{path}' has magic {found_magic!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise CacheCorrupt(f"'{path}' has format version {version}, expected {FORMAT_VERSION}")
    start = _PREFIX.size
    try:
        header = json.loads(body[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CacheCorrupt(f"Unreadable header in '{path}': {e}")
    return header, body[start + header_len:]


def pack_arrays(arrays: Dict[str, np.ndarray]) -> Tuple[Dict[str, Any], bytes]:
    """Serializes named float arrays; returns (layout header, payload)."""
    layout = []
    chunks = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        layout.append({"name": name, "shape": list(arr.shape)})
        chunks.append(arr.tobytes())
    return {"arrays": layout}, b"".join(chunks)


def unpack_arrays(header: Dict[str, Any], payload: bytes) -> Dict[str, np.ndarray]:
    arrays: Dict[str, np.ndarray] = {}
    offset = 0
    for entry in header.get("arrays", []):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        size = count * 8
        if offset + size > len(payload):
            raise CacheCorrupt(f"Array '{entry['name']}' runs past the end of the payload")
        arrays[entry["name"]] = np.frombuffer(payload, dtype="<f8", count=count,
                                              offset=offset).reshape(shape).astype(np.float64)
        offset += size
    if offset != len(payload):
        raise CacheCorrupt(f"{len(payload) - offset} trailing payload bytes")
    return arrays


def hash_arrays(arrays: Dict[str, np.ndarray]) -> str:
    """SHA-256 over names, shapes and float64 bytes, in name order."""
    digest = hashlib.sha256()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        digest.update(name.encode("utf-8"))
        digest.update(str(arr.shape).encode("utf-8"))
        digest.update(arr.tobytes())
    return digest.hexdigest()


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
