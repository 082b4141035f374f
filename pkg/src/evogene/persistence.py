"""Single-file checkpoint container with bit-exact round trips.

Layout: magic "GENE", uint32 format version, uint64 header length, a
UTF-8 JSON header, then the payload of concatenated little-endian
float64 arrays. The header carries the user config, a tensor manifest
(store, name, shape, byte offset) in insertion order, and a CRC32 over
the payload so corruption is detected before any array is handed out.
"""

import json
import os
import struct
import tempfile
import zlib

import numpy as np

from .errors import DataError, NumericError
from .numcore import ParamStore

MAGIC = b"GENE"
FORMAT_VERSION = 1


def _normalize(models) -> dict:
    if isinstance(models, ParamStore):
        return {"model": models}
    if isinstance(models, dict):
        return models
    raise DataError(
        f"models must be a ParamStore or a name->ParamStore dict, got {type(models).__name__}"
    )


def save_checkpoint(models, config: dict, path: str) -> None:
    """Write stores and config to path atomically."""
    stores = _normalize(models)
    manifest = []
    chunks = []
    offset = 0
    for store_name, store in stores.items():
        arrays = store.state_arrays()
        for name, arr in arrays.items():
            a = np.ascontiguousarray(arr, dtype="<f8")
            if not np.all(np.isfinite(a)):
                raise NumericError(
                    f"non-finite values in {store_name}/{name}; refusing to save"
                )
            manifest.append(
                {
                    "store": store_name,
                    "name": name,
                    "shape": list(a.shape),
                    "offset": offset,
                }
            )
            chunks.append(a.tobytes())
            offset += a.nbytes
    payload = b"".join(chunks)

    header = {
        "config": config,
        "manifest": manifest,
        "payload_len": len(payload),
        "payload_crc32": zlib.crc32(payload) & 0xFFFFFFFF,
    }
    header_bytes = json.dumps(
        header, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")

    blob = b"".join(
        [
            MAGIC,
            struct.pack("<I", FORMAT_VERSION),
            struct.pack("<Q", len(header_bytes)),
            header_bytes,
            payload,
        ]
    )
    fd, tmp = tempfile.mkstemp(
        dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str):
    """Read a checkpoint back as ({store: {name: array}}, config)."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise DataError(f"cannot read checkpoint {path}: {e}") from e

    if len(blob) < 16:
        raise DataError(f"checkpoint {path} is truncated (only {len(blob)} bytes)")
    if blob[:4] != MAGIC:
        raise DataError(
            f"checkpoint {path} has bad magic {blob[:4]!r}, expected {MAGIC!r}"
        )
    (version,) = struct.unpack("<I", blob[4:8])
    if version != FORMAT_VERSION:
        raise DataError(
            f"checkpoint {path} is format version {version}; "
            f"this build reads version {FORMAT_VERSION}"
        )
    (header_len,) = struct.unpack("<Q", blob[8:16])
    if len(blob) < 16 + header_len:
        raise DataError(f"checkpoint {path} is truncated inside the header")
    try:
        header = json.loads(blob[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"checkpoint {path} header is not valid JSON: {e}") from e

    payload = blob[16 + header_len:]
    if len(payload) != header["payload_len"]:
        raise DataError(
            f"checkpoint {path} payload is {len(payload)} bytes, "
            f"header promises {header['payload_len']}"
        )
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    if crc != header["payload_crc32"]:
        raise DataError(
            f"checkpoint {path} failed the payload checksum: "
            f"crc32 {crc:#010x} != recorded {header['payload_crc32']:#010x}"
        )

    stores: dict[str, dict[str, np.ndarray]] = {}
    for entry in header["manifest"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * 8
        if end > len(payload):
            raise DataError(
                f"checkpoint {path} manifest entry "
                f"{entry['store']}/{entry['name']} runs past the payload"
            )
        arr = np.frombuffer(payload[start:end], dtype="<f8").reshape(shape).copy()
        stores.setdefault(entry["store"], {})[entry["name"]] = arr
    return stores, header["config"]


def restore_store(store: ParamStore, arrays: dict[str, np.ndarray]) -> ParamStore:
    """Load checkpoint arrays into an already-constructed store."""
    store.load_arrays(arrays)
    return store
