"""Manifest + raw blob file format.

A bundle named ``<stem>`` is two files:

``<stem>.manifest``
    UTF-8 text, one ``key=value`` per line, in a fixed order. Arrays are
    listed as ``array.<name>=<dtype>:<shape>`` in the order their bytes
    appear in the blobs; ``<shape>`` is ``RxC`` (or ``scalar``).
``<stem>.f64`` / ``<stem>.i32``
    Concatenated little-endian float64 / int32 payloads.

Nothing time- or host-dependent is written, so save → load → save is
byte-identical.
"""

import logging
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1"
BLOB_DTYPES = {"f64": np.dtype("<f8"), "i32": np.dtype("<i4")}


def _stem(path: str | Path) -> Path:
    path = Path(path)
    if path.suffix in (".manifest", ".f64", ".i32"):
        path = path.with_suffix("")
    return path


def _shape_str(shape: tuple) -> str:
    return "x".join(str(s) for s in shape) if shape else "scalar"


def _parse_shape(text: str) -> tuple:
    return () if text == "scalar" else tuple(int(s) for s in text.split("x"))


def write_bundle(path: str | Path, header: dict[str, object], arrays: dict[str, np.ndarray]) -> Path:
    """Write ``header`` and ``arrays``; returns the manifest path.

    Float arrays go to the ``.f64`` blob, integer arrays to ``.i32``.
    """
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"format_version={FORMAT_VERSION}"]
    lines += [f"{key}={value}" for key, value in header.items()]
    payloads: dict[str, list[bytes]] = {"f64": [], "i32": []}
    for name, value in arrays.items():
        value = np.asarray(value)
        blob = "i32" if np.issubdtype(value.dtype, np.integer) else "f64"
        payloads[blob].append(np.ascontiguousarray(value, dtype=BLOB_DTYPES[blob]).tobytes())
        lines.append(f"array.{name}={blob}:{_shape_str(value.shape)}")
    manifest = stem.with_suffix(".manifest")
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    for blob, chunks in payloads.items():
        target = stem.with_suffix(f".{blob}")
        if chunks:
            target.write_bytes(b"".join(chunks))
        elif target.exists():
            target.unlink()
    logger.debug(f"Wrote bundle {stem} ({len(arrays)} arrays)")
    return manifest


def read_bundle(path: str | Path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    """Inverse of ``write_bundle``; arrays come back as writable copies."""
    stem = _stem(path)
    header: dict[str, str] = {}
    layout: list[tuple[str, str, tuple]] = []
    for line in stem.with_suffix(".manifest").read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        if key.startswith("array."):
            blob, _, shape = value.partition(":")
            layout.append((key[len("array."):], blob, _parse_shape(shape)))
        else:
            header[key] = value
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"Unsupported bundle format version: {header.get('format_version')!r}")
    raw = {
        blob: stem.with_suffix(f".{blob}").read_bytes()
        for blob in BLOB_DTYPES
        if any(entry[1] == blob for entry in layout)
    }
    offsets = {blob: 0 for blob in BLOB_DTYPES}
    arrays: dict[str, np.ndarray] = {}
    for name, blob, shape in layout:
        dtype = BLOB_DTYPES[blob]
        count = int(np.prod(shape)) if shape else 1
        start = offsets[blob]
        end = start + count * dtype.itemsize
        if end > len(raw[blob]):
            raise ValueError(f"Blob {blob} is truncated while reading {name}")
        arrays[name] = np.frombuffer(raw[blob][start:end], dtype=dtype).reshape(shape).copy()
        offsets[blob] = end
    for blob, data in raw.items():
        if offsets[blob] != len(data):
            raise ValueError(f"Blob {blob} has {len(data) - offsets[blob]} trailing bytes")
    return header, arrays
