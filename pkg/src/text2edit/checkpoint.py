"""Deterministic checkpoint archives with bit-exact round-trips.

A checkpoint is a STORED (uncompressed) zip holding one JSON header plus one
raw little-endian buffer per parameter array. Entry order, JSON key order,
and zip timestamps are all fixed, so saving the same logical state twice
produces byte-identical files. Layout:

    header.json          {"version", "kind", "config", "metadata",
                          "arrays": {name: {"shape", "dtype"}}, "vocab"}
    arrays/<name>.bin    raw buffer, C order, dtype per the header

Array names may contain dots (module parameter paths); dtypes use numpy's
byte-order-explicit codes (e.g. "<f4").
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Vocabulary
from .errors import FormatError, InvalidInputError

FORMAT_VERSION = 1

MODEL_KINDS = ("bucket", "e2e", "filterbank")

# constant timestamp: zip stores local mtimes, which would break determinism
_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass
class Checkpoint:
    """In-memory form of one checkpoint archive."""

    kind: str
    config: dict
    arrays: dict[str, np.ndarray]
    vocab: Vocabulary | None = None
    metadata: dict = field(default_factory=dict)


def _write_entry(zf: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o600 << 16
    zf.writestr(info, payload)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    """Serialize a checkpoint; equal states yield byte-identical files."""
    if ckpt.kind not in MODEL_KINDS:
        raise InvalidInputError(f"unknown model kind {ckpt.kind!r}")
    header = {
        "version": FORMAT_VERSION,
        "kind": ckpt.kind,
        "config": ckpt.config,
        "metadata": ckpt.metadata,
        "arrays": {
            name: {"shape": list(arr.shape), "dtype": arr.dtype.str}
            for name, arr in sorted(ckpt.arrays.items())
        },
        "vocab": (
            {"tokens": list(ckpt.vocab.tokens), "min_count": ckpt.vocab.min_count}
            if ckpt.vocab is not None
            else None
        ),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        _write_entry(zf, "header.json", json.dumps(header, sort_keys=True).encode())
        for name in sorted(ckpt.arrays):
            arr = np.ascontiguousarray(ckpt.arrays[name])
            _write_entry(zf, f"arrays/{name}.bin", arr.tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read an archive back into memory, validating version and layout."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read("header.json"))
            version = header.get("version")
            if version != FORMAT_VERSION:
                raise FormatError(f"unsupported checkpoint version {version!r}")
            arrays = {}
            for name, meta in header["arrays"].items():
                raw = zf.read(f"arrays/{name}.bin")
                arrays[name] = np.frombuffer(raw, dtype=np.dtype(meta["dtype"])).reshape(
                    meta["shape"]
                ).copy()
            vocab = None
            if header.get("vocab") is not None:
                vocab = Vocabulary(
                    tokens=tuple(header["vocab"]["tokens"]),
                    min_count=int(header["vocab"]["min_count"]),
                )
    except (KeyError, ValueError, zipfile.BadZipFile) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"not a valid checkpoint archive: {path}: {exc}") from exc
    return Checkpoint(
        kind=header["kind"],
        config=header["config"],
        arrays=arrays,
        vocab=vocab,
        metadata=header["metadata"],
    )
