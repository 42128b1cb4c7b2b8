"""On-disk model packages.

A package directory holds one shared encoder, one subword vocabulary, and a
bundle file per language.  Tensor files use a simple container: a magic tag,
a JSON header (tensor names, dtypes, shapes, offsets, plus free-form
metadata), the raw little-endian payload, and a sha256 of the payload.
Every bundle records the encoder file's checksum so mixed-version loads are
refused.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"NTC1"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
ENCODER_NAME = "encoder.ntc"
VOCAB_NAME = "vocab.txt"
BUNDLE_DIR = "bundles"


class PackageError(ValueError):
    pass


class ChecksumError(PackageError):
    pass


def save_tensors(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    payload = bytearray()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        dtype = arr.dtype.newbyteorder("<")
        raw = arr.astype(dtype, copy=False).tobytes()
        entries.append({"name": name, "dtype": dtype.str,
                        "shape": list(arr.shape),
                        "offset": len(payload), "nbytes": len(raw)})
        payload.extend(raw)
    header = json.dumps({"version": FORMAT_VERSION, "tensors": entries,
                         "meta": meta or {}},
                        sort_keys=True).encode("utf-8")
    digest = hashlib.sha256(bytes(payload)).digest()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(payload)
        f.write(digest)


def load_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise PackageError(f"{path.name}: not a tensor container")
    (header_len,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8:8 + header_len].decode("utf-8"))
    body = blob[8 + header_len:-32]
    digest = blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"checksum mismatch in {path.name}")
    arrays = {}
    for entry in header["tensors"]:
        raw = body[entry["offset"]:entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"]))
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return arrays, header.get("meta", {})


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class Manifest:
    format_version: int
    encoder_file: str
    encoder_sha256: str
    vocab_file: str
    vocab_sha256: str
    encoder_config: dict
    languages: dict[str, dict] = field(default_factory=dict)
    # languages[lang] = {"bundle": relpath, "sha256": ..., "components": [...]}

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "encoder_file": self.encoder_file,
            "encoder_sha256": self.encoder_sha256,
            "vocab_file": self.vocab_file,
            "vocab_sha256": self.vocab_sha256,
            "encoder_config": self.encoder_config,
            "languages": self.languages,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Manifest":
        return cls(d["format_version"], d["encoder_file"], d["encoder_sha256"],
                   d["vocab_file"], d["vocab_sha256"], d["encoder_config"],
                   d["languages"])

    def save(self, package_dir) -> None:
        path = Path(package_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True),
                        encoding="utf-8")

    @classmethod
    def load(cls, package_dir) -> "Manifest":
        path = Path(package_dir) / MANIFEST_NAME
        if not path.exists():
            raise PackageError(f"no {MANIFEST_NAME} in {package_dir}")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


def verify_file(path, expected_sha: str) -> None:
    actual = sha256_file(path)
    if actual != expected_sha:
        raise ChecksumError(
            f"checksum mismatch for {Path(path).name}: "
            f"expected {expected_sha[:12]}…, found {actual[:12]}…")


def inspect_package(package_dir) -> dict:
    """Manifest, file sizes, and checksum status for `package inspect`."""
    package_dir = Path(package_dir)
    manifest = Manifest.load(package_dir)
    enc_path = package_dir / manifest.encoder_file
    info = {
        "package": str(package_dir),
        "format_version": manifest.format_version,
        "encoder": {
            "file": manifest.encoder_file,
            "bytes": enc_path.stat().st_size if enc_path.exists() else None,
            "sha256": manifest.encoder_sha256,
        },
        "vocab": {"file": manifest.vocab_file,
                  "sha256": manifest.vocab_sha256},
        "encoder_config": manifest.encoder_config,
        "languages": {},
    }
    for lang, entry in sorted(manifest.languages.items()):
        bpath = package_dir / entry["bundle"]
        nbytes = bpath.stat().st_size if bpath.exists() else None
        ratio = (nbytes / info["encoder"]["bytes"]
                 if nbytes and info["encoder"]["bytes"] else None)
        info["languages"][lang] = {
            "bundle": entry["bundle"],
            "bytes": nbytes,
            "share_of_encoder": None if ratio is None else round(ratio, 4),
            "components": entry["components"],
            "sha256": entry["sha256"],
        }
    return info
