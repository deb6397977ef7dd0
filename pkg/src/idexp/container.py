"""Single-file model container and report serialization.

Layout of a container file::

    IDEXP-CONTAINER\\n
    <manifest: one line of UTF-8 JSON>\\n
    <payload: blocks back to back>

Every block is IEEE-754 binary64, little-endian, column-major, stored in the
order the manifest lists them. Each manifest block entry carries ``name``,
``shape``, ``offset`` (from the start of the payload), ``nbytes`` and a
CRC-32 of its bytes. Model files hold the blocks ``mean``, ``id_basis``,
``exp_basis``, ``id_stddev``, ``exp_stddev``; shape files hold only ``mean``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .errors import CorruptModel, MalformedManifest, UnsupportedVersion
from .model import FaceShape, ShapeModel

MAGIC = b"IDEXP-CONTAINER\n"
FORMAT_VERSION = 1
MODEL_BLOCKS = ("mean", "id_basis", "exp_basis", "id_stddev", "exp_stddev")
DTYPE = "<f8"


def atomic_write(path, data: bytes):
    """Write to a temporary sibling, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _encode(kind: str, name: str, n: int, m: int, k: int, blocks, extra=None) -> bytes:
    entries, chunks, offset = [], [], 0
    for block_name, arr in blocks:
        raw = np.asarray(arr, dtype=DTYPE).tobytes(order="F")
        entries.append({
            "name": block_name,
            "shape": list(np.shape(arr)),
            "offset": offset,
            "nbytes": len(raw),
            "crc32": zlib.crc32(raw),
        })
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "name": name,
        "n": n,
        "m": m,
        "k": k,
        "units": "mm",
        "layout": {"dtype": "float64", "byte_order": "little", "order": "column-major"},
        "blocks": entries,
    }
    if extra:
        manifest.update(extra)
    header = json.dumps(manifest, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return MAGIC + header + b"\n" + b"".join(chunks)


def _expected_shapes(kind, n, m, k):
    if kind == "shape":
        return {"mean": [n]}
    return {"mean": [n], "id_basis": [n, m], "exp_basis": [n, k], "id_stddev": [m], "exp_stddev": [k]}


def _decode(data: bytes):
    """Parse container bytes into ``(manifest, {block name: array})``."""
    if not data.startswith(MAGIC):
        raise MalformedManifest("missing container magic line")
    end = data.find(b"\n", len(MAGIC))
    if end < 0:
        raise MalformedManifest("manifest line is not terminated")
    try:
        manifest = json.loads(data[len(MAGIC):end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(manifest, dict):
        raise MalformedManifest("manifest must be a JSON object")
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"unsupported format_version {version!r} (reader knows {FORMAT_VERSION})")
    try:
        kind = manifest["kind"]
        n, m, k = (int(manifest[key]) for key in ("n", "m", "k"))
        entries = manifest["blocks"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedManifest(f"manifest field missing or invalid: {exc}") from None
    if kind not in ("model", "shape"):
        raise MalformedManifest(f"unknown container kind {kind!r}")
    layout = manifest.get("layout", {})
    if layout != {"dtype": "float64", "byte_order": "little", "order": "column-major"}:
        raise MalformedManifest(f"unsupported layout {layout!r}")
    expected = _expected_shapes(kind, n, m, k)
    names = [e.get("name") for e in entries if isinstance(e, dict)]
    if names != list(expected):
        raise MalformedManifest(f"blocks {names} do not match expected {list(expected)}")

    payload = memoryview(data)[end + 1:]
    arrays, offset = {}, 0
    for entry in entries:
        name = entry["name"]
        if entry.get("shape") != expected[name]:
            raise MalformedManifest(f"block {name}: shape {entry.get('shape')} != {expected[name]}")
        nbytes = 8 * math.prod(expected[name])
        if entry.get("nbytes") != nbytes or entry.get("offset") != offset:
            raise MalformedManifest(
                f"block {name}: offset/nbytes ({entry.get('offset')}, {entry.get('nbytes')}) "
                f"!= ({offset}, {nbytes})"
            )
        raw = bytes(payload[offset:offset + nbytes])
        if len(raw) < nbytes:
            raise CorruptModel(f"block {name} is truncated: {len(raw)} of {nbytes} bytes present")
        if zlib.crc32(raw) != entry.get("crc32"):
            raise CorruptModel(f"block {name} fails its CRC-32 checksum")
        arrays[name] = np.frombuffer(raw, dtype=DTYPE).reshape(expected[name], order="F").astype(np.float64)
        offset += nbytes
    if len(payload) != offset:
        raise CorruptModel(f"{len(payload) - offset} unexpected trailing bytes after the last block")
    return manifest, arrays


def model_to_bytes(model: ShapeModel, extra: dict | None = None) -> bytes:
    blocks = [(name, getattr(model, name)) for name in MODEL_BLOCKS]
    return _encode("model", model.name, model.n, model.m, model.k, blocks, extra)


def model_from_bytes(data: bytes) -> tuple[ShapeModel, dict]:
    manifest, arrays = _decode(data)
    if manifest["kind"] != "model":
        raise MalformedManifest("container holds a shape, not a model")
    try:
        model = ShapeModel(name=str(manifest.get("name", "model")), **arrays)
    except ValueError as exc:
        raise MalformedManifest(f"payload violates model invariants: {exc}") from None
    return model, manifest


def save_model(model: ShapeModel, path, extra: dict | None = None):
    """Write ``model`` to ``path`` atomically. ``extra`` adds manifest fields."""
    atomic_write(path, model_to_bytes(model, extra))


def load_model(path) -> ShapeModel:
    return load_model_with_manifest(path)[0]


def load_model_with_manifest(path) -> tuple[ShapeModel, dict]:
    return model_from_bytes(Path(path).read_bytes())


def save_shape(shape, path, name: str = "shape"):
    coords = shape.coords if isinstance(shape, FaceShape) else np.asarray(shape, dtype=np.float64)
    atomic_write(path, _encode("shape", name, coords.shape[0], 0, 0, [("mean", coords)]))


def load_shape(path) -> FaceShape:
    manifest, arrays = _decode(Path(path).read_bytes())
    if manifest["kind"] != "shape":
        raise MalformedManifest("container holds a model, not a shape")
    return FaceShape(arrays["mean"])


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def to_json(obj) -> str:
    """JSON text with non-finite floats written as the strings nan/inf/-inf."""
    return json.dumps(_json_safe(obj), indent=2, allow_nan=False) + "\n"


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="raise")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: repr(v) if isinstance(v, float) else v for c, v in row.items()})
    return buf.getvalue()


def write_report(report, out_dir, formats=("csv", "json")) -> list[Path]:
    """Write ``<experiment>.csv`` and/or ``<experiment>.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = report.experiment_id.value
    written = []
    if "csv" in formats:
        path = out_dir / f"{stem}.csv"
        atomic_write(path, rows_to_csv(report.columns, report.rows).encode("utf-8"))
        written.append(path)
    if "json" in formats:
        path = out_dir / f"{stem}.json"
        atomic_write(path, to_json(report.to_dict()).encode("utf-8"))
        written.append(path)
    return written
