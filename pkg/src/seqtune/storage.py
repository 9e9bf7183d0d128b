"""On-disk container format: JSON header + raw little-endian array payload.

Layout: 4-byte magic ``STC1``, uint32-LE header length, UTF-8 JSON header,
then the array payloads back to back in header-declared order.  The header's
``arrays`` list records name, dtype and shape of every segment, so readers
never guess.  Model files, dataset files and trace bundles all use this one
container.
"""

from __future__ import annotations

import hashlib
import json
import struct
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .datagen import Dataset
from .errors import MissingArtifactError, ValidationError
from .lstm import GridLstm, LstmParams, SequenceLstm

MAGIC = b"STC1"

_DTYPES = {"<f8": "<f8", "<f4": "<f4"}


def config_hash(obj) -> str:
    """Stable short hash of a JSON-serializable config."""
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_container(path: str | Path, header: dict,
                    arrays: dict[str, np.ndarray]) -> None:
    header = dict(header)
    header["arrays"] = []
    payload = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype == np.float32:
            dt = "<f4"
        else:
            arr = arr.astype(np.float64, copy=False)
            dt = "<f8"
        arr = arr.astype(np.dtype(dt), copy=False)  # force little endian
        header["arrays"].append(
            {"name": name, "dtype": dt, "shape": list(arr.shape)})
        payload.append(arr.tobytes())
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for chunk in payload:
            fh.write(chunk)


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"no such file: {path}")
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValidationError(f"{path} is not a seqtune container")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        arrays = {}
        for seg in header["arrays"]:
            if seg["dtype"] not in _DTYPES:
                raise ValidationError(f"unsupported dtype {seg['dtype']}")
            count = int(np.prod(seg["shape"])) if seg["shape"] else 1
            dt = np.dtype(seg["dtype"])
            buf = fh.read(count * dt.itemsize)
            arrays[seg["name"]] = np.frombuffer(buf, dtype=dt).reshape(seg["shape"])
    return header, arrays


def read_header(path: str | Path) -> dict:
    return read_container(path)[0]


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def save_model(path: str | Path, model, *, extra: dict | None = None) -> None:
    """Persist a SequenceLstm or GridLstm (exactly the three weight tensors)."""
    p = model.params
    header = {
        "kind": "grid_lstm" if isinstance(model, GridLstm) else "lstm",
        "hidden": p.hidden_size,
        "inputs": p.input_size,
        "outputs": p.output_size,
        "precision": "float32" if p.dtype == np.float32 else "float64",
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if isinstance(model, GridLstm):
        header["extents"] = [model.rows, model.cols]
    if extra:
        header.update(extra)
    write_container(path, header, p.arrays())


def load_model(path: str | Path):
    header, arrays = read_container(path)
    params = LstmParams(arrays["input_weights"].copy(),
                        arrays["recurrent_weights"].copy(),
                        arrays["output_weights"].copy())
    if header["kind"] == "grid_lstm":
        return GridLstm(params, tuple(header["extents"]))
    if header["kind"] == "lstm":
        return SequenceLstm(params)
    raise ValidationError(f"unknown model kind {header['kind']!r}")


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------

def save_dataset(path: str | Path, dataset: Dataset, *,
                 extra: dict | None = None) -> None:
    header = {
        "kind": "dataset",
        "experiment": dataset.experiment,
        "samples": dataset.samples,
        "length": dataset.length,
        "shape": list(dataset.clean.shape),
        "precision": "float64",
        "meta": dataset.meta,
    }
    if extra:
        header.update(extra)
    write_container(path, header,
                    {"clean": dataset.clean, "noisy": dataset.noisy})


def load_dataset(path: str | Path) -> Dataset:
    header, arrays = read_container(path)
    if header.get("kind") != "dataset":
        raise ValidationError(f"{path} is not a dataset file")
    return Dataset(header["experiment"], arrays["clean"].copy(),
                   arrays["noisy"].copy(), header.get("meta", {}))
