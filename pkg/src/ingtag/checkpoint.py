"""Binary checkpoint container.

Layout: 8 magic bytes, a little-endian uint64 header length, a UTF-8 JSON
header, then the raw little-endian float64 buffers of every tensor listed
in the header, in header order.  The header carries a SHA-256 of the
payload so truncation and bit-rot are caught before any state is built.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import Vocab
from .features import EmbeddingTable, PosEmbeddingTable
from .model import Hyper, LayerParams, ModelParams
from .tensor import Tensor

TAGGER_MAGIC = b"INGTAG01"
CRF_MAGIC = b"INGCRF01"
_LEN = struct.Struct("<Q")


class CheckpointError(Exception):
    """Unreadable, truncated or incompatible checkpoint."""


def write_container(path: str | Path, magic: bytes, header: dict, arrays: Mapping[str, np.ndarray]) -> None:
    bufs = []
    meta = []
    for name, arr in arrays.items():
        a = np.array(arr, dtype="<f8", order="C")
        meta.append({"name": name, "shape": list(a.shape)})
        bufs.append(a.tobytes())
    payload = b"".join(bufs)
    header = dict(header, tensors=meta, payload_bytes=len(payload),
                  sha256=hashlib.sha256(payload).hexdigest())
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(magic)
        f.write(_LEN.pack(len(head)))
        f.write(head)
        f.write(payload)
    os.replace(tmp, path)


def read_container(path: str | Path, magic: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if len(blob) < 16:
        raise CheckpointError(f"{path}: truncated checkpoint ({len(blob)} bytes)")
    if blob[:8] != magic:
        if blob[:6] == magic[:6]:
            raise CheckpointError(f"{path}: unsupported checkpoint version {blob[6:8]!r}, expected {magic[6:8]!r}")
        raise CheckpointError(f"{path}: bad magic {blob[:8]!r}, expected {magic!r}")
    (n,) = _LEN.unpack(blob[8:16])
    if 16 + n > len(blob):
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[16:16 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from e
    payload = blob[16 + n:]
    if len(payload) != header.get("payload_bytes"):
        raise CheckpointError(f"{path}: payload is {len(payload)} bytes, header says {header.get('payload_bytes')}")
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise CheckpointError(f"{path}: payload checksum mismatch")
    arrays = {}
    off = 0
    for meta in header["tensors"]:
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        arrays[meta["name"]] = np.frombuffer(payload, dtype="<f8", count=count, offset=off).reshape(shape).astype(np.float64)
        off += 8 * count
    return header, arrays


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    emb = params.embeddings
    header = {
        "kind": "tagger",
        "hyper": params.hyper.to_dict(),
        "vocab": params.vocab.to_dict(),
        "label_aliases": params.label_aliases,
        "embeddings": {
            "dim": emb.dim,
            "seed": emb.seed,
            "frozen": emb.frozen,
            "pretrained_tokens": sorted(emb.pretrained_index, key=emb.pretrained_index.__getitem__),
            "oov_tokens": sorted(emb.oov_index, key=emb.oov_index.__getitem__),
        },
        "pos_tags": list(params.pos.tags),
    }
    write_container(path, TAGGER_MAGIC, header, {n: t.data for n, t in params.named_tensors()})


def load_checkpoint(path: str | Path) -> ModelParams:
    header, arrays = read_container(path, TAGGER_MAGIC)
    try:
        hyper = Hyper.from_dict(header["hyper"])
        e = header["embeddings"]
        emb = EmbeddingTable(e["dim"], e["seed"])
        emb.set_pretrained(e["pretrained_tokens"], arrays["emb.pretrained"])
        emb.set_tunable(hyper.tune_embeddings)
        emb.oov_index = {t: i for i, t in enumerate(e["oov_tokens"])}
        emb.oov = Tensor(arrays["emb.oov"], requires_grad=True, name="emb.oov")
        emb.frozen = e["frozen"]
        pos = PosEmbeddingTable(e["dim"], header["pos_tags"])
        pos.vectors = Tensor(arrays["pos"], requires_grad=True, name="pos")
        layers = []
        for i in range(hyper.n_layers):
            kw = {}
            for key in LayerParams.__dataclass_fields__:
                name = f"layers.{i}.{key}"
                if name in arrays:
                    kw[key] = Tensor(arrays[name], requires_grad=True, name=name)
            layers.append(LayerParams(**kw))
        return ModelParams(
            hyper=hyper,
            layers=layers,
            output_w=Tensor(arrays["output_w"], requires_grad=True, name="output_w"),
            embeddings=emb,
            pos=pos,
            vocab=Vocab.from_dict(header["vocab"]),
            label_aliases=dict(header["label_aliases"]),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise CheckpointError(f"{path}: inconsistent checkpoint contents: {err}") from err
