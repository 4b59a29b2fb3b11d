"""FEMB and probability-CSV writers (the interchange boundary).

Format (little-endian): magic "FEMB", u16 version=1, u32 n, u32 d, u32
tag_len, tag bytes (UTF-8), n*d IEEE-754 float32 row-major, then n ids as
(u16 length, UTF-8 bytes).
"""

from __future__ import annotations

import csv
import struct

import numpy as np

_MAGIC = b"FEMB"
_VERSION = 1


def write_femb(values: np.ndarray, ids, extractor_tag: str, path) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    ids = list(ids)
    if values.ndim != 2 or values.shape[0] != len(ids):
        raise ValueError(f"{values.shape} rows vs {len(ids)} ids")
    tag = extractor_tag.encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<HIII", _VERSION, values.shape[0], values.shape[1],
                            len(tag)))
        f.write(tag)
        f.write(values.tobytes(order="C"))
        for sample_id in ids:
            encoded = sample_id.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)


def write_probs_csv(probs: np.ndarray, ids, path) -> None:
    probs = np.asarray(probs, dtype=np.float64)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id"] + [f"p{j}" for j in range(probs.shape[1])])
        for sample_id, row in zip(ids, probs):
            writer.writerow([sample_id] + [format(v, ".9g") for v in row])
