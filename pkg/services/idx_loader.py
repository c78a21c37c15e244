"""
Reader for IDX image/label files (the MNIST distribution format).

    [offset] [type]          [value]
    0000     32 bit integer  2051 (images) / 2049 (labels), big-endian
    0004     32 bit integer  item count
    0008     32 bit integer  rows            (images only)
    0012     32 bit integer  columns         (images only)
    ....     unsigned byte   pixels row-wise / labels

Files ending in .gz are decompressed transparently.
"""
import gzip
import logging
import struct
from typing import Optional, Tuple

import numpy as np

from models.data import Dataset
from utils.errors import FormatError

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049


def _read_bytes(path: str) -> bytes:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def _parse(raw: bytes, path: str, magic: int, dim_names: Tuple[str, ...]) -> Tuple[np.ndarray, Tuple[int, ...]]:
    header_size = 4 * (1 + len(dim_names))
    if len(raw) < 4:
        raise FormatError("truncated header", field="magic", offset=len(raw), path=path)
    found = struct.unpack(">I", raw[:4])[0]
    if found != magic:
        raise FormatError(f"bad magic number {found}, expected {magic}", field="magic", offset=0, path=path)
    if len(raw) < header_size:
        raise FormatError("truncated header", field=dim_names[0], offset=len(raw), path=path)
    dims = struct.unpack(f">{len(dim_names)}I", raw[4:header_size])
    expected = int(np.prod(dims))
    body = len(raw) - header_size
    if body < expected:
        raise FormatError(
            f"truncated data: {expected} bytes declared, {body} present",
            field="data", offset=len(raw), path=path,
        )
    if body > expected:
        raise FormatError("unexpected trailing bytes", field="data", offset=header_size + expected, path=path)
    data = np.frombuffer(raw, dtype=np.uint8, offset=header_size)
    return data, dims


def load_idx(images_path: str, labels_path: str, class_count: Optional[int] = None) -> Dataset:
    """
    Load an IDX image file and its label file.

    Args:
        images_path: IDX3 images (magic 2051)
        labels_path: IDX1 labels (magic 2049)
        class_count: size of the label space; max label + 1 when omitted

    Returns:
        Dataset with flattened pixels scaled to [0, 1]

    Raises:
        FormatError: bad magic number, truncated file or count mismatch
    """
    pixels, (count, rows, cols) = _parse(
        _read_bytes(images_path), images_path, IMAGE_MAGIC, ("count", "rows", "columns")
    )
    labels, (label_count,) = _parse(_read_bytes(labels_path), labels_path, LABEL_MAGIC, ("count",))
    if label_count != count:
        raise FormatError(
            f"{label_count} labels for {count} images", field="count", offset=4, path=labels_path
        )
    if count == 0:
        raise FormatError("file holds no items", field="count", offset=4, path=images_path)

    labels = labels.astype(np.int64)
    if class_count is None:
        class_count = int(labels.max()) + 1
    elif labels.max() >= class_count:
        raise FormatError(
            f"label {labels.max()} outside 0..{class_count - 1}", field="data", offset=8, path=labels_path
        )
    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    logger.info("loaded %d images of %dx%d from %s", count, rows, cols, images_path)
    return Dataset(features, labels, class_count)
