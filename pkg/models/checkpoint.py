"""
Binary checkpoint files for classifiers.

Layout (all integers unsigned 32-bit little-endian, all reals 64-bit
little-endian IEEE floats, arrays row-major):

    [offset]  [type]        [value]
    0         4 bytes       magic b"HBCK"
    4         u32           format version (1)
    8         u32           class count C
    12        u32           extractor layer count L (0 = identity)
    16        u32           flags (bit 0: extractor frozen)
    20        u32 x (L+1)   dims: input dim, then each layer's output dim
    ...       per layer     weight (out x in) f64, then bias (out) f64
    ...       f64 x (C*d)   head weight, d = last dim
    ...       f64 x C       head bias
    end of file, no trailing bytes

read_head() uses the header to seek straight to the head block.
"""
import logging
import os
import struct
from typing import BinaryIO, List, Tuple

import numpy as np

from models.classifier import Classifier, ClassificationHead, FeatureExtractor, Layer
from utils.errors import FormatError

logger = logging.getLogger(__name__)

MAGIC = b"HBCK"
VERSION = 1
FLAG_FROZEN = 1
HEADER_SIZE = 20
F64 = np.dtype("<f8")
# Guards against allocating absurd arrays from a corrupt header
MAX_DIM = 1 << 20


def save_checkpoint(model: Classifier, path: str) -> str:
    """
    Write a classifier to disk.

    Returns:
        The path written
    """
    layers = model.extractor.layers
    dims = [model.input_dim] + [layer.out_dim for layer in layers]
    flags = FLAG_FROZEN if model.extractor.frozen else 0

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIII", VERSION, model.class_count, len(layers), flags))
        f.write(struct.pack(f"<{len(dims)}I", *dims))
        for layer in layers:
            f.write(np.ascontiguousarray(layer.weight, dtype=F64).tobytes())
            f.write(np.ascontiguousarray(layer.bias, dtype=F64).tobytes())
        f.write(np.ascontiguousarray(model.head.weight, dtype=F64).tobytes())
        f.write(np.ascontiguousarray(model.head.bias, dtype=F64).tobytes())

    logger.debug("checkpoint written to %s", path)
    return path


class _Reader:
    """Sequential reader that knows its byte offset for error messages."""

    def __init__(self, stream: BinaryIO, path: str):
        self.stream = stream
        self.path = path
        self.offset = 0

    def read(self, size: int, field: str) -> bytes:
        data = self.stream.read(size)
        if len(data) != size:
            raise FormatError(
                f"truncated file: expected {size} bytes, found {len(data)}",
                field=field, offset=self.offset, path=self.path,
            )
        self.offset += size
        return data

    def u32(self, count: int, field: str) -> Tuple[int, ...]:
        return struct.unpack(f"<{count}I", self.read(4 * count, field))

    def array(self, shape: Tuple[int, ...], field: str) -> np.ndarray:
        start = self.offset
        size = int(np.prod(shape))
        values = np.frombuffer(self.read(size * F64.itemsize, field), dtype=F64)
        if not np.all(np.isfinite(values)):
            raise FormatError("non-finite parameter value", field=field, offset=start, path=self.path)
        return values.astype(np.float64).reshape(shape)

    def skip(self, size: int, field: str):
        self.stream.seek(size, os.SEEK_CUR)
        self.offset += size
        # seeking past the end succeeds silently, the next read reports it
        if self.stream.tell() > self._length():
            raise FormatError("truncated file", field=field, offset=self.offset - size, path=self.path)

    def _length(self) -> int:
        here = self.stream.tell()
        end = self.stream.seek(0, os.SEEK_END)
        self.stream.seek(here)
        return end

    def expect_end(self):
        if self.stream.read(1):
            raise FormatError("unexpected trailing bytes", offset=self.offset, path=self.path)


def _read_header(reader: _Reader) -> Tuple[int, List[int], int]:
    magic = reader.read(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic number {magic!r}", field="magic", offset=0, path=reader.path)
    version, class_count, layer_count, flags = reader.u32(4, "header")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", field="version", offset=4, path=reader.path)
    if not 2 <= class_count <= MAX_DIM:
        raise FormatError(f"invalid class count {class_count}", field="class_count", offset=8, path=reader.path)
    if layer_count > 64:
        raise FormatError(f"invalid layer count {layer_count}", field="layer_count", offset=12, path=reader.path)
    dims_offset = reader.offset
    dims = list(reader.u32(layer_count + 1, "dims"))
    if any(d < 1 or d > MAX_DIM for d in dims):
        raise FormatError(f"invalid layer dims {dims}", field="dims", offset=dims_offset, path=reader.path)
    return class_count, dims, flags


def load_checkpoint(path: str) -> Classifier:
    """
    Read a full classifier.

    Raises:
        FormatError: bad magic/version, truncated data, non-finite values
                     or trailing bytes (message carries the byte offset)
        FileNotFoundError: missing file
    """
    with open(path, "rb") as f:
        reader = _Reader(f, path)
        class_count, dims, flags = _read_header(reader)
        layers = []
        for i in range(len(dims) - 1):
            weight = reader.array((dims[i + 1], dims[i]), f"layer[{i}].weight")
            bias = reader.array((dims[i + 1],), f"layer[{i}].bias")
            layers.append(Layer(weight, bias))
        head = _read_head_block(reader, class_count, dims[-1])
        reader.expect_end()

    extractor = FeatureExtractor(dims[0], layers, frozen=bool(flags & FLAG_FROZEN))
    return Classifier(extractor, head)


def _read_head_block(reader: _Reader, class_count: int, feature_dim: int) -> ClassificationHead:
    weight = reader.array((class_count, feature_dim), "head.weight")
    bias = reader.array((class_count,), "head.bias")
    return ClassificationHead(weight, bias)


def read_head(path: str) -> ClassificationHead:
    """Read only the classification head, seeking past the extractor."""
    with open(path, "rb") as f:
        reader = _Reader(f, path)
        class_count, dims, _ = _read_header(reader)
        extractor_bytes = sum(
            (dims[i] * dims[i + 1] + dims[i + 1]) * F64.itemsize for i in range(len(dims) - 1)
        )
        reader.skip(extractor_bytes, "extractor")
        head = _read_head_block(reader, class_count, dims[-1])
        reader.expect_end()
    return head
