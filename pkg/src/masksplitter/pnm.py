"""Binary netpbm I/O.

* 8-bit gray images: P5, maxval 255.
* Binary masks: P5, maxval 255, foreground written as 255; any nonzero
  pixel reads back as 1.
* Label maps: P5, maxval 65535, big-endian 16-bit ids.
* Float score maps: PFM ("Pf", little-endian float32, bottom row first).
"""

import re

import numpy as np

from masksplitter.errors import PGMFormatError
from masksplitter.masks import MAX_INSTANCES, LabelMap, as_binary_mask

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _parse_header(data: bytes, n_fields: int):
    pos = 0
    tokens = []
    for _ in range(n_fields):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PGMFormatError("truncated header")
        tokens.append(m.group(1))
        pos = m.end()
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise PGMFormatError("header must end with a single whitespace byte")
    return tokens, pos + 1


def read_pgm(path):
    """Return ``(array, maxval)`` for a binary P5 file with maxval 255 or 65535."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        magic = data[:2].decode("latin-1", "replace")
        raise PGMFormatError(f"unsupported format {magic!r}: only binary P5 graymaps are read")
    tokens, offset = _parse_header(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PGMFormatError(f"malformed header fields {tokens[1:]}") from None
    if width < 1 or height < 1:
        raise PGMFormatError(f"bad dimensions {width}x{height}")
    if maxval == 255:
        dtype = np.dtype(np.uint8)
    elif maxval == 65535:
        dtype = np.dtype(">u2")
    else:
        raise PGMFormatError(f"unsupported maxval {maxval}")
    needed = width * height * dtype.itemsize
    payload = data[offset:offset + needed]
    if len(payload) < needed:
        raise PGMFormatError(f"truncated payload: expected {needed} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=dtype).reshape(height, width), maxval


def _write_p5(path, array, maxval):
    h, w = array.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        fh.write(array.tobytes())


def read_image(path) -> np.ndarray:
    arr, maxval = read_pgm(path)
    if maxval != 255:
        raise PGMFormatError(f"gray images must have maxval 255, got {maxval}")
    return arr.copy()


def write_image(path, image):
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise PGMFormatError(f"gray images must be uint8, got {image.dtype}")
    _write_p5(path, image, 255)


def read_mask(path) -> np.ndarray:
    arr, maxval = read_pgm(path)
    if maxval != 255:
        raise PGMFormatError(f"binary masks must have maxval 255, got {maxval}")
    return as_binary_mask(arr != 0)


def write_mask(path, mask):
    _write_p5(path, as_binary_mask(mask) * np.uint8(255), 255)


def read_labels(path) -> LabelMap:
    arr, maxval = read_pgm(path)
    if maxval != 65535:
        raise PGMFormatError(f"label maps must have maxval 65535, got {maxval}")
    if arr.max(initial=0) > MAX_INSTANCES:
        raise PGMFormatError(f"label ids above {MAX_INSTANCES} are not supported")
    return LabelMap.from_array(arr.astype(np.int32))


def write_labels(path, label_map: LabelMap):
    _write_p5(path, label_map.labels.astype(">u2"), 65535)


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"Pf"):
        raise PGMFormatError("only grayscale PFM ('Pf') files are supported")
    tokens, offset = _parse_header(data, 4)
    try:
        width, height = int(tokens[1]), int(tokens[2])
        scale = float(tokens[3])
    except ValueError:
        raise PGMFormatError(f"malformed PFM header {tokens[1:]}") from None
    dtype = np.dtype("<f4" if scale < 0 else ">f4")
    needed = width * height * 4
    payload = data[offset:offset + needed]
    if len(payload) < needed:
        raise PGMFormatError(f"truncated payload: expected {needed} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=dtype).reshape(height, width)[::-1].astype(np.float64)


def write_pfm(path, array):
    array = np.asarray(array, dtype=np.float64)
    as32 = array.astype("<f4")
    if not np.array_equal(as32.astype(np.float64), array):
        raise PGMFormatError("values are not exactly representable as float32")
    h, w = array.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n%d %d\n-1.0\n" % (w, h))
        fh.write(as32[::-1].tobytes())
