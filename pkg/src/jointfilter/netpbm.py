"""Binary Netpbm images: P5 (grey, 8/16-bit) and P6 (RGB, 8/16-bit).

Samples are returned as float64 ``(C, H, W)`` arrays scaled to [0, 1] by
the file's maxval. 16-bit samples are big-endian, as Netpbm requires.
"""

import numpy as np

from .tensor import ShapeError


class NetpbmError(ValueError):
    pass


_CHANNELS = {b"P5": 1, b"P6": 3}


def _header(data):
    """Return (magic, width, height, maxval, raster offset)."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise NetpbmError("malformed header: unexpected end of file")
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    if pos >= n or not data[pos:pos + 1].isspace():
        raise NetpbmError("malformed header: missing whitespace before raster")
    magic = tokens[0]
    if magic not in _CHANNELS:
        raise NetpbmError(f"unsupported magic {magic!r}; only P5 and P6 are read")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise NetpbmError(f"malformed header: {exc}") from None
    if width < 1 or height < 1:
        raise NetpbmError(f"malformed header: bad size {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise NetpbmError(f"unsupported maxval {maxval}")
    return magic, width, height, maxval, pos + 1


def decode(data):
    """Parse Netpbm bytes; returns ``(tensor, maxval)``."""
    magic, w, h, maxval, off = _header(bytes(data))
    c = _CHANNELS[magic]
    dtype = ">u2" if maxval > 255 else "u1"
    need = w * h * c * np.dtype(dtype).itemsize
    if len(data) - off < need:
        raise NetpbmError(f"truncated payload: need {need} bytes, have {len(data) - off}")
    raw = np.frombuffer(data, dtype=dtype, count=w * h * c, offset=off)
    img = raw.reshape(h, w, c).transpose(2, 0, 1).astype(np.float64) / maxval
    return img, maxval


def encode(img, maxval=255):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ShapeError(f"can only write 1- or 3-channel images, got {img.shape}")
    if not 1 <= maxval <= 65535:
        raise NetpbmError(f"unsupported maxval {maxval}")
    magic = b"P5" if img.shape[0] == 1 else b"P6"
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    raster = q.transpose(1, 2, 0).astype(dtype).tobytes()
    head = b"%s\n%d %d\n%d\n" % (magic, img.shape[2], img.shape[1], maxval)
    return head + raster


def read_image(path):
    with open(path, "rb") as fh:
        return decode(fh.read())[0]


def read_image_maxval(path):
    with open(path, "rb") as fh:
        return decode(fh.read())


def write_image(path, img, maxval=255):
    with open(path, "wb") as fh:
        fh.write(encode(img, maxval))
