"""8-bit PNG and binary PPM (P6) image I/O."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from ..autodiff import Tensor


class ImageIOError(OSError):
    """Raised for unreadable, truncated or unsupported image files."""

    def __init__(self, path, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)
        self.reason = reason


def to_uint8(img) -> np.ndarray:
    """(1, C, H, W) or (C, H, W) floats in [0, 1] to (H, W, C) uint8, round-to-nearest."""
    a = img.data if isinstance(img, Tensor) else np.asarray(img)
    if a.ndim == 4:
        if a.shape[0] != 1:
            raise ValueError("can only save a single image")
        a = a[0]
    if a.ndim != 3:
        raise ValueError(f"expected (C, H, W) image, got shape {a.shape}")
    return np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)


def from_uint8(a: np.ndarray, dtype=np.float64) -> Tensor:
    if a.ndim == 2:
        a = a[:, :, None]
    return Tensor((a.transpose(2, 0, 1)[None] / 255.0).astype(dtype))


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
        pos += 1
    return buf[start:pos], pos


def read_ppm(path) -> np.ndarray:
    """Parse a binary P6 file with maxval 255 into (H, W, 3) uint8."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise ImageIOError(path, f"cannot read file ({exc.strerror or exc})") from exc
    magic, pos = _read_token(buf, 0)
    if magic != b"P6":
        raise ImageIOError(path, f"not a binary PPM (magic {magic!r})")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        if not tok.isdigit():
            raise ImageIOError(path, "truncated or malformed header")
        fields.append(int(tok))
    w, h, maxval = fields
    if maxval != 255:
        raise ImageIOError(path, f"unsupported bit depth (maxval {maxval})")
    if w <= 0 or h <= 0:
        raise ImageIOError(path, f"invalid size {w}x{h}")
    pos += 1  # single whitespace byte after maxval
    need = w * h * 3
    data = buf[pos : pos + need]
    if len(data) < need:
        raise ImageIOError(path, f"truncated pixel data ({len(data)} of {need} bytes)")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()


def write_ppm(path, pixels: np.ndarray) -> None:
    if pixels.ndim == 2 or pixels.shape[2] == 1:
        pixels = np.repeat(pixels.reshape(pixels.shape[0], pixels.shape[1], 1), 3, axis=2)
    h, w, _ = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels, dtype=np.uint8).tobytes())


def _format(path, fmt: str | None) -> str:
    if fmt:
        return fmt.lower()
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".png":
        return "png"
    if ext in (".ppm", ".pnm"):
        return "ppm"
    raise ImageIOError(path, f"unknown image format {ext!r}")


def load_image(path, fmt: str | None = None, dtype=np.float64) -> Tensor:
    """Load an 8-bit image as a (1, C, H, W) tensor in [0, 1]."""
    fmt = _format(path, fmt)
    if fmt == "ppm":
        return from_uint8(read_ppm(path), dtype)
    if fmt != "png":
        raise ImageIOError(path, f"unsupported format {fmt!r}")
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise ImageIOError(path, f"unsupported bit depth (mode {mode})")
            if mode not in ("L", "RGB"):
                im = im.convert("RGB")
            a = np.asarray(im, dtype=np.uint8)
    except ImageIOError:
        raise
    except (OSError, UnidentifiedImageError, SyntaxError, ValueError) as exc:
        raise ImageIOError(path, f"cannot decode PNG ({exc})") from exc
    return from_uint8(a, dtype)


def save_image(path, img, fmt: str | None = None) -> None:
    fmt = _format(path, fmt)
    pixels = to_uint8(img)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if fmt == "ppm":
        write_ppm(path, pixels)
        return
    if fmt != "png":
        raise ImageIOError(path, f"unsupported format {fmt!r}")
    from PIL import Image

    arr = pixels[:, :, 0] if pixels.shape[2] == 1 else pixels
    Image.fromarray(arr).save(path, format="PNG")
