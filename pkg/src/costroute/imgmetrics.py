"""Image sharpness as high-pass energy relative to total energy.

``sharpness(i) = sum((i - blur(i))**2) / sum(i**2)`` with a sigma=1 Gaussian
blur, sums pooled over all pixels and channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class Image:
    """H x W x C intensities in [0, 1], C in {1, 3}."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[0] < 1 or px.shape[1] < 1 or px.shape[2] not in (1, 3):
            raise ValidationError(f"image must be H x W x {{1,3}}, got shape {px.shape}")
        if not np.all((px >= 0.0) & (px <= 1.0)):
            raise ValidationError("intensities must lie in [0, 1]")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True, eq=False)
class Kernel:
    weights: np.ndarray

    @property
    def radius(self) -> int:
        return self.weights.shape[0] // 2


def gaussian_kernel(sigma: float = 1.0) -> Kernel:
    """Truncated at radius ceil(3 sigma) and renormalized to sum 1."""
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    r = math.ceil(3.0 * sigma)
    ax = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
    w /= math.fsum(w.ravel())
    w.setflags(write=False)
    return Kernel(w)


def convolve(img: Image, k: Kernel) -> Image:
    """Per-channel correlation with reflect-101 borders; shape preserved.

    Correlation and convolution coincide for the symmetric kernels used here.
    """
    out = img.pixels + kernels.blur_residual(img.pixels, np.ascontiguousarray(k.weights))
    # weights sum to 1, so results stay in [0, 1] up to rounding
    return Image(np.clip(out, 0.0, 1.0))


def sharpness(img: Image, sigma: float = 1.0) -> float:
    px = img.pixels
    denom = math.fsum((px * px).ravel())
    if denom == 0.0:
        return 0.0
    # i - blur(i) is the negated residual
    resid = kernels.blur_residual(px, np.ascontiguousarray(gaussian_kernel(sigma).weights))
    return math.fsum((resid * resid).ravel()) / denom


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif data[pos:pos + 1].isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ValidationError("netpbm: truncated header")
    return data[start:pos], pos


def read_netpbm(data: bytes) -> Image:
    """Decode binary 8-bit P5 (gray) or P6 (RGB), intensities scaled by 1/255."""
    magic, pos = _read_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise ValidationError(f"netpbm: unsupported magic {magic!r}")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        if not tok.isdigit():
            raise ValidationError(f"netpbm: bad header field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ValidationError("netpbm: empty image")
    if maxval != 255:
        raise ValidationError(f"netpbm: only maxval 255 is supported, got {maxval}")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ValidationError("netpbm: missing whitespace after maxval")
    pos += 1
    ch = 1 if magic == b"P5" else 3
    need = width * height * ch
    raw = data[pos:pos + need]
    if len(raw) != need:
        raise ValidationError(f"netpbm: expected {need} bytes of raster, got {len(raw)}")
    px = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, ch).astype(np.float64) / 255.0
    return Image(px)


def write_netpbm(img: Image) -> bytes:
    """Encode as P5/P6 with intensities rounded to 8 bits."""
    magic = b"P5" if img.channels == 1 else b"P6"
    raw = np.rint(img.pixels * 255.0).astype(np.uint8).tobytes()
    return magic + b"\n%d %d\n255\n" % (img.width, img.height) + raw
