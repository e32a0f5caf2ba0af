"""Image decoding, bilinear resampling, resolution-tier degradation, and the
synthetic corpus generator."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError


class ImageError(Exception):
    """Base class for image decoding failures."""


class UnknownImageFormatError(ImageError):
    """Byte stream does not start with a recognized magic."""


class CorruptImageError(ImageError):
    """Recognized format but the stream is malformed or truncated."""


class UnsupportedImageDepthError(ImageError):
    """Recognized format with a bit depth or color mode we do not handle."""


@dataclass
class Image:
    """8-bit RGB raster; pixels are a row-major (height, width, 3) uint8 array."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dims must be positive, got {self.width}x{self.height}")
        if self.pixels.shape != (self.height, self.width, 3) or self.pixels.dtype != np.uint8:
            raise ValueError(
                f"pixels must be uint8 ({self.height},{self.width},3), "
                f"got {self.pixels.dtype} {self.pixels.shape}"
            )


class ResolutionTier(Enum):
    """The five degradation tiers; the defining number is the output height."""

    R144 = 144
    R360 = 360
    R720 = 720
    R1080 = 1080
    R1440 = 1440

    @property
    def height(self) -> int:
        return self.value

    @property
    def canonical_size(self) -> tuple[int, int]:
        """Reference 16:9 geometry (width, height) for this tier."""
        return (self.value * 16 // 9, self.value)

    @property
    def pixel_count(self) -> int:
        w, h = self.canonical_size
        return w * h

    @classmethod
    def from_height(cls, height: int) -> "ResolutionTier":
        for tier in cls:
            if tier.value == height:
                return tier
        raise ValueError(f"unknown resolution tier {height}p")


ALL_TIERS = tuple(ResolutionTier)  # ascending height

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def decode(data: bytes) -> Image:
    """Decode PPM (binary P6, maxval 255) or PNG (8-bit RGB/RGBA) bytes."""
    if data[:2] == b"P6":
        return _decode_ppm(data)
    if data[: len(_PNG_MAGIC)] == _PNG_MAGIC:
        return _decode_png(data)
    raise UnknownImageFormatError(f"unrecognized image magic {data[:8]!r}")


def _ppm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated integer tokens after the P6 magic,
    skipping # comments; returns the tokens and the offset past the final
    single whitespace byte."""
    pos = 2
    tokens: list[int] = []
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CorruptImageError("truncated PPM header")
        token = data[start:pos]
        if not token.isdigit():
            raise CorruptImageError(f"bad PPM header token {token!r}")
        tokens.append(int(token))
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise CorruptImageError("missing whitespace after PPM maxval")
    return tokens, pos + 1


def _decode_ppm(data: bytes) -> Image:
    (width, height, maxval), offset = _ppm_tokens(data, 3)
    if width < 1 or height < 1:
        raise CorruptImageError(f"bad PPM dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedImageDepthError(f"PPM maxval {maxval} unsupported (need 255)")
    expected = width * height * 3
    raw = data[offset : offset + expected]
    if len(raw) < expected:
        raise CorruptImageError(
            f"PPM payload truncated: need {expected} bytes, have {len(raw)}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3).copy()
    return Image(width=width, height=height, pixels=pixels)


def encode_ppm(img: Image) -> bytes:
    """Binary P6 bytes; decode(encode_ppm(img)) round-trips losslessly."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def _decode_png(data: bytes) -> Image:
    try:
        pil = PILImage.open(io.BytesIO(data))
        pil.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptImageError(f"corrupt PNG stream: {exc}") from exc
    if pil.mode not in ("RGB", "RGBA"):
        raise UnsupportedImageDepthError(f"PNG mode {pil.mode!r} unsupported (need 8-bit RGB/RGBA)")
    arr = np.asarray(pil, dtype=np.uint8)
    if pil.mode == "RGBA":
        arr = arr[:, :, :3]
    h, w = arr.shape[:2]
    return Image(width=w, height=h, pixels=np.ascontiguousarray(arr))


def encode_png(img: Image) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(img.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def resample_bilinear(img: Image, width: int, height: int) -> Image:
    """Bilinear resample with half-pixel center alignment.

    Channel values are rounded half-up and clamped to 0..255, so outputs stay
    inside the source min/max per channel.
    """
    if width < 1 or height < 1:
        raise ValueError(f"target dims must be positive, got {width}x{height}")
    if width == img.width and height == img.height:
        return Image(img.width, img.height, img.pixels.copy())
    src = img.pixels.astype(np.float64)
    xs = np.clip((np.arange(width) + 0.5) * (img.width / width) - 0.5, 0, img.width - 1)
    ys = np.clip((np.arange(height) + 0.5) * (img.height / height) - 0.5, 0, img.height - 1)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, img.width - 1)
    y1 = np.minimum(y0 + 1, img.height - 1)
    fx = (xs - x0)[None, :, None]
    fy = (ys - y0)[:, None, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bot * fy
    pixels = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return Image(width=width, height=height, pixels=pixels)


def degrade_to_tier(img: Image, tier: ResolutionTier) -> Image:
    """Downscale to the tier height, preserving aspect; never upsamples."""
    if img.height <= tier.height:
        return img
    h = tier.height
    w = max(1, int(math.floor(img.width * h / img.height + 0.5)))
    return resample_bilinear(img, w, h)


def to_input_tensor(img: Image, side: int) -> np.ndarray:
    """Square bilinear resize (may upsample) and scale to [0,1]; returns [3,side,side]."""
    resized = resample_bilinear(img, side, side)
    t = resized.pixels.astype(np.float32) / np.float32(255.0)
    return np.ascontiguousarray(t.transpose(2, 0, 1))


# Synthetic corpus: simulated captures at three native-resolution bands.
# Because degradation never upsamples, a tier only destroys detail in images
# taller than it: the thumbnail band survives every tier, the mid band dies
# only at R144, the tall band dies at R144 and R360. Band heights sit near
# 2x the tier below them, where bilinear decimation mixes adjacent opposite
# cells maximally (half-phase sampling) and a checkerboard reliably washes
# toward mid-gray. The shrinking affected fraction tier by tier is what
# produces the logarithmic accuracy-vs-resolution trend.
_CAPTURE_BANDS = ((120, 140), (285, 300), (730, 755))
# 4:6:7 of every 17 consecutive images per class; all classes share the
# height distribution so capture size itself carries no class signal.
_BAND_SPLITS = (4, 10)
_CAPTURE_ASPECT = 16 / 9


def _capture_size(index: int, rng: np.random.Generator) -> tuple[int, int]:
    r = index % 17
    band = 0 if r < _BAND_SPLITS[0] else (1 if r < _BAND_SPLITS[1] else 2)
    lo, hi = _CAPTURE_BANDS[band]
    h = int(rng.integers(lo, hi + 1))
    return int(round(h * _CAPTURE_ASPECT)), h


def _checkerboard(rng: np.random.Generator, w: int, h: int) -> np.ndarray:
    # High contrast at native resolution; once degraded below its cell size the
    # board washes toward mid-gray and reads like low-amplitude noise.
    # Cells at 2.0-2.8 px fall below the resampler's tap spacing after a 2x
    # decimation, so degraded boards lose their cell structure, not just contrast.
    period = 2.0 + 0.8 * float(rng.random())
    # orientation jitter clear of the axes, where resampling lattices resonate
    theta = 0.12 + float(rng.random()) * (math.pi / 2 - 0.24)
    ox, oy = (float(v) * period for v in rng.random(2))
    amplitude = int(rng.integers(190, 241))
    dark = max(0, 128 - amplitude // 2)
    light = min(255, 128 + amplitude // 2)
    y, x = np.mgrid[0:h, 0:w]
    c, s = math.cos(theta), math.sin(theta)
    u = (x * c - y * s) / period + ox
    v = (x * s + y * c) / period + oy
    mask = (np.floor(u) + np.floor(v)) % 2
    mono = np.where(mask == 0, dark, light).astype(np.int16)
    jitter = rng.integers(-8, 9, mono.shape, dtype=np.int16)
    mono = np.clip(mono + jitter, 0, 255).astype(np.uint8)
    return np.repeat(mono[:, :, None], 3, axis=2)


def _diagonal_stripes(rng: np.random.Generator, w: int, h: int) -> np.ndarray:
    period = int(rng.integers(64, 129))
    phase = int(rng.integers(0, period))
    c0 = rng.integers(0, 81, 3)
    c1 = rng.integers(160, 256, 3)
    y, x = np.mgrid[0:h, 0:w]
    mask = ((x + y + phase) % period) < period // 2
    return np.where(mask[:, :, None], c0[None, None, :], c1[None, None, :]).astype(np.uint8)


def _uniform_noise(rng: np.random.Generator, w: int, h: int) -> np.ndarray:
    # Amplitudes span up to where washed-out checkerboards land, so degraded
    # boards have a natural wrong home while real noise stays recognizable.
    amplitude = int(rng.integers(30, 256))
    lo = max(0, 128 - amplitude // 2)
    hi = min(256, 128 + amplitude // 2 + 1)
    return rng.integers(lo, hi, (h, w, 3), dtype=np.uint8)


_GENERATORS = (_checkerboard, _diagonal_stripes, _uniform_noise)


def gen_synthetic(n_per_class: int, seed: int, out_dir: str | Path):
    """Write 3 * n_per_class PPM captures plus a manifest; byte-identical per seed.

    Class 0 is a fine checkerboard, class 1 coarse diagonal stripes, class 2
    uniform noise. Returns the loaded DatasetManifest.
    """
    from .dataset import LABEL_WIRE_NAMES, load_manifest  # deferred: dataset builds on imaging

    if n_per_class < 1:
        raise ValueError(f"n_per_class must be positive, got {n_per_class}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = []
    for label_idx, make in enumerate(_GENERATORS):
        name = LABEL_WIRE_NAMES[label_idx]
        for i in range(n_per_class):
            w, h = _capture_size(i, rng)
            img = Image(width=w, height=h, pixels=make(rng, w, h))
            rel = f"{name}_{i:04d}.ppm"
            (out_dir / rel).write_bytes(encode_ppm(img))
            lines.append(f'{{"path": "{rel}", "label": "{name}", "hardware": null}}')
    manifest_path = out_dir / "manifest.jsonl"
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return load_manifest(manifest_path)
