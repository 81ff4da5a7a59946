"""Grayscale image I/O, synthetic degradation, baselines, and PSNR.

Images are plain 2-D float64 arrays with pixel values in [0, 1]; 8-bit
PGM files map through v/255.  Both the binary (P5) and ASCII (P2)
variants with maxval 255 are supported, and save followed by load is a
byte-exact identity on 8-bit data.
"""

import math
from pathlib import Path

import numpy as np

__all__ = [
    "load_pgm",
    "save_pgm",
    "degrade",
    "upsample_nearest",
    "psnr",
]

_WHITESPACE = b" \t\n\r\x0b\x0c"


def _check_image(img, name="image"):
    arr = np.asarray(img, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


class _HeaderScanner:
    """Tokenizer for PGM headers; '#' comments run to end of line."""

    def __init__(self, data):
        self.data = data
        self.pos = 0

    def _skip_separators(self):
        data = self.data
        while self.pos < len(data):
            byte = data[self.pos]
            if byte == ord("#"):
                nl = data.find(b"\n", self.pos)
                self.pos = len(data) if nl < 0 else nl + 1
            elif byte in _WHITESPACE:
                self.pos += 1
            else:
                return

    def token(self):
        self._skip_separators()
        start = self.pos
        data = self.data
        while (
            self.pos < len(data)
            and data[self.pos] not in _WHITESPACE
            and data[self.pos] != ord("#")
        ):
            self.pos += 1
        if self.pos == start:
            raise ValueError("malformed PGM header: unexpected end of file")
        return data[start : self.pos]

    def int_token(self, what):
        tok = self.token()
        try:
            value = int(tok)
        except ValueError as exc:
            raise ValueError(f"malformed PGM header: bad {what} {tok!r}") from exc
        if value <= 0:
            raise ValueError(f"malformed PGM header: {what} must be positive")
        return value


def load_pgm(path):
    """Read a P5 or P2 PGM file (maxval 255) into a [0, 1] float image."""
    data = Path(path).read_bytes()
    scanner = _HeaderScanner(data)
    magic = scanner.token()
    if magic in (b"P3", b"P6"):
        raise ValueError(
            "color PPM input is not supported; convert to grayscale PGM first"
        )
    if magic in (b"P1", b"P4"):
        raise ValueError("bitmap PBM input is not supported")
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"not a PGM file (magic {magic!r})")
    width = scanner.int_token("width")
    height = scanner.int_token("height")
    maxval = scanner.int_token("maxval")
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval}; only 255 is supported")
    count = width * height

    if magic == b"P5":
        # Exactly one whitespace byte separates the header from the payload.
        if scanner.pos >= len(data) or data[scanner.pos] not in _WHITESPACE:
            raise ValueError("malformed PGM header: missing payload separator")
        start = scanner.pos + 1
        payload = data[start : start + count]
        if len(payload) < count:
            raise ValueError(
                f"truncated PGM payload: expected {count} bytes, got {len(payload)}"
            )
        values = np.frombuffer(payload, dtype=np.uint8).astype(float)
    else:
        values = np.empty(count)
        for i in range(count):
            try:
                v = int(scanner.token())
            except ValueError as exc:
                raise ValueError(f"truncated PGM payload: {exc}") from exc
            if not (0 <= v <= maxval):
                raise ValueError(f"PGM sample {v} out of range 0..{maxval}")
            values[i] = v

    return values.reshape(height, width) / 255.0


def save_pgm(img, path, ascii_format=False):
    """Write an image as PGM, quantizing to 8 bits (round, clip)."""
    arr = _check_image(img)
    q = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    h, w = q.shape
    header = f"{'P2' if ascii_format else 'P5'}\n{w} {h}\n255\n".encode("ascii")
    if ascii_format:
        body = "\n".join(" ".join(str(v) for v in row) for row in q) + "\n"
        payload = header + body.encode("ascii")
    else:
        payload = header + q.tobytes()
    Path(path).write_bytes(payload)


def degrade(hr, q, noise_sigma=0.0, seed=0):
    """Synthetic acquisition operator: q x q block average plus noise.

    The reconstruction method never sees this operator; it exists only
    to manufacture LR test data from ground truth.  Output is clipped to
    [0, 1] and deterministic for a fixed seed.
    """
    arr = _check_image(hr, "hr")
    if q < 1:
        raise ValueError(f"magnification factor must be >= 1, got {q}")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    h, w = arr.shape
    if h % q or w % q:
        raise ValueError(
            f"image dimensions {h}x{w} must be divisible by q={q}"
        )
    lr = arr.reshape(h // q, q, w // q, q).mean(axis=(1, 3))
    if noise_sigma > 0:
        lr = lr + np.random.default_rng(seed).normal(0.0, noise_sigma, lr.shape)
    return np.clip(lr, 0.0, 1.0)


def upsample_nearest(lr, q):
    """Pixel replication by a factor q along both axes."""
    arr = _check_image(lr, "lr")
    if q < 1:
        raise ValueError(f"magnification factor must be >= 1, got {q}")
    return np.repeat(np.repeat(arr, q, axis=0), q, axis=1)


def psnr(a, b, peak=1.0):
    """Peak signal-to-noise ratio in dB; math.inf for identical images."""
    x = _check_image(a, "a")
    y = _check_image(b, "b")
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)
