"""Minimal PGM (P2/P5) image I/O; enough for grayscale experiment tiles."""

from __future__ import annotations

import numpy as np


def read_pgm(path) -> np.ndarray:
    """Read a P2 or P5 PGM file into a float array scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise ValueError(f"{path}: truncated PGM header")
        chunk = data[pos]
        if chunk in b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        if chunk in b" \t\r\n":
            pos += 1
            continue
        end = pos
        while end < len(data) and data[end] not in b" \t\r\n":
            end += 1
        tokens.append(data[pos:end])
        pos = end
    magic = tokens[0]
    cols, rows, maxval = (int(t) for t in tokens[1:4])
    if maxval <= 0 or maxval > 65535:
        raise ValueError(f"{path}: invalid maxval {maxval}")
    if magic == b"P2":
        values = np.array(data[pos:].split(), dtype=np.int64)
    elif magic == b"P5":
        pos += 1  # single whitespace after maxval
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        values = np.frombuffer(data[pos:], dtype=dtype, count=rows * cols).astype(np.int64)
    else:
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    if values.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} pixels, got {values.size}")
    return values.reshape(rows, cols).astype(np.float64) / maxval


def write_pgm(path, img: np.ndarray, *, binary: bool = True):
    """Write a float array (clipped to [0, 1]) as an 8-bit PGM."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    pixels = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    rows, cols = pixels.shape
    header = f"{'P5' if binary else 'P2'}\n{cols} {rows}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(pixels.tobytes())
        else:
            body = "\n".join(" ".join(str(v) for v in row) for row in pixels)
            fh.write(body.encode("ascii") + b"\n")
