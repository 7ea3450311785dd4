"""Minimal RIFF/WAVE reader and writer.

Supports 16- and 24-bit PCM, mono or multichannel, float data in [-1, 1],
and an optional LIST-INFO comment chunk (ICMT) used to stamp artifact ids
into saved files.  scipy's wavfile module cannot write 24-bit data or INFO
chunks, hence this module.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np


def write_wav(path, data: np.ndarray, fs: int, bits: int = 16,
              comment: str | None = None) -> Path:
    """Write float samples in [-1, 1] as PCM. data is (n,) or (n, channels)."""
    if bits not in (16, 24):
        raise ValueError(f"unsupported bit depth: {bits}")
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    n, channels = data.shape
    full_scale = float(2 ** (bits - 1) - 1)
    ints = np.round(np.clip(data, -1.0, 1.0) * full_scale).astype(np.int32)

    if bits == 16:
        payload = ints.astype("<i2").tobytes()
    else:
        le32 = ints.astype("<i4").tobytes()
        payload = b"".join(le32[i:i + 3] for i in range(0, len(le32), 4))

    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", 1, channels, fs, fs * block_align,
                      block_align, bits)

    chunks = [(b"fmt ", fmt)]
    if comment is not None:
        info = _info_chunk(comment)
        chunks.append((b"LIST", info))
    chunks.append((b"data", payload))

    body = b"WAVE"
    for tag, blob in chunks:
        body += tag + struct.pack("<I", len(blob)) + blob
        if len(blob) % 2:
            body += b"\x00"

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", len(body)) + body)
    return path


def read_wav(path):
    """Read a PCM WAV. Returns (data, fs, comment); data is float64 (n, ch),
    scaled to [-1, 1]; comment is the ICMT string or None."""
    blob = Path(path).read_bytes()
    if blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise ValueError(f"not a RIFF/WAVE file: {path}")
    pos = 12
    fmt = None
    payload = None
    comment = None
    while pos + 8 <= len(blob):
        tag = blob[pos:pos + 4]
        size = struct.unpack("<I", blob[pos + 4:pos + 8])[0]
        chunk = blob[pos + 8:pos + 8 + size]
        if tag == b"fmt ":
            fmt = struct.unpack("<HHIIHH", chunk[:16])
        elif tag == b"data":
            payload = chunk
        elif tag == b"LIST" and chunk[:4] == b"INFO":
            comment = _parse_info_comment(chunk)
        pos += 8 + size + (size % 2)
    if fmt is None or payload is None:
        raise ValueError(f"missing fmt or data chunk: {path}")
    audio_format, channels, fs, _, _, bits = fmt
    if audio_format != 1 or bits not in (16, 24):
        raise ValueError(f"unsupported format: code={audio_format} bits={bits}")

    if bits == 16:
        ints = np.frombuffer(payload, dtype="<i2").astype(np.int32)
    else:
        raw = np.frombuffer(payload, dtype=np.uint8)
        raw = raw[:len(raw) - len(raw) % 3].reshape(-1, 3)
        ints = (raw[:, 0].astype(np.int32)
                | (raw[:, 1].astype(np.int32) << 8)
                | (raw[:, 2].astype(np.int32) << 16))
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)

    full_scale = float(2 ** (bits - 1) - 1)
    data = ints.reshape(-1, channels).astype(np.float64) / full_scale
    return data, fs, comment


def _info_chunk(comment: str) -> bytes:
    text = comment.encode("utf-8") + b"\x00"
    if len(text) % 2:
        text += b"\x00"
    return b"INFO" + b"ICMT" + struct.pack("<I", len(text)) + text


def _parse_info_comment(chunk: bytes):
    pos = 4
    while pos + 8 <= len(chunk):
        tag = chunk[pos:pos + 4]
        size = struct.unpack("<I", chunk[pos + 4:pos + 8])[0]
        if tag == b"ICMT":
            return chunk[pos + 8:pos + 8 + size].rstrip(b"\x00").decode("utf-8")
        pos += 8 + size + (size % 2)
    return None
