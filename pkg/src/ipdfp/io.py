"""File formats used by the command line: LibSVM, PGM, key=value configs, atomic writes."""
import os
import re
import tempfile

import numpy as np

from .problems import LogRegDataset

__all__ = [
    "FormatError",
    "load_libsvm",
    "dump_libsvm",
    "load_pgm",
    "save_pgm",
    "read_config",
    "atomic_write_text",
    "atomic_write_bytes",
]


class FormatError(ValueError):
    """Malformed input file; the message names the file and, when known, the line."""


def load_libsvm(path):
    """Parse ``label idx:val ...`` lines (1-based indices) into a dataset.

    Labels 0 and 1 map to -1 and +1; ``-1`` and ``+1`` pass through.  Blank
    lines and ``#`` comments are ignored.  The feature count is the largest
    index seen.
    """
    labels, rows = [], []
    q = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                lab = float(tokens[0])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad label {tokens[0]!r}") from None
            if lab not in (-1.0, 0.0, 1.0):
                raise FormatError(f"{path}:{lineno}: label {tokens[0]} not in {{-1, 0, +1}}")
            row = {}
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: malformed token {tok!r}") from None
                if j < 1:
                    raise FormatError(f"{path}:{lineno}: index {j} is not 1-based")
                row[j] = v
                q = max(q, j)
            labels.append(1.0 if lab == 1.0 else -1.0)
            rows.append(row)
    if not rows:
        raise FormatError(f"{path}: no samples")
    A = np.zeros((len(rows), q))
    for i, row in enumerate(rows):
        for j, v in row.items():
            A[i, j - 1] = v
    return LogRegDataset(A, np.array(labels))


def dump_libsvm(data):
    """Serialise a dataset back to LibSVM text (nonzeros only, ``repr`` floats)."""
    out = []
    for a, y in zip(data.features, data.labels):
        toks = [f"{j + 1}:{float(a[j])!r}" for j in np.flatnonzero(a)]
        out.append(" ".join(["+1" if y > 0 else "-1"] + toks))
    return "\n".join(out) + "\n"


def _pgm_header(buf):
    """Return (magic, w, h, maxval, offset of first pixel byte)."""
    fields = []
    pos = 0
    n = len(buf)
    while len(fields) < 4:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        fields.append(buf[start:pos])
    magic = fields[0]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"not a P2/P5 PGM (magic {magic!r})")
    try:
        w, h, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise FormatError("non-integer PGM header field") from None
    if w <= 0 or h <= 0:
        raise FormatError(f"bad PGM size {w}x{h}")
    if not 0 < maxval <= 255:
        raise FormatError(f"PGM maxval {maxval} outside 1..255")
    # exactly one whitespace byte separates the header from P5 raster data
    return magic.decode(), w, h, maxval, pos + 1


def load_pgm(path):
    """Read a P2 or P5 PGM; returns ``(row-major float vector, h, w, maxval)``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    try:
        magic, w, h, maxval, off = _pgm_header(buf)
        if magic == "P5":
            raster = buf[off : off + w * h]
            if len(raster) < w * h:
                raise FormatError(f"truncated pixel data ({len(raster)} of {w * h} bytes)")
            img = np.frombuffer(raster, dtype=np.uint8).astype(float)
        else:
            body = re.sub(rb"#[^\n\r]*", b" ", buf[off - 1 :]).split()
            if len(body) < w * h:
                raise FormatError(f"truncated pixel data ({len(body)} of {w * h} values)")
            img = np.array([int(t) for t in body[: w * h]], dtype=float)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None
    except ValueError:
        raise FormatError(f"{path}: non-integer pixel value") from None
    if np.any(img > maxval):
        raise FormatError(f"{path}: pixel value above maxval {maxval}")
    return img, h, w, maxval


def save_pgm(path, img, h, w, maxval=255, binary=True):
    """Write a PGM, clamping to ``[0, maxval]`` and rounding half to even."""
    if not 0 < maxval <= 255:
        raise ValueError(f"maxval {maxval} outside 1..255")
    px = np.clip(np.rint(np.asarray(img, dtype=float).ravel()), 0, maxval).astype(np.uint8)
    if px.size != h * w:
        raise ValueError(f"{px.size} pixels for a {h}x{w} image")
    if binary:
        data = f"P5\n{w} {h}\n{maxval}\n".encode() + px.tobytes()
    else:
        rows = (" ".join(str(int(v)) for v in px[r * w : (r + 1) * w]) for r in range(h))
        data = (f"P2\n{w} {h}\n{maxval}\n" + "\n".join(rows) + "\n").encode()
    atomic_write_bytes(path, data)


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment.  Values stay strings."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep or not key.strip():
                raise FormatError(f"{path}:{lineno}: expected key=value")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def atomic_write_bytes(path, data):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))
