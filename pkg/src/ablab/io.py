"""File formats: flat key=value configs, path files, PGM images, CSV tables."""
from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .gauge import PolylinePath


def parse_config(text: str, allowed_keys) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown or repeated keys are errors."""
    out = {}
    allowed = set(allowed_keys)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in allowed:
            raise InvalidInputError(f"config line {lineno}: unknown key {key!r}")
        if key in out:
            raise InvalidInputError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config(path, allowed_keys) -> dict[str, str]:
    return parse_config(Path(path).read_text(), allowed_keys)


def read_path_file(path) -> PolylinePath:
    """One ``x y`` pair per line; an optional first directive ``closed`` or ``open``."""
    closed = False
    pts = []
    first = True
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if first and line.lower() in ("closed", "open"):
            closed = line.lower() == "closed"
            first = False
            continue
        first = False
        parts = line.replace(",", " ").split()
        try:
            x, y = map(float, parts)
        except ValueError:
            raise InvalidInputError(f"{path}:{lineno}: expected 'x y', got {raw!r}") from None
        pts.append((x, y))
    return PolylinePath(pts, closed=closed)


def write_pgm(path, values, maxval: int = 65535) -> None:
    """Binary PGM; rows are the second array axis, flipped so +y points up."""
    a = np.asarray(values, dtype=float)
    img = a.T[::-1]
    top = img.max()
    scaled = np.zeros(img.shape) if top <= 0 else np.clip(img / top, 0, 1) * maxval
    data = np.rint(scaled).astype(">u2" if maxval > 255 else "u1")
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode())
        fh.write(data.tobytes())


def _pgm_tokens(blob: bytes, count: int):
    pos = 0
    tokens = []
    while len(tokens) < count:
        m = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)").match(blob, pos)
        if not m:
            raise InvalidInputError("truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens, pos


def read_pgm(path) -> np.ndarray:
    """Read a P2 or P5 PGM into an (nx, ny) array using the same orientation as write_pgm."""
    blob = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _pgm_tokens(blob, 4)
    w, h, maxval = int(w), int(h), int(maxval)
    if magic == b"P5":
        dtype = ">u2" if maxval > 255 else "u1"
        data = np.frombuffer(blob[pos + 1:], dtype=dtype, count=w * h)
    elif magic == b"P2":
        data = np.array(blob[pos:].split()[: w * h], dtype=int)
    else:
        raise InvalidInputError(f"not a PGM file: {path}")
    if data.size != w * h:
        raise InvalidInputError(f"PGM {path} holds {data.size} pixels, header says {w * h}")
    return data.reshape(h, w)[::-1].T.copy()


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_state_csv(path, grid, state) -> None:
    """Snapshot as ``x,y,re,im`` for every site."""
    x, y = grid.coordinates()
    a = state.amplitude
    write_csv(path, ["x", "y", "re", "im"],
              zip(x.ravel(), y.ravel(), a.real.ravel(), a.imag.ravel()))
