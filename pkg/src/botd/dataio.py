"""Annotation parsing, raster/polygon files, dataset manifests and synthetic data."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import geometry as geo
from .errors import BotdError, ParseError

DONT_CARE = "###"
CTW_POINTS = 14
KINDS = ("squares", "disks", "convex", "ribbons")


@dataclass(eq=False)
class TextInstanceAnnotation:
    polygon: np.ndarray
    care: bool = True
    transcription: str | None = None
    lenient: bool = False   # parsed from a non-canonical coordinate count

    def __eq__(self, other):
        if not isinstance(other, TextInstanceAnnotation):
            return NotImplemented
        return (np.array_equal(self.polygon, other.polygon) and self.care == other.care
                and self.transcription == other.transcription and self.lenient == other.lenient)

    def __repr__(self):
        return (f"TextInstanceAnnotation({len(self.polygon)} pts, care={self.care}, "
                f"transcription={self.transcription!r})")


# --------------------------------------------------------------------------
# annotation text formats
# --------------------------------------------------------------------------

def _lines(content):
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    if content.startswith("﻿"):
        content = content[1:]
    for no, line in enumerate(content.splitlines(), start=1):
        line = line.strip()
        if line:
            yield no, line


def _number(tok: str) -> float | None:
    try:
        v = float(tok)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _polygon(coords, no) -> np.ndarray:
    try:
        return geo.as_polygon(np.asarray(coords, dtype=np.float64).reshape(-1, 2))
    except BotdError as exc:
        raise ParseError(str(exc), no) from None


def parse_icdar2015(content) -> list[TextInstanceAnnotation]:
    """``x1,y1,...,x4,y4[,transcription]`` per line; ``###`` marks don't-care."""
    out = []
    for no, line in _lines(content):
        fields = line.split(",")
        coords = []
        for tok in fields[:8]:
            v = _number(tok.strip())
            if v is None:
                raise ParseError(f"non-numeric coordinate {tok!r}", no)
            coords.append(v)
        if len(coords) < 8:
            raise ParseError(f"expected 8 coordinates, got {len(coords)}", no)
        text = ",".join(fields[8:]) if len(fields) > 8 else None
        care = text != DONT_CARE
        out.append(TextInstanceAnnotation(_polygon(coords, no), care, text))
    return out


def parse_ctw1500(content, lenient: bool = True) -> list[TextInstanceAnnotation]:
    """Comma-separated coordinates, canonically 28 values (14 points).

    Trailing non-numeric fields are kept as the transcription.  With
    ``lenient`` any even count of at least 6 values is accepted and the
    annotation is flagged ``lenient=True``.
    """
    out = []
    for no, line in _lines(content):
        fields = line.split(",")
        coords = []
        for tok in fields:
            v = _number(tok.strip())
            if v is None:
                break
            coords.append(v)
        rest = fields[len(coords):]
        # a number after the first non-numeric field means a broken coordinate
        if any(_number(t.strip()) is not None for t in rest[1:]):
            raise ParseError(f"non-numeric coordinate {rest[0]!r}", no)
        text = ",".join(rest) if rest else None
        n = len(coords)
        flagged = False
        if n != 2 * CTW_POINTS:
            if not lenient or n < 6 or n % 2:
                raise ParseError(f"expected {2 * CTW_POINTS} coordinates, got {n}", no)
            flagged = True
        care = text != DONT_CARE
        out.append(TextInstanceAnnotation(_polygon(coords, no), care, text, flagged))
    return out


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def format_polygon(poly) -> str:
    return ",".join(_fmt(v) for v in np.asarray(poly, dtype=np.float64).ravel())


def format_icdar2015(annotations) -> str:
    lines = []
    for a in annotations:
        if len(a.polygon) != 4:
            raise ValueError("ICDAR2015 annotations are quadrilaterals")
        line = format_polygon(a.polygon)
        text = a.transcription if a.care or a.transcription is not None else DONT_CARE
        if text is not None:
            line += "," + text
        lines.append(line)
    return "".join(s + "\n" for s in lines)


def format_ctw1500(annotations) -> str:
    lines = []
    for a in annotations:
        line = format_polygon(a.polygon)
        text = a.transcription if a.care or a.transcription is not None else DONT_CARE
        if text is not None:
            line += "," + text
        lines.append(line)
    return "".join(s + "\n" for s in lines)


PARSERS = {"icdar2015": parse_icdar2015, "ctw1500": parse_ctw1500}
FORMATTERS = {"icdar2015": format_icdar2015, "ctw1500": format_ctw1500}


def write_polygons(path, polygons) -> None:
    """One polygon per line as comma-separated integers."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in polygons:
            fh.write(",".join(str(int(round(v))) for v in np.asarray(p, dtype=np.float64).ravel()))
            fh.write("\n")


def read_polygons(path) -> list[np.ndarray]:
    return [a.polygon for a in parse_ctw1500(Path(path).read_text(encoding="utf-8"))]


# --------------------------------------------------------------------------
# rasters
# --------------------------------------------------------------------------

def write_pgm(path, image) -> None:
    """Binary PGM (P5).  Bool masks map to 0/255."""
    a = np.asarray(image)
    if a.dtype == bool:
        a = a.astype(np.uint8) * 255
    a = np.ascontiguousarray(a, dtype=np.uint8)
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(a.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ParseError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise ParseError(f"{path}: 16-bit PGM not supported")
    pos += 1
    body = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return body.reshape(h, w).copy()


def write_float_raster(path, values) -> None:
    """``<u4 width, <u4 height`` header, then row-major ``<f4`` values."""
    a = np.asarray(values, dtype="<f4")
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", w, h))
        fh.write(np.ascontiguousarray(a).tobytes())


def read_float_raster(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise ParseError(f"{path}: truncated float raster")
    w, h = struct.unpack("<II", data[:8])
    if len(data) != 8 + 4 * w * h:
        raise ParseError(f"{path}: expected {w}x{h} values")
    return np.frombuffer(data, dtype="<f4", offset=8).reshape(h, w).astype(np.float64)


# --------------------------------------------------------------------------
# dataset manifests
# --------------------------------------------------------------------------

def write_dataset(directory, dataset, fmt: str | None = None) -> Path:
    """Write annotation files plus ``manifest.json``; returns the manifest path.

    ``dataset`` is a sequence of ``((width, height), annotations)``.  The
    format defaults to ICDAR2015 when every polygon is a quad, else CTW1500.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    images = []
    for idx, ((w, h), anns) in enumerate(dataset):
        f = fmt or ("icdar2015" if anns and all(len(a.polygon) == 4 for a in anns) else "ctw1500")
        name = f"img_{idx:04d}"
        (d / f"{name}.txt").write_text(FORMATTERS[f](anns), encoding="utf-8")
        images.append({"name": name, "width": int(w), "height": int(h),
                       "annotation": f"{name}.txt", "format": f})
    manifest = d / "manifest.json"
    manifest.write_text(json.dumps({"images": images}, indent=2) + "\n", encoding="utf-8")
    return manifest


def load_dataset(manifest) -> list[tuple[str, tuple[int, int], list[TextInstanceAnnotation]]]:
    path = Path(manifest)
    if path.is_dir():
        path = path / "manifest.json"
    meta = json.loads(path.read_text(encoding="utf-8"))
    out = []
    for entry in meta["images"]:
        content = (path.parent / entry["annotation"]).read_text(encoding="utf-8")
        anns = PARSERS[entry.get("format", "ctw1500")](content)
        out.append((entry["name"], (int(entry["width"]), int(entry["height"])), anns))
    return out


# --------------------------------------------------------------------------
# synthetic shapes
# --------------------------------------------------------------------------

MIN_INRADIUS = 8.0
MIN_GAP = 2


def _convex_hull(points: np.ndarray) -> np.ndarray:
    pts = sorted(set(map(tuple, points.tolist())))
    if len(pts) < 3:
        return np.asarray(pts, dtype=np.float64)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], dtype=np.float64)


def _shape(rng: np.random.Generator, kind: str, size: int) -> np.ndarray:
    # polygon around the origin with integer vertices
    s = size / 640.0
    if kind == "squares":
        a = int(rng.integers(int(24 * s) + 1, int(96 * s) + 2))
        p = np.array([[0, 0], [a, 0], [a, a], [0, a]], dtype=np.float64)
    elif kind == "disks":
        r = rng.uniform(16 * s + 1, 64 * s + 2)
        t = 2 * np.pi * np.arange(32) / 32
        p = np.round(np.stack([r * np.cos(t), r * np.sin(t)], axis=1))
    elif kind == "convex":
        r = rng.uniform(28 * s + 1, 80 * s + 2)
        k = int(rng.integers(8, 17))
        ang = rng.uniform(0, 2 * np.pi, k)
        rad = r * np.sqrt(rng.uniform(0.3, 1.0, k))
        p = _convex_hull(np.round(np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)))
    elif kind == "ribbons":
        inner = rng.uniform(60 * s, 240 * s)
        width = rng.uniform(18 * s + 1, 44 * s + 2)
        span = rng.uniform(0.5, 1.4) * min(1.0, 160 * s / inner + 0.35)
        start = -np.pi / 2 - span / 2 + rng.uniform(-0.3, 0.3)
        t = start + span * np.arange(CTW_POINTS // 2) / (CTW_POINTS // 2 - 1)
        if rng.random() < 0.5:
            t = t + np.pi          # bowl opening the other way
        outer_r = inner + width
        top = np.stack([outer_r * np.cos(t), outer_r * np.sin(t)], axis=1)
        bottom = np.stack([inner * np.cos(t[::-1]), inner * np.sin(t[::-1])], axis=1)
        p = np.round(np.concatenate([top, bottom]))
    else:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    p = p - p.min(axis=0)
    if geo.signed_area(p) < 0:
        p = p[::-1].copy()
    return p


def _min_d2_between(a_mask: np.ndarray, b_mask: np.ndarray) -> float:
    if not a_mask.any() or not b_mask.any():
        return math.inf
    return float(geo.squared_distance_to_foreground(a_mask)[b_mask].min())


def _adjacent_pair(p: np.ndarray, gap: int) -> np.ndarray:
    # Stack a copy of p below itself, as close as the gap allows: the first
    # row offset (with a small horizontal jitter) whose closest pixel pair
    # sits exactly gap + 1 apart, else the first that clears the gap.
    h = int(p[:, 1].max()) + 1
    w = int(p[:, 0].max()) + 1
    slack = 4
    canvas_h, canvas_w = 2 * h + gap + 4, w + 2 * slack + 2
    base = p + [slack, 0]
    a = geo.rasterize_polygon(base, canvas_w, canvas_h)
    d2 = geo.squared_distance_to_foreground(a)
    need = (gap + 1) ** 2
    fallback = None
    rows, cols = np.nonzero(a)
    for t in range(1, h + gap + 4):
        for dx in sorted(range(-slack, slack + 1), key=abs):
            # integer translation of integer vertices shifts the raster exactly
            b = np.zeros_like(a)
            b[rows + t, cols + dx] = True
            if (a & b).any():
                continue
            closest = d2[b].min()
            if closest == need:
                return p + [dx, t]
            if closest > need and fallback is None:
                fallback = p + [dx, t]
        if fallback is not None:
            return fallback
    return p + [0, h + gap + 1]


def _acceptable(p: np.ndarray) -> bool:
    if not geo.is_simple(p):
        return False
    try:
        m = geo.rasterize_polygon(p, int(p[:, 0].max()) + 2, int(p[:, 1].max()) + 2)
    except BotdError:
        return False
    if not m.any():
        return False
    return math.sqrt(geo.squared_distance_transform(m).max()) >= MIN_INRADIUS


def _window_mask(p: np.ndarray, size: int):
    # rasterized polygon restricted to its bounding box: (mask, row0, col0)
    c0, r0 = np.floor(p.min(axis=0)).astype(int)
    c1, r1 = np.ceil(p.max(axis=0)).astype(int)
    c0, r0 = max(c0, 0), max(r0, 0)
    c1, r1 = min(c1, size), min(r1, size)
    return geo.rasterize_window(p, c0, r0, c1 - c0, r1 - r0), r0, c0


def _mark_forbidden(forbidden: np.ndarray, m: np.ndarray, r0: int, c0: int) -> None:
    pad = MIN_GAP + 1
    h, w = forbidden.shape
    wr0, wc0 = max(r0 - pad, 0), max(c0 - pad, 0)
    wr1, wc1 = min(r0 + m.shape[0] + pad, h), min(c0 + m.shape[1] + pad, w)
    win = np.zeros((wr1 - wr0, wc1 - wc0), dtype=bool)
    win[r0 - wr0:r0 - wr0 + m.shape[0], c0 - wc0:c0 - wc0 + m.shape[1]] = m
    forbidden[wr0:wr1, wc0:wc1] |= geo.dilate_disk(win, MIN_GAP + 0.9)


def synth_image(seed: int, index: int, kind: str, size: int = 640, instances: int = 1,
                adhesion: bool = False, max_tries: int = 200):
    """One synthetic image: ``((size, size), annotations)``.

    Instances keep at least ``MIN_GAP`` background pixels between each other.
    With ``adhesion`` they come in vertically stacked pairs separated by
    exactly that gap at their closest point.
    """
    rng = np.random.default_rng([seed, index, KINDS.index(kind)])
    forbidden = np.zeros((size, size), dtype=bool)
    anns: list[TextInstanceAnnotation] = []
    placed = 0
    while placed < instances:
        group = None
        for _ in range(max_tries):
            p = _shape(rng, kind, size)
            if not _acceptable(p):
                continue
            group = [p]
            if adhesion and placed + 1 < instances:
                group.append(_adjacent_pair(p, MIN_GAP))
            allv = np.concatenate(group)
            span = allv.max(axis=0)
            if np.any(span + 2 * MIN_GAP >= size):
                group = None
                continue
            off = np.array([rng.integers(MIN_GAP, size - int(span[0]) - MIN_GAP),
                            rng.integers(MIN_GAP, size - int(span[1]) - MIN_GAP)], dtype=np.float64)
            group = [g + off for g in group]
            windows = [_window_mask(g, size) for g in group]
            if any((m & forbidden[r0:r0 + m.shape[0], c0:c0 + m.shape[1]]).any()
                   for m, r0, c0 in windows):
                group = None
                continue
            break
        if group is None:
            if placed == 0:
                raise ValueError(f"no {kind} instance fits a {size}px image")
            break
        for g, (m, r0, c0) in zip(group, windows):
            anns.append(TextInstanceAnnotation(g, True, None))
            _mark_forbidden(forbidden, m, r0, c0)
        placed += len(group)
    return (size, size), anns


def synth_dataset(seed: int, count: int, kind: str, size: int = 640, instances: int = 1,
                  adhesion: bool = False):
    """``count`` deterministic images, each a pure function of ``(seed, index)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    return [synth_image(seed, i, kind, size, instances, adhesion) for i in range(count)]
