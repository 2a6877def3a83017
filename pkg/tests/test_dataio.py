import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from botd import dataio, geometry as geo
from botd.dataio import TextInstanceAnnotation, parse_ctw1500, parse_icdar2015
from botd.errors import ParseError

WORDS = st.text(alphabet=st.characters(whitelist_categories=("Lu", "Ll"), whitelist_characters="!?.-'"),
                min_size=1, max_size=12)


def test_icdar_examples():
    a, = parse_icdar2015("0,0,10,0,10,5,0,5,hello")
    assert a.polygon.shape == (4, 2) and a.care and a.transcription == "hello"
    b, = parse_icdar2015("0,0,10,0,10,5,0,5,###")
    assert not b.care
    with pytest.raises(ParseError) as err:
        parse_icdar2015("0,0,10,0")
    assert err.value.line == 1


def test_icdar_details():
    anns = parse_icdar2015("﻿1,1,9,1,9,6,1,6,a,b\n\n2,2,8,2,8,7,2,7\n")
    assert anns[0].transcription == "a,b"
    assert anns[1].transcription is None and anns[1].care
    with pytest.raises(ParseError) as err:
        parse_icdar2015("1,1,9,1,9,6,1,6\n1,1,9,x,9,6,1,6\n")
    assert err.value.line == 2
    with pytest.raises(ParseError):
        parse_icdar2015("0,0,5,5,10,10,15,15,flat")


def _ctw_line(n, text=None):
    t = 2 * math.pi * np.arange(n) / n
    pts = np.round(np.stack([50 + 40 * np.cos(t), 50 + 20 * np.sin(t)], 1)).astype(int)
    return ",".join(map(str, pts.ravel())) + ("," + text if text else "")


def test_ctw_examples():
    a, = parse_ctw1500(_ctw_line(14))
    assert a.polygon.shape == (14, 2) and not a.lenient and a.care
    with pytest.raises(ParseError):
        parse_ctw1500(",".join(_ctw_line(14).split(",")[:27]))
    quad, = parse_ctw1500("0,0,10,0,10,5,0,5")
    assert quad.polygon.shape == (4, 2) and quad.lenient
    with pytest.raises(ParseError):
        parse_ctw1500("0,0,10,0,10,5,0,5", lenient=False)


def test_ctw_mixed_fixture():
    content = "\n".join([_ctw_line(14, "curved"), "3,3,30,3,30,12,3,12,###", _ctw_line(7)])
    anns = parse_ctw1500(content)
    assert [len(a.polygon) for a in anns] == [14, 4, 7]
    assert [a.lenient for a in anns] == [False, True, True]
    assert [a.care for a in anns] == [True, False, True]
    assert anns[0].transcription == "curved"
    with pytest.raises(ParseError) as err:
        parse_ctw1500(_ctw_line(14) + "\n1,2,x,4,5,6,7,8")
    assert err.value.line == 2


@st.composite
def annotations(draw, n_points):
    count = draw(st.integers(0, 5))
    out = []
    for _ in range(count):
        n = n_points if n_points else draw(st.integers(3, 16))
        r = draw(st.floats(5, 100))
        cx, cy = draw(st.integers(0, 500)), draw(st.integers(0, 500))
        t = 2 * math.pi * np.arange(n) / n
        pts = np.stack([cx + r * np.cos(t), cy + r * np.sin(t)], 1)
        if draw(st.booleans()):
            pts = np.round(pts)
        care = draw(st.booleans())
        text = draw(st.one_of(st.none(), WORDS)) if care else dataio.DONT_CARE
        out.append(TextInstanceAnnotation(pts, care, text, lenient=n_points is None and n != 14))
    return out


@settings(max_examples=100, deadline=None)
@given(annotations(4))
def test_icdar_round_trip(anns):
    assert parse_icdar2015(dataio.format_icdar2015(anns)) == anns


@settings(max_examples=100, deadline=None)
@given(annotations(None))
def test_ctw_round_trip(anns):
    assert parse_ctw1500(dataio.format_ctw1500(anns)) == anns


def test_dont_care_without_text_writes_marker():
    a = TextInstanceAnnotation(np.array([[0, 0], [4, 0], [4, 4], [0, 4]], float), care=False)
    assert dataio.format_icdar2015([a]).strip().endswith(",###")
    with pytest.raises(ValueError):
        pentagon = np.array([[0, 0], [4, 0], [5, 3], [2, 5], [-1, 3]], float)
        dataio.format_icdar2015([TextInstanceAnnotation(pentagon)])


def test_polygon_file_round_trip(tmp_path):
    polys = [np.array([[1, 2], [30, 2], [30, 9], [1, 9]], float), np.array([[0, 0], [5, 1], [2, 7]], float)]
    dataio.write_polygons(tmp_path / "p.txt", polys)
    assert (tmp_path / "p.txt").read_text() == "1,2,30,2,30,9,1,9\n0,0,5,1,2,7\n"
    back = dataio.read_polygons(tmp_path / "p.txt")
    assert all(np.array_equal(a, b) for a, b in zip(back, polys))


def test_dataset_manifest_round_trip(tmp_path):
    data = dataio.synth_dataset(2, 3, "ribbons", size=320) + dataio.synth_dataset(2, 2, "squares", size=320)
    manifest = dataio.write_dataset(tmp_path, data)
    meta = json.loads(manifest.read_text())
    assert [e["format"] for e in meta["images"]] == ["ctw1500"] * 3 + ["icdar2015"] * 2
    loaded = dataio.load_dataset(tmp_path)
    assert [dims for _, dims, _ in loaded] == [d for d, _ in data]
    for (_, _, got), (_, want) in zip(loaded, data):
        assert [a.polygon.tolist() for a in got] == [a.polygon.tolist() for a in want]


def test_pgm_with_comment(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n3 2\n255\n" + bytes([0, 255, 0, 255, 0, 255]))
    assert dataio.read_pgm(tmp_path / "c.pgm").tolist() == [[0, 255, 0], [255, 0, 255]]
    (tmp_path / "bad.pgm").write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(ParseError):
        dataio.read_pgm(tmp_path / "bad.pgm")


def test_float_raster_truncated(tmp_path):
    (tmp_path / "t.f32").write_bytes(b"\x02\x00\x00\x00\x02\x00\x00\x00abc")
    with pytest.raises(ParseError):
        dataio.read_float_raster(tmp_path / "t.f32")


# ---------------------------------------------------------------- synthetic data

def _bytes(data):
    return json.dumps([[list(d), [a.polygon.tolist() for a in anns]] for d, anns in data]).encode()


def test_synth_deterministic():
    a = dataio.synth_dataset(7, 10, "squares", 640)
    b = dataio.synth_dataset(7, 10, "squares", 640)
    assert _bytes(a) == _bytes(b)
    assert _bytes(a) != _bytes(dataio.synth_dataset(8, 10, "squares", 640))
    # each image is a pure function of (seed, index)
    assert _bytes(a[3:4]) == _bytes([dataio.synth_image(7, 3, "squares", 640)])


def test_synth_disks_are_regular_32_gons():
    for _, anns in dataio.synth_dataset(7, 10, "disks", 640):
        for a in anns:
            p = a.polygon
            assert len(p) == 32
            c = p.mean(axis=0)
            rad = np.hypot(*(p - c).T)
            # integer vertices: regular up to rounding
            assert rad.max() - rad.min() <= 1.5
            ang = np.unwrap(np.arctan2(*(p - c).T[::-1]))
            assert np.allclose(np.abs(np.diff(ang)), 2 * np.pi / 32, atol=0.06)


def test_synth_ribbons_have_14_vertices():
    for _, anns in dataio.synth_dataset(7, 10, "ribbons", 640):
        assert anns and all(len(a.polygon) == 14 for a in anns)


def test_synth_errors():
    with pytest.raises(ValueError):
        dataio.synth_dataset(0, 1, "stars")
    with pytest.raises(ValueError):
        dataio.synth_dataset(0, 0, "disks")
    with pytest.raises(ValueError):
        dataio.synth_image(0, 0, "ribbons", size=64)


def test_synth_polygon_invariants_1000_seeds():
    for seed in range(1000):
        kind = dataio.KINDS[seed % 4]
        (w, h), anns = dataio.synth_image(seed, 0, kind, 640)
        assert (w, h) == (640, 640) and anns
        for a in anns:
            p = a.polygon
            assert len(p) >= 3 and np.isfinite(p).all()
            assert np.array_equal(p, np.round(p))
            assert geo.signed_area(p) > 0
            assert geo.is_simple(p)
            assert p.min() >= 0 and p.max() <= 640


def test_synth_instances_keep_gap():
    for kind in dataio.KINDS:
        for (w, h), anns in dataio.synth_dataset(9, 3, kind, 640, instances=6, adhesion=True):
            assert len(anns) == 6
            masks = [geo.rasterize_polygon(a.polygon, w, h) for a in anns]
            for i in range(len(masks)):
                d2 = geo.squared_distance_to_foreground(masks[i])
                for j in range(i + 1, len(masks)):
                    assert d2[masks[j]].min() >= (dataio.MIN_GAP + 1) ** 2
            # adhesion pairs sit close: first pair within a few px
            d2 = geo.squared_distance_to_foreground(masks[0])[masks[1]].min()
            assert d2 <= 13
